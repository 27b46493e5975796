//! Python module `gdp`: graphs, simulated datasets, training and scoring.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use gdp_core::baselines::{mi_scores as mi_core, single_step_baseline, te_scores as te_core, BinningConfig};
use gdp_core::dynamics::{build_dataset, DataConfig, Dataset as CoreDataset, SystemParams};
use gdp_core::experiments::{auc as auc_core, auc_ambiguous as auc_amb_core};
use gdp_core::graphs::GraphSpec;
use gdp_core::model::{predict_scores, train as train_core, Checkpoint, TrainConfig, TrainedModel};
use gdp_core::numcore::Matrix;
use gdp_core::{GdpError, ScoreMatrix};

create_exception!(gdp, NumericError, PyException, "Training or simulation produced non-finite values.");

fn py_err(e: GdpError) -> PyErr {
    match e {
        GdpError::NonFinite { .. }
        | GdpError::Singularity(_)
        | GdpError::Divergence { .. }
        | GdpError::TrajectoryDiverged { .. }
        | GdpError::TrainingDiverged { .. } => NumericError::new_err(e.to_string()),
        GdpError::Io(io) => PyErr::from(io),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for gdp_core::Result<T> {
    fn py(self) -> PyResult<T> {
        self.map_err(py_err)
    }
}

fn rows(m: &Matrix) -> Vec<Vec<f64>> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| m[(i, j)]).collect()).collect()
}

fn matrix(rows: &[Vec<f64>]) -> PyResult<Matrix> {
    let n = rows.len();
    if rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("score matrix must be square"));
    }
    Matrix::from_vec(n, n, rows.concat()).py()
}

/// Interaction graph on `n` nodes.
#[pyclass(module = "gdp", from_py_object)]
#[derive(Clone)]
pub struct Graph {
    inner: gdp_core::Graph,
}

#[pymethods]
impl Graph {
    #[new]
    #[pyo3(signature = (n, edges, directed = false))]
    fn new(n: usize, edges: Vec<(usize, usize)>, directed: bool) -> PyResult<Self> {
        Ok(Self { inner: gdp_core::Graph::from_edges(n, directed, &edges).py()? })
    }

    /// Samples `er:n:p`, `erd:n:p`, `ba:n:m` or `ws:n:k:p`.
    #[staticmethod]
    #[pyo3(signature = (spec, seed = 0))]
    fn from_spec(spec: &str, seed: u64) -> PyResult<Self> {
        let spec: GraphSpec = spec.parse().py()?;
        Ok(Self { inner: spec.generate(seed).py()? })
    }

    #[staticmethod]
    fn from_edge_list(text: &str) -> PyResult<Self> {
        Ok(Self { inner: gdp_core::Graph::from_edge_list(text).py()? })
    }

    fn to_edge_list(&self) -> String {
        self.inner.to_edge_list()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn directed(&self) -> bool {
        self.inner.directed()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.edges()
    }

    fn edge_count(&self) -> usize {
        self.inner.edge_count()
    }

    fn adjacency(&self) -> Vec<Vec<f64>> {
        rows(self.inner.adjacency())
    }

    fn __repr__(&self) -> String {
        format!("Graph(n={}, edges={}, directed={})", self.inner.n(), self.inner.edge_count(), self.inner.directed())
    }
}

/// Normalized train/validation trajectories, optionally with the true graph.
#[pyclass(module = "gdp", from_py_object)]
#[derive(Clone)]
pub struct Dataset {
    inner: CoreDataset,
}

#[pymethods]
impl Dataset {
    /// Simulates `system` on `graph`.
    #[staticmethod]
    #[pyo3(signature = (system, graph, dt = 1, traj = 50, length = 10, valid = 10, seed = 0))]
    fn generate(system: &str, graph: &Graph, dt: usize, traj: usize, length: usize, valid: usize, seed: u64) -> PyResult<Self> {
        let params = SystemParams::from_tag(system).py()?;
        let cfg = DataConfig { n_traj: traj, traj_len: length, interval: dt, n_valid: valid, seed };
        Ok(Self { inner: build_dataset(&params, &graph.inner, &cfg).py()? })
    }

    #[staticmethod]
    fn load(manifest: PathBuf) -> PyResult<Self> {
        Ok(Self { inner: CoreDataset::load(&manifest).py()? })
    }

    fn write(&self, dir: PathBuf) -> PyResult<()> {
        self.inner.write(&dir, None).py().map(|_| ())
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn system(&self) -> &'static str {
        self.inner.system_tag()
    }

    /// `(trajectories, steps)` of the training split.
    #[getter]
    fn volume(&self) -> (usize, usize) {
        self.inner.volume()
    }

    #[getter]
    fn graph(&self) -> Option<Graph> {
        self.inner.graph.clone().map(|inner| Graph { inner })
    }

    /// Training trajectory `k` as `[t][node][dim]`.
    fn trajectory(&self, k: usize) -> PyResult<Vec<Vec<Vec<f64>>>> {
        let tr = self.inner.train.get(k).ok_or_else(|| PyValueError::new_err(format!("no training trajectory {k}")))?;
        Ok((0..tr.steps()).map(|t| (0..tr.n()).map(|i| (0..tr.dims()).map(|d| tr.value(t, i, d)).collect()).collect()).collect())
    }
}

/// A trained relational-inference model.
#[pyclass(module = "gdp")]
pub struct Model {
    inner: TrainedModel,
    config: BTreeMap<String, String>,
}

#[pymethods]
impl Model {
    /// Edge scores `[i][j]` for `i → j`.
    fn scores(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(rows(predict_scores(&self.inner.model).py()?.matrix()))
    }

    /// Orientation-free AUC per epoch; `None` where no ground truth was known.
    fn aucs(&self) -> Vec<Option<f64>> {
        self.inner.history.aucs()
    }

    fn train_losses(&self) -> Vec<f64> {
        self.inner.history.epochs.iter().map(|e| e.train_loss).collect()
    }

    #[getter]
    fn best_epoch(&self) -> Option<usize> {
        self.inner.history.best_epoch
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    /// Polynomial filter coefficients `θ_0 … θ_K`.
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.model.poly.theta.data().to_vec()
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        Checkpoint::new(&self.inner, self.config.clone()).write(&path).py()
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let ck = Checkpoint::read(&path).py()?;
        Ok(Self { inner: ck.trained(), config: ck.config })
    }
}

fn config_value(v: &Bound<'_, PyAny>) -> PyResult<serde_json::Value> {
    if v.is_none() {
        return Ok(serde_json::Value::Null);
    }
    if let Ok(b) = v.extract::<bool>() {
        return Ok(b.into());
    }
    if let Ok(i) = v.extract::<i64>() {
        return Ok(i.into());
    }
    if let Ok(f) = v.extract::<f64>() {
        return Ok(f.into());
    }
    Ok(v.extract::<String>()?.into())
}

fn train_config(options: Option<&Bound<'_, PyDict>>) -> PyResult<(TrainConfig, BTreeMap<String, String>)> {
    let mut json = serde_json::Map::new();
    let mut echo = BTreeMap::new();
    if let Some(d) = options {
        for (k, v) in d.iter() {
            let key: String = k.extract()?;
            let value = config_value(&v)?;
            echo.insert(key.clone(), value.to_string().trim_matches('"').to_string());
            json.insert(key, value);
        }
    }
    let cfg: TrainConfig = serde_json::from_value(serde_json::Value::Object(json)).map_err(|e| PyValueError::new_err(format!("training option: {e}")))?;
    cfg.validate().py()?;
    Ok((cfg, echo))
}

/// Trains GDP (or the adjacency-only model with `single_step=True`).
/// Keyword options are training settings such as `epochs`, `hidden` or
/// `lr_surrogate`.
#[pyfunction]
#[pyo3(signature = (dataset, seed = 0, single_step = false, **options))]
fn train(py: Python<'_>, dataset: &Dataset, seed: u64, single_step: bool, options: Option<&Bound<'_, PyDict>>) -> PyResult<Model> {
    let (cfg, mut config) = train_config(options)?;
    config.insert("single_step".into(), single_step.to_string());
    let data = &dataset.inner;
    let trained = py.detach(|| if single_step { single_step_baseline(data, &cfg, seed) } else { train_core(data, &cfg, seed) }).py()?;
    Ok(Model { inner: trained, config })
}

fn score_matrix(scores: Vec<Vec<f64>>, graph: &Graph) -> PyResult<ScoreMatrix> {
    ScoreMatrix::new(matrix(&scores)?, graph.inner.directed()).py()
}

/// ROC AUC (percent) of `scores` against the edges of `graph`.
#[pyfunction]
fn auc(scores: Vec<Vec<f64>>, graph: &Graph) -> PyResult<f64> {
    auc_core(&score_matrix(scores, graph)?, &graph.inner).py()
}

/// `max(auc, 100 − auc)`.
#[pyfunction]
fn auc_ambiguous(scores: Vec<Vec<f64>>, graph: &Graph) -> PyResult<f64> {
    auc_amb_core(&score_matrix(scores, graph)?, &graph.inner).py()
}

#[pyfunction]
#[pyo3(signature = (dataset, bins = 16))]
fn mi_scores(dataset: &Dataset, bins: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(mi_core(&dataset.inner, &BinningConfig::new(bins)).py()?.matrix()))
}

#[pyfunction]
#[pyo3(signature = (dataset, bins = 16))]
fn te_scores(dataset: &Dataset, bins: usize) -> PyResult<Vec<Vec<f64>>> {
    Ok(rows(te_core(&dataset.inner, &BinningConfig::new(bins)).py()?.matrix()))
}

#[pymodule]
fn gdp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NumericError", m.py().get_type::<NumericError>())?;
    m.add_class::<Graph>()?;
    m.add_class::<Dataset>()?;
    m.add_class::<Model>()?;
    m.add_function(wrap_pyfunction!(train, m)?)?;
    m.add_function(wrap_pyfunction!(auc, m)?)?;
    m.add_function(wrap_pyfunction!(auc_ambiguous, m)?)?;
    m.add_function(wrap_pyfunction!(mi_scores, m)?)?;
    m.add_function(wrap_pyfunction!(te_scores, m)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn module_round_trip_from_python() {
        Python::attach(|py| {
            let module = PyModule::new(py, "gdp").unwrap();
            gdp(&module).unwrap();
            let globals = PyDict::new(py);
            globals.set_item("gdp", &module).unwrap();
            let code = c"
g = gdp.Graph.from_spec('er:6:0.4', seed=1)
d = gdp.Dataset.generate('diffusion', g, traj=3, length=5, valid=1, seed=2)
m = gdp.train(d, seed=0, epochs=2, hidden=4, activation='relu', val_every=1)
s = m.scores()
ok = len(s) == 6 and len(m.aucs()) == 2 and 50 <= gdp.auc_ambiguous(s, g) <= 100
perfect = gdp.auc(g.adjacency(), g)
";
            py.run(code, Some(&globals), None).unwrap();
            assert!(globals.get_item("ok").unwrap().unwrap().extract::<bool>().unwrap());
            assert_eq!(globals.get_item("perfect").unwrap().unwrap().extract::<f64>().unwrap(), 100.0);
        });
    }

    #[test]
    fn bad_options_raise_value_errors() {
        Python::attach(|py| {
            let module = PyModule::new(py, "gdp").unwrap();
            gdp(&module).unwrap();
            let globals = PyDict::new(py);
            globals.set_item("gdp", &module).unwrap();
            let code = c"
g = gdp.Graph.from_spec('er:6:0.4', seed=1)
d = gdp.Dataset.generate('diffusion', g, traj=2, length=4, valid=1)
errors = []
for kwargs in ({'epochz': 1}, {'lr_graph': -1.0}):
    try:
        gdp.train(d, **kwargs)
    except ValueError:
        errors.append(1)
try:
    gdp.Graph.from_spec('grid:3')
except ValueError:
    errors.append(1)
";
            py.run(code, Some(&globals), None).unwrap();
            assert_eq!(globals.get_item("errors").unwrap().unwrap().len().unwrap(), 3);
        });
    }
}
