use serde::{Deserialize, Serialize};

use super::{sym_normalize, Graph};
use crate::error::{contract, Result};
use crate::numcore::{mat_exp, mat_pow, Matrix};
use crate::scores::ScoreMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EffectiveMode {
    Continuous,
    Discrete,
}

/// Linear dynamics `ẋ = β Ã x` (continuous) or `x' = Ã x` (discrete) observed every `dt`.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct EffectiveGraphConfig {
    pub coupling: f64,
    pub dt: f64,
    pub mode: EffectiveMode,
}

impl EffectiveGraphConfig {
    pub fn continuous(coupling: f64, dt: f64) -> Self {
        Self { coupling, dt, mode: EffectiveMode::Continuous }
    }

    pub fn discrete(dt: u32) -> Self {
        Self { coupling: 1.0, dt: dt as f64, mode: EffectiveMode::Discrete }
    }
}

/// Transition map between consecutive samples.
pub fn effective_transition(g: &Graph, cfg: &EffectiveGraphConfig) -> Result<Matrix> {
    if !(cfg.dt > 0.0) {
        return contract(format!("sampling interval must be positive, got {}", cfg.dt));
    }
    let a = sym_normalize(g)?;
    match cfg.mode {
        EffectiveMode::Continuous => mat_exp(&a, cfg.coupling * cfg.dt),
        EffectiveMode::Discrete => {
            if cfg.dt.fract() != 0.0 {
                return contract(format!("discrete sampling interval must be an integer, got {}", cfg.dt));
            }
            mat_pow(&a, cfg.dt as i64)
        }
    }
}

/// Scores `|J_ij|` of the effective interaction graph, diagonal excluded.
pub fn effective_graph(g: &Graph, cfg: &EffectiveGraphConfig) -> Result<ScoreMatrix> {
    let j = effective_transition(g, cfg)?;
    ScoreMatrix::new(j.map(f64::abs), g.directed())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiments::auc;
    use crate::graphs::gen_er;

    #[test]
    fn small_interval_recovers_graph() {
        let g = gen_er(30, 0.3, 1, false).unwrap();
        let s = effective_graph(&g, &EffectiveGraphConfig::continuous(1.0, 1e-3)).unwrap();
        assert_eq!(auc(&s, &g).unwrap(), 100.0);
        let a = sym_normalize(&g).unwrap();
        assert!((s.get(0, 1) - 1e-3 * a[(0, 1)]).abs() < 1e-5);

        let s1 = effective_graph(&g, &EffectiveGraphConfig::discrete(1)).unwrap();
        assert_eq!(auc(&s1, &g).unwrap(), 100.0);
    }

    #[test]
    fn odd_hops_beat_even_hops() {
        let g = gen_er(30, 0.3, 2, false).unwrap();
        let a2 = auc(&effective_graph(&g, &EffectiveGraphConfig::discrete(2)).unwrap(), &g).unwrap();
        let a3 = auc(&effective_graph(&g, &EffectiveGraphConfig::discrete(3)).unwrap(), &g).unwrap();
        assert!(a3 > a2, "AUC(Ã³)={a3} AUC(Ã²)={a2}");
    }

    #[test]
    fn rejects_fractional_discrete_interval() {
        let g = gen_er(5, 0.5, 0, false).unwrap();
        let cfg = EffectiveGraphConfig { coupling: 1.0, dt: 1.5, mode: EffectiveMode::Discrete };
        assert!(effective_graph(&g, &cfg).is_err());
    }

    #[test]
    fn continuous_auc_degrades_with_interval() {
        let grid = [0.5, 1.0, 2.0, 4.0];
        let mut means = vec![0.0; grid.len()];
        for seed in 0..20 {
            let g = gen_er(30, 0.3, seed, false).unwrap();
            for (k, bt) in grid.iter().enumerate() {
                let s = effective_graph(&g, &EffectiveGraphConfig::continuous(1.0, *bt)).unwrap();
                means[k] += auc(&s, &g).unwrap() / 20.0;
            }
        }
        assert!(means.windows(2).all(|w| w[1] <= w[0] + 1e-9), "{means:?}");
    }
}
