//! Flat `key = value` run configuration with command-line overrides.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gdp_core::model::TrainConfig;
use gdp_core::numcore::Activation;

use crate::error::{usage, CliError, CliResult};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "GDP_OUT";

/// Keys shared by every training-based command.
pub const TRAIN_KEYS: &[&str] = &[
    "epochs", "lr_graph", "lr_surrogate", "beta", "k", "hidden", "activation", "val_every", "batch_size", "tied", "rounds",
    "adjacency_weight", "poly_weight", "poly_from", "freeze_graph",
];

/// Every value a run used, defaults included once read.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

fn normalize_key(k: &str) -> String {
    k.trim().trim_start_matches("--").replace('-', "_")
}

impl RunConfig {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse_file_text(text: &str) -> CliResult<Self> {
        let mut values = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return usage(format!("config line {}: expected `key = value`, got `{raw}`", no + 1));
            };
            let key = normalize_key(k);
            if key.is_empty() {
                return usage(format!("config line {}: empty key", no + 1));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse_file_text(&text)
    }

    /// Applies `--key value` pairs on top of the current values. A flag
    /// followed by another flag (or nothing) is read as `true`.
    pub fn apply_flags(&mut self, args: &[String]) -> CliResult<()> {
        let mut i = 0;
        while i < args.len() {
            let Some(stripped) = args[i].strip_prefix("--") else {
                return usage(format!("unexpected argument `{}`", args[i]));
            };
            let (key, value) = match stripped.split_once('=') {
                Some((k, v)) => (k.to_string(), v.to_string()),
                None => match args.get(i + 1) {
                    Some(v) if !v.starts_with("--") => {
                        i += 1;
                        (stripped.to_string(), v.clone())
                    }
                    _ => (stripped.to_string(), "true".to_string()),
                },
            };
            self.values.insert(normalize_key(&key), value);
            i += 1;
        }
        Ok(())
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&[&str]]) -> CliResult<()> {
        let known: BTreeSet<&str> = allowed.iter().flat_map(|s| s.iter().copied()).collect();
        for k in self.values.keys() {
            if !known.contains(k.as_str()) {
                let mut list: Vec<&str> = known.iter().copied().collect();
                list.sort_unstable();
                return usage(format!("unknown option `{k}` (accepted: {})", list.join(", ")));
            }
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: impl Display) {
        self.values.insert(key.to_string(), value.to_string());
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> CliResult<&str> {
        self.raw(key).ok_or_else(|| CliError::Usage(format!("missing required option --{key}")))
    }

    /// Parses `key`, recording `default` when it is absent.
    pub fn get<T>(&mut self, key: &str, default: T) -> CliResult<T>
    where
        T: FromStr + Display,
        T::Err: Display,
    {
        match self.values.get(key) {
            Some(v) => v.parse().map_err(|e| CliError::Usage(format!("--{key} `{v}`: {e}"))),
            None => {
                self.values.insert(key.to_string(), default.to_string());
                Ok(default)
            }
        }
    }

    pub fn flag(&mut self, key: &str) -> CliResult<bool> {
        self.get(key, false)
    }

    /// Comma list; `a..b` expands to the inclusive integer range.
    pub fn list<T>(&mut self, key: &str, default: &str) -> CliResult<Vec<T>>
    where
        T: FromStr,
        T::Err: Display,
    {
        let raw = self.values.entry(key.to_string()).or_insert_with(|| default.to_string()).clone();
        parse_list(&raw).map_err(|e| CliError::Usage(format!("--{key} `{raw}`: {e}")))
    }

    /// Output root: `--out`, else `$GDP_OUT`, else `out`.
    pub fn out_root(&mut self) -> PathBuf {
        let root = match self.raw("out") {
            Some(o) => o.to_string(),
            None => std::env::var(OUT_ENV).unwrap_or_else(|_| "out".into()),
        };
        self.set("out", &root);
        PathBuf::from(root)
    }

    pub fn resolved(&self) -> BTreeMap<String, String> {
        self.values.clone()
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.values).expect("string map serializes")
    }

    /// Training options layered over the library defaults.
    pub fn train_config(&mut self) -> CliResult<TrainConfig> {
        let d = TrainConfig::default();
        let tied = match self.get("tied", "auto".to_string())?.as_str() {
            "auto" => None,
            "true" => Some(true),
            "false" => Some(false),
            other => return usage(format!("--tied `{other}`: expected auto, true or false")),
        };
        let poly_from = match self.get("poly_from", d.poly_from.map_or("none".into(), |e| e.to_string()))?.as_str() {
            "none" => None,
            v => Some(v.parse().map_err(|e| CliError::Usage(format!("--poly_from `{v}`: {e}")))?),
        };
        let cfg = TrainConfig {
            epochs: self.get("epochs", d.epochs)?,
            lr_graph: self.get("lr_graph", d.lr_graph)?,
            lr_surrogate: self.get("lr_surrogate", d.lr_surrogate)?,
            beta: self.get("beta", d.beta)?,
            k: self.get("k", d.k)?,
            hidden: self.get("hidden", d.hidden)?,
            activation: self.get::<Activation>("activation", d.activation)?,
            val_every: self.get("val_every", d.val_every)?,
            batch_size: self.get("batch_size", d.batch_size)?,
            tied,
            rounds: self.get("rounds", d.rounds)?,
            adjacency_weight: self.get("adjacency_weight", d.adjacency_weight)?,
            poly_weight: self.get("poly_weight", d.poly_weight)?,
            poly_from,
            freeze_graph: self.get("freeze_graph", d.freeze_graph)?,
        };
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }
}

fn parse_list<T>(raw: &str) -> Result<Vec<T>, String>
where
    T: FromStr,
    T::Err: Display,
{
    let mut out = Vec::new();
    for part in raw.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((a, b)) = part.split_once("..") {
            let a: i64 = a.trim().parse().map_err(|e| format!("range start: {e}"))?;
            let b: i64 = b.trim().parse().map_err(|e| format!("range end: {e}"))?;
            if b < a {
                return Err(format!("empty range {a}..{b}"));
            }
            for v in a..=b {
                out.push(v.to_string().parse().map_err(|e: T::Err| e.to_string())?);
            }
        } else {
            out.push(part.parse().map_err(|e: T::Err| e.to_string())?);
        }
    }
    if out.is_empty() {
        return Err("empty list".into());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(s: &str) -> Vec<String> {
        s.split_whitespace().map(String::from).collect()
    }

    #[test]
    fn flags_override_file_values() {
        let mut c = RunConfig::parse_file_text("# desk run\nepochs = 300\nlr-surrogate = 1e-3\n\nhidden=32 # narrow\n").unwrap();
        c.apply_flags(&args("--epochs 10 --freeze-graph --seeds 0..2")).unwrap();
        assert_eq!(c.get("epochs", 5usize).unwrap(), 10);
        assert_eq!(c.get("lr_surrogate", 0.0).unwrap(), 1e-3);
        assert!(c.flag("freeze_graph").unwrap());
        assert_eq!(c.list::<u64>("seeds", "0").unwrap(), vec![0, 1, 2]);
        let t = c.train_config().unwrap();
        assert_eq!((t.epochs, t.hidden, t.freeze_graph), (10, 32, true));
        // defaults become part of the resolved record
        assert_eq!(c.raw("k"), Some("4"));
    }

    #[test]
    fn lists_mix_ranges_and_values() {
        assert_eq!(parse_list::<usize>("1..3,7").unwrap(), vec![1, 2, 3, 7]);
        assert_eq!(parse_list::<f64>("0.5, 4").unwrap(), vec![0.5, 4.0]);
        assert!(parse_list::<usize>("3..1").is_err());
        assert!(parse_list::<usize>("").is_err());
    }

    #[test]
    fn malformed_input_is_a_usage_error() {
        assert!(RunConfig::parse_file_text("epochs 3").is_err());
        let mut c = RunConfig::default();
        assert!(c.apply_flags(&args("epochs 3")).is_err());
        c.apply_flags(&args("--epochs x")).unwrap();
        assert!(matches!(c.get("epochs", 1usize), Err(CliError::Usage(_))));
        let mut c = RunConfig::default();
        c.apply_flags(&args("--bogus 1")).unwrap();
        assert!(c.check_keys(&[TRAIN_KEYS]).is_err());
        let mut c = RunConfig::default();
        c.apply_flags(&args("--lr_graph -1")).unwrap();
        assert!(c.train_config().is_err());
    }
}
