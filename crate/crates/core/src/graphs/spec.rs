use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{gen_ba, gen_er, gen_ws, Graph};
use crate::error::{GdpError, Result};

/// A random-graph family with its parameters, written `er:n:p`, `erd:n:p`
/// (directed), `ba:n:m` or `ws:n:k:p`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum GraphSpec {
    Er { n: usize, p: f64, directed: bool },
    Ba { n: usize, m: usize },
    Ws { n: usize, k: usize, p: f64 },
}

impl GraphSpec {
    pub fn n(&self) -> usize {
        match *self {
            GraphSpec::Er { n, .. } | GraphSpec::Ba { n, .. } | GraphSpec::Ws { n, .. } => n,
        }
    }

    pub fn directed(&self) -> bool {
        matches!(self, GraphSpec::Er { directed: true, .. })
    }

    pub fn generate(&self, seed: u64) -> Result<Graph> {
        match *self {
            GraphSpec::Er { n, p, directed } => gen_er(n, p, seed, directed),
            GraphSpec::Ba { n, m } => gen_ba(n, m, seed),
            GraphSpec::Ws { n, k, p } => gen_ws(n, k, p, seed),
        }
    }
}

impl fmt::Display for GraphSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            GraphSpec::Er { n, p, directed } => write!(f, "{}:{n}:{p}", if directed { "erd" } else { "er" }),
            GraphSpec::Ba { n, m } => write!(f, "ba:{n}:{m}"),
            GraphSpec::Ws { n, k, p } => write!(f, "ws:{n}:{k}:{p}"),
        }
    }
}

impl FromStr for GraphSpec {
    type Err = GdpError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = |why: &str| GdpError::Parse(format!("graph `{s}`: {why} (expected er:n:p, erd:n:p, ba:n:m or ws:n:k:p)"));
        let parts: Vec<&str> = s.trim().split(':').collect();
        let int = |i: usize| parts[i].parse::<usize>().map_err(|_| bad(&format!("`{}` is not a count", parts[i])));
        let real = |i: usize| parts[i].parse::<f64>().map_err(|_| bad(&format!("`{}` is not a number", parts[i])));
        let spec = match (parts[0].to_ascii_lowercase().as_str(), parts.len()) {
            ("er", 3) => GraphSpec::Er { n: int(1)?, p: real(2)?, directed: false },
            ("erd", 3) => GraphSpec::Er { n: int(1)?, p: real(2)?, directed: true },
            ("ba", 3) => GraphSpec::Ba { n: int(1)?, m: int(2)? },
            ("ws", 4) => GraphSpec::Ws { n: int(1)?, k: int(2)?, p: real(3)? },
            _ => return Err(bad("unknown family or wrong number of fields")),
        };
        // reject out-of-range parameters up front
        spec.generate(0).map_err(|e| bad(&e.to_string()))?;
        Ok(spec)
    }
}

impl TryFrom<String> for GraphSpec {
    type Error = GdpError;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<GraphSpec> for String {
    fn from(g: GraphSpec) -> Self {
        g.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_every_family() {
        for s in ["er:20:0.1", "erd:10:0.3", "ba:30:2", "ws:30:2:0.25"] {
            let g: GraphSpec = s.parse().unwrap();
            assert_eq!(g.to_string(), s);
            assert_eq!(g.generate(3).unwrap().n(), g.n());
        }
        assert!("erd:10:0.3".parse::<GraphSpec>().unwrap().directed());
        assert_eq!(serde_json::to_string(&"ba:5:1".parse::<GraphSpec>().unwrap()).unwrap(), "\"ba:5:1\"");
    }

    #[test]
    fn rejects_malformed() {
        for s in ["", "er:20", "er:x:0.1", "er:20:1.5", "ws:30:3:0.1", "grid:4:4", "ba:2:3"] {
            assert!(matches!(s.parse::<GraphSpec>(), Err(GdpError::Parse(_))), "{s}");
        }
    }
}
