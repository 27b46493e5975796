//! Evaluation and the analysis/ablation suite.

mod analysis;
mod auc;
mod report;
mod training;

pub use analysis::*;
pub use auc::{auc, auc_ambiguous, auc_from_pairs, pair_labels};
pub use report::{params, Cell, ExperimentReport, Record, Summary};
pub use training::*;
pub use crate::scores::ScoreMatrix;
