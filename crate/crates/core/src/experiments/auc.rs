//! Rank-based AUC over node pairs.

use crate::error::{GdpError, Result};
use crate::graphs::Graph;
use crate::scores::ScoreMatrix;

/// Scored pairs and their labels: unordered `i < j` when undirected, all
/// ordered off-diagonal pairs otherwise.
pub fn pair_labels(scores: &ScoreMatrix, truth: &Graph) -> Result<(Vec<f64>, Vec<bool>)> {
    if scores.n() != truth.n() {
        return Err(GdpError::Dimension {
            op: "auc",
            detail: format!("{} scored nodes vs {} in truth", scores.n(), truth.n()),
        });
    }
    if scores.directed() != truth.directed() {
        return Err(GdpError::Contract("score and truth directedness differ".into()));
    }
    let n = truth.n();
    let mut s = Vec::new();
    let mut y = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i == j || (!truth.directed() && j < i) {
                continue;
            }
            s.push(scores.get(i, j));
            y.push(truth.has_edge(i, j));
        }
    }
    Ok((s, y))
}

/// Mann–Whitney AUC of `scores` against binary `labels`, in percent. Ties count one half.
pub fn auc_from_pairs(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let pos = labels.iter().filter(|l| **l).count();
    let neg = labels.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(GdpError::UndefinedMetric(format!("{pos} positive and {neg} negative pairs")));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|a, b| scores[*a].total_cmp(&scores[*b]));
    let mut rank_sum_pos = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // ranks start..end (1-based: start+1..=end), averaged over the tie block
        let avg_rank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end].iter().filter(|&&k| labels[k]).count();
        rank_sum_pos += avg_rank * tied_pos as f64;
        start = end;
    }
    let u = rank_sum_pos - (pos * (pos + 1)) as f64 / 2.0;
    Ok(100.0 * u / (pos as f64 * neg as f64))
}

pub fn auc(scores: &ScoreMatrix, truth: &Graph) -> Result<f64> {
    let (s, y) = pair_labels(scores, truth)?;
    auc_from_pairs(&s, &y)
}

/// `max(auc, 100 − auc)`: the learned graph may be the complement of the truth.
pub fn auc_ambiguous(scores: &ScoreMatrix, truth: &Graph) -> Result<f64> {
    let a = auc(scores, truth)?;
    Ok(a.max(100.0 - a))
}
