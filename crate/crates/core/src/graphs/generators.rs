use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::Graph;
use crate::error::{contract, Result};

/// Erdős–Rényi graph: every pair is an edge independently with probability `p`.
pub fn gen_er(n: usize, p: f64, seed: u64, directed: bool) -> Result<Graph> {
    if !(0.0..=1.0).contains(&p) {
        return contract(format!("edge probability {p} outside [0, 1]"));
    }
    if n < 2 {
        return contract("need at least two nodes");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n, directed);
    for i in 0..n {
        for j in 0..n {
            if i == j || (!directed && j < i) {
                continue;
            }
            if rng.gen::<f64>() < p {
                g.add_edge(i, j)?;
            }
        }
    }
    Ok(g.with_seed(seed))
}

/// Barabási–Albert preferential attachment grown from an `(m+1)`-clique.
pub fn gen_ba(n: usize, m: usize, seed: u64) -> Result<Graph> {
    if m < 1 {
        return contract("attachment count m must be at least 1");
    }
    if n <= m {
        return contract(format!("need n > m, got n={n}, m={m}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n, false);
    let core = m + 1;
    for i in 0..core.min(n) {
        for j in (i + 1)..core.min(n) {
            g.add_edge(i, j)?;
        }
    }
    let mut degree: Vec<usize> = g.degrees();
    for new in core..n {
        let mut chosen: Vec<usize> = Vec::with_capacity(m);
        while chosen.len() < m {
            let total: usize = (0..new).filter(|v| !chosen.contains(v)).map(|v| degree[v]).sum();
            let mut ticket = rng.gen_range(0..total);
            let pick = (0..new)
                .filter(|v| !chosen.contains(v))
                .find(|&v| {
                    if ticket < degree[v] {
                        true
                    } else {
                        ticket -= degree[v];
                        false
                    }
                })
                .expect("ticket within total degree");
            chosen.push(pick);
        }
        for v in chosen {
            g.add_edge(new, v)?;
            degree[v] += 1;
            degree[new] += 1;
        }
    }
    Ok(g.with_seed(seed))
}

/// Watts–Strogatz small world: a ring where each node links to its `k/2`
/// nearest neighbours on each side, then each lattice edge has its far end
/// rewired with probability `p_rewire`.
pub fn gen_ws(n: usize, k: usize, p_rewire: f64, seed: u64) -> Result<Graph> {
    if k % 2 != 0 {
        return contract(format!("ring degree k must be even, got {k}"));
    }
    if k >= n {
        return contract(format!("need k < n, got k={k}, n={n}"));
    }
    if !(0.0..=1.0).contains(&p_rewire) {
        return contract(format!("rewiring probability {p_rewire} outside [0, 1]"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = Graph::empty(n, false);
    for i in 0..n {
        for j in 1..=k / 2 {
            g.add_edge(i, (i + j) % n)?;
        }
    }
    for j in 1..=k / 2 {
        for i in 0..n {
            let target = (i + j) % n;
            if rng.gen::<f64>() >= p_rewire {
                continue;
            }
            let free: Vec<usize> = (0..n).filter(|&v| v != i && !g.has_edge(i, v)).collect();
            if let Some(&new) = free.choose(&mut rng) {
                g.remove_edge(i, target);
                g.add_edge(i, new)?;
            }
        }
    }
    Ok(g.with_seed(seed))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn er_extremes() {
        assert_eq!(gen_er(10, 0.0, 1, false).unwrap().edge_count(), 0);
        assert_eq!(gen_er(10, 1.0, 1, false).unwrap().edge_count(), 45);
        assert_eq!(gen_er(10, 1.0, 1, true).unwrap().edge_count(), 90);
        assert!(gen_er(10, 1.5, 1, false).is_err());
    }

    #[test]
    fn er_mean_edge_count() {
        let mean = (0..1000).map(|s| gen_er(30, 0.3, s, false).unwrap().edge_count() as f64).sum::<f64>() / 1000.0;
        // p·n(n−1)/2 = 130.5
        assert!((mean - 130.5).abs() < 3.0, "mean {mean}");
    }

    #[test]
    fn er_is_deterministic() {
        assert_eq!(gen_er(20, 0.2, 5, false).unwrap(), gen_er(20, 0.2, 5, false).unwrap());
    }

    #[test]
    fn ba_counts_and_connectivity() {
        assert_eq!(gen_ba(4, 2, 0).unwrap().edge_count(), 5);
        for seed in 0..50 {
            let g = gen_ba(30, 2, seed).unwrap();
            assert_eq!(g.edge_count(), 3 + 2 * 27);
            assert!(g.is_connected());
        }
        assert!(gen_ba(2, 2, 0).is_err());
    }

    #[test]
    fn ba_heavier_tail_than_er() {
        // m=2 on 50 nodes has mean degree ~4; ER with matching p
        let n = 50;
        let edges = 3 + 2 * (n - 3);
        let p = edges as f64 / (n * (n - 1) / 2) as f64;
        let wins = (0..100)
            .filter(|&s| gen_ba(n, 2, s).unwrap().max_degree() > gen_er(n, p, 1000 + s, false).unwrap().max_degree())
            .count();
        assert!(wins >= 90, "BA max degree larger in {wins}/100");
    }

    #[test]
    fn ws_lattice_and_rewired() {
        let ring = gen_ws(30, 4, 0.0, 0).unwrap();
        assert!(ring.degrees().iter().all(|&d| d == 4));
        assert_eq!(gen_ws(30, 2, 0.0, 0).unwrap().edge_count(), 30);
        for seed in 0..20 {
            let g = gen_ws(30, 4, 0.5, seed).unwrap();
            assert_eq!(g.edge_count(), 60);
        }
        assert!(gen_ws(30, 3, 0.1, 0).is_err());
    }

    #[test]
    fn ws_rewiring_lowers_clustering() {
        let ring = gen_ws(30, 4, 0.0, 0).unwrap().mean_clustering();
        let mean = (0..50).map(|s| gen_ws(30, 4, 1.0, s).unwrap().mean_clustering()).sum::<f64>() / 50.0;
        assert!(mean < ring, "rewired {mean} vs ring {ring}");
    }
}
