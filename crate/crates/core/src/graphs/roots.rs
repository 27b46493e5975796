//! Alternative roots of matrix polynomials.
//!
//! For a symmetric `M = U Λ Uᵀ`, any `M' = U diag(μ) Uᵀ` with
//! `g(μ_i) = g(λ_i)` satisfies `g(M') = g(M)`. Counting the real solutions of
//! each scalar equation bounds the number of graph matrices that a polynomial
//! filter cannot tell apart.

use super::poly_filter;
use crate::error::{contract, Result};
use crate::numcore::{sym_eig, Matrix};

/// Enumeration stops after this many alternative matrices.
pub const MAX_ALTERNATIVES: usize = 256;

const MAX_NODES: usize = 8;
const VALIDATION_TOL: f64 = 1e-6;
const REPEATED_EIG_TOL: f64 = 1e-8;

#[derive(Clone, Debug)]
pub struct RootEnumeration {
    pub eigenvalues: Vec<f64>,
    /// Real roots of `g(x) − g(λ_i)` for each eigenvalue.
    pub roots: Vec<Vec<f64>>,
    pub root_counts: Vec<usize>,
    /// `Π s_i`, saturating.
    pub total_solutions: u128,
    /// Validated alternatives, at most [`MAX_ALTERNATIVES`].
    pub alternatives: Vec<Matrix>,
    /// Two eigenvalues of `M` closer than 1e-8: the eigenbasis is not unique.
    pub basis_non_unique: bool,
    /// Distinct nonzero eigenvalues, injective kernel and `g(x) ≠ 0` off the origin.
    pub unique: bool,
}

fn eval(coeffs: &[f64], x: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c)
}

fn magnitude(coeffs: &[f64], x: f64) -> f64 {
    let ax = x.abs().max(1.0);
    coeffs.iter().rev().fold(0.0, |acc, c| acc * ax + c.abs())
}

fn bisect(coeffs: &[f64], mut lo: f64, mut hi: f64) -> f64 {
    let mut flo = eval(coeffs, lo);
    for _ in 0..300 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = eval(coeffs, mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Distinct real roots of `Σ c_k x^k`, ascending.
pub fn real_roots(coeffs: &[f64]) -> Result<Vec<f64>> {
    let degree = match coeffs.iter().rposition(|c| *c != 0.0) {
        Some(d) => d,
        None => return contract("the zero polynomial has infinitely many roots"),
    };
    let c = &coeffs[..=degree];
    match degree {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![-c[0] / c[1]]),
        _ => {}
    }
    let derivative: Vec<f64> = c.iter().enumerate().skip(1).map(|(k, v)| k as f64 * v).collect();
    let critical = real_roots(&derivative)?;
    let bound = 1.0 + c[..degree].iter().map(|v| (v / c[degree]).abs()).fold(0.0, f64::max);

    let mut points = vec![-bound];
    points.extend(critical.iter().copied().filter(|x| x.abs() < bound));
    points.push(bound);

    let mut roots = Vec::new();
    for &x in &critical {
        if eval(c, x).abs() <= 1e-12 * magnitude(c, x) {
            roots.push(x);
        }
    }
    for w in points.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (fa, fb) = (eval(c, a), eval(c, b));
        if fa != 0.0 && fb != 0.0 && (fa < 0.0) != (fb < 0.0) {
            roots.push(bisect(c, a, b));
        }
    }
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * a.abs().max(1.0));
    Ok(roots)
}

/// Enumerates solutions `M'` of `g_θ(M') = g_θ(M)` over the eigenbasis of `M`.
pub fn enumerate_poly_roots(m: &Matrix, theta: &[f64]) -> Result<RootEnumeration> {
    if m.rows() > MAX_NODES {
        return contract(format!("root enumeration is limited to n <= {MAX_NODES}, got {}", m.rows()));
    }
    let spec = sym_eig(m)?;
    let n = spec.eigenvalues.len();
    let basis_non_unique = spec.eigenvalues.windows(2).any(|w| (w[1] - w[0]).abs() < REPEATED_EIG_TOL);

    let mut roots = Vec::with_capacity(n);
    for &lambda in &spec.eigenvalues {
        let mut shifted = theta.to_vec();
        if shifted.is_empty() {
            return contract("polynomial needs at least one coefficient");
        }
        shifted[0] -= eval(theta, lambda);
        let mut r = real_roots(&shifted)?;
        if r.is_empty() {
            r.push(lambda);
        }
        roots.push(r);
    }
    let root_counts: Vec<usize> = roots.iter().map(Vec::len).collect();
    let total_solutions = root_counts.iter().fold(1u128, |acc, s| acc.saturating_mul(*s as u128));

    let target = poly_filter(m, theta)?;
    let scale = target.frobenius().max(f64::MIN_POSITIVE);
    let mut alternatives = Vec::new();
    let mut choice = vec![0usize; n];
    let mut visited = 0usize;
    loop {
        let mu: Vec<f64> = choice.iter().zip(&roots).map(|(c, r)| r[*c]).collect();
        let candidate = diag_in_basis(&spec.eigenvectors, &mu);
        let err = poly_filter(&candidate, theta)?.sub(&target)?.frobenius();
        if err < VALIDATION_TOL * scale {
            alternatives.push(candidate);
        }
        visited += 1;
        if visited >= MAX_ALTERNATIVES || !advance(&mut choice, &root_counts) {
            break;
        }
    }

    let eigen_nonzero = spec.eigenvalues.iter().all(|l| l.abs() > REPEATED_EIG_TOL);
    let injective = root_counts.iter().all(|s| *s == 1);
    let kernel_roots = real_roots(theta).unwrap_or_default();
    let only_zero_root = kernel_roots.iter().all(|x| x.abs() < 1e-12);
    let unique = !basis_non_unique && eigen_nonzero && injective && only_zero_root;

    Ok(RootEnumeration {
        eigenvalues: spec.eigenvalues,
        roots,
        root_counts,
        total_solutions,
        alternatives,
        basis_non_unique,
        unique,
    })
}

fn diag_in_basis(u: &Matrix, mu: &[f64]) -> Matrix {
    let n = mu.len();
    let scaled = Matrix::from_fn(n, n, |i, k| u[(i, k)] * mu[k]);
    scaled.matmul(&u.transpose()).expect("square")
}

/// Mixed-radix increment; false once every combination has been produced.
fn advance(choice: &mut [usize], radix: &[usize]) -> bool {
    for (c, r) in choice.iter_mut().zip(radix) {
        *c += 1;
        if *c < *r {
            return true;
        }
        *c = 0;
    }
    false
}
