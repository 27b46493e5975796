//! Dense row-major matrices, a cyclic Jacobi eigensolver and matrix functions.

use std::ops::{Index, IndexMut};

use serde::{Deserialize, Serialize};

use crate::error::{contract, GdpError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(GdpError::Dimension {
                op: "matrix",
                detail: format!("{} values for {rows}x{cols}", data.len()),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len(), values.len());
        for (i, v) in values.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(GdpError::Dimension {
                op: "matmul",
                detail: format!(
                    "{}x{} times {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        let mut out = Matrix::zeros(self.rows, other.cols);
        gemm(
            self.rows,
            self.cols,
            other.cols,
            &self.data,
            &other.data,
            &mut out.data,
            false,
        );
        Ok(out)
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.cols {
            return Err(GdpError::Dimension {
                op: "matvec",
                detail: format!("{}x{} times vector of {}", self.rows, self.cols, x.len()),
            });
        }
        Ok((0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect())
    }

    pub fn scale(&self, s: f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| v * s).collect() }
    }

    pub fn add(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix) -> Result<Matrix> {
        self.zip_with(other, "sub", |a, b| a - b)
    }

    fn zip_with(&self, other: &Matrix, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Matrix> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(GdpError::Dimension {
                op,
                detail: format!(
                    "{}x{} vs {}x{}",
                    self.rows, self.cols, other.rows, other.cols
                ),
            });
        }
        Ok(Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&other.data).map(|(a, b)| f(*a, *b)).collect(),
        })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Matrix {
        Matrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|v| f(*v)).collect() }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Symmetric up to an absolute tolerance.
    pub fn is_symmetric(&self, tol: f64) -> bool {
        if !self.is_square() {
            return false;
        }
        (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }
}

impl Index<(usize, usize)> for Matrix {
    type Output = f64;

    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Matrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// `c (+)= a(m×k) · b(k×n)`, all row-major.
pub(crate) fn gemm(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        if !accumulate {
            c.iter_mut().for_each(|v| *v = 0.0);
        }
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: slices are sized m*k, k*n and m*n with row-major strides.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c (+)= aᵀ · b` where `a` is k×m and `b` is k×n.
pub(crate) fn gemm_tn(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: `a` is read through transposed strides of a k×m row-major buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            1,
            m as isize,
            b.as_ptr(),
            n as isize,
            1,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// `c (+)= a · bᵀ` where `a` is m×k and `b` is n×k.
pub(crate) fn gemm_nt(m: usize, k: usize, n: usize, a: &[f64], b: &[f64], c: &mut [f64], accumulate: bool) {
    if m == 0 || n == 0 || k == 0 {
        return;
    }
    let beta = if accumulate { 1.0 } else { 0.0 };
    // SAFETY: `b` is read through transposed strides of an n×k row-major buffer.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            k as isize,
            1,
            b.as_ptr(),
            1,
            k as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvector columns.
#[derive(Clone, Debug)]
pub struct SpectralDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl SpectralDecomposition {
    /// `U · diag(f(λ)) · Uᵀ`.
    pub fn apply(&self, f: impl Fn(f64) -> f64) -> Matrix {
        let n = self.eigenvalues.len();
        let u = &self.eigenvectors;
        let fl: Vec<f64> = self.eigenvalues.iter().map(|l| f(*l)).collect();
        let scaled = Matrix::from_fn(n, n, |i, k| u[(i, k)] * fl[k]);
        scaled.matmul(&u.transpose()).expect("square factors")
    }

    pub fn reconstruct(&self) -> Matrix {
        self.apply(|l| l)
    }
}

const JACOBI_TOL: f64 = 1e-12;
const JACOBI_MAX_SWEEPS: usize = 100;

/// Cyclic Jacobi eigendecomposition of a symmetric matrix.
pub fn sym_eig(m: &Matrix) -> Result<SpectralDecomposition> {
    if !m.is_square() {
        return contract(format!("sym_eig needs a square matrix, got {}x{}", m.rows, m.cols));
    }
    if !m.is_symmetric(1e-10) {
        return contract("sym_eig needs a symmetric matrix");
    }
    if !m.is_finite() {
        return Err(GdpError::NonFinite { op: "sym_eig".into() });
    }
    let n = m.rows;
    let mut a = m.clone();
    let mut v = Matrix::identity(n);
    let threshold = JACOBI_TOL * m.frobenius();

    for _ in 0..JACOBI_MAX_SWEEPS {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |j| *j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[(i, j)] * a[(i, j)])
            .sum::<f64>()
            .sqrt();
        if off <= threshold {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|x, y| a[(*x, *x)].total_cmp(&a[(*y, *y)]));
    let eigenvalues = order.iter().map(|&i| a[(i, i)]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(SpectralDecomposition { eigenvalues, eigenvectors })
}

/// `exp(scale · m)`: spectral route for symmetric input, scaling and squaring otherwise.
pub fn mat_exp(m: &Matrix, scale: f64) -> Result<Matrix> {
    if !m.is_square() {
        return contract("mat_exp needs a square matrix");
    }
    if !m.is_finite() || !scale.is_finite() {
        return Err(GdpError::NonFinite { op: "mat_exp".into() });
    }
    if m.is_symmetric(1e-12 * m.max_abs().max(1.0)) {
        Ok(sym_eig(m)?.apply(|l| (scale * l).exp()))
    } else {
        mat_exp_series(m, scale)
    }
}

/// Scaling-and-squaring with a truncated Taylor series; valid for any square matrix.
pub fn mat_exp_series(m: &Matrix, scale: f64) -> Result<Matrix> {
    if !m.is_square() {
        return contract("mat_exp needs a square matrix");
    }
    let a = m.scale(scale);
    let norm = a.frobenius();
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let a = a.scale(0.5f64.powi(squarings));
    let n = m.rows;
    let mut result = Matrix::identity(n);
    let mut term = Matrix::identity(n);
    for k in 1..=30 {
        term = term.matmul(&a)?.scale(1.0 / k as f64);
        result = result.add(&term)?;
        if term.max_abs() < 1e-18 * result.max_abs() {
            break;
        }
    }
    for _ in 0..squarings {
        result = result.matmul(&result)?;
    }
    if !result.is_finite() {
        return Err(GdpError::NonFinite { op: "mat_exp".into() });
    }
    Ok(result)
}

/// `m^k` by repeated multiplication.
pub fn mat_pow(m: &Matrix, k: i64) -> Result<Matrix> {
    if k < 0 {
        return contract(format!("mat_pow exponent must be non-negative, got {k}"));
    }
    if !m.is_square() {
        return contract("mat_pow needs a square matrix");
    }
    let mut out = Matrix::identity(m.rows);
    for _ in 0..k {
        out = out.matmul(m)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_symmetric(n: usize, seed: u64) -> Matrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            for j in 0..=i {
                let v: f64 = rng.gen_range(-1.0..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
        m
    }

    fn naive_series(m: &Matrix, terms: usize) -> Matrix {
        let mut out = Matrix::identity(m.rows());
        let mut term = Matrix::identity(m.rows());
        for k in 1..terms {
            term = term.matmul(m).unwrap().scale(1.0 / k as f64);
            out = out.add(&term).unwrap();
        }
        out
    }

    #[test]
    fn eig_identity_and_diagonal() {
        let d = sym_eig(&Matrix::identity(3)).unwrap();
        assert_eq!(d.eigenvalues, vec![1.0, 1.0, 1.0]);

        let d = sym_eig(&Matrix::diag(&[9.0, 4.0])).unwrap();
        assert_eq!(d.eigenvalues, vec![4.0, 9.0]);
        for k in 0..2 {
            let col: Vec<f64> = (0..2).map(|i| d.eigenvectors[(i, k)].abs()).collect();
            assert!(col.contains(&1.0) && col.contains(&0.0));
        }
    }

    #[test]
    fn eig_reconstructs_random_symmetric() {
        for seed in 0..5 {
            let m = random_symmetric(10, seed);
            let d = sym_eig(&m).unwrap();
            let err = d.reconstruct().sub(&m).unwrap().frobenius() / m.frobenius();
            assert!(err < 1e-8, "reconstruction error {err}");
            let utu = d.eigenvectors.transpose().matmul(&d.eigenvectors).unwrap();
            assert!(utu.sub(&Matrix::identity(10)).unwrap().frobenius() < 1e-8);
            assert!(d.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn eig_rejects_asymmetric() {
        let m = Matrix::from_vec(2, 2, vec![1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(sym_eig(&m), Err(GdpError::Contract(_))));
    }

    #[test]
    fn exp_basic_cases() {
        let m = random_symmetric(4, 3);
        let e0 = mat_exp(&m, 0.0).unwrap();
        assert!(e0.sub(&Matrix::identity(4)).unwrap().max_abs() < 1e-14);

        let e = mat_exp(&Matrix::diag(&[0.5, -1.5]), 1.0).unwrap();
        assert!((e[(0, 0)] - 0.5f64.exp()).abs() < 1e-14);
        assert!((e[(1, 1)] - (-1.5f64).exp()).abs() < 1e-14);
        assert!(e[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn exp_routes_agree() {
        for seed in 0..4 {
            let m = random_symmetric(8, 100 + seed);
            let spec = mat_exp(&m, 1.0).unwrap();
            let series = mat_exp_series(&m, 1.0).unwrap();
            let err = spec.sub(&series).unwrap().frobenius() / series.frobenius();
            assert!(err < 1e-8, "dual-route error {err}");
        }
    }

    #[test]
    fn exp_series_matches_naive_thirty_terms_nonsymmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut m = Matrix::from_fn(6, 6, |_, _| rng.gen_range(-1.0..1.0));
        // spectral radius <= frobenius; rescale to 2
        let f = m.frobenius();
        m = m.scale(2.0 / f);
        let ours = mat_exp(&m, 1.0).unwrap();
        let oracle = naive_series(&m, 30);
        let err = ours.sub(&oracle).unwrap().frobenius() / oracle.frobenius();
        assert!(err < 1e-8, "series error {err}");
    }

    #[test]
    fn pow_cases() {
        let m = random_symmetric(3, 1);
        assert_eq!(mat_pow(&m, 0).unwrap(), Matrix::identity(3));
        assert_eq!(mat_pow(&m, 1).unwrap(), m);
        let rot = Matrix::from_vec(2, 2, vec![0.0, -1.0, 1.0, 0.0]).unwrap();
        let r4 = mat_pow(&rot, 4).unwrap();
        assert!(r4.sub(&Matrix::identity(2)).unwrap().max_abs() < 1e-12);
        assert!(matches!(mat_pow(&m, -1), Err(GdpError::Contract(_))));
    }

    #[test]
    fn gemm_variants_agree() {
        let a = Matrix::from_fn(3, 4, |i, j| (i * 4 + j) as f64 * 0.1);
        let b = Matrix::from_fn(4, 2, |i, j| (i + 2 * j) as f64 - 1.0);
        let ab = a.matmul(&b).unwrap();
        let at = a.transpose();
        let mut c = vec![0.0; 6];
        gemm_tn(3, 4, 2, at.as_slice(), b.as_slice(), &mut c, false);
        assert_eq!(c, ab.as_slice());
        let bt = b.transpose();
        let mut c2 = vec![0.0; 6];
        gemm_nt(3, 4, 2, a.as_slice(), bt.as_slice(), &mut c2, false);
        assert_eq!(c2, ab.as_slice());
    }
}
