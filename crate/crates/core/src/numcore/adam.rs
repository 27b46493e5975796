use serde::{Deserialize, Serialize};

use crate::error::{GdpError, Result};
use crate::numcore::tensor::Tensor;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, first: Vec::new(), second: Vec::new() }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    /// Bias-corrected Adam update of `params` using their accumulated gradients.
    ///
    /// Parameters without a gradient buffer are treated as having zero gradient.
    /// Gradient buffers are cleared afterwards.
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if self.first.is_empty() {
            self.first = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != params.len() {
            return Err(GdpError::Dimension {
                op: "adam",
                detail: format!("{} moment buffers for {} parameters", self.first.len(), params.len()),
            });
        }
        for (i, p) in params.iter().enumerate() {
            if p.len() != self.first[i].len() {
                return Err(GdpError::Dimension {
                    op: "adam",
                    detail: format!("parameter {i} has {} values, moments {}", p.len(), self.first[i].len()),
                });
            }
            if p.grad().is_some_and(|g| g.iter().any(|v| !v.is_finite())) {
                return Err(GdpError::NonFinite { op: format!("adam gradient of parameter {i}") });
            }
        }

        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        for (i, p) in params.iter_mut().enumerate() {
            let Some(g) = p.grad().map(<[f64]>::to_vec) else { continue };
            let m = &mut self.first[i];
            let v = &mut self.second[i];
            for (k, w) in p.data_mut().iter_mut().enumerate() {
                m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * g[k];
                v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * g[k] * g[k];
                let mhat = m[k] / c1;
                let vhat = v[k] / c2;
                *w -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
            p.zero_grad();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = Tensor::new(vec![2], vec![1.0, -2.0]).unwrap().with_grad();
        let mut adam = AdamState::new(0.1);
        for _ in 0..10 {
            p.accumulate_grad(&[0.0, 0.0]).unwrap();
            adam.step(&mut [&mut p]).unwrap();
        }
        assert_eq!(p.data(), &[1.0, -2.0]);
        assert_eq!(adam.steps(), 10);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Tensor::scalar(0.0).with_grad();
        p.accumulate_grad(&[1.0]).unwrap();
        let mut adam = AdamState::new(0.1);
        adam.step(&mut [&mut p]).unwrap();
        // m̂ = 1, v̂ = 1 after bias correction
        let expected = -0.1 / (1.0 + 1e-8);
        assert!((p.data()[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = Tensor::scalar(0.0).with_grad();
        let mut adam = AdamState::new(0.05);
        for _ in 0..2000 {
            let g = 2.0 * (p.data()[0] - 5.0);
            p.accumulate_grad(&[g]).unwrap();
            adam.step(&mut [&mut p]).unwrap();
        }
        assert!((p.data()[0] - 5.0).abs() < 1e-3, "p = {}", p.data()[0]);
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut p = Tensor::scalar(0.0).with_grad();
        p.accumulate_grad(&[f64::NAN]).unwrap();
        let mut adam = AdamState::new(0.1);
        assert!(matches!(adam.step(&mut [&mut p]), Err(GdpError::NonFinite { .. })));
    }
}
