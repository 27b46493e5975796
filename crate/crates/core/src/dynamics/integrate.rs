use crate::error::{contract, GdpError, Result};

/// Classical fourth-order Runge–Kutta with a fixed step.
///
/// Fails with [`GdpError::Divergence`] naming the first step whose state is
/// not finite.
pub fn rk4_integrate<F>(mut deriv: F, x0: &[f64], step: f64, n_inner: usize) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(step > 0.0) {
        return contract(format!("inner step must be positive, got {step}"));
    }
    let mut x = x0.to_vec();
    let mut tmp = vec![0.0; x.len()];
    for s in 0..n_inner {
        let k1 = deriv(&x)?;
        axpy(&mut tmp, &x, 0.5 * step, &k1);
        let k2 = deriv(&tmp)?;
        axpy(&mut tmp, &x, 0.5 * step, &k2);
        let k3 = deriv(&tmp)?;
        axpy(&mut tmp, &x, step, &k3);
        let k4 = deriv(&tmp)?;
        for q in 0..x.len() {
            x[q] += step / 6.0 * (k1[q] + 2.0 * k2[q] + 2.0 * k3[q] + k4[q]);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(GdpError::Divergence { step: s });
        }
    }
    Ok(x)
}

fn axpy(out: &mut [f64], x: &[f64], a: f64, y: &[f64]) {
    for ((o, xv), yv) in out.iter_mut().zip(x).zip(y) {
        *o = xv + a * yv;
    }
}
