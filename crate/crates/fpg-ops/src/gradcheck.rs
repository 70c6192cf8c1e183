//! Finite-difference oracles and small numeric test helpers.
//!
//! These are deliberately independent of the analytic derivative paths they
//! are used to check: everything here works on opaque closures.

use nalgebra::{DMatrix, DVector};

/// Central-difference gradient of a scalar function.
pub fn central_diff_grad<F>(f: F, x: &DVector<f64>, h: f64) -> DVector<f64>
where
    F: Fn(&DVector<f64>) -> f64,
{
    let mut grad = DVector::zeros(x.len());
    let mut probe = x.clone();
    for i in 0..x.len() {
        probe[i] = x[i] + h;
        let plus = f(&probe);
        probe[i] = x[i] - h;
        let minus = f(&probe);
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    grad
}

/// Central-difference Jacobian of a vector function, one column per input.
pub fn central_diff_jacobian<F>(f: F, x: &DVector<f64>, h: f64) -> DMatrix<f64>
where
    F: Fn(&DVector<f64>) -> DVector<f64>,
{
    let out_dim = f(x).len();
    let mut jac = DMatrix::zeros(out_dim, x.len());
    let mut probe = x.clone();
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let plus = f(&probe);
        probe[j] = x[j] - h;
        let minus = f(&probe);
        probe[j] = x[j];
        for i in 0..out_dim {
            jac[(i, j)] = (plus[i] - minus[i]) / (2.0 * h);
        }
    }
    jac
}

/// Largest entry-wise deviation normalized by the largest reference entry.
pub fn max_rel_error(got: &DMatrix<f64>, reference: &DMatrix<f64>) -> f64 {
    assert_eq!(got.shape(), reference.shape());
    let scale = reference
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    got.iter()
        .zip(reference.iter())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
        / scale
}

/// Vector variant of [`max_rel_error`].
pub fn max_rel_error_vec(got: &DVector<f64>, reference: &DVector<f64>) -> f64 {
    assert_eq!(got.len(), reference.len());
    let scale = reference
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
        .max(1e-300);
    got.iter()
        .zip(reference.iter())
        .fold(0.0f64, |acc, (a, b)| acc.max((a - b).abs()))
        / scale
}

/// Least-squares slope of `log(y)` against `log(x)`.
///
/// Used to verify convergence orders: halving the step of a first-order
/// quantity gives slope ≈ 1, a second-order quantity slope ≈ 2.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    assert!(xs.len() >= 2);
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.max(1e-300).ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in lx.iter().zip(ly.iter()) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}
