//! Quadrature basis and the Reid inferred-variance criterion.
//!
//! Quadratures are `X = α + α⁺` and `Y = −i(α − α⁺)`, so vacuum and
//! coherent states have unit variance. A 6×6 quadrature covariance is
//! ordered `(X₁, Y₁, X₂, Y₂, X₃, Y₃)`.

use nalgebra::{Matrix2, Matrix6};
use num_complex::Complex64;
use thiserror::Error;

use crate::model::Mode;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum InferenceError {
    #[error("variance of the steering mode {mode} is {variance:e}; inference is undefined")]
    DegenerateSteeringVariance { mode: Mode, variance: f64 },
}

/// Block-diagonal map from `(α₁, α₁⁺, …)` to `(X₁, Y₁, …)`.
pub fn basis_change() -> Matrix6<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    let block = Matrix2::new(one, one, -i, i);
    let mut q = Matrix6::zeros();
    for m in 0..3 {
        q.fixed_view_mut::<2, 2>(2 * m, 2 * m).copy_from(&block);
    }
    q
}

/// Inverse of [`basis_change`]: `α = (X + iY)/2`, `α⁺ = (X − iY)/2`.
pub fn basis_change_inverse() -> Matrix6<Complex64> {
    let h = Complex64::new(0.5, 0.0);
    let hi = Complex64::new(0.0, 0.5);
    let block = Matrix2::new(h, hi, h, -hi);
    let mut q = Matrix6::zeros();
    for m in 0..3 {
        q.fixed_view_mut::<2, 2>(2 * m, 2 * m).copy_from(&block);
    }
    q
}

pub fn x_index(mode: Mode) -> usize {
    2 * mode.index()
}

pub fn y_index(mode: Mode) -> usize {
    2 * mode.index() + 1
}

/// `V(X_j) − Cov(X_j, X_k)² / V(X_k)`, the variance of X_j left after the
/// best linear estimate from X_k.
pub fn inferred_variance(
    cov: &Matrix6<f64>,
    target: usize,
    steer: usize,
    steer_mode: Mode,
) -> Result<f64, InferenceError> {
    let v_steer = cov[(steer, steer)];
    if v_steer < 10.0 * f64::EPSILON {
        return Err(InferenceError::DegenerateSteeringVariance { mode: steer_mode, variance: v_steer });
    }
    Ok(cov[(target, target)] - cov[(target, steer)].powi(2) / v_steer)
}

/// Reid product `EPR_jk = V_inf(X_j)·V_inf(Y_j)` with mode `k` as the
/// steering party. Values below one mean mode `j` can be steered by `k`.
pub fn epr_product(cov: &Matrix6<f64>, j: Mode, k: Mode) -> Result<f64, InferenceError> {
    let vx = inferred_variance(cov, x_index(j), x_index(k), k)?;
    let vy = inferred_variance(cov, y_index(j), y_index(k), k)?;
    Ok(vx * vy)
}
