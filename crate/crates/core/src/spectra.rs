//! Stationary fluctuation spectra of the linearized cavity and the output
//! quadrature spectra seen by homodyne detection.
//!
//! The intracavity spectral matrix is `S(ω) = (A + iω)⁻¹ D (Aᵀ − iω)⁻¹`
//! (plain transpose), and output (co)variances follow from
//! `S_out(Qᵢ, Qⱼ) = δᵢⱼ + √(γᵢγⱼ)(Sᵢⱼ + Sⱼᵢ)` in the quadrature basis.

use nalgebra::Matrix6;
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::model::Mode;
use crate::quadrature::{self, InferenceError};
use crate::steadystate::LinearizedModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectrumError {
    #[error("linearized model is unstable (min Re λ = {min_re:e}); spectra are undefined")]
    Unstable { min_re: f64 },
    #[error("A + iω is singular at ω = {omega}")]
    Singular { omega: f64 },
    #[error("invalid frequency grid: {0}")]
    InvalidGrid(String),
    #[error("at ω = {omega}: {source}")]
    Inference { omega: f64, source: InferenceError },
}

/// Frequencies in units of γ₁, strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyGrid {
    points: Vec<f64>,
}

impl FrequencyGrid {
    pub const DEFAULT_MIN: f64 = -20.0;
    pub const DEFAULT_MAX: f64 = 20.0;
    pub const DEFAULT_POINTS: usize = 801;

    pub fn new(points: Vec<f64>) -> Result<Self, SpectrumError> {
        if points.is_empty() {
            return Err(SpectrumError::InvalidGrid("no points".into()));
        }
        if points.iter().any(|w| !w.is_finite()) {
            return Err(SpectrumError::InvalidGrid("non-finite frequency".into()));
        }
        if points.windows(2).any(|w| w[1] <= w[0]) {
            return Err(SpectrumError::InvalidGrid("frequencies must be strictly increasing".into()));
        }
        Ok(FrequencyGrid { points })
    }

    /// `n` evenly spaced points from `min` to `max` inclusive. Symmetric
    /// ranges are built mirror-exact so that ω and −ω both appear.
    pub fn linspace(min: f64, max: f64, n: usize) -> Result<Self, SpectrumError> {
        if n < 2 {
            return Err(SpectrumError::InvalidGrid("need at least two points".into()));
        }
        let step = (max - min) / (n - 1) as f64;
        let mut points: Vec<f64> = (0..n).map(|i| min + step * i as f64).collect();
        if min == -max {
            for i in 0..n / 2 {
                let w = max - step * i as f64;
                points[n - 1 - i] = w;
                points[i] = -w;
            }
            if n % 2 == 1 {
                points[n / 2] = 0.0;
            }
        }
        Self::new(points)
    }

    pub fn default_grid() -> Self {
        Self::linspace(Self::DEFAULT_MIN, Self::DEFAULT_MAX, Self::DEFAULT_POINTS)
            .expect("default grid is valid")
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.points.len();
        (0..n).all(|i| self.points[i] == -self.points[n - 1 - i])
    }
}

/// `(A + iω)⁻¹ D (Aᵀ − iω)⁻¹` by two LU solves. The right factor is applied
/// through `[M (Aᵀ − iω)⁻¹]ᵀ = (A − iω)⁻¹ Mᵀ`.
pub fn ou_spectrum_at(
    a: &Matrix6<Complex64>,
    d: &Matrix6<Complex64>,
    omega: f64,
) -> Result<Matrix6<Complex64>, SpectrumError> {
    let iw = Matrix6::<Complex64>::identity() * Complex64::new(0.0, omega);
    let left = (a + iw).lu();
    let right = (a - iw).lu();
    let m = left.solve(d).ok_or(SpectrumError::Singular { omega })?;
    let s_t = right.solve(&m.transpose()).ok_or(SpectrumError::Singular { omega })?;
    let s = s_t.transpose();
    if s.iter().any(|z| !z.is_finite()) {
        return Err(SpectrumError::Singular { omega });
    }
    Ok(s)
}

fn require_stable(lm: &LinearizedModel) -> Result<(), SpectrumError> {
    if lm.stable {
        Ok(())
    } else {
        Err(SpectrumError::Unstable { min_re: lm.min_real_eigenvalue() })
    }
}

fn map_grid<T: Send>(
    grid: &FrequencyGrid,
    f: impl Fn(f64) -> Result<T, SpectrumError> + Sync,
) -> Result<Vec<T>, SpectrumError> {
    grid.points().par_iter().map(|&w| f(w)).collect()
}

/// Intracavity spectral matrix in the `(α, α⁺)` basis at every grid point.
pub fn ou_spectrum(lm: &LinearizedModel, grid: &FrequencyGrid) -> Result<Vec<Matrix6<Complex64>>, SpectrumError> {
    require_stable(lm)?;
    map_grid(grid, |w| ou_spectrum_at(&lm.a, &lm.d, w))
}

/// `δᵢⱼ + √(γᵢγⱼ)(Sᵢⱼ + Sⱼᵢ)` for a quadrature-basis spectral matrix.
pub fn output_covariance(s_quad: &Matrix6<Complex64>, rates: &[f64; 6]) -> Matrix6<f64> {
    let sym = s_quad + s_quad.transpose();
    Matrix6::from_fn(|i, j| {
        let delta = if i == j { 1.0 } else { 0.0 };
        delta + (rates[i] * rates[j]).sqrt() * sym[(i, j)].re
    })
}

/// Output quadrature covariance matrices over a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub omegas: Vec<f64>,
    /// One matrix per ω in `(X₁, Y₁, X₂, Y₂, X₃, Y₃)` order.
    pub s_out: Vec<Matrix6<f64>>,
    /// Largest imaginary part discarded from `Sᵢⱼ + Sⱼᵢ`.
    pub max_discarded_imag: f64,
}

impl SpectrumResult {
    fn column(&self, r: usize, c: usize) -> Vec<f64> {
        self.s_out.iter().map(|m| m[(r, c)]).collect()
    }

    pub fn var_x(&self, mode: Mode) -> Vec<f64> {
        let i = quadrature::x_index(mode);
        self.column(i, i)
    }

    pub fn var_y(&self, mode: Mode) -> Vec<f64> {
        let i = quadrature::y_index(mode);
        self.column(i, i)
    }

    pub fn cov_x(&self, j: Mode, k: Mode) -> Vec<f64> {
        self.column(quadrature::x_index(j), quadrature::x_index(k))
    }

    pub fn cov_y(&self, j: Mode, k: Mode) -> Vec<f64> {
        self.column(quadrature::y_index(j), quadrature::y_index(k))
    }
}

/// Output quadrature spectra. The fluctuation equations are first carried
/// to the quadrature basis (`A_X = QAQ⁻¹`, `D_X = QDQᵀ`), the OU spectrum
/// is evaluated there, and the input-output relation applied.
pub fn output_quadrature_spectrum(lm: &LinearizedModel, grid: &FrequencyGrid) -> Result<SpectrumResult, SpectrumError> {
    require_stable(lm)?;
    let q = quadrature::basis_change();
    let a_x = q * lm.a * quadrature::basis_change_inverse();
    let d_x = q * lm.d * q.transpose();
    let rates = lm.rates();
    let per_point = map_grid(grid, |w| {
        let s = ou_spectrum_at(&a_x, &d_x, w)?;
        let sym = s + s.transpose();
        let imag = sym.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
        Ok((output_covariance(&s, &rates), imag))
    })?;
    let max_discarded_imag = per_point.iter().map(|(_, im)| *im).fold(0.0, f64::max);
    Ok(SpectrumResult {
        omegas: grid.points().to_vec(),
        s_out: per_point.into_iter().map(|(m, _)| m).collect(),
        max_discarded_imag,
    })
}

/// `EPR_jk(ω)`: mode `j` inferred from mode `k` at every grid point.
pub fn epr_spectrum(sr: &SpectrumResult, j: Mode, k: Mode) -> Result<Vec<f64>, SpectrumError> {
    sr.s_out
        .iter()
        .zip(sr.omegas.iter())
        .map(|(m, &omega)| {
            let steer = [quadrature::x_index(k), quadrature::y_index(k)];
            if let Some(&bad) = steer.iter().find(|&&i| m[(i, i)] <= 0.0) {
                return Err(SpectrumError::Inference {
                    omega,
                    source: InferenceError::DegenerateSteeringVariance { mode: k, variance: m[(bad, bad)] },
                });
            }
            quadrature::epr_product(m, j, k).map_err(|source| SpectrumError::Inference { omega, source })
        })
        .collect()
}
