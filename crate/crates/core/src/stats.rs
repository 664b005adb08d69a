//! Scalar estimates with standard errors.

use std::fmt;

/// A statistical estimate and its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

impl Estimate {
    pub fn exact(value: f64) -> Self {
        Estimate { value, stderr: 0.0 }
    }

    /// `|self − other|` in units of the combined standard error
    /// `√(σ₁² + σ₂²)`. Infinite when both errors vanish and values differ.
    pub fn z_distance(&self, other: &Estimate) -> f64 {
        let diff = (self.value - other.value).abs();
        let se = self.stderr.hypot(other.stderr);
        if diff == 0.0 {
            0.0
        } else {
            diff / se
        }
    }

    /// True when the estimate lies below `threshold` by more than `n`
    /// standard errors.
    pub fn below_by(&self, threshold: f64, n: f64) -> bool {
        self.value < threshold - n * self.stderr
    }
}

impl fmt::Display for Estimate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:.6} ± {:.2e}", self.value, self.stderr)
    }
}

/// Delete-one-group jackknife. `full` is the statistic on the pooled
/// sample and `leave_out` the statistic with each group removed in turn.
pub fn jackknife(full: f64, leave_out: &[f64]) -> Estimate {
    let g = leave_out.len();
    if g < 2 {
        return Estimate { value: full, stderr: f64::NAN };
    }
    let mean = leave_out.iter().sum::<f64>() / g as f64;
    let ss: f64 = leave_out.iter().map(|x| (x - mean).powi(2)).sum();
    Estimate { value: full, stderr: ((g as f64 - 1.0) / g as f64 * ss).sqrt() }
}
