use nalgebra::Matrix6;
use num_complex::Complex64;

use crate::model::{Mode, State};
use crate::quadrature::{self, InferenceError};
use crate::stats::{jackknife, Estimate};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

#[inline]
fn pair_index(a: usize, b: usize) -> usize {
    let (i, j) = if a <= b { (a, b) } else { (b, a) };
    // row-major upper triangle of a 6×6 matrix
    i * 6 - i * (i + 1) / 2 + j
}

/// Running mean and centred co-moment sums `Σ (v_a − m_a)(v_b − m_b)` of
/// the six amplitudes. Centring keeps unit-scale variances exact to
/// rounding even when the amplitudes themselves are of order 10³.
/// Mergeable in any grouping; merge order is fixed by the caller for
/// bit-reproducibility.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentSums {
    pub count: u64,
    mean: [Complex64; 6],
    comoment: [Complex64; 21],
}

impl Default for MomentSums {
    fn default() -> Self {
        MomentSums { count: 0, mean: [ZERO; 6], comoment: [ZERO; 21] }
    }
}

impl MomentSums {
    #[inline]
    pub fn add(&mut self, s: &State) {
        self.count += 1;
        let n = self.count as f64;
        let before: [Complex64; 6] = std::array::from_fn(|a| s[a] - self.mean[a]);
        for a in 0..6 {
            self.mean[a] += before[a] / n;
        }
        let mut k = 0;
        for a in 0..6 {
            for b in a..6 {
                self.comoment[k] += before[a] * (s[b] - self.mean[b]);
                k += 1;
            }
        }
    }

    /// Pools `self` (n₁ samples) with `other` (n₂ samples), or removes
    /// `other` from `self` when `sign` is −1.
    fn combine(&mut self, other: &MomentSums, sign: f64) {
        if other.count == 0 {
            return;
        }
        let n_other = other.count as f64;
        let count = if sign > 0.0 { self.count + other.count } else { self.count - other.count };
        if count == 0 {
            *self = MomentSums::default();
            return;
        }
        let n = count as f64;
        // the part with the smaller count is `other` when pooling and the
        // remainder when removing; either way δ is remainder minus other
        let (n1, mean1): (f64, [Complex64; 6]) = if sign > 0.0 {
            (self.count as f64, self.mean)
        } else {
            let total = self.count as f64;
            (n, std::array::from_fn(|a| (self.mean[a] * total - other.mean[a] * n_other) / n))
        };
        let delta: [Complex64; 6] = std::array::from_fn(|a| other.mean[a] - mean1[a]);
        let weight = n1 * n_other / (n1 + n_other);
        let mut k = 0;
        for a in 0..6 {
            for b in a..6 {
                self.comoment[k] += sign * (other.comoment[k] + delta[a] * delta[b] * weight);
                k += 1;
            }
        }
        self.mean = if sign > 0.0 {
            std::array::from_fn(|a| self.mean[a] + delta[a] * (n_other / n))
        } else {
            mean1
        };
        self.count = count;
    }

    pub fn merge(&mut self, other: &MomentSums) {
        if self.count == 0 {
            *self = other.clone();
        } else {
            self.combine(other, 1.0);
        }
    }

    fn without(&self, other: &MomentSums) -> MomentSums {
        let mut out = self.clone();
        out.combine(other, -1.0);
        out
    }

    /// Sample means; `None` when empty.
    pub fn means(&self) -> Option<Moments> {
        if self.count == 0 {
            return None;
        }
        let n = self.count as f64;
        Some(Moments { first: self.mean, centred: self.comoment.map(|z| z / n) })
    }
}

/// Ensemble-averaged first and second moments, i.e. normally ordered
/// operator expectations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    first: [Complex64; 6],
    centred: [Complex64; 21],
}

impl Moments {
    /// `mean(v_a)` for state component `a`.
    pub fn mean(&self, a: usize) -> Complex64 {
        self.first[a]
    }

    /// `mean(v_a v_b) − mean(v_a) mean(v_b)`.
    pub fn centred(&self, a: usize, b: usize) -> Complex64 {
        self.centred[pair_index(a, b)]
    }

    /// `mean(v_a v_b)`.
    pub fn second(&self, a: usize, b: usize) -> Complex64 {
        self.centred(a, b) + self.first[a] * self.first[b]
    }

    /// `⟨a†a⟩`, complex because the estimator is; the imaginary part is
    /// pure sampling noise.
    pub fn intensity(&self, mode: Mode) -> Complex64 {
        self.second(mode.amp() + 1, mode.amp())
    }

    pub fn charge(&self) -> f64 {
        (self.intensity(Mode::Fundamental)
            + 2.0 * self.intensity(Mode::SecondHarmonic)
            + 4.0 * self.intensity(Mode::FourthHarmonic))
        .re
    }

    /// Symmetrized quadrature covariance in `(X₁, Y₁, X₂, Y₂, X₃, Y₃)`
    /// order: `I + Re[Q (M₂ − m mᵀ) Qᵀ]`. The identity restores the
    /// vacuum noise that normal ordering removes.
    pub fn quadrature_covariance(&self) -> Matrix6<f64> {
        let centred = Matrix6::from_fn(|a, b| self.centred(a, b));
        let q = quadrature::basis_change();
        let c = q * centred * q.transpose();
        Matrix6::identity() + c.map(|z| z.re)
    }
}

/// Ensemble moments at one recorded time, with per-block sums kept for
/// jackknife errors.
#[derive(Debug, Clone, PartialEq)]
pub struct MomentRecord {
    pub t: f64,
    /// `κ₁|α₁(0)|t` for travelling-wave runs.
    pub xi: Option<f64>,
    pub n_alive: usize,
    total: MomentSums,
    blocks: Vec<MomentSums>,
}

impl MomentRecord {
    pub(crate) fn new(t: f64, xi: Option<f64>, blocks: Vec<MomentSums>) -> Self {
        let mut total = MomentSums::default();
        for b in &blocks {
            total.merge(b);
        }
        MomentRecord { t, xi, n_alive: total.count as usize, total, blocks }
    }

    pub fn moments(&self) -> Option<Moments> {
        self.total.means()
    }

    pub fn totals(&self) -> &MomentSums {
        &self.total
    }

    /// Applies `stat` to the pooled moments and to every leave-one-block-out
    /// sub-ensemble, returning the value with its jackknife error.
    pub fn estimate(&self, stat: impl Fn(&Moments) -> f64) -> Estimate {
        let Some(full) = self.moments() else {
            return Estimate { value: f64::NAN, stderr: f64::NAN };
        };
        let full_value = stat(&full);
        let loo: Vec<f64> = self
            .blocks
            .iter()
            .filter(|b| b.count > 0)
            .filter_map(|b| self.total.without(b).means().map(|m| stat(&m)))
            .collect();
        jackknife(full_value, &loo)
    }

    pub fn try_estimate(
        &self,
        stat: impl Fn(&Moments) -> Result<f64, InferenceError>,
    ) -> Result<Estimate, InferenceError> {
        let Some(full) = self.moments() else {
            return Ok(Estimate { value: f64::NAN, stderr: f64::NAN });
        };
        let full_value = stat(&full)?;
        let mut loo = Vec::with_capacity(self.blocks.len());
        for b in self.blocks.iter().filter(|b| b.count > 0) {
            if let Some(m) = self.total.without(b).means() {
                loo.push(stat(&m)?);
            }
        }
        Ok(jackknife(full_value, &loo))
    }

    pub fn intensity(&self, mode: Mode) -> Estimate {
        self.estimate(|m| m.intensity(mode).re)
    }

    pub fn intensity_imag(&self, mode: Mode) -> Estimate {
        self.estimate(|m| m.intensity(mode).im)
    }

    pub fn charge(&self) -> Estimate {
        self.estimate(|m| m.charge())
    }

    pub fn var_x(&self, mode: Mode) -> Estimate {
        let i = quadrature::x_index(mode);
        self.estimate(|m| m.quadrature_covariance()[(i, i)])
    }

    pub fn var_y(&self, mode: Mode) -> Estimate {
        let i = quadrature::y_index(mode);
        self.estimate(|m| m.quadrature_covariance()[(i, i)])
    }

    pub fn cov_x(&self, j: Mode, k: Mode) -> Estimate {
        let (a, b) = (quadrature::x_index(j), quadrature::x_index(k));
        self.estimate(|m| m.quadrature_covariance()[(a, b)])
    }

    pub fn cov_y(&self, j: Mode, k: Mode) -> Estimate {
        let (a, b) = (quadrature::y_index(j), quadrature::y_index(k));
        self.estimate(|m| m.quadrature_covariance()[(a, b)])
    }

    /// `V(X)·V(Y)` for one mode; at least one for any quantum state.
    pub fn uncertainty_product(&self, mode: Mode) -> Estimate {
        let (x, y) = (quadrature::x_index(mode), quadrature::y_index(mode));
        self.estimate(|m| {
            let c = m.quadrature_covariance();
            c[(x, x)] * c[(y, y)]
        })
    }

    /// `EPR_jk`: mode `j` inferred from mode `k`.
    pub fn epr(&self, j: Mode, k: Mode) -> Result<Estimate, InferenceError> {
        self.try_estimate(|m| quadrature::epr_product(&m.quadrature_covariance(), j, k))
    }
}
