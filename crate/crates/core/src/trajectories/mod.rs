//! Positive-P trajectory ensembles and their time-domain observables.
//!
//! Every trajectory draws its noise from its own ChaCha8 stream keyed by
//! `(seed, trajectory index)`, so results do not depend on how trajectories
//! are spread over worker threads. Moments are accumulated per contiguous
//! block of trajectories; the blocks double as jackknife groups for the
//! standard errors of nonlinear observables.

mod ensemble;
mod epr;
mod moments;
mod pulsing;
mod stepper;

pub use ensemble::{
    integrate_semiclassical, run_ensemble, run_trajectory, EnsembleResult, SemiclassicalPath,
    TrajectoryPath,
};
pub use epr::{epr_timeseries, EprRecord};
pub use moments::{MomentRecord, MomentSums, Moments};
pub use pulsing::{self_pulsing_comparison, PulsingComparison, PulsingOptions};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Configuration, ModelError, SystemParams};
use crate::quadrature::InferenceError;

/// Iterations of the implicit midpoint fixed point per (sub)step. Each one
/// buys a factor of about `κ₁|α₁|dt` in how well quadratic invariants such
/// as the conserved charge are kept; four bring the noiseless charge drift
/// of a travelling-wave run down to rounding level.
pub const MIDPOINT_ITERATIONS: usize = 4;

/// Upper bound on the number of jackknife groups.
pub const MAX_BLOCKS: usize = 64;

/// Fewest trajectories accepted for an ensemble with error bars.
pub const MIN_ENSEMBLE: usize = 100;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrajectoryError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid integration config: {0}")]
    InvalidConfig(String),
    #[error("initial state is not classical (α⁺ ≠ conj α)")]
    NonClassicalInit,
    #[error("{n_diverged} of {n_traj} trajectories diverged before t_end (limit 10%)")]
    TooManyDiverged { n_diverged: usize, n_traj: usize },
    #[error("an ensemble needs at least {MIN_ENSEMBLE} trajectories, got {0}")]
    TooFewTrajectories(usize),
    #[error("{0}")]
    WrongConfiguration(String),
    #[error(transparent)]
    Inference(#[from] InferenceError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    EulerMaruyama,
    /// Iterated implicit midpoint over drift and noise together; converges
    /// to the Stratonovich solution, which coincides with the Itô one for
    /// these equations.
    SemiImplicitMidpoint,
    /// Half a midpoint drift step, a midpoint noise kick, then the other
    /// half drift step. Each drift substep keeps the conserved charge, and
    /// the coefficient of every charge-changing noise term is independent
    /// of its own increment, so the ensemble mean charge has no
    /// step-size bias. The fused scheme leaks charge at O(dt) in the mean
    /// because its midpoint drift sees the noise increment.
    SplitMidpoint,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntegrationConfig {
    pub dt: f64,
    pub t_end: f64,
    pub n_traj: usize,
    pub seed: u64,
    pub scheme: Scheme,
    /// A trajectory whose amplitude modulus exceeds this is dropped.
    pub divergence_threshold: f64,
    /// Steps between recorded samples.
    pub record_stride: usize,
}

impl IntegrationConfig {
    pub const DEFAULT_DIVERGENCE_THRESHOLD: f64 = 1e8;

    /// Default step: the fastest printed rate times `dt` is 10⁻³. That rate
    /// is `κ₁|α₁(0)|` for travelling-wave runs and the largest loss rate in
    /// a cavity.
    pub fn default_dt(p: &SystemParams, n1_initial: f64) -> f64 {
        match p.configuration {
            Configuration::TravellingWave => 1e-3 / (p.kappa1 * n1_initial.sqrt()),
            Configuration::Intracavity => 1e-3 / p.gammas().into_iter().fold(0.0, f64::max),
        }
    }

    pub fn validate(&self) -> Result<(), TrajectoryError> {
        let bad = |m: &str| Err(TrajectoryError::InvalidConfig(m.to_string()));
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return bad("dt > 0 is required");
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return bad("t_end > 0 is required");
        }
        if self.n_traj < 1 {
            return bad("n_traj >= 1 is required");
        }
        if self.record_stride < 1 {
            return bad("record_stride >= 1 is required");
        }
        if !(self.divergence_threshold > 0.0) {
            return bad("divergence_threshold > 0 is required");
        }
        if self.n_steps() == 0 {
            return bad("t_end must cover at least one step");
        }
        Ok(())
    }

    /// Number of integration steps; `t_end` is rounded to a whole number
    /// of steps.
    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    /// Recorded samples, including the initial one.
    pub fn n_records(&self) -> usize {
        self.n_steps() / self.record_stride + 1
    }

    pub fn record_time(&self, t0: f64, record: usize) -> f64 {
        t0 + (record * self.record_stride) as f64 * self.dt
    }
}
