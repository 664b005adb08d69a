use num_complex::Complex64;

use super::ensemble::{integrate_semiclassical, run_ensemble};
use super::{IntegrationConfig, TrajectoryError};
use crate::model::{Configuration, Mode, PhaseSpacePoint, SystemParams};
use crate::stats::Estimate;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulsingOptions {
    /// Imaginary part given to the classical α₁(0). The classical
    /// equations leave the real subspace invariant and the pulsing
    /// instability lives outside it, so an exactly real start would sit on
    /// the unstable fixed point forever.
    pub classical_phase_kick: f64,
    /// Trailing fraction of the run used to measure peak-to-trough swings.
    pub late_fraction: f64,
}

impl Default for PulsingOptions {
    fn default() -> Self {
        PulsingOptions { classical_phase_kick: 1e-3, late_fraction: 1.0 / 3.0 }
    }
}

/// Classical and quantum-mean N₁ on a common grid, starting from vacuum.
#[derive(Debug, Clone, PartialEq)]
pub struct PulsingComparison {
    pub times: Vec<f64>,
    pub classical_n1: Vec<f64>,
    pub quantum_n1: Vec<Estimate>,
    pub n_alive: Vec<usize>,
    pub n_diverged: usize,
    pub reliability_warning: bool,
    /// First time included in the late window.
    pub window_start: f64,
    pub classical_amplitude: f64,
    /// Peak-to-trough of the ensemble mean; the error combines the errors
    /// at the peak and the trough.
    pub quantum_amplitude: Estimate,
}

impl PulsingComparison {
    /// The classical swing is a visible fraction of its mean level.
    pub fn classical_oscillates(&self) -> bool {
        let late: Vec<f64> = self.late_indices().map(|i| self.classical_n1[i]).collect();
        let mean = late.iter().sum::<f64>() / late.len().max(1) as f64;
        self.classical_amplitude > 1e-3 * mean.abs()
    }

    /// The quantum swing is resolved above its standard error.
    pub fn quantum_oscillates(&self) -> bool {
        self.quantum_amplitude.value > 3.0 * self.quantum_amplitude.stderr
    }

    fn late_indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.times.iter().enumerate().filter(|(_, &t)| t >= self.window_start).map(|(i, _)| i)
    }
}

fn peak_to_trough(xs: impl Iterator<Item = (usize, f64)>) -> Option<((usize, f64), (usize, f64))> {
    let mut hi: Option<(usize, f64)> = None;
    let mut lo: Option<(usize, f64)> = None;
    for (i, x) in xs {
        if hi.is_none_or(|(_, h)| x > h) {
            hi = Some((i, x));
        }
        if lo.is_none_or(|(_, l)| x < l) {
            lo = Some((i, x));
        }
    }
    Some((hi?, lo?))
}

pub fn self_pulsing_comparison(
    p: &SystemParams,
    cfg: &IntegrationConfig,
    opts: &PulsingOptions,
) -> Result<PulsingComparison, TrajectoryError> {
    if p.configuration != Configuration::Intracavity {
        return Err(TrajectoryError::WrongConfiguration(
            "self-pulsing needs the intracavity configuration".into(),
        ));
    }
    if !(opts.late_fraction > 0.0 && opts.late_fraction <= 1.0) {
        return Err(TrajectoryError::InvalidConfig("late_fraction must lie in (0, 1]".into()));
    }
    let zero = Complex64::new(0.0, 0.0);
    let kicked = PhaseSpacePoint::classical(0.0, Complex64::new(0.0, opts.classical_phase_kick), zero, zero);
    let classical = integrate_semiclassical(p, &kicked, cfg)?;
    let quantum = run_ensemble(p, &PhaseSpacePoint::vacuum(), cfg)?;

    let n = quantum.records.len().min(classical.points.len());
    let times: Vec<f64> = quantum.records[..n].iter().map(|r| r.t).collect();
    let classical_n1: Vec<f64> =
        classical.points[..n].iter().map(|q| q.photon_number(Mode::Fundamental).re).collect();
    let quantum_n1: Vec<Estimate> =
        quantum.records[..n].iter().map(|r| r.intensity(Mode::Fundamental)).collect();
    let n_alive = quantum.records[..n].iter().map(|r| r.n_alive).collect();

    let window_start = cfg.t_end * (1.0 - opts.late_fraction);
    let late = || times.iter().enumerate().filter(|(_, &t)| t >= window_start).map(|(i, _)| i);

    let classical_amplitude = match peak_to_trough(late().map(|i| (i, classical_n1[i]))) {
        Some(((_, hi), (_, lo))) => hi - lo,
        None => f64::NAN,
    };
    let quantum_amplitude = match peak_to_trough(late().map(|i| (i, quantum_n1[i].value))) {
        Some(((ih, hi), (il, lo))) => Estimate {
            value: hi - lo,
            stderr: quantum_n1[ih].stderr.hypot(quantum_n1[il].stderr),
        },
        None => Estimate { value: f64::NAN, stderr: f64::NAN },
    };

    Ok(PulsingComparison {
        times,
        classical_n1,
        quantum_n1,
        n_alive,
        n_diverged: quantum.n_diverged,
        reliability_warning: quantum.reliability_warning,
        window_start,
        classical_amplitude,
        quantum_amplitude,
    })
}
