//! Classical steady state of the pumped cavity and the linearized
//! fluctuation model around it.
//!
//! Fluctuations obey `dδα = −A δα dt + B dW` with `D = BBᵀ`. For the state
//! ordering `(α₁, α₁⁺, α₂, α₂⁺, α₃, α₃⁺)` the drift matrix is
//!
//! ```text
//!     ⎡ γ₁       −κ₁α₂   −κ₁α₁*   0        0       0      ⎤
//!     ⎢ −κ₁α₂*   γ₁      0        −κ₁α₁    0       0      ⎥
//! A = ⎢ κ₁α₁     0       γ₂       −κ₂α₃    −κ₂α₂*  0      ⎥
//!     ⎢ 0        κ₁α₁*   −κ₂α₃*   γ₂       0       −κ₂α₂  ⎥
//!     ⎢ 0        0       κ₂α₂     0        γ₃      0      ⎥
//!     ⎣ 0        0       0        κ₂α₂*    0       γ₃     ⎦
//! ```
//!
//! and `D = diag(κ₁α₂, κ₁α₂*, κ₂α₃, κ₂α₃*, 0, 0)`.

use nalgebra::{Matrix6, Vector6};
use num_complex::Complex64;
use thiserror::Error;

use crate::model::{drift_jacobian, drift_state, Configuration, ModelError, State, SystemParams};
use crate::quadrature;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SteadyStateError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("steady state needs the intracavity configuration")]
    NotIntracavity,
    #[error("no steady state reached: residual {residual:e} after the iteration budget")]
    NoSteadyState { residual: f64 },
    #[error("refusing to linearize around an unconverged steady state")]
    Unconverged,
    #[error("no stability change between epsilon = {lo} and {hi}")]
    NoThresholdInBracket { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SteadyState {
    /// `(α₁, α₂, α₃)`; the α⁺ partners are the conjugates.
    pub amplitudes: [Complex64; 3],
    /// Max-norm of the classical drift at `amplitudes`.
    pub residual: f64,
    pub converged: bool,
}

impl SteadyState {
    pub fn state(&self) -> State {
        let [a1, a2, a3] = self.amplitudes;
        [a1, a1.conj(), a2, a2.conj(), a3, a3.conj()]
    }

    pub fn tolerance(p: &SystemParams) -> f64 {
        1e-10 * p.epsilon.norm().max(1.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearizedModel {
    pub params: SystemParams,
    pub steady: SteadyState,
    pub a: Matrix6<Complex64>,
    pub d: Matrix6<Complex64>,
    pub eigenvalues: Vec<Complex64>,
    pub stable: bool,
}

impl LinearizedModel {
    pub fn min_real_eigenvalue(&self) -> f64 {
        self.eigenvalues.iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
    }

    /// Loss rate attached to each state (and quadrature) index.
    pub fn rates(&self) -> [f64; 6] {
        let [g1, g2, g3] = self.params.gammas();
        [g1, g1, g2, g2, g3, g3]
    }
}

/// RK4 step length for the relaxation, in units of 1/γ.
const RELAX_DT: f64 = 0.01;
/// Relaxation stops once every drift component is below this.
const RELAX_TOL: f64 = 1e-6;
const RELAX_MAX_TIME: f64 = 20_000.0;
const NEWTON_MAX_ITER: usize = 50;

fn residual(p: &SystemParams, s: &State) -> f64 {
    drift_state(p, s).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn rk4(p: &SystemParams, s: &State, h: f64) -> State {
    let add = |a: &State, k: &State, c: f64| -> State {
        let mut out = *a;
        for i in 0..6 {
            out[i] += k[i] * c;
        }
        out
    };
    let k1 = drift_state(p, s);
    let k2 = drift_state(p, &add(s, &k1, 0.5 * h));
    let k3 = drift_state(p, &add(s, &k2, 0.5 * h));
    let k4 = drift_state(p, &add(s, &k3, h));
    let mut out = *s;
    for i in 0..6 {
        out[i] += (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]) * (h / 6.0);
    }
    out
}

fn enforce_conjugacy(s: &mut State) {
    for m in 0..3 {
        s[2 * m + 1] = s[2 * m].conj();
    }
}

fn newton(p: &SystemParams, mut s: State) -> (State, f64) {
    let target = 1e-2 * SteadyState::tolerance(p);
    let mut res = residual(p, &s);
    for _ in 0..NEWTON_MAX_ITER {
        if res <= target {
            break;
        }
        let jac = drift_jacobian(p, &s);
        let j = Matrix6::from_fn(|r, c| jac[r][c]);
        let f = Vector6::from_iterator(drift_state(p, &s));
        let Some(delta) = j.lu().solve(&f) else { break };
        let mut next = s;
        for i in 0..6 {
            next[i] -= delta[i];
        }
        enforce_conjugacy(&mut next);
        let next_res = residual(p, &next);
        if !next_res.is_finite() || next_res >= res {
            break;
        }
        s = next;
        res = next_res;
    }
    (s, res)
}

fn finish(p: &SystemParams, s: State, res: f64) -> Result<SteadyState, SteadyStateError> {
    if res <= SteadyState::tolerance(p) && s.iter().all(|z| z.is_finite()) {
        Ok(SteadyState { amplitudes: [s[0], s[2], s[4]], residual: res, converged: true })
    } else {
        Err(SteadyStateError::NoSteadyState { residual: res })
    }
}

/// Relaxes the classical equations from vacuum, then polishes the end point
/// with Newton's method. The relaxed branch is the canonical one.
pub fn solve_steady_state(p: &SystemParams) -> Result<SteadyState, SteadyStateError> {
    p.validate()?;
    if p.configuration != Configuration::Intracavity {
        return Err(SteadyStateError::NotIntracavity);
    }
    let gmax = p.gammas().into_iter().fold(0.0, f64::max);
    let h = RELAX_DT / gmax;
    let max_steps = (RELAX_MAX_TIME / p.gammas().into_iter().fold(f64::INFINITY, f64::min) / h) as usize;
    let mut s = [Complex64::new(0.0, 0.0); 6];
    let mut res = residual(p, &s);
    let mut step = 0;
    while res >= RELAX_TOL && step < max_steps {
        for _ in 0..100 {
            s = rk4(p, &s, h);
        }
        step += 100;
        res = residual(p, &s);
        if !res.is_finite() {
            return Err(SteadyStateError::NoSteadyState { residual: res });
        }
    }
    if res >= RELAX_TOL {
        return Err(SteadyStateError::NoSteadyState { residual: res });
    }
    let (s, res) = newton(p, s);
    finish(p, s, res)
}

/// Newton iteration from an arbitrary classical starting point. Useful for
/// probing other fixed-point branches.
pub fn newton_from(p: &SystemParams, start: [Complex64; 3]) -> Result<SteadyState, SteadyStateError> {
    p.validate()?;
    if p.configuration != Configuration::Intracavity {
        return Err(SteadyStateError::NotIntracavity);
    }
    let [a1, a2, a3] = start;
    let (s, res) = newton(p, [a1, a1.conj(), a2, a2.conj(), a3, a3.conj()]);
    finish(p, s, res)
}

/// The drift matrix `A` with steady-state values substituted.
pub fn drift_matrix(p: &SystemParams, ss: &SteadyState) -> Matrix6<Complex64> {
    let [a1, a2, a3] = ss.amplitudes;
    let (k1, k2) = (p.kappa1, p.kappa2);
    let z = Complex64::new(0.0, 0.0);
    let g = |x: f64| Complex64::new(x, 0.0);
    #[rustfmt::skip]
    let a = Matrix6::new(
        g(p.gamma1),        -k1 * a2,          -k1 * a1.conj(),   z,                 z,                 z,
        -k1 * a2.conj(),    g(p.gamma1),       z,                 -k1 * a1,          z,                 z,
        k1 * a1,            z,                 g(p.gamma2),       -k2 * a3,          -k2 * a2.conj(),   z,
        z,                  k1 * a1.conj(),    -k2 * a3.conj(),   g(p.gamma2),       z,                 -k2 * a2,
        z,                  z,                 k2 * a2,           z,                 g(p.gamma3),       z,
        z,                  z,                 z,                 k2 * a2.conj(),    z,                 g(p.gamma3),
    );
    a
}

pub fn diffusion_matrix(p: &SystemParams, ss: &SteadyState) -> Matrix6<Complex64> {
    let [_, a2, a3] = ss.amplitudes;
    let z = Complex64::new(0.0, 0.0);
    Matrix6::from_diagonal(&Vector6::new(
        p.kappa1 * a2,
        p.kappa1 * a2.conj(),
        p.kappa2 * a3,
        p.kappa2 * a3.conj(),
        z,
        z,
    ))
}

/// Eigenvalues of `A`. For a classical steady state `A` is similar, through
/// the quadrature basis change, to a real matrix; the eigenvalues are taken
/// from that real form.
pub fn drift_eigenvalues(a: &Matrix6<Complex64>) -> Vec<Complex64> {
    let q = quadrature::basis_change();
    let ax = q * a * quadrature::basis_change_inverse();
    let imag = ax.map(|z| z.im.abs()).max();
    if imag <= 1e-12 * ax.map(|z| z.norm()).max().max(1.0) {
        let real = ax.map(|z| z.re);
        real.complex_eigenvalues().iter().copied().collect()
    } else {
        // general complex A (not reached for classical steady states)
        a.eigenvalues().map(|v| v.iter().copied().collect()).unwrap_or_default()
    }
}

pub fn build_linearized(p: &SystemParams, ss: &SteadyState) -> Result<LinearizedModel, SteadyStateError> {
    if !ss.converged {
        return Err(SteadyStateError::Unconverged);
    }
    let a = drift_matrix(p, ss);
    let d = diffusion_matrix(p, ss);
    let eigenvalues = drift_eigenvalues(&a);
    let stable = eigenvalues.len() == 6 && eigenvalues.iter().all(|z| z.re > 0.0);
    Ok(LinearizedModel { params: *p, steady: *ss, a, d, eigenvalues, stable })
}

/// Linearizes `p` and reports whether the relaxed steady state is stable.
/// A failed relaxation counts as unstable.
pub fn is_stable(p: &SystemParams) -> bool {
    solve_steady_state(p)
        .and_then(|ss| build_linearized(p, &ss))
        .map(|lm| lm.stable)
        .unwrap_or(false)
}

/// Bisects on the pump amplitude for the onset of instability between a
/// stable `lo` and an unstable `hi`.
pub fn pulsing_threshold(p: &SystemParams, lo: f64, hi: f64, tol: f64) -> Result<f64, SteadyStateError> {
    let with_pump = |eps: f64| SystemParams { epsilon: Complex64::new(eps, 0.0), ..*p };
    if !is_stable(&with_pump(lo)) || is_stable(&with_pump(hi)) {
        return Err(SteadyStateError::NoThresholdInBracket { lo, hi });
    }
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if is_stable(&with_pump(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}
