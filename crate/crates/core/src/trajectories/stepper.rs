use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{IntegrationConfig, Scheme, MIDPOINT_ITERATIONS};
use crate::model::{drift_state, noise_amplitudes, State, SystemParams};

#[inline(always)]
fn increment<const NOISY: bool>(p: &SystemParams, at: &State, dt: f64, dw: &[f64; 4]) -> State {
    let d = drift_state(p, at);
    let mut inc = d.map(|z| z * dt);
    if NOISY {
        let b = noise_amplitudes(p, at);
        for k in 0..4 {
            inc[k] += b[k] * dw[k];
        }
    }
    inc
}

#[inline(always)]
fn implicit_midpoint<const NOISY: bool>(p: &SystemParams, s: &mut State, dt: f64, dw: &[f64; 4]) {
    let mut mid = *s;
    for _ in 0..MIDPOINT_ITERATIONS {
        let inc = increment::<NOISY>(p, &mid, dt, dw);
        for i in 0..6 {
            mid[i] = s[i] + 0.5 * inc[i];
        }
    }
    for i in 0..6 {
        s[i] = 2.0 * mid[i] - s[i];
    }
}

/// Midpoint update of the noise alone. The harmonic amplitudes carry no
/// noise, so the second-harmonic kick is exact and its midpoint value then
/// sets the fundamental kick; no iteration is needed.
#[inline(always)]
fn noise_kick(p: &SystemParams, s: &mut State, dw: &[f64; 4]) {
    let b = noise_amplitudes(p, s);
    let mut mid = *s;
    mid[2] += 0.5 * b[2] * dw[2];
    mid[3] += 0.5 * b[3] * dw[3];
    let b = noise_amplitudes(p, &mid);
    for k in 0..4 {
        s[k] += b[k] * dw[k];
    }
}

#[inline(always)]
fn step<const NOISY: bool>(p: &SystemParams, scheme: Scheme, s: &mut State, dt: f64, dw: &[f64; 4]) {
    match scheme {
        Scheme::EulerMaruyama => {
            let inc = increment::<NOISY>(p, s, dt, dw);
            for i in 0..6 {
                s[i] += inc[i];
            }
        }
        Scheme::SemiImplicitMidpoint => implicit_midpoint::<NOISY>(p, s, dt, dw),
        Scheme::SplitMidpoint => {
            implicit_midpoint::<false>(p, s, 0.5 * dt, dw);
            if NOISY {
                noise_kick(p, s, dw);
            }
            implicit_midpoint::<false>(p, s, 0.5 * dt, dw);
        }
    }
}

#[inline(always)]
fn out_of_bounds(s: &State, threshold_sq: f64) -> bool {
    // NaN fails every comparison, so it counts as out of bounds.
    s.iter().any(|z| !(z.norm_sqr() <= threshold_sq))
}

/// Integrates one trajectory from `init`, calling `on_record(r, state)` at
/// every recorded sample `r`. Returns the divergence time if the trajectory
/// left the finite region; no samples are delivered from then on.
pub(crate) fn integrate_path<const NOISY: bool>(
    p: &SystemParams,
    init: &State,
    t0: f64,
    cfg: &IntegrationConfig,
    traj_index: u64,
    mut on_record: impl FnMut(usize, &State),
) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(traj_index);
    let sqrt_dt = cfg.dt.sqrt();
    let threshold_sq = cfg.divergence_threshold * cfg.divergence_threshold;
    let n_steps = cfg.n_steps();

    let mut s = *init;
    if out_of_bounds(&s, threshold_sq) {
        return Some(t0);
    }
    on_record(0, &s);
    let mut dw = [0.0; 4];
    for n in 1..=n_steps {
        if NOISY {
            for w in dw.iter_mut() {
                let z: f64 = StandardNormal.sample(&mut rng);
                *w = z * sqrt_dt;
            }
        }
        step::<NOISY>(p, cfg.scheme, &mut s, cfg.dt, &dw);
        if out_of_bounds(&s, threshold_sq) {
            return Some(t0 + n as f64 * cfg.dt);
        }
        if n % cfg.record_stride == 0 {
            on_record(n / cfg.record_stride, &s);
        }
    }
    None
}
