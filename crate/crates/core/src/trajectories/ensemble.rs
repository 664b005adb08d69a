use rayon::prelude::*;

use super::moments::{MomentRecord, MomentSums};
use super::stepper::integrate_path;
use super::{IntegrationConfig, TrajectoryError, MAX_BLOCKS, MIN_ENSEMBLE};
use crate::model::{Configuration, PhaseSpacePoint, SystemParams};

/// Moments of a trajectory ensemble on the recorded time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleResult {
    pub records: Vec<MomentRecord>,
    pub n_traj: usize,
    pub n_diverged: usize,
    /// More than 1% (but at most 10%) of trajectories diverged.
    pub reliability_warning: bool,
}

/// A noise-free trajectory sampled on the record grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SemiclassicalPath {
    pub points: Vec<PhaseSpacePoint>,
    pub diverged: bool,
}

/// One stochastic trajectory sampled on the record grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPath {
    pub points: Vec<PhaseSpacePoint>,
    pub diverged_at: Option<f64>,
}

fn xi_scale(p: &SystemParams, init: &PhaseSpacePoint) -> Option<f64> {
    match p.configuration {
        Configuration::TravellingWave => Some(p.kappa1 * init.a1.norm()),
        Configuration::Intracavity => None,
    }
}

fn check_inputs(p: &SystemParams, init: &PhaseSpacePoint, cfg: &IntegrationConfig) -> Result<(), TrajectoryError> {
    p.validate()?;
    cfg.validate()?;
    if !init.is_finite() {
        return Err(crate::model::ModelError::NonFiniteState { t: init.t }.into());
    }
    Ok(())
}

/// Integrates the drift-only equations from a classical initial point.
pub fn integrate_semiclassical(
    p: &SystemParams,
    init: &PhaseSpacePoint,
    cfg: &IntegrationConfig,
) -> Result<SemiclassicalPath, TrajectoryError> {
    check_inputs(p, init, cfg)?;
    let scale = init.state().iter().map(|z| z.norm()).fold(1.0, f64::max);
    if !init.is_classical(1e-12 * scale) {
        return Err(TrajectoryError::NonClassicalInit);
    }
    let mut points = Vec::with_capacity(cfg.n_records());
    let diverged = integrate_path::<false>(p, &init.state(), init.t, cfg, 0, |r, s| {
        points.push(PhaseSpacePoint::from_state(cfg.record_time(init.t, r), *s));
    });
    Ok(SemiclassicalPath { points, diverged: diverged.is_some() })
}

/// Integrates stochastic trajectory number `index` of the ensemble that
/// [`run_ensemble`] would build with the same arguments.
pub fn run_trajectory(
    p: &SystemParams,
    init: &PhaseSpacePoint,
    cfg: &IntegrationConfig,
    index: usize,
) -> Result<TrajectoryPath, TrajectoryError> {
    check_inputs(p, init, cfg)?;
    let mut points = Vec::with_capacity(cfg.n_records());
    let diverged_at = integrate_path::<true>(p, &init.state(), init.t, cfg, index as u64, |r, s| {
        points.push(PhaseSpacePoint::from_state(cfg.record_time(init.t, r), *s));
    });
    Ok(TrajectoryPath { points, diverged_at })
}

struct BlockResult {
    sums: Vec<MomentSums>,
    n_diverged: usize,
}

fn run_block(
    p: &SystemParams,
    init: &PhaseSpacePoint,
    cfg: &IntegrationConfig,
    range: std::ops::Range<usize>,
) -> BlockResult {
    let mut sums = vec![MomentSums::default(); cfg.n_records()];
    let mut n_diverged = 0;
    let s0 = init.state();
    for index in range {
        let div = integrate_path::<true>(p, &s0, init.t, cfg, index as u64, |r, s| sums[r].add(s));
        if div.is_some() {
            n_diverged += 1;
        }
    }
    BlockResult { sums, n_diverged }
}

/// Integrates `cfg.n_traj` independent positive-P trajectories and returns
/// their normally ordered moments at every recorded time. Diverged
/// trajectories are dropped from the averages from their divergence time on.
pub fn run_ensemble(
    p: &SystemParams,
    init: &PhaseSpacePoint,
    cfg: &IntegrationConfig,
) -> Result<EnsembleResult, TrajectoryError> {
    check_inputs(p, init, cfg)?;
    if cfg.n_traj < MIN_ENSEMBLE {
        return Err(TrajectoryError::TooFewTrajectories(cfg.n_traj));
    }
    let n_blocks = cfg.n_traj.min(MAX_BLOCKS);
    let bounds = |b: usize| b * cfg.n_traj / n_blocks;
    let blocks: Vec<BlockResult> = (0..n_blocks)
        .into_par_iter()
        .map(|b| run_block(p, init, cfg, bounds(b)..bounds(b + 1)))
        .collect();

    let n_diverged: usize = blocks.iter().map(|b| b.n_diverged).sum();
    if n_diverged * 10 > cfg.n_traj {
        return Err(TrajectoryError::TooManyDiverged { n_diverged, n_traj: cfg.n_traj });
    }

    let xi = xi_scale(p, init);
    let records = (0..cfg.n_records())
        .map(|r| {
            let t = cfg.record_time(init.t, r);
            let per_block = blocks.iter().map(|b| b.sums[r].clone()).collect();
            MomentRecord::new(t, xi.map(|k| k * (t - init.t)), per_block)
        })
        .collect();

    Ok(EnsembleResult {
        records,
        n_traj: cfg.n_traj,
        n_diverged,
        reliability_warning: n_diverged * 100 > cfg.n_traj,
    })
}

#[cfg(test)]
mod tests {
    use super::super::Scheme;
    use super::*;
    use crate::model::{conserved_charge, Mode};
    use num_complex::Complex64;

    fn tw() -> SystemParams {
        SystemParams::travelling_wave(0.005, 0.02).unwrap()
    }

    fn cfg(dt: f64, t_end: f64, n_traj: usize) -> IntegrationConfig {
        IntegrationConfig {
            dt,
            t_end,
            n_traj,
            seed: 7,
            scheme: Scheme::SplitMidpoint,
            divergence_threshold: 1e8,
            record_stride: 10,
        }
    }

    #[test]
    fn vacuum_is_a_fixed_point() {
        let path = integrate_semiclassical(&tw(), &PhaseSpacePoint::vacuum(), &cfg(1e-3, 1.0, 1)).unwrap();
        assert!(!path.diverged);
        assert_eq!(path.points.len(), 101);
        assert!(path.points.iter().all(|q| q.state().iter().all(|z| *z == Complex64::new(0.0, 0.0))));
    }

    #[test]
    fn non_classical_start_is_refused() {
        let mut init = PhaseSpacePoint::coherent_fundamental(100.0);
        init.a1p = Complex64::new(3.0, 0.0);
        assert_eq!(
            integrate_semiclassical(&tw(), &init, &cfg(1e-3, 1.0, 1)),
            Err(TrajectoryError::NonClassicalInit)
        );
    }

    #[test]
    fn semiclassical_path_stays_classical_and_conserves_charge() {
        let p = tw();
        let init = PhaseSpacePoint::coherent_fundamental(1e6);
        let q0 = conserved_charge(&init).re;
        for scheme in [Scheme::SplitMidpoint, Scheme::SemiImplicitMidpoint] {
            let path = integrate_semiclassical(&p, &init, &IntegrationConfig { scheme, ..cfg(2e-4, 1.0, 1) }).unwrap();
            for q in &path.points {
                let scale = q.a1.norm().max(q.a2.norm()).max(q.a3.norm());
                assert!(q.is_classical(1e-12 * scale));
                assert!((conserved_charge(q).re - q0).abs() <= 1e-9 * q0, "{scheme:?}");
            }
        }
    }

    #[test]
    fn short_time_second_harmonic_growth_matches_series() {
        // N₂(t) ≈ (κ₁N₁(0)t/2)² for κ₁|α₁(0)|t ≪ 1
        let p = tw();
        let n1 = 1e6;
        let c = IntegrationConfig { record_stride: 1, ..cfg(2e-6, 2e-3, 1) };
        let path = integrate_semiclassical(&p, &PhaseSpacePoint::coherent_fundamental(n1), &c).unwrap();
        for q in path.points.iter().skip(1) {
            let xi = p.kappa1 * n1.sqrt() * q.t;
            assert!(xi <= 0.01 + 1e-12);
            let expected = (p.kappa1 * n1 * q.t / 2.0).powi(2);
            let got = q.photon_number(Mode::SecondHarmonic).re;
            assert!((got - expected).abs() <= 0.01 * expected, "xi {xi}: {got} vs {expected}");
        }
    }

    #[test]
    fn step_size_convergence_orders() {
        // error at t_end against a fine reference: midpoint O(dt²), Euler O(dt)
        let p = tw();
        let init = PhaseSpacePoint::coherent_fundamental(1e6);
        let t_end = 0.4;
        let run = |scheme, dt: f64| {
            let stride = (t_end / dt).round() as usize;
            let c = IntegrationConfig { scheme, record_stride: stride, ..cfg(dt, t_end, 1) };
            let path = integrate_semiclassical(&p, &init, &c).unwrap();
            path.points.last().unwrap().a2
        };
        let reference = run(Scheme::SemiImplicitMidpoint, 1e-5);
        for (scheme, order) in
            [(Scheme::SplitMidpoint, 2.0), (Scheme::SemiImplicitMidpoint, 2.0), (Scheme::EulerMaruyama, 1.0)]
        {
            let e1 = (run(scheme, 4e-3) - reference).norm();
            let e2 = (run(scheme, 2e-3) - reference).norm();
            let observed = (e1 / e2).log2();
            assert!((observed - order).abs() < 0.25, "{scheme:?}: observed order {observed}");
        }
    }

    #[test]
    fn split_scheme_mean_charge_has_no_step_size_bias() {
        // early on the charge spread is tiny, so any O(dt) leak in the mean
        // would stand out by many standard errors
        let init = PhaseSpacePoint::coherent_fundamental(1e6);
        let e = run_ensemble(&tw(), &init, &IntegrationConfig { record_stride: 25, ..cfg(2e-4, 0.01, 20_000) }).unwrap();
        for r in e.records.iter().skip(1) {
            let q = r.charge();
            assert!((q.value - 1e6).abs() <= 4.0 * q.stderr, "t {}: {q:?}", r.t);
        }
    }

    #[test]
    fn ensemble_needs_enough_trajectories() {
        let r = run_ensemble(&tw(), &PhaseSpacePoint::coherent_fundamental(100.0), &cfg(1e-3, 0.01, 10));
        assert_eq!(r, Err(TrajectoryError::TooFewTrajectories(10)));
    }

    #[test]
    fn divergence_threshold_drops_trajectories() {
        // A threshold below the initial amplitude kills every trajectory.
        let mut c = cfg(1e-3, 0.01, 200);
        c.divergence_threshold = 1.0;
        let r = run_ensemble(&tw(), &PhaseSpacePoint::coherent_fundamental(100.0), &c);
        assert_eq!(r, Err(TrajectoryError::TooManyDiverged { n_diverged: 200, n_traj: 200 }));
    }

    #[test]
    fn single_trajectory_replays_ensemble_member() {
        let p = tw();
        let init = PhaseSpacePoint::coherent_fundamental(1e4);
        let c = cfg(1e-3, 0.2, 128);
        let ens = run_ensemble(&p, &init, &c).unwrap();
        let mut sums = vec![MomentSums::default(); c.n_records()];
        for i in 0..c.n_traj {
            let path = run_trajectory(&p, &init, &c, i).unwrap();
            for (r, q) in path.points.iter().enumerate() {
                sums[r].add(&q.state());
            }
        }
        for (rec, s) in ens.records.iter().zip(sums.iter()) {
            let (a, b) = (rec.moments().unwrap(), s.means().unwrap());
            assert!((a.intensity(Mode::SecondHarmonic) - b.intensity(Mode::SecondHarmonic)).norm() < 1e-9);
        }
    }
}
