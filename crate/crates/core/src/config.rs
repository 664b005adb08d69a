//! Experiment configuration files.
//!
//! A config is a TOML document:
//!
//! ```toml
//! experiment = "spectral-epr"   # see `Experiment`
//! seed = 1                      # default 1
//! output = "spectral-epr-harmonics.csv"           # default "<experiment>.csv"
//! epr_pairs = [[2, 3], [3, 2]]  # ordered (inferred, steering) mode numbers
//!
//! [system]
//! kappa1 = 0.005
//! kappa2 = 0.02
//! gamma1 = 1.0                  # cavity experiments only
//! gamma2 = 0.5
//! gamma3 = 0.5
//! epsilon = 105.0
//!
//! [initial]                     # travelling-wave experiments only
//! n1 = 1e6
//!
//! [integration]                 # trajectory experiments
//! scheme = "split-midpoint"
//! dt = 2e-4
//! t_end = 2.0                   # or xi_end for travelling-wave runs
//! n_traj = 10000
//! divergence_threshold = 1e8
//! record_stride = 50
//!
//! [pulsing]                     # self-pulsing only
//! phase_kick = 1e-3
//! late_fraction = 0.3333333333333333
//!
//! [grid]                        # spectral experiments
//! omega_min = -20.0
//! omega_max = 20.0
//! points = 801
//! ```
//!
//! Parsing fills every default, and [`ExperimentConfig::to_toml`] writes the
//! fully resolved document back, so a written config re-parses to the same
//! value.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{Configuration, Mode, SystemParams};
use crate::spectra::FrequencyGrid;
use crate::trajectories::{IntegrationConfig, PulsingOptions, Scheme};

pub const DEFAULT_SEED: u64 = 1;
pub const DEFAULT_TW_TRAJECTORIES: usize = 10_000;
pub const DEFAULT_CAVITY_TRAJECTORIES: usize = 10_000;
pub const DEFAULT_XI_END: f64 = 10.0;
pub const DEFAULT_CAVITY_T_END: f64 = 60.0;
/// Default record stride aims at about this many samples per run.
pub const TARGET_RECORDS: usize = 400;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot parse config: {0}")]
    Syntax(String),
    #[error("missing required key `{0}`")]
    Missing(&'static str),
    #[error("key `{key}` does not apply to the {experiment} experiment")]
    NotApplicable { key: &'static str, experiment: Experiment },
    #[error("invalid value for `{key}`: {reason}")]
    Invalid { key: &'static str, reason: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    TravellingWaveIntensities,
    TravellingWaveSqueezing,
    TravellingWaveEpr,
    SelfPulsing,
    SteadyStateReport,
    SpectralSqueezing,
    SpectralEpr,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::TravellingWaveIntensities => "travelling-wave-intensities",
            Experiment::TravellingWaveSqueezing => "travelling-wave-squeezing",
            Experiment::TravellingWaveEpr => "travelling-wave-epr",
            Experiment::SelfPulsing => "self-pulsing",
            Experiment::SteadyStateReport => "steady-state-report",
            Experiment::SpectralSqueezing => "spectral-squeezing",
            Experiment::SpectralEpr => "spectral-epr",
        }
    }

    pub fn configuration(self) -> Configuration {
        if self.is_travelling_wave() {
            Configuration::TravellingWave
        } else {
            Configuration::Intracavity
        }
    }

    pub fn is_travelling_wave(self) -> bool {
        matches!(
            self,
            Experiment::TravellingWaveIntensities | Experiment::TravellingWaveSqueezing | Experiment::TravellingWaveEpr
        )
    }

    pub fn uses_trajectories(self) -> bool {
        self.is_travelling_wave() || self == Experiment::SelfPulsing
    }

    pub fn is_spectral(self) -> bool {
        matches!(self, Experiment::SpectralSqueezing | Experiment::SpectralEpr)
    }

    fn default_epr_pairs(self) -> Vec<(Mode, Mode)> {
        use Mode::*;
        match self {
            Experiment::TravellingWaveEpr => vec![(SecondHarmonic, FourthHarmonic), (FourthHarmonic, SecondHarmonic)],
            Experiment::SpectralEpr => vec![
                (SecondHarmonic, FourthHarmonic),
                (FourthHarmonic, SecondHarmonic),
                (Fundamental, SecondHarmonic),
                (SecondHarmonic, Fundamental),
                (Fundamental, FourthHarmonic),
                (FourthHarmonic, Fundamental),
            ],
            _ => Vec::new(),
        }
    }
}

impl std::fmt::Display for Experiment {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    pub output: PathBuf,
    /// Ordered `(inferred, steering)` pairs.
    pub epr_pairs: Vec<(Mode, Mode)>,
    pub params: SystemParams,
    /// Initial fundamental photon number for travelling-wave runs.
    pub initial_n1: Option<f64>,
    pub integration: Option<IntegrationConfig>,
    pub pulsing: Option<PulsingOptions>,
    pub grid: Option<GridSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub omega_min: f64,
    pub omega_max: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            omega_min: FrequencyGrid::DEFAULT_MIN,
            omega_max: FrequencyGrid::DEFAULT_MAX,
            points: FrequencyGrid::DEFAULT_POINTS,
        }
    }
}

impl GridSpec {
    pub fn build(&self) -> Result<FrequencyGrid, ConfigError> {
        if !(self.omega_min < self.omega_max) {
            return Err(invalid("grid.omega_min", "must be below omega_max"));
        }
        FrequencyGrid::linspace(self.omega_min, self.omega_max, self.points)
            .map_err(|e| invalid("grid.points", e.to_string()))
    }
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    experiment: Option<Experiment>,
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epr_pairs: Option<Vec<[usize; 2]>>,
    system: Option<RawSystem>,
    #[serde(skip_serializing_if = "Option::is_none")]
    initial: Option<RawInitial>,
    #[serde(skip_serializing_if = "Option::is_none")]
    integration: Option<RawIntegration>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pulsing: Option<RawPulsing>,
    #[serde(skip_serializing_if = "Option::is_none")]
    grid: Option<RawGrid>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSystem {
    kappa1: Option<f64>,
    kappa2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma2: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma3: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    n1: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegration {
    #[serde(skip_serializing_if = "Option::is_none")]
    scheme: Option<Scheme>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    xi_end: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    n_traj: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    divergence_threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    record_stride: Option<usize>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPulsing {
    #[serde(skip_serializing_if = "Option::is_none")]
    phase_kick: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    late_fraction: Option<f64>,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGrid {
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    omega_max: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    points: Option<usize>,
}

fn invalid(key: &'static str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key, reason: reason.into() }
}

fn positive(key: &'static str, x: f64) -> Result<f64, ConfigError> {
    if x > 0.0 && x.is_finite() {
        Ok(x)
    } else {
        Err(invalid(key, format!("{x} is not a positive finite number")))
    }
}

fn mode(key: &'static str, n: usize) -> Result<Mode, ConfigError> {
    Mode::from_number(n).ok_or_else(|| invalid(key, format!("mode {n} is not 1, 2 or 3")))
}

/// Parses and validates a config document, filling all defaults.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_with_seed(text, None)
}

/// As [`parse_config`], with the seed replaced when `seed` is given.
pub fn parse_with_seed(text: &str, seed: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
    resolve(raw, seed)
}

fn resolve(raw: RawConfig, seed_override: Option<u64>) -> Result<ExperimentConfig, ConfigError> {
    let experiment = raw.experiment.ok_or(ConfigError::Missing("experiment"))?;
    let not_for = |key| ConfigError::NotApplicable { key, experiment };

    let sys = raw.system.ok_or(ConfigError::Missing("system"))?;
    let kappa1 = sys.kappa1.ok_or(ConfigError::Missing("system.kappa1"))?;
    let kappa2 = sys.kappa2.ok_or(ConfigError::Missing("system.kappa2"))?;
    if experiment.is_travelling_wave() && !(kappa1 > 0.0) {
        return Err(invalid("system.kappa1", "travelling-wave runs are timed in xi and need kappa1 > 0"));
    }
    let params = match experiment.configuration() {
        Configuration::TravellingWave => {
            for (key, v) in [
                ("system.gamma1", sys.gamma1),
                ("system.gamma2", sys.gamma2),
                ("system.gamma3", sys.gamma3),
                ("system.epsilon", sys.epsilon),
            ] {
                if v.is_some_and(|x| x != 0.0) {
                    return Err(not_for(key));
                }
            }
            SystemParams::travelling_wave(kappa1, kappa2)
        }
        Configuration::Intracavity => {
            let g1 = sys.gamma1.ok_or(ConfigError::Missing("system.gamma1"))?;
            let g2 = sys.gamma2.ok_or(ConfigError::Missing("system.gamma2"))?;
            let g3 = sys.gamma3.ok_or(ConfigError::Missing("system.gamma3"))?;
            let eps = sys.epsilon.ok_or(ConfigError::Missing("system.epsilon"))?;
            SystemParams::intracavity(kappa1, kappa2, [g1, g2, g3], eps)
        }
    }
    .map_err(|e| invalid("system", e.to_string()))?;

    let initial_n1 = match (experiment.is_travelling_wave(), raw.initial) {
        (true, Some(RawInitial { n1: Some(n1) })) => Some(positive("initial.n1", n1)?),
        (true, _) => return Err(ConfigError::Missing("initial.n1")),
        (false, Some(_)) => return Err(not_for("initial")),
        (false, None) => None,
    };

    let seed = seed_override.or(raw.seed).unwrap_or(DEFAULT_SEED);

    let integration = match (experiment.uses_trajectories(), raw.integration) {
        (true, section) => Some(resolve_integration(
            &params,
            initial_n1,
            section.unwrap_or_default(),
            seed,
        )?),
        (false, Some(_)) => return Err(not_for("integration")),
        (false, None) => None,
    };

    let pulsing = match (experiment == Experiment::SelfPulsing, raw.pulsing) {
        (true, section) => {
            let section = section.unwrap_or_default();
            let d = PulsingOptions::default();
            let kick = section.phase_kick.unwrap_or(d.classical_phase_kick);
            if !kick.is_finite() {
                return Err(invalid("pulsing.phase_kick", "must be finite"));
            }
            let late = section.late_fraction.unwrap_or(d.late_fraction);
            if !(late > 0.0 && late <= 1.0) {
                return Err(invalid("pulsing.late_fraction", "must lie in (0, 1]"));
            }
            Some(PulsingOptions { classical_phase_kick: kick, late_fraction: late })
        }
        (false, Some(_)) => return Err(not_for("pulsing")),
        (false, None) => None,
    };

    let grid = match (experiment.is_spectral(), raw.grid) {
        (true, section) => {
            let section = section.unwrap_or_default();
            let d = GridSpec::default();
            let spec = GridSpec {
                omega_min: section.omega_min.unwrap_or(d.omega_min),
                omega_max: section.omega_max.unwrap_or(d.omega_max),
                points: section.points.unwrap_or(d.points),
            };
            spec.build()?;
            Some(spec)
        }
        (false, Some(_)) => return Err(not_for("grid")),
        (false, None) => None,
    };

    let epr_pairs = match raw.epr_pairs {
        Some(pairs) => {
            if !(experiment.is_travelling_wave() || experiment.is_spectral()) && !pairs.is_empty() {
                return Err(not_for("epr_pairs"));
            }
            pairs
                .into_iter()
                .map(|[j, k]| {
                    let (j, k) = (mode("epr_pairs", j)?, mode("epr_pairs", k)?);
                    if j == k {
                        Err(invalid("epr_pairs", format!("pair ({j}, {k}) infers a mode from itself")))
                    } else {
                        Ok((j, k))
                    }
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        None => experiment.default_epr_pairs(),
    };

    let output = raw.output.unwrap_or_else(|| PathBuf::from(format!("{experiment}.csv")));
    if output.as_os_str().is_empty() {
        return Err(invalid("output", "empty path"));
    }

    Ok(ExperimentConfig { experiment, seed, output, epr_pairs, params, initial_n1, integration, pulsing, grid })
}

fn resolve_integration(
    params: &SystemParams,
    initial_n1: Option<f64>,
    raw: RawIntegration,
    seed: u64,
) -> Result<IntegrationConfig, ConfigError> {
    let tw = params.configuration == Configuration::TravellingWave;
    let n1 = initial_n1.unwrap_or(0.0);
    let dt = match raw.dt {
        Some(dt) => positive("integration.dt", dt)?,
        None => IntegrationConfig::default_dt(params, n1),
    };
    let t_end = match (raw.t_end, raw.xi_end) {
        (Some(_), Some(_)) => return Err(invalid("integration.xi_end", "give t_end or xi_end, not both")),
        (Some(t), None) => positive("integration.t_end", t)?,
        (None, Some(xi)) if tw => positive("integration.xi_end", xi)? / (params.kappa1 * n1.sqrt()),
        (None, Some(_)) => {
            return Err(invalid("integration.xi_end", "only travelling-wave runs are measured in xi"))
        }
        (None, None) if tw => DEFAULT_XI_END / (params.kappa1 * n1.sqrt()),
        (None, None) => DEFAULT_CAVITY_T_END,
    };
    let n_traj = raw.n_traj.unwrap_or(if tw { DEFAULT_TW_TRAJECTORIES } else { DEFAULT_CAVITY_TRAJECTORIES });
    let divergence_threshold = match raw.divergence_threshold {
        Some(x) => positive("integration.divergence_threshold", x)?,
        None => IntegrationConfig::DEFAULT_DIVERGENCE_THRESHOLD,
    };
    let n_steps = (t_end / dt).round() as usize;
    let record_stride = raw.record_stride.unwrap_or((n_steps / TARGET_RECORDS).max(1));
    let cfg = IntegrationConfig {
        dt,
        t_end,
        n_traj,
        seed,
        scheme: raw.scheme.unwrap_or(Scheme::SplitMidpoint),
        divergence_threshold,
        record_stride,
    };
    cfg.validate().map_err(|e| invalid("integration", e.to_string()))?;
    if n_traj < crate::trajectories::MIN_ENSEMBLE {
        return Err(invalid(
            "integration.n_traj",
            format!("at least {} trajectories are needed", crate::trajectories::MIN_ENSEMBLE),
        ));
    }
    if tw && divergence_threshold <= n1.sqrt() {
        return Err(invalid("integration.divergence_threshold", "must exceed the initial amplitude"));
    }
    Ok(cfg)
}

impl ExperimentConfig {
    /// The resolved config as a document that parses back to `self`.
    pub fn to_toml(&self) -> String {
        let p = &self.params;
        let cavity = p.configuration == Configuration::Intracavity;
        let raw = RawConfig {
            experiment: Some(self.experiment),
            seed: Some(self.seed),
            output: Some(self.output.clone()),
            epr_pairs: Some(self.epr_pairs.iter().map(|(j, k)| [j.number(), k.number()]).collect()),
            system: Some(RawSystem {
                kappa1: Some(p.kappa1),
                kappa2: Some(p.kappa2),
                gamma1: cavity.then_some(p.gamma1),
                gamma2: cavity.then_some(p.gamma2),
                gamma3: cavity.then_some(p.gamma3),
                epsilon: cavity.then_some(p.epsilon.re),
            }),
            initial: self.initial_n1.map(|n1| RawInitial { n1: Some(n1) }),
            integration: self.integration.map(|c| RawIntegration {
                scheme: Some(c.scheme),
                dt: Some(c.dt),
                t_end: Some(c.t_end),
                xi_end: None,
                n_traj: Some(c.n_traj),
                divergence_threshold: Some(c.divergence_threshold),
                record_stride: Some(c.record_stride),
            }),
            pulsing: self.pulsing.map(|o| RawPulsing {
                phase_kick: Some(o.classical_phase_kick),
                late_fraction: Some(o.late_fraction),
            }),
            grid: self.grid.map(|g| RawGrid {
                omega_min: Some(g.omega_min),
                omega_max: Some(g.omega_max),
                points: Some(g.points),
            }),
        };
        toml::to_string(&raw).expect("config serializes")
    }

    /// ξ per unit time for travelling-wave runs.
    pub fn xi_rate(&self) -> Option<f64> {
        self.initial_n1.map(|n1| self.params.kappa1 * n1.sqrt())
    }
}
