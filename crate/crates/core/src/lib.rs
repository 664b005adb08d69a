//! Cascaded second-harmonic generation (ω → 2ω → 4ω) in the positive-P
//! representation: stochastic trajectories for travelling-wave and
//! intracavity setups, classical steady states and their linearized
//! fluctuation spectra, and a config-driven command line front end.

pub mod config;
pub mod experiment;
pub mod model;
pub mod quadrature;
pub mod spectra;
pub mod stats;
pub mod steadystate;
pub mod trajectories;

pub use model::{Configuration, Mode, ModelError, PhaseSpacePoint, SystemParams};
pub use stats::Estimate;
