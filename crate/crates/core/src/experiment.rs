//! Runs a resolved experiment and writes its CSV.
//!
//! Every output starts with `#` lines carrying the program version, run
//! diagnostics, and the full resolved config between `--- config ---`
//! markers; [`read_provenance`] recovers that config from a written file.

use std::fmt::Write as _;
use std::fs::{self, OpenOptions};
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use thiserror::Error;

use crate::config::{parse_config, ConfigError, Experiment, ExperimentConfig};
use crate::model::{Mode, PhaseSpacePoint};
use crate::spectra::{epr_spectrum, output_quadrature_spectrum, SpectrumError};
use crate::stats::Estimate;
use crate::steadystate::{build_linearized, solve_steady_state, SteadyStateError};
use crate::trajectories::{integrate_semiclassical, run_ensemble, self_pulsing_comparison, TrajectoryError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_DIVERGENCE: i32 = 3;
pub const EXIT_NO_STEADY_STATE: i32 = 4;
pub const EXIT_UNSTABLE: i32 = 5;
pub const EXIT_NUMERICAL: i32 = 6;

const CONFIG_BEGIN: &str = "# --- config ---";
const CONFIG_END: &str = "# --- end config ---";

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{0} exists; pass --force to overwrite")]
    OutputExists(PathBuf),
    #[error("{0}")]
    Divergence(TrajectoryError),
    #[error("{0}")]
    NoSteadyState(SteadyStateError),
    #[error("{0}")]
    Unstable(SpectrumError),
    #[error("{0}")]
    Numerical(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Io { .. } | RunError::OutputExists(_) => EXIT_IO,
            RunError::Config(_) => EXIT_CONFIG,
            RunError::Divergence(_) => EXIT_DIVERGENCE,
            RunError::NoSteadyState(_) => EXIT_NO_STEADY_STATE,
            RunError::Unstable(_) => EXIT_UNSTABLE,
            RunError::Numerical(_) => EXIT_NUMERICAL,
        }
    }
}

impl From<TrajectoryError> for RunError {
    fn from(e: TrajectoryError) -> Self {
        match e {
            TrajectoryError::TooManyDiverged { .. } | TrajectoryError::Model(_) => RunError::Divergence(e),
            TrajectoryError::Inference(_) => RunError::Numerical(e.to_string()),
            _ => RunError::Config(ConfigError::Invalid { key: "integration", reason: e.to_string() }),
        }
    }
}

impl From<SteadyStateError> for RunError {
    fn from(e: SteadyStateError) -> Self {
        match e {
            SteadyStateError::NoSteadyState { .. } | SteadyStateError::Unconverged => RunError::NoSteadyState(e),
            _ => RunError::Config(ConfigError::Invalid { key: "system", reason: e.to_string() }),
        }
    }
}

impl From<SpectrumError> for RunError {
    fn from(e: SpectrumError) -> Self {
        match e {
            SpectrumError::Unstable { .. } | SpectrumError::Singular { .. } => RunError::Unstable(e),
            SpectrumError::InvalidGrid(_) => RunError::Config(ConfigError::Invalid { key: "grid", reason: e.to_string() }),
            SpectrumError::Inference { .. } => RunError::Numerical(e.to_string()),
        }
    }
}

/// CSV content before the provenance header is attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    /// `key = value` diagnostics placed in the header.
    pub notes: Vec<(String, String)>,
    pub columns: Vec<String>,
    /// Text first cell of each row, when the table has one.
    pub labels: Vec<String>,
    pub rows: Vec<Vec<f64>>,
    /// Non-fatal problems worth showing to the user.
    pub warnings: Vec<String>,
}

impl Table {
    fn new(columns: Vec<String>) -> Self {
        Table { notes: Vec::new(), columns, labels: Vec::new(), rows: Vec::new(), warnings: Vec::new() }
    }

    fn note(&mut self, key: &str, value: impl std::fmt::Debug) {
        self.notes.push((key.to_string(), format!("{value:?}")));
    }

    /// A numeric column by name.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let offset = usize::from(!self.labels.is_empty());
        let i = self.columns.iter().position(|c| c == name)?.checked_sub(offset)?;
        Some(self.rows.iter().map(|r| r[i]).collect())
    }

    /// The numeric cells of the row with text label `label`.
    pub fn row(&self, label: &str) -> Option<&[f64]> {
        let i = self.labels.iter().position(|l| l == label)?;
        Some(&self.rows[i])
    }
}

#[derive(Debug)]
pub struct RunSummary {
    pub path: PathBuf,
    pub rows: usize,
    pub warnings: Vec<String>,
}

fn pair_label(j: Mode, k: Mode) -> String {
    format!("{}{}", j.number(), k.number())
}

fn push_estimate(row: &mut Vec<f64>, e: Estimate) {
    row.push(e.value);
    row.push(e.stderr);
}

/// Computes the experiment's table without touching the filesystem.
pub fn compute(cfg: &ExperimentConfig) -> Result<Table, RunError> {
    match cfg.experiment {
        Experiment::TravellingWaveIntensities | Experiment::TravellingWaveSqueezing | Experiment::TravellingWaveEpr => {
            travelling_wave_table(cfg)
        }
        Experiment::SelfPulsing => self_pulsing_table(cfg),
        Experiment::SteadyStateReport => steady_state_table(cfg),
        Experiment::SpectralSqueezing | Experiment::SpectralEpr => spectrum_table(cfg),
    }
}

fn required<T: Copy>(x: Option<T>, key: &'static str) -> Result<T, RunError> {
    x.ok_or(RunError::Config(ConfigError::Missing(key)))
}

fn travelling_wave_table(cfg: &ExperimentConfig) -> Result<Table, RunError> {
    let ic = required(cfg.integration, "integration")?;
    let n1 = required(cfg.initial_n1, "initial.n1")?;
    let init = PhaseSpacePoint::coherent_fundamental(n1);
    let ens = run_ensemble(&cfg.params, &init, &ic)?;
    let classical = integrate_semiclassical(&cfg.params, &init, &ic)?;

    let mut columns: Vec<String> = vec!["t".into(), "xi".into(), "n_alive".into()];
    for m in Mode::ALL {
        let i = m.number();
        columns.extend([format!("N{i}"), format!("N{i}_se"), format!("N{i}_classical")]);
    }
    for m in Mode::ALL {
        let i = m.number();
        columns.extend([format!("VX{i}"), format!("VX{i}_se"), format!("VY{i}"), format!("VY{i}_se")]);
    }
    for &(j, k) in &cfg.epr_pairs {
        let l = pair_label(j, k);
        columns.extend([format!("EPR{l}"), format!("EPR{l}_se")]);
    }
    let mut table = Table::new(columns);
    table.note("n_traj", ens.n_traj);
    table.note("n_diverged", ens.n_diverged);
    table.note("reliability_warning", ens.reliability_warning);
    table.note("classical_diverged", classical.diverged);
    if ens.reliability_warning {
        table.warnings.push(format!("{} of {} trajectories diverged", ens.n_diverged, ens.n_traj));
    }

    let mut failed_inference = 0;
    for (r, rec) in ens.records.iter().enumerate() {
        let mut row = vec![rec.t, rec.xi.unwrap_or(f64::NAN), rec.n_alive as f64];
        for m in Mode::ALL {
            push_estimate(&mut row, rec.intensity(m));
            row.push(classical.points.get(r).map_or(f64::NAN, |q| q.photon_number(m).re));
        }
        for m in Mode::ALL {
            push_estimate(&mut row, rec.var_x(m));
            push_estimate(&mut row, rec.var_y(m));
        }
        for &(j, k) in &cfg.epr_pairs {
            match rec.epr(j, k) {
                Ok(e) => push_estimate(&mut row, e),
                Err(_) => {
                    failed_inference += 1;
                    row.extend([f64::NAN, f64::NAN]);
                }
            }
        }
        table.rows.push(row);
    }
    if failed_inference > 0 {
        table.warnings.push(format!("{failed_inference} EPR values undefined (degenerate steering variance)"));
    }
    Ok(table)
}

fn self_pulsing_table(cfg: &ExperimentConfig) -> Result<Table, RunError> {
    let ic = required(cfg.integration, "integration")?;
    let opts = required(cfg.pulsing, "pulsing")?;
    let cmp = self_pulsing_comparison(&cfg.params, &ic, &opts)?;
    let columns = ["t", "n_alive", "N1_classical", "N1", "N1_se"].map(String::from).to_vec();
    let mut table = Table::new(columns);
    table.note("n_traj", ic.n_traj);
    table.note("n_diverged", cmp.n_diverged);
    table.note("reliability_warning", cmp.reliability_warning);
    table.note("window_start", cmp.window_start);
    table.note("classical_peak_to_trough", cmp.classical_amplitude);
    table.note("quantum_peak_to_trough", cmp.quantum_amplitude.value);
    table.note("quantum_peak_to_trough_se", cmp.quantum_amplitude.stderr);
    if cmp.reliability_warning {
        table.warnings.push(format!("{} of {} trajectories diverged", cmp.n_diverged, ic.n_traj));
    }
    for i in 0..cmp.times.len() {
        table.rows.push(vec![
            cmp.times[i],
            cmp.n_alive[i] as f64,
            cmp.classical_n1[i],
            cmp.quantum_n1[i].value,
            cmp.quantum_n1[i].stderr,
        ]);
    }
    Ok(table)
}

/// Steady-state report: one `quantity,re,im` row per reported number.
/// Eigenvalues are sorted by real then imaginary part; `stable` is 1 or 0.
fn steady_state_table(cfg: &ExperimentConfig) -> Result<Table, RunError> {
    let ss = solve_steady_state(&cfg.params)?;
    let lm = build_linearized(&cfg.params, &ss)?;
    let mut table = Table::new(["quantity", "re", "im"].map(String::from).to_vec());
    table.note("stable", lm.stable);
    let mut eig = lm.eigenvalues.clone();
    eig.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));
    let mut push = |label: String, z: Complex64| {
        table.labels.push(label);
        table.rows.push(vec![z.re, z.im]);
    };
    for m in Mode::ALL {
        push(format!("alpha{}", m.number()), ss.amplitudes[m.index()]);
    }
    push("residual".into(), ss.residual.into());
    for (i, z) in eig.into_iter().enumerate() {
        push(format!("eigenvalue{}", i + 1), z);
    }
    push("min_re_eigenvalue".into(), lm.min_real_eigenvalue().into());
    push("stable".into(), if lm.stable { 1.0 } else { 0.0 }.into());
    Ok(table)
}

fn spectrum_table(cfg: &ExperimentConfig) -> Result<Table, RunError> {
    let grid = required(cfg.grid, "grid")?.build()?;
    let ss = solve_steady_state(&cfg.params)?;
    let lm = build_linearized(&cfg.params, &ss)?;
    let sr = output_quadrature_spectrum(&lm, &grid)?;

    let mut cov_pairs: Vec<(Mode, Mode)> = Vec::new();
    for &(j, k) in &cfg.epr_pairs {
        let p = if j.index() < k.index() { (j, k) } else { (k, j) };
        if !cov_pairs.contains(&p) {
            cov_pairs.push(p);
        }
    }

    let mut columns = vec!["omega".to_string()];
    columns.extend(Mode::ALL.map(|m| format!("VX{}", m.number())));
    columns.extend(Mode::ALL.map(|m| format!("VY{}", m.number())));
    for &(j, k) in &cov_pairs {
        let l = pair_label(j, k);
        columns.extend([format!("CX{l}"), format!("CY{l}")]);
    }
    for &(j, k) in &cfg.epr_pairs {
        columns.push(format!("EPR{}", pair_label(j, k)));
    }

    let mut series: Vec<Vec<f64>> = vec![sr.omegas.clone()];
    series.extend(Mode::ALL.map(|m| sr.var_x(m)));
    series.extend(Mode::ALL.map(|m| sr.var_y(m)));
    for &(j, k) in &cov_pairs {
        series.push(sr.cov_x(j, k));
        series.push(sr.cov_y(j, k));
    }
    for &(j, k) in &cfg.epr_pairs {
        series.push(epr_spectrum(&sr, j, k)?);
    }

    let mut table = Table::new(columns);
    table.note("min_re_eigenvalue", lm.min_real_eigenvalue());
    table.note("max_discarded_imag", sr.max_discarded_imag);
    table.rows = (0..sr.omegas.len()).map(|i| series.iter().map(|s| s[i]).collect()).collect();
    Ok(table)
}

/// Full CSV text: provenance header, column line, rows.
pub fn render_csv(cfg: &ExperimentConfig, table: &Table) -> String {
    let mut out = String::new();
    writeln!(out, "# {} {}", env!("CARGO_PKG_NAME"), env!("CARGO_PKG_VERSION")).unwrap();
    writeln!(out, "# experiment: {}", cfg.experiment).unwrap();
    writeln!(out, "# seed: {}", cfg.seed).unwrap();
    for (k, v) in &table.notes {
        writeln!(out, "# {k}: {v}").unwrap();
    }
    out.push_str(CONFIG_BEGIN);
    out.push('\n');
    for line in cfg.to_toml().lines() {
        writeln!(out, "# {line}").unwrap();
    }
    out.push_str(CONFIG_END);
    out.push('\n');
    out.push_str(&table.columns.join(","));
    out.push('\n');
    for (i, row) in table.rows.iter().enumerate() {
        let mut cells: Vec<String> = table.labels.get(i).cloned().into_iter().collect();
        cells.extend(row.iter().map(|x| format!("{x:?}")));
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

/// Recovers the resolved config embedded in a CSV written by this program.
pub fn read_provenance(csv: &str) -> Result<ExperimentConfig, ConfigError> {
    let mut lines = csv.lines().skip_while(|l| *l != CONFIG_BEGIN);
    if lines.next().is_none() {
        return Err(ConfigError::Syntax("no provenance block".into()));
    }
    let mut doc = String::new();
    for line in lines {
        if line == CONFIG_END {
            return parse_config(&doc);
        }
        let body = line.strip_prefix('#').ok_or_else(|| ConfigError::Syntax("unterminated provenance block".into()))?;
        doc.push_str(body.strip_prefix(' ').unwrap_or(body));
        doc.push('\n');
    }
    Err(ConfigError::Syntax("unterminated provenance block".into()))
}

/// Runs `cfg` and writes its CSV to `cfg.output` resolved against
/// `out_dir`. An existing file is left alone unless `force` is set.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path, force: bool) -> Result<RunSummary, RunError> {
    let path = out_dir.join(&cfg.output);
    if !force && path.exists() {
        return Err(RunError::OutputExists(path));
    }
    let table = compute(cfg)?;
    let text = render_csv(cfg, &table);
    let io_err = |source| RunError::Io { path: path.clone(), source };
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(io_err)?;
    }
    let mut opts = OpenOptions::new();
    opts.write(true);
    if force {
        opts.create(true).truncate(true);
    } else {
        opts.create_new(true);
    }
    let mut file = opts.open(&path).map_err(|e| {
        if e.kind() == io::ErrorKind::AlreadyExists {
            RunError::OutputExists(path.clone())
        } else {
            io_err(e)
        }
    })?;
    file.write_all(text.as_bytes()).map_err(io_err)?;
    Ok(RunSummary { path, rows: table.rows.len(), warnings: table.warnings })
}
