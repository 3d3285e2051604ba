//! Command-line front end: `calibrate`, `mitigate` and `sweep`.
//!
//! Config files are TOML, or JSON when the path ends in `.json`. Every
//! command is deterministic in its config; seeds are never taken from the
//! environment.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    calibration_runs, check_diagonal_dominance, error_rate, estimate_confusion, single_qubit_marginals,
    DEFAULT_CALIBRATION_SHOTS,
};
use crate::error::Error;
use crate::experiment::{default_shot_grid, fit_powerlaw, records_for, run_sweep, Scheme, SweepConfig, SweepRecord};
use crate::mitigation::{
    build_omega, exact_expectations, mitigate_correlated, mitigate_uncorrelated_all, mitigation_report,
    noisy_expectations, MitigationReportRow,
};
use crate::noise::{ConfusionKind, ConfusionMatrix, ConfusionMatrixFile};
use crate::observables::{BitString, SingleQubitFlipProbs, ZMask};
use crate::statevector::{prepare_state, CircuitParams, ShotHistogram};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("I/O error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let numerical = |e: &Error| matches!(e, Error::SingularMatrix { .. } | Error::NonInvertibleChannel { .. });
        match &e {
            Error::Task { source, .. } if numerical(source) => CliError::Numerical(e.to_string()),
            e if numerical(e) => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "remit", version, about = "Readout-error simulation and mitigation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeFlag {
    Raw,
    Uncorrelated,
    Correlated,
    All,
}

impl SchemeFlag {
    fn schemes(self) -> Vec<Scheme> {
        match self {
            SchemeFlag::Raw => vec![Scheme::Raw],
            SchemeFlag::Uncorrelated => vec![Scheme::Uncorrelated],
            SchemeFlag::Correlated => vec![Scheme::Correlated],
            SchemeFlag::All => Scheme::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate calibration runs and write the estimated confusion matrix.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Write the true confusion matrix instead of a sampled estimate.
        #[arg(long)]
        oracle_calibration: bool,
    },
    /// Mitigate a measured histogram with a stored calibration.
    Mitigate {
        #[arg(long)]
        histogram: PathBuf,
        #[arg(long)]
        calibration: PathBuf,
        #[arg(long, value_enum, default_value = "all")]
        scheme: SchemeFlag,
        /// Circuit angles of the two-qubit benchmark circuit, comma separated;
        /// fills the exact-expectation column.
        #[arg(long, value_delimiter = ',')]
        thetas: Option<Vec<f64>>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a shot-count sweep and write plot-ready CSV.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        scheme: Option<SchemeFlag>,
        #[arg(long)]
        oracle_calibration: bool,
    },
}

/// Readout noise as written in config files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    /// `identity`, `factorized`, `dense` or `correlated`.
    pub kind: String,
    #[serde(default)]
    pub num_qubits: Option<usize>,
    /// `[p0, p1]` per qubit, qubit 0 first.
    #[serde(default)]
    pub probs: Option<Vec<[f64; 2]>>,
    /// Row-major `p(read | true)`.
    #[serde(default)]
    pub entries: Option<Vec<Vec<f64>>>,
    /// Joint-flip probability of the correlated family.
    #[serde(default)]
    pub lambda: Option<f64>,
    /// Jointly flipped qubits as a string over `{X, I}`, highest qubit
    /// leftmost. Defaults to all qubits.
    #[serde(default)]
    pub flip: Option<String>,
}

impl NoiseSpec {
    pub fn to_matrix(&self) -> Result<ConfusionMatrix, Error> {
        let probs = || -> Result<Vec<SingleQubitFlipProbs>, Error> {
            self.probs
                .as_ref()
                .ok_or_else(|| Error::InvalidConfig(format!("noise kind {:?} needs \"probs\"", self.kind)))?
                .iter()
                .map(|&[p0, p1]| SingleQubitFlipProbs::new(p0, p1))
                .collect()
        };
        let cm = match self.kind.as_str() {
            "identity" => ConfusionMatrix::identity(
                self.num_qubits
                    .ok_or_else(|| Error::InvalidConfig("noise kind \"identity\" needs \"num_qubits\"".into()))?,
            )?,
            "factorized" => ConfusionMatrix::factorized(probs()?)?,
            "dense" => ConfusionMatrix::from_rows(
                self.entries
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfig("noise kind \"dense\" needs \"entries\"".into()))?,
            )?,
            "correlated" => {
                let base = match (&self.probs, self.num_qubits) {
                    (Some(_), _) => ConfusionMatrix::factorized(probs()?)?,
                    (None, Some(n)) => ConfusionMatrix::identity(n)?,
                    (None, None) => {
                        return Err(Error::InvalidConfig(
                            "noise kind \"correlated\" needs \"probs\" or \"num_qubits\"".into(),
                        ))
                    }
                };
                let lambda = self
                    .lambda
                    .ok_or_else(|| Error::InvalidConfig("noise kind \"correlated\" needs \"lambda\"".into()))?;
                let flip = match &self.flip {
                    Some(s) => parse_flip(s, base.num_qubits())?,
                    None => (1u64 << base.num_qubits()) - 1,
                };
                ConfusionMatrix::with_correlated_flips(&base, lambda, flip)?
            }
            other => return Err(Error::InvalidConfig(format!("unknown noise kind {other:?}"))),
        };
        if let Some(n) = self.num_qubits {
            if n != cm.num_qubits() {
                return Err(Error::DimensionMismatch { expected: n, found: cm.num_qubits() });
            }
        }
        Ok(cm)
    }
}

fn parse_flip(s: &str, num_qubits: usize) -> Result<u64, Error> {
    if s.chars().count() != num_qubits {
        return Err(Error::InvalidConfig(format!("flip pattern {s:?} does not have {num_qubits} characters")));
    }
    s.chars().rev().enumerate().try_fold(0u64, |acc, (q, c)| match c {
        'X' | 'x' => Ok(acc | 1 << q),
        'I' | 'i' => Ok(acc),
        other => Err(Error::InvalidConfig(format!("invalid character {other:?} in flip pattern"))),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrateConfig {
    pub seed: u64,
    #[serde(default = "default_calibration_shots")]
    pub shots_per_state: u64,
    pub noise: NoiseSpec,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepFileConfig {
    pub seed: u64,
    #[serde(default = "default_num_states")]
    pub num_states: usize,
    #[serde(default = "default_shot_grid")]
    pub shot_grid: Vec<u64>,
    #[serde(default = "default_calibration_shots")]
    pub calibration_shots: u64,
    #[serde(default = "default_schemes")]
    pub schemes: Vec<Scheme>,
    /// Target mask over `{Z, I}`; defaults to `Z` on every qubit.
    #[serde(default)]
    pub target: Option<String>,
    #[serde(default)]
    pub oracle_calibration: bool,
    #[serde(default = "default_layers")]
    pub entangling_layers: usize,
    pub noise: NoiseSpec,
}

fn default_calibration_shots() -> u64 {
    DEFAULT_CALIBRATION_SHOTS
}

fn default_num_states() -> usize {
    1000
}

fn default_schemes() -> Vec<Scheme> {
    Scheme::ALL.to_vec()
}

fn default_layers() -> usize {
    1
}

impl SweepFileConfig {
    pub fn resolve(&self) -> Result<SweepConfig, Error> {
        let cm = self.noise.to_matrix()?;
        let target = match &self.target {
            Some(t) => t.parse::<ZMask>()?,
            None => ZMask::all_z(cm.num_qubits())?,
        };
        let cfg = SweepConfig {
            num_states: self.num_states,
            shot_grid: self.shot_grid.clone(),
            cm_truth: cm,
            calibration_shots: self.calibration_shots,
            master_seed: self.seed,
            schemes: self.schemes.clone(),
            target,
            oracle_calibration: self.oracle_calibration,
            entangling_layers: self.entangling_layers,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Reads a TOML or JSON (by extension) config file.
pub fn read_config<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn write_file(path: &Path, contents: &[u8]) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_error(e: csv::Error) -> CliError {
    if e.is_io_error() {
        CliError::Io(e.to_string())
    } else {
        CliError::Config(e.to_string())
    }
}

pub fn cmd_calibrate(
    config: &Path,
    output: &Path,
    seed: Option<u64>,
    oracle: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut cfg: CalibrateConfig = read_config(config)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let truth = cfg.noise.to_matrix()?;
    let (estimate, shots) = if oracle {
        (truth, None)
    } else {
        let runs = calibration_runs(&truth, cfg.shots_per_state, cfg.seed)?;
        (estimate_confusion(&runs)?, Some(cfg.shots_per_state))
    };
    let mut file = ConfusionMatrixFile::from_matrix(&estimate);
    file.shots_per_state = shots;
    file.master_seed = Some(cfg.seed);
    let json = serde_json::to_string_pretty(&file).expect("plain data serializes");
    write_file(output, json.as_bytes())?;

    let eps = error_rate(&estimate);
    let dominant = check_diagonal_dominance(&build_omega(&estimate));
    writeln!(out, "error rate (epsilon): {eps}").map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out, "diagonally dominant: {dominant}").map_err(|e| CliError::Io(e.to_string()))?;
    Ok(())
}

/// Reads a `bitstring,count` CSV.
pub fn read_histogram(path: &Path) -> Result<ShotHistogram, CliError> {
    #[derive(Deserialize)]
    struct Row {
        bitstring: String,
        count: u64,
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let mut pairs = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(csv_error)?;
        pairs.push((row.bitstring.parse::<BitString>()?, row.count));
    }
    let n = pairs
        .first()
        .map(|(b, _)| b.num_qubits())
        .ok_or_else(|| CliError::Config(format!("{}: histogram is empty", path.display())))?;
    Ok(ShotHistogram::from_pairs(n, pairs)?)
}

pub fn write_histogram(h: &ShotHistogram, w: impl Write) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(["bitstring", "count"]).map_err(csv_error)?;
    for (b, c) in h.iter() {
        wtr.write_record([b.to_string(), c.to_string()]).map_err(csv_error)?;
    }
    wtr.flush().map_err(|e| CliError::Io(e.to_string()))
}

pub fn cmd_mitigate(
    histogram: &Path,
    calibration: &Path,
    scheme: SchemeFlag,
    thetas: Option<&[f64]>,
) -> Result<Vec<MitigationReportRow>, CliError> {
    let h = read_histogram(histogram)?;
    let text = fs::read_to_string(calibration).map_err(|e| CliError::Io(format!("{}: {e}", calibration.display())))?;
    let cm = ConfusionMatrix::from_json(&text).map_err(|e| CliError::Config(format!("{}: {e}", calibration.display())))?;
    if cm.num_qubits() != h.num_qubits() {
        return Err(Error::DimensionMismatch { expected: cm.num_qubits(), found: h.num_qubits() }.into());
    }
    let noisy = noisy_expectations(&h)?;
    let schemes = scheme.schemes();

    let uncorrelated = if schemes.contains(&Scheme::Uncorrelated) {
        let probs = match cm.kind() {
            ConfusionKind::Factorized(p) => p.clone(),
            ConfusionKind::Dense => single_qubit_marginals(&cm),
        };
        Some(mitigate_uncorrelated_all(&noisy, &probs)?)
    } else {
        None
    };
    let correlated = if schemes.contains(&Scheme::Correlated) {
        Some(mitigate_correlated(&noisy, &build_omega(&cm))?)
    } else {
        None
    };
    let exact = match thetas {
        Some(t) => {
            let t: [f64; 4] = t
                .try_into()
                .map_err(|_| CliError::Config("--thetas takes exactly four angles".into()))?;
            if h.num_qubits() != 2 {
                return Err(CliError::Config("--thetas applies to two-qubit histograms only".into()));
            }
            Some(exact_expectations(&prepare_state(&CircuitParams::two_qubit(t)?)))
        }
        None => None,
    };
    Ok(mitigation_report(&noisy, uncorrelated.as_ref(), correlated.as_ref(), exact.as_ref()))
}

pub fn write_report(rows: &[MitigationReportRow], w: impl Write) -> Result<(), CliError> {
    let mut wtr = csv::Writer::from_writer(w);
    for row in rows {
        wtr.serialize(row).map_err(csv_error)?;
    }
    wtr.flush().map_err(|e| CliError::Io(e.to_string()))
}

/// One line of the sweep CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCsvRow {
    pub seed: u64,
    pub scheme: Scheme,
    pub shots: u64,
    pub mean_abs_error: f64,
    pub stderr: f64,
    pub num_states: usize,
}

/// Writes the sweep CSV, preceded by `#` comment lines echoing the resolved
/// configuration.
pub fn write_sweep_csv(cfg: &SweepConfig, records: &[SweepRecord], mut w: impl Write) -> Result<(), CliError> {
    let io = |e: io::Error| CliError::Io(e.to_string());
    let schemes: Vec<&str> = cfg.schemes.iter().map(|s| s.as_str()).collect();
    let grid: Vec<String> = cfg.shot_grid.iter().map(|s| s.to_string()).collect();
    let noise = serde_json::to_string(&ConfusionMatrixFile::from_matrix(&cfg.cm_truth)).expect("plain data serializes");
    writeln!(w, "# seed = {}", cfg.master_seed).map_err(io)?;
    writeln!(w, "# num_states = {}", cfg.num_states).map_err(io)?;
    writeln!(w, "# shot_grid = [{}]", grid.join(", ")).map_err(io)?;
    writeln!(w, "# calibration_shots = {}", cfg.calibration_shots).map_err(io)?;
    writeln!(w, "# oracle_calibration = {}", cfg.oracle_calibration).map_err(io)?;
    writeln!(w, "# schemes = [{}]", schemes.join(", ")).map_err(io)?;
    writeln!(w, "# target = {}", cfg.target).map_err(io)?;
    writeln!(w, "# entangling_layers = {}", cfg.entangling_layers).map_err(io)?;
    writeln!(w, "# noise = {noise}").map_err(io)?;
    let mut wtr = csv::Writer::from_writer(w);
    for r in records {
        wtr.serialize(SweepCsvRow {
            seed: cfg.master_seed,
            scheme: r.scheme,
            shots: r.shots,
            mean_abs_error: r.mean_abs_error,
            stderr: r.stderr,
            num_states: cfg.num_states,
        })
        .map_err(csv_error)?;
    }
    wtr.flush().map_err(io)
}

/// Reads a sweep CSV written by [`write_sweep_csv`].
pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepCsvRow>, CliError> {
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_path(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    reader.deserialize().map(|r| r.map_err(csv_error)).collect()
}

pub fn cmd_sweep(
    config: &Path,
    output: &Path,
    seed: Option<u64>,
    scheme: Option<SchemeFlag>,
    oracle: bool,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut file: SweepFileConfig = read_config(config)?;
    if let Some(s) = seed {
        file.seed = s;
    }
    if let Some(s) = scheme {
        file.schemes = s.schemes();
    }
    file.oracle_calibration |= oracle;
    let cfg = file.resolve()?;
    let records = run_sweep(&cfg)?;

    let mut buf = Vec::new();
    write_sweep_csv(&cfg, &records, &mut buf)?;
    write_file(output, &buf)?;

    let io = |e: io::Error| CliError::Io(e.to_string());
    for &s in &cfg.schemes {
        match fit_powerlaw(&records_for(&records, s)) {
            Ok(fit) => writeln!(out, "{s}: slope {:.4}", fit.slope).map_err(io)?,
            Err(e) => writeln!(out, "{s}: no fit ({e})").map_err(io)?,
        }
    }
    Ok(())
}

/// Runs a parsed command line, writing human-readable output to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<(), CliError> {
    match cli.command {
        Command::Calibrate { config, output, seed, oracle_calibration } => {
            cmd_calibrate(&config, &output, seed, oracle_calibration, out)
        }
        Command::Mitigate { histogram, calibration, scheme, thetas, output } => {
            let rows = cmd_mitigate(&histogram, &calibration, scheme, thetas.as_deref())?;
            match output {
                Some(path) => {
                    let mut buf = Vec::new();
                    write_report(&rows, &mut buf)?;
                    write_file(&path, &buf)
                }
                None => write_report(&rows, out),
            }
        }
        Command::Sweep { config, output, seed, scheme, oracle_calibration } => {
            cmd_sweep(&config, &output, seed, scheme, oracle_calibration, out)
        }
    }
}
