//! Shot-count sweeps: mean absolute error of raw and mitigated expectation
//! values over an ensemble of random circuit parameters.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::calibration::{
    calibration_runs, estimate_confusion, estimate_single_qubit, single_qubit_marginals, DEFAULT_CALIBRATION_SHOTS,
};
use crate::error::{Error, Result};
use crate::mitigation::{build_omega, noisy_expectations, uncorrelated_coefficients, CorrelatedMitigator};
use crate::noise::{corrupt_histogram_with, push_distribution, ConfusionKind, ConfusionMatrix};
use crate::observables::{SingleQubitFlipProbs, ZMask};
use crate::rng::{self, DOMAIN_SHOTS, DOMAIN_STATE};
use crate::statevector::{exact_expectation, outcome_distribution, prepare_state, sample_shots_with, CircuitParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    Raw,
    Uncorrelated,
    Correlated,
}

impl Scheme {
    pub const ALL: [Scheme; 3] = [Scheme::Raw, Scheme::Uncorrelated, Scheme::Correlated];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scheme::Raw => "raw",
            Scheme::Uncorrelated => "uncorrelated",
            Scheme::Correlated => "correlated",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "raw" => Ok(Scheme::Raw),
            "uncorrelated" => Ok(Scheme::Uncorrelated),
            "correlated" => Ok(Scheme::Correlated),
            other => Err(Error::Parse(format!("unknown scheme {other:?}"))),
        }
    }
}

/// Powers of two from 2^7 to 2^20.
pub fn default_shot_grid() -> Vec<u64> {
    (7..=20).map(|k| 1u64 << k).collect()
}

/// A reproducible ensemble of random circuit parameters: state `i` draws its
/// angles uniformly from `[0, 2pi)` on its own stream under `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateEnsemble {
    pub num_qubits: usize,
    pub entangling_layers: usize,
    pub num_states: usize,
    pub seed: u64,
}

impl StateEnsemble {
    pub fn params(&self, index: usize) -> CircuitParams {
        let mut r = rng::substream(self.seed, &[DOMAIN_STATE, index as u64]);
        CircuitParams::random(self.num_qubits, self.entangling_layers, &mut r)
            .expect("ensemble dimensions are validated on construction")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub num_states: usize,
    pub shot_grid: Vec<u64>,
    pub cm_truth: ConfusionMatrix,
    pub calibration_shots: u64,
    pub master_seed: u64,
    pub schemes: Vec<Scheme>,
    pub target: ZMask,
    /// Mitigate with the true confusion matrix instead of a sampled
    /// calibration.
    pub oracle_calibration: bool,
    pub entangling_layers: usize,
}

impl SweepConfig {
    /// Defaults: 1000 states, the [`default_shot_grid`], 8192 calibration
    /// shots per basis state, all schemes, target `Z...Z`.
    pub fn new(cm_truth: ConfusionMatrix, master_seed: u64) -> Self {
        let n = cm_truth.num_qubits();
        Self {
            num_states: 1000,
            shot_grid: default_shot_grid(),
            target: ZMask::all_z(n).expect("confusion matrix has a valid qubit count"),
            cm_truth,
            calibration_shots: DEFAULT_CALIBRATION_SHOTS,
            master_seed,
            schemes: Scheme::ALL.to_vec(),
            oracle_calibration: false,
            entangling_layers: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_states == 0 {
            return Err(Error::InvalidConfig("num_states must be at least 1".into()));
        }
        if self.shot_grid.is_empty() || self.shot_grid[0] == 0 {
            return Err(Error::InvalidConfig("shot grid must be non-empty with counts >= 1".into()));
        }
        if self.shot_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("shot grid must be strictly increasing".into()));
        }
        if self.schemes.is_empty() {
            return Err(Error::InvalidConfig("no schemes selected".into()));
        }
        if !self.oracle_calibration && self.calibration_shots == 0 {
            return Err(Error::InvalidConfig("calibration_shots must be at least 1".into()));
        }
        if self.target.num_qubits() != self.cm_truth.num_qubits() {
            return Err(Error::DimensionMismatch {
                expected: self.cm_truth.num_qubits(),
                found: self.target.num_qubits(),
            });
        }
        Ok(())
    }

    pub fn ensemble(&self) -> StateEnsemble {
        StateEnsemble {
            num_qubits: self.cm_truth.num_qubits(),
            entangling_layers: self.entangling_layers,
            num_states: self.num_states,
            seed: self.master_seed,
        }
    }
}

/// Mean absolute error of one scheme at one shot count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub shots: u64,
    pub scheme: Scheme,
    pub mean_abs_error: f64,
    pub stderr: f64,
}

pub fn abs_error(measured: f64, exact: f64) -> f64 {
    (measured - exact).abs()
}

/// Mitigation inputs derived once per sweep.
struct Mitigators {
    uncorrelated: Option<Vec<(ZMask, f64)>>,
    correlated: Option<CorrelatedMitigator>,
}

impl Mitigators {
    fn build(cfg: &SweepConfig) -> Result<Self> {
        let wants = |s| cfg.schemes.contains(&s);
        if !wants(Scheme::Uncorrelated) && !wants(Scheme::Correlated) {
            return Ok(Self { uncorrelated: None, correlated: None });
        }
        let (cm, probs): (ConfusionMatrix, Vec<SingleQubitFlipProbs>) = if cfg.oracle_calibration {
            let probs = match cfg.cm_truth.kind() {
                ConfusionKind::Factorized(p) => p.clone(),
                ConfusionKind::Dense => single_qubit_marginals(&cfg.cm_truth),
            };
            (cfg.cm_truth.clone(), probs)
        } else {
            let runs = calibration_runs(&cfg.cm_truth, cfg.calibration_shots, cfg.master_seed)?;
            (estimate_confusion(&runs)?, estimate_single_qubit(&runs)?)
        };
        let uncorrelated = wants(Scheme::Uncorrelated)
            .then(|| uncorrelated_coefficients(&probs, &cfg.target))
            .transpose()?;
        let correlated = wants(Scheme::Correlated)
            .then(|| CorrelatedMitigator::new(build_omega(&cm)))
            .transpose()?;
        Ok(Self { uncorrelated, correlated })
    }
}

/// Runs the full sweep. Output is ordered by shot count, then by the order
/// of `cfg.schemes`, and is identical for identical configs regardless of
/// thread scheduling.
pub fn run_sweep(cfg: &SweepConfig) -> Result<Vec<SweepRecord>> {
    cfg.validate()?;
    let mitigators = Mitigators::build(cfg)?;
    let ensemble = cfg.ensemble();
    let target = cfg.target;

    let states = (0..cfg.num_states)
        .into_par_iter()
        .map(|i| {
            let state = prepare_state(&ensemble.params(i));
            let exact = exact_expectation(&state, &target)?;
            Ok((outcome_distribution(&state), exact))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut records = Vec::with_capacity(cfg.shot_grid.len() * cfg.schemes.len());
    for &shots in &cfg.shot_grid {
        let errors = states
            .par_iter()
            .enumerate()
            .map(|(i, (dist, exact))| {
                let task = || -> Result<Vec<f64>> {
                    let mut r = rng::substream(cfg.master_seed, &[DOMAIN_SHOTS, i as u64, shots]);
                    let clean = sample_shots_with(dist, shots, &mut r)?;
                    let noisy = noisy_expectations(&corrupt_histogram_with(&clean, &cfg.cm_truth, &mut r)?)?;
                    cfg.schemes
                        .iter()
                        .map(|scheme| {
                            let estimate = match scheme {
                                Scheme::Raw => noisy.get(&target),
                                Scheme::Uncorrelated => mitigators
                                    .uncorrelated
                                    .as_ref()
                                    .expect("built when selected")
                                    .iter()
                                    .map(|(m, c)| c * noisy.get(m))
                                    .sum(),
                                Scheme::Correlated => mitigators
                                    .correlated
                                    .as_ref()
                                    .expect("built when selected")
                                    .mitigate(&noisy)?
                                    .get(&target),
                            };
                            Ok(abs_error(estimate, *exact))
                        })
                        .collect()
                };
                task().map_err(|e| Error::Task { state_index: i, shots, source: Box::new(e) })
            })
            .collect::<Result<Vec<_>>>()?;

        for (k, &scheme) in cfg.schemes.iter().enumerate() {
            let (mean, stderr) = mean_and_stderr(errors.iter().map(|e| e[k]));
            records.push(SweepRecord { shots, scheme, mean_abs_error: mean, stderr });
        }
    }
    Ok(records)
}

/// Sample mean and standard error of the mean, summed in iteration order.
pub fn mean_and_stderr(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Records of one scheme, in sweep order.
pub fn records_for(records: &[SweepRecord], scheme: Scheme) -> Vec<SweepRecord> {
    records.iter().filter(|r| r.scheme == scheme).copied().collect()
}

/// Least-squares line `ln(error) = slope * ln(shots) + intercept`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerLawFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn fit_powerlaw(records: &[SweepRecord]) -> Result<PowerLawFit> {
    if records.len() < 3 {
        return Err(Error::InvalidConfig(format!("power-law fit needs at least 3 records, got {}", records.len())));
    }
    if let Some(r) = records.iter().find(|r| !(r.mean_abs_error > 0.0) || r.shots == 0) {
        return Err(Error::InvalidConfig(format!(
            "power-law fit needs positive errors and shots, got {} at {} shots",
            r.mean_abs_error, r.shots
        )));
    }
    let pts: Vec<(f64, f64)> = records.iter().map(|r| ((r.shots as f64).ln(), r.mean_abs_error.ln())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidConfig("power-law fit needs at least two distinct shot counts".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(PowerLawFit { slope, intercept: my - slope * mx })
}

/// Infinite-shot bias of the unmitigated estimator, averaged over the
/// ensemble: `mean_i |<O>_noisy,i - <O>_exact,i|`.
pub fn analytic_plateau(ensemble: &StateEnsemble, cm: &ConfusionMatrix, target: &ZMask) -> Result<f64> {
    if ensemble.num_qubits != cm.num_qubits() || target.num_qubits() != cm.num_qubits() {
        return Err(Error::DimensionMismatch { expected: cm.num_qubits(), found: ensemble.num_qubits });
    }
    if ensemble.num_states == 0 {
        return Err(Error::InvalidConfig("ensemble has no states".into()));
    }
    let biases = (0..ensemble.num_states)
        .into_par_iter()
        .map(|i| {
            let state = prepare_state(&ensemble.params(i));
            let noisy = push_distribution(&outcome_distribution(&state), cm)?.expectation(target)?;
            Ok(abs_error(noisy, exact_expectation(&state, target)?))
        })
        .collect::<Result<Vec<f64>>>()?;
    Ok(biases.iter().sum::<f64>() / biases.len() as f64)
}
