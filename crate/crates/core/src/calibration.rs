//! Readout calibration: prepare each computational basis state, record the
//! noisy readouts and estimate the confusion matrix from the frequencies.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::mitigation::OmegaMatrix;
use crate::noise::{corrupt_histogram_with, ConfusionMatrix};
use crate::observables::{BitString, SingleQubitFlipProbs};
use crate::rng::{self, DOMAIN_CALIBRATION};
use crate::statevector::{outcome_distribution, sample_shots_with, ShotHistogram, StateVector};

/// Default shots per prepared basis state.
pub const DEFAULT_CALIBRATION_SHOTS: u64 = 8192;

/// Readout histograms, one per prepared basis state.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationRuns {
    num_qubits: usize,
    runs: Vec<ShotHistogram>,
}

impl CalibrationRuns {
    /// `runs[b']` holds the readouts recorded after preparing `|b'>`.
    pub fn new(num_qubits: usize, runs: Vec<ShotHistogram>) -> Result<Self> {
        if runs.len() != 1 << num_qubits {
            return Err(Error::InvalidConfig(format!(
                "{} calibration runs for {num_qubits} qubits, expected {}",
                runs.len(),
                1usize << num_qubits
            )));
        }
        if let Some(h) = runs.iter().find(|h| h.num_qubits() != num_qubits) {
            return Err(Error::DimensionMismatch { expected: num_qubits, found: h.num_qubits() });
        }
        Ok(Self { num_qubits, runs })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn get(&self, prepared: BitString) -> &ShotHistogram {
        &self.runs[prepared.index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (BitString, &ShotHistogram)> {
        BitString::all(self.num_qubits).zip(&self.runs)
    }

    fn check_nonempty(&self) -> Result<()> {
        if self.runs.iter().any(|h| h.total_shots() == 0) {
            return Err(Error::EmptyHistogram);
        }
        Ok(())
    }
}

/// Runs the calibration circuits (an `X` on every qubit prepared in 1,
/// then a full measurement) through the readout channel `cm_true`.
pub fn calibration_runs(cm_true: &ConfusionMatrix, shots_per_state: u64, seed: u64) -> Result<CalibrationRuns> {
    if shots_per_state == 0 {
        return Err(Error::ZeroShots);
    }
    let n = cm_true.num_qubits();
    let runs = BitString::all(n)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|prepared| {
            let mut r = rng::substream(seed, &[DOMAIN_CALIBRATION, prepared.value()]);
            let ideal = outcome_distribution(&StateVector::basis(prepared)?);
            let clean = sample_shots_with(&ideal, shots_per_state, &mut r)?;
            corrupt_histogram_with(&clean, cm_true, &mut r)
        })
        .collect::<Result<Vec<_>>>()?;
    CalibrationRuns::new(n, runs)
}

/// Dense estimate `p(b|b') = counts_b / shots` of run `b'`.
pub fn estimate_confusion(runs: &CalibrationRuns) -> Result<ConfusionMatrix> {
    runs.check_nonempty()?;
    let dim = 1usize << runs.num_qubits;
    let mut entries = vec![0.0; dim * dim];
    for (bt, h) in runs.runs.iter().enumerate() {
        let s = h.total_shots() as f64;
        for (b, &c) in h.counts().iter().enumerate() {
            entries[b * dim + bt] = c as f64 / s;
        }
    }
    ConfusionMatrix::dense(runs.num_qubits, entries)
}

/// Per-qubit flip probabilities pooled over every run that prepared the
/// qubit in the relevant state: `p0` is the fraction of reads of 1 among runs
/// preparing 0, `p1` the fraction of reads of 0 among runs preparing 1.
pub fn estimate_single_qubit(runs: &CalibrationRuns) -> Result<Vec<SingleQubitFlipProbs>> {
    runs.check_nonempty()?;
    (0..runs.num_qubits)
        .map(|q| {
            // [prepared][read]
            let mut tally = [[0u64; 2]; 2];
            for (bt, h) in runs.runs.iter().enumerate() {
                let prepared = (bt >> q) & 1;
                for (b, &c) in h.counts().iter().enumerate() {
                    tally[prepared][(b >> q) & 1] += c;
                }
            }
            let frac = |row: [u64; 2], wrong: usize| row[wrong] as f64 / (row[0] + row[1]) as f64;
            SingleQubitFlipProbs::new(frac(tally[0], 1), frac(tally[1], 0))
        })
        .collect()
}

/// Infinite-shot counterpart of [`estimate_single_qubit`]: marginal flip
/// probabilities of each qubit averaged over the other qubits' true values.
pub fn single_qubit_marginals(cm: &ConfusionMatrix) -> Vec<SingleQubitFlipProbs> {
    let dim = cm.dim();
    let half = (dim / 2) as f64;
    (0..cm.num_qubits())
        .map(|q| {
            let mut flip = [0.0; 2];
            for bt in 0..dim {
                let prepared = (bt >> q) & 1;
                flip[prepared] += (0..dim)
                    .filter(|b| (b >> q) & 1 != prepared)
                    .map(|b| cm.entry(b, bt))
                    .sum::<f64>();
            }
            SingleQubitFlipProbs {
                p0: (flip[0] / half).clamp(0.0, 1.0),
                p1: (flip[1] / half).clamp(0.0, 1.0),
            }
        })
        .collect()
}

/// `1 - min_b p(b|b)`.
pub fn error_rate(cm: &ConfusionMatrix) -> f64 {
    1.0 - (0..cm.dim()).map(|b| cm.entry(b, b)).fold(f64::INFINITY, f64::min)
}

/// `|O_jj| > sum_{k != j} |O_jk|` for every row.
pub fn check_diagonal_dominance(omega: &OmegaMatrix) -> bool {
    let n = omega.dim();
    (0..n).all(|j| {
        let off: f64 = (0..n).filter(|&k| k != j).map(|k| omega.get(j, k).abs()).sum();
        omega.get(j, j).abs() > off
    })
}
