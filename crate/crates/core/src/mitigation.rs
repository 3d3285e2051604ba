//! The two readout-mitigation schemes.
//!
//! All `2^Q` diagonal operators are handled in the canonical mask order of
//! [`ZMask::canonical`] (for two qubits `ZZ, ZI, IZ, II`).
//!
//! The uncorrelated scheme inverts each qubit's channel
//! `E(Z~_q) = gamma(Z_q) Z_q + gamma(1_q) 1` and expands the product over the
//! qubits of the target operator. The correlated scheme builds
//!
//! ```text
//! Omega[j][k] = 2^-Q * sum_{b, b'} <b|O_j|b> <b'|O_k|b'> p(b|b')
//! ```
//!
//! which maps true expectations onto noisy ones, and solves `Omega x = noisy`.
//! The `2^-Q` factor makes noiseless readout give the identity map.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::LuDecomposition;
use crate::noise::{push_distribution, ConfusionMatrix};
use crate::observables::{gamma, noisy_z_decomposition, SingleQubitFlipProbs, ZMask};
use crate::statevector::{exact_expectation, outcome_distribution, OutcomeDistribution, ShotHistogram, StateVector};

/// In-place Walsh-Hadamard transform: `v[m] <- sum_b (-1)^{|m & b|} v[b]`.
pub(crate) fn walsh_hadamard<T>(v: &mut [T])
where
    T: Copy + std::ops::Add<Output = T> + std::ops::Sub<Output = T>,
{
    let n = v.len();
    let mut h = 1;
    while h < n {
        for base in (0..n).step_by(2 * h) {
            for i in base..base + h {
                let (a, b) = (v[i], v[i + h]);
                v[i] = a + b;
                v[i + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// One expectation value per `Z` mask, in canonical order.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectationVector {
    num_qubits: usize,
    values: Vec<f64>,
}

/// Expectations of the noisy operators, estimated from readouts.
pub type NoisyExpectationVector = ExpectationVector;

impl ExpectationVector {
    /// Wraps canonical-order values; the identity entry is forced to 1.
    pub fn new(num_qubits: usize, mut values: Vec<f64>) -> Result<Self> {
        if values.len() != 1 << num_qubits {
            return Err(Error::InvalidConfig(format!(
                "{} values do not match {num_qubits} qubits",
                values.len()
            )));
        }
        *values.last_mut().expect("non-empty") = 1.0;
        Ok(Self { num_qubits, values })
    }

    /// Reorders a vector indexed by mask encoding into canonical order.
    fn from_mask_indexed(num_qubits: usize, by_mask: Vec<f64>) -> Self {
        let mut values: Vec<f64> = by_mask.into_iter().rev().collect();
        *values.last_mut().expect("non-empty") = 1.0;
        Self { num_qubits, values }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn get(&self, mask: &ZMask) -> f64 {
        self.values[mask.canonical_index()]
    }

    pub fn iter(&self) -> impl Iterator<Item = (ZMask, f64)> + '_ {
        ZMask::canonical(self.num_qubits).zip(self.values.iter().copied())
    }
}

/// Expectations of every mask from one histogram; a single readout fixes
/// the outcome of every diagonal operator at once.
pub fn noisy_expectations(h: &ShotHistogram) -> Result<NoisyExpectationVector> {
    if h.total_shots() == 0 {
        return Err(Error::EmptyHistogram);
    }
    let mut sums: Vec<i128> = h.counts().iter().map(|&c| c as i128).collect();
    walsh_hadamard(&mut sums);
    let s = h.total_shots() as f64;
    Ok(ExpectationVector::from_mask_indexed(
        h.num_qubits(),
        sums.into_iter().map(|x| x as f64 / s).collect(),
    ))
}

/// Infinite-shot expectations of every mask under `dist`.
pub fn expectations_from_distribution(dist: &OutcomeDistribution) -> ExpectationVector {
    let mut v = dist.probs().to_vec();
    walsh_hadamard(&mut v);
    ExpectationVector::from_mask_indexed(dist.num_qubits(), v)
}

/// Exact noiseless expectations of every mask.
pub fn exact_expectations(state: &StateVector) -> ExpectationVector {
    expectations_from_distribution(&outcome_distribution(state))
}

fn check_probs(num_qubits: usize, probs: &[SingleQubitFlipProbs]) -> Result<()> {
    if probs.len() != num_qubits {
        return Err(Error::DimensionMismatch { expected: num_qubits, found: probs.len() });
    }
    Ok(())
}

/// Expansion coefficients `c_m` with `O_target = sum_m c_m E(O~_m)` over the
/// sub-masks `m` of `target`, under independent per-qubit readout.
///
/// Each qubit of the target contributes `1 / gamma(Z_q)` when it keeps its
/// `Z` and `-gamma(1_q) / gamma(Z_q)` when it is replaced by the identity.
pub fn uncorrelated_coefficients(probs: &[SingleQubitFlipProbs], target: &ZMask) -> Result<Vec<(ZMask, f64)>> {
    check_probs(target.num_qubits(), probs)?;
    let gammas = target
        .qubits()
        .map(|q| {
            gamma(probs[q])
                .map(|g| (q, g))
                .map_err(|_| Error::NonInvertibleChannel { qubit: q, sum: probs[q].p0 + probs[q].p1 })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(target
        .submasks()
        .into_iter()
        .map(|m| {
            let c = gammas
                .iter()
                .map(|(q, g)| if m.contains(*q) { 1.0 / g.gamma_z } else { -g.gamma_id / g.gamma_z })
                .product();
            (m, c)
        })
        .collect())
}

/// Mitigated expectation of `target` assuming uncorrelated readout errors.
pub fn mitigate_uncorrelated(
    noisy: &NoisyExpectationVector,
    probs: &[SingleQubitFlipProbs],
    target: &ZMask,
) -> Result<f64> {
    if noisy.num_qubits != target.num_qubits() {
        return Err(Error::DimensionMismatch { expected: noisy.num_qubits, found: target.num_qubits() });
    }
    Ok(uncorrelated_coefficients(probs, target)?
        .iter()
        .map(|(m, c)| c * noisy.get(m))
        .sum())
}

/// [`mitigate_uncorrelated`] for every mask.
pub fn mitigate_uncorrelated_all(
    noisy: &NoisyExpectationVector,
    probs: &[SingleQubitFlipProbs],
) -> Result<ExpectationVector> {
    let values = ZMask::canonical(noisy.num_qubits)
        .map(|m| mitigate_uncorrelated(noisy, probs, &m))
        .collect::<Result<Vec<_>>>()?;
    ExpectationVector::new(noisy.num_qubits, values)
}

/// Linear map from true to noisy mask expectations, rows and columns in
/// canonical mask order.
#[derive(Debug, Clone, PartialEq)]
pub struct OmegaMatrix {
    num_qubits: usize,
    entries: Vec<f64>,
}

impl OmegaMatrix {
    pub fn from_entries(num_qubits: usize, entries: Vec<f64>) -> Result<Self> {
        let dim = 1usize << num_qubits;
        if entries.len() != dim * dim {
            return Err(Error::InvalidConfig(format!("{} entries for a {dim}x{dim} matrix", entries.len())));
        }
        Ok(Self { num_qubits, entries })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.entries[row * self.dim() + col]
    }

    pub fn get_masks(&self, row: &ZMask, col: &ZMask) -> f64 {
        self.get(row.canonical_index(), col.canonical_index())
    }
}

/// Builds `Omega` from a confusion matrix.
///
/// For every true bitstring `b'` the noisy eigenvalue `sum_b <b|O_j|b> p(b|b')`
/// is a function of `b'`, whose expansion in the mask basis gives row `j`.
/// Both sums run as Walsh-Hadamard transforms.
pub fn build_omega(cm: &ConfusionMatrix) -> OmegaMatrix {
    let n = cm.num_qubits();
    let dim = cm.dim();
    // noisy_eig[j][b'] with j a mask encoding
    let mut noisy_eig = vec![vec![0.0; dim]; dim];
    for bt in 0..dim {
        let mut col = cm.column(bt);
        walsh_hadamard(&mut col);
        for (j, v) in col.into_iter().enumerate() {
            noisy_eig[j][bt] = v;
        }
    }
    let scale = 1.0 / dim as f64;
    let mut entries = vec![0.0; dim * dim];
    for (j, row) in noisy_eig.iter_mut().enumerate() {
        walsh_hadamard(row);
        let cj = dim - 1 - j;
        for (k, v) in row.iter().enumerate() {
            entries[cj * dim + (dim - 1 - k)] = v * scale;
        }
    }
    // E(1~) = 1 exactly, by column stochasticity
    let last = dim - 1;
    entries[last * dim..].iter_mut().for_each(|v| *v = 0.0);
    entries[last * dim + last] = 1.0;
    OmegaMatrix { num_qubits: n, entries }
}

/// A factorized `Omega`, reusable across many solves.
#[derive(Debug, Clone)]
pub struct CorrelatedMitigator {
    omega: OmegaMatrix,
    lu: LuDecomposition,
}

impl CorrelatedMitigator {
    pub fn new(omega: OmegaMatrix) -> Result<Self> {
        let lu = LuDecomposition::new(&omega.entries, omega.dim())?;
        Ok(Self { omega, lu })
    }

    pub fn omega(&self) -> &OmegaMatrix {
        &self.omega
    }

    pub fn condition(&self) -> f64 {
        self.lu.condition()
    }

    pub fn mitigate(&self, noisy: &NoisyExpectationVector) -> Result<ExpectationVector> {
        if noisy.num_qubits != self.omega.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.omega.num_qubits, found: noisy.num_qubits });
        }
        ExpectationVector::new(noisy.num_qubits, self.lu.solve(&noisy.values))
    }
}

/// Solves `Omega x = noisy`. Singular or ill-conditioned `Omega` is an error.
pub fn mitigate_correlated(noisy: &NoisyExpectationVector, omega: &OmegaMatrix) -> Result<ExpectationVector> {
    CorrelatedMitigator::new(omega.clone())?.mitigate(noisy)
}

/// Both sides of the noisy-operator factorization for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorizationReport {
    /// `E(Z~_Q ... Z~_1)` from the joint noisy outcome distribution.
    pub joint: f64,
    /// `prod_q [gamma(Z_q) Z_q + gamma(1_q) 1]` expanded and evaluated on the
    /// ideal state.
    pub expansion: f64,
    /// `prod_q E(Z~_q)`, only for product states.
    pub product: Option<f64>,
}

impl FactorizationReport {
    pub fn max_deviation(&self) -> f64 {
        let d = (self.joint - self.expansion).abs();
        self.product.map_or(d, |p| d.max((self.joint - p).abs()))
    }

    pub fn holds(&self, tol: f64) -> bool {
        self.max_deviation() <= tol
    }
}

/// Compares the noisy all-`Z` expectation with its per-qubit factorization.
pub fn factorization_check(probs: &[SingleQubitFlipProbs], state: &StateVector) -> Result<FactorizationReport> {
    let n = state.num_qubits();
    check_probs(n, probs)?;
    let all_z = ZMask::all_z(n)?;
    let cm = ConfusionMatrix::factorized(probs.to_vec())?;
    let joint = push_distribution(&outcome_distribution(state), &cm)?.expectation(&all_z)?;

    let coeffs: Vec<(f64, f64)> = probs.iter().map(|p| noisy_z_decomposition(*p)).collect();
    let ideal = exact_expectations(state);
    let expansion = all_z
        .submasks()
        .iter()
        .map(|m| {
            let c: f64 = coeffs
                .iter()
                .enumerate()
                .map(|(q, (gz, gid))| if m.contains(q) { *gz } else { *gid })
                .product();
            c * ideal.get(m)
        })
        .sum();

    let product = if state.is_product(1e-10) {
        let mut acc = 1.0;
        for (q, (gz, gid)) in coeffs.iter().enumerate() {
            acc *= gz * exact_expectation(state, &ZMask::from_qubits(&[q], n)?)? + gid;
        }
        Some(acc)
    } else {
        None
    };
    Ok(FactorizationReport { joint, expansion, product })
}

/// One row of the mitigation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReportRow {
    pub mask: String,
    pub raw_expectation: f64,
    pub mitigated_uncorrelated: Option<f64>,
    pub mitigated_correlated: Option<f64>,
    pub exact_expectation: Option<f64>,
}

/// Per-mask report of raw and mitigated expectations. Schemes passed as
/// `None` leave their column empty.
pub fn mitigation_report(
    noisy: &NoisyExpectationVector,
    uncorrelated: Option<&ExpectationVector>,
    correlated: Option<&ExpectationVector>,
    exact: Option<&ExpectationVector>,
) -> Vec<MitigationReportRow> {
    noisy
        .iter()
        .map(|(m, raw)| MitigationReportRow {
            mask: m.to_string(),
            raw_expectation: raw,
            mitigated_uncorrelated: uncorrelated.map(|v| v.get(&m)),
            mitigated_correlated: correlated.map(|v| v.get(&m)),
            exact_expectation: exact.map(|v| v.get(&m)),
        })
        .collect()
}
