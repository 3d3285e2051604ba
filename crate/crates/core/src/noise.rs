//! Readout noise: confusion matrices, per-shot corruption and exact
//! infinite-shot noisy distributions.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::observables::{BitString, SingleQubitFlipProbs, MAX_QUBITS};
use crate::rng;
use crate::statevector::{multinomial, OutcomeDistribution, ShotHistogram};

const STOCHASTIC_TOL: f64 = 1e-12;

/// How a confusion matrix was specified.
#[derive(Debug, Clone, PartialEq)]
pub enum ConfusionKind {
    /// Independent per-qubit channels; `probs[q]` belongs to qubit `q`.
    Factorized(Vec<SingleQubitFlipProbs>),
    Dense,
}

/// `p(b | b')`: probability of reading `b` when the true outcome is `b'`.
///
/// Stored row-major with rows indexed by the read bitstring and columns by
/// the true bitstring, so every column sums to one.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfusionMatrix {
    num_qubits: usize,
    entries: Vec<f64>,
    kind: ConfusionKind,
}

impl ConfusionMatrix {
    pub fn identity(num_qubits: usize) -> Result<Self> {
        Self::factorized(vec![SingleQubitFlipProbs::noiseless(); num_qubits])
    }

    /// Tensor product of per-qubit `[[1-p0, p1], [p0, 1-p1]]` channels.
    pub fn factorized(probs: Vec<SingleQubitFlipProbs>) -> Result<Self> {
        let n = probs.len();
        check_qubits(n)?;
        for p in &probs {
            SingleQubitFlipProbs::new(p.p0, p.p1)?;
        }
        let dim = 1usize << n;
        let mats: Vec<[[f64; 2]; 2]> = probs.iter().map(|p| p.matrix()).collect();
        let mut entries = vec![0.0; dim * dim];
        for b in 0..dim {
            for bt in 0..dim {
                entries[b * dim + bt] = mats
                    .iter()
                    .enumerate()
                    .map(|(q, m)| m[(b >> q) & 1][(bt >> q) & 1])
                    .product();
            }
        }
        Ok(Self { num_qubits: n, entries, kind: ConfusionKind::Factorized(probs) })
    }

    /// A general matrix given row-major as `entries[b * 2^Q + b']`.
    pub fn dense(num_qubits: usize, entries: Vec<f64>) -> Result<Self> {
        check_qubits(num_qubits)?;
        let dim = 1usize << num_qubits;
        if entries.len() != dim * dim {
            return Err(Error::InvalidConfusion(format!(
                "{} entries do not form a {dim}x{dim} matrix",
                entries.len()
            )));
        }
        if let Some((i, p)) = entries.iter().enumerate().find(|(_, p)| !(**p >= 0.0 && **p <= 1.0)) {
            return Err(Error::InvalidConfusion(format!(
                "entry ({}, {}) = {p} is not a probability",
                i / dim,
                i % dim
            )));
        }
        for col in 0..dim {
            let sum: f64 = (0..dim).map(|row| entries[row * dim + col]).sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(Error::InvalidConfusion(format!("column {col} sums to {sum}")));
            }
        }
        Ok(Self { num_qubits, entries, kind: ConfusionKind::Dense })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if dim < 2 || !dim.is_power_of_two() {
            return Err(Error::InvalidConfusion(format!("{dim} rows is not 2^Q")));
        }
        if let Some(r) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::InvalidConfusion(format!("row {r} has {} entries, expected {dim}", rows[r].len())));
        }
        Self::dense(dim.trailing_zeros() as usize, rows.concat())
    }

    /// Synthetic correlated readout: with probability `lambda` every qubit in
    /// `flip_mask` flips jointly, otherwise `base` acts.
    ///
    /// `(1 - lambda) * base + lambda * C` with `C[b][b'] = [b == b' ^ flip_mask]`.
    pub fn with_correlated_flips(base: &ConfusionMatrix, lambda: f64, flip_mask: u64) -> Result<Self> {
        if !(0.0..=1.0).contains(&lambda) {
            return Err(Error::InvalidProbability(format!("correlated mass {lambda} outside [0, 1]")));
        }
        if flip_mask == 0 || flip_mask >> base.num_qubits != 0 {
            return Err(Error::InvalidConfusion(format!(
                "flip mask {flip_mask:#b} is empty or exceeds {} qubits",
                base.num_qubits
            )));
        }
        let dim = base.dim();
        let mut entries: Vec<f64> = base.entries.iter().map(|p| (1.0 - lambda) * p).collect();
        for bt in 0..dim {
            entries[(bt ^ flip_mask as usize) * dim + bt] += lambda;
        }
        Ok(Self { num_qubits: base.num_qubits, entries, kind: ConfusionKind::Dense })
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.num_qubits
    }

    pub fn kind(&self) -> &ConfusionKind {
        &self.kind
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    /// `p(read | truth)`.
    pub fn prob(&self, read: BitString, truth: BitString) -> f64 {
        self.entry(read.index(), truth.index())
    }

    #[inline]
    pub fn entry(&self, read: usize, truth: usize) -> f64 {
        self.entries[read * self.dim() + truth]
    }

    /// The distribution of reads for one true bitstring.
    pub fn column(&self, truth: usize) -> Vec<f64> {
        let dim = self.dim();
        (0..dim).map(|b| self.entries[b * dim + truth]).collect()
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries.chunks(self.dim()).map(|r| r.to_vec()).collect()
    }

    /// Same entries, tagged as a general dense matrix.
    pub fn to_dense(&self) -> Self {
        Self { kind: ConfusionKind::Dense, ..self.clone() }
    }

    fn check_dims(&self, num_qubits: usize) -> Result<()> {
        if num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, found: num_qubits });
        }
        Ok(())
    }
}

fn check_qubits(n: usize) -> Result<()> {
    if n == 0 || n > MAX_QUBITS {
        return Err(Error::InvalidConfusion(format!("unsupported qubit count {n}")));
    }
    Ok(())
}

fn sample_index<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, w) in weights.enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w;
        if u < acc {
            return i;
        }
    }
    last_positive
}

/// Reads one true bitstring through the noisy channel.
pub fn corrupt_with<R: Rng + ?Sized>(b_true: BitString, cm: &ConfusionMatrix, rng: &mut R) -> Result<BitString> {
    cm.check_dims(b_true.num_qubits())?;
    let dim = cm.dim();
    let col = b_true.index();
    let read = sample_index((0..dim).map(|b| cm.entries[b * dim + col]), rng);
    BitString::new(read as u64, cm.num_qubits)
}

pub fn corrupt(b_true: BitString, cm: &ConfusionMatrix, seed: u64) -> Result<BitString> {
    corrupt_with(b_true, cm, &mut rng::seeded(seed))
}

/// Corrupts every recorded shot independently. All shots sharing a true
/// bitstring are redistributed with one multinomial draw over its column.
pub fn corrupt_histogram_with<R: Rng + ?Sized>(
    h: &ShotHistogram,
    cm: &ConfusionMatrix,
    rng: &mut R,
) -> Result<ShotHistogram> {
    cm.check_dims(h.num_qubits())?;
    let mut out = vec![0u64; cm.dim()];
    for (truth, &count) in h.counts().iter().enumerate() {
        if count == 0 {
            continue;
        }
        let read = multinomial(&cm.column(truth), count, rng);
        for (o, r) in out.iter_mut().zip(read) {
            *o += r;
        }
    }
    ShotHistogram::from_counts(cm.num_qubits, out)
}

pub fn corrupt_histogram(h: &ShotHistogram, cm: &ConfusionMatrix, seed: u64) -> Result<ShotHistogram> {
    corrupt_histogram_with(h, cm, &mut rng::seeded(seed))
}

/// Exact noisy distribution `out_b = sum_b' p(b|b') dist_b'`.
///
/// Factorized matrices are applied qubit by qubit; dense ones by a full
/// matrix-vector product.
pub fn push_distribution(dist: &OutcomeDistribution, cm: &ConfusionMatrix) -> Result<OutcomeDistribution> {
    cm.check_dims(dist.num_qubits())?;
    let out = match &cm.kind {
        ConfusionKind::Factorized(probs) => apply_per_qubit(dist.probs(), probs),
        ConfusionKind::Dense => {
            let dim = cm.dim();
            let p = dist.probs();
            cm.entries
                .chunks(dim)
                .map(|row| row.iter().zip(p).map(|(a, b)| a * b).sum())
                .collect()
        }
    };
    Ok(OutcomeDistribution::from_raw(out, cm.num_qubits))
}

/// Applies each qubit's 2x2 readout channel in turn.
pub fn apply_per_qubit(probs: &[f64], channels: &[SingleQubitFlipProbs]) -> Vec<f64> {
    let mut v = probs.to_vec();
    for (q, ch) in channels.iter().enumerate() {
        let m = ch.matrix();
        let stride = 1 << q;
        for base in (0..v.len()).filter(|i| i & stride == 0) {
            let (a0, a1) = (v[base], v[base | stride]);
            v[base] = m[0][0] * a0 + m[0][1] * a1;
            v[base | stride] = m[1][0] * a0 + m[1][1] * a1;
        }
    }
    v
}

/// On-disk form of a confusion matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrixFile {
    pub num_qubits: usize,
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entries: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub probs: Option<Vec<[f64; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub shots_per_state: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
}

impl ConfusionMatrixFile {
    pub fn from_matrix(cm: &ConfusionMatrix) -> Self {
        let (kind, entries, probs) = match &cm.kind {
            ConfusionKind::Factorized(p) => ("factorized", None, Some(p.iter().map(|p| [p.p0, p.p1]).collect())),
            ConfusionKind::Dense => ("dense", Some(cm.rows()), None),
        };
        Self {
            num_qubits: cm.num_qubits,
            kind: kind.to_string(),
            entries,
            probs,
            shots_per_state: None,
            master_seed: None,
        }
    }

    pub fn to_matrix(&self) -> Result<ConfusionMatrix> {
        let cm = match self.kind.as_str() {
            "dense" => {
                let rows = self
                    .entries
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfusion("dense matrix needs \"entries\"".into()))?;
                ConfusionMatrix::from_rows(rows)?
            }
            "factorized" => {
                let probs = self
                    .probs
                    .as_ref()
                    .ok_or_else(|| Error::InvalidConfusion("factorized matrix needs \"probs\"".into()))?
                    .iter()
                    .map(|&[p0, p1]| SingleQubitFlipProbs::new(p0, p1))
                    .collect::<Result<Vec<_>>>()?;
                ConfusionMatrix::factorized(probs)?
            }
            other => return Err(Error::InvalidConfusion(format!("unknown kind {other:?}"))),
        };
        if cm.num_qubits != self.num_qubits {
            return Err(Error::DimensionMismatch { expected: self.num_qubits, found: cm.num_qubits });
        }
        Ok(cm)
    }
}

impl ConfusionMatrix {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ConfusionMatrixFile::from_matrix(self)).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ConfusionMatrixFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        file.to_matrix()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevector::{outcome_distribution, prepare_state, CircuitParams};
    use proptest::prelude::{prop_assert, proptest};

    fn bs(s: &str) -> BitString {
        s.parse().unwrap()
    }

    fn flips(p0: f64, p1: f64, n: usize) -> ConfusionMatrix {
        ConfusionMatrix::factorized(vec![SingleQubitFlipProbs::new(p0, p1).unwrap(); n]).unwrap()
    }

    fn random_dense(n: usize, seed: u64) -> ConfusionMatrix {
        let mut r = rng::seeded(seed);
        let dim = 1 << n;
        let mut cols = vec![vec![0.0; dim]; dim];
        for col in cols.iter_mut() {
            let w: Vec<f64> = (0..dim).map(|_| r.random::<f64>()).collect();
            let s: f64 = w.iter().sum();
            *col = w.iter().map(|x| x / s).collect();
        }
        let entries = (0..dim * dim).map(|i| cols[i % dim][i / dim]).collect::<Vec<f64>>();
        ConfusionMatrix::dense(n, entries).unwrap()
    }

    #[test]
    fn factorized_expansion_is_column_stochastic() {
        let cm = ConfusionMatrix::factorized(vec![
            SingleQubitFlipProbs::new(0.02, 0.05).unwrap(),
            SingleQubitFlipProbs::new(0.1, 0.3).unwrap(),
            SingleQubitFlipProbs::new(0.0, 1.0).unwrap(),
        ])
        .unwrap();
        for col in 0..8 {
            assert!((cm.column(col).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        // p(01|00) for a single-qubit-0 flip: p0(q0) * (1 - p0(q1)) * (1 - p0(q2))
        assert!((cm.entry(0b001, 0) - 0.02 * 0.9 * 1.0).abs() < 1e-15);
    }

    #[test]
    fn dense_validation() {
        assert!(ConfusionMatrix::dense(1, vec![0.9, 0.2, 0.1, 0.7]).is_err());
        assert!(ConfusionMatrix::dense(1, vec![1.1, 0.0, -0.1, 1.0]).is_err());
        assert!(ConfusionMatrix::dense(1, vec![0.9, 0.2, 0.1]).is_err());
        assert!(ConfusionMatrix::dense(1, vec![0.9, 0.2, 0.1, 0.8]).is_ok());
    }

    #[test]
    fn corrupt_examples() {
        let id = ConfusionMatrix::identity(2).unwrap();
        for seed in 0..50 {
            assert_eq!(corrupt(bs("10"), &id, seed).unwrap(), bs("10"));
        }
        let all_flip = flips(1.0, 0.0, 2);
        for seed in 0..50 {
            assert_eq!(corrupt(bs("00"), &all_flip, seed).unwrap(), bs("11"));
        }
        assert!(corrupt(bs("000"), &id, 0).is_err());
    }

    #[test]
    fn corrupt_frequency_matches_product_of_independent_flips() {
        let cm = flips(0.1, 0.1, 2);
        let mut r = rng::seeded(99);
        let trials = 1_000_000;
        let hits = (0..trials).filter(|_| corrupt_with(bs("00"), &cm, &mut r).unwrap() == bs("00")).count();
        let p = 0.9 * 0.9;
        let sigma = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((hits as f64 - trials as f64 * p).abs() < 5.0 * sigma);
    }

    #[test]
    fn corrupt_histogram_examples() {
        let h = ShotHistogram::from_counts(2, vec![10, 20, 30, 40]).unwrap();
        assert_eq!(corrupt_histogram(&h, &ConfusionMatrix::identity(2).unwrap(), 4).unwrap(), h);
        let h = ShotHistogram::from_counts(2, vec![500, 0, 0, 0]).unwrap();
        assert_eq!(corrupt_histogram(&h, &flips(1.0, 0.0, 2), 4).unwrap().counts(), &[0, 0, 0, 500]);
        let cm = random_dense(2, 3);
        for seed in 0..20 {
            let h = ShotHistogram::from_counts(2, vec![seed, 3 * seed, 7, 11]).unwrap();
            assert_eq!(corrupt_histogram(&h, &cm, seed).unwrap().total_shots(), h.total_shots());
        }
    }

    #[test]
    fn push_distribution_examples() {
        let d = OutcomeDistribution::new(vec![1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(push_distribution(&d, &ConfusionMatrix::identity(2).unwrap()).unwrap(), d);
        let out = push_distribution(&d, &flips(0.1, 0.0, 2)).unwrap();
        // (0.9 |0> + 0.1 |1>) on each qubit
        for (got, want) in out.probs().iter().zip([0.81, 0.09, 0.09, 0.01]) {
            assert!((got - want).abs() < 1e-15);
        }
        let dense = push_distribution(&d, &flips(0.1, 0.0, 2).to_dense()).unwrap();
        for (got, want) in dense.probs().iter().zip([0.81, 0.09, 0.09, 0.01]) {
            assert!((got - want).abs() < 1e-15);
        }
    }

    #[test]
    fn histogram_corruption_converges_to_push_distribution() {
        let cm = ConfusionMatrix::with_correlated_flips(&flips(0.03, 0.05, 2), 0.04, 0b11).unwrap();
        let state = prepare_state(&CircuitParams::two_qubit([0.4, 2.1, 1.3, 0.2]).unwrap());
        let dist = outcome_distribution(&state);
        let exact = push_distribution(&dist, &cm).unwrap();
        for (k, s) in [1_000u64, 100_000, 1_000_000].into_iter().enumerate() {
            let h = crate::statevector::sample_shots(&dist, s, k as u64).unwrap();
            let noisy = corrupt_histogram(&h, &cm, 100 + k as u64).unwrap();
            for (c, p) in noisy.counts().iter().zip(exact.probs()) {
                let sigma = (s as f64 * p * (1.0 - p)).sqrt().max(1.0);
                assert!((*c as f64 - s as f64 * p).abs() < 5.0 * sigma);
            }
            let tv: f64 = 0.5
                * noisy
                    .counts()
                    .iter()
                    .zip(exact.probs())
                    .map(|(c, p)| (*c as f64 / s as f64 - p).abs())
                    .sum::<f64>();
            assert!(tv < 5.0 / (s as f64).sqrt());
        }
    }

    #[test]
    fn correlated_family_adds_joint_flip_mass() {
        let base = flips(0.02, 0.04, 2);
        let cm = ConfusionMatrix::with_correlated_flips(&base, 0.05, 0b11).unwrap();
        assert_eq!(cm.kind(), &ConfusionKind::Dense);
        let expected = 0.95 * base.entry(0b11, 0) + 0.05;
        assert!((cm.entry(0b11, 0) - expected).abs() < 1e-15);
        for col in 0..4 {
            assert!((cm.column(col).iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
        assert!(ConfusionMatrix::with_correlated_flips(&base, 1.5, 0b11).is_err());
        assert!(ConfusionMatrix::with_correlated_flips(&base, 0.1, 0b100).is_err());
    }

    #[test]
    fn json_round_trip() {
        for cm in [flips(0.02, 0.05, 2), random_dense(2, 8), ConfusionMatrix::identity(3).unwrap()] {
            assert_eq!(ConfusionMatrix::from_json(&cm.to_json()).unwrap(), cm);
        }
        assert!(ConfusionMatrix::from_json(r#"{"num_qubits": 2, "kind": "dense"}"#).is_err());
        assert!(ConfusionMatrix::from_json(r#"{"num_qubits": 3, "kind": "factorized", "probs": [[0,0],[0,0]]}"#).is_err());
        assert!(ConfusionMatrix::from_json("{").is_err());
    }

    proptest! {
        #[test]
        fn push_preserves_stochasticity(seed in 0u64..1000, n in 1usize..4) {
            let cm = random_dense(n, seed);
            let mut r = rng::seeded(seed + 1);
            let dist = outcome_distribution(&prepare_state(&CircuitParams::random(n, 1, &mut r).unwrap()));
            let out = push_distribution(&dist, &cm).unwrap();
            prop_assert!(out.probs().iter().all(|p| *p >= 0.0));
            prop_assert!((out.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }

        #[test]
        fn factorized_matches_dense_expansion(
            ps in proptest::collection::vec((0.0f64..0.5, 0.0f64..0.5), 1..5),
            seed in 0u64..1000,
        ) {
            let probs: Vec<_> = ps.iter().map(|&(a, b)| SingleQubitFlipProbs::new(a, b).unwrap()).collect();
            let n = probs.len();
            let cm = ConfusionMatrix::factorized(probs).unwrap();
            let mut r = rng::seeded(seed);
            let dist = outcome_distribution(&prepare_state(&CircuitParams::random(n, 2, &mut r).unwrap()));
            let a = push_distribution(&dist, &cm).unwrap();
            let b = push_distribution(&dist, &cm.to_dense()).unwrap();
            for (x, y) in a.probs().iter().zip(b.probs()) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }
    }
}
