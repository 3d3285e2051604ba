//! Dense statevector simulation of the layered `RX`/`CNOT` benchmark circuit
//! and projective shot sampling.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Binomial, Distribution};

use crate::error::{Error, Result};
use crate::observables::{BitString, ZMask, MAX_QUBITS};
use crate::rng;

/// Rotation angles of a layered circuit.
///
/// The circuit alternates rotation layers (`RX` on every qubit) with
/// entangling layers (a `CNOT` ladder `q -> q+1`), starting and ending with a
/// rotation layer. Angle `thetas[l * Q + q]` belongs to qubit `q` in
/// rotation layer `l`. With two qubits and one entangling layer this is the
/// four-angle benchmark circuit: `RX(t0)`, `RX(t1)` on qubits 0 and 1, a
/// `CNOT` from qubit 0 onto qubit 1, then `RX(t2)`, `RX(t3)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    num_qubits: usize,
    entangling_layers: usize,
    thetas: Vec<f64>,
}

impl CircuitParams {
    pub fn new(num_qubits: usize, entangling_layers: usize, thetas: Vec<f64>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::InvalidConfig(format!("unsupported qubit count {num_qubits}")));
        }
        let expected = Self::num_params(num_qubits, entangling_layers);
        if thetas.len() != expected {
            return Err(Error::InvalidConfig(format!(
                "expected {expected} angles, got {}",
                thetas.len()
            )));
        }
        if let Some(t) = thetas.iter().find(|t| !t.is_finite()) {
            return Err(Error::InvalidConfig(format!("non-finite angle {t}")));
        }
        Ok(Self { num_qubits, entangling_layers, thetas })
    }

    /// The two-qubit, four-angle benchmark circuit.
    pub fn two_qubit(thetas: [f64; 4]) -> Result<Self> {
        Self::new(2, 1, thetas.to_vec())
    }

    pub fn num_params(num_qubits: usize, entangling_layers: usize) -> usize {
        num_qubits * (entangling_layers + 1)
    }

    /// Angles drawn uniformly from `[0, 2pi)`.
    pub fn random<R: Rng + ?Sized>(num_qubits: usize, entangling_layers: usize, rng: &mut R) -> Result<Self> {
        let thetas = (0..Self::num_params(num_qubits, entangling_layers))
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        Self::new(num_qubits, entangling_layers, thetas)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn entangling_layers(&self) -> usize {
        self.entangling_layers
    }

    pub fn thetas(&self) -> &[f64] {
        &self.thetas
    }
}

/// `2^Q` complex amplitudes, indexed by the integer bitstring encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: Vec<Complex64>,
    num_qubits: usize,
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS {
            return Err(Error::InvalidConfig(format!("unsupported qubit count {num_qubits}")));
        }
        let mut amplitudes = vec![Complex64::new(0.0, 0.0); 1 << num_qubits];
        amplitudes[0] = Complex64::new(1.0, 0.0);
        Ok(Self { amplitudes, num_qubits })
    }

    /// Wraps raw amplitudes, which must have length `2^Q` and unit norm.
    pub fn from_amplitudes(amplitudes: Vec<Complex64>) -> Result<Self> {
        let len = amplitudes.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidConfig(format!("amplitude count {len} is not 2^Q")));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidConfig(format!("state norm is {norm}, expected 1")));
        }
        Ok(Self { num_qubits: len.trailing_zeros() as usize, amplitudes })
    }

    /// Tensor product of single-qubit states; `factors[q]` is `(a0, a1)` for
    /// qubit `q`. Each factor is normalized.
    pub fn product(factors: &[[Complex64; 2]]) -> Result<Self> {
        let n = factors.len();
        let mut state = Self::zero(n)?;
        for (i, amp) in state.amplitudes.iter_mut().enumerate() {
            *amp = factors.iter().enumerate().fold(Complex64::new(1.0, 0.0), |acc, (q, f)| {
                let norm = (f[0].norm_sqr() + f[1].norm_sqr()).sqrt();
                acc * f[(i >> q) & 1] / norm
            });
        }
        Ok(state)
    }

    /// The computational basis state `|b>`, built by applying `X` to every
    /// qubit that reads 1.
    pub fn basis(b: BitString) -> Result<Self> {
        let mut state = Self::zero(b.num_qubits())?;
        for q in 0..b.num_qubits() {
            if b.bit(q) == 1 {
                state.apply_x(q);
            }
        }
        Ok(state)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    fn apply_single(&mut self, qubit: usize, gate: [[Complex64; 2]; 2]) {
        let stride = 1 << qubit;
        for base in (0..self.amplitudes.len()).filter(|i| i & stride == 0) {
            let a0 = self.amplitudes[base];
            let a1 = self.amplitudes[base | stride];
            self.amplitudes[base] = gate[0][0] * a0 + gate[0][1] * a1;
            self.amplitudes[base | stride] = gate[1][0] * a0 + gate[1][1] * a1;
        }
    }

    /// `RX(theta) = exp(-i theta X / 2)`.
    pub fn apply_rx(&mut self, qubit: usize, theta: f64) {
        self.apply_single(qubit, rx_matrix(theta));
    }

    pub fn apply_x(&mut self, qubit: usize) {
        let stride = 1 << qubit;
        for base in (0..self.amplitudes.len()).filter(|i| i & stride == 0) {
            self.amplitudes.swap(base, base | stride);
        }
    }

    pub fn apply_cnot(&mut self, control: usize, target: usize) {
        let c = 1 << control;
        let t = 1 << target;
        for i in (0..self.amplitudes.len()).filter(|i| i & c != 0 && i & t == 0) {
            self.amplitudes.swap(i, i | t);
        }
    }

    /// Purity `tr(rho_q^2)` of the reduced state of one qubit.
    pub fn qubit_purity(&self, qubit: usize) -> f64 {
        let stride = 1 << qubit;
        let (mut r00, mut r11, mut r01) = (0.0, 0.0, Complex64::new(0.0, 0.0));
        for base in (0..self.amplitudes.len()).filter(|i| i & stride == 0) {
            let a0 = self.amplitudes[base];
            let a1 = self.amplitudes[base | stride];
            r00 += a0.norm_sqr();
            r11 += a1.norm_sqr();
            r01 += a0 * a1.conj();
        }
        r00 * r00 + r11 * r11 + 2.0 * r01.norm_sqr()
    }

    /// True when every single-qubit reduced state is pure, i.e. the state is
    /// a full tensor product.
    pub fn is_product(&self, tol: f64) -> bool {
        (0..self.num_qubits).all(|q| (self.qubit_purity(q) - 1.0).abs() <= tol)
    }
}

pub fn rx_matrix(theta: f64) -> [[Complex64; 2]; 2] {
    let c = Complex64::new((theta / 2.0).cos(), 0.0);
    let s = Complex64::new(0.0, -(theta / 2.0).sin());
    [[c, s], [s, c]]
}

/// Runs the layered circuit on `|0...0>`.
pub fn prepare_state(params: &CircuitParams) -> StateVector {
    let n = params.num_qubits;
    let mut state = StateVector::zero(n).expect("qubit count validated by CircuitParams");
    for layer in 0..=params.entangling_layers {
        if layer > 0 {
            for q in 0..n.saturating_sub(1) {
                state.apply_cnot(q, q + 1);
            }
        }
        for q in 0..n {
            state.apply_rx(q, params.thetas[layer * n + q]);
        }
    }
    state
}

/// `<psi|O|psi>` for a diagonal `Z` mask.
pub fn exact_expectation(state: &StateVector, obs: &ZMask) -> Result<f64> {
    if state.num_qubits != obs.num_qubits() {
        return Err(Error::DimensionMismatch { expected: obs.num_qubits(), found: state.num_qubits });
    }
    Ok(state
        .amplitudes
        .iter()
        .enumerate()
        .map(|(b, a)| a.norm_sqr() * obs.sign(b as u64))
        .sum())
}

/// Born-rule probabilities over bitstrings.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeDistribution {
    probs: Vec<f64>,
    num_qubits: usize,
}

impl OutcomeDistribution {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let len = probs.len();
        if len < 2 || !len.is_power_of_two() {
            return Err(Error::InvalidProbability(format!("distribution length {len} is not 2^Q")));
        }
        if let Some(p) = probs.iter().find(|p| !(**p >= 0.0)) {
            return Err(Error::InvalidProbability(format!("negative or NaN entry {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidProbability(format!("distribution sums to {total}")));
        }
        Ok(Self { num_qubits: len.trailing_zeros() as usize, probs })
    }

    pub(crate) fn from_raw(probs: Vec<f64>, num_qubits: usize) -> Self {
        debug_assert_eq!(probs.len(), 1 << num_qubits);
        Self { probs, num_qubits }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn prob(&self, b: BitString) -> f64 {
        self.probs[b.index()]
    }

    /// Expectation of a `Z` mask under this distribution.
    pub fn expectation(&self, obs: &ZMask) -> Result<f64> {
        if self.num_qubits != obs.num_qubits() {
            return Err(Error::DimensionMismatch { expected: obs.num_qubits(), found: self.num_qubits });
        }
        Ok(self.probs.iter().enumerate().map(|(b, p)| p * obs.sign(b as u64)).sum())
    }
}

pub fn outcome_distribution(state: &StateVector) -> OutcomeDistribution {
    OutcomeDistribution {
        probs: state.amplitudes.iter().map(|a| a.norm_sqr()).collect(),
        num_qubits: state.num_qubits,
    }
}

/// Outcome counts of a batch of shots.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShotHistogram {
    counts: Vec<u64>,
    num_qubits: usize,
    total_shots: u64,
}

impl ShotHistogram {
    /// Dense counts indexed by bitstring encoding.
    pub fn from_counts(num_qubits: usize, counts: Vec<u64>) -> Result<Self> {
        if num_qubits == 0 || num_qubits > MAX_QUBITS || counts.len() != 1 << num_qubits {
            return Err(Error::InvalidConfig(format!(
                "{} counts do not match {num_qubits} qubits",
                counts.len()
            )));
        }
        let total_shots = counts.iter().sum();
        Ok(Self { counts, num_qubits, total_shots })
    }

    pub fn from_pairs<I>(num_qubits: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (BitString, u64)>,
    {
        let mut counts = vec![0u64; 1 << num_qubits.min(MAX_QUBITS)];
        for (b, c) in pairs {
            if b.num_qubits() != num_qubits {
                return Err(Error::DimensionMismatch { expected: num_qubits, found: b.num_qubits() });
            }
            counts[b.index()] += c;
        }
        Self::from_counts(num_qubits, counts)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn total_shots(&self) -> u64 {
        self.total_shots
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn count(&self, b: BitString) -> u64 {
        self.counts[b.index()]
    }

    /// Non-zero `(bitstring, count)` pairs in increasing bitstring order.
    pub fn iter(&self) -> impl Iterator<Item = (BitString, u64)> + '_ {
        let n = self.num_qubits;
        self.counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(move |(i, &c)| (BitString::new(i as u64, n).expect("index fits"), c))
    }
}

/// Splits `n` draws among categories with the given probabilities using
/// sequential conditional binomials.
pub(crate) fn multinomial<R: Rng + ?Sized>(probs: &[f64], n: u64, rng: &mut R) -> Vec<u64> {
    let mut out = vec![0u64; probs.len()];
    let mut remaining = n;
    let mut mass: f64 = probs.iter().sum();
    let last = probs.iter().rposition(|&p| p > 0.0);
    for (i, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if p <= 0.0 {
            continue;
        }
        if Some(i) == last {
            out[i] = remaining;
            break;
        }
        let q = (p / mass).clamp(0.0, 1.0);
        let k = Binomial::new(remaining, q).expect("probability clamped to [0, 1]").sample(rng);
        out[i] = k;
        remaining -= k;
        mass -= p;
    }
    out
}

/// Draws `shots` independent outcomes from `dist`.
pub fn sample_shots_with<R: Rng + ?Sized>(dist: &OutcomeDistribution, shots: u64, rng: &mut R) -> Result<ShotHistogram> {
    if shots == 0 {
        return Err(Error::ZeroShots);
    }
    Ok(ShotHistogram {
        counts: multinomial(&dist.probs, shots, rng),
        num_qubits: dist.num_qubits,
        total_shots: shots,
    })
}

/// Draws `shots` independent outcomes from `dist`; deterministic in `seed`.
pub fn sample_shots(dist: &OutcomeDistribution, shots: u64, seed: u64) -> Result<ShotHistogram> {
    sample_shots_with(dist, shots, &mut rng::seeded(seed))
}

/// The Bell state `(|00> + |11>) / sqrt(2)`.
pub fn bell_state() -> StateVector {
    let h = Complex64::new(FRAC_1_SQRT_2, 0.0);
    let z = Complex64::new(0.0, 0.0);
    StateVector { amplitudes: vec![h, z, z, h], num_qubits: 2 }
}
