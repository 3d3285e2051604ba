//! Bitstrings, diagonal Pauli-Z observables and single-qubit readout
//! channels.
//!
//! Qubit `q` (zero-based) occupies bit `q` of the integer encoding. The text
//! form of bitstrings and masks prints the highest qubit leftmost, so the
//! two-qubit string `"10"` means qubit 1 reads 1 and qubit 0 reads 0.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest register handled by the dense routines in this crate.
pub const MAX_QUBITS: usize = 24;

fn check_qubits(num_qubits: usize) -> Result<()> {
    if num_qubits == 0 || num_qubits > MAX_QUBITS {
        return Err(Error::InvalidConfig(format!(
            "number of qubits must be in 1..={MAX_QUBITS}, got {num_qubits}"
        )));
    }
    Ok(())
}

/// Parity of the set bits of `x`, as a `+1.0`/`-1.0` sign.
#[inline]
pub fn parity_sign(x: u64) -> f64 {
    if x.count_ones() % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// A measurement outcome on `num_qubits` qubits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitString {
    value: u64,
    num_qubits: usize,
}

impl BitString {
    pub fn new(value: u64, num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        if value >> num_qubits != 0 {
            return Err(Error::Parse(format!(
                "value {value} does not fit in {num_qubits} qubits"
            )));
        }
        Ok(Self { value, num_qubits })
    }

    /// Builds a bitstring from per-qubit digits, index `q` holding qubit `q`.
    pub fn from_bits(bits: &[u8]) -> Result<Self> {
        check_qubits(bits.len())?;
        let mut value = 0;
        for (q, &b) in bits.iter().enumerate() {
            match b {
                0 => {}
                1 => value |= 1 << q,
                other => return Err(Error::Parse(format!("bit value {other} is not 0 or 1"))),
            }
        }
        Ok(Self { value, num_qubits: bits.len() })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn index(&self) -> usize {
        self.value as usize
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn bit(&self, qubit: usize) -> u8 {
        ((self.value >> qubit) & 1) as u8
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.num_qubits).map(|q| self.bit(q)).collect()
    }

    /// All `2^Q` bitstrings in increasing integer order.
    pub fn all(num_qubits: usize) -> impl Iterator<Item = BitString> {
        (0..1u64 << num_qubits).map(move |value| BitString { value, num_qubits })
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.num_qubits).rev() {
            write!(f, "{}", self.bit(q))?;
        }
        Ok(())
    }
}

impl FromStr for BitString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let digits = s
            .chars()
            .rev()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                other => Err(Error::Parse(format!("invalid character {other:?} in bitstring {s:?}"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::from_bits(&digits)
    }
}

/// Readout flip probabilities of one qubit.
///
/// `p0` is the probability of reading 1 when the true outcome is 0 and `p1`
/// the probability of reading 0 when the true outcome is 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleQubitFlipProbs {
    pub p0: f64,
    pub p1: f64,
}

impl SingleQubitFlipProbs {
    pub fn new(p0: f64, p1: f64) -> Result<Self> {
        for (name, p) in [("p0", p0), ("p1", p1)] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::InvalidProbability(format!("{name} = {p} is outside [0, 1]")));
            }
        }
        Ok(Self { p0, p1 })
    }

    pub fn noiseless() -> Self {
        Self { p0: 0.0, p1: 0.0 }
    }

    pub fn symmetric(p: f64) -> Result<Self> {
        Self::new(p, p)
    }

    /// The 2x2 column-stochastic readout matrix `[[1-p0, p1], [p0, 1-p1]]`,
    /// indexed `[read][true]`.
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.p0, self.p1], [self.p0, 1.0 - self.p1]]
    }
}

/// The scalars `gamma(Z) = 1 - p0 - p1` and `gamma(1) = p1 - p0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCoefficients {
    pub gamma_z: f64,
    pub gamma_id: f64,
}

/// Gamma coefficients of a single-qubit readout channel.
///
/// Fails when `p0 + p1 >= 1`, where the channel can no longer be inverted
/// on the `Z` component.
pub fn gamma(probs: SingleQubitFlipProbs) -> Result<GammaCoefficients> {
    let sum = probs.p0 + probs.p1;
    if sum >= 1.0 {
        return Err(Error::NonInvertibleChannel { qubit: 0, sum });
    }
    let (gamma_z, gamma_id) = noisy_z_decomposition(probs);
    Ok(GammaCoefficients { gamma_z, gamma_id })
}

/// Coefficients `(on Z, on 1)` of the flip-averaged noisy operator
/// `E(Z~) = (1 - p0 - p1) Z + (p1 - p0) 1`.
pub fn noisy_z_decomposition(probs: SingleQubitFlipProbs) -> (f64, f64) {
    (1.0 - probs.p0 - probs.p1, probs.p1 - probs.p0)
}

/// A tensor product of `Z` and identity factors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ZMask {
    mask: u64,
    num_qubits: usize,
}

impl ZMask {
    pub fn new(mask: u64, num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        if mask >> num_qubits != 0 {
            return Err(Error::Parse(format!(
                "mask {mask:#b} addresses qubits beyond {num_qubits}"
            )));
        }
        Ok(Self { mask, num_qubits })
    }

    pub fn from_qubits(qubits: &[usize], num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        let mut mask = 0;
        for &q in qubits {
            if q >= num_qubits {
                return Err(Error::Parse(format!("qubit {q} out of range for {num_qubits} qubits")));
            }
            mask |= 1 << q;
        }
        Ok(Self { mask, num_qubits })
    }

    pub fn identity(num_qubits: usize) -> Result<Self> {
        Self::new(0, num_qubits)
    }

    /// `Z` on every qubit.
    pub fn all_z(num_qubits: usize) -> Result<Self> {
        check_qubits(num_qubits)?;
        Self::new((1u64 << num_qubits) - 1, num_qubits)
    }

    pub fn bits(&self) -> u64 {
        self.mask
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn is_identity(&self) -> bool {
        self.mask == 0
    }

    pub fn contains(&self, qubit: usize) -> bool {
        (self.mask >> qubit) & 1 == 1
    }

    pub fn qubits(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_qubits).filter(|&q| self.contains(q))
    }

    /// Sub-masks of this mask (every subset of the `Z` positions).
    pub fn submasks(&self) -> Vec<ZMask> {
        let mut out = Vec::with_capacity(1 << self.mask.count_ones());
        let mut sub = self.mask;
        loop {
            out.push(ZMask { mask: sub, num_qubits: self.num_qubits });
            if sub == 0 {
                break;
            }
            sub = (sub - 1) & self.mask;
        }
        out
    }

    /// All `2^Q` masks in canonical order: descending integer encoding, so
    /// for two qubits `ZZ, ZI, IZ, II` with the identity last.
    pub fn canonical(num_qubits: usize) -> impl Iterator<Item = ZMask> {
        let dim = 1u64 << num_qubits;
        (0..dim).map(move |j| ZMask { mask: dim - 1 - j, num_qubits })
    }

    /// Position of this mask in [`ZMask::canonical`] order.
    pub fn canonical_index(&self) -> usize {
        ((1u64 << self.num_qubits) - 1 - self.mask) as usize
    }

    /// Eigenvalue on a raw bitstring encoding, without dimension checks.
    #[inline]
    pub fn sign(&self, outcome: u64) -> f64 {
        parity_sign(self.mask & outcome)
    }
}

impl fmt::Display for ZMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in (0..self.num_qubits).rev() {
            f.write_str(if self.contains(q) { "Z" } else { "I" })?;
        }
        Ok(())
    }
}

impl FromStr for ZMask {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let n = s.chars().count();
        check_qubits(n)?;
        let mut mask = 0;
        for (q, c) in s.chars().rev().enumerate() {
            match c {
                'Z' | 'z' => mask |= 1 << q,
                'I' | 'i' => {}
                other => return Err(Error::Parse(format!("invalid character {other:?} in mask {s:?}"))),
            }
        }
        Ok(Self { mask, num_qubits: n })
    }
}

/// `prod_{q in mask} (-1)^{b_q}`.
pub fn eigenvalue(obs: &ZMask, b: &BitString) -> Result<i8> {
    if obs.num_qubits != b.num_qubits {
        return Err(Error::DimensionMismatch { expected: obs.num_qubits, found: b.num_qubits });
    }
    Ok(if (obs.mask & b.value).count_ones() % 2 == 0 { 1 } else { -1 })
}
