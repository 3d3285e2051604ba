//! Dense LU factorization with partial pivoting for the small systems that
//! appear in mitigation (at most a few hundred unknowns).

use crate::error::{Error, Result};

/// Largest acceptable 1-norm condition number before a solve is refused.
pub const MAX_CONDITION: f64 = 1e12;

/// `P A = L U`, with `L` unit lower triangular, packed into one matrix.
#[derive(Debug, Clone)]
pub struct LuDecomposition {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
    condition: f64,
}

fn norm_1(a: &[f64], n: usize) -> f64 {
    (0..n).map(|c| (0..n).map(|r| a[r * n + c].abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl LuDecomposition {
    /// Factorizes the row-major `n x n` matrix `a` and estimates its
    /// condition number from the explicit inverse. Singular or
    /// ill-conditioned matrices (condition above [`MAX_CONDITION`]) are
    /// rejected.
    pub fn new(a: &[f64], n: usize) -> Result<Self> {
        assert_eq!(a.len(), n * n, "matrix must be square");
        let mut lu = a.to_vec();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let pivot_row = (k..n)
                .max_by(|&i, &j| lu[i * n + k].abs().total_cmp(&lu[j * n + k].abs()))
                .expect("non-empty range");
            let pivot = lu[pivot_row * n + k];
            if pivot == 0.0 || !pivot.is_finite() {
                return Err(Error::SingularMatrix { condition: f64::INFINITY });
            }
            if pivot_row != k {
                for c in 0..n {
                    lu.swap(k * n + c, pivot_row * n + c);
                }
                perm.swap(k, pivot_row);
            }
            for r in k + 1..n {
                let f = lu[r * n + k] / pivot;
                lu[r * n + k] = f;
                if f != 0.0 {
                    for c in k + 1..n {
                        lu[r * n + c] -= f * lu[k * n + c];
                    }
                }
            }
        }
        let mut dec = Self { n, lu, perm, condition: 0.0 };
        let inv = dec.inverse_unchecked();
        let condition = norm_1(a, n) * norm_1(&inv, n);
        if !condition.is_finite() || condition > MAX_CONDITION {
            return Err(Error::SingularMatrix { condition });
        }
        dec.condition = condition;
        Ok(dec)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// `||A||_1 ||A^-1||_1`.
    pub fn condition(&self) -> f64 {
        self.condition
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(b.len(), n, "right-hand side has wrong length");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for r in 0..n {
            let s: f64 = (0..r).map(|c| self.lu[r * n + c] * x[c]).sum();
            x[r] -= s;
        }
        for r in (0..n).rev() {
            let s: f64 = (r + 1..n).map(|c| self.lu[r * n + c] * x[c]).sum();
            x[r] = (x[r] - s) / self.lu[r * n + r];
        }
        x
    }

    fn inverse_unchecked(&self) -> Vec<f64> {
        let n = self.n;
        let mut inv = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for c in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[c] = 1.0;
            for (r, v) in self.solve(&e).into_iter().enumerate() {
                inv[r * n + c] = v;
            }
        }
        inv
    }

    /// Row-major `A^-1`.
    pub fn inverse(&self) -> Vec<f64> {
        self.inverse_unchecked()
    }
}
