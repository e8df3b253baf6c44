//! Direct linear solves for the implicit time steps.
//!
//! Implicit Runge-Kutta steps on the structured grid lead to banded systems
//! (bandwidth `species * nx` for the phase blocks), so a banded LU with
//! partial pivoting covers every large solve exactly. Small or unbanded
//! systems fall back to a dense factorization.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::operator::LinearOperator;

/// LU factorization of a banded matrix in column-major band storage with
/// `kl` subdiagonals and `ku` superdiagonals. Partial pivoting widens the
/// upper band to `kl + ku`.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    /// Factor a sparse operator whose entries satisfy `|row - col| <= band`.
    pub fn factor(op: &LinearOperator, kl: usize, ku: usize) -> Result<Self> {
        let n = op.dim();
        let kv = kl + ku;
        let ldab = kv + kl + 1;
        let mut ab = vec![0.0f64; ldab * n];
        for (i, j, v) in op.entries() {
            if j + kl < i || i + ku < j {
                return Err(Error::invalid(format!(
                    "entry ({i},{j}) outside band kl={kl}, ku={ku}"
                )));
            }
            ab[j * ldab + (kv + i) - j] += v;
        }

        let mut ipiv = vec![0usize; n];
        for k in 0..n {
            let pmax = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = ab[k * ldab + kv].abs();
            for i in (k + 1)..=pmax {
                let a = ab[k * ldab + kv + i - k].abs();
                if a > best {
                    best = a;
                    piv = i;
                }
            }
            if best == 0.0 {
                return Err(Error::LinearSolve(format!(
                    "banded LU: zero pivot at column {k}"
                )));
            }
            ipiv[k] = piv;
            let jmax = (k + kv).min(n - 1);
            if piv != k {
                for j in k..=jmax {
                    ab.swap(j * ldab + kv + k - j, j * ldab + kv + piv - j);
                }
            }
            let akk = ab[k * ldab + kv];
            for i in (k + 1)..=pmax {
                let m = ab[k * ldab + kv + i - k] / akk;
                ab[k * ldab + kv + i - k] = m;
                if m != 0.0 {
                    for j in (k + 1)..=jmax {
                        ab[j * ldab + kv + i - j] -= m * ab[j * ldab + kv + k - j];
                    }
                }
            }
        }

        Ok(BandedLu {
            n,
            kl,
            ku,
            ldab,
            ab,
            ipiv,
        })
    }

    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let kv = self.kl + self.ku;
        for k in 0..self.n {
            let p = self.ipiv[k];
            if p != k {
                b.swap(k, p);
            }
            let imax = (k + self.kl).min(self.n - 1);
            let bk = b[k];
            for i in (k + 1)..=imax {
                b[i] -= self.ab[k * self.ldab + kv + i - k] * bk;
            }
        }
        for k in (0..self.n).rev() {
            let jmax = (k + kv).min(self.n - 1);
            let mut acc = b[k];
            for j in (k + 1)..=jmax {
                acc -= self.ab[j * self.ldab + kv + k - j] * b[j];
            }
            b[k] = acc / self.ab[k * self.ldab + kv];
        }
    }

    pub fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        let mut x = b.clone();
        self.solve_in_place(x.as_mut_slice());
        x
    }
}

/// Factorization of a sparse operator, banded when the band is narrow
/// enough to pay off and dense otherwise.
#[derive(Debug)]
pub enum DirectSolver {
    Dense(nalgebra::linalg::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
    Banded(BandedLu),
}

/// Largest dimension accepted for a dense fallback factorization.
pub const DENSE_SOLVE_LIMIT: usize = 4096;

impl DirectSolver {
    pub fn factor(op: &LinearOperator) -> Result<Self> {
        let n = op.dim();
        if n == 0 {
            return Err(Error::invalid("cannot factor empty operator"));
        }
        let bw = op.bandwidth();
        if n > 512 && 3 * bw < n {
            return Ok(DirectSolver::Banded(BandedLu::factor(op, bw, bw)?));
        }
        if n <= DENSE_SOLVE_LIMIT {
            let lu = nalgebra::linalg::LU::new(op.to_dense());
            if lu.u().diagonal().amin() == 0.0 {
                return Err(Error::LinearSolve("singular dense system".into()));
            }
            return Ok(DirectSolver::Dense(lu));
        }
        if bw <= n / 2 {
            return Ok(DirectSolver::Banded(BandedLu::factor(op, bw, bw)?));
        }
        Err(Error::LinearSolve(format!(
            "system of dimension {n} with bandwidth {bw} is too large for a direct solve"
        )))
    }

    pub fn solve(&self, rhs: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            DirectSolver::Dense(lu) => lu
                .solve(rhs)
                .ok_or_else(|| Error::LinearSolve("singular dense system".into())),
            DirectSolver::Banded(blu) => Ok(blu.solve(rhs)),
        }
    }
}
