//! Sparse linear operators acting on flattened state vectors.
//!
//! Operators are assembled from triplets, stored in compressed sparse row
//! form, and tagged with the role they play in the semidiscrete system.
//! A [`BlockMeta`] attachment records the four-phase block geometry for
//! operators produced by the phase-coupling assembly, which is what allows
//! an exact transport/exchange split later on.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Role of an operator in the semidiscrete system.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorRole {
    /// Convection-diffusion stiffness of the mobile phase.
    Stiffness,
    /// Reaction (decay-chain) coupling between species.
    Reaction,
    /// Mobile/immobile exchange.
    ExchangeImmobile,
    /// Kinetic sorption exchange.
    ExchangeSorption,
    /// Fully coupled four-phase block operator.
    FullBlock,
}

/// Block geometry of a four-phase operator: `phases * species * cells`
/// unknowns, ordered phase-major, then cell, then species.
///
/// The exchange rates are stored so the exchange part can be rebuilt
/// entry-exactly when splitting the operator.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockMeta {
    pub species: usize,
    pub cells: usize,
    /// Mobile/immobile exchange rate, already divided by porosity.
    pub b1: f64,
    /// Sorption exchange rate, already divided by porosity.
    pub b2: f64,
    /// Retardation factor applied to the mobile row.
    pub retardation: f64,
}

pub const PHASE_COUNT: usize = 4;

/// Sparse matrix in CSR form with a role tag.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearOperator {
    n: usize,
    role: OperatorRole,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    pub(crate) block: Option<BlockMeta>,
}

/// Triplet accumulator; duplicates are summed on `build`.
#[derive(Debug, Clone)]
pub struct OperatorBuilder {
    n: usize,
    role: OperatorRole,
    entries: Vec<(usize, usize, f64)>,
}

impl OperatorBuilder {
    pub fn new(n: usize, role: OperatorRole) -> Self {
        OperatorBuilder {
            n,
            role,
            entries: Vec::new(),
        }
    }

    pub fn add(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.n && col < self.n, "entry out of range");
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn build(mut self) -> LinearOperator {
        // stable sort: duplicate positions accumulate in insertion order,
        // keeping rebuilt operators bit-identical
        self.entries.sort_by_key(|&(r, c, _)| (r, c));
        let mut col_idx: Vec<usize> = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut row_counts = vec![0usize; self.n];
        let mut prev: Option<(usize, usize)> = None;
        for &(r, c, v) in &self.entries {
            if prev == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_counts[r] += 1;
                prev = Some((r, c));
            }
        }
        let mut row_ptr = vec![0usize; self.n + 1];
        for r in 0..self.n {
            row_ptr[r + 1] = row_ptr[r] + row_counts[r];
        }
        LinearOperator {
            n: self.n,
            role: self.role,
            row_ptr,
            col_idx,
            values,
            block: None,
        }
    }
}

impl LinearOperator {
    pub fn zero(n: usize, role: OperatorRole) -> Self {
        OperatorBuilder::new(n, role).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut b = OperatorBuilder::new(n, OperatorRole::Stiffness);
        for i in 0..n {
            b.add(i, i, 1.0);
        }
        b.build()
    }

    pub fn from_dense(m: &DMatrix<f64>, role: OperatorRole) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "operator must be square");
        let mut b = OperatorBuilder::new(m.nrows(), role);
        for r in 0..m.nrows() {
            for c in 0..m.ncols() {
                b.add(r, c, m[(r, c)]);
            }
        }
        b.build()
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn role(&self) -> OperatorRole {
        self.role
    }

    pub fn with_role(mut self, role: OperatorRole) -> Self {
        self.role = role;
        self
    }

    pub fn block_meta(&self) -> Option<&BlockMeta> {
        self.block.as_ref()
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterate stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1])
                .map(move |k| (r, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let lo = self.row_ptr[row];
        let hi = self.row_ptr[row + 1];
        match self.col_idx[lo..hi].binary_search(&col) {
            Ok(k) => self.values[lo + k],
            Err(_) => 0.0,
        }
    }

    /// `y = A x`.
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut y = DVector::zeros(self.n);
        self.apply_into(x.as_slice(), y.as_mut_slice());
        y
    }

    pub fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    /// `y += s * A x`.
    pub fn apply_scaled_add(&self, s: f64, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] += s * acc;
        }
    }

    /// Entrywise sum. Roles are kept from `self`.
    pub fn add(&self, other: &LinearOperator) -> Result<LinearOperator> {
        if self.n != other.n {
            return Err(Error::dim(format!(
                "operator sum: {} vs {}",
                self.n, other.n
            )));
        }
        let mut b = OperatorBuilder::new(self.n, self.role);
        for (r, c, v) in self.entries().chain(other.entries()) {
            b.add(r, c, v);
        }
        let mut out = b.build();
        out.block = self.block.clone().or_else(|| other.block.clone());
        Ok(out)
    }

    /// Entrywise difference `self - other`, kept exact: entries present in
    /// both cancel by subtracting the stored values rather than re-deriving.
    pub fn sub(&self, other: &LinearOperator) -> Result<LinearOperator> {
        if self.n != other.n {
            return Err(Error::dim(format!(
                "operator difference: {} vs {}",
                self.n, other.n
            )));
        }
        let mut b = OperatorBuilder::new(self.n, self.role);
        for (r, c, v) in self.entries() {
            b.add(r, c, v);
        }
        for (r, c, v) in other.entries() {
            b.add(r, c, -v);
        }
        Ok(b.build())
    }

    pub fn scale(&self, s: f64) -> LinearOperator {
        let mut out = self.clone();
        for v in &mut out.values {
            *v *= s;
        }
        out
    }

    /// `I + s * A`, used by the one-step schemes.
    pub fn identity_plus_scaled(&self, s: f64) -> LinearOperator {
        let mut b = OperatorBuilder::new(self.n, self.role);
        for i in 0..self.n {
            b.add(i, i, 1.0);
        }
        for (r, c, v) in self.entries() {
            b.add(r, c, s * v);
        }
        b.build()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.entries() {
            m[(r, c)] += v;
        }
        m
    }

    /// Maximum of `|row - col|` over stored entries.
    pub fn bandwidth(&self) -> usize {
        self.entries()
            .map(|(r, c, _)| r.abs_diff(c))
            .max()
            .unwrap_or(0)
    }

    /// Row-sum infinity norm.
    pub fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|r| {
                self.values[self.row_ptr[r]..self.row_ptr[r + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    /// Column sums, i.e. `A^T 1`. The budget diagnostics use this to turn a
    /// conservation functional into a dot product.
    pub fn column_sums(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.n);
        for (_, c, v) in self.entries() {
            s[c] += v;
        }
        s
    }

    pub fn row_sums(&self) -> DVector<f64> {
        let mut s = DVector::zeros(self.n);
        for (r, _, v) in self.entries() {
            s[r] += v;
        }
        s
    }

    /// Extract the square sub-operator on `rows.start..rows.end`.
    /// Entries coupling outside the range are rejected.
    pub fn diagonal_block(&self, rows: std::ops::Range<usize>) -> Result<LinearOperator> {
        let m = rows.end - rows.start;
        let mut b = OperatorBuilder::new(m, self.role);
        for (r, c, v) in self.entries() {
            if rows.contains(&r) {
                if !rows.contains(&c) {
                    return Err(Error::invalid(format!(
                        "entry ({r},{c}) couples outside block {rows:?}"
                    )));
                }
                b.add(r - rows.start, c - rows.start, v);
            }
        }
        Ok(b.build())
    }

    /// Embed `self` as the diagonal block starting at `offset` of an
    /// `n`-dimensional operator.
    pub fn embed(&self, n: usize, offset: usize, role: OperatorRole) -> LinearOperator {
        assert!(offset + self.n <= n);
        let mut b = OperatorBuilder::new(n, role);
        for (r, c, v) in self.entries() {
            b.add(r + offset, c + offset, v);
        }
        b.build()
    }

    /// Block-diagonal composition of the given operators.
    pub fn block_diag(blocks: &[&LinearOperator], role: OperatorRole) -> LinearOperator {
        let n: usize = blocks.iter().map(|b| b.n).sum();
        let mut bld = OperatorBuilder::new(n, role);
        let mut off = 0;
        for blk in blocks {
            for (r, c, v) in blk.entries() {
                bld.add(off + r, off + c, v);
            }
            off += blk.n;
        }
        bld.build()
    }

    /// True when no two stored entries share a position (guaranteed by the
    /// builder; exposed for assertions in tests).
    pub fn has_unique_positions(&self) -> bool {
        for r in 0..self.n {
            let cols = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
            if cols.windows(2).any(|w| w[0] >= w[1]) {
                return false;
            }
        }
        true
    }

    pub fn max_abs_entry_diff(&self, other: &LinearOperator) -> f64 {
        let mut d = 0.0f64;
        for (r, c, v) in self.entries() {
            d = d.max((v - other.get(r, c)).abs());
        }
        for (r, c, v) in other.entries() {
            d = d.max((v - self.get(r, c)).abs());
        }
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn assembled_types_are_shareable_across_threads() {
        fn assert_send_sync<T: Send + Sync>() {}
        assert_send_sync::<LinearOperator>();
        assert_send_sync::<crate::grid::StructuredGrid>();
        assert_send_sync::<crate::grid::FaceFlux>();
        assert_send_sync::<crate::phases::PhaseState>();
        assert_send_sync::<crate::phases::ModelParams>();
    }

    #[test]
    fn builder_sums_duplicates() {
        let mut b = OperatorBuilder::new(2, OperatorRole::Stiffness);
        b.add(0, 0, 1.0);
        b.add(0, 0, 2.0);
        b.add(1, 0, -1.0);
        let op = b.build();
        assert_eq!(op.get(0, 0), 3.0);
        assert_eq!(op.get(1, 0), -1.0);
        assert_eq!(op.nnz(), 2);
        assert!(op.has_unique_positions());
    }

    #[test]
    fn apply_matches_dense() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, -1.0, 0.0, -1.0, 2.0]);
        let op = LinearOperator::from_dense(&m, OperatorRole::Stiffness);
        let x = DVector::from_vec(vec![1.0, 2.0, 3.0]);
        assert_eq!(op.apply(&x), &m * &x);
    }

    #[test]
    fn sub_cancels_exactly() {
        let mut b = OperatorBuilder::new(2, OperatorRole::Stiffness);
        b.add(0, 1, 0.1);
        b.add(1, 1, -0.3);
        let a = b.build();
        let d = a.sub(&a).unwrap();
        assert_eq!(d.to_dense(), DMatrix::zeros(2, 2));
    }

    #[test]
    fn block_embed_roundtrip() {
        let inner = LinearOperator::from_dense(
            &DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]),
            OperatorRole::Reaction,
        );
        let big = inner.embed(5, 2, OperatorRole::FullBlock);
        let back = big.diagonal_block(2..4).unwrap();
        assert_eq!(back.to_dense(), inner.to_dense());
        assert!(big.diagonal_block(1..3).is_err());
    }

    #[test]
    fn bandwidth_and_norms() {
        let mut b = OperatorBuilder::new(4, OperatorRole::Stiffness);
        b.add(0, 3, 1.0);
        b.add(2, 2, -5.0);
        let op = b.build();
        assert_eq!(op.bandwidth(), 3);
        assert_eq!(op.norm_inf(), 5.0);
        assert_eq!(op.column_sums()[3], 1.0);
    }
}
