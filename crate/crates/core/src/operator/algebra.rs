// SPDX-License-Identifier: Apache-2.0

use std::ops::Range;

use super::{Operator, ZERO};
use crate::error::{Error, Result};

const BASIS_TOL: f64 = 1e-10;

/// The algebra of operators that are block diagonal in a fixed orthonormal
/// basis: `{ V b V† : b block diagonal }`, with `V = basis_change`.
///
/// Columns of `basis_change` are the basis vectors; `blocks` partitions the
/// column indices into contiguous ranges.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockAlgebra {
    basis_change: Operator,
    blocks: Vec<Range<usize>>,
    identity_basis: bool,
}

impl BlockAlgebra {
    pub fn new(basis_change: Operator, block_sizes: &[usize]) -> Result<Self> {
        let dim = basis_change.dim();
        if block_sizes.contains(&0) {
            return Err(Error::InvalidPartition("empty block".into()));
        }
        let total: usize = block_sizes.iter().sum();
        if total != dim {
            return Err(Error::InvalidPartition(format!(
                "block sizes sum to {total}, dimension is {dim}"
            )));
        }
        let defect = basis_change.unitary_defect();
        if defect > BASIS_TOL {
            return Err(Error::NotUnitary { defect });
        }
        let mut blocks = Vec::with_capacity(block_sizes.len());
        let mut start = 0;
        for &size in block_sizes {
            blocks.push(start..start + size);
            start += size;
        }
        let identity_basis = basis_change.max_abs_diff(&Operator::identity(dim)) == 0.0;
        Ok(Self {
            basis_change,
            blocks,
            identity_basis,
        })
    }

    /// The full matrix algebra.
    pub fn full(dim: usize) -> Self {
        Self::new(Operator::identity(dim), &[dim]).expect("single block")
    }

    /// The maximal abelian algebra of operators diagonal in `basis_change`.
    pub fn diagonal_in(basis_change: Operator) -> Result<Self> {
        let dim = basis_change.dim();
        Self::new(basis_change, &vec![1; dim])
    }

    /// Block-diagonal matrices in the standard basis.
    pub fn standard(block_sizes: &[usize]) -> Result<Self> {
        let dim = block_sizes.iter().sum::<usize>().max(1);
        Self::new(Operator::identity(dim), block_sizes)
    }

    pub fn dim(&self) -> usize {
        self.basis_change.dim()
    }

    pub fn blocks(&self) -> &[Range<usize>] {
        &self.blocks
    }

    pub fn block_sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(|r| r.len()).collect()
    }

    pub fn basis_change(&self) -> &Operator {
        &self.basis_change
    }

    pub fn is_full(&self) -> bool {
        self.blocks.len() == 1
    }

    /// Projections onto the block subspaces, in the original basis. These
    /// generate the centre of the algebra.
    pub fn block_projections(&self) -> Vec<Operator> {
        let dim = self.dim();
        self.blocks
            .iter()
            .map(|r| {
                let mut diag = vec![0.0; dim];
                for i in r.clone() {
                    diag[i] = 1.0;
                }
                self.to_standard_basis(&Operator::diagonal(&diag))
            })
            .collect()
    }

    fn to_block_basis(&self, a: &Operator) -> Operator {
        if self.identity_basis {
            a.clone()
        } else {
            &(&self.basis_change.adjoint() * a) * &self.basis_change
        }
    }

    fn to_standard_basis(&self, b: &Operator) -> Operator {
        if self.identity_basis {
            b.clone()
        } else {
            &(&self.basis_change * b) * &self.basis_change.adjoint()
        }
    }

    /// Conditional expectation onto the algebra (the trace-preserving
    /// compression onto its blocks).
    pub fn pinch(&self, a: &Operator) -> Result<Operator> {
        a.check_dim(self.dim())?;
        if self.is_full() {
            return Ok(a.clone());
        }
        let mut m = self.to_block_basis(a).into_matrix();
        let dim = self.dim();
        let owner = self.block_owner();
        for i in 0..dim {
            for j in 0..dim {
                if owner[i] != owner[j] {
                    m[(i, j)] = ZERO;
                }
            }
        }
        Ok(self.to_standard_basis(&Operator::from_matrix(m)))
    }

    /// Whether `a` lies in the algebra within `tol` (entrywise).
    pub fn contains(&self, a: &Operator, tol: f64) -> bool {
        self.pinch(a)
            .map(|p| p.max_abs_diff(a) <= tol)
            .unwrap_or(false)
    }

    /// Whether every block of `self` sits inside a block of `coarser`, given a
    /// shared basis. Finer partitions give smaller algebras.
    pub fn refines(&self, coarser: &BlockAlgebra) -> bool {
        if self.dim() != coarser.dim()
            || self.basis_change.max_abs_diff(&coarser.basis_change) > BASIS_TOL
        {
            return false;
        }
        self.blocks.iter().all(|b| {
            coarser
                .blocks
                .iter()
                .any(|c| c.start <= b.start && b.end <= c.end)
        })
    }

    /// Largest operator norm of `[a, e]` over the matrix units `e` of the
    /// algebra. Zero exactly when `a` lies in the commutant.
    pub fn commutant_defect(&self, a: &Operator) -> Result<f64> {
        a.check_dim(self.dim())?;
        let b = self.to_block_basis(a);
        let m = b.matrix();
        let dim = self.dim();
        let mut worst = 0.0_f64;
        for r in &self.blocks {
            for i in r.clone() {
                for j in r.clone() {
                    // [b, E_ij] has column j equal to b[:, i] and row i equal
                    // to -b[j, :], overlapping at (i, j).
                    let mut c = nalgebra::DMatrix::<super::C64>::zeros(dim, dim);
                    for k in 0..dim {
                        c[(k, j)] += m[(k, i)];
                        c[(i, k)] -= m[(j, k)];
                    }
                    worst = worst.max(Operator::from_matrix(c).operator_norm());
                }
            }
        }
        Ok(worst)
    }

    fn block_owner(&self) -> Vec<usize> {
        let mut owner = vec![0; self.dim()];
        for (k, r) in self.blocks.iter().enumerate() {
            for i in r.clone() {
                owner[i] = k;
            }
        }
        owner
    }
}

/// `pinch(a, alg)`: block-diagonal part of `a` with respect to `alg`.
pub fn pinch(a: &Operator, alg: &BlockAlgebra) -> Result<Operator> {
    alg.pinch(a)
}

/// A decreasing family of block algebras indexed by time: the algebra at a
/// later time is contained in the algebra at an earlier time.
#[derive(Debug, Clone)]
pub struct Filtration {
    entries: Vec<(f64, BlockAlgebra)>,
}

impl Filtration {
    pub fn new(entries: Vec<(f64, BlockAlgebra)>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::EmptyGrid);
        }
        for w in entries.windows(2) {
            let (t0, a0) = &w[0];
            let (t1, a1) = &w[1];
            if t1 <= t0 {
                return Err(Error::InvalidFiltration(format!(
                    "times {t0} and {t1} are not increasing"
                )));
            }
            if !a1.refines(a0) {
                return Err(Error::InvalidFiltration(format!(
                    "partition at t = {t1} does not refine partition at t = {t0}"
                )));
            }
        }
        Ok(Self { entries })
    }

    /// A filtration that is the full algebra at every time.
    pub fn constant_full(dim: usize, time: f64) -> Self {
        Self {
            entries: vec![(time, BlockAlgebra::full(dim))],
        }
    }

    pub fn entries(&self) -> &[(f64, BlockAlgebra)] {
        &self.entries
    }

    /// The algebra in force at time `t`: the latest entry not after `t`.
    /// Times before the first entry get the first (largest) algebra.
    pub fn algebra_at(&self, t: f64) -> &BlockAlgebra {
        let tol = 1e-9 * t.abs().max(1.0);
        let mut current = &self.entries[0].1;
        for (time, alg) in &self.entries {
            if *time <= t + tol {
                current = alg;
            } else {
                break;
            }
        }
        current
    }
}
