// SPDX-License-Identifier: Apache-2.0

//! Dense complex operators on finite-dimensional Hilbert spaces.
//!
//! Everything in the crate is built on [`Operator`], a thin newtype over a
//! square `nalgebra` matrix of `Complex<f64>`. The submodules add spectral
//! resolutions ([`Observable`]), density matrices ([`DensityState`]),
//! propagator families ([`Evolution`]) and block-diagonal subalgebras
//! ([`BlockAlgebra`], [`Filtration`]) used for conditional expectations.

mod algebra;
mod evolution;
mod spectral;
mod state;

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex;

use crate::error::{Error, Result};

pub use algebra::{pinch, BlockAlgebra, Filtration};
pub use evolution::{heisenberg, Evolution};
pub use spectral::{spectral_decompose, Observable, SpectralComponent, DEFAULT_CLUSTER_TOL};
pub use state::DensityState;

pub type C64 = Complex<f64>;

pub(crate) const ZERO: C64 = C64 { re: 0.0, im: 0.0 };

/// Default upper bound on Hilbert-space dimension accepted by constructors
/// that build operators from user input.
pub const MAX_DIM: usize = 64;

/// A square complex matrix with finite entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Operator(DMatrix<C64>);

impl Operator {
    pub fn new(matrix: DMatrix<C64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: matrix.ncols(),
            });
        }
        if matrix.nrows() == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        if matrix.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(matrix))
    }

    /// Internal constructor for matrices produced by arithmetic on valid
    /// operators.
    pub(crate) fn from_matrix(matrix: DMatrix<C64>) -> Self {
        debug_assert_eq!(matrix.nrows(), matrix.ncols());
        Self(matrix)
    }

    /// Builds an operator from row-major complex entries.
    pub fn from_rows(dim: usize, entries: &[C64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                found: entries.len(),
            });
        }
        Self::new(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// Builds an operator from row-major real entries.
    pub fn from_real_rows(dim: usize, entries: &[f64]) -> Result<Self> {
        let complex: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(dim, &complex)
    }

    pub fn identity(dim: usize) -> Self {
        Self(DMatrix::identity(dim, dim))
    }

    pub fn zeros(dim: usize) -> Self {
        Self(DMatrix::zeros(dim, dim))
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let d = DVector::from_iterator(values.len(), values.iter().map(|&x| C64::new(x, 0.0)));
        Self(DMatrix::from_diagonal(&d))
    }

    /// Rank-one projector onto the span of `vector` (normalized internally).
    pub fn projector(vector: &[C64]) -> Result<Self> {
        let v = DVector::from_column_slice(vector);
        let norm = v.norm();
        if !norm.is_finite() || norm <= 0.0 {
            return Err(Error::InvalidResolution(
                "cannot project onto a zero vector".into(),
            ));
        }
        let v = v / C64::new(norm, 0.0);
        Ok(Self(&v * v.adjoint()))
    }

    pub fn pauli_x() -> Self {
        Self::from_real_rows(2, &[0.0, 1.0, 1.0, 0.0]).expect("static matrix")
    }

    pub fn pauli_y() -> Self {
        let i = C64::new(0.0, 1.0);
        Self::from_rows(2, &[ZERO, -i, i, ZERO]).expect("static matrix")
    }

    pub fn pauli_z() -> Self {
        Self::diagonal(&[1.0, -1.0])
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.0
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.0[(row, col)]
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, factor: C64) -> Self {
        Self(&self.0 * factor)
    }

    pub fn scale_real(&self, factor: f64) -> Self {
        Self(&self.0 * C64::new(factor, 0.0))
    }

    /// `trace(self · other)` without forming the product.
    pub fn trace_product(&self, other: &Operator) -> C64 {
        let n = self.dim();
        let mut acc = ZERO;
        for i in 0..n {
            for j in 0..n {
                acc += self.0[(i, j)] * other.0[(j, i)];
            }
        }
        acc
    }

    pub fn commutator(&self, other: &Operator) -> Operator {
        Self(&self.0 * &other.0 - &other.0 * &self.0)
    }

    pub fn kron(&self, other: &Operator) -> Operator {
        Self(self.0.kronecker(&other.0))
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.0.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - self†`.
    pub fn hermitian_defect(&self) -> f64 {
        let n = self.dim();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in i..n {
                worst = worst.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.hermitian_defect() <= tol
    }

    /// `(a + a†)/2`, used to remove roundoff asymmetry.
    pub fn hermitian_part(&self) -> Operator {
        Self((&self.0 + self.0.adjoint()) * C64::new(0.5, 0.0))
    }

    /// Largest entrywise modulus of `U†U - 1`.
    pub fn unitary_defect(&self) -> f64 {
        let prod = self.0.adjoint() * &self.0;
        Operator(prod).max_abs_diff(&Operator::identity(self.dim()))
    }

    pub fn is_unitary(&self, tol: f64) -> bool {
        self.unitary_defect() <= tol
    }

    /// Largest of the Hermiticity and idempotence defects.
    pub fn projection_defect(&self) -> f64 {
        let sq = Operator(&self.0 * &self.0);
        self.hermitian_defect().max(sq.max_abs_diff(self))
    }

    pub fn singular_values(&self) -> Vec<f64> {
        self.0.clone().singular_values().iter().copied().collect()
    }

    /// Operator norm (largest singular value).
    pub fn operator_norm(&self) -> f64 {
        self.singular_values().into_iter().fold(0.0, f64::max)
    }

    /// Trace norm (sum of singular values).
    pub fn trace_norm(&self) -> f64 {
        self.singular_values().into_iter().sum()
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        if self.dim() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: self.dim(),
            });
        }
        Ok(())
    }
}

/// Sum of singular values of `a`.
pub fn trace_norm(a: &Operator) -> f64 {
    a.trace_norm()
}

/// Largest singular value of `a`.
pub fn operator_norm(a: &Operator) -> f64 {
    a.operator_norm()
}

/// Ordered product `ops[last] · … · ops[0]`, i.e. the first element acts
/// first.
pub fn ordered_product<'a, I>(dim: usize, ops: I) -> Operator
where
    I: IntoIterator<Item = &'a Operator>,
{
    let mut acc = DMatrix::identity(dim, dim);
    for op in ops {
        acc = &op.0 * acc;
    }
    Operator(acc)
}

impl<'a> Mul<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn mul(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 * &rhs.0)
    }
}

impl<'a> Add<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn add(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 + &rhs.0)
    }
}

impl<'a> Sub<&'a Operator> for &'a Operator {
    type Output = Operator;
    fn sub(self, rhs: &'a Operator) -> Operator {
        Operator(&self.0 - &rhs.0)
    }
}

impl Neg for &Operator {
    type Output = Operator;
    fn neg(self) -> Operator {
        Operator(-&self.0)
    }
}

impl std::iter::Sum for Operator {
    fn sum<I: Iterator<Item = Operator>>(mut iter: I) -> Operator {
        let first = iter
            .next()
            .expect("sum of operators requires at least one term");
        iter.fold(first, |acc, op| Operator(acc.0 + op.0))
    }
}
