// SPDX-License-Identifier: Apache-2.0

use nalgebra::DVector;

use super::{spectral_decompose, Operator, C64};
use crate::error::{Error, Result};

const STATE_TOL: f64 = 1e-12;

/// A density matrix: Hermitian, positive semidefinite, unit trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityState {
    rho: Operator,
}

impl DensityState {
    pub fn new(rho: Operator) -> Result<Self> {
        let asym = rho.hermitian_defect();
        if asym > STATE_TOL {
            return Err(Error::InvalidState(format!(
                "density matrix not Hermitian (defect {asym:e})"
            )));
        }
        let tr = rho.trace();
        if (tr.re - 1.0).abs() > STATE_TOL || tr.im.abs() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace is {tr}, not 1")));
        }
        let rho = rho.hermitian_part();
        let min_eig = spectral_decompose(&rho, 0.0)?
            .eigenvalues()
            .last()
            .copied()
            .unwrap_or(0.0);
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidState(format!(
                "negative eigenvalue {min_eig:e}"
            )));
        }
        Ok(Self { rho })
    }

    /// For operators that are a density matrix up to roundoff: symmetrizes and
    /// renormalizes without re-running the positivity check.
    pub(crate) fn from_trusted(rho: Operator) -> Self {
        let rho = rho.hermitian_part();
        let tr = rho.trace().re;
        Self {
            rho: rho.scale_real(1.0 / tr),
        }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self {
            rho: Operator::identity(dim).scale_real(1.0 / dim as f64),
        }
    }

    pub fn diagonal(weights: &[f64]) -> Result<Self> {
        if weights.iter().any(|&w| !w.is_finite() || w < -STATE_TOL) {
            return Err(Error::InvalidState("negative diagonal weight".into()));
        }
        Self::new(Operator::diagonal(weights))
    }

    /// Pure state `|ψ⟩⟨ψ|`; the vector is normalized internally.
    pub fn pure(vector: &[C64]) -> Result<Self> {
        let p = Operator::projector(vector).map_err(|_| Error::InvalidState("zero vector".into()))?;
        Ok(Self { rho: p })
    }

    /// Pure state from real amplitudes.
    pub fn pure_real(vector: &[f64]) -> Result<Self> {
        let v: Vec<C64> = vector.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::pure(&v)
    }

    /// Basis state `|index⟩⟨index|`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(Error::IndexOutOfRange(format!("basis index {index} >= {dim}")));
        }
        let mut v = DVector::<C64>::zeros(dim);
        v[index] = C64::new(1.0, 0.0);
        Self::pure(v.as_slice())
    }

    pub fn rho(&self) -> &Operator {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.dim()
    }

    /// `ω(a) = trace(ρ a)`.
    pub fn expect(&self, a: &Operator) -> C64 {
        self.rho.trace_product(a)
    }

    /// Real part of `ω(a)`, for positive `a`.
    pub fn probability(&self, a: &Operator) -> f64 {
        self.expect(a).re
    }

    /// Smallest eigenvalue of ρ.
    pub fn min_eigenvalue(&self) -> f64 {
        spectral_decompose(&self.rho, 0.0)
            .map(|o| o.eigenvalues().last().copied().unwrap_or(0.0))
            .unwrap_or(f64::NAN)
    }

    pub(crate) fn check_dim(&self, expected: usize) -> Result<()> {
        self.rho.check_dim(expected)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_wrong_trace_and_negativity() {
        assert!(DensityState::new(Operator::identity(2)).is_err());
        assert!(DensityState::new(Operator::diagonal(&[1.5, -0.5])).is_err());
    }

    #[test]
    fn pure_state_expectation() {
        let s = DensityState::pure_real(&[1.0, 1.0]).unwrap();
        assert!((s.expect(&Operator::pauli_x()).re - 1.0).abs() < 1e-15);
        assert!(s.min_eigenvalue().abs() < 1e-15);
    }
}
