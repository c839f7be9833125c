// SPDX-License-Identifier: Apache-2.0

use nalgebra::{DMatrix, SymmetricEigen};

use super::{Operator, C64};
use crate::error::{Error, Result};

/// Eigenvalues closer than this are merged into one eigenprojection unless
/// the caller asks otherwise.
pub const DEFAULT_CLUSTER_TOL: f64 = 1e-8;

const HERMITIAN_TOL: f64 = 1e-12;
const EIGEN_MAX_ITER: usize = 10_000;

/// One eigenvalue together with its (possibly degenerate) eigenprojection.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralComponent {
    pub eigenvalue: f64,
    pub projection: Operator,
    pub rank: usize,
}

/// A Hermitian operator with its spectral resolution `a = Σ α_i Π_i`.
///
/// Eigenvalues are strictly decreasing; the projections are mutually
/// orthogonal and sum to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    op: Operator,
    spectrum: Vec<SpectralComponent>,
}

impl Observable {
    pub fn new(op: Operator) -> Result<Self> {
        spectral_decompose(&op, DEFAULT_CLUSTER_TOL)
    }

    pub fn op(&self) -> &Operator {
        &self.op
    }

    pub fn spectrum(&self) -> &[SpectralComponent] {
        &self.spectrum
    }

    pub fn len(&self) -> usize {
        self.spectrum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spectrum.is_empty()
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.spectrum.iter().map(|c| c.eigenvalue).collect()
    }

    pub fn projections(&self) -> Vec<Operator> {
        self.spectrum.iter().map(|c| c.projection.clone()).collect()
    }

    /// `Σ α_i Π_i`.
    pub fn reconstruct(&self) -> Operator {
        self.spectrum
            .iter()
            .map(|c| c.projection.scale_real(c.eigenvalue))
            .sum()
    }

    /// Smallest gap between distinct eigenvalues, `+∞` for a single one.
    pub fn min_gap(&self) -> f64 {
        self.spectrum
            .windows(2)
            .map(|w| w[0].eigenvalue - w[1].eigenvalue)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Eigen-decomposes a Hermitian operator and clusters eigenvalues that lie
/// within `cluster_tol` of their neighbour.
///
/// Clustering chains: a run of eigenvalues each within `cluster_tol` of the
/// next forms one component whose eigenvalue is the run's mean.
pub fn spectral_decompose(op: &Operator, cluster_tol: f64) -> Result<Observable> {
    let scale = op.max_abs().max(1.0);
    let max_asymmetry = op.hermitian_defect();
    if max_asymmetry > HERMITIAN_TOL * scale {
        return Err(Error::NotHermitian { max_asymmetry });
    }
    let cluster_tol = cluster_tol.max(0.0);
    let n = op.dim();
    let sym = op.hermitian_part();
    let eig = SymmetricEigen::try_new(sym.into_matrix(), f64::EPSILON, EIGEN_MAX_ITER)
        .ok_or(Error::DecompositionFailure)?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut spectrum = Vec::new();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n
            && eig.eigenvalues[order[end - 1]] - eig.eigenvalues[order[end]] <= cluster_tol
        {
            end += 1;
        }
        let members = &order[start..end];
        let mean = members.iter().map(|&k| eig.eigenvalues[k]).sum::<f64>() / members.len() as f64;
        let mut proj = DMatrix::<C64>::zeros(n, n);
        for &k in members {
            let v = eig.eigenvectors.column(k);
            proj += v * v.adjoint();
        }
        spectrum.push(SpectralComponent {
            eigenvalue: mean,
            projection: Operator::from_matrix(proj).hermitian_part(),
            rank: members.len(),
        });
        start = end;
    }

    Ok(Observable {
        op: op.clone(),
        spectrum,
    })
}
