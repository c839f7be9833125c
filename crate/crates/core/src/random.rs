// SPDX-License-Identifier: Apache-2.0

//! Seeded random instances for tests, benchmarks and the oracle scenarios.

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::classical::{ClassicalModel, ClassicalState};
use crate::histories::{HistoryFamily, ProjectiveResolution};
use crate::ndm::NdmModel;
use crate::operator::{DensityState, Operator, C64};

fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    })
}

/// Haar-distributed unitary (QR of a Ginibre matrix with phases fixed).
pub fn unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    let qr = ginibre(dim, rng).qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..dim {
            q[(i, j)] *= phase;
        }
    }
    Operator::new(q).expect("finite")
}

/// Hermitian matrix with Gaussian entries.
pub fn hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Operator {
    Operator::new(ginibre(dim, rng)).expect("finite").hermitian_part()
}

/// Full-rank density matrix: a normalized Wishart matrix mixed with 5% of
/// the maximally mixed state.
pub fn full_rank_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityState {
    let g = Operator::new(ginibre(dim, rng)).expect("finite");
    let w = &g * &g.adjoint();
    let w = w.scale_real(0.95 / w.trace().re);
    let rho = &w + &Operator::identity(dim).scale_real(0.05 / dim as f64);
    DensityState::new(rho.hermitian_part()).expect("positive by construction")
}

/// Probability vector with the given length, drawn uniformly from the simplex.
pub fn distribution<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Vec<f64> {
    let e: Vec<f64> = (0..len).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

/// Random surjective assignment of `dim` items to `parts` groups.
pub fn partition<R: Rng + ?Sized>(dim: usize, parts: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let parts = parts.clamp(1, dim);
    let mut items: Vec<usize> = (0..dim).collect();
    items.shuffle(rng);
    let mut groups: Vec<Vec<usize>> = items[..parts].iter().map(|&i| vec![i]).collect();
    for &i in &items[parts..] {
        let g = rng.gen_range(0..parts);
        groups[g].push(i);
    }
    for g in &mut groups {
        g.sort_unstable();
    }
    groups
}

/// Resolution into `parts` projections built from groups of columns of
/// `basis`.
pub fn resolution_in_basis<R: Rng + ?Sized>(basis: &Operator, parts: usize, rng: &mut R) -> ProjectiveResolution {
    let dim = basis.dim();
    let m = basis.matrix();
    let projections = partition(dim, parts, rng)
        .into_iter()
        .map(|cols| {
            let mut p = DMatrix::<C64>::zeros(dim, dim);
            for c in cols {
                let v = m.column(c);
                p += v * v.adjoint();
            }
            Operator::new(p).expect("finite").hermitian_part()
        })
        .collect();
    ProjectiveResolution::new("random", projections).expect("orthogonal by construction")
}

pub fn resolution<R: Rng + ?Sized>(dim: usize, parts: usize, rng: &mut R) -> ProjectiveResolution {
    let u = unitary(dim, rng);
    resolution_in_basis(&u, parts, rng)
}

/// Family whose slots are all coarse-grainings of one random basis, at
/// times `0, 1, …`, so every pair of projections commutes.
pub fn commuting_family<R: Rng + ?Sized>(dim: usize, slots: usize, max_parts: usize, rng: &mut R) -> HistoryFamily {
    let u = unitary(dim, rng);
    let slots = (0..slots)
        .map(|i| {
            let parts = rng.gen_range(1..=max_parts.clamp(1, dim));
            (i as f64, resolution_in_basis(&u, parts, rng))
        })
        .collect();
    HistoryFamily::new(slots).expect("valid slots")
}

/// Generic family: each slot uses its own random basis.
pub fn family<R: Rng + ?Sized>(dim: usize, slots: usize, max_parts: usize, rng: &mut R) -> HistoryFamily {
    let slots = (0..slots)
        .map(|i| {
            let parts = rng.gen_range(1..=max_parts.clamp(1, dim));
            (i as f64, resolution(dim, parts, rng))
        })
        .collect();
    HistoryFamily::new(slots).expect("valid slots")
}

pub fn permutation<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<usize> {
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

/// Classical model on `n` points with `steps` random permutations on the
/// grid `0, 1, …, steps`, and `events` random non-empty events named
/// `e0, e1, …`, each with its complement named `e0^c, e1^c, …`.
pub fn classical_model<R: Rng + ?Sized>(n: usize, steps: usize, events: usize, rng: &mut R) -> ClassicalModel {
    let grid: Vec<f64> = (0..=steps).map(|i| i as f64).collect();
    let perms = (0..steps).map(|_| permutation(n, rng)).collect();
    let mut table = Vec::with_capacity(2 * events);
    for e in 0..events {
        let size = rng.gen_range(1..=n);
        let mut pts = permutation(n, rng);
        let rest = pts.split_off(size);
        table.push((format!("e{e}"), pts));
        table.push((format!("e{e}^c"), rest));
    }
    ClassicalModel::new(n, grid, perms, table).expect("valid by construction")
}

pub fn classical_state<R: Rng + ?Sized>(n: usize, rng: &mut R) -> ClassicalState {
    ClassicalState::new(distribution(n, rng)).expect("normalized")
}

/// Non-demolition model with a computational-basis system, random probe
/// state, unitaries and read-out resolution.
pub fn ndm_model<R: Rng + ?Sized>(levels: usize, probe_dim: usize, outcomes: usize, rng: &mut R) -> NdmModel {
    let probe = full_rank_state(probe_dim, rng);
    let unitaries = (0..levels).map(|_| unitary(probe_dim, rng)).collect();
    NdmModel::new(
        ProjectiveResolution::computational(levels),
        probe,
        unitaries,
        resolution(probe_dim, outcomes, rng),
    )
    .expect("valid by construction")
}
