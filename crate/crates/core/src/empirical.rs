// SPDX-License-Identifier: Apache-2.0

//! Central decomposition of a state restricted to a block algebra, the two
//! conditional expectations it induces, the variance `Δ` of an observable,
//! and the measurement diagnostics built on them.
//!
//! With `ρ_B` the restriction (pinching) of `ρ` to the algebra and
//! `ρ_B = Σ_λ p_λ Π_λ` its spectral decomposition, the conditional
//! expectation onto the centralizer is `ε(a) = Σ_λ Π_λ a Π_λ` and the one onto
//! its centre is `a^ω = Σ_λ ā^λ Π_λ` with `ā^λ = trace(Π_λ a)/n_λ`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{
    heisenberg, spectral_decompose, BlockAlgebra, DensityState, Evolution, Filtration, Observable,
    Operator, DEFAULT_CLUSTER_TOL,
};
use crate::povm::{sequential_elements, validate_povm, PovmFamily, PovmValidation};

/// Weights at or below this mark a state that is not separating for the
/// algebra.
pub const SEPARATING_TOL: f64 = 1e-12;

/// One eigenvalue `p_λ` of the restricted density matrix, its eigenprojection
/// and multiplicity.
#[derive(Debug, Clone, PartialEq)]
pub struct CentralBlock {
    pub weight: f64,
    pub projection: Operator,
    pub multiplicity: usize,
}

/// `ρ_B = Σ_λ p_λ Π_λ` with `p_λ` strictly decreasing.
#[derive(Debug, Clone)]
pub struct CentralDecomposition {
    blocks: Vec<CentralBlock>,
    restricted: Operator,
    not_separating: bool,
}

impl CentralDecomposition {
    pub fn blocks(&self) -> &[CentralBlock] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.restricted.dim()
    }

    /// The restricted density matrix `ρ_B`.
    pub fn restricted(&self) -> &Operator {
        &self.restricted
    }

    /// Set when some `p_λ` is at most [`SEPARATING_TOL`]: the state is not
    /// faithful on the algebra and centralizer statements hold only on the
    /// range of `ρ_B`.
    pub fn not_separating(&self) -> bool {
        self.not_separating
    }

    pub fn weights(&self) -> Vec<f64> {
        self.blocks.iter().map(|b| b.weight).collect()
    }

    pub fn projections(&self) -> Vec<Operator> {
        self.blocks.iter().map(|b| b.projection.clone()).collect()
    }

    /// `Σ_λ p_λ n_λ`, which is 1 for a density matrix.
    pub fn normalization(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.weight * b.multiplicity as f64)
            .sum()
    }

    /// `ā^λ = trace(Π_λ a)/n_λ` for every block.
    pub fn block_means(&self, a: &Operator) -> Result<Vec<f64>> {
        a.check_dim(self.dim())?;
        Ok(self
            .blocks
            .iter()
            .map(|b| b.projection.trace_product(a).re / b.multiplicity as f64)
            .collect())
    }

    /// Largest `||Π_λ a Π_μ||` over `λ ≠ μ`: zero exactly for operators
    /// commuting with every `Π_λ`.
    pub fn off_block_norm(&self, a: &Operator) -> Result<f64> {
        a.check_dim(self.dim())?;
        let mut worst = 0.0_f64;
        for (i, bi) in self.blocks.iter().enumerate() {
            let left = &bi.projection * a;
            for (j, bj) in self.blocks.iter().enumerate() {
                if i != j {
                    worst = worst.max((&left * &bj.projection).operator_norm());
                }
            }
        }
        Ok(worst)
    }
}

/// Spectral decomposition of `pinch(ρ, alg)` with eigenvalues clustered at
/// `cluster_tol`.
pub fn central_decomposition(
    state: &DensityState,
    alg: &BlockAlgebra,
    cluster_tol: f64,
) -> Result<CentralDecomposition> {
    state.check_dim(alg.dim())?;
    let restricted = alg.pinch(state.rho())?.hermitian_part();
    let obs = spectral_decompose(&restricted, cluster_tol)?;
    let blocks: Vec<CentralBlock> = obs
        .spectrum()
        .iter()
        .map(|c| CentralBlock {
            weight: c.eigenvalue.max(0.0),
            projection: c.projection.clone(),
            multiplicity: c.rank,
        })
        .collect();
    let not_separating = blocks.iter().any(|b| b.weight <= SEPARATING_TOL);
    Ok(CentralDecomposition {
        blocks,
        restricted,
        not_separating,
    })
}

/// `ε(a) = Σ_λ Π_λ a Π_λ`.
pub fn conditional_expectation_centralizer(a: &Operator, decomp: &CentralDecomposition) -> Result<Operator> {
    a.check_dim(decomp.dim())?;
    Ok(decomp
        .blocks
        .iter()
        .map(|b| &(&b.projection * a) * &b.projection)
        .sum())
}

/// `a^ω = Σ_λ ā^λ Π_λ`.
pub fn conditional_expectation_center(a: &Operator, decomp: &CentralDecomposition) -> Result<Operator> {
    let means = complex_block_means(a, decomp)?;
    Ok(decomp
        .blocks
        .iter()
        .zip(means)
        .map(|(b, m)| b.projection.scale(m))
        .sum())
}

fn complex_block_means(a: &Operator, decomp: &CentralDecomposition) -> Result<Vec<crate::operator::C64>> {
    a.check_dim(decomp.dim())?;
    Ok(decomp
        .blocks
        .iter()
        .map(|b| b.projection.trace_product(a) / b.multiplicity as f64)
        .collect())
}

fn check_hermitian(a: &Operator) -> Result<()> {
    let max_asymmetry = a.hermitian_defect();
    if max_asymmetry > 1e-12 * a.max_abs().max(1.0) {
        return Err(Error::NotHermitian { max_asymmetry });
    }
    Ok(())
}

/// `Δ = sqrt(Σ_λ p_λ trace(Π_λ (a − ā^λ)²))`, which equals
/// `sqrt(ω_B((a − a^ω)²))`.
pub fn variance(a: &Operator, decomp: &CentralDecomposition) -> Result<f64> {
    check_hermitian(a)?;
    let means = decomp.block_means(a)?;
    let dim = decomp.dim();
    let mut total = 0.0;
    for (b, m) in decomp.blocks.iter().zip(means) {
        let shifted = &a.hermitian_part() - &Operator::identity(dim).scale_real(m);
        let sq = &shifted * &shifted;
        total += b.weight * b.projection.trace_product(&sq).re;
    }
    Ok(total.max(0.0).sqrt())
}

/// Norm of the functional `b ↦ ω([a, b])` on the algebra, computed exactly as
/// the trace norm of `pinch([ρ, a])`.
pub fn functional_norm(a: &Operator, state: &DensityState, alg: &BlockAlgebra) -> Result<f64> {
    state.check_dim(alg.dim())?;
    let c = state.rho().commutator(a);
    Ok(alg.pinch(&c)?.trace_norm())
}

/// Supremum over `b` in the algebra with `||b|| ≤ 1` of
/// `|ω(b) − Σ_i ω(Π_i b Π_i)|`, for the spectral projections `Π_i` of `a`.
pub fn pinching_distance(
    spectral: &Observable,
    state: &DensityState,
    alg: &BlockAlgebra,
) -> Result<f64> {
    state.check_dim(alg.dim())?;
    let rho = state.rho();
    let decohered: Operator = spectral
        .projections()
        .iter()
        .map(|p| &(p * rho) * p)
        .sum();
    Ok(alg.pinch(&(rho - &decohered))?.trace_norm())
}

/// Nearest-eigenvalue diagnostic for one central block.
#[derive(Debug, Clone, PartialEq)]
pub struct GapDiagnostic {
    pub block: usize,
    pub mean: f64,
    /// `p_λ n_λ`
    pub block_weight: f64,
    /// Distance from `ā^λ` to the nearest eigenvalue of `a`.
    pub gap: f64,
    /// `Δ / sqrt(p_λ n_λ)`; infinite for blocks of zero weight.
    pub bound: f64,
}

impl GapDiagnostic {
    pub fn holds(&self, tol: f64) -> bool {
        self.gap <= self.bound + tol
    }
}

/// Quantities describing `a` against a central decomposition.
#[derive(Debug, Clone)]
pub struct EmpiricalReport {
    pub a_omega: Operator,
    pub variance: f64,
    pub functional_norm: f64,
    pub block_means: Vec<f64>,
    pub gaps: Vec<GapDiagnostic>,
}

/// Outcome of [`empirical_property_check`].
#[derive(Debug, Clone)]
pub struct EmpiricalCheck {
    pub is_empirical: bool,
    pub delta: f64,
    pub report: EmpiricalReport,
    pub pinching_distance: f64,
    pub not_separating: bool,
}

/// Builds the report for `a` (already in the Heisenberg picture).
pub fn empirical_report(
    a: &Operator,
    state: &DensityState,
    alg: &BlockAlgebra,
    decomp: &CentralDecomposition,
) -> Result<EmpiricalReport> {
    let delta = variance(a, decomp)?;
    let a_omega = conditional_expectation_center(a, decomp)?;
    let block_means = decomp.block_means(a)?;
    let spectrum = spectral_decompose(&a.hermitian_part(), DEFAULT_CLUSTER_TOL)?.eigenvalues();
    let gaps = block_means
        .iter()
        .zip(&decomp.blocks)
        .enumerate()
        .map(|(i, (&m, b))| {
            let w = b.weight * b.multiplicity as f64;
            let gap = spectrum
                .iter()
                .map(|e| (e - m).abs())
                .fold(f64::INFINITY, f64::min);
            let bound = if w > 0.0 { delta / w.sqrt() } else { f64::INFINITY };
            GapDiagnostic {
                block: i,
                mean: m,
                block_weight: w,
                gap,
                bound,
            }
        })
        .collect();
    Ok(EmpiricalReport {
        a_omega,
        variance: delta,
        functional_norm: functional_norm(a, state, alg)?,
        block_means,
        gaps,
    })
}

/// Whether `a(t) = U(t, t0)† a U(t, t0)` is an empirical property at `t`
/// within `delta`, with `t0` the first grid time.
pub fn empirical_property_check(
    a: &Operator,
    evo: &Evolution,
    state: &DensityState,
    alg_at_t: &BlockAlgebra,
    t: f64,
    delta: f64,
) -> Result<EmpiricalCheck> {
    check_hermitian(a)?;
    let at = heisenberg(a, evo, t, evo.start())?.hermitian_part();
    let decomp = central_decomposition(state, alg_at_t, DEFAULT_CLUSTER_TOL)?;
    let report = empirical_report(&at, state, alg_at_t, &decomp)?;
    let spectral = spectral_decompose(&at, DEFAULT_CLUSTER_TOL)?;
    Ok(EmpiricalCheck {
        is_empirical: report.variance <= delta,
        delta,
        pinching_distance: pinching_distance(&spectral, state, alg_at_t)?,
        not_separating: decomp.not_separating(),
        report,
    })
}

/// `(t, T(t))` pairs of a scan.
pub type Curve = Vec<(f64, f64)>;

fn check_scan_grid(evo: &Evolution, grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    for &t in grid {
        evo.index_of(t)?;
    }
    Ok(())
}

/// `T(t) = Δ_t a(t)` on each grid time, with the algebra at `t` taken from
/// the filtration. Computed in parallel, assembled in grid order.
pub fn measurement_time_scan(
    a: &Operator,
    evo: &Evolution,
    state: &DensityState,
    filtration: &Filtration,
    grid: &[f64],
) -> Result<Curve> {
    check_hermitian(a)?;
    check_scan_grid(evo, grid)?;
    grid.par_iter()
        .map(|&t| {
            let at = heisenberg(a, evo, t, evo.start())?.hermitian_part();
            let decomp = central_decomposition(state, filtration.algebra_at(t), DEFAULT_CLUSTER_TOL)?;
            Ok((t, variance(&at, &decomp)?))
        })
        .collect()
}

/// `T^i(t) = T(t) + 1 − ω(Π_i(t))`, with `Π_i` the `i`-th spectral
/// projection of `a` (decreasing eigenvalue order).
pub fn detector_scan(
    a: &Operator,
    outcome: usize,
    evo: &Evolution,
    state: &DensityState,
    filtration: &Filtration,
    grid: &[f64],
) -> Result<Curve> {
    let spectral = spectral_decompose(a, DEFAULT_CLUSTER_TOL)?;
    let p = spectral
        .spectrum()
        .get(outcome)
        .ok_or_else(|| {
            Error::IndexOutOfRange(format!("outcome {outcome} of {}", spectral.len()))
        })?
        .projection
        .clone();
    let base = measurement_time_scan(a, evo, state, filtration, grid)?;
    base.into_iter()
        .map(|(t, v)| {
            let pt = heisenberg(&p, evo, t, evo.start())?;
            Ok((t, v + 1.0 - state.probability(&pt)))
        })
        .collect()
}

/// Earliest grid time with `T(t) ≤ delta`.
pub fn first_time(curve: &[(f64, f64)], delta: f64) -> Option<f64> {
    curve.iter().find(|(_, v)| *v <= delta).map(|(t, _)| *t)
}

/// Grid surrogate of membership in the state set: the infimum of `T` over
/// grid times `t ≥ t_star` is below `delta`.
pub fn membership(curve: &[(f64, f64)], delta: f64, t_star: f64) -> bool {
    curve
        .iter()
        .filter(|(t, _)| *t >= t_star)
        .any(|(_, v)| *v < delta)
}

/// The central blocks whose mean of `a` lies within `delta` of each
/// eigenvalue of `a`, with their summed projections and weights. Blocks are
/// assigned to the nearest eigenvalue only.
#[derive(Debug, Clone)]
pub struct OutcomeGroup {
    pub eigenvalue: f64,
    pub blocks: Vec<usize>,
    pub projection: Operator,
    /// `Σ_{λ in group} p_λ n_λ`
    pub probability: f64,
}

pub fn outcome_groups(
    a: &Operator,
    decomp: &CentralDecomposition,
    delta: f64,
) -> Result<Vec<OutcomeGroup>> {
    let eigen = spectral_decompose(&a.hermitian_part(), DEFAULT_CLUSTER_TOL)?.eigenvalues();
    let means = decomp.block_means(a)?;
    let dim = decomp.dim();
    let mut groups: Vec<OutcomeGroup> = eigen
        .iter()
        .map(|&e| OutcomeGroup {
            eigenvalue: e,
            blocks: Vec::new(),
            projection: Operator::zeros(dim),
            probability: 0.0,
        })
        .collect();
    for (lambda, (&m, b)) in means.iter().zip(&decomp.blocks).enumerate() {
        let mut best: Option<(usize, f64)> = None;
        for (j, &e) in eigen.iter().enumerate() {
            let d = (m - e).abs();
            if d < delta && best.is_none_or(|(_, bd)| d < bd) {
                best = Some((j, d));
            }
        }
        if let Some((j, _)) = best {
            let g = &mut groups[j];
            g.blocks.push(lambda);
            g.projection = &g.projection + &b.projection;
            g.probability += b.weight * b.multiplicity as f64;
        }
    }
    Ok(groups)
}

/// Inputs for [`sequential_joint_probability`].
#[derive(Debug, Clone)]
pub struct SequentialSetup<'a> {
    pub a1: &'a Operator,
    pub t1: f64,
    pub a2: &'a Operator,
    pub t2: f64,
    pub evolution: &'a Evolution,
    pub state: &'a DensityState,
    pub filtration: &'a Filtration,
    pub delta1: f64,
    pub delta2: f64,
    pub cluster_tol: f64,
}

/// State after outcome `j` of the first measurement.
#[derive(Debug, Clone)]
pub struct BranchState {
    pub outcome: usize,
    /// `Σ_λ P(Π_λ ρ Π_λ)` over the blocks assigned to outcome `j`, normalized.
    pub state: DensityState,
    /// Entrywise distance to the Lüders state `Π_j ρ Π_j / ω(Π_j)`.
    pub lueders_distance: f64,
}

/// Joint probabilities of two successive measurements along both routes.
#[derive(Debug, Clone)]
pub struct SequentialJoint {
    pub eigenvalues1: Vec<f64>,
    pub eigenvalues2: Vec<f64>,
    /// `ω(Π_j(t1) Π_l(t2) Π_j(t1))`, indexed `[j][l]`.
    pub direct: Vec<Vec<f64>>,
    /// `P_j Σ_{λ} ω_j(Π_λ)`, or `None` for branches with `P_j ≤ δ2`.
    pub central: Vec<Option<Vec<f64>>>,
    /// `P_j` from the central decomposition.
    pub outcome_probabilities: Vec<f64>,
    /// Largest `|central − direct|` over defined entries.
    pub residual: f64,
    pub branches: Vec<BranchState>,
    /// Heisenberg-picture spectral projections at `t1` and `t2`.
    pub projections1: Vec<Operator>,
    pub projections2: Vec<Operator>,
}

/// Joint table for measuring `a1` at `t1` and then `a2` at `t2`.
pub fn sequential_joint_probability(setup: &SequentialSetup<'_>) -> Result<SequentialJoint> {
    let evo = setup.evolution;
    let t0 = evo.start();
    evo.index_of(setup.t1)?;
    evo.index_of(setup.t2)?;
    if setup.t2 <= setup.t1 {
        return Err(Error::InvalidGrid(format!(
            "t2 = {} is not after t1 = {}",
            setup.t2, setup.t1
        )));
    }
    check_hermitian(setup.a1)?;
    check_hermitian(setup.a2)?;
    let a1t = heisenberg(setup.a1, evo, setup.t1, t0)?.hermitian_part();
    let a2t = heisenberg(setup.a2, evo, setup.t2, t0)?.hermitian_part();
    let s1 = spectral_decompose(&a1t, setup.cluster_tol)?;
    let s2 = spectral_decompose(&a2t, setup.cluster_tol)?;
    let gap = s1.min_gap();
    if gap.is_finite() && gap <= 2.0 * setup.delta1 {
        return Err(Error::EigenvalueGapTooSmall {
            gap,
            bound: 2.0 * setup.delta1,
        });
    }
    let p1 = s1.projections();
    let p2 = s2.projections();
    let rho = setup.state.rho();

    let direct: Vec<Vec<f64>> = p1
        .iter()
        .map(|pj| {
            let branch = &(pj * rho) * pj;
            p2.iter().map(|pl| branch.trace_product(pl).re).collect()
        })
        .collect();

    let alg1 = setup.filtration.algebra_at(setup.t1);
    let alg2 = setup.filtration.algebra_at(setup.t2);
    let decomp1 = central_decomposition(setup.state, alg1, setup.cluster_tol)?;
    let groups1 = outcome_groups(&a1t, &decomp1, setup.delta1)?;

    let mut central = Vec::with_capacity(p1.len());
    let mut branches = Vec::new();
    let mut residual = 0.0_f64;
    for (j, g) in groups1.iter().enumerate() {
        if g.probability <= setup.delta2 {
            central.push(None);
            continue;
        }
        let mixed: Operator = g
            .blocks
            .iter()
            .map(|&l| {
                let p = &decomp1.blocks[l].projection;
                &(p * rho) * p
            })
            .sum();
        let omega_j = DensityState::from_trusted(mixed);
        let lueders_weight = setup.state.probability(&p1[j]);
        let lueders_distance = if lueders_weight > 0.0 {
            let l = (&(&p1[j] * rho) * &p1[j]).scale_real(1.0 / lueders_weight);
            omega_j.rho().max_abs_diff(&l)
        } else {
            f64::INFINITY
        };
        let decomp2 = central_decomposition(&omega_j, alg2, setup.cluster_tol)?;
        let groups2 = outcome_groups(&a2t, &decomp2, setup.delta2)?;
        let row: Vec<f64> = groups2.iter().map(|h| g.probability * h.probability).collect();
        for (c, d) in row.iter().zip(&direct[j]) {
            residual = residual.max((c - d).abs());
        }
        central.push(Some(row));
        branches.push(BranchState {
            outcome: j,
            state: omega_j,
            lueders_distance,
        });
    }

    Ok(SequentialJoint {
        eigenvalues1: s1.eigenvalues(),
        eigenvalues2: s2.eigenvalues(),
        direct,
        central,
        outcome_probabilities: groups1.iter().map(|g| g.probability).collect(),
        residual,
        branches,
        projections1: p1,
        projections2: p2,
    })
}

/// Norms of the two approximate sum rules, taken over `b` in `alg` with
/// `||b|| ≤ 1`:
/// per `l`, `Σ_j ω(Π_j Π_l b Π_l Π_j) − ω(Π_l b Π_l)`, and
/// per `j`, `Σ_l ω(Π_j Π_l b Π_l Π_j) − ω(Π_j b Π_j)`.
pub fn marginal_residual_norms(
    joint: &SequentialJoint,
    state: &DensityState,
    alg: &BlockAlgebra,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let rho = state.rho();
    let sandwich = |j: &Operator, l: &Operator| -> Operator {
        let x = l * j;
        &(&x * rho) * &x.adjoint()
    };
    let mut over_first = Vec::new();
    for l in &joint.projections2 {
        let lhs: Operator = joint.projections1.iter().map(|j| sandwich(j, l)).sum();
        let rhs = &(l * rho) * l;
        over_first.push(alg.pinch(&(&lhs - &rhs))?.trace_norm());
    }
    let mut over_second = Vec::new();
    for j in &joint.projections1 {
        let lhs: Operator = joint.projections2.iter().map(|l| sandwich(j, l)).sum();
        let rhs = &(j * rho) * j;
        over_second.push(alg.pinch(&(&lhs - &rhs))?.trace_norm());
    }
    Ok((over_first, over_second))
}

/// The two approximate sum rules evaluated at a single `b`.
pub fn marginal_residuals_at(
    joint: &SequentialJoint,
    state: &DensityState,
    b: &Operator,
) -> Result<(Vec<f64>, Vec<f64>)> {
    state.check_dim(b.dim())?;
    let w = |x: &Operator| state.expect(x);
    let mut over_first = Vec::new();
    for l in &joint.projections2 {
        let lbl = &(l * b) * l;
        let lhs: crate::operator::C64 = joint
            .projections1
            .iter()
            .map(|j| w(&(&(j * &lbl) * j)))
            .sum();
        over_first.push((lhs - w(&lbl)).norm());
    }
    let mut over_second = Vec::new();
    for j in &joint.projections1 {
        let lhs: crate::operator::C64 = joint
            .projections2
            .iter()
            .map(|l| w(&(&(j * &(&(l * b) * l)) * j)))
            .sum();
        over_second.push((lhs - w(&(&(j * b) * j))).norm());
    }
    Ok((over_first, over_second))
}

/// Sequential family built from central projections: `X_{jl}` uses the
/// blocks of `ω` assigned to `a1`'s outcome `j` at `t1` and the blocks of
/// `ω_j` assigned to `a2`'s outcome `l` at `t2[g]`. Completeness holds when
/// every block is assigned, and is reported alongside the family.
pub fn sequential_central_povm(
    setup: &SequentialSetup<'_>,
    good: &[usize],
    t2_per_branch: &[f64],
) -> Result<(PovmFamily, PovmValidation)> {
    let evo = setup.evolution;
    let t0 = evo.start();
    if t2_per_branch.len() != good.len() {
        return Err(Error::InvalidGoodSet(format!(
            "{} second-measurement times for {} good outcomes",
            t2_per_branch.len(),
            good.len()
        )));
    }
    let a1t = heisenberg(setup.a1, evo, setup.t1, t0)?.hermitian_part();
    let rho = setup.state.rho();
    let decomp1 = central_decomposition(
        setup.state,
        setup.filtration.algebra_at(setup.t1),
        setup.cluster_tol,
    )?;
    let groups1 = outcome_groups(&a1t, &decomp1, setup.delta1)?;
    let first: Vec<Operator> = groups1.iter().map(|g| g.projection.clone()).collect();
    let mut second = Vec::with_capacity(good.len());
    for (&j, &t2) in good.iter().zip(t2_per_branch) {
        let g = groups1.get(j).ok_or_else(|| {
            Error::InvalidGoodSet(format!("outcome {j} of {}", groups1.len()))
        })?;
        if g.probability.is_nan() || g.probability <= 0.0 {
            return Err(Error::ZeroProbabilityBranch(g.probability));
        }
        let mixed: Operator = g
            .blocks
            .iter()
            .map(|&l| {
                let p = &decomp1.blocks[l].projection;
                &(p * rho) * p
            })
            .sum();
        let omega_j = DensityState::from_trusted(mixed);
        let a2t = heisenberg(setup.a2, evo, t2, t0)?.hermitian_part();
        let decomp2 = central_decomposition(&omega_j, setup.filtration.algebra_at(t2), setup.cluster_tol)?;
        second.push(
            outcome_groups(&a2t, &decomp2, setup.delta2)?
                .into_iter()
                .map(|h| h.projection)
                .collect(),
        );
    }
    let fam = PovmFamily::unchecked("sequential_central", sequential_elements(&first, &second, good)?)?;
    let v = validate_povm(&fam);
    Ok((fam, v))
}
