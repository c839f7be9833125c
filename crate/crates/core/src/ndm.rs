// SPDX-License-Identifier: Apache-2.0

//! Repeated non-demolition measurement by a chain of identical probes.
//!
//! The system observable is given by its resolution `{Π_α}`. Each probe
//! starts in `σ`, interacts through `W = Σ_α Π_α ⊗ U_α†` and is then read out
//! in the resolution `{π_ξ}`. The outcome kernel is
//! `p(ξ|α) = trace(σ U_α π_ξ U_α†)`, and the off-diagonal block `(α, β)` of
//! the system state is multiplied by `conj(f(α, β))` per probe, with
//! `f(α, β) = trace(σ U_α U_β†)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::histories::{IndexCodec, ProjectiveResolution};
use crate::operator::{DensityState, Operator, C64};

const UNITARY_TOL: f64 = 1e-10;
const KERNEL_TOL: f64 = 1e-10;
const DISTRIBUTION_TOL: f64 = 1e-10;
/// Predictive probabilities at or below this make an outcome impossible.
pub const IMPOSSIBLE_TOL: f64 = 1e-300;
/// Default cap on exhaustively enumerated outcome histories.
pub const ENUMERATION_CAP: usize = 1_000_000;

/// System resolution, probe state, per-level probe unitaries and probe
/// read-out resolution.
#[derive(Debug, Clone)]
pub struct NdmModel {
    system: ProjectiveResolution,
    probe_state: DensityState,
    unitaries: Vec<Operator>,
    probe_resolution: ProjectiveResolution,
    kernel: OutcomeKernel,
}

impl NdmModel {
    pub fn new(
        system: ProjectiveResolution,
        probe_state: DensityState,
        unitaries: Vec<Operator>,
        probe_resolution: ProjectiveResolution,
    ) -> Result<Self> {
        if unitaries.len() != system.len() {
            return Err(Error::InvalidModel(format!(
                "{} probe unitaries for {} system levels",
                unitaries.len(),
                system.len()
            )));
        }
        let probe_dim = probe_state.dim();
        if probe_resolution.dim() != probe_dim {
            return Err(Error::DimensionMismatch {
                expected: probe_dim,
                found: probe_resolution.dim(),
            });
        }
        for u in &unitaries {
            u.check_dim(probe_dim)?;
            let defect = u.unitary_defect();
            if defect > UNITARY_TOL {
                return Err(Error::NotUnitary { defect });
            }
        }
        let rows: Vec<Vec<f64>> = unitaries
            .iter()
            .map(|u| {
                let shifted = &(&u.adjoint() * probe_state.rho()) * u;
                probe_resolution
                    .projections()
                    .iter()
                    .map(|p| shifted.trace_product(p).re.max(0.0))
                    .collect()
            })
            .collect();
        for (alpha, row) in rows.iter().enumerate() {
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > KERNEL_TOL {
                return Err(Error::InvalidModel(format!(
                    "kernel row {alpha} sums to {s}"
                )));
            }
        }
        Ok(Self {
            system,
            probe_state,
            unitaries,
            probe_resolution,
            kernel: OutcomeKernel { rows },
        })
    }

    /// Qubit system and qubit probe in `|0⟩`, read out in the computational
    /// basis; level 0 leaves the probe alone and level 1 rotates it by `phi`.
    /// Then `p(0|1) = cos²φ` and `f(0, 1) = cos φ`.
    pub fn rotation(phi: f64) -> Self {
        let (c, s) = (phi.cos(), phi.sin());
        let r = Operator::from_real_rows(2, &[c, -s, s, c]).expect("finite rotation");
        Self::new(
            ProjectiveResolution::computational(2),
            DensityState::basis(2, 0).expect("basis state"),
            vec![Operator::identity(2), r],
            ProjectiveResolution::computational(2),
        )
        .expect("rotation model is valid")
    }

    pub fn system_resolution(&self) -> &ProjectiveResolution {
        &self.system
    }

    pub fn probe_state(&self) -> &DensityState {
        &self.probe_state
    }

    pub fn probe_unitaries(&self) -> &[Operator] {
        &self.unitaries
    }

    pub fn probe_resolution(&self) -> &ProjectiveResolution {
        &self.probe_resolution
    }

    pub fn probe_dim(&self) -> usize {
        self.probe_state.dim()
    }

    pub fn system_dim(&self) -> usize {
        self.system.dim()
    }

    pub fn num_levels(&self) -> usize {
        self.system.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.probe_resolution.len()
    }

    pub fn kernel(&self) -> &OutcomeKernel {
        &self.kernel
    }
}

/// Row-stochastic matrix `p(ξ|α)`, indexed `[α][ξ]`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeKernel {
    rows: Vec<Vec<f64>>,
}

impl OutcomeKernel {
    pub fn new(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        if rows.is_empty() || width == 0 {
            return Err(Error::InvalidModel("empty kernel".into()));
        }
        for (alpha, row) in rows.iter().enumerate() {
            if row.len() != width || row.iter().any(|&p| !p.is_finite() || p < 0.0) {
                return Err(Error::InvalidModel(format!("kernel row {alpha} is malformed")));
            }
            let s: f64 = row.iter().sum();
            if (s - 1.0).abs() > KERNEL_TOL {
                return Err(Error::InvalidModel(format!("kernel row {alpha} sums to {s}")));
            }
        }
        Ok(Self { rows })
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn num_levels(&self) -> usize {
        self.rows.len()
    }

    pub fn num_outcomes(&self) -> usize {
        self.rows[0].len()
    }

    /// `p(ξ|α)`
    pub fn get(&self, alpha: usize, xi: usize) -> f64 {
        self.rows[alpha][xi]
    }

    /// `Σ_β prior(β) p(ξ|β)`
    pub fn predictive(&self, prior: &[f64], xi: usize) -> f64 {
        prior.iter().zip(&self.rows).map(|(p, r)| p * r[xi]).sum()
    }

    /// Whether some pair of rows differs by more than `tol`.
    pub fn rows_distinct(&self, tol: f64) -> bool {
        self.rows.iter().enumerate().any(|(i, a)| {
            self.rows[i + 1..]
                .iter()
                .any(|b| a.iter().zip(b).any(|(x, y)| (x - y).abs() > tol))
        })
    }

    /// Whether the column of outcome `xi` is not constant in `α`.
    pub fn column_separates(&self, xi: usize, tol: f64) -> bool {
        let first = self.rows[0][xi];
        self.rows.iter().any(|r| (r[xi] - first).abs() > tol)
    }
}

pub fn outcome_kernel(model: &NdmModel) -> &OutcomeKernel {
    model.kernel()
}

/// `f(α, α′) = trace(σ U_α U_α′†)`
pub fn decoherence_factor(model: &NdmModel, alpha: usize, alpha_prime: usize) -> Result<C64> {
    let n = model.num_levels();
    if alpha >= n || alpha_prime >= n {
        return Err(Error::IndexOutOfRange(format!(
            "levels ({alpha}, {alpha_prime}) of {n}"
        )));
    }
    let prod = &model.unitaries[alpha] * &model.unitaries[alpha_prime].adjoint();
    Ok(model.probe_state.expect(&prod))
}

/// `μ = max_{α ≠ α′} |f(α, α′)|`, or 0 for a single level.
pub fn decoherence_rate(model: &NdmModel) -> f64 {
    let n = model.num_levels();
    let mut mu = 0.0_f64;
    for a in 0..n {
        for b in 0..n {
            if a != b {
                mu = mu.max(decoherence_factor(model, a, b).expect("in range").norm());
            }
        }
    }
    mu
}

/// System state after `k` probes with the outcomes discarded:
/// `Σ_{α,β} conj(f(α, β))^k Π_α ρ Π_β`.
pub fn reduced_system_state(model: &NdmModel, rho: &DensityState, k: usize) -> Result<Operator> {
    rho.check_dim(model.system_dim())?;
    let proj = model.system.projections();
    let n = proj.len();
    let mut out = Operator::zeros(model.system_dim());
    for a in 0..n {
        let left = &proj[a] * rho.rho();
        for b in 0..n {
            let f = decoherence_factor(model, a, b)?.conj().powu(k as u32);
            out = &out + &(&left * &proj[b]).scale(f);
        }
    }
    Ok(out)
}

/// Per-`k` record of [`decoherence_bound_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct DampingStep {
    pub k: usize,
    /// Largest `||Π_α ρ^(k) Π_β||` over `α ≠ β`.
    pub max_off_diagonal: f64,
    /// Largest `||Π_α ρ^(k) Π_β|| − ||Π_α ρ Π_β|| μ^k` over `α ≠ β`.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecoherenceReport {
    pub mu: f64,
    /// Set when `μ ≥ 1`, so the chain does not damp every coherence.
    pub mu_not_less_than_one: bool,
    pub steps: Vec<DampingStep>,
    /// Largest excess over all steps.
    pub max_excess: f64,
}

impl DecoherenceReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.max_excess <= tol
    }
}

/// Off-diagonal damping of the reduced system state for `k = 0..=k0`.
pub fn decoherence_bound_check(model: &NdmModel, rho: &DensityState, k0: usize) -> Result<DecoherenceReport> {
    let mu = decoherence_rate(model);
    let proj = model.system.projections();
    let n = proj.len();
    let initial: Vec<Vec<f64>> = (0..n)
        .map(|a| {
            (0..n)
                .map(|b| (&(&proj[a] * rho.rho()) * &proj[b]).operator_norm())
                .collect()
        })
        .collect();
    let mut steps = Vec::with_capacity(k0 + 1);
    let mut max_excess = f64::NEG_INFINITY;
    for k in 0..=k0 {
        let rk = reduced_system_state(model, rho, k)?;
        let mut max_off = 0.0_f64;
        let mut excess = f64::NEG_INFINITY;
        for a in 0..n {
            let left = &proj[a] * &rk;
            for b in 0..n {
                if a == b {
                    continue;
                }
                let norm = (&left * &proj[b]).operator_norm();
                max_off = max_off.max(norm);
                excess = excess.max(norm - initial[a][b] * mu.powi(k as i32));
            }
        }
        if n < 2 {
            excess = 0.0;
        }
        max_excess = max_excess.max(excess);
        steps.push(DampingStep {
            k,
            max_off_diagonal: max_off,
            excess,
        });
    }
    Ok(DecoherenceReport {
        mu,
        mu_not_less_than_one: mu >= 1.0 - 1e-12,
        steps,
        max_excess,
    })
}

/// System state conditioned on an outcome record, normalized:
/// block `(α, β)` of `ρ` is multiplied by `Π_i trace(σ U_β π_ξi U_α†)`.
pub fn conditional_system_state(model: &NdmModel, rho: &DensityState, outcomes: &[usize]) -> Result<DensityState> {
    rho.check_dim(model.system_dim())?;
    let proj = model.system.projections();
    let pi = model.probe_resolution.projections();
    let n = proj.len();
    for &xi in outcomes {
        if xi >= pi.len() {
            return Err(Error::IndexOutOfRange(format!("outcome {xi} of {}", pi.len())));
        }
    }
    let sigma = model.probe_state.rho();
    let mut out = Operator::zeros(model.system_dim());
    for a in 0..n {
        let left = &proj[a] * rho.rho();
        for b in 0..n {
            let mut w = C64::new(1.0, 0.0);
            for &xi in outcomes {
                let m = &(&model.unitaries[b] * &pi[xi]) * &model.unitaries[a].adjoint();
                w *= sigma.trace_product(&m);
            }
            out = &out + &(&left * &proj[b]).scale(w);
        }
    }
    let norm = out.trace().re;
    if norm <= IMPOSSIBLE_TOL {
        return Err(Error::ImpossibleOutcome(*outcomes.last().unwrap_or(&0)));
    }
    Ok(DensityState::from_trusted(out.scale_real(1.0 / norm).hermitian_part()))
}

fn check_distribution(p: &[f64], len: usize) -> Result<()> {
    if p.len() != len {
        return Err(Error::InvalidDistribution(format!(
            "{} weights for {} levels",
            p.len(),
            len
        )));
    }
    if p.iter().any(|&x| !x.is_finite() || x < 0.0) {
        return Err(Error::InvalidDistribution("negative or non-finite weight".into()));
    }
    let s: f64 = p.iter().sum();
    if (s - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(Error::InvalidDistribution(format!("weights sum to {s}")));
    }
    Ok(())
}

/// One Bayes step: `prior(α) p(ξ|α) / Σ_β prior(β) p(ξ|β)`.
pub fn posterior_update(prior: &[f64], xi: usize, kernel: &OutcomeKernel) -> Result<Vec<f64>> {
    if prior.len() != kernel.num_levels() {
        return Err(Error::InvalidDistribution(format!(
            "{} weights for {} levels",
            prior.len(),
            kernel.num_levels()
        )));
    }
    if xi >= kernel.num_outcomes() {
        return Err(Error::IndexOutOfRange(format!(
            "outcome {xi} of {}",
            kernel.num_outcomes()
        )));
    }
    let denom = kernel.predictive(prior, xi);
    if denom.is_nan() || denom <= IMPOSSIBLE_TOL {
        return Err(Error::ImpossibleOutcome(xi));
    }
    Ok(prior
        .iter()
        .zip(&kernel.rows)
        .map(|(p, r)| p * r[xi] / denom)
        .collect())
}

/// Repeated [`posterior_update`] along `outcomes`.
pub fn posterior_recursive(prior: &[f64], outcomes: &[usize], kernel: &OutcomeKernel) -> Result<Vec<f64>> {
    outcomes
        .iter()
        .try_fold(prior.to_vec(), |p, &xi| posterior_update(&p, xi, kernel))
}

/// `μ(ξ_1..ξ_k) = Σ_α p_α Π_i p(ξ_i|α)`
pub fn history_likelihood(prior: &[f64], outcomes: &[usize], kernel: &OutcomeKernel) -> f64 {
    (0..kernel.num_levels())
        .map(|a| prior[a] * outcomes.iter().map(|&xi| kernel.get(a, xi)).product::<f64>())
        .sum()
}

/// `p_α Π_i p(ξ_i|α) / μ(ξ_1..ξ_k)`
pub fn posterior_closed_form(prior: &[f64], outcomes: &[usize], kernel: &OutcomeKernel) -> Result<Vec<f64>> {
    check_distribution(prior, kernel.num_levels())?;
    if let Some(&xi) = outcomes.iter().find(|&&x| x >= kernel.num_outcomes()) {
        return Err(Error::IndexOutOfRange(format!(
            "outcome {xi} of {}",
            kernel.num_outcomes()
        )));
    }
    let joint: Vec<f64> = (0..kernel.num_levels())
        .map(|a| prior[a] * outcomes.iter().map(|&xi| kernel.get(a, xi)).product::<f64>())
        .collect();
    let total: f64 = joint.iter().sum();
    if total.is_nan() || total <= IMPOSSIBLE_TOL {
        return Err(Error::ImpossibleOutcome(*outcomes.last().unwrap_or(&0)));
    }
    Ok(joint.into_iter().map(|j| j / total).collect())
}

/// Draws an index from non-negative `weights` summing to about 1.
pub fn sample_outcome<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let total: f64 = weights.iter().sum();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            last_positive = i;
        }
        acc += w / total;
        if u < acc && w > 0.0 {
            return i;
        }
    }
    last_positive
}

/// Outcome record of one run, with `posteriors[k]` the posterior after `k`
/// outcomes (so `posteriors[0]` is the prior).
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub outcomes: Vec<usize>,
    pub posteriors: Vec<Vec<f64>>,
    pub seed: u64,
    /// Level whose posterior reached `1 − η`, if any.
    pub collapsed_to: Option<usize>,
}

impl Trajectory {
    pub fn steps(&self) -> usize {
        self.outcomes.len()
    }

    pub fn final_posterior(&self) -> &[f64] {
        self.posteriors.last().expect("prior is always recorded")
    }
}

fn argmax(p: &[f64]) -> (usize, f64) {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) })
}

/// Samples outcomes from the mixture `Σ_β p^(k-1)(β) p(·|β)` and updates the
/// posterior until `max_α p^(k)(α) ≥ 1 − eta` or `k_max` steps.
pub fn sample_trajectory(model: &NdmModel, prior: &[f64], k_max: usize, eta: f64, seed: u64) -> Result<Trajectory> {
    sample_with_kernel(model.kernel(), prior, k_max, eta, seed)
}

pub fn sample_with_kernel(kernel: &OutcomeKernel, prior: &[f64], k_max: usize, eta: f64, seed: u64) -> Result<Trajectory> {
    check_distribution(prior, kernel.num_levels())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = prior.to_vec();
    let mut outcomes = Vec::new();
    let mut posteriors = vec![current.clone()];
    let mut collapsed_to = None;
    let mut predictive = vec![0.0; kernel.num_outcomes()];
    for _ in 0..=k_max {
        let (best, value) = argmax(&current);
        if value >= 1.0 - eta {
            collapsed_to = Some(best);
            break;
        }
        if outcomes.len() == k_max {
            break;
        }
        for (xi, slot) in predictive.iter_mut().enumerate() {
            *slot = kernel.predictive(&current, xi);
        }
        let xi = sample_outcome(&predictive, &mut rng);
        current = posterior_update(&current, xi, kernel)?;
        outcomes.push(xi);
        posteriors.push(current.clone());
    }
    Ok(Trajectory {
        outcomes,
        posteriors,
        seed,
        collapsed_to,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    /// Largest `|E[p^(m) | ξ_1..ξ_{m-1}] − p^(m-1)|` over `m ≤ k`, levels and
    /// possible prefixes.
    pub max_defect: f64,
    /// Largest difference between recursive and closed-form posteriors over
    /// all possible histories of length at most `k`.
    pub max_route_difference: f64,
    pub histories_checked: usize,
}

/// Exhaustive check that the posterior sequence is a martingale under the
/// outcome law `μ`.
pub fn martingale_check(model: &NdmModel, prior: &[f64], k: usize) -> Result<MartingaleReport> {
    martingale_check_with_cap(model.kernel(), prior, k, ENUMERATION_CAP)
}

pub fn martingale_check_with_cap(
    kernel: &OutcomeKernel,
    prior: &[f64],
    k: usize,
    cap: usize,
) -> Result<MartingaleReport> {
    check_distribution(prior, kernel.num_levels())?;
    let m = kernel.num_outcomes();
    let total = (m as f64).powi(k as i32);
    if total > cap as f64 {
        return Err(Error::EnumerationTooLarge {
            size: format!("{m}^{k}"),
            cap,
        });
    }
    let mut max_defect = 0.0_f64;
    let mut max_route = 0.0_f64;
    let mut checked = 0;
    for len in 0..k {
        let codec = IndexCodec::new(vec![m; len]);
        for prefix in codec.enumerate(cap)? {
            let mu_prefix = history_likelihood(prior, &prefix, kernel);
            if mu_prefix.is_nan() || mu_prefix <= IMPOSSIBLE_TOL {
                continue;
            }
            let before = posterior_recursive(prior, &prefix, kernel)?;
            let mut expected = vec![0.0; before.len()];
            let mut history = prefix.clone();
            history.push(0);
            for xi in 0..m {
                *history.last_mut().expect("non-empty") = xi;
                let weight = kernel.predictive(&before, xi);
                if weight.is_nan() || weight <= IMPOSSIBLE_TOL {
                    continue;
                }
                let after = posterior_update(&before, xi, kernel)?;
                let closed = posterior_closed_form(prior, &history, kernel)?;
                for a in 0..after.len() {
                    expected[a] += weight * after[a];
                    max_route = max_route.max((after[a] - closed[a]).abs());
                }
                checked += 1;
            }
            for (e, b) in expected.iter().zip(&before) {
                max_defect = max_defect.max((e - b).abs());
            }
        }
    }
    Ok(MartingaleReport {
        max_defect,
        max_route_difference: max_route,
        histories_checked: checked,
    })
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of trajectory `index`: `splitmix64(base + index · 0x9E3779B97F4A7C15)`.
pub fn trajectory_seed(base_seed: u64, index: u64) -> u64 {
    splitmix64(base_seed.wrapping_add(index.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
}

/// Least-squares fit of `mean ln(1 − max posterior)` against `k`.
#[derive(Debug, Clone, PartialEq)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Non-degeneracy diagnostics of the kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct NonDegeneracy {
    /// Every observed outcome has a column `p(ξ|·)` that is not constant.
    pub observed_outcomes_separate: bool,
    /// Some two kernel rows differ.
    pub rows_distinct: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollapseReport {
    pub trajectories: usize,
    pub collapsed: usize,
    pub collapse_fraction: f64,
    pub unresolved_fraction: f64,
    pub target_counts: Vec<usize>,
    /// Counts divided by the number of trajectories.
    pub target_frequencies: Vec<f64>,
    /// `3 sqrt(p_α (1 − p_α) / N)` for each level.
    pub confidence_radii: Vec<f64>,
    pub mean_collapse_step: Option<f64>,
    pub rate: Option<RateFit>,
    pub non_degeneracy: NonDegeneracy,
    /// Set when the non-degeneracy hypothesis fails.
    pub inconclusive: bool,
}

struct Summary {
    collapsed_to: Option<usize>,
    steps: usize,
    residuals: Vec<f64>,
    seen: Vec<bool>,
}

/// Runs `n` trajectories in parallel with seeds from [`trajectory_seed`] and
/// aggregates them in index order.
pub fn ensemble_collapse_statistics(
    model: &NdmModel,
    prior: &[f64],
    n: usize,
    k_max: usize,
    eta: f64,
    base_seed: u64,
) -> Result<CollapseReport> {
    ensemble_with_kernel(model.kernel(), prior, n, k_max, eta, base_seed)
}

pub fn ensemble_with_kernel(
    kernel: &OutcomeKernel,
    prior: &[f64],
    n: usize,
    k_max: usize,
    eta: f64,
    base_seed: u64,
) -> Result<CollapseReport> {
    check_distribution(prior, kernel.num_levels())?;
    if n == 0 {
        return Err(Error::InvalidDistribution("no trajectories requested".into()));
    }
    let outcomes = kernel.num_outcomes();
    let summaries: Vec<Summary> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let t = sample_with_kernel(kernel, prior, k_max, eta, trajectory_seed(base_seed, i))?;
            let mut seen = vec![false; outcomes];
            for &xi in &t.outcomes {
                seen[xi] = true;
            }
            Ok(Summary {
                collapsed_to: t.collapsed_to,
                steps: t.steps(),
                residuals: t.posteriors.iter().map(|p| 1.0 - argmax(p).1).collect(),
                seen,
            })
        })
        .collect::<Result<_>>()?;

    let levels = kernel.num_levels();
    let mut target_counts = vec![0usize; levels];
    let mut collapse_steps = 0usize;
    let mut seen = vec![false; outcomes];
    let mut sums = vec![0.0_f64; k_max + 1];
    let mut counts = vec![0usize; k_max + 1];
    for s in &summaries {
        if let Some(a) = s.collapsed_to {
            target_counts[a] += 1;
            collapse_steps += s.steps;
        }
        for (xi, &v) in s.seen.iter().enumerate() {
            seen[xi] |= v;
        }
        for (k, &r) in s.residuals.iter().enumerate() {
            if r > 0.0 {
                sums[k] += r.ln();
                counts[k] += 1;
            }
        }
    }
    let collapsed: usize = target_counts.iter().sum();
    let nf = n as f64;
    let points: Vec<(f64, f64)> = (0..=k_max)
        .filter(|&k| counts[k] > 0)
        .map(|k| (k as f64, sums[k] / counts[k] as f64))
        .collect();
    let non_degeneracy = NonDegeneracy {
        observed_outcomes_separate: seen
            .iter()
            .enumerate()
            .filter(|(_, &s)| s)
            .all(|(xi, _)| kernel.column_separates(xi, KERNEL_TOL)),
        rows_distinct: kernel.rows_distinct(KERNEL_TOL),
    };
    Ok(CollapseReport {
        trajectories: n,
        collapsed,
        collapse_fraction: collapsed as f64 / nf,
        unresolved_fraction: (n - collapsed) as f64 / nf,
        target_frequencies: target_counts.iter().map(|&c| c as f64 / nf).collect(),
        target_counts,
        confidence_radii: prior.iter().map(|p| 3.0 * (p * (1.0 - p) / nf).sqrt()).collect(),
        mean_collapse_step: (collapsed > 0).then(|| collapse_steps as f64 / collapsed as f64),
        rate: linear_fit(&points),
        inconclusive: !non_degeneracy.observed_outcomes_separate,
        non_degeneracy,
    })
}

/// Ordinary least squares; `None` with fewer than three points or no spread.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<RateFit> {
    if points.len() < 3 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = points.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(RateFit {
        slope,
        intercept: my - slope * mx,
        r_squared,
        points: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn permutation_kernel() -> OutcomeKernel {
        OutcomeKernel::new(vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap()
    }

    #[test]
    fn rotation_kernel_and_factor() {
        let phi = 0.7;
        let m = NdmModel::rotation(phi);
        let k = m.kernel();
        assert!((k.get(0, 0) - 1.0).abs() < 1e-15 && k.get(0, 1).abs() < 1e-15);
        assert!((k.get(1, 0) - phi.cos().powi(2)).abs() < 1e-15);
        let f = decoherence_factor(&m, 0, 1).unwrap();
        assert!((f.re - phi.cos()).abs() < 1e-15 && f.im.abs() < 1e-15);
    }

    #[test]
    fn identical_unitaries_do_not_decohere() {
        let id = Operator::identity(2);
        let m = NdmModel::new(
            ProjectiveResolution::computational(2),
            DensityState::basis(2, 0).unwrap(),
            vec![id.clone(), id],
            ProjectiveResolution::computational(2),
        )
        .unwrap();
        let r = decoherence_bound_check(&m, &DensityState::pure_real(&[0.6, 0.8]).unwrap(), 5).unwrap();
        assert!(r.mu_not_less_than_one);
        assert!((r.steps[5].max_off_diagonal - 0.48).abs() < 1e-14);
        assert_eq!(m.kernel().rows()[0], vec![1.0, 0.0]);
    }

    #[test]
    fn rotation_damping_is_geometric() {
        let phi = PI / 5.0;
        let m = NdmModel::rotation(phi);
        let rho = DensityState::pure_real(&[0.6, 0.8]).unwrap();
        let r = decoherence_bound_check(&m, &rho, 20).unwrap();
        assert!(!r.mu_not_less_than_one);
        for s in &r.steps {
            let expected = 0.48 * phi.cos().powi(s.k as i32);
            assert!((s.max_off_diagonal - expected).abs() < 1e-14);
        }
        assert!(r.holds(1e-12));
    }

    #[test]
    fn impossible_outcome_collapses_posterior() {
        let m = NdmModel::rotation(PI / 3.0);
        let p = posterior_update(&[0.5, 0.5], 1, m.kernel()).unwrap();
        assert!(p[0].abs() < 1e-15 && (p[1] - 1.0).abs() < 1e-15);
        assert_eq!(
            posterior_update(&[1.0, 0.0], 1, m.kernel()),
            Err(Error::ImpossibleOutcome(1))
        );
    }

    #[test]
    fn indistinguishable_kernel_leaves_prior() {
        let k = OutcomeKernel::new(vec![vec![0.3, 0.7], vec![0.3, 0.7]]).unwrap();
        let p = posterior_update(&[0.2, 0.8], 0, &k).unwrap();
        assert!((p[0] - 0.2).abs() < 1e-15);
        let r = martingale_check_with_cap(&k, &[0.2, 0.8], 4, 100).unwrap();
        assert!(r.max_defect < 1e-15);
    }

    #[test]
    fn closed_form_matches_recursion() {
        let m = NdmModel::rotation(1.1);
        let hist = [0, 0, 1, 0, 1];
        let a = posterior_recursive(&[0.3, 0.7], &hist, m.kernel());
        // outcome 1 rules out level 0 and the record is still possible
        let a = a.unwrap();
        let b = posterior_closed_form(&[0.3, 0.7], &hist, m.kernel()).unwrap();
        assert!((a[1] - b[1]).abs() < 1e-15);
    }

    #[test]
    fn enumeration_cap() {
        let k = permutation_kernel();
        assert!(matches!(
            martingale_check_with_cap(&k, &[0.5, 0.5], 21, 1_000_000),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }

    #[test]
    fn permutation_kernel_collapses_in_one_step() {
        let t = sample_with_kernel(&permutation_kernel(), &[0.4, 0.6], 10, 1e-3, 9).unwrap();
        assert_eq!(t.steps(), 1);
        assert!(t.collapsed_to.is_some());
    }

    #[test]
    fn trajectories_are_reproducible() {
        let m = NdmModel::rotation(PI / 4.0);
        let a = sample_trajectory(&m, &[0.5, 0.5], 50, 1e-6, 77).unwrap();
        let b = sample_trajectory(&m, &[0.5, 0.5], 50, 1e-6, 77).unwrap();
        assert_eq!(a, b);
        for p in &a.posteriors {
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            assert!(p.iter().all(|&x| x >= 0.0));
        }
    }

    #[test]
    fn conditional_state_diagonal_is_posterior() {
        let m = NdmModel::rotation(0.9);
        let rho = DensityState::pure_real(&[0.6, 0.8]).unwrap();
        let hist = [0, 0, 0];
        let s = conditional_system_state(&m, &rho, &hist).unwrap();
        let post = posterior_closed_form(&[0.36, 0.64], &hist, m.kernel()).unwrap();
        assert!((s.rho().entry(0, 0).re - post[0]).abs() < 1e-14);
        assert!((s.rho().entry(1, 1).re - post[1]).abs() < 1e-14);
    }

    #[test]
    fn degenerate_kernel_is_inconclusive() {
        let k = OutcomeKernel::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap();
        let r = ensemble_with_kernel(&k, &[0.5, 0.5], 20, 10, 1e-3, 1).unwrap();
        assert!(r.inconclusive);
        assert!(!r.non_degeneracy.rows_distinct);
        assert_eq!(r.collapsed, 0);
    }

    #[test]
    fn fit_recovers_line() {
        let pts: Vec<(f64, f64)> = (0..5).map(|k| (k as f64, 2.0 - 0.5 * k as f64)).collect();
        let f = linear_fit(&pts).unwrap();
        assert!((f.slope + 0.5).abs() < 1e-14 && (f.r_squared - 1.0).abs() < 1e-14);
        assert!(linear_fit(&pts[..2]).is_none());
    }
}
