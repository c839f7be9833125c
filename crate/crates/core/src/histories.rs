// SPDX-License-Identifier: Apache-2.0

//! History probabilities and consistency diagnostics for time-ordered
//! sequences of projective measurements.
//!
//! Slots are indexed from 0. A history `α = (α_0, …, α_{n-1})` selects one
//! projection per slot; its chain operator is `H(α) = Π_{α_{n-1}} ⋯ Π_{α_0}`
//! with every projection in the Heisenberg picture at its slot time, and its
//! probability is `trace(H ρ H†)`.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operator::{
    heisenberg, spectral_decompose, BlockAlgebra, DensityState, Evolution, Filtration, Observable,
    Operator, C64, DEFAULT_CLUSTER_TOL,
};

const RESOLUTION_TOL: f64 = 1e-10;
const NEGATIVE_TOL: f64 = 1e-12;
const BRANCH_TOL: f64 = 1e-12;

/// Default upper bound on the number of histories for operations that
/// enumerate a whole family.
pub const DEFAULT_FAMILY_CAP: usize = 4096;

/// Orthogonal projections summing to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveResolution {
    label: String,
    projections: Vec<Operator>,
}

impl ProjectiveResolution {
    pub fn new(label: impl Into<String>, projections: Vec<Operator>) -> Result<Self> {
        let label = label.into();
        let first = projections
            .first()
            .ok_or_else(|| Error::InvalidResolution(format!("`{label}` has no projections")))?;
        let dim = first.dim();
        for p in &projections {
            p.check_dim(dim)?;
        }
        let mut worst_pair = 0.0_f64;
        for (i, p) in projections.iter().enumerate() {
            for (j, q) in projections.iter().enumerate() {
                let prod = p * q;
                let target = if i == j { p.clone() } else { Operator::zeros(dim) };
                worst_pair = worst_pair.max(prod.max_abs_diff(&target));
            }
            worst_pair = worst_pair.max(p.hermitian_defect());
        }
        if worst_pair > RESOLUTION_TOL {
            return Err(Error::InvalidResolution(format!(
                "`{label}`: projections not orthogonal idempotents (defect {worst_pair:e})"
            )));
        }
        let sum: Operator = projections.iter().cloned().sum();
        let completeness = sum.max_abs_diff(&Operator::identity(dim));
        if completeness > RESOLUTION_TOL {
            return Err(Error::InvalidResolution(format!(
                "`{label}`: projections do not sum to 1 (defect {completeness:e})"
            )));
        }
        Ok(Self { label, projections })
    }

    /// Spectral projections of an observable, in decreasing eigenvalue order.
    pub fn from_observable(label: impl Into<String>, obs: &Observable) -> Result<Self> {
        Self::new(label, obs.projections())
    }

    /// Spectral projections of a Hermitian operator.
    pub fn from_hermitian(label: impl Into<String>, a: &Operator) -> Result<Self> {
        Self::from_observable(label, &spectral_decompose(a, DEFAULT_CLUSTER_TOL)?)
    }

    /// The single-outcome resolution `{1}`.
    pub fn trivial(dim: usize) -> Self {
        Self {
            label: "trivial".into(),
            projections: vec![Operator::identity(dim)],
        }
    }

    /// Linear polarizer at angle `theta`: index 0 passes `(cos θ, sin θ)`,
    /// index 1 is the orthogonal complement.
    pub fn polarizer(theta: f64) -> Self {
        let (c, s) = (theta.cos(), theta.sin());
        let plus = Operator::from_real_rows(2, &[c * c, c * s, c * s, s * s]).expect("2x2");
        let minus = &Operator::identity(2) - &plus;
        Self {
            label: format!("polarizer({theta})"),
            projections: vec![plus, minus],
        }
    }

    /// Projections onto the standard basis vectors.
    pub fn computational(dim: usize) -> Self {
        let projections = (0..dim)
            .map(|i| {
                let mut d = vec![0.0; dim];
                d[i] = 1.0;
                Operator::diagonal(&d)
            })
            .collect();
        Self {
            label: "computational".into(),
            projections,
        }
    }

    /// `U† Π U` for every projection.
    pub fn conjugated(&self, u: &Operator) -> Result<Self> {
        u.check_dim(self.dim())?;
        let ud = u.adjoint();
        Ok(Self {
            label: self.label.clone(),
            projections: self.projections.iter().map(|p| &(&ud * p) * u).collect(),
        })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn projections(&self) -> &[Operator] {
        &self.projections
    }

    pub fn projection(&self, index: usize) -> Result<&Operator> {
        self.projections.get(index).ok_or_else(|| {
            Error::IndexOutOfRange(format!(
                "outcome {index} of `{}` with {} outcomes",
                self.label,
                self.projections.len()
            ))
        })
    }

    pub fn len(&self) -> usize {
        self.projections.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projections.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.projections[0].dim()
    }
}

/// Flat-index codec for multi-indices, last slot varying fastest.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexCodec {
    sizes: Vec<usize>,
}

impl IndexCodec {
    pub fn new(sizes: Vec<usize>) -> Self {
        Self { sizes }
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of multi-indices, or `None` on overflow.
    pub fn count(&self) -> Option<usize> {
        self.sizes.iter().try_fold(1usize, |acc, &k| acc.checked_mul(k))
    }

    fn count_string(&self) -> String {
        let mut digits = vec![1u32];
        for &k in &self.sizes {
            let mut carry = 0u64;
            for d in digits.iter_mut() {
                let v = *d as u64 * k as u64 + carry;
                *d = (v % 1_000_000_000) as u32;
                carry = v / 1_000_000_000;
            }
            while carry > 0 {
                digits.push((carry % 1_000_000_000) as u32);
                carry /= 1_000_000_000;
            }
        }
        let mut s = digits.last().unwrap().to_string();
        for d in digits.iter().rev().skip(1) {
            s.push_str(&format!("{d:09}"));
        }
        s
    }

    pub fn check(&self, alpha: &[usize]) -> Result<()> {
        if alpha.len() != self.sizes.len() {
            return Err(Error::IndexOutOfRange(format!(
                "multi-index has {} entries, family has {} slots",
                alpha.len(),
                self.sizes.len()
            )));
        }
        for (slot, (&a, &k)) in alpha.iter().zip(&self.sizes).enumerate() {
            if a >= k {
                return Err(Error::IndexOutOfRange(format!(
                    "outcome {a} at slot {slot} with {k} outcomes"
                )));
            }
        }
        Ok(())
    }

    pub fn encode(&self, alpha: &[usize]) -> Result<usize> {
        self.check(alpha)?;
        let mut flat = 0usize;
        for (&a, &k) in alpha.iter().zip(&self.sizes) {
            flat = flat
                .checked_mul(k)
                .and_then(|f| f.checked_add(a))
                .ok_or_else(|| Error::IndexOutOfRange("flat index overflows".into()))?;
        }
        Ok(flat)
    }

    pub fn decode(&self, mut flat: usize) -> Vec<usize> {
        let mut alpha = vec![0; self.sizes.len()];
        for (slot, &k) in self.sizes.iter().enumerate().rev() {
            alpha[slot] = flat % k;
            flat /= k;
        }
        alpha
    }

    /// All multi-indices in lexicographic order, subject to `cap`.
    pub fn enumerate(&self, cap: usize) -> Result<Vec<Vec<usize>>> {
        let n = self.capped_count(cap)?;
        Ok((0..n).map(|f| self.decode(f)).collect())
    }

    pub(crate) fn capped_count(&self, cap: usize) -> Result<usize> {
        match self.count() {
            Some(n) if n <= cap => Ok(n),
            _ => Err(Error::FamilyTooLarge {
                size: self.count_string(),
                cap,
            }),
        }
    }
}

#[derive(Debug, Clone)]
struct Slot {
    time: f64,
    resolution: ProjectiveResolution,
    evolved: Vec<Operator>,
}

/// Time-ordered projective resolutions, with Heisenberg-picture projections
/// cached per slot.
#[derive(Debug, Clone)]
pub struct HistoryFamily {
    slots: Vec<Slot>,
    dim: usize,
    codec: IndexCodec,
    cap: usize,
}

impl HistoryFamily {
    /// Family with static projections (trivial dynamics).
    pub fn new(slots: Vec<(f64, ProjectiveResolution)>) -> Result<Self> {
        Self::build(slots, |p, _| Ok(p.clone()))
    }

    /// Family whose projections evolve under `evo`: slot projection `Π` at
    /// time `t` becomes `U(t, t0)† Π U(t, t0)`.
    pub fn evolved(slots: Vec<(f64, ProjectiveResolution)>, evo: &Evolution, t0: f64) -> Result<Self> {
        evo.index_of(t0)?;
        Self::build(slots, |p, t| heisenberg(p, evo, t, t0))
    }

    fn build<F>(slots: Vec<(f64, ProjectiveResolution)>, evolve: F) -> Result<Self>
    where
        F: Fn(&Operator, f64) -> Result<Operator>,
    {
        let dim = slots
            .first()
            .map(|(_, r)| r.dim())
            .ok_or_else(|| Error::InvalidResolution("family has no slots".into()))?;
        if slots.windows(2).any(|w| w[1].0 <= w[0].0) {
            return Err(Error::InvalidGrid("slot times must be strictly increasing".into()));
        }
        let mut built = Vec::with_capacity(slots.len());
        for (time, resolution) in slots {
            if resolution.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: resolution.dim(),
                });
            }
            let evolved = resolution
                .projections()
                .iter()
                .map(|p| evolve(p, time))
                .collect::<Result<Vec<_>>>()?;
            built.push(Slot {
                time,
                resolution,
                evolved,
            });
        }
        let codec = IndexCodec::new(built.iter().map(|s| s.resolution.len()).collect());
        Ok(Self {
            slots: built,
            dim,
            codec,
            cap: DEFAULT_FAMILY_CAP,
        })
    }

    /// Overrides the enumeration cap.
    pub fn with_cap(mut self, cap: usize) -> Self {
        self.cap = cap;
        self
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn sizes(&self) -> &[usize] {
        self.codec.sizes()
    }

    pub fn codec(&self) -> &IndexCodec {
        &self.codec
    }

    pub fn times(&self) -> Vec<f64> {
        self.slots.iter().map(|s| s.time).collect()
    }

    pub fn resolution(&self, slot: usize) -> Result<&ProjectiveResolution> {
        self.slot(slot).map(|s| &s.resolution)
    }

    /// Number of histories, or `FamilyTooLarge` beyond the cap.
    pub fn num_histories(&self) -> Result<usize> {
        self.codec.capped_count(self.cap)
    }

    /// All histories in lexicographic order.
    pub fn histories(&self) -> Result<Vec<Vec<usize>>> {
        self.codec.enumerate(self.cap)
    }

    /// Heisenberg-picture projection of outcome `index` at `slot`.
    pub fn projection(&self, slot: usize, index: usize) -> Result<&Operator> {
        let s = self.slot(slot)?;
        s.evolved.get(index).ok_or_else(|| {
            Error::IndexOutOfRange(format!("outcome {index} at slot {slot}"))
        })
    }

    pub fn projections(&self, slot: usize) -> Result<&[Operator]> {
        self.slot(slot).map(|s| s.evolved.as_slice())
    }

    fn slot(&self, slot: usize) -> Result<&Slot> {
        self.slots.get(slot).ok_or_else(|| {
            Error::IndexOutOfRange(format!("slot {slot} of {}", self.slots.len()))
        })
    }

    /// The family with `slot` removed.
    pub fn without_slot(&self, slot: usize) -> Result<Self> {
        self.slot(slot)?;
        let slots: Vec<Slot> = self
            .slots
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != slot)
            .map(|(_, s)| s.clone())
            .collect();
        let codec = IndexCodec::new(slots.iter().map(|s| s.resolution.len()).collect());
        Ok(Self {
            slots,
            dim: self.dim,
            codec,
            cap: self.cap,
        })
    }

    /// `Π_{α_{to-1}} ⋯ Π_{α_from}`; identity when `from == to`.
    pub(crate) fn partial_chain(&self, alpha: &[usize], from: usize, to: usize) -> Operator {
        if from >= to {
            return Operator::identity(self.dim);
        }
        let mut acc = self.slots[from].evolved[alpha[from]].clone();
        for k in from + 1..to {
            acc = &self.slots[k].evolved[alpha[k]] * &acc;
        }
        acc
    }
}

/// Chain operator `H_k(α) = Π^{(n-1)}_{α_{n-1}} ⋯ Π^{(k)}_{α_k}`.
pub fn chain_operator(fam: &HistoryFamily, alpha: &[usize], k: usize) -> Result<Operator> {
    fam.codec.check(alpha)?;
    if k >= fam.len() {
        return Err(Error::IndexOutOfRange(format!(
            "slot {k} of {}",
            fam.len()
        )));
    }
    Ok(fam.partial_chain(alpha, k, fam.len()))
}

fn clamp_probability(p: f64) -> Result<f64> {
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    if p < -NEGATIVE_TOL {
        return Err(Error::NegativeProbability(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// `trace(H ρ H†)` for an arbitrary chain operator, without clamping.
pub(crate) fn gram_expectation(state: &DensityState, h: &Operator) -> f64 {
    let hr = h * state.rho();
    hr.trace_product(&h.adjoint()).re
}

/// `Prob_ω(α) = trace(H(α) ρ H(α)†)`, clamped to `[0, 1]`.
pub fn history_probability(state: &DensityState, fam: &HistoryFamily, alpha: &[usize]) -> Result<f64> {
    state.check_dim(fam.dim())?;
    let h = chain_operator(fam, alpha, 0)?;
    clamp_probability(gram_expectation(state, &h))
}

/// Sum of all history probabilities (1 by completeness).
pub fn total_probability(state: &DensityState, fam: &HistoryFamily) -> Result<f64> {
    state.check_dim(fam.dim())?;
    let mut total = 0.0;
    for alpha in fam.histories()? {
        total += history_probability(state, fam, &alpha)?;
    }
    Ok(total)
}

/// Which off-diagonal entries of the decoherence matrix are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Convention {
    /// Every pair of histories.
    #[default]
    Unconstrained,
    /// Entries whose histories differ in the final outcome are set to 0.
    SameFinalOutcome,
}

/// `P_{α,α'} = ω(H(α)† H(α'))` over all pairs of histories.
#[derive(Debug, Clone)]
pub struct DecoherenceMatrix {
    codec: IndexCodec,
    convention: Convention,
    entries: DMatrix<C64>,
}

impl DecoherenceMatrix {
    pub fn len(&self) -> usize {
        self.entries.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.nrows() == 0
    }

    pub fn codec(&self) -> &IndexCodec {
        &self.codec
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn entry(&self, alpha: &[usize], beta: &[usize]) -> Result<C64> {
        Ok(self.entries[(self.codec.encode(alpha)?, self.codec.encode(beta)?)])
    }

    /// Real parts of the diagonal: the history probabilities.
    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.entries[(i, i)].re).collect()
    }

    /// `P - diag(P)`.
    pub fn off_diagonal(&self) -> Operator {
        let mut m = self.entries.clone();
        for i in 0..m.nrows() {
            m[(i, i)] = C64::new(0.0, 0.0);
        }
        Operator::from_matrix(m)
    }

    /// Largest off-diagonal modulus.
    pub fn max_off_diagonal(&self) -> f64 {
        self.off_diagonal().max_abs()
    }

    pub fn hermitian_defect(&self) -> f64 {
        Operator::from_matrix(self.entries.clone()).hermitian_defect()
    }
}

/// Fills the decoherence matrix. Rows are computed in parallel; each entry is
/// an independent fixed-order sum, so the result does not depend on thread
/// count.
pub fn decoherence_matrix(
    state: &DensityState,
    fam: &HistoryFamily,
    convention: Convention,
) -> Result<DecoherenceMatrix> {
    state.check_dim(fam.dim())?;
    let n = fam.num_histories()?;
    let histories = fam.histories()?;
    let last = fam.len() - 1;
    let chains: Vec<Operator> = histories
        .par_iter()
        .map(|a| fam.partial_chain(a, 0, fam.len()))
        .collect();
    // P_{α,α'} = trace(H(α') ρ H(α)†) = Σ_ij (H(α')ρ)_ij conj(H(α)_ij)
    let kets: Vec<Operator> = chains.par_iter().map(|h| h * state.rho()).collect();
    let dim = fam.dim();
    let rows: Vec<Vec<C64>> = (0..n)
        .into_par_iter()
        .map(|a| {
            (0..n)
                .map(|b| {
                    if convention == Convention::SameFinalOutcome
                        && histories[a][last] != histories[b][last]
                    {
                        return C64::new(0.0, 0.0);
                    }
                    let (h, k) = (chains[a].matrix(), kets[b].matrix());
                    let mut acc = C64::new(0.0, 0.0);
                    for j in 0..dim {
                        for i in 0..dim {
                            acc += k[(i, j)] * h[(i, j)].conj();
                        }
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let entries = DMatrix::from_fn(n, n, |i, j| rows[i][j]);
    Ok(DecoherenceMatrix {
        codec: fam.codec.clone(),
        convention,
        entries,
    })
}

/// Interference term `ω(H(α)† H(β))` for histories that differ only at
/// `slot`.
pub fn interference_term(
    state: &DensityState,
    fam: &HistoryFamily,
    alpha: &[usize],
    beta: &[usize],
    slot: usize,
) -> Result<C64> {
    state.check_dim(fam.dim())?;
    if fam.len() < 2 {
        return Err(Error::NoInteriorSlot);
    }
    fam.codec.check(alpha)?;
    fam.codec.check(beta)?;
    if slot >= fam.len() {
        return Err(Error::IndexOutOfRange(format!("slot {slot} of {}", fam.len())));
    }
    if alpha
        .iter()
        .zip(beta)
        .enumerate()
        .any(|(i, (a, b))| i != slot && a != b)
    {
        return Err(Error::IndicesNotAdjacentVariant { slot });
    }
    let ha = fam.partial_chain(alpha, 0, fam.len());
    let hb = fam.partial_chain(beta, 0, fam.len());
    let hb_rho = &hb * state.rho();
    Ok(hb_rho.trace_product(&ha.adjoint()))
}

/// Largest violation of the sum rule at `slot`, over all choices of the other
/// outcomes: `|Σ_{α_slot} Prob(α) − Prob(α with slot removed)|`.
pub fn sum_rule_defect(state: &DensityState, fam: &HistoryFamily, slot: usize) -> Result<f64> {
    Ok(sum_rule_defects(state, fam, slot)?
        .into_iter()
        .map(|(_, d)| d)
        .fold(0.0, f64::max))
}

/// Sum-rule defect for each choice of the outer outcomes, in lexicographic
/// order of the reduced multi-index.
pub fn sum_rule_defects(
    state: &DensityState,
    fam: &HistoryFamily,
    slot: usize,
) -> Result<Vec<(Vec<usize>, f64)>> {
    state.check_dim(fam.dim())?;
    let k = fam.resolution(slot)?.len();
    fam.num_histories()?;
    if fam.len() == 1 {
        let total: f64 = (0..k)
            .map(|a| history_probability(state, fam, &[a]))
            .sum::<Result<f64>>()?;
        return Ok(vec![(vec![], (total - 1.0).abs())]);
    }
    let reduced = fam.without_slot(slot)?;
    let mut out = Vec::new();
    for outer in reduced.histories()? {
        let coarse = history_probability(state, &reduced, &outer)?;
        let mut fine = 0.0;
        let mut alpha = outer.clone();
        alpha.insert(slot, 0);
        for a in 0..k {
            alpha[slot] = a;
            fine += history_probability(state, fam, &alpha)?;
        }
        out.push((outer, (fine - coarse).abs()));
    }
    Ok(out)
}

/// Commutator diagnostics of a family.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaConsistency {
    /// `1 − max ||[Π^{(i)}_{α_i}, H_{i+1}(α)]||`.
    pub delta: f64,
    pub max_commutator: f64,
    /// `max ||[Π^{(i)}_{α_i}, H_{i+1}(α)† H_{i+1}(α)]||`.
    pub max_q_commutator: f64,
    /// Slot and outcomes `(α_i, …, α_{n-1})` attaining `max_commutator`;
    /// the first in lexicographic order on ties.
    pub worst: Option<(usize, Vec<usize>)>,
}

/// Quantifies how far a family is from consistency through commutators of
/// slot projections with later chain operators. The final slot has no later
/// chain and contributes nothing.
pub fn delta_consistency(fam: &HistoryFamily) -> Result<DeltaConsistency> {
    let n = fam.len();
    let mut max_c = 0.0_f64;
    let mut max_q = 0.0_f64;
    let mut worst = None;
    for i in 0..n.saturating_sub(1) {
        let tail = IndexCodec::new(fam.sizes()[i..].to_vec());
        for local in tail.enumerate(fam.cap)? {
            let mut alpha = vec![0; i];
            alpha.extend_from_slice(&local);
            let h = fam.partial_chain(&alpha, i + 1, n);
            let p = &fam.slots[i].evolved[alpha[i]];
            let c = p.commutator(&h).operator_norm();
            let q = &h.adjoint() * &h;
            let cq = p.commutator(&q).operator_norm();
            if c > max_c {
                max_c = c;
                worst = Some((i, local.clone()));
            }
            max_q = max_q.max(cq);
        }
    }
    Ok(DeltaConsistency {
        delta: 1.0 - max_c,
        max_commutator: max_c,
        max_q_commutator: max_q,
        worst,
    })
}

/// Evidence `1 − ||P − diag(P)||` of the decoherence matrix.
pub fn evidence(state: &DensityState, fam: &HistoryFamily, convention: Convention) -> Result<f64> {
    let p = decoherence_matrix(state, fam, convention)?;
    Ok(1.0 - p.off_diagonal().operator_norm())
}

/// Lüders update. With no observed outcome, returns the decohered mixture
/// `Σ Π_i ρ Π_i`; with outcome `i`, returns `Π_i ρ Π_i / ω(Π_i)`.
pub fn lueders_update(
    state: &DensityState,
    resolution: &ProjectiveResolution,
    observed: Option<usize>,
) -> Result<DensityState> {
    state.check_dim(resolution.dim())?;
    let rho = state.rho();
    match observed {
        None => {
            let mixed: Operator = resolution
                .projections()
                .iter()
                .map(|p| &(p * rho) * p)
                .sum();
            Ok(DensityState::from_trusted(mixed))
        }
        Some(i) => {
            let p = resolution.projection(i)?;
            let weight = state.probability(p);
            if weight.is_nan() || weight <= BRANCH_TOL {
                return Err(Error::ZeroProbabilityBranch(weight));
            }
            Ok(DensityState::from_trusted((&(p * rho) * p).scale_real(1.0 / weight)))
        }
    }
}

/// Born weights `ω(Π_i)` of a resolution.
pub fn born_weights(state: &DensityState, resolution: &ProjectiveResolution) -> Result<Vec<f64>> {
    state.check_dim(resolution.dim())?;
    Ok(resolution
        .projections()
        .iter()
        .map(|p| state.probability(p))
        .collect())
}

/// Per-slot check that every slot projection lies in the algebra at
/// `t_tilde[i]` and commutes with the algebra at the next slot time.
/// Returns `(membership_defect, commutant_defect)` per slot; the last slot has
/// no later algebra and reports a commutant defect of 0.
pub fn relative_commutant_defects(
    fam: &HistoryFamily,
    filtration: &Filtration,
    t_tilde: &[f64],
) -> Result<Vec<(f64, f64)>> {
    if t_tilde.len() != fam.len() {
        return Err(Error::DimensionMismatch {
            expected: fam.len(),
            found: t_tilde.len(),
        });
    }
    let times = fam.times();
    let mut out = Vec::with_capacity(fam.len());
    for (i, &tt) in t_tilde.iter().enumerate() {
        let lower = if i == 0 { f64::NEG_INFINITY } else { times[i - 1] };
        if !(tt > lower && tt <= times[i]) {
            return Err(Error::InvalidGrid(format!(
                "t_tilde[{i}] = {tt} must lie in ({lower}, {}]",
                times[i]
            )));
        }
        let inner: &BlockAlgebra = filtration.algebra_at(tt);
        let outer = times.get(i + 1).map(|&t| filtration.algebra_at(t));
        let mut member = 0.0_f64;
        let mut comm = 0.0_f64;
        for p in fam.projections(i)? {
            member = member.max(inner.pinch(p)?.max_abs_diff(p));
            if let Some(o) = outer {
                comm = comm.max(o.commutant_defect(p)?);
            }
        }
        out.push((member, comm));
    }
    Ok(out)
}
