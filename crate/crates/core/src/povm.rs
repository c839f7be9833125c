// SPDX-License-Identifier: Apache-2.0

//! Square-root POVM families `{X_α}` with `Σ X_α† X_α = 1`, generalized
//! history probabilities and sequential measurement families.

use crate::error::{Error, Result};
use crate::histories::{IndexCodec, ProjectiveResolution, DEFAULT_FAMILY_CAP};
use crate::operator::{heisenberg, DensityState, Evolution, Operator};

const COMPLETENESS_TOL: f64 = 1e-10;
const NEGATIVE_TOL: f64 = 1e-12;

/// A finite family `{X_α}` whose POVM elements `X_α† X_α` sum to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct PovmFamily {
    label: String,
    elements: Vec<Operator>,
}

/// Completeness defects of a candidate family, as operator norms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PovmValidation {
    /// `||Σ X† X − 1||`
    pub left_defect: f64,
    /// `||Σ X X† − 1||`
    pub right_defect: f64,
}

impl PovmValidation {
    pub fn is_complete(&self, tol: f64) -> bool {
        self.left_defect <= tol
    }
}

impl PovmFamily {
    /// Validates `Σ X† X = 1` within `1e-10`.
    pub fn new(label: impl Into<String>, elements: Vec<Operator>) -> Result<Self> {
        let fam = Self::unchecked(label, elements)?;
        let v = validate_povm(&fam);
        if !v.is_complete(COMPLETENESS_TOL) {
            return Err(Error::InvalidPovm {
                defect: v.left_defect,
            });
        }
        Ok(fam)
    }

    /// Builds a family without the completeness check, for reporting on
    /// candidate families. Elements must still share one dimension.
    pub fn unchecked(label: impl Into<String>, elements: Vec<Operator>) -> Result<Self> {
        let label = label.into();
        let dim = elements
            .first()
            .map(Operator::dim)
            .ok_or_else(|| Error::InvalidResolution(format!("`{label}` has no elements")))?;
        for x in &elements {
            x.check_dim(dim)?;
        }
        Ok(Self { label, elements })
    }

    pub fn from_resolution(resolution: &ProjectiveResolution) -> Self {
        Self {
            label: resolution.label().to_string(),
            elements: resolution.projections().to_vec(),
        }
    }

    /// The one-element family `{1}`.
    pub fn identity(dim: usize) -> Self {
        Self {
            label: "identity".into(),
            elements: vec![Operator::identity(dim)],
        }
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn elements(&self) -> &[Operator] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.elements[0].dim()
    }

    fn element(&self, index: usize) -> Result<&Operator> {
        self.elements.get(index).ok_or_else(|| {
            Error::IndexOutOfRange(format!(
                "element {index} of `{}` with {} elements",
                self.label,
                self.elements.len()
            ))
        })
    }
}

/// Reports both completeness defects. Only the left one is required of a
/// square-root POVM; the right one holds for projective families but can
/// fail for composite ones.
pub fn validate_povm(fam: &PovmFamily) -> PovmValidation {
    let dim = fam.dim();
    let id = Operator::identity(dim);
    let left: Operator = fam.elements.iter().map(|x| &x.adjoint() * x).sum();
    let right: Operator = fam.elements.iter().map(|x| x * &x.adjoint()).sum();
    PovmValidation {
        left_defect: (&left - &id).operator_norm(),
        right_defect: (&right - &id).operator_norm(),
    }
}

fn check_sequence(state: &DensityState, povms: &[PovmFamily]) -> Result<()> {
    if povms.is_empty() {
        return Err(Error::InvalidResolution("empty POVM sequence".into()));
    }
    for f in povms {
        state.check_dim(f.dim())?;
    }
    Ok(())
}

fn chain(povms: &[PovmFamily], alpha: &[usize]) -> Result<Operator> {
    if alpha.len() != povms.len() {
        return Err(Error::IndexOutOfRange(format!(
            "multi-index has {} entries, sequence has {} POVMs",
            alpha.len(),
            povms.len()
        )));
    }
    let mut acc = Operator::identity(povms[0].dim());
    for (f, &a) in povms.iter().zip(alpha) {
        acc = f.element(a)? * &acc;
    }
    Ok(acc)
}

/// `ω(X^{(1)}† ⋯ X^{(n)}† X^{(n)} ⋯ X^{(1)})`, clamped to `[0, 1]`.
pub fn generalized_history_probability(
    state: &DensityState,
    povms: &[PovmFamily],
    alpha: &[usize],
) -> Result<f64> {
    check_sequence(state, povms)?;
    let x = chain(povms, alpha)?;
    let p = (&x * state.rho()).trace_product(&x.adjoint()).re;
    if !p.is_finite() {
        return Err(Error::NonFinite);
    }
    if p < -NEGATIVE_TOL {
        return Err(Error::NegativeProbability(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Sum of generalized history probabilities over all multi-indices.
pub fn total_generalized_probability(state: &DensityState, povms: &[PovmFamily]) -> Result<f64> {
    check_sequence(state, povms)?;
    let codec = IndexCodec::new(povms.iter().map(PovmFamily::len).collect());
    let mut total = 0.0;
    for alpha in codec.enumerate(DEFAULT_FAMILY_CAP)? {
        total += generalized_history_probability(state, povms, &alpha)?;
    }
    Ok(total)
}

/// Largest `|Σ_{α_i} Prob(α) − Prob(α with slot i removed)|` over the other
/// indices. Small values mark a sequence of successful experiments.
pub fn experiment_success_defect(
    state: &DensityState,
    povms: &[PovmFamily],
    slot: usize,
) -> Result<f64> {
    check_sequence(state, povms)?;
    let k = povms
        .get(slot)
        .ok_or_else(|| Error::IndexOutOfRange(format!("slot {slot} of {}", povms.len())))?
        .len();
    let reduced: Vec<PovmFamily> = povms
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != slot)
        .map(|(_, f)| f.clone())
        .collect();
    if reduced.is_empty() {
        let total: f64 = (0..k)
            .map(|a| generalized_history_probability(state, povms, &[a]))
            .sum::<Result<f64>>()?;
        return Ok((total - 1.0).abs());
    }
    let codec = IndexCodec::new(reduced.iter().map(PovmFamily::len).collect());
    let mut worst = 0.0_f64;
    for outer in codec.enumerate(DEFAULT_FAMILY_CAP)? {
        let coarse = generalized_history_probability(state, &reduced, &outer)?;
        let mut alpha = outer.clone();
        alpha.insert(slot, 0);
        let mut fine = 0.0;
        for a in 0..k {
            alpha[slot] = a;
            fine += generalized_history_probability(state, povms, &alpha)?;
        }
        worst = worst.max((fine - coarse).abs());
    }
    Ok(worst)
}

/// Times for the second measurement in a sequential family.
#[derive(Debug, Clone, PartialEq)]
pub enum SecondTimes {
    /// One time for every branch.
    Shared(f64),
    /// One time per good outcome of the first measurement, in the order of
    /// the good set.
    PerBranch(Vec<f64>),
}

/// Inputs for [`build_sequential_povm`].
#[derive(Debug, Clone)]
pub struct SequentialMeasurement<'a> {
    pub first: &'a ProjectiveResolution,
    pub t1: f64,
    pub second: &'a ProjectiveResolution,
    pub t2: SecondTimes,
    /// Outcomes of the first measurement after which the second one is
    /// carried out.
    pub good: Vec<usize>,
    pub evolution: &'a Evolution,
    pub t0: f64,
}

fn check_good_set(good: &[usize], k1: usize) -> Result<()> {
    for (i, &g) in good.iter().enumerate() {
        if g >= k1 {
            return Err(Error::InvalidGoodSet(format!(
                "outcome {g} out of range for {k1} outcomes"
            )));
        }
        if good[..i].contains(&g) {
            return Err(Error::InvalidGoodSet(format!("outcome {g} repeated")));
        }
    }
    Ok(())
}

/// Elements `X_{jl} = Π^{(2)}_l(t2_j) Π^{(1)}_j(t1)` for good `j`, followed by
/// `X_i = Π^{(1)}_i(t1)` for the remaining `i`. Elements are ordered by `j` in
/// the order of the good set, then `l`, then the bad outcomes ascending.
pub fn build_sequential_povm(meas: &SequentialMeasurement<'_>) -> Result<PovmFamily> {
    let k1 = meas.first.len();
    check_good_set(&meas.good, k1)?;
    let evo = meas.evolution;
    let first: Vec<Operator> = meas
        .first
        .projections()
        .iter()
        .map(|p| heisenberg(p, evo, meas.t1, meas.t0))
        .collect::<Result<_>>()?;
    let times: Vec<f64> = match &meas.t2 {
        SecondTimes::Shared(t) => vec![*t; meas.good.len()],
        SecondTimes::PerBranch(ts) => {
            if ts.len() != meas.good.len() {
                return Err(Error::InvalidGoodSet(format!(
                    "{} second-measurement times for {} good outcomes",
                    ts.len(),
                    meas.good.len()
                )));
            }
            ts.clone()
        }
    };
    let mut second = Vec::with_capacity(times.len());
    for &t2 in &times {
        if t2 <= meas.t1 {
            return Err(Error::InvalidGrid(format!(
                "second measurement at {t2} is not after {}",
                meas.t1
            )));
        }
        let ps: Vec<Operator> = meas
            .second
            .projections()
            .iter()
            .map(|p| heisenberg(p, evo, t2, meas.t0))
            .collect::<Result<_>>()?;
        second.push(ps);
    }
    build_sequential_from_groups(&first, &second, &meas.good)
}

/// Sequential family from explicit projections: `first[j]` for every outcome
/// of the first measurement, and `second[g]`, the resolution applied after
/// the `g`-th good outcome. Completeness is checked.
pub fn build_sequential_from_groups(
    first: &[Operator],
    second: &[Vec<Operator>],
    good: &[usize],
) -> Result<PovmFamily> {
    PovmFamily::new("sequential", sequential_elements(first, second, good)?)
}

/// Elements of a sequential family without the completeness check, for
/// projections that only approximately resolve the identity.
pub fn sequential_elements(
    first: &[Operator],
    second: &[Vec<Operator>],
    good: &[usize],
) -> Result<Vec<Operator>> {
    check_good_set(good, first.len())?;
    if second.len() != good.len() {
        return Err(Error::InvalidGoodSet(format!(
            "{} second resolutions for {} good outcomes",
            second.len(),
            good.len()
        )));
    }
    let mut elements = Vec::new();
    for (g, &j) in good.iter().enumerate() {
        for q in &second[g] {
            elements.push(q * &first[j]);
        }
    }
    for (i, p) in first.iter().enumerate() {
        if !good.contains(&i) {
            elements.push(p.clone());
        }
    }
    Ok(elements)
}
