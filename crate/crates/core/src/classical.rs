// SPDX-License-Identifier: Apache-2.0

//! Finite classical systems with deterministic, invertible dynamics.
//!
//! A model has `n` points, a time grid, one permutation per grid step and a
//! set of named events. Embedding it as diagonal matrices gives an exact
//! oracle for the commuting case of the quantum modules.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::histories::{HistoryFamily, ProjectiveResolution};
use crate::operator::{DensityState, Evolution, Operator, C64};

const WEIGHT_TOL: f64 = 1e-12;

/// State space, grid, step permutations and named events.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalModel {
    n: usize,
    grid: Vec<f64>,
    /// `forward[i][ξ]`: the point reached at `grid[i]` from `ξ` at `grid[0]`.
    forward: Vec<Vec<usize>>,
    steps: Vec<Vec<usize>>,
    events: BTreeMap<String, Vec<bool>>,
}

fn check_permutation(p: &[usize], n: usize) -> Result<()> {
    if p.len() != n {
        return Err(Error::InvalidModel(format!(
            "permutation has {} entries for {n} points",
            p.len()
        )));
    }
    let mut seen = vec![false; n];
    for &x in p {
        if x >= n || seen[x] {
            return Err(Error::InvalidModel(format!("{p:?} is not a permutation")));
        }
        seen[x] = true;
    }
    Ok(())
}

fn invert(p: &[usize]) -> Vec<usize> {
    let mut inv = vec![0; p.len()];
    for (i, &x) in p.iter().enumerate() {
        inv[x] = i;
    }
    inv
}

impl ClassicalModel {
    /// `steps[i][ξ]` is the image at `grid[i+1]` of the point `ξ` at
    /// `grid[i]`. Events are given as point sets.
    pub fn new(
        n: usize,
        grid: Vec<f64>,
        steps: Vec<Vec<usize>>,
        events: Vec<(String, Vec<usize>)>,
    ) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidModel("empty state space".into()));
        }
        if grid.is_empty() {
            return Err(Error::EmptyGrid);
        }
        if grid.iter().any(|t| !t.is_finite()) || grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidGrid("times must be finite and strictly increasing".into()));
        }
        if steps.len() + 1 != grid.len() {
            return Err(Error::InvalidModel(format!(
                "{} steps for a grid of {} times",
                steps.len(),
                grid.len()
            )));
        }
        let mut forward = vec![(0..n).collect::<Vec<_>>()];
        for s in &steps {
            check_permutation(s, n)?;
            let prev = forward.last().unwrap();
            forward.push(prev.iter().map(|&x| s[x]).collect());
        }
        let mut table = BTreeMap::new();
        for (name, points) in events {
            let mut chi = vec![false; n];
            for p in points {
                if p >= n {
                    return Err(Error::InvalidModel(format!(
                        "event `{name}` contains point {p} of {n}"
                    )));
                }
                chi[p] = true;
            }
            table.insert(name, chi);
        }
        let model = Self {
            n,
            grid,
            forward,
            steps,
            events: table,
        };
        let violations = model.groupoid_violations();
        if violations > 0 {
            return Err(Error::GroupoidViolation {
                defect: violations as f64,
            });
        }
        Ok(model)
    }

    pub fn num_points(&self) -> usize {
        self.n
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn steps(&self) -> &[Vec<usize>] {
        &self.steps
    }

    pub fn event_names(&self) -> impl Iterator<Item = &str> {
        self.events.keys().map(String::as_str)
    }

    pub fn event(&self, name: &str) -> Result<&[bool]> {
        self.events
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownEvent(name.to_string()))
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * t.abs().max(1.0);
        self.grid
            .iter()
            .position(|&g| (g - t).abs() <= tol)
            .ok_or(Error::TimeNotOnGrid(t))
    }

    /// The map `φ(t, s)` sending the point at time `s` to its position at
    /// time `t`. Defined for either order of `t` and `s`.
    pub fn flow(&self, t: f64, s: f64) -> Result<Vec<usize>> {
        let (i, j) = (self.index_of(t)?, self.index_of(s)?);
        Ok(self.flow_by_index(i, j))
    }

    fn flow_by_index(&self, i: usize, j: usize) -> Vec<usize> {
        let back = invert(&self.forward[j]);
        back.iter().map(|&x| self.forward[i][x]).collect()
    }

    /// Number of grid triples violating `φ(t,s)∘φ(s,u) = φ(t,u)`, plus pairs
    /// violating `φ(s,t) = φ(t,s)⁻¹`.
    pub fn groupoid_violations(&self) -> usize {
        let m = self.grid.len();
        let mut bad = 0;
        for i in 0..m {
            for j in 0..m {
                let ij = self.flow_by_index(i, j);
                if invert(&ij) != self.flow_by_index(j, i) {
                    bad += 1;
                }
                for k in 0..m {
                    let jk = self.flow_by_index(j, k);
                    let composed: Vec<usize> = jk.iter().map(|&x| ij[x]).collect();
                    if composed != self.flow_by_index(i, k) {
                        bad += 1;
                    }
                }
            }
        }
        bad
    }
}

/// Probability vector over the points of a model.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalState {
    weights: Vec<f64>,
}

impl ClassicalState {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidDistribution("no weights".into()));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidDistribution("weights must be finite and non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > WEIGHT_TOL {
            return Err(Error::InvalidDistribution(format!("weights sum to {total}")));
        }
        Ok(Self { weights })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            weights: vec![1.0 / n as f64; n],
        }
    }

    /// Point mass at `point`.
    pub fn dirac(n: usize, point: usize) -> Result<Self> {
        if point >= n {
            return Err(Error::IndexOutOfRange(format!("point {point} of {n}")));
        }
        let mut weights = vec![0.0; n];
        weights[point] = 1.0;
        Ok(Self { weights })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

fn check_state(mu: &ClassicalState, model: &ClassicalModel) -> Result<()> {
    if mu.weights.len() != model.n {
        return Err(Error::DimensionMismatch {
            expected: model.n,
            found: mu.weights.len(),
        });
    }
    Ok(())
}

fn indicator_probability(mu: &ClassicalState, model: &ClassicalModel, slots: &[(usize, Vec<bool>)]) -> f64 {
    let mut total = 0.0;
    for (xi, &w) in mu.weights.iter().enumerate() {
        if slots.iter().all(|(i, chi)| chi[model.forward[*i][xi]]) {
            total += w;
        }
    }
    total
}

fn resolve_slots(model: &ClassicalModel, slots: &[(f64, &str)]) -> Result<Vec<(usize, Vec<bool>)>> {
    slots
        .iter()
        .map(|&(t, name)| Ok((model.index_of(t)?, model.event(name)?.to_vec())))
        .collect()
}

/// `Σ_ξ μ(ξ) Π_i χ_{Ω_i}(ξ_{t_i})`, where `ξ_t` is the position at `t` of the
/// point `ξ` at the first grid time.
pub fn classical_history_probability(
    mu: &ClassicalState,
    model: &ClassicalModel,
    slots: &[(f64, &str)],
) -> Result<f64> {
    check_state(mu, model)?;
    let resolved = resolve_slots(model, slots)?;
    Ok(indicator_probability(mu, model, &resolved))
}

/// `|Prob(Ω_i) + Prob(Ω_iᶜ) − Prob(slot i removed)|` with the other slots
/// fixed.
pub fn classical_sum_rule_defect(
    mu: &ClassicalState,
    model: &ClassicalModel,
    slots: &[(f64, &str)],
    slot: usize,
) -> Result<f64> {
    check_state(mu, model)?;
    if slot >= slots.len() {
        return Err(Error::IndexOutOfRange(format!("slot {slot} of {}", slots.len())));
    }
    let mut resolved = resolve_slots(model, slots)?;
    let inside = indicator_probability(mu, model, &resolved);
    resolved[slot].1.iter_mut().for_each(|b| *b = !*b);
    let outside = indicator_probability(mu, model, &resolved);
    resolved.remove(slot);
    let coarse = indicator_probability(mu, model, &resolved);
    Ok((inside + outside - coarse).abs())
}

/// First and last grid times at which the trajectory of `xi0` (a point at
/// the first grid time) lies in `event`.
pub fn hitting_times(
    xi0: usize,
    model: &ClassicalModel,
    event: &str,
) -> Result<(Option<f64>, Option<f64>)> {
    if xi0 >= model.n {
        return Err(Error::IndexOutOfRange(format!("point {xi0} of {}", model.n)));
    }
    let chi = model.event(event)?;
    let hits: Vec<f64> = (0..model.grid.len())
        .filter(|&i| chi[model.forward[i][xi0]])
        .map(|i| model.grid[i])
        .collect();
    Ok((hits.first().copied(), hits.last().copied()))
}

/// Diagonal-matrix image of a classical model and state.
#[derive(Debug, Clone)]
pub struct QuantumEmbedding {
    pub state: DensityState,
    pub evolution: Evolution,
    events: BTreeMap<String, Operator>,
}

impl QuantumEmbedding {
    /// Diagonal projection of an event.
    pub fn event_projection(&self, name: &str) -> Result<&Operator> {
        self.events
            .get(name)
            .ok_or_else(|| Error::UnknownEvent(name.to_string()))
    }

    /// Resolution `{χ_Ω, 1 − χ_Ω}`, so outcome 0 is the event itself.
    pub fn event_resolution(&self, name: &str) -> Result<ProjectiveResolution> {
        let p = self.event_projection(name)?.clone();
        let q = &Operator::identity(p.dim()) - &p;
        ProjectiveResolution::new(name, vec![p, q])
    }

    /// History family for `slots`, evolved by the permutation unitaries from
    /// the first grid time.
    pub fn family(&self, slots: &[(f64, &str)]) -> Result<HistoryFamily> {
        let entries = slots
            .iter()
            .map(|&(t, name)| Ok((t, self.event_resolution(name)?)))
            .collect::<Result<Vec<_>>>()?;
        HistoryFamily::evolved(entries, &self.evolution, self.evolution.start())
    }
}

fn permutation_unitary(p: &[usize]) -> Operator {
    let n = p.len();
    let mut entries = vec![C64::new(0.0, 0.0); n * n];
    for (from, &to) in p.iter().enumerate() {
        entries[to * n + from] = C64::new(1.0, 0.0);
    }
    Operator::from_rows(n, &entries).expect("permutation matrix")
}

/// `ρ = diag(μ)`, events as diagonal projections, steps as permutation
/// unitaries with `U|ξ⟩ = |σ(ξ)⟩`.
pub fn embed_as_quantum(model: &ClassicalModel, mu: &ClassicalState) -> Result<QuantumEmbedding> {
    check_state(mu, model)?;
    let state = DensityState::diagonal(&mu.weights)?;
    let steps = model.steps.iter().map(|s| permutation_unitary(s)).collect();
    let evolution = Evolution::from_steps_with_dim(model.grid.clone(), model.n, steps)?;
    let events = model
        .events
        .iter()
        .map(|(name, chi)| {
            let d: Vec<f64> = chi.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            (name.clone(), Operator::diagonal(&d))
        })
        .collect();
    Ok(QuantumEmbedding {
        state,
        evolution,
        events,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{history_probability, sum_rule_defect};

    fn cyclic() -> ClassicalModel {
        ClassicalModel::new(
            3,
            vec![0.0, 1.0, 2.0],
            vec![vec![1, 2, 0], vec![1, 2, 0]],
            vec![
                ("all".into(), vec![0, 1, 2]),
                ("two".into(), vec![2]),
                ("zero".into(), vec![0]),
                ("none".into(), vec![]),
                ("low".into(), vec![0, 1]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn full_events_have_probability_one() {
        let m = cyclic();
        let mu = ClassicalState::uniform(3);
        let p = classical_history_probability(&mu, &m, &[(0.0, "all"), (2.0, "all")]).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
    }

    #[test]
    fn cyclic_two_slot_enumeration() {
        let m = cyclic();
        let mu = ClassicalState::uniform(3);
        // points in `low` at t=0 whose image at t=1 is also in `low`: only 0
        let p = classical_history_probability(&mu, &m, &[(0.0, "low"), (1.0, "low")]).unwrap();
        assert!((p - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(
            classical_history_probability(&mu, &m, &[(0.0, "missing")]),
            Err(Error::UnknownEvent("missing".into()))
        );
    }

    #[test]
    fn dirac_probabilities_are_zero_or_one() {
        let m = cyclic();
        for x in 0..3 {
            let mu = ClassicalState::dirac(3, x).unwrap();
            let p = classical_history_probability(&mu, &m, &[(0.0, "low"), (2.0, "two")]).unwrap();
            assert!(p == 0.0 || p == 1.0);
        }
    }

    #[test]
    fn hitting_times_on_cycle() {
        let m = cyclic();
        assert_eq!(hitting_times(0, &m, "two").unwrap(), (Some(2.0), Some(2.0)));
        assert_eq!(hitting_times(0, &m, "none").unwrap(), (None, None));
        let id = ClassicalModel::new(
            2,
            vec![0.0, 1.0, 5.0],
            vec![vec![0, 1], vec![0, 1]],
            vec![("a".into(), vec![1])],
        )
        .unwrap();
        assert_eq!(hitting_times(1, &id, "a").unwrap(), (Some(0.0), Some(5.0)));
    }

    #[test]
    fn flow_groupoid_and_inverse() {
        let m = cyclic();
        assert_eq!(m.flow(2.0, 0.0).unwrap(), vec![2, 0, 1]);
        assert_eq!(m.flow(0.0, 2.0).unwrap(), vec![1, 2, 0]);
        assert_eq!(m.groupoid_violations(), 0);
    }

    #[test]
    fn rejects_non_permutation() {
        assert!(ClassicalModel::new(2, vec![0.0, 1.0], vec![vec![0, 0]], vec![]).is_err());
    }

    #[test]
    fn quantum_embedding_agrees() {
        let m = cyclic();
        let mu = ClassicalState::new(vec![0.5, 0.3, 0.2]).unwrap();
        let q = embed_as_quantum(&m, &mu).unwrap();
        let slots = [(0.0, "low"), (1.0, "two"), (2.0, "zero")];
        let fam = q.family(&slots).unwrap();
        let pq = history_probability(&q.state, &fam, &[0, 0, 0]).unwrap();
        let pc = classical_history_probability(&mu, &m, &slots).unwrap();
        assert!((pq - pc).abs() < 1e-15);
        for i in 0..3 {
            assert!(sum_rule_defect(&q.state, &fam, i).unwrap() < 1e-15);
            assert!(classical_sum_rule_defect(&mu, &m, &slots, i).unwrap() < 1e-15);
        }
    }

    #[test]
    fn uniform_two_point_embedding() {
        let m = ClassicalModel::new(2, vec![0.0], vec![], vec![("a".into(), vec![0])]).unwrap();
        let q = embed_as_quantum(&m, &ClassicalState::uniform(2)).unwrap();
        assert_eq!(q.state.rho(), &Operator::diagonal(&[0.5, 0.5]));
        let r = q.event_resolution("a").unwrap();
        assert_eq!(r.projections()[0], Operator::diagonal(&[1.0, 0.0]));
        assert_eq!(r.projections()[1], Operator::diagonal(&[0.0, 1.0]));
    }
}
