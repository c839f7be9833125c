// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;

use common::{naive_chain_probability, naive_decoherence_entry, rng, C, M};
use qlab::histories::{
    born_weights, chain_operator, decoherence_matrix, delta_consistency, evidence, history_probability,
    interference_term, lueders_update, sum_rule_defect, sum_rule_defects, total_probability, Convention,
    HistoryFamily, ProjectiveResolution,
};
use qlab::operator::{DensityState, Operator};
use qlab::random;
use qlab::Error;

fn polarizers(angles: &[f64]) -> HistoryFamily {
    HistoryFamily::new(
        angles
            .iter()
            .enumerate()
            .map(|(i, &a)| (i as f64, ProjectiveResolution::polarizer(a)))
            .collect(),
    )
    .unwrap()
}

fn raw_chain(fam: &HistoryFamily, alpha: &[usize]) -> Vec<M> {
    alpha
        .iter()
        .enumerate()
        .map(|(slot, &a)| fam.projection(slot, a).unwrap().matrix().clone())
        .collect()
}

fn op_norm(m: &M) -> f64 {
    m.singular_values().iter().cloned().fold(0.0, f64::max)
}

const THETA: [f64; 3] = [0.0, PI / 6.0, PI / 3.0];

#[test]
fn unpolarized_two_filter_values() {
    let s = DensityState::maximally_mixed(2);
    let p = history_probability(&s, &polarizers(&[0.0, PI / 6.0]), &[0, 0]).unwrap();
    assert!((p - 0.5 * (PI / 6.0).cos().powi(2)).abs() < 1e-12);
    assert!((p - 0.375).abs() < 1e-12);
    let p = history_probability(&s, &polarizers(&[0.0, PI / 3.0]), &[0, 1]).unwrap();
    assert!((p - 0.375).abs() < 1e-12);
    let a = history_probability(&s, &polarizers(&[0.0, PI / 6.0]), &[0, 1]).unwrap();
    let b = history_probability(&s, &polarizers(&[PI / 6.0, PI / 3.0]), &[0, 1]).unwrap();
    assert!((a + b - 0.25).abs() < 1e-12);
}

#[test]
fn trivial_history_has_probability_one() {
    let mut r = rng(1);
    let s = random::full_rank_state(3, &mut r);
    let fam = HistoryFamily::new(vec![(0.0, ProjectiveResolution::trivial(3)), (1.0, ProjectiveResolution::trivial(3))])
        .unwrap();
    assert!((history_probability(&s, &fam, &[0, 0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn three_slot_polarization_totals_and_defect() {
    let s = DensityState::maximally_mixed(2);
    let fam = polarizers(&THETA);
    assert_eq!(fam.num_histories().unwrap(), 8);
    assert!((total_probability(&s, &fam).unwrap() - 1.0).abs() < 1e-12);
    let defects = sum_rule_defects(&s, &fam, 1).unwrap();
    let d = defects.iter().find(|(o, _)| o == &vec![0, 1]).unwrap().1;
    assert!((d - 3.0 / 16.0).abs() < 1e-12, "{d}");
    assert!(sum_rule_defect(&s, &fam, 2).unwrap() < 1e-12);
}

#[test]
fn interference_entry_matches_matrix_chain() {
    let s = DensityState::maximally_mixed(2);
    let fam = polarizers(&THETA);
    let a = [0, 0, 1];
    let b = [0, 1, 1];
    let rho = s.rho().matrix().clone();
    let oracle = naive_decoherence_entry(&rho, &raw_chain(&fam, &a), &raw_chain(&fam, &b));
    let da = THETA[1] - THETA[0];
    let db = THETA[2] - THETA[1];
    let closed = (2.0 * da).sin() * (2.0 * db).sin() / 8.0;
    assert!((oracle.norm() - closed.abs()).abs() < 1e-12);
    let term = interference_term(&s, &fam, &a, &b, 1).unwrap();
    assert!((term.norm() - 3.0 / 32.0).abs() < 1e-12);
    let p = decoherence_matrix(&s, &fam, Convention::Unconstrained).unwrap();
    assert!((p.entry(&a, &b).unwrap() - oracle).norm() < 1e-12);
    assert!((p.entry(&a, &b).unwrap() - term).norm() < 1e-12);
    for alpha in fam.histories().unwrap() {
        for beta in fam.histories().unwrap() {
            let o = naive_decoherence_entry(&rho, &raw_chain(&fam, &alpha), &raw_chain(&fam, &beta));
            assert!((p.entry(&alpha, &beta).unwrap() - o).norm() < 1e-12);
        }
    }
    let diag = p.diagonal();
    for (i, alpha) in fam.histories().unwrap().iter().enumerate() {
        assert!((diag[i] - history_probability(&s, &fam, alpha).unwrap()).abs() < 1e-12);
    }
    assert!(p.hermitian_defect() < 1e-14);
}

#[test]
fn constrained_convention_zeroes_different_final_outcomes() {
    let s = DensityState::maximally_mixed(2);
    let fam = polarizers(&THETA);
    let p = decoherence_matrix(&s, &fam, Convention::SameFinalOutcome).unwrap();
    assert_eq!(p.entry(&[0, 0, 0], &[0, 0, 1]).unwrap(), C::new(0.0, 0.0));
    assert!(p.entry(&[0, 0, 1], &[0, 1, 1]).unwrap().norm() > 0.09);
}

#[test]
fn interference_error_paths() {
    let s = DensityState::maximally_mixed(2);
    let fam = polarizers(&THETA);
    assert!(matches!(
        interference_term(&s, &fam, &[0, 0, 1], &[1, 1, 1], 1),
        Err(Error::IndicesNotAdjacentVariant { .. })
    ));
    let one = polarizers(&[0.0]);
    assert!(matches!(interference_term(&s, &one, &[0], &[1], 0), Err(Error::NoInteriorSlot)));
}

#[test]
fn polarization_evidence_and_delta() {
    let s = DensityState::maximally_mixed(2);
    let fam = polarizers(&THETA);
    let rho = s.rho().matrix().clone();
    let hs = fam.histories().unwrap();
    let n = hs.len();
    let mut off = M::zeros(n, n);
    for (i, a) in hs.iter().enumerate() {
        for (j, b) in hs.iter().enumerate() {
            if i != j {
                off[(i, j)] = naive_decoherence_entry(&rho, &raw_chain(&fam, a), &raw_chain(&fam, b));
            }
        }
    }
    let e = evidence(&s, &fam, Convention::Unconstrained).unwrap();
    assert!(e < 1.0);
    assert!((e - (1.0 - op_norm(&off))).abs() < 1e-12);

    // explicit commutators [Π^(i), Π^(n-1) ⋯ Π^(i+1)]
    let mut worst = 0.0_f64;
    for alpha in &hs {
        let chain = raw_chain(&fam, alpha);
        for i in 0..2 {
            let mut h = M::identity(2, 2);
            for p in &chain[i + 1..] {
                h = p * h;
            }
            let c = &chain[i] * &h - &h * &chain[i];
            worst = worst.max(op_norm(&c));
        }
    }
    let d = delta_consistency(&fam).unwrap();
    assert!(d.delta < 1.0);
    assert!((d.max_commutator - worst).abs() < 1e-12);
    assert!((d.delta - (1.0 - worst)).abs() < 1e-12);
    assert_eq!(delta_consistency(&polarizers(&[0.3])).unwrap().delta, 1.0);
}

#[test]
fn normalization_over_random_families() {
    let mut r = rng(2024);
    for case in 0..100 {
        let dim = 1 + case % 6;
        let slots = 1 + case % 4;
        let fam = random::family(dim, slots, 3, &mut r);
        let s = random::full_rank_state(dim, &mut r);
        assert!((total_probability(&s, &fam).unwrap() - 1.0).abs() < 1e-10, "case {case}");
        let rho = s.rho().matrix().clone();
        for alpha in fam.histories().unwrap() {
            let o = naive_chain_probability(&rho, &raw_chain(&fam, &alpha));
            assert!((history_probability(&s, &fam, &alpha).unwrap() - o.clamp(0.0, 1.0)).abs() < 1e-12);
        }
        assert!(sum_rule_defect(&s, &fam, slots - 1).unwrap() < 1e-12);
    }
}

#[test]
fn commuting_families_are_classical() {
    let mut r = rng(77);
    for case in 0..100 {
        let dim = 2 + case % 5;
        let fam = random::commuting_family(dim, 1 + case % 4, 3, &mut r);
        let s = random::full_rank_state(dim, &mut r);
        let p = decoherence_matrix(&s, &fam, Convention::Unconstrained).unwrap();
        assert!(p.max_off_diagonal() < 1e-12);
        assert!((evidence(&s, &fam, Convention::Unconstrained).unwrap() - 1.0).abs() < 1e-10);
        for slot in 0..fam.len() {
            assert!(sum_rule_defect(&s, &fam, slot).unwrap() < 1e-12);
        }
        assert!((delta_consistency(&fam).unwrap().delta - 1.0).abs() < 1e-12);
    }
}

#[test]
fn pure_state_on_one_history_has_full_evidence() {
    let fam = HistoryFamily::new(vec![
        (0.0, ProjectiveResolution::computational(3)),
        (1.0, ProjectiveResolution::computational(3)),
    ])
    .unwrap();
    let s = DensityState::basis(3, 1).unwrap();
    assert!((evidence(&s, &fam, Convention::Unconstrained).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn zeno_chain_matches_closed_form() {
    let mut last = -1.0;
    for n in [1usize, 2, 3, 10, 100, 1000] {
        let angles: Vec<f64> = (1..=n).map(|j| j as f64 * PI / (2.0 * n as f64)).collect();
        let fam = polarizers(&angles).with_cap(usize::MAX);
        let p = history_probability(&DensityState::basis(2, 0).unwrap(), &fam, &vec![0; n]).unwrap();
        let closed = (PI / (2.0 * n as f64)).cos().powi(2 * n as i32);
        assert!((p - closed).abs() < 1e-12, "n={n}");
        assert!(p > last);
        last = p;
        if n == 3 {
            assert!((p - 27.0 / 64.0).abs() < 1e-12);
        }
    }
    assert!((last - 0.997536).abs() < 1e-6);
}

#[test]
fn chain_operator_orders_later_slots_left() {
    let fam = polarizers(&THETA);
    let h = chain_operator(&fam, &[0, 1, 0], 1).unwrap();
    let expected = fam.projection(2, 0).unwrap() * fam.projection(1, 1).unwrap();
    assert!(h.max_abs_diff(&expected) < 1e-15);
    assert!(chain_operator(&fam, &[0, 1, 0], 3).is_err());
    assert!(chain_operator(&fam, &[0, 2, 0], 0).is_err());
}

#[test]
fn family_cap_is_enforced() {
    let fam = polarizers(&[0.0; 13]);
    assert!(matches!(
        decoherence_matrix(&DensityState::maximally_mixed(2), &fam, Convention::Unconstrained),
        Err(Error::FamilyTooLarge { .. })
    ));
}

#[test]
fn lueders_examples() {
    let mut r = rng(3);
    let res = ProjectiveResolution::computational(3);
    let s = DensityState::diagonal(&[0.2, 0.3, 0.5]).unwrap();
    let u = lueders_update(&s, &res, None).unwrap();
    assert!(u.rho().max_abs_diff(s.rho()) < 1e-15);

    let plus = lueders_update(&DensityState::maximally_mixed(2), &ProjectiveResolution::polarizer(0.0), Some(0)).unwrap();
    assert!(plus.rho().max_abs_diff(&Operator::diagonal(&[1.0, 0.0])) < 1e-15);

    let s = random::full_rank_state(4, &mut r);
    let res = random::resolution(4, 3, &mut r);
    let mixed = lueders_update(&s, &res, None).unwrap();
    let w = born_weights(&s, &res).unwrap();
    for (p, wi) in res.projections().iter().zip(&w) {
        assert!((mixed.probability(p) - wi).abs() < 1e-12);
        assert!((s.probability(p) - wi).abs() < 1e-12);
    }
    let blocked = lueders_update(&DensityState::basis(2, 0).unwrap(), &ProjectiveResolution::polarizer(0.0), Some(1));
    assert!(matches!(blocked, Err(Error::ZeroProbabilityBranch(_))));
}

#[test]
fn perturbed_commuting_family_commutators_scale_linearly() {
    let mut r = rng(8);
    let dim = 4;
    let base = random::commuting_family(dim, 3, 2, &mut r);
    let h = random::hermitian(dim, &mut r);
    let perturbed = |eps: f64| {
        let m = (h.matrix() * C::new(0.0, eps)).exp();
        let u = Operator::new(m).unwrap();
        let mut slots = Vec::new();
        for i in 0..base.len() {
            let res = base.resolution(i).unwrap();
            let res = if i == 1 { res.conjugated(&u).unwrap() } else { res.clone() };
            slots.push((i as f64, res));
        }
        delta_consistency(&HistoryFamily::new(slots).unwrap()).unwrap().max_commutator
    };
    let small = perturbed(1e-4) / 1e-4;
    let large = perturbed(1e-2) / 1e-2;
    assert!(small.is_finite() && large.is_finite());
    if small > 1e-9 {
        assert!((large / small - 1.0).abs() < 0.5, "{small} {large}");
    }
}
