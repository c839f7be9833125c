// SPDX-License-Identifier: Apache-2.0

mod common;

use std::f64::consts::PI;

use common::{naive_chain_probability, rng, to_op, M};
use qlab::histories::{history_probability, sum_rule_defect, HistoryFamily, ProjectiveResolution};
use qlab::operator::{DensityState, Evolution, Operator};
use qlab::povm::{
    build_sequential_povm, experiment_success_defect, generalized_history_probability,
    total_generalized_probability, validate_povm, PovmFamily, SecondTimes, SequentialMeasurement,
};
use qlab::random;
use qlab::Error;

fn pol(theta: f64) -> ProjectiveResolution {
    ProjectiveResolution::polarizer(theta)
}

/// Kraus operators cut from a random isometry `C^d → C^{d·k}`.
fn isometry_povm(dim: usize, k: usize, seed: u64) -> PovmFamily {
    let mut r = rng(seed);
    let u = random::unitary(dim * k, &mut r);
    let m = u.matrix();
    let elements = (0..k)
        .map(|i| to_op(&M::from_fn(dim, dim, |a, b| m[(i * dim + a, b)])))
        .collect();
    PovmFamily::new("isometry", elements).unwrap()
}

#[test]
fn projective_resolution_has_no_defects() {
    let mut r = rng(4);
    for dim in 1..6 {
        let v = validate_povm(&PovmFamily::from_resolution(&random::resolution(dim, 3, &mut r)));
        assert!(v.left_defect < 1e-12 && v.right_defect < 1e-12);
    }
}

#[test]
fn four_and_three_element_polarizer_families() {
    let (p2, p3) = (pol(PI / 6.0), pol(PI / 3.0));
    let x = |a: usize, b: usize| &p3.projections()[a] * &p2.projections()[b];
    let four = PovmFamily::new("four", vec![x(0, 0), x(0, 1), x(1, 0), x(1, 1)]).unwrap();
    let v = validate_povm(&four);
    assert!(v.left_defect < 1e-12 && v.right_defect < 1e-12);
    let three = PovmFamily::new("three", vec![x(0, 0), x(1, 0), p2.projections()[1].clone()]).unwrap();
    let v = validate_povm(&three);
    assert!(v.left_defect < 1e-12);
    assert!(v.right_defect > 0.1, "{}", v.right_defect);
}

#[test]
fn incomplete_family_rejected() {
    let p = pol(0.0);
    assert!(matches!(
        PovmFamily::new("half", vec![p.projections()[0].clone()]),
        Err(Error::InvalidPovm { .. })
    ));
}

#[test]
fn virtual_history_value() {
    let s = DensityState::maximally_mixed(2);
    let seq = [PovmFamily::from_resolution(&pol(PI / 6.0)), PovmFamily::from_resolution(&pol(PI / 3.0))];
    let p = generalized_history_probability(&s, &seq, &[1, 0]).unwrap();
    let chain = [pol(PI / 6.0).projections()[1].matrix().clone(), pol(PI / 3.0).projections()[0].matrix().clone()];
    let oracle = naive_chain_probability(s.rho().matrix(), &chain);
    assert!((p - oracle).abs() < 1e-12);
    assert!((p - 0.125).abs() < 1e-12);
}

#[test]
fn projective_reduction_matches_histories() {
    let mut r = rng(99);
    for case in 0..60 {
        let dim = 1 + case % 5;
        let fam = random::family(dim, 1 + case % 3, 3, &mut r);
        let s = random::full_rank_state(dim, &mut r);
        let povms: Vec<PovmFamily> = (0..fam.len())
            .map(|i| PovmFamily::from_resolution(fam.resolution(i).unwrap()))
            .collect();
        for alpha in fam.histories().unwrap() {
            let a = generalized_history_probability(&s, &povms, &alpha).unwrap();
            let b = history_probability(&s, &fam, &alpha).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
        for slot in 0..fam.len() {
            let a = experiment_success_defect(&s, &povms, slot).unwrap();
            let b = sum_rule_defect(&s, &fam, slot).unwrap();
            assert!((a - b).abs() < 1e-12);
        }
    }
}

#[test]
fn polarization_virtual_slot_defect() {
    let s = DensityState::maximally_mixed(2);
    let angles = [0.0, PI / 6.0, PI / 3.0];
    let povms: Vec<PovmFamily> = angles.iter().map(|&a| PovmFamily::from_resolution(&pol(a))).collect();
    let fam = HistoryFamily::new(angles.iter().enumerate().map(|(i, &a)| (i as f64, pol(a))).collect()).unwrap();
    let d = experiment_success_defect(&s, &povms, 1).unwrap();
    assert!(d > 0.1);
    assert!((d - sum_rule_defect(&s, &fam, 1).unwrap()).abs() < 1e-12);
}

#[test]
fn decohered_slot_is_successful() {
    let mut r = rng(6);
    let s = DensityState::diagonal(&random::distribution(4, &mut r)).unwrap();
    let povms = [
        PovmFamily::from_resolution(&ProjectiveResolution::computational(4)),
        isometry_povm(4, 3, 7),
    ];
    assert!(experiment_success_defect(&s, &povms, 0).unwrap() < 1e-8);
}

#[test]
fn generalized_probabilities_sum_to_one() {
    let mut r = rng(13);
    for seed in 0..30 {
        let dim = 2 + seed as usize % 3;
        let povms = [isometry_povm(dim, 2, seed), isometry_povm(dim, 3, seed + 100), isometry_povm(dim, 2, seed + 200)];
        for p in &povms {
            assert!(validate_povm(p).left_defect < 1e-10);
        }
        let s = random::full_rank_state(dim, &mut r);
        assert!((total_generalized_probability(&s, &povms).unwrap() - 1.0).abs() < 1e-10);
    }
    let s = random::full_rank_state(3, &mut r);
    let ids = [PovmFamily::identity(3), PovmFamily::identity(3)];
    assert!((generalized_history_probability(&s, &ids, &[0, 0]).unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn sequential_families() {
    let mut r = rng(31);
    let h = random::hermitian(3, &mut r);
    let evo = Evolution::autonomous(vec![0.0, 0.5, 1.0, 1.5], &h).unwrap();
    let first = random::resolution(3, 3, &mut r);
    let second = random::resolution(3, 2, &mut r);
    let meas = |good: Vec<usize>, t2: SecondTimes| SequentialMeasurement {
        first: &first,
        t1: 0.5,
        second: &second,
        t2,
        good,
        evolution: &evo,
        t0: 0.0,
    };
    let all = build_sequential_povm(&meas(vec![0, 1, 2], SecondTimes::Shared(1.0))).unwrap();
    assert_eq!(all.len(), 6);
    assert!(validate_povm(&all).left_defect < 1e-10);

    let none = build_sequential_povm(&meas(vec![], SecondTimes::Shared(1.0))).unwrap();
    assert_eq!(none.len(), 3);
    for (x, p) in none.elements().iter().zip(first.projections()) {
        let pt = qlab::operator::heisenberg(p, &evo, 0.5, 0.0).unwrap();
        assert!(x.max_abs_diff(&pt) < 1e-12);
    }

    let per = build_sequential_povm(&meas(vec![2, 0], SecondTimes::PerBranch(vec![1.0, 1.5]))).unwrap();
    assert!(validate_povm(&per).left_defect < 1e-10);

    assert!(matches!(
        build_sequential_povm(&meas(vec![3], SecondTimes::Shared(1.0))),
        Err(Error::InvalidGoodSet(_))
    ));
    assert!(matches!(
        build_sequential_povm(&meas(vec![1, 1], SecondTimes::Shared(1.0))),
        Err(Error::InvalidGoodSet(_))
    ));
    assert!(build_sequential_povm(&meas(vec![1], SecondTimes::Shared(0.5))).is_err());
}

#[test]
fn two_level_branch_dependent_times() {
    let h = Operator::pauli_x().scale_real(0.7);
    let evo = Evolution::autonomous(vec![0.0, 1.0, 2.0, 3.0], &h).unwrap();
    let res = ProjectiveResolution::computational(2);
    let fam = build_sequential_povm(&SequentialMeasurement {
        first: &res,
        t1: 1.0,
        second: &res,
        t2: SecondTimes::PerBranch(vec![3.0]),
        good: vec![1],
        evolution: &evo,
        t0: 0.0,
    })
    .unwrap();
    // direct sum Π_0(t1) + Σ_l Π_1(t1) Π_l(t2) Π_1(t1)
    let p = |i: usize, t: f64| qlab::operator::heisenberg(&res.projections()[i], &evo, t, 0.0).unwrap();
    let mut sum = p(0, 1.0).matrix().clone();
    for l in 0..2 {
        sum += (&(&p(1, 1.0) * &p(l, 3.0)) * &p(1, 1.0)).matrix();
    }
    assert!((sum - M::identity(2, 2)).camax() < 1e-12);
    assert!(validate_povm(&fam).left_defect < 1e-12);
}
