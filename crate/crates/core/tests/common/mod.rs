// SPDX-License-Identifier: Apache-2.0

//! Independent reference computations used by the integration and
//! acceptance tests. None of these call into the routines they check.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use qlab::ndm::NdmModel;
use qlab::operator::{BlockAlgebra, DensityState, Operator};

pub type C = Complex<f64>;
pub type M = DMatrix<C>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Probability of passing `+` at `from` then `+` at `to` for a photon
/// already polarized along `from`.
pub fn malus(from: f64, to: f64) -> f64 {
    (to - from).cos().powi(2)
}

/// `Tr(H ρ H†)` with `H = P_n ⋯ P_1` multiplied out on raw matrices.
pub fn naive_chain_probability(rho: &M, chain: &[M]) -> f64 {
    let dim = rho.nrows();
    let mut h = M::identity(dim, dim);
    for p in chain {
        h = p * h;
    }
    (&h * rho * h.adjoint()).trace().re
}

/// `Tr(H(β) ρ H(α)†)` on raw matrices.
pub fn naive_decoherence_entry(rho: &M, alpha: &[M], beta: &[M]) -> C {
    let dim = rho.nrows();
    let fold = |ps: &[M]| ps.iter().fold(M::identity(dim, dim), |h, p| p * h);
    (fold(beta) * rho * fold(alpha).adjoint()).trace()
}

fn kron(a: &M, b: &M) -> M {
    a.kronecker(b)
}

/// Reduced system state after `k` probes, computed on the full
/// `dim_S · d^k` dimensional space: `W_k ⋯ W_1 (ρ ⊗ σ^{⊗k}) W_1† ⋯ W_k†`
/// with `W_j = Σ_α Π_α ⊗ 1 ⊗ ⋯ ⊗ U_α† (slot j) ⊗ ⋯ ⊗ 1`, then the partial
/// trace over all probes.
pub fn tensor_chain_reduced_state(model: &NdmModel, rho: &DensityState, k: usize) -> M {
    let ds = model.system_dim();
    let dp = model.probe_dim();
    let sigma = model.probe_state().rho().matrix().clone();
    let mut state = rho.rho().matrix().clone();
    for _ in 0..k {
        state = kron(&state, &sigma);
    }
    let id = |n: usize| M::identity(n, n);
    for j in 0..k {
        let mut w = M::zeros(ds * dp.pow(k as u32), ds * dp.pow(k as u32));
        for (alpha, p) in model.system_resolution().projections().iter().enumerate() {
            let u = model.probe_unitaries()[alpha].matrix().adjoint();
            let mut term = p.matrix().clone();
            for slot in 0..k {
                let factor = if slot == j { u.clone() } else { id(dp) };
                term = kron(&term, &factor);
            }
            w += term;
        }
        state = &w * state * w.adjoint();
    }
    let rest = dp.pow(k as u32);
    let mut out = M::zeros(ds, ds);
    for i in 0..ds {
        for l in 0..ds {
            let mut acc = C::new(0.0, 0.0);
            for r in 0..rest {
                acc += state[(i * rest + r, l * rest + r)];
            }
            out[(i, l)] = acc;
        }
    }
    out
}

fn random_unitary_matrix(n: usize, rng: &mut ChaCha8Rng) -> M {
    let g = M::from_fn(n, n, |_, _| C::new(gauss(rng), gauss(rng)));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        let d = r[(j, j)];
        let ph = if d.norm() > 0.0 { d / d.norm() } else { C::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= ph;
        }
    }
    q
}

pub fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}

/// Unitary acting blockwise inside `alg` and close to `b`: `b · exp(i ε H)`
/// with `H` a random block-diagonal Hermitian matrix.
fn perturb_in_algebra(b: &M, alg: &BlockAlgebra, eps: f64, rng: &mut ChaCha8Rng) -> M {
    let n = b.nrows();
    let v = alg.basis_change().matrix();
    let mut h = M::zeros(n, n);
    for r in alg.blocks() {
        for i in r.clone() {
            for j in r.clone() {
                if i <= j {
                    let z = C::new(gauss(rng), if i == j { 0.0 } else { gauss(rng) });
                    h[(i, j)] = z;
                    h[(j, i)] = z.conj();
                }
            }
        }
    }
    let h = v * h * v.adjoint();
    let step = (h * C::new(0.0, eps)).exp();
    b * step
}

fn random_unitary_in_algebra(alg: &BlockAlgebra, rng: &mut ChaCha8Rng) -> M {
    let n = alg.dim();
    let mut u = M::zeros(n, n);
    for r in alg.blocks() {
        let block = random_unitary_matrix(r.len(), rng);
        for (a, i) in r.clone().enumerate() {
            for (b, j) in r.clone().enumerate() {
                u[(i, j)] = block[(a, b)];
            }
        }
    }
    let v = alg.basis_change().matrix();
    v * u * v.adjoint()
}

/// Lower estimate of `sup |Tr(c b)|` over unitaries `b` in `alg`, which
/// equals the supremum over the unit ball. Uses `evaluations / 10` random
/// starts and a stochastic hill climb for the rest of the budget.
pub fn sampled_functional_norm(c: &Operator, alg: &BlockAlgebra, evaluations: usize, seed: u64) -> f64 {
    let mut rng = rng(seed);
    let cm = c.matrix();
    let value = |b: &M| (cm * b).trace().norm();
    let starts = evaluations / 10;
    let mut best_b = random_unitary_in_algebra(alg, &mut rng);
    let mut best = value(&best_b);
    for _ in 1..starts {
        let b = random_unitary_in_algebra(alg, &mut rng);
        let v = value(&b);
        if v > best {
            best = v;
            best_b = b;
        }
    }
    let mut eps = 0.5;
    for _ in starts..evaluations {
        let b = perturb_in_algebra(&best_b, alg, eps, &mut rng);
        let v = value(&b);
        if v > best {
            best = v;
            best_b = b;
        } else {
            eps = (eps * 0.995).max(1e-4);
        }
    }
    best
}

/// Dimension of `{x : [ρ, x] = 0}` from the singular values of the
/// superoperator `x ↦ ρx − xρ` on vectorized matrices.
pub fn commutant_dimension(rho: &M, tol: f64) -> (usize, Vec<M>) {
    let n = rho.nrows();
    let id = M::identity(n, n);
    // vec(ρX − Xρ) = (1 ⊗ ρ − ρᵀ ⊗ 1) vec(X) in column-major order
    let l = kron(&id, rho) - kron(&rho.transpose(), &id);
    let svd = l.clone().svd(true, true);
    let v_t = svd.v_t.expect("requested");
    let mut basis = Vec::new();
    for (i, s) in svd.singular_values.iter().enumerate() {
        if *s <= tol {
            let row = v_t.row(i).adjoint();
            basis.push(M::from_column_slice(n, n, row.as_slice()));
        }
    }
    (basis.len(), basis)
}

pub fn to_op(m: &M) -> Operator {
    Operator::new(m.clone()).expect("finite matrix")
}

/// Random Hermitian matrix in `alg`.
pub fn hermitian_in(alg: &BlockAlgebra, rng: &mut ChaCha8Rng) -> Operator {
    let a = qlab::random::hermitian(alg.dim(), rng);
    alg.pinch(&a).expect("dims").hermitian_part()
}
