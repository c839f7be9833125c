// SPDX-License-Identifier: Apache-2.0

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};

use super::{Operator, C64};
use crate::error::{Error, Result};

const UNITARY_TOL: f64 = 1e-10;
const GROUPOID_TOL: f64 = 1e-10;
const GRID_MATCH_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
enum Propagators {
    /// `U(t_i, t_0)` for each grid index; `U(t, s) = U(t, t0) U(s, t0)†`.
    Cumulative(Vec<Operator>),
    /// `U(t, s) = exp(-i H (t - s))`, with `H = V diag(e) V†`.
    Autonomous { energies: Vec<f64>, basis: DMatrix<C64> },
    /// Explicit `U(t_i, t_j)` for every `i >= j`.
    Pairs(BTreeMap<(usize, usize), Operator>),
}

/// Schrödinger-picture propagators `U(t, s)` on a strictly increasing time
/// grid, satisfying `U(t, s) U(s, u) = U(t, u)` and `U(t, t) = 1`.
#[derive(Debug, Clone)]
pub struct Evolution {
    grid: Vec<f64>,
    dim: usize,
    props: Propagators,
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::EmptyGrid);
    }
    if grid.iter().any(|t| !t.is_finite()) {
        return Err(Error::InvalidGrid("non-finite time".into()));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidGrid("times must be strictly increasing".into()));
    }
    Ok(())
}

impl Evolution {
    /// Trivial dynamics on `grid`.
    pub fn identity(grid: Vec<f64>, dim: usize) -> Result<Self> {
        check_grid(&grid)?;
        let props = Propagators::Cumulative(vec![Operator::identity(dim); grid.len()]);
        Ok(Self { grid, dim, props })
    }

    /// Builds the evolution from consecutive steps, `steps[i] = U(t_{i+1}, t_i)`.
    pub fn from_steps(grid: Vec<f64>, steps: Vec<Operator>) -> Result<Self> {
        check_grid(&grid)?;
        if steps.len() + 1 != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len() - 1,
                found: steps.len(),
            });
        }
        let dim = steps.first().map(Operator::dim).unwrap_or(1);
        let mut cumulative = vec![Operator::identity(dim)];
        for step in &steps {
            step.check_dim(dim)?;
            let defect = step.unitary_defect();
            if defect > UNITARY_TOL {
                return Err(Error::NotUnitary { defect });
            }
            let next = step * cumulative.last().expect("non-empty");
            cumulative.push(next);
        }
        Ok(Self {
            grid,
            dim,
            props: Propagators::Cumulative(cumulative),
        })
    }

    /// Like [`Evolution::from_steps`] but with a known dimension, so a
    /// single-point grid can carry a non-trivial Hilbert space.
    pub fn from_steps_with_dim(grid: Vec<f64>, dim: usize, steps: Vec<Operator>) -> Result<Self> {
        if steps.is_empty() {
            return Self::identity(grid, dim);
        }
        let evo = Self::from_steps(grid, steps)?;
        if evo.dim != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: evo.dim,
            });
        }
        Ok(evo)
    }

    /// Autonomous dynamics `U(t, s) = exp(-i H (t - s))` generated by a
    /// time-independent Hermitian `H`. The groupoid law is checked on the grid.
    pub fn autonomous(grid: Vec<f64>, hamiltonian: &Operator) -> Result<Self> {
        check_grid(&grid)?;
        let max_asymmetry = hamiltonian.hermitian_defect();
        if max_asymmetry > 1e-12 * hamiltonian.max_abs().max(1.0) {
            return Err(Error::NotHermitian { max_asymmetry });
        }
        let dim = hamiltonian.dim();
        let eig = nalgebra::SymmetricEigen::try_new(
            hamiltonian.hermitian_part().into_matrix(),
            f64::EPSILON,
            10_000,
        )
        .ok_or(Error::DecompositionFailure)?;
        let energies: Vec<f64> = eig.eigenvalues.iter().copied().collect();
        let basis = eig.eigenvectors;
        let evo = Self {
            grid,
            dim,
            props: Propagators::Autonomous { energies, basis },
        };
        let defect = evo.groupoid_defect();
        if defect > GROUPOID_TOL {
            return Err(Error::GroupoidViolation { defect });
        }
        Ok(evo)
    }

    /// Explicit propagators for grid pairs `(t, s)` with `t >= s`. Every such
    /// pair must be supplied (diagonal pairs may be omitted) and the groupoid
    /// law is checked on all triples.
    pub fn from_pairs(grid: Vec<f64>, pairs: Vec<((f64, f64), Operator)>) -> Result<Self> {
        check_grid(&grid)?;
        let dim = pairs.first().map(|(_, u)| u.dim()).unwrap_or(1);
        let mut map = BTreeMap::new();
        for ((t, s), u) in pairs {
            let i = index_in(&grid, t)?;
            let j = index_in(&grid, s)?;
            if i < j {
                return Err(Error::InvalidGrid(format!(
                    "propagator U({t}, {s}) runs backwards"
                )));
            }
            u.check_dim(dim)?;
            let defect = u.unitary_defect();
            if defect > UNITARY_TOL {
                return Err(Error::NotUnitary { defect });
            }
            map.insert((i, j), u);
        }
        for i in 0..grid.len() {
            let entry = map.entry((i, i)).or_insert_with(|| Operator::identity(dim));
            let defect = entry.max_abs_diff(&Operator::identity(dim));
            if defect > GROUPOID_TOL {
                return Err(Error::GroupoidViolation { defect });
            }
            for j in 0..i {
                if !map.contains_key(&(i, j)) {
                    return Err(Error::InvalidGrid(format!(
                        "missing propagator U({}, {})",
                        grid[i], grid[j]
                    )));
                }
            }
        }
        let evo = Self {
            grid,
            dim,
            props: Propagators::Pairs(map),
        };
        let defect = evo.groupoid_defect();
        if defect > GROUPOID_TOL {
            return Err(Error::GroupoidViolation { defect });
        }
        Ok(evo)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn start(&self) -> f64 {
        self.grid[0]
    }

    /// Grid index of `t`, matched within a small relative tolerance.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        index_in(&self.grid, t)
    }

    fn propagator_by_index(&self, i: usize, j: usize) -> Operator {
        match &self.props {
            Propagators::Cumulative(cum) => &cum[i] * &cum[j].adjoint(),
            Propagators::Autonomous { energies, basis } => {
                let dt = self.grid[i] - self.grid[j];
                let phases = DVector::from_iterator(
                    energies.len(),
                    energies.iter().map(|&e| C64::from_polar(1.0, -e * dt)),
                );
                let m = basis * DMatrix::from_diagonal(&phases) * basis.adjoint();
                Operator::from_matrix(m)
            }
            Propagators::Pairs(map) => {
                if i >= j {
                    map[&(i, j)].clone()
                } else {
                    map[&(j, i)].adjoint()
                }
            }
        }
    }

    /// `U(t, s)`. For `t < s` this is `U(s, t)†`.
    pub fn propagator(&self, t: f64, s: f64) -> Result<Operator> {
        let i = self.index_of(t)?;
        let j = self.index_of(s)?;
        Ok(self.propagator_by_index(i, j))
    }

    /// Largest entrywise defect of `U(t,s)U(s,u) - U(t,u)` over grid triples
    /// `t >= s >= u`, plus unitarity and `U(t,t) = 1`. All triples are checked
    /// on grids of up to 24 points; longer grids check consecutive triples and
    /// triples anchored at the first point.
    pub fn groupoid_defect(&self) -> f64 {
        let n = self.grid.len();
        let mut worst = 0.0_f64;
        let mut check = |i: usize, j: usize, k: usize| {
            let lhs = &self.propagator_by_index(i, j) * &self.propagator_by_index(j, k);
            worst = worst.max(lhs.max_abs_diff(&self.propagator_by_index(i, k)));
        };
        if n <= 24 {
            for i in 0..n {
                for j in 0..=i {
                    for k in 0..=j {
                        check(i, j, k);
                    }
                }
            }
        } else {
            for i in 2..n {
                check(i, i - 1, i - 2);
                check(i, i / 2, 0);
                check(i, i - 1, 0);
            }
        }
        for i in 0..n {
            let u = self.propagator_by_index(i, i);
            worst = worst.max(u.max_abs_diff(&Operator::identity(self.dim)));
            worst = worst.max(self.propagator_by_index(i, 0).unitary_defect());
        }
        worst
    }
}

fn index_in(grid: &[f64], t: f64) -> Result<usize> {
    let tol = GRID_MATCH_TOL * t.abs().max(1.0);
    let pos = grid.partition_point(|&g| g < t - tol);
    if pos < grid.len() && (grid[pos] - t).abs() <= tol {
        Ok(pos)
    } else {
        Err(Error::TimeNotOnGrid(t))
    }
}

/// Heisenberg picture `a(t) = U(t, t0)† a U(t, t0)`.
pub fn heisenberg(a: &Operator, evo: &Evolution, t: f64, t0: f64) -> Result<Operator> {
    a.check_dim(evo.dim())?;
    let u = evo.propagator(t, t0)?;
    Ok(&(&u.adjoint() * a) * &u)
}
