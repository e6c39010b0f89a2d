//! Linear programming: problem model and a bounded-variable primal simplex.

mod lu;
mod simplex;
mod text;

pub use simplex::{Basis, Simplex};
pub use text::{read_text, write_milp_text, write_text, TextError};

use crate::milp::MilpProblem;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

impl Sense {
    pub fn symbol(self) -> &'static str {
        match self {
            Sense::Le => "<=",
            Sense::Eq => "=",
            Sense::Ge => ">=",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub lower: f64,
    pub upper: f64,
}

impl Bounds {
    pub const fn new(lower: f64, upper: f64) -> Bounds {
        Bounds { lower, upper }
    }

    pub const fn non_negative() -> Bounds {
        Bounds::new(0.0, f64::INFINITY)
    }

    pub const fn binary() -> Bounds {
        Bounds::new(0.0, 1.0)
    }

    pub const fn free() -> Bounds {
        Bounds::new(f64::NEG_INFINITY, f64::INFINITY)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Row {
    pub name: String,
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

/// `min objective·x + objective_offset` subject to rows and variable bounds.
#[derive(Clone, Debug, PartialEq)]
pub struct LpProblem {
    pub num_vars: usize,
    pub objective: Vec<(usize, f64)>,
    pub objective_offset: f64,
    pub rows: Vec<Row>,
    pub bounds: Vec<Bounds>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LpError {
    #[error("row {row} references variable {var} but the problem has {num_vars}")]
    IndexOutOfRange { row: usize, var: usize, num_vars: usize },
    #[error("objective references variable {var} but the problem has {num_vars}")]
    ObjectiveIndex { var: usize, num_vars: usize },
    #[error("row {0} has a non-finite right-hand side or coefficient")]
    NonFinite(usize),
    #[error("variable {0} has lower bound above upper bound")]
    InvertedBounds(usize),
    #[error("bounds vector has {got} entries, expected {expected}")]
    BoundsLength { got: usize, expected: usize },
}

impl LpProblem {
    pub fn new() -> LpProblem {
        LpProblem {
            num_vars: 0,
            objective: Vec::new(),
            objective_offset: 0.0,
            rows: Vec::new(),
            bounds: Vec::new(),
        }
    }

    pub fn add_var(&mut self, bounds: Bounds, cost: f64) -> usize {
        let j = self.num_vars;
        self.num_vars += 1;
        self.bounds.push(bounds);
        if cost != 0.0 {
            self.objective.push((j, cost));
        }
        j
    }

    pub fn add_row(&mut self, name: impl Into<String>, coeffs: Vec<(usize, f64)>, sense: Sense, rhs: f64) -> usize {
        self.rows.push(Row {
            name: name.into(),
            coeffs,
            sense,
            rhs,
        });
        self.rows.len() - 1
    }

    pub fn validate(&self) -> Result<(), LpError> {
        if self.bounds.len() != self.num_vars {
            return Err(LpError::BoundsLength {
                got: self.bounds.len(),
                expected: self.num_vars,
            });
        }
        for &(j, _) in &self.objective {
            if j >= self.num_vars {
                return Err(LpError::ObjectiveIndex {
                    var: j,
                    num_vars: self.num_vars,
                });
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(LpError::NonFinite(i));
            }
            for &(j, a) in &row.coeffs {
                if j >= self.num_vars {
                    return Err(LpError::IndexOutOfRange {
                        row: i,
                        var: j,
                        num_vars: self.num_vars,
                    });
                }
                if !a.is_finite() {
                    return Err(LpError::NonFinite(i));
                }
            }
        }
        for (j, b) in self.bounds.iter().enumerate() {
            if b.lower > b.upper || b.lower.is_nan() || b.upper.is_nan() {
                return Err(LpError::InvertedBounds(j));
            }
        }
        Ok(())
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }

    pub fn row_activity(&self, i: usize, x: &[f64]) -> f64 {
        self.rows[i].coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Largest violation of any row or bound at `x` (0 when feasible).
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in self.rows.iter().enumerate() {
            let act = self.row_activity(i, x);
            let v = match row.sense {
                Sense::Le => act - row.rhs,
                Sense::Ge => row.rhs - act,
                Sense::Eq => (act - row.rhs).abs(),
            };
            worst = worst.max(v);
        }
        for (j, b) in self.bounds.iter().enumerate() {
            worst = worst.max(b.lower - x[j]).max(x[j] - b.upper);
        }
        worst
    }
}

impl Default for LpProblem {
    fn default() -> Self {
        LpProblem::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Objective including the constant offset. Meaningful only when optimal.
    pub objective: f64,
    pub values: Vec<f64>,
    /// Row duals `y` with reduced costs `c_j - y·A_j`.
    pub duals: Vec<f64>,
    pub iterations: usize,
}

pub const DEFAULT_TOL: f64 = 1e-9;

pub fn default_iteration_limit(p: &LpProblem) -> usize {
    50 * (p.num_vars + p.rows.len()) + 10_000
}

/// Solve `p` from a slack basis.
pub fn solve_lp(p: &LpProblem, tol: f64, max_iterations: usize) -> Result<LpSolution, LpError> {
    p.validate()?;
    let mut s = Simplex::new(p, tol);
    let status = s.solve(max_iterations);
    Ok(LpSolution {
        status,
        objective: s.objective(),
        values: s.values(),
        duals: s.duals(),
        iterations: s.iterations(),
    })
}

/// Drop integrality: same rows, objective and bounds.
pub fn relax(m: &MilpProblem) -> LpProblem {
    m.base.clone()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::MilpProblem;
    use proptest::prelude::*;

    fn solve(p: &LpProblem) -> LpSolution {
        solve_lp(p, DEFAULT_TOL, default_iteration_limit(p)).unwrap()
    }

    #[test]
    fn single_bound_case() {
        let mut p = LpProblem::new();
        let x = p.add_var(Bounds::new(0.0, 10.0), 1.0);
        p.add_row("lb", vec![(x, 1.0)], Sense::Ge, 3.0);
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - 3.0).abs() < 1e-12);
        assert!((s.values[0] - 3.0).abs() < 1e-12);
    }

    /// Vertex enumeration for two variables in a box with one extra row.
    #[test]
    fn two_var_matches_vertex_enumeration() {
        let mut p = LpProblem::new();
        let x = p.add_var(Bounds::binary(), -1.0);
        let y = p.add_var(Bounds::binary(), -1.0);
        p.add_row("cap", vec![(x, 1.0), (y, 1.0)], Sense::Le, 1.0);
        // vertices of {x+y<=1, 0<=x,y<=1}: (0,0),(1,0),(0,1)
        let oracle = [(0.0, 0.0), (1.0, 0.0), (0.0, 1.0)]
            .iter()
            .map(|&(a, b): &(f64, f64)| -a - b)
            .fold(f64::INFINITY, f64::min);
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective - oracle).abs() < 1e-12);
        assert_eq!(oracle, -1.0);
    }

    #[test]
    fn contradictory_rows_are_infeasible() {
        let mut p = LpProblem::new();
        let x = p.add_var(Bounds::free(), 0.0);
        p.add_row("le", vec![(x, 1.0)], Sense::Le, 1.0);
        p.add_row("ge", vec![(x, 1.0)], Sense::Ge, 2.0);
        assert_eq!(solve(&p).status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_ray() {
        let mut p = LpProblem::new();
        let x = p.add_var(Bounds::non_negative(), -1.0);
        let y = p.add_var(Bounds::non_negative(), 0.0);
        p.add_row("r", vec![(x, 1.0), (y, -1.0)], Sense::Le, 1.0);
        assert_eq!(solve(&p).status, LpStatus::Unbounded);
    }

    #[test]
    fn empty_row_presolve() {
        let mut p = LpProblem::new();
        p.add_var(Bounds::binary(), 1.0);
        p.add_row("empty", vec![], Sense::Ge, 1.0);
        assert_eq!(solve(&p).status, LpStatus::Infeasible);
        p.rows[0].rhs = -1.0;
        assert_eq!(solve(&p).status, LpStatus::Optimal);
    }

    #[test]
    fn free_variable_and_equality() {
        // min x + 2y, x - y = -3, y in [0,5], x free -> x = y - 3, obj = 3y - 3 -> y=0
        let mut p = LpProblem::new();
        let x = p.add_var(Bounds::free(), 1.0);
        let y = p.add_var(Bounds::new(0.0, 5.0), 2.0);
        p.add_row("eq", vec![(x, 1.0), (y, -1.0)], Sense::Eq, -3.0);
        let s = solve(&p);
        assert_eq!(s.status, LpStatus::Optimal);
        assert!((s.objective + 3.0).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_index() {
        let mut p = LpProblem::new();
        p.add_var(Bounds::binary(), 1.0);
        p.add_row("bad", vec![(3, 1.0)], Sense::Le, 1.0);
        assert!(matches!(p.validate(), Err(LpError::IndexOutOfRange { .. })));
    }

    #[test]
    fn relax_keeps_rows_and_binary_bounds() {
        let mut base = LpProblem::new();
        let x = base.add_var(Bounds::binary(), 1.0);
        base.add_row("r", vec![(x, 1.0)], Sense::Le, 1.0);
        let m = MilpProblem::new(base.clone(), vec![x]);
        let r = relax(&m);
        assert_eq!(r, base);
        assert_eq!(r.bounds[x], Bounds::binary());
        // idempotent: relaxing a continuous copy changes nothing
        let again = relax(&MilpProblem::new(r.clone(), vec![]));
        assert_eq!(again, r);
    }

    fn complementary_slackness(p: &LpProblem, s: &LpSolution) -> f64 {
        let mut worst = 0.0f64;
        for (i, row) in p.rows.iter().enumerate() {
            let act = p.row_activity(i, &s.values);
            let slack = match row.sense {
                Sense::Eq => 0.0,
                _ => (act - row.rhs).abs(),
            };
            worst = worst.max(s.duals[i].abs() * slack);
        }
        let mut reduced = vec![0.0; p.num_vars];
        for &(j, c) in &p.objective {
            reduced[j] += c;
        }
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                reduced[j] -= s.duals[i] * a;
            }
        }
        for j in 0..p.num_vars {
            let b = p.bounds[j];
            let x = s.values[j];
            let dist = (x - b.lower).abs().min((b.upper - x).abs());
            worst = worst.max(reduced[j].abs() * dist.min(1e6));
        }
        worst
    }

    fn random_lp(seed: u64, n: usize, m: usize) -> LpProblem {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let mut p = LpProblem::new();
        for _ in 0..n {
            let lo = if rng.gen_bool(0.2) { f64::NEG_INFINITY } else { rng.gen_range(-2.0..0.0) };
            let up = if rng.gen_bool(0.2) { f64::INFINITY } else { rng.gen_range(0.5..4.0) };
            p.add_var(Bounds::new(lo, up), rng.gen_range(-3.0..3.0));
        }
        for i in 0..m {
            let mut coeffs = Vec::new();
            for j in 0..n {
                if rng.gen_bool(0.5) {
                    coeffs.push((j, rng.gen_range(-2.0..2.0)));
                }
            }
            let sense = match rng.gen_range(0..3) {
                0 => Sense::Le,
                1 => Sense::Ge,
                _ => Sense::Eq,
            };
            p.add_row(format!("r{i}"), coeffs, sense, rng.gen_range(-2.0..2.0));
        }
        // keep it bounded
        let all: Vec<(usize, f64)> = (0..n).map(|j| (j, 1.0)).collect();
        p.add_row("box_hi", all.clone(), Sense::Le, 50.0);
        p.add_row("box_lo", all, Sense::Ge, -50.0);
        for j in 0..n {
            if !p.bounds[j].lower.is_finite() || !p.bounds[j].upper.is_finite() {
                p.add_row(format!("cap{j}"), vec![(j, 1.0)], Sense::Le, 20.0);
                p.add_row(format!("flo{j}"), vec![(j, 1.0)], Sense::Ge, -20.0);
            }
        }
        p
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn optimal_points_are_feasible_and_certified(seed in 0u64..10_000, n in 1usize..8, m in 0usize..6) {
            let p = random_lp(seed, n, m);
            let s = solve(&p);
            prop_assert!(s.status == LpStatus::Optimal || s.status == LpStatus::Infeasible);
            if s.status == LpStatus::Optimal {
                prop_assert!(p.max_violation(&s.values) < 1e-7);
                for j in 0..p.num_vars {
                    prop_assert!(s.values[j] >= p.bounds[j].lower - 1e-9);
                    prop_assert!(s.values[j] <= p.bounds[j].upper + 1e-9);
                }
                prop_assert!(complementary_slackness(&p, &s) < 1e-6);
            }
        }
    }
}
