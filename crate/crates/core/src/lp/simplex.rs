//! Bounded-variable revised primal simplex.
//!
//! Every row gets a logical variable `r_i = a_i x` whose bounds encode the row
//! sense, so the working system is `A x - r = 0` with all variables boxed
//! (possibly by infinities). Phase 1 minimizes the sum of bound violations of
//! the basic variables starting from whatever basis is loaded, which lets
//! branch-and-bound re-solve a child from its parent's basis.

use super::lu::{LuFactors, SparseCol};
use super::{LpProblem, LpStatus, Sense};

const UNSET: usize = usize::MAX;
const PIVOT_TOL: f64 = 1e-9;
const REFACTOR_EVERY: usize = 100;
const STALL_LIMIT: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarState {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic free variable parked at zero.
    Zero,
}

/// A simplex basis snapshot used for warm starts.
#[derive(Clone, Debug)]
pub struct Basis {
    state: Vec<VarState>,
    basis: Vec<usize>,
}

impl Basis {
    pub fn num_basic(&self) -> usize {
        self.basis.len()
    }
}

#[derive(Clone, Debug)]
pub struct Simplex {
    m: usize,
    n: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    offset: f64,
    lower: Vec<f64>,
    upper: Vec<f64>,
    x: Vec<f64>,
    state: Vec<VarState>,
    basis: Vec<usize>,
    pos_of: Vec<usize>,
    lu: Option<LuFactors>,
    tol: f64,
    iterations: usize,
    empty_row_infeasible: bool,
    basics_stale: bool,
    y: Vec<f64>,
    // scratch
    work_m: Vec<f64>,
    alpha: Vec<f64>,
}

impl Simplex {
    pub fn new(p: &LpProblem, tol: f64) -> Simplex {
        let n = p.num_vars;
        let m = p.rows.len();
        let mut counts = vec![0usize; n + 1];
        for row in &p.rows {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0usize; nnz];
        let mut col_val = vec![0.0f64; nnz];
        let mut fill = counts;
        let mut empty_row_infeasible = false;
        for (i, row) in p.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                let k = fill[j];
                col_row[k] = i;
                col_val[k] = a;
                fill[j] += 1;
            }
            if row.coeffs.iter().all(|&(_, a)| a == 0.0) {
                let ok = match row.sense {
                    Sense::Le => row.rhs >= -tol,
                    Sense::Ge => row.rhs <= tol,
                    Sense::Eq => row.rhs.abs() <= tol,
                };
                if !ok {
                    empty_row_infeasible = true;
                }
            }
        }
        let mut cost = vec![0.0; n + m];
        for &(j, c) in &p.objective {
            cost[j] += c;
        }
        let mut lower = Vec::with_capacity(n + m);
        let mut upper = Vec::with_capacity(n + m);
        for b in &p.bounds {
            lower.push(b.lower);
            upper.push(b.upper);
        }
        for row in &p.rows {
            let (lo, up) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(up);
        }
        let mut s = Simplex {
            m,
            n,
            col_start,
            col_row,
            col_val,
            cost,
            offset: p.objective_offset,
            lower,
            upper,
            x: vec![0.0; n + m],
            state: vec![VarState::AtLower; n + m],
            basis: (n..n + m).collect(),
            pos_of: vec![UNSET; n + m],
            lu: None,
            tol,
            iterations: 0,
            empty_row_infeasible,
            basics_stale: true,
            y: vec![0.0; m],
            work_m: vec![0.0; m],
            alpha: vec![0.0; m],
        };
        for j in 0..n {
            s.park_nonbasic(j);
        }
        for (i, &v) in s.basis.iter().enumerate() {
            s.state[v] = VarState::Basic;
            s.pos_of[v] = i;
        }
        s
    }

    pub fn num_structural(&self) -> usize {
        self.n
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.lower[j], self.upper[j])
    }

    /// Change the bounds of structural variable `j`.
    pub fn set_bounds(&mut self, j: usize, lower: f64, upper: f64) {
        assert!(j < self.n);
        self.lower[j] = lower;
        self.upper[j] = upper;
        if self.state[j] != VarState::Basic {
            self.park_nonbasic(j);
            self.basics_stale = true;
        }
    }

    fn park_nonbasic(&mut self, j: usize) {
        let (lo, up) = (self.lower[j], self.upper[j]);
        let keep_upper = self.state[j] == VarState::AtUpper && up.is_finite();
        if keep_upper {
            self.x[j] = up;
        } else if lo.is_finite() {
            self.state[j] = VarState::AtLower;
            self.x[j] = lo;
        } else if up.is_finite() {
            self.state[j] = VarState::AtUpper;
            self.x[j] = up;
        } else {
            self.state[j] = VarState::Zero;
            self.x[j] = 0.0;
        }
    }

    pub fn basis_snapshot(&self) -> Basis {
        Basis {
            state: self.state.clone(),
            basis: self.basis.clone(),
        }
    }

    pub fn load_basis(&mut self, b: &Basis) {
        assert_eq!(b.state.len(), self.n + self.m);
        self.state.clone_from(&b.state);
        self.basis.clone_from(&b.basis);
        self.pos_of.iter_mut().for_each(|p| *p = UNSET);
        for (i, &v) in self.basis.iter().enumerate() {
            self.pos_of[v] = i;
        }
        for j in 0..self.n + self.m {
            if self.state[j] != VarState::Basic {
                self.park_nonbasic(j);
            }
        }
        self.lu = None;
        self.basics_stale = true;
    }

    fn column(&self, j: usize, out: &mut [f64]) {
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                out[self.col_row[k]] += self.col_val[k];
            }
        } else {
            out[j - self.n] -= 1.0;
        }
    }

    fn sparse_column(&self, j: usize) -> SparseCol {
        let mut c = SparseCol::default();
        if j < self.n {
            for k in self.col_start[j]..self.col_start[j + 1] {
                c.push(self.col_row[k], self.col_val[k]);
            }
        } else {
            c.push(j - self.n, -1.0);
        }
        c
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            let mut s = 0.0;
            for k in self.col_start[j]..self.col_start[j + 1] {
                s += self.col_val[k] * y[self.col_row[k]];
            }
            s
        } else {
            -y[j - self.n]
        }
    }

    fn refactor(&mut self) {
        loop {
            let cols: Vec<SparseCol> = self.basis.iter().map(|&v| self.sparse_column(v)).collect();
            match LuFactors::factor(self.m, &cols) {
                Ok(lu) => {
                    self.lu = Some(lu);
                    break;
                }
                Err(sing) => {
                    // swap dependent columns for logicals of unpivoted rows
                    for (&pos, &row) in sing.dependent_cols.iter().zip(&sing.missing_rows) {
                        let out = self.basis[pos];
                        let logical = self.n + row;
                        self.state[out] = VarState::AtLower;
                        self.pos_of[out] = UNSET;
                        let v = self.x[out];
                        self.park_near(out, v);
                        if self.state[logical] != VarState::Basic {
                            self.state[logical] = VarState::Basic;
                        }
                        self.basis[pos] = logical;
                        self.pos_of[logical] = pos;
                    }
                }
            }
        }
        self.basics_stale = true;
    }

    fn park_near(&mut self, j: usize, v: f64) {
        let (lo, up) = (self.lower[j], self.upper[j]);
        if lo.is_finite() && (!up.is_finite() || (v - lo).abs() <= (v - up).abs()) {
            self.state[j] = VarState::AtLower;
            self.x[j] = lo;
        } else if up.is_finite() {
            self.state[j] = VarState::AtUpper;
            self.x[j] = up;
        } else {
            self.state[j] = VarState::Zero;
            self.x[j] = 0.0;
        }
    }

    fn recompute_basics(&mut self) {
        let mut rhs = std::mem::take(&mut self.work_m);
        rhs.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n + self.m {
            if self.state[j] == VarState::Basic {
                continue;
            }
            let xj = self.x[j];
            if xj == 0.0 {
                continue;
            }
            if j < self.n {
                for k in self.col_start[j]..self.col_start[j + 1] {
                    rhs[self.col_row[k]] -= self.col_val[k] * xj;
                }
            } else {
                rhs[j - self.n] += xj;
            }
        }
        self.lu.as_mut().expect("factored").ftran(&mut rhs);
        for (i, &v) in self.basis.iter().enumerate() {
            self.x[v] = rhs[i];
        }
        self.work_m = rhs;
        self.basics_stale = false;
    }

    pub fn objective(&self) -> f64 {
        let mut z = self.offset;
        for j in 0..self.n {
            z += self.cost[j] * self.x[j];
        }
        z
    }

    pub fn values(&self) -> Vec<f64> {
        self.x[..self.n].to_vec()
    }

    pub fn value(&self, j: usize) -> f64 {
        self.x[j]
    }

    pub fn duals(&self) -> Vec<f64> {
        self.y.clone()
    }

    /// Run the two phases from the current basis.
    pub fn solve(&mut self, max_iterations: usize) -> LpStatus {
        if self.empty_row_infeasible {
            return LpStatus::Infeasible;
        }
        let tol = self.tol;
        let mut stall = 0usize;
        let mut bland = false;
        let mut last_obj = f64::INFINITY;
        let mut verified_rounds = 0usize;
        let mut cb = vec![0.0f64; self.m];
        let start_iterations = self.iterations;

        loop {
            if self.iterations - start_iterations >= max_iterations {
                return LpStatus::IterationLimit;
            }
            let needs_refactor = match &self.lu {
                None => true,
                Some(lu) => lu.num_etas() >= REFACTOR_EVERY || lu.eta_nnz() > 4 * (self.m + 64),
            };
            if needs_refactor {
                self.refactor();
            }
            if self.basics_stale {
                self.recompute_basics();
            }

            // Phase costs on the basis.
            let mut phase1 = false;
            for (i, &v) in self.basis.iter().enumerate() {
                let x = self.x[v];
                cb[i] = if x < self.lower[v] - tol {
                    phase1 = true;
                    -1.0
                } else if x > self.upper[v] + tol {
                    phase1 = true;
                    1.0
                } else {
                    0.0
                };
            }
            if !phase1 {
                for (i, &v) in self.basis.iter().enumerate() {
                    cb[i] = self.cost[v];
                }
            }
            let mut y = std::mem::take(&mut self.y);
            y.copy_from_slice(&cb);
            self.lu.as_mut().unwrap().btran(&mut y);

            // Pricing.
            let mut entering = UNSET;
            let mut dir = 0.0f64;
            let mut best = 0.0f64;
            let mut entering_dj = 0.0;
            for j in 0..self.n + self.m {
                let st = self.state[j];
                if st == VarState::Basic || self.lower[j] == self.upper[j] {
                    continue;
                }
                let cj = if phase1 { 0.0 } else { self.cost[j] };
                let dj = cj - self.dot_column(j, &y);
                let (eligible, d) = match st {
                    VarState::AtLower => (dj < -tol, 1.0),
                    VarState::AtUpper => (dj > tol, -1.0),
                    VarState::Zero => (dj.abs() > tol, if dj < 0.0 { 1.0 } else { -1.0 }),
                    VarState::Basic => unreachable!(),
                };
                if !eligible {
                    continue;
                }
                if bland {
                    entering = j;
                    dir = d;
                    entering_dj = dj;
                    break;
                }
                if dj.abs() > best {
                    best = dj.abs();
                    entering = j;
                    dir = d;
                    entering_dj = dj;
                }
            }
            self.y = y;

            if entering == UNSET {
                // Confirm on a fresh factorization before declaring a result.
                if self.lu.as_ref().map_or(0, |l| l.num_etas()) > 0 && verified_rounds < 3 {
                    verified_rounds += 1;
                    self.refactor();
                    continue;
                }
                if phase1 {
                    return LpStatus::Infeasible;
                }
                return LpStatus::Optimal;
            }

            // Column of the entering variable in terms of the basis.
            let mut alpha = std::mem::take(&mut self.alpha);
            alpha.iter_mut().for_each(|v| *v = 0.0);
            self.column(entering, &mut alpha);
            self.lu.as_mut().unwrap().ftran(&mut alpha);

            // Ratio test. Basic i moves at rate delta_i = -dir * alpha_i.
            let mut theta_max = f64::INFINITY;
            for (i, &v) in self.basis.iter().enumerate() {
                let delta = -dir * alpha[i];
                if delta.abs() <= PIVOT_TOL {
                    continue;
                }
                if let Some(gap) = self.blocking_gap(v, delta, phase1) {
                    let r = (gap.max(0.0) + tol) / delta.abs();
                    theta_max = theta_max.min(r);
                }
            }
            let mut leave = UNSET;
            let mut leave_ratio = f64::INFINITY;
            let mut leave_mag = 0.0f64;
            if theta_max.is_finite() {
                for (i, &v) in self.basis.iter().enumerate() {
                    let delta = -dir * alpha[i];
                    if delta.abs() <= PIVOT_TOL {
                        continue;
                    }
                    if let Some(gap) = self.blocking_gap(v, delta, phase1) {
                        let r = gap.max(0.0) / delta.abs();
                        if r > theta_max {
                            continue;
                        }
                        let better = if bland {
                            r < leave_ratio || (r == leave_ratio && (leave == UNSET || v < self.basis[leave]))
                        } else {
                            delta.abs() > leave_mag
                        };
                        if better {
                            leave = i;
                            leave_ratio = r;
                            leave_mag = delta.abs();
                        }
                    }
                }
            }
            let flip = self.upper[entering] - self.lower[entering];
            let bound_flip = flip.is_finite() && (leave == UNSET || flip <= leave_ratio);
            if leave == UNSET && !bound_flip {
                self.alpha = alpha;
                if phase1 {
                    // Numerical trouble; start over from a fresh factorization.
                    if verified_rounds < 3 {
                        verified_rounds += 1;
                        self.refactor();
                        continue;
                    }
                    return LpStatus::Infeasible;
                }
                return LpStatus::Unbounded;
            }
            let theta = if bound_flip { flip } else { leave_ratio };

            self.iterations += 1;
            let leave_at_upper = !bound_flip && {
                let delta = -dir * alpha[leave];
                self.leaves_at_upper(self.basis[leave], delta, phase1)
            };
            // Apply the step.
            if theta != 0.0 {
                for (i, &v) in self.basis.iter().enumerate() {
                    let a = alpha[i];
                    if a != 0.0 {
                        self.x[v] -= dir * theta * a;
                    }
                }
                self.x[entering] += dir * theta;
            }
            if bound_flip {
                if dir > 0.0 {
                    self.state[entering] = VarState::AtUpper;
                    self.x[entering] = self.upper[entering];
                } else {
                    self.state[entering] = VarState::AtLower;
                    self.x[entering] = self.lower[entering];
                }
            } else {
                let out = self.basis[leave];
                if leave_at_upper {
                    self.state[out] = VarState::AtUpper;
                    self.x[out] = self.upper[out];
                } else {
                    self.state[out] = VarState::AtLower;
                    self.x[out] = self.lower[out];
                }
                if !self.x[out].is_finite() {
                    self.state[out] = VarState::Zero;
                    self.x[out] = 0.0;
                }
                self.pos_of[out] = UNSET;
                self.basis[leave] = entering;
                self.pos_of[entering] = leave;
                self.state[entering] = VarState::Basic;
                self.lu.as_mut().unwrap().push_eta(leave, &alpha);
            }
            self.alpha = alpha;

            // Stall bookkeeping for the anti-cycling fallback.
            let progress = theta * entering_dj.abs();
            let obj_now = if phase1 { f64::NAN } else { self.objective() };
            if progress <= 1e-12 || (!phase1 && obj_now >= last_obj - 1e-12) {
                stall += 1;
                if stall > STALL_LIMIT {
                    bland = true;
                }
            } else {
                stall = 0;
                bland = false;
            }
            if !phase1 {
                last_obj = obj_now;
            } else {
                last_obj = f64::INFINITY;
            }
            verified_rounds = 0;
        }
    }

    /// Distance the basic variable `v` may travel in the direction of `delta`
    /// before it blocks, or `None` when it never blocks.
    fn blocking_gap(&self, v: usize, delta: f64, phase1: bool) -> Option<f64> {
        let x = self.x[v];
        let (lo, up) = (self.lower[v], self.upper[v]);
        let tol = self.tol;
        if phase1 && x < lo - tol {
            return if delta > 0.0 { Some(lo - x) } else { None };
        }
        if phase1 && x > up + tol {
            return if delta < 0.0 { Some(x - up) } else { None };
        }
        if delta < 0.0 {
            lo.is_finite().then_some(x - lo)
        } else {
            up.is_finite().then_some(up - x)
        }
    }

    fn leaves_at_upper(&self, v: usize, delta: f64, phase1: bool) -> bool {
        let x_before = self.x[v];
        if phase1 && x_before < self.lower[v] - self.tol && delta > 0.0 {
            // was below, moved up to its lower bound
            return false;
        }
        if phase1 && x_before > self.upper[v] + self.tol && delta < 0.0 {
            return true;
        }
        delta > 0.0
    }
}
