//! Branch-and-bound over the simplex in [`crate::lp`].
//!
//! Best-bound search with a depth-first dive until the first incumbent is
//! found. Children are re-solved from their parent's basis. The reported
//! bound is monotone and never exceeds the incumbent.

mod heuristic;

pub use heuristic::round_heuristic;

use crate::clock::Stopwatch;
use crate::lp::{relax, Basis, LpProblem, LpStatus, Simplex};
use serde::Serialize;
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::rc::Rc;
use std::time::Duration;
use thiserror::Error;

#[derive(Clone, Debug, PartialEq)]
pub struct MilpProblem {
    pub base: LpProblem,
    /// Sorted, deduplicated indices of integer (here: binary) variables.
    pub integer_vars: Vec<usize>,
}

#[derive(Debug, Error, PartialEq)]
pub enum MilpError {
    #[error(transparent)]
    Lp(#[from] crate::lp::LpError),
    #[error("integer variable {0} has an infinite bound")]
    UnboundedInteger(usize),
    #[error("integer variable index {0} out of range")]
    IntegerIndex(usize),
}

impl MilpProblem {
    pub fn new(base: LpProblem, mut integer_vars: Vec<usize>) -> MilpProblem {
        integer_vars.sort_unstable();
        integer_vars.dedup();
        MilpProblem { base, integer_vars }
    }

    pub fn validate(&self) -> Result<(), MilpError> {
        self.base.validate()?;
        for &j in &self.integer_vars {
            let b = self.base.bounds.get(j).ok_or(MilpError::IntegerIndex(j))?;
            if !b.lower.is_finite() || !b.upper.is_finite() {
                return Err(MilpError::UnboundedInteger(j));
            }
        }
        Ok(())
    }

    pub fn is_integer_feasible(&self, x: &[f64], tol: f64) -> bool {
        self.integer_vars.iter().all(|&j| (x[j] - x[j].round()).abs() <= tol)
    }
}

#[derive(Clone, Debug)]
pub struct BnBConfig {
    pub integrality_tol: f64,
    pub rel_gap: f64,
    pub abs_gap: f64,
    pub time_limit: Option<Duration>,
    pub node_limit: Option<usize>,
    /// Emit a progress line every this many nodes (0 disables).
    pub log_every: usize,
    /// Re-explore every pruned subtree after the search and count any that
    /// held a better integer point.
    pub audit: bool,
    pub lp_tol: f64,
}

impl Default for BnBConfig {
    fn default() -> Self {
        BnBConfig {
            integrality_tol: 1e-6,
            rel_gap: 1e-4,
            abs_gap: 1e-6,
            time_limit: None,
            node_limit: None,
            log_every: 0,
            audit: false,
            lp_tol: crate::lp::DEFAULT_TOL,
        }
    }
}

/// Bound changes `(var, lower, upper)` defining a node.
type Changes = Vec<(usize, f64, f64)>;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MilpStatus {
    Optimal,
    Feasible { gap: f64 },
    Infeasible,
    Unbounded,
    /// A limit was hit before any incumbent was found.
    Limit,
}

#[derive(Clone, Debug)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Incumbent objective, `+inf` without an incumbent.
    pub objective: f64,
    /// Best proven lower bound.
    pub bound: f64,
    pub values: Option<Vec<f64>>,
    pub nodes_explored: usize,
    pub lp_iterations: usize,
    /// Objective of the root relaxation.
    pub root_bound: f64,
    /// Every value the reported bound took, in order.
    pub bound_trace: Vec<f64>,
    /// Pruned subtrees found to contain a better point (audit mode only).
    pub audit_violations: usize,
}

impl MilpSolution {
    pub fn gap(&self) -> f64 {
        relative_gap(self.objective, self.bound)
    }
}

fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    if !incumbent.is_finite() {
        return f64::INFINITY;
    }
    let diff = (incumbent - bound).max(0.0);
    if diff == 0.0 {
        0.0
    } else {
        diff / incumbent.abs().max(1e-9)
    }
}

struct Node {
    bound: f64,
    seq: u64,
    changes: Changes,
    basis: Rc<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // max-heap: smallest bound first, then earliest insertion
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Search<'a> {
    m: &'a MilpProblem,
    cfg: &'a BnBConfig,
    lp: Simplex,
    root_bounds: Vec<(f64, f64)>,
    applied: Vec<usize>,
    incumbent: Option<Vec<f64>>,
    incumbent_obj: f64,
    seq: u64,
    lp_iter_limit: usize,
}

enum NodeOutcome {
    Infeasible,
    Pruned,
    Integral,
    Branch { var: usize, value: f64, objective: f64 },
    Failed,
    Unbounded,
}

impl<'a> Search<'a> {
    fn prune_threshold(&self) -> f64 {
        if self.incumbent.is_none() {
            return f64::INFINITY;
        }
        let z = self.incumbent_obj;
        z - self.cfg.abs_gap.max(self.cfg.rel_gap * z.abs())
    }

    fn apply_changes(&mut self, changes: &[(usize, f64, f64)]) {
        for j in self.applied.drain(..) {
            let (lo, up) = self.root_bounds[j];
            self.lp.set_bounds(j, lo, up);
        }
        for &(j, lo, up) in changes {
            self.lp.set_bounds(j, lo, up);
            self.applied.push(j);
        }
    }

    fn current_bounds(&self) -> Vec<crate::lp::Bounds> {
        (0..self.m.base.num_vars)
            .map(|j| {
                let (lo, up) = self.lp.bounds(j);
                crate::lp::Bounds::new(lo, up)
            })
            .collect()
    }

    /// Record `x` if it is feasible (after snapping integers) and better
    /// than the incumbent. Returns whether it was feasible.
    fn consider_incumbent(&mut self, x: &[f64]) -> bool {
        let mut snapped = x.to_vec();
        for &j in &self.m.integer_vars {
            snapped[j] = snapped[j].round();
        }
        let candidate = if self.m.base.max_violation(&snapped) <= 1e-7 {
            snapped
        } else if self.m.base.max_violation(x) <= 1e-7 && self.m.is_integer_feasible(x, self.cfg.integrality_tol) {
            x.to_vec()
        } else {
            return false;
        };
        let z = self.m.base.objective_value(&candidate);
        if z < self.incumbent_obj {
            self.incumbent_obj = z;
            self.incumbent = Some(candidate);
        }
        true
    }

    fn most_fractional(&self, x: &[f64]) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for &j in &self.m.integer_vars {
            let f = x[j] - x[j].floor();
            let dist = f.min(1.0 - f);
            if dist <= self.cfg.integrality_tol {
                continue;
            }
            if best.is_none_or(|(_, _, d)| dist > d) {
                best = Some((j, x[j], dist));
            }
        }
        best.map(|(j, v, _)| (j, v))
    }

    fn count_fractional(&self, x: &[f64]) -> usize {
        self.m
            .integer_vars
            .iter()
            .filter(|&&j| (x[j] - x[j].round()).abs() > self.cfg.integrality_tol)
            .count()
    }

    /// Solve the LP currently loaded and classify the node.
    fn evaluate(&mut self, prune_at: f64) -> NodeOutcome {
        match self.lp.solve(self.lp_iter_limit) {
            LpStatus::Optimal => {}
            LpStatus::Infeasible => return NodeOutcome::Infeasible,
            LpStatus::Unbounded => return NodeOutcome::Unbounded,
            LpStatus::IterationLimit => return NodeOutcome::Failed,
        }
        let z = self.lp.objective();
        if z >= prune_at {
            return NodeOutcome::Pruned;
        }
        let x = self.lp.values();
        match self.most_fractional(&x) {
            None => {
                if self.consider_incumbent(&x) {
                    NodeOutcome::Integral
                } else {
                    // integral within tolerance but rows violated after
                    // snapping: branch on the least integral variable
                    let j = self
                        .m
                        .integer_vars
                        .iter()
                        .copied()
                        .max_by(|&a, &b| {
                            let fa = (x[a] - x[a].round()).abs();
                            let fb = (x[b] - x[b].round()).abs();
                            fa.total_cmp(&fb).then(b.cmp(&a))
                        });
                    match j {
                        Some(j) if (x[j] - x[j].round()).abs() > 0.0 => NodeOutcome::Branch {
                            var: j,
                            value: x[j],
                            objective: z,
                        },
                        _ => NodeOutcome::Failed,
                    }
                }
            }
            Some((var, value)) => NodeOutcome::Branch { var, value, objective: z },
        }
    }

    fn child_changes(&self, parent: &[(usize, f64, f64)], var: usize, value: f64, up: bool) -> Changes {
        let mut c = parent.to_vec();
        let (lo, hi) = current_bound_of(parent, var, self.root_bounds[var]);
        let entry = if up {
            (var, value.ceil().max(lo), hi)
        } else {
            (var, lo, value.floor().min(hi))
        };
        if let Some(slot) = c.iter_mut().find(|e| e.0 == var) {
            *slot = entry;
        } else {
            c.push(entry);
        }
        c
    }

    fn try_heuristic(&mut self) {
        let bounds = self.current_bounds();
        let x = self.lp.values();
        if let Some(point) = heuristic::round_with_bounds(&x, self.m, &bounds, self.cfg.lp_tol) {
            let before = self.incumbent_obj;
            if self.consider_incumbent(&point) && self.incumbent_obj < before {
                log::debug!("rounding heuristic incumbent {}", self.incumbent_obj);
            }
        }
    }
}

fn current_bound_of(changes: &[(usize, f64, f64)], var: usize, root: (f64, f64)) -> (f64, f64) {
    changes
        .iter()
        .rev()
        .find(|e| e.0 == var)
        .map(|&(_, lo, up)| (lo, up))
        .unwrap_or(root)
}

/// Solve a mixed-binary program by branch-and-bound.
pub fn solve_milp(m: &MilpProblem, cfg: &BnBConfig) -> Result<MilpSolution, MilpError> {
    solve_milp_from(m, cfg, None)
}

/// As [`solve_milp`], seeded with a known point. A start that is not
/// integral and feasible is ignored.
pub fn solve_milp_from(m: &MilpProblem, cfg: &BnBConfig, start: Option<&[f64]>) -> Result<MilpSolution, MilpError> {
    m.validate()?;
    let clock = Stopwatch::start();
    let relaxed = relax(m);
    let lp = Simplex::new(&relaxed, cfg.lp_tol);
    let root_bounds = relaxed.bounds.iter().map(|b| (b.lower, b.upper)).collect();
    let lp_iter_limit = crate::lp::default_iteration_limit(&relaxed);
    let mut s = Search {
        m,
        cfg,
        lp,
        root_bounds,
        applied: Vec::new(),
        incumbent: None,
        incumbent_obj: f64::INFINITY,
        seq: 0,
        lp_iter_limit,
    };

    if let Some(x) = start {
        if x.len() == m.base.num_vars && m.is_integer_feasible(x, cfg.integrality_tol) && s.consider_incumbent(x) {
            log::debug!("start point accepted, objective {}", s.incumbent_obj);
        } else {
            log::warn!("start point rejected: not integral and feasible");
        }
    }

    let mut out = MilpSolution {
        status: MilpStatus::Limit,
        objective: f64::INFINITY,
        bound: f64::NEG_INFINITY,
        values: None,
        nodes_explored: 0,
        lp_iterations: 0,
        root_bound: f64::NEG_INFINITY,
        bound_trace: Vec::new(),
        audit_violations: 0,
    };

    let mut heap: BinaryHeap<Node> = BinaryHeap::new();
    let mut pruned_for_audit: Vec<Changes> = Vec::new();
    let mut lost_bound = f64::INFINITY;
    let mut reported = f64::NEG_INFINITY;
    let mut last_heuristic_frac = usize::MAX;

    // Root.
    out.nodes_explored = 1;
    let root = s.evaluate(f64::INFINITY);
    let root_z = s.lp.objective();
    match root {
        NodeOutcome::Infeasible => {
            out.status = MilpStatus::Infeasible;
            out.lp_iterations = s.lp.iterations();
            return Ok(out);
        }
        NodeOutcome::Unbounded => {
            out.status = MilpStatus::Unbounded;
            out.lp_iterations = s.lp.iterations();
            return Ok(out);
        }
        NodeOutcome::Failed => {
            out.lp_iterations = s.lp.iterations();
            return Ok(out);
        }
        _ => {}
    }
    out.root_bound = root_z;
    reported = reported.max(root_z);
    out.bound_trace.push(reported);

    // The node being dived into next, if any: (changes, bound).
    let mut dive: Option<(Changes, f64)> = None;
    match root {
        NodeOutcome::Integral => {}
        NodeOutcome::Branch { var, value, objective } => {
            let x = s.lp.values();
            last_heuristic_frac = s.count_fractional(&x);
            s.try_heuristic();
            let basis = Rc::new(s.lp.basis_snapshot());
            let up_first = value - value.floor() >= 0.5;
            let down = s.child_changes(&[], var, value, false);
            let up = s.child_changes(&[], var, value, true);
            let (first, second) = if up_first { (up, down) } else { (down, up) };
            s.seq += 1;
            heap.push(Node {
                bound: objective,
                seq: s.seq,
                changes: second,
                basis: basis.clone(),
            });
            if s.incumbent.is_none() {
                dive = Some((first, objective));
            } else {
                s.seq += 1;
                heap.push(Node {
                    bound: objective,
                    seq: s.seq,
                    changes: first,
                    basis,
                });
            }
        }
        _ => unreachable!(),
    }

    let mut limit_hit = false;
    loop {
        // Global bound over open work.
        let open_min = heap
            .peek()
            .map_or(f64::INFINITY, |n| n.bound)
            .min(dive.as_ref().map_or(f64::INFINITY, |d| d.1))
            .min(lost_bound);
        let current = open_min.min(s.incumbent_obj);
        if current > reported {
            reported = current;
            out.bound_trace.push(reported);
        }
        if cfg.log_every > 0 && out.nodes_explored.is_multiple_of(cfg.log_every) {
            log::info!(
                "nodes={} incumbent={} bound={} gap={}",
                out.nodes_explored,
                s.incumbent_obj,
                reported,
                relative_gap(s.incumbent_obj, reported)
            );
        }
        if s.incumbent.is_some() {
            let diff = s.incumbent_obj - reported;
            if diff <= cfg.abs_gap || relative_gap(s.incumbent_obj, reported) <= cfg.rel_gap {
                break;
            }
        }
        if dive.is_none() && heap.is_empty() {
            break;
        }
        if cfg.node_limit.is_some_and(|n| out.nodes_explored >= n)
            || cfg.time_limit.is_some_and(|t| clock.elapsed().is_some_and(|e| e >= t))
        {
            limit_hit = true;
            break;
        }

        let (changes, node_bound) = if let Some(d) = dive.take() {
            s.apply_changes(&d.0);
            d
        } else {
            let node = heap.pop().unwrap();
            if node.bound >= s.prune_threshold() {
                if cfg.audit {
                    pruned_for_audit.push(node.changes);
                }
                continue;
            }
            s.lp.load_basis(&node.basis);
            s.apply_changes(&node.changes);
            (node.changes, node.bound)
        };
        out.nodes_explored += 1;

        let threshold = s.prune_threshold();
        match s.evaluate(threshold) {
            NodeOutcome::Infeasible => {}
            NodeOutcome::Pruned => {
                if cfg.audit {
                    pruned_for_audit.push(changes);
                }
            }
            NodeOutcome::Integral => {}
            NodeOutcome::Unbounded | NodeOutcome::Failed => {
                lost_bound = lost_bound.min(node_bound);
            }
            NodeOutcome::Branch { var, value, objective } => {
                let diving = s.incumbent.is_none();
                if diving {
                    let x = s.lp.values();
                    let frac = s.count_fractional(&x);
                    if frac * 2 <= last_heuristic_frac {
                        last_heuristic_frac = frac;
                        s.try_heuristic();
                    }
                }
                let basis = Rc::new(s.lp.basis_snapshot());
                let up_first = value - value.floor() >= 0.5;
                let down = s.child_changes(&changes, var, value, false);
                let up = s.child_changes(&changes, var, value, true);
                let (first, second) = if up_first { (up, down) } else { (down, up) };
                s.seq += 1;
                heap.push(Node {
                    bound: objective,
                    seq: s.seq,
                    changes: second,
                    basis: basis.clone(),
                });
                if s.incumbent.is_none() {
                    dive = Some((first, objective));
                } else {
                    s.seq += 1;
                    heap.push(Node {
                        bound: objective,
                        seq: s.seq,
                        changes: first,
                        basis,
                    });
                }
            }
        }
    }

    // Final bound: complete search closes it onto the incumbent.
    let open_min = heap
        .iter()
        .map(|n| n.bound)
        .fold(f64::INFINITY, f64::min)
        .min(dive.as_ref().map_or(f64::INFINITY, |d| d.1))
        .min(lost_bound);
    let final_bound = open_min.min(s.incumbent_obj);
    if final_bound > reported {
        reported = final_bound;
        out.bound_trace.push(reported);
    }
    out.bound = reported;
    out.lp_iterations = s.lp.iterations();
    out.objective = s.incumbent_obj;

    if cfg.audit {
        let tol = s.incumbent_obj - s.prune_threshold();
        let best_possible = s.incumbent_obj - tol - 1e-9;
        for changes in &pruned_for_audit {
            if let Some(z) = exhaustive_subtree(&mut s, changes) {
                if z < best_possible {
                    out.audit_violations += 1;
                }
            }
        }
    }

    out.values = s.incumbent.take();
    out.status = match (&out.values, limit_hit) {
        (None, false) if lost_bound.is_finite() => MilpStatus::Limit,
        (None, false) => MilpStatus::Infeasible,
        (None, true) => MilpStatus::Limit,
        (Some(_), _) => {
            let gap = relative_gap(out.objective, out.bound);
            if out.objective - out.bound <= cfg.abs_gap || gap <= cfg.rel_gap {
                MilpStatus::Optimal
            } else {
                MilpStatus::Feasible { gap }
            }
        }
    };
    if cfg.log_every > 0 {
        log::info!(
            "nodes={} incumbent={} bound={} gap={}",
            out.nodes_explored,
            out.objective,
            out.bound,
            out.gap()
        );
    }
    Ok(out)
}

/// Best integer objective inside a subtree, explored without bound pruning.
fn exhaustive_subtree(s: &mut Search<'_>, changes: &[(usize, f64, f64)]) -> Option<f64> {
    let mut best: Option<f64> = None;
    let mut stack = vec![changes.to_vec()];
    while let Some(ch) = stack.pop() {
        s.apply_changes(&ch);
        if s.lp.solve(s.lp_iter_limit) != LpStatus::Optimal {
            continue;
        }
        let x = s.lp.values();
        match s.most_fractional(&x) {
            None => {
                let mut snapped = x.clone();
                for &j in &s.m.integer_vars {
                    snapped[j] = snapped[j].round();
                }
                if s.m.base.max_violation(&snapped) <= 1e-7 {
                    let z = s.m.base.objective_value(&snapped);
                    best = Some(best.map_or(z, |b: f64| b.min(z)));
                }
            }
            Some((var, value)) => {
                stack.push(s.child_changes(&ch, var, value, false));
                stack.push(s.child_changes(&ch, var, value, true));
            }
        }
    }
    best
}
