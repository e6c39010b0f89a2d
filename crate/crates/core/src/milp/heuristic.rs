use super::MilpProblem;
use crate::lp::{solve_lp, Bounds, LpProblem, LpSolution, LpStatus, Sense};

const FEAS_TOL: f64 = 1e-7;

/// Round a relaxed optimum to an integer point.
///
/// Integers go to the nearest value. Rows of the form `Σ x_j = 1` over
/// binaries keep only their largest member (lowest index on ties). The
/// continuous part is then re-solved with integers fixed. Returns `None`
/// when the result is not feasible.
pub fn round_heuristic(relaxed: &LpSolution, m: &MilpProblem) -> Option<Vec<f64>> {
    if relaxed.status != LpStatus::Optimal || relaxed.values.len() != m.base.num_vars {
        return None;
    }
    round_with_bounds(&relaxed.values, m, &m.base.bounds, crate::lp::DEFAULT_TOL)
}

fn is_exactly_one(m: &MilpProblem, is_int: &[bool], bounds: &[Bounds], row: usize) -> bool {
    let r = &m.base.rows[row];
    r.sense == Sense::Eq
        && r.rhs == 1.0
        && !r.coeffs.is_empty()
        && r.coeffs.iter().all(|&(j, a)| {
            a == 1.0 && is_int[j] && bounds[j].lower >= 0.0 && bounds[j].upper <= 1.0
        })
}

pub(crate) fn round_with_bounds(x: &[f64], m: &MilpProblem, bounds: &[Bounds], lp_tol: f64) -> Option<Vec<f64>> {
    let p = &m.base;
    let n = p.num_vars;
    let mut is_int = vec![false; n];
    for &j in &m.integer_vars {
        is_int[j] = true;
    }
    let mut point = x.to_vec();
    for &j in &m.integer_vars {
        point[j] = x[j].round().clamp(bounds[j].lower, bounds[j].upper);
    }
    for i in 0..p.rows.len() {
        if !is_exactly_one(m, &is_int, bounds, i) {
            continue;
        }
        let mut best: Option<(usize, f64)> = None;
        for &(j, _) in &p.rows[i].coeffs {
            if bounds[j].upper < 1.0 {
                continue;
            }
            if best.is_none_or(|(bj, bv)| x[j] > bv || (x[j] == bv && j < bj)) {
                best = Some((j, x[j]));
            }
        }
        let (keep, _) = best?;
        for &(j, _) in &p.rows[i].coeffs {
            point[j] = if j == keep { 1.0 } else { 0.0 };
        }
    }

    let continuous: Vec<usize> = (0..n).filter(|&j| !is_int[j]).collect();
    if continuous.is_empty() {
        return (p.max_violation(&point) <= FEAS_TOL && within(bounds, &point)).then_some(point);
    }

    let mut local = vec![usize::MAX; n];
    let mut reduced = LpProblem::new();
    for &j in &continuous {
        local[j] = reduced.add_var(bounds[j], 0.0);
    }
    reduced.objective = p
        .objective
        .iter()
        .filter(|&&(j, _)| !is_int[j])
        .map(|&(j, c)| (local[j], c))
        .collect();
    for row in &p.rows {
        let mut fixed = 0.0;
        let mut coeffs = Vec::new();
        for &(j, a) in &row.coeffs {
            if is_int[j] {
                fixed += a * point[j];
            } else {
                coeffs.push((local[j], a));
            }
        }
        let rhs = row.rhs - fixed;
        if coeffs.is_empty() {
            let ok = match row.sense {
                Sense::Le => rhs >= -FEAS_TOL,
                Sense::Ge => rhs <= FEAS_TOL,
                Sense::Eq => rhs.abs() <= FEAS_TOL,
            };
            if !ok {
                return None;
            }
            continue;
        }
        reduced.add_row(row.name.clone(), coeffs, row.sense, rhs);
    }
    let limit = crate::lp::default_iteration_limit(&reduced);
    let sol = solve_lp(&reduced, lp_tol, limit).ok()?;
    if sol.status != LpStatus::Optimal {
        return None;
    }
    for &j in &continuous {
        point[j] = sol.values[local[j]];
    }
    (p.max_violation(&point) <= FEAS_TOL && within(bounds, &point)).then_some(point)
}

fn within(bounds: &[Bounds], x: &[f64]) -> bool {
    bounds
        .iter()
        .zip(x)
        .all(|(b, &v)| v >= b.lower - 1e-9 && v <= b.upper + 1e-9)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lp::LpStatus;

    fn sol(values: Vec<f64>) -> LpSolution {
        LpSolution {
            status: LpStatus::Optimal,
            objective: 0.0,
            duals: Vec::new(),
            iterations: 0,
            values,
        }
    }

    #[test]
    fn integral_point_is_returned_unchanged() {
        let mut p = LpProblem::new();
        let a = p.add_var(Bounds::binary(), 1.0);
        let b = p.add_var(Bounds::binary(), 1.0);
        p.add_row("one", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.0);
        let m = MilpProblem::new(p, vec![a, b]);
        assert_eq!(round_heuristic(&sol(vec![0.0, 1.0]), &m), Some(vec![0.0, 1.0]));
    }

    #[test]
    fn exactly_one_row_keeps_argmax() {
        let mut p = LpProblem::new();
        let a = p.add_var(Bounds::binary(), 1.0);
        let b = p.add_var(Bounds::binary(), 1.0);
        p.add_row("one", vec![(a, 1.0), (b, 1.0)], Sense::Eq, 1.0);
        let m = MilpProblem::new(p, vec![a, b]);
        assert_eq!(round_heuristic(&sol(vec![0.6, 0.4]), &m), Some(vec![1.0, 0.0]));
        // tie goes to the lower index
        assert_eq!(round_heuristic(&sol(vec![0.5, 0.5]), &m), Some(vec![1.0, 0.0]));
    }

    #[test]
    fn violated_capacity_gives_none() {
        let mut p = LpProblem::new();
        let a = p.add_var(Bounds::binary(), -1.0);
        let b = p.add_var(Bounds::binary(), -1.0);
        p.add_row("cap", vec![(a, 1.0), (b, 1.0)], Sense::Le, 1.0);
        let m = MilpProblem::new(p, vec![a, b]);
        assert_eq!(round_heuristic(&sol(vec![0.5, 0.5]), &m), None);
    }

    #[test]
    fn continuous_part_is_resolved() {
        // y >= 2 - 2a, min y: with a rounded to 1 the best y is 0
        let mut p = LpProblem::new();
        let a = p.add_var(Bounds::binary(), 0.0);
        let y = p.add_var(Bounds::non_negative(), 1.0);
        p.add_row("link", vec![(y, 1.0), (a, 2.0)], Sense::Ge, 2.0);
        let m = MilpProblem::new(p, vec![a]);
        let x = round_heuristic(&sol(vec![0.7, 0.6]), &m).unwrap();
        assert_eq!(x[0], 1.0);
        assert!(x[1].abs() < 1e-9);
    }
}
