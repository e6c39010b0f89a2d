//! Two-stage valley-filling scheduler: a relaxed peak-minimisation stage
//! yields a lower bound on the achievable peak, then an energy-cost MILP
//! runs under a cap of a multiple of that bound.

mod formulation;
mod heuristic;
mod rooms;

pub use formulation::{build_stage1, build_stage2, implied_power, start_candidates, within_week, FormulationMap};
pub use heuristic::{greedy_plan, plan_columns, Plan};
pub use rooms::assign_rooms;

use crate::clock::Stopwatch;
use crate::instance::Instance;
use crate::lp::{default_iteration_limit, relax, solve_lp, LpError, LpStatus};
use crate::milp::{solve_milp, solve_milp_from, BnBConfig, MilpError, MilpStatus};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

const MF_STEP: f64 = 0.05;
const MF_RETRIES: usize = 3;
const SOC_TOL: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("activity `{0}` has no feasible start")]
    NoFeasibleStart(String),
    #[error("peak relaxation is infeasible; the instance cannot be scheduled")]
    RelaxationInfeasible,
    #[error("no feasible schedule under any of the multiplication factors {0:?}")]
    Exhausted(Vec<f64>),
    #[error("solver stopped at a limit without a feasible schedule (stage {stage})")]
    SolverLimit { stage: u8 },
    #[error("room assignment failed")]
    AssignmentFailed,
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("multiplication factor must be finite and >= 1, got {0}")]
    InvalidFactor(f64),
    #[error("baseload has {got} values, horizon is {want}")]
    LengthMismatch { got: usize, want: usize },
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Milp(#[from] MilpError),
}

#[derive(Clone, Debug)]
pub struct EngineConfig {
    /// Multiplication factor on the peak lower bound.
    pub mf: f64,
    pub stage2: BnBConfig,
    /// Solve the peak stage as an LP; `false` runs the full MILP instead.
    pub stage1_relaxed: bool,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            mf: 1.10,
            stage2: BnBConfig::default(),
            stage1_relaxed: true,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BatteryDecision {
    Charge,
    Idle,
    Discharge,
}

impl BatteryDecision {
    pub fn sign(self) -> f64 {
        match self {
            BatteryDecision::Charge => 1.0,
            BatteryDecision::Idle => 0.0,
            BatteryDecision::Discharge => -1.0,
        }
    }

    pub fn code(self) -> char {
        match self {
            BatteryDecision::Charge => 'c',
            BatteryDecision::Idle => 'i',
            BatteryDecision::Discharge => 'd',
        }
    }
}

/// Weekly starts, rooms and battery decisions, indexed like the instance's
/// activities and batteries.
#[derive(Clone, Debug, PartialEq)]
pub struct Schedule {
    /// Within-week start interval per activity.
    pub starts: Vec<usize>,
    pub rooms: Vec<Vec<String>>,
    /// Per battery, one decision per interval.
    pub battery: Vec<Vec<BatteryDecision>>,
}

impl Schedule {
    /// Every battery idle; activities and rooms as given.
    pub fn idle(inst: &Instance, starts: Vec<usize>, rooms: Vec<Vec<String>>) -> Schedule {
        Schedule {
            starts,
            rooms,
            battery: vec![vec![BatteryDecision::Idle; inst.horizon()]; inst.batteries.len()],
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub energy_cost: f64,
    pub peak_kw: f64,
    pub peak_cost: f64,
    pub total: f64,
}

#[derive(Clone, Debug)]
pub struct Stage1Result {
    pub max_lb: f64,
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Metadata {
    pub wall_time_seconds: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub max_lb: f64,
    pub mf_used: f64,
    pub mf_tried: Vec<f64>,
    pub cap_kw: f64,
    pub status: MilpStatus,
    pub gap: f64,
    pub stage2_objective: f64,
    pub stage2_bound: f64,
    pub nodes: usize,
    pub lp_iterations: usize,
    /// Largest difference between the solver's power and the recomputed
    /// profile.
    pub profile_mismatch_kw: f64,
    pub metadata: Metadata,
}

#[derive(Clone, Debug)]
pub struct Outcome {
    pub schedule: Schedule,
    pub profile: Vec<f64>,
    pub cost: CostBreakdown,
    pub diagnostics: Diagnostics,
}

/// Lower bound on the peak from the relaxed (or, on request, exact) first
/// stage.
pub fn solve_stage1(inst: &Instance, cfg: &EngineConfig) -> Result<Stage1Result, EngineError> {
    let (m, _) = build_stage1(inst)?;
    if cfg.stage1_relaxed {
        let p = relax(&m);
        let s = solve_lp(&p, cfg.stage2.lp_tol, default_iteration_limit(&p))?;
        return match s.status {
            LpStatus::Optimal => Ok(Stage1Result {
                max_lb: s.objective,
                values: s.values,
                iterations: s.iterations,
            }),
            LpStatus::IterationLimit => Err(EngineError::SolverLimit { stage: 1 }),
            // M is bounded below by zero, so only infeasibility remains
            _ => Err(EngineError::RelaxationInfeasible),
        };
    }
    let s = solve_milp(&m, &cfg.stage2)?;
    match (s.status, s.values) {
        (MilpStatus::Optimal | MilpStatus::Feasible { .. }, Some(values)) => Ok(Stage1Result {
            max_lb: s.bound,
            values,
            iterations: s.lp_iterations,
        }),
        (MilpStatus::Infeasible, _) => Err(EngineError::RelaxationInfeasible),
        _ => Err(EngineError::SolverLimit { stage: 1 }),
    }
}

fn extract(inst: &Instance, map: &FormulationMap, x: &[f64]) -> (Vec<usize>, Vec<Vec<BatteryDecision>>) {
    let starts = map
        .start_vars
        .iter()
        .map(|cols| {
            cols.iter()
                .find(|&&(_, j)| x[j] > 0.5)
                .map(|&(w, _)| w)
                .expect("exactly-once row admits one start")
        })
        .collect();
    let t_len = inst.horizon();
    let battery = inst
        .batteries
        .iter()
        .enumerate()
        .map(|(b, bat)| {
            (0..t_len)
                .map(|t| {
                    let k = t / bat.decision_block;
                    if x[map.charge_vars[b][k]] > 0.5 {
                        BatteryDecision::Charge
                    } else if x[map.discharge_vars[b][k]] > 0.5 {
                        BatteryDecision::Discharge
                    } else {
                        BatteryDecision::Idle
                    }
                })
                .collect()
        })
        .collect();
    (starts, battery)
}

/// Full pipeline: bound, capped cost minimisation with a widening factor
/// on infeasibility, extraction, room assignment and costing.
pub fn two_stage(inst: &Instance, cfg: &EngineConfig) -> Result<Outcome, EngineError> {
    if !(cfg.mf.is_finite() && cfg.mf >= 1.0) {
        return Err(EngineError::InvalidFactor(cfg.mf));
    }
    let clock = Stopwatch::start();
    let s1 = solve_stage1(inst, cfg)?;
    log::info!("stage 1 bound {:.4} kW ({} iterations)", s1.max_lb, s1.iterations);
    let mut tried = Vec::new();
    for i in 0..=MF_RETRIES {
        let mf = cfg.mf + MF_STEP * i as f64;
        tried.push(mf);
        let cap = mf * s1.max_lb;
        let (m, map) = build_stage2(inst, cap)?;
        log::info!(
            "stage 2 at factor {mf:.2}: cap {cap:.4} kW, {} columns, {} rows",
            m.base.num_vars,
            m.base.rows.len()
        );
        let start = greedy_plan(inst, cap).map(|p| plan_columns(inst, &map, &p));
        if start.is_none() {
            log::debug!("no greedy start under cap {cap:.4} kW");
        }
        let sol = solve_milp_from(&m, &cfg.stage2, start.as_deref())?;
        let x = match (sol.status, &sol.values) {
            (MilpStatus::Infeasible, _) => continue,
            (MilpStatus::Optimal | MilpStatus::Feasible { .. }, Some(x)) => x,
            _ => return Err(EngineError::SolverLimit { stage: 2 }),
        };
        let (starts, battery) = extract(inst, &map, x);
        let rooms = assign_rooms(inst, &starts)?;
        let schedule = Schedule { starts, rooms, battery };
        let profile = power_profile(&schedule, inst)?;
        let internal = implied_power(inst, &map, x);
        let mismatch = profile
            .iter()
            .zip(&internal)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let cost = cost_of(&profile, inst);
        let diagnostics = Diagnostics {
            max_lb: s1.max_lb,
            mf_used: mf,
            mf_tried: tried,
            cap_kw: cap,
            status: sol.status,
            gap: sol.gap(),
            stage2_objective: sol.objective,
            stage2_bound: sol.bound,
            nodes: sol.nodes_explored,
            lp_iterations: sol.lp_iterations + s1.iterations,
            profile_mismatch_kw: mismatch,
            metadata: Metadata {
                wall_time_seconds: clock.elapsed().map(|d| d.as_secs_f64()),
            },
        };
        return Ok(Outcome {
            schedule,
            profile,
            cost,
            diagnostics,
        });
    }
    Err(EngineError::Exhausted(tried))
}

fn bad(msg: String) -> EngineError {
    EngineError::InfeasibleSchedule(msg)
}

/// Check every schedule rule that does not depend on baseload.
pub fn verify(s: &Schedule, inst: &Instance) -> Result<(), EngineError> {
    let acts = &inst.activities;
    if s.starts.len() != acts.len() || s.rooms.len() != acts.len() {
        return Err(bad("one start and room list per activity".into()));
    }
    for (a, act) in acts.iter().enumerate() {
        if !start_candidates(inst, a).contains(&s.starts[a]) {
            return Err(bad(format!("`{}` starts outside an office span at {}", act.id, s.starts[a])));
        }
    }
    let index = inst.activity_index();
    for (a, act) in acts.iter().enumerate() {
        for p in &act.precedence {
            let pi = index[p.as_str()];
            if s.starts[pi] + acts[pi].duration > s.starts[a] {
                return Err(bad(format!("`{}` starts before `{p}` ends", act.id)));
            }
        }
    }
    let room_ix: BTreeMap<&str, usize> = inst.rooms.iter().enumerate().map(|(i, r)| (r.id.as_str(), i)).collect();
    let mut booked: Vec<Vec<usize>> = vec![Vec::new(); inst.rooms.len()];
    for (a, act) in acts.iter().enumerate() {
        let rs = &s.rooms[a];
        if rs.len() != act.rooms_required {
            return Err(bad(format!("`{}` holds {} rooms, needs {}", act.id, rs.len(), act.rooms_required)));
        }
        for (k, r) in rs.iter().enumerate() {
            let &i = room_ix.get(r.as_str()).ok_or_else(|| bad(format!("unknown room `{r}`")))?;
            if rs[..k].contains(r) {
                return Err(bad(format!("`{}` lists room `{r}` twice", act.id)));
            }
            if inst.rooms[i].size < act.room_size_min {
                return Err(bad(format!("room `{r}` is too small for `{}`", act.id)));
            }
            let span = (s.starts[a], s.starts[a] + act.duration);
            for &o in &booked[i] {
                let other = (s.starts[o], s.starts[o] + acts[o].duration);
                if span.0 < other.1 && other.0 < span.1 {
                    return Err(bad(format!("room `{r}` double-booked by `{}` and `{}`", acts[o].id, act.id)));
                }
            }
            booked[i].push(a);
        }
    }
    if s.battery.len() != inst.batteries.len() {
        return Err(bad("one decision sequence per battery".into()));
    }
    let h = inst.calendar.interval_hours;
    for (bat, seq) in inst.batteries.iter().zip(&s.battery) {
        if seq.len() != inst.horizon() {
            return Err(bad(format!("battery `{}` needs one decision per interval", bat.id)));
        }
        let mut soc = bat.initial_soc_kwh;
        for (t, d) in seq.iter().enumerate() {
            soc += h * bat.power_kw
                * match d {
                    BatteryDecision::Charge => bat.efficiency,
                    BatteryDecision::Idle => 0.0,
                    BatteryDecision::Discharge => -1.0 / bat.efficiency,
                };
            if soc < -SOC_TOL || soc > bat.capacity_kwh + SOC_TOL {
                return Err(bad(format!("battery `{}` state of charge {soc:.6} out of range at {t}", bat.id)));
            }
        }
    }
    Ok(())
}

fn profile_on(s: &Schedule, inst: &Instance, base: &[f64]) -> Vec<f64> {
    let frame = inst.calendar.week_frame();
    let mut p = base.to_vec();
    for (t, v) in p.iter_mut().enumerate() {
        let tau = within_week(t, frame);
        for (act, &w) in inst.activities.iter().zip(&s.starts) {
            if w <= tau && tau < w + act.duration {
                *v += act.load_kw();
            }
        }
        for (bat, seq) in inst.batteries.iter().zip(&s.battery) {
            *v += bat.power_kw * seq[t].sign();
        }
    }
    p
}

/// Scheduled power per interval, recomputed from the schedule alone.
pub fn power_profile(s: &Schedule, inst: &Instance) -> Result<Vec<f64>, EngineError> {
    verify(s, inst)?;
    Ok(profile_on(s, inst, &inst.baseload_kw))
}

/// Energy and peak cost of a power profile. The peak charge applies to
/// imports only.
pub fn cost_of(profile: &[f64], inst: &Instance) -> CostBreakdown {
    let h = inst.calendar.interval_hours;
    let energy_cost: f64 = profile
        .iter()
        .zip(&inst.cost.price_per_mwh)
        .map(|(p, c)| c / 1000.0 * p * h)
        .sum();
    let peak_kw = profile.iter().copied().fold(0.0, f64::max);
    let peak_cost = inst.cost.peak_coefficient * peak_kw * peak_kw;
    CostBreakdown {
        energy_cost,
        peak_kw,
        peak_cost,
        total: energy_cost + peak_cost,
    }
}

/// Cost of a fixed schedule, optionally against a different (true)
/// baseload.
pub fn evaluate(s: &Schedule, inst: &Instance, actuals: Option<&[f64]>) -> Result<CostBreakdown, EngineError> {
    verify(s, inst)?;
    let base = actuals.unwrap_or(&inst.baseload_kw);
    if base.len() != inst.horizon() {
        return Err(EngineError::LengthMismatch {
            got: base.len(),
            want: inst.horizon(),
        });
    }
    Ok(cost_of(&profile_on(s, inst, base), inst))
}

#[derive(Serialize)]
struct ActivityOut<'a> {
    id: &'a str,
    start: String,
    start_index: usize,
    rooms: &'a [String],
}

#[derive(Serialize)]
struct BatteryOut<'a> {
    id: &'a str,
    decisions: String,
}

#[derive(Serialize)]
struct ScheduleOut<'a> {
    activities: Vec<ActivityOut<'a>>,
    batteries: Vec<BatteryOut<'a>>,
}

/// Schedule as JSON: first-occurrence timestamps, rooms, and one `c`/`i`/`d`
/// character per interval per battery.
pub fn schedule_json(s: &Schedule, inst: &Instance) -> String {
    let out = ScheduleOut {
        activities: inst
            .activities
            .iter()
            .zip(&s.starts)
            .zip(&s.rooms)
            .map(|((a, &w), rooms)| ActivityOut {
                id: &a.id,
                start: inst.calendar.timestamp(w).to_rfc3339(),
                start_index: w,
                rooms,
            })
            .collect(),
        batteries: inst
            .batteries
            .iter()
            .zip(&s.battery)
            .map(|(b, seq)| BatteryOut {
                id: &b.id,
                decisions: seq.iter().map(|d| d.code()).collect(),
            })
            .collect(),
    };
    serde_json::to_string_pretty(&out).expect("schedule serializes")
}

/// `timestamp,baseload,p_sched,price` rows.
pub fn profile_csv(inst: &Instance, profile: &[f64]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["timestamp", "baseload", "p_sched", "price"]).expect("in-memory write");
    for (t, p) in profile.iter().enumerate() {
        w.write_record([
            inst.calendar.timestamp(t).to_rfc3339(),
            inst.baseload_kw[t].to_string(),
            p.to_string(),
            inst.cost.price_per_mwh[t].to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 csv")
}


#[cfg(test)]
mod tests {
    use super::testing::tiny;
    use super::*;

    #[test]
    fn empty_instance_costs_baseline() {
        let inst = tiny(0, false);
        let out = two_stage(&inst, &EngineConfig::default()).unwrap();
        assert!(out.schedule.starts.is_empty());
        let h = 0.25;
        let energy: f64 = inst.baseload_kw.iter().zip(&inst.cost.price_per_mwh).map(|(b, c)| c / 1000.0 * b * h).sum();
        let peak = inst.baseload_kw.iter().copied().fold(f64::MIN, f64::max);
        assert!((out.cost.total - (energy + 0.005 * peak * peak)).abs() < 1e-9);
        assert!((out.diagnostics.max_lb - peak).abs() < 1e-9);
    }

    #[test]
    fn two_stage_respects_cap_and_bound_chain() {
        let inst = tiny(3, true);
        let out = two_stage(&inst, &EngineConfig::default()).unwrap();
        let d = &out.diagnostics;
        let exact = solve_stage1(&inst, &EngineConfig { stage1_relaxed: false, ..Default::default() }).unwrap();
        assert!(d.max_lb <= exact.max_lb + 1e-6);
        assert!(exact.max_lb <= out.cost.peak_kw + 1e-6);
        assert!(out.cost.peak_kw <= d.cap_kw + 1e-6);
        assert!(d.profile_mismatch_kw < 1e-6);
        assert!(verify(&out.schedule, &inst).is_ok());
    }

    #[test]
    fn profile_of_empty_and_charging_schedules() {
        let inst = tiny(0, true);
        let mut s = Schedule::idle(&inst, vec![], vec![]);
        assert_eq!(power_profile(&s, &inst).unwrap(), inst.baseload_kw);
        s.battery[0][5] = BatteryDecision::Charge;
        let p = power_profile(&s, &inst).unwrap();
        assert!((p[5] - inst.baseload_kw[5] - 2.0).abs() < 1e-12);
        assert_eq!(p[6], inst.baseload_kw[6]);
    }

    #[test]
    fn soc_overrun_is_reported() {
        let inst = tiny(0, true);
        let mut s = Schedule::idle(&inst, vec![], vec![]);
        // 3 kWh head-room at 0.5 kWh per interval
        for t in 0..7 {
            s.battery[0][t] = BatteryDecision::Charge;
        }
        assert!(matches!(verify(&s, &inst), Err(EngineError::InfeasibleSchedule(_))));
        s.battery[0][6] = BatteryDecision::Idle;
        assert!(verify(&s, &inst).is_ok());
    }

    #[test]
    fn evaluate_arithmetic() {
        let mut inst = tiny(0, false);
        inst.baseload_kw = vec![0.0; 96];
        inst.cost.price_per_mwh = vec![100.0; 96];
        inst.cost.peak_coefficient = 0.0;
        let s = Schedule::idle(&inst, vec![], vec![]);
        assert_eq!(evaluate(&s, &inst, None).unwrap().total, 0.0);
        let mut four = vec![0.0; 96];
        four[10..14].fill(1.0);
        let c = evaluate(&s, &inst, Some(&four)).unwrap();
        assert!((c.energy_cost - 0.1).abs() < 1e-12);
        inst.cost.price_per_mwh = vec![0.0; 96];
        inst.cost.peak_coefficient = 0.005;
        let mut spike = vec![0.0; 96];
        spike[3] = 10.0;
        let c = evaluate(&s, &inst, Some(&spike)).unwrap();
        assert!((c.total - 0.5).abs() < 1e-12);
        assert!(matches!(evaluate(&s, &inst, Some(&[1.0])), Err(EngineError::LengthMismatch { .. })));
    }

    #[test]
    fn infeasible_rooms_are_reported() {
        let mut inst = tiny(2, false);
        inst.rooms.truncate(1);
        for a in &mut inst.activities {
            a.room_size_min = 0;
            a.duration = 12;
        }
        let err = two_stage(&inst, &EngineConfig::default()).unwrap_err();
        assert!(matches!(err, EngineError::RelaxationInfeasible), "{err}");
    }

    #[test]
    fn over_tight_cap_is_infeasible() {
        let inst = tiny(2, false);
        let (m, _) = build_stage2(&inst, 1.0).unwrap();
        let s = solve_milp(&m, &BnBConfig::default()).unwrap();
        assert_eq!(s.status, MilpStatus::Infeasible);
    }

    #[test]
    fn invalid_factor() {
        let inst = tiny(0, false);
        let cfg = EngineConfig { mf: 0.9, ..Default::default() };
        assert_eq!(two_stage(&inst, &cfg).unwrap_err(), EngineError::InvalidFactor(0.9));
    }

    #[test]
    fn json_and_csv_shapes() {
        let inst = tiny(1, true);
        let out = two_stage(&inst, &EngineConfig::default()).unwrap();
        let v: serde_json::Value = serde_json::from_str(&schedule_json(&out.schedule, &inst)).unwrap();
        assert_eq!(v["batteries"][0]["decisions"].as_str().unwrap().len(), 96);
        assert!(v["activities"][0]["start"].as_str().unwrap().starts_with("2020-11-02T"));
        let csv = profile_csv(&inst, &out.profile);
        assert_eq!(csv.lines().count(), 97);
        assert!(csv.starts_with("timestamp,baseload,p_sched,price\n"));
    }
}
