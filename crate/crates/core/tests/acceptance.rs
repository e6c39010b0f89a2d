//! Acceptance checks. Runs as a plain binary (`harness = false`) printing one
//! PASS/FAIL line per criterion; exits nonzero if any fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use chrono::DateTime;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use valleyfill::decomp::{reconstruct, stl_values, StlConfig};
use valleyfill::engine::{evaluate, solve_stage1, two_stage, verify, EngineConfig, EngineError, Outcome};
use valleyfill::forecast::mase;
use valleyfill::instance::{Activity, Battery, Instance, Room};
use valleyfill::lp::{relax, solve_lp, LpStatus, DEFAULT_TOL};
use valleyfill::milp::{solve_milp, BnBConfig, MilpStatus};
use valleyfill::motif::{discover_values, MotifConfig};
use valleyfill::series::{repair, RepairConfig, TimeSeries};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn exact(cfg: &mut BnBConfig) {
    cfg.rel_gap = 0.0;
    cfg.abs_gap = 1e-9;
}

fn rms(v: &[f64]) -> f64 {
    (v.iter().map(|x| x * x).sum::<f64>() / v.len() as f64).sqrt()
}

// ---------------------------------------------------------------- 1

fn milp_vs_enumeration() -> Check {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut cfg = BnBConfig::default();
    exact(&mut cfg);
    let (mut feasible, mut infeasible) = (0, 0);
    for case in 0..200 {
        let n = rng.gen_range(1..=12);
        let m = common::random_binary_milp(&mut rng, n);
        let s = solve_milp(&m, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        match common::enumerate_binary(&m) {
            None => {
                ensure(s.status == MilpStatus::Infeasible, || format!("case {case}: {:?} on an infeasible problem", s.status))?;
                infeasible += 1;
            }
            Some(z) => {
                let lp = solve_lp(&relax(&m), DEFAULT_TOL, 100_000).map_err(|e| format!("case {case}: {e}"))?;
                ensure(lp.status == LpStatus::Optimal, || format!("case {case}: relaxation {:?}", lp.status))?;
                ensure((s.objective - z).abs() <= 1e-6, || format!("case {case}: {} vs enumeration {z}", s.objective))?;
                ensure(s.objective >= lp.objective - 1e-6, || format!("case {case}: incumbent below relaxation"))?;
                feasible += 1;
            }
        }
    }
    let t = clock.elapsed();
    ensure(t < Duration::from_secs(60), || format!("took {t:?}"))?;
    Ok(format!("{feasible} optimal + {infeasible} infeasible agree with enumeration in {:.2?}", t))
}

// ---------------------------------------------------------------- 2

const OFFICE: std::ops::Range<usize> = 36..48;
const BLOCKS: usize = 8;

fn random_tiny(rng: &mut ChaCha8Rng) -> Instance {
    let (spec, cal) = common::calendar("2020-11-02T00:00:00+10:30", 96, ("09:00", "12:00"), &[chrono::Weekday::Mon]);
    let nrooms = rng.gen_range(1..=2);
    let rooms: Vec<Room> = (0..nrooms)
        .map(|i| Room {
            id: format!("r{i}"),
            size: [30, 60][rng.gen_range(0..2)],
        })
        .collect();
    let n = rng.gen_range(1..=3);
    let mut acts: Vec<Activity> = (0..n)
        .map(|i| {
            let need = if nrooms == 2 && rng.gen_bool(0.2) { 2 } else { 1 };
            common::activity(
                &format!("a{i}"),
                rng.gen_range(1..=5),
                rng.gen_range(1..=10) as f64 * 0.5,
                need,
                [0, 30, 50][rng.gen_range(0..3)],
            )
        })
        .collect();
    for a in &mut acts {
        let fits = |a: &Activity| rooms.iter().filter(|r| r.size >= a.room_size_min).count() >= a.rooms_required;
        if !fits(a) {
            a.room_size_min = 0;
        }
        if !fits(a) {
            a.rooms_required = 1;
        }
    }
    if n >= 2 && rng.gen_bool(0.3) {
        acts[1].precedence = vec!["a0".into()];
    }
    let batteries = if rng.gen_bool(0.7) {
        let capacity = [6.0, 12.0, 18.0][rng.gen_range(0..3)];
        let soc = 6.0 * rng.gen_range(0..=(capacity / 6.0) as usize) as f64;
        vec![Battery {
            efficiency: if rng.gen_bool(0.3) { 0.9 } else { 1.0 },
            ..common::battery("bat", capacity, 2.0, soc, 12)
        }]
    } else {
        vec![]
    };
    let base: Vec<f64> = (0..96)
        .map(|t| 5.0 + 3.0 * (t as f64 / 96.0 * std::f64::consts::TAU).sin() + rng.gen_range(-0.5..0.5))
        .collect();
    let price: Vec<f64> = (0..96)
        .map(|_| if rng.gen_bool(0.05) { -20.0 } else { rng.gen_range(20.0..120.0) })
        .collect();
    common::instance(spec, cal, acts, rooms, batteries, base, price, 0.005)
}

/// Every start tuple honouring office hours and precedence that admits a
/// room assignment.
fn start_tuples(inst: &Instance) -> Vec<Vec<usize>> {
    let acts = &inst.activities;
    let mut out = vec![vec![]];
    for a in acts {
        let cands: Vec<usize> = OFFICE.filter(|&w| w + a.duration <= OFFICE.end).collect();
        out = out
            .into_iter()
            .flat_map(|p| cands.iter().map(move |&w| [p.clone(), vec![w]].concat()))
            .collect();
    }
    out.retain(|s| {
        acts.iter().enumerate().all(|(i, a)| {
            a.precedence.iter().all(|p| {
                let j = acts.iter().position(|b| &b.id == p).unwrap();
                s[j] + acts[j].duration <= s[i]
            })
        })
    });
    out.retain(|s| rooms_fit(inst, s, 0, &mut vec![vec![]; inst.rooms.len()]));
    out
}

fn rooms_fit(inst: &Instance, s: &[usize], a: usize, busy: &mut Vec<Vec<(usize, usize)>>) -> bool {
    if a == inst.activities.len() {
        return true;
    }
    let act = &inst.activities[a];
    let span = (s[a], s[a] + act.duration);
    let r = inst.rooms.len();
    for mask in 0u32..(1 << r) {
        if mask.count_ones() as usize != act.rooms_required {
            continue;
        }
        let picked: Vec<usize> = (0..r).filter(|i| mask >> i & 1 == 1).collect();
        let ok = picked.iter().all(|&i| {
            inst.rooms[i].size >= act.room_size_min && busy[i].iter().all(|o| !(span.0 < o.1 && o.0 < span.1))
        });
        if !ok {
            continue;
        }
        for &i in &picked {
            busy[i].push(span);
        }
        let fit = rooms_fit(inst, s, a + 1, busy);
        for &i in &picked {
            busy[i].pop();
        }
        if fit {
            return true;
        }
    }
    false
}

/// Feasible block sequences as (per-block power, energy cost).
fn battery_sequences(inst: &Instance) -> Vec<(Vec<f64>, f64)> {
    let Some(b) = inst.batteries.first() else {
        return vec![(vec![0.0; BLOCKS], 0.0)];
    };
    let width = 96 / BLOCKS;
    let mut out = Vec::new();
    'seq: for code in 0..3usize.pow(BLOCKS as u32) {
        let mut c = code;
        let mut soc = b.initial_soc_kwh;
        let mut power = Vec::with_capacity(BLOCKS);
        let mut cost = 0.0;
        for k in 0..BLOCKS {
            let dir = c % 3;
            c /= 3;
            let (p, ds) = match dir {
                0 => (0.0, 0.0),
                1 => (b.power_kw, 0.25 * b.power_kw * b.efficiency),
                _ => (-b.power_kw, -0.25 * b.power_kw / b.efficiency),
            };
            for t in k * width..(k + 1) * width {
                soc += ds;
                if soc < -1e-6 || soc > b.capacity_kwh + 1e-6 {
                    continue 'seq;
                }
                cost += inst.cost.price_per_mwh[t] / 1000.0 * p * 0.25;
            }
            power.push(p);
        }
        out.push((power, cost));
    }
    out
}

/// Cheapest energy cost over all starts and battery sequences with every
/// interval at or under `cap`.
fn brute_force(inst: &Instance, cap: f64) -> Option<f64> {
    let seqs = battery_sequences(inst);
    let width = 96 / BLOCKS;
    let mut best: Option<f64> = None;
    for s in start_tuples(inst) {
        let mut p = inst.baseload_kw.clone();
        for (a, &w) in inst.activities.iter().zip(&s) {
            for v in &mut p[w..w + a.duration] {
                *v += a.load_kw_per_room * a.rooms_required as f64;
            }
        }
        let cost: f64 = p.iter().zip(&inst.cost.price_per_mwh).map(|(v, c)| c / 1000.0 * v * 0.25).sum();
        let block_max: Vec<f64> = p.chunks(width).map(|c| c.iter().copied().fold(f64::MIN, f64::max)).collect();
        for (power, bcost) in &seqs {
            if block_max.iter().zip(power).all(|(m, q)| m + q <= cap + 1e-9) {
                let z = cost + bcost;
                best = Some(best.map_or(z, |b: f64| b.min(z)));
            }
        }
    }
    best
}

fn two_stage_vs_brute_force() -> Check {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(96);
    let (mut solved, mut exhausted, mut relax_inf, mut widened) = (0, 0, 0, 0);
    let mut case = 0;
    while solved < 50 {
        ensure(case < 500, || format!("only {solved} solvable instances in {case}"))?;
        case += 1;
        let inst = random_tiny(&mut rng);
        let mut cfg = EngineConfig {
            mf: [1.0, 1.05, 1.1, 1.2][rng.gen_range(0..4)],
            ..EngineConfig::default()
        };
        exact(&mut cfg.stage2);
        match two_stage(&inst, &cfg) {
            Ok(out) => {
                let d = &out.diagnostics;
                for &mf in &d.mf_tried[..d.mf_tried.len() - 1] {
                    ensure(brute_force(&inst, mf * d.max_lb).is_none(), || format!("case {case}: factor {mf} skipped but feasible"))?;
                    widened += 1;
                }
                let z = brute_force(&inst, d.cap_kw).ok_or_else(|| format!("case {case}: solved but brute force is infeasible"))?;
                ensure((out.cost.energy_cost - z).abs() <= 1e-6, || {
                    format!("case {case}: energy {:.9} vs brute force {z:.9}", out.cost.energy_cost)
                })?;
                verify(&out.schedule, &inst).map_err(|e| format!("case {case}: {e}"))?;
                solved += 1;
            }
            Err(EngineError::Exhausted(tried)) => {
                let lb = solve_stage1(&inst, &cfg).map_err(|e| format!("case {case}: {e}"))?.max_lb;
                for mf in tried {
                    ensure(brute_force(&inst, mf * lb).is_none(), || format!("case {case}: exhausted but factor {mf} is feasible"))?;
                }
                exhausted += 1;
            }
            Err(EngineError::RelaxationInfeasible) => {
                ensure(brute_force(&inst, f64::INFINITY).is_none(), || format!("case {case}: relaxation infeasible but schedulable"))?;
                relax_inf += 1;
            }
            Err(e) => return Err(format!("case {case}: {e}")),
        }
    }
    let t = clock.elapsed();
    ensure(t < Duration::from_secs(300), || format!("took {t:?}"))?;
    Ok(format!(
        "{solved} match, {exhausted} exhausted and {relax_inf} unschedulable confirmed, {widened} widenings confirmed, {:.2?}",
        t
    ))
}

// ---------------------------------------------------------------- 3, 5

fn week_outcome() -> &'static Result<(Instance, Outcome), String> {
    static CELL: OnceLock<Result<(Instance, Outcome), String>> = OnceLock::new();
    CELL.get_or_init(|| {
        let inst = common::week_instance();
        let mut cfg = EngineConfig::default();
        cfg.stage2.rel_gap = 0.01;
        cfg.stage2.time_limit = Some(Duration::from_secs(300));
        let out = two_stage(&inst, &cfg).map_err(|e| e.to_string())?;
        Ok((inst, out))
    })
}

fn valley_filling() -> Check {
    let (inst, out) = week_outcome().as_ref().map_err(Clone::clone)?;
    let spike = (0..inst.horizon())
        .filter(|t| (48..56).contains(&(t % 96)) && out.profile[*t] < inst.baseload_kw[*t])
        .count();
    let peak = out.cost.peak_kw;
    let top = out.profile.iter().filter(|&&p| p >= 0.99 * peak).count();
    ensure(spike >= 1, || "no spike interval below baseload".into())?;
    ensure(top >= 4, || format!("only {top} intervals within 1% of the {peak:.2} kW peak"))?;
    Ok(format!(
        "{spike} spike intervals below baseload, {top} intervals within 1% of the {peak:.2} kW peak (cap {:.2})",
        out.diagnostics.cap_kw
    ))
}

fn robustness() -> Check {
    let (inst, out) = week_outcome().as_ref().map_err(Clone::clone)?;
    let nominal = evaluate(&out.schedule, inst, None).map_err(|e| e.to_string())?.total;
    let mut worst: f64 = 0.0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noisy: Vec<f64> = inst.baseload_kw.iter().map(|b| b * (1.0 + rng.gen_range(-0.1..0.1))).collect();
        let c = evaluate(&out.schedule, inst, Some(&noisy)).map_err(|e| format!("seed {seed}: {e}"))?;
        worst = worst.max((c.total - nominal).abs() / nominal.abs());
    }
    ensure(worst < 0.25, || format!("cost moved {:.2}%", 100.0 * worst))?;
    Ok(format!("20 seeds feasible, largest cost change {:.3}%", 100.0 * worst))
}

// ---------------------------------------------------------------- 4

fn factor_monotonicity() -> Check {
    let inst = common::small_instance();
    let mut last: Option<(f64, f64)> = None;
    let mut line = Vec::new();
    for mf in [1.05, 1.10, 1.20] {
        let mut cfg = EngineConfig { mf, ..EngineConfig::default() };
        exact(&mut cfg.stage2);
        let out = two_stage(&inst, &cfg).map_err(|e| format!("factor {mf}: {e}"))?;
        let d = &out.diagnostics;
        ensure(d.status == MilpStatus::Optimal, || format!("factor {mf}: {:?}", d.status))?;
        ensure(out.cost.peak_kw <= d.mf_used * d.max_lb + 1e-6, || {
            format!("factor {mf}: peak {:.4} above {:.4}", out.cost.peak_kw, d.mf_used * d.max_lb)
        })?;
        if let Some((pmf, pe)) = last {
            ensure(out.cost.energy_cost <= pe + 1e-6, || {
                format!("energy rose from {pe:.6} at {pmf} to {:.6} at {mf}", out.cost.energy_cost)
            })?;
        }
        last = Some((mf, out.cost.energy_cost));
        line.push(format!("{mf}: ${:.4} peak {:.2}/{:.2}", out.cost.energy_cost, out.cost.peak_kw, d.mf_used * d.max_lb));
    }
    Ok(line.join(", "))
}

// ---------------------------------------------------------------- 6

fn stl_identity_and_recovery() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let period = if case % 10 == 0 { 672 } else { 96 };
        let n = period * rng.gen_range(2..=6);
        let amp = rng.gen_range(0.1..100.0);
        let mut walk = rng.gen_range(-50.0..50.0);
        let y: Vec<f64> = (0..n)
            .map(|i| {
                walk += rng.gen_range(-1.0..1.0);
                walk + amp * (i as f64 * std::f64::consts::TAU / period as f64).sin() + rng.gen_range(-2.0..2.0)
            })
            .collect();
        let mut cfg = StlConfig::with_period(period);
        cfg.outer_iterations = rng.gen_range(0..=2);
        let r = stl_values(&y, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        for (a, b) in reconstruct(&r).iter().zip(&y) {
            let rel = (a - b).abs() / b.abs().max(1.0);
            worst = worst.max(rel);
        }
    }
    ensure(worst <= 1e-9, || format!("reconstruction error {worst:e}"))?;
    let week: Vec<f64> = (0..672)
        .map(|i| 50.0 + 20.0 * (i as f64 * std::f64::consts::TAU / 96.0).sin() + ((i / 96) as f64) * 3.0)
        .collect();
    let y: Vec<f64> = (0..672 * 4).map(|i| week[i % 672]).collect();
    let r = stl_values(&y, &StlConfig::default()).map_err(|e| e.to_string())?;
    let ratio = rms(&r.remainder) / rms(&y);
    ensure(ratio < 0.01, || format!("remainder at {:.3}% of signal", 100.0 * ratio))?;
    Ok(format!("max relative reconstruction error {worst:.1e}, periodic remainder {:.4}% of signal", 100.0 * ratio))
}

// ---------------------------------------------------------------- 7

/// Straight pairwise evaluation of every day as a seed.
fn motif_oracle(y: &[f64], l: usize, k: usize) -> (usize, Vec<usize>, Vec<f64>) {
    let days: Vec<&[f64]> = y.chunks(l).collect();
    let d = |i: usize, j: usize| days[i].iter().zip(days[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for i in 0..days.len() {
        let mut others: Vec<(f64, usize)> = (0..days.len()).filter(|&j| j != i).map(|j| (d(i, j), j)).collect();
        others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let total: f64 = others[..k].iter().map(|o| o.0).sum();
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, i, others[..k].iter().map(|o| o.1).collect()));
        }
    }
    let (_, seed, members) = best.unwrap();
    let profile = (0..l)
        .map(|t| (days[seed][t] + members.iter().map(|&m| days[m][t]).sum::<f64>()) / (k + 1) as f64)
        .collect();
    (seed, members, profile)
}

fn motif_matches_oracle() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let l = 96;
    let mut ties = 0;
    for case in 0..100 {
        let nd = rng.gen_range(6..=12);
        let mut y: Vec<f64> = (0..nd * l)
            .map(|i| 10.0 * ((i % l) as f64 / l as f64 * std::f64::consts::TAU).sin() + rng.gen_range(-3.0..3.0))
            .collect();
        if rng.gen_bool(0.5) {
            let (a, b) = (rng.gen_range(0..nd), rng.gen_range(0..nd));
            if a != b {
                let src = y[a * l..(a + 1) * l].to_vec();
                y[b * l..(b + 1) * l].copy_from_slice(&src);
                ties += 1;
            }
        }
        let k = rng.gen_range(1..=4.min(nd - 1));
        let cfg = MotifConfig {
            window_length: l,
            neighbor_count: k,
            ..MotifConfig::default()
        };
        let got = discover_values(&y, &cfg).map_err(|e| format!("case {case}: {e}"))?;
        let (seed, members, profile) = motif_oracle(&y, l, k);
        ensure(got.seed_index == seed && got.member_indices == members, || {
            format!("case {case}: seed {} {:?} vs oracle {seed} {members:?}", got.seed_index, got.member_indices)
        })?;
        ensure(got.profile.iter().zip(&profile).all(|(a, b)| (a - b).abs() <= 1e-12), || format!("case {case}: profile differs"))?;
    }
    Ok(format!("100/100 runs agree ({ties} with a planted duplicate day)"))
}

// ---------------------------------------------------------------- 8

fn repair_rules() -> Check {
    let n = 96 * 21;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let values: Vec<f64> = (0..n)
        .map(|i| 100.0 + 30.0 * ((i % 96) as f64 / 96.0 * std::f64::consts::TAU).sin() + rng.gen_range(-5.0..5.0))
        .collect();
    let gaps = [(100usize, 1usize), (400, 50), (900, 97), (1500, 120)];
    let mut valid = vec![true; n];
    for &(s, len) in &gaps {
        valid[s..s + len].iter_mut().for_each(|v| *v = false);
    }
    let start = DateTime::parse_from_rfc3339("2020-11-01T00:00:00+10:30").unwrap();
    let ts = TimeSeries::with_validity(start, values, valid.clone()).map_err(|e| e.to_string())?;
    let (out, report) = repair(&ts, &RepairConfig::default()).map_err(|e| e.to_string())?;

    // per point: window rule when at least half of the clipped window is valid
    let window_ok = |i: usize| {
        let (lo, hi) = (i.saturating_sub(48), (i + 48).min(n));
        let good = valid[lo..hi].iter().filter(|v| **v).count();
        good > 0 && 2 * good >= hi - lo
    };
    let short: Vec<usize> = gaps.iter().filter(|g| g.1 <= 96).flat_map(|&(s, len)| s..s + len).collect();
    let want_window = short.iter().filter(|&&i| window_ok(i)).count();
    let want_annual = short.len() - want_window;
    let long: Vec<(usize, usize)> = gaps.iter().copied().filter(|g| g.1 > 96).collect();
    ensure(report.removed_spans == long, || format!("removed {:?}", report.removed_spans))?;
    ensure(report.window_imputed == want_window && report.annual_imputed == want_annual, || {
        format!(
            "window {} annual {} vs expected {want_window}/{want_annual}",
            report.window_imputed, report.annual_imputed
        )
    })?;
    ensure(window_ok(100), || "single gap not window-imputable".into())?;
    let mixed = (400..450).map(window_ok).collect::<Vec<_>>();
    ensure(mixed.contains(&true) && mixed.contains(&false), || "50-point gap does not mix rules".into())?;
    ensure(long.iter().all(|&(s, len)| (s..s + len).all(|i| out.excluded[i] && out.values[i].is_nan())), || {
        "long gaps not excluded".into()
    })?;
    ensure(short.iter().all(|&i| out.valid[i] && out.values[i].is_finite()), || "short gaps not filled".into())?;
    Ok(format!(
        "gap 1 window, gap 50 window {}/annual {}, gaps 97 and 120 excluded",
        want_window - 1,
        want_annual
    ))
}

// ---------------------------------------------------------------- 9

fn mase_contract() -> Check {
    let start = DateTime::parse_from_rfc3339("2020-11-01T00:00:00+10:30").unwrap();
    let train = TimeSeries::new(start, vec![1.0, 3.0, 2.0, 5.0, 4.0, 6.0, 5.0, 8.0]);
    let actual = [7.0, 9.0, 8.0, 10.0];
    let zero = mase(&actual, &actual, &train, 1).map_err(|e| e.to_string())?;
    ensure(zero == 0.0, || format!("identical forecast scored {zero}"))?;
    let got = mase(&[6.0, 9.0, 10.0, 9.0], &actual, &train, 1).map_err(|e| e.to_string())?;
    ensure((got - 7.0 / 13.0).abs() <= 1e-12, || format!("{got} vs 7/13"))?;
    Ok(format!("perfect forecast 0, hand case {got:.12} = 7/13"))
}

// ---------------------------------------------------------------- 10

fn month_smoke() -> Check {
    let inst = common::month_instance(4);
    let mut cfg = EngineConfig::default();
    cfg.stage2.rel_gap = 0.05;
    cfg.stage2.time_limit = Some(Duration::from_secs(25 * 60));
    let clock = Instant::now();
    let out = two_stage(&inst, &cfg).map_err(|e| e.to_string())?;
    let t = clock.elapsed();
    verify(&out.schedule, &inst).map_err(|e| e.to_string())?;
    let gap = out.diagnostics.gap;
    ensure(gap <= 0.05, || format!("gap {gap:.4}"))?;
    ensure(t < Duration::from_secs(30 * 60), || format!("took {t:?}"))?;
    Ok(format!(
        "T={} with {} activities and {} batteries: gap {:.3}% in {:.1?}",
        inst.horizon(),
        inst.activities.len(),
        inst.batteries.len(),
        100.0 * gap,
        t
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("MILP vs enumeration", milp_vs_enumeration),
        ("two-stage vs brute force", two_stage_vs_brute_force),
        ("valley filling", valley_filling),
        ("factor monotonicity", factor_monotonicity),
        ("robustness to baseload noise", robustness),
        ("STL identity and recovery", stl_identity_and_recovery),
        ("motif medoid", motif_matches_oracle),
        ("repair rules", repair_rules),
        ("MASE contract", mase_contract),
        ("month-scale smoke", month_smoke),
    ];
    std::panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let res = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match res {
            Ok(detail) => println!("criterion {} ({name}): PASS {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("criterion {} ({name}): FAIL {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
