use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use valleyfill::decomp::{stl_decompose, StlConfig};
use valleyfill::engine::{
    build_stage1, build_stage2, evaluate, profile_csv, schedule_json, two_stage, CostBreakdown, EngineConfig, EngineError,
};
use valleyfill::forecast::{daily_features, mase, parse_exogenous, run_spec, DailyFeatures, ForecastModel, ForecastSpec};
use valleyfill::instance::{load_instance, Instance};
use valleyfill::lp::write_milp_text;
use valleyfill::motif::{discover, MotifConfig};
use valleyfill::series::{
    apply_directive, parse_series, repair as repair_series, write_series, DirectiveKind, RepairConfig, RepairDirective,
    TimeRange, TimeSeries,
};

use crate::{DecomposeArgs, ForecastArgs, MotifArgs, RepairArgs, ScheduleArgs};

const DEMO_INSTANCE: &str = include_str!("../demo/instance.json");

/// Stable exit codes: 2 when no schedule exists under any factor, 3 when the
/// solver stopped without one, 1 otherwise.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    match e.downcast_ref::<EngineError>() {
        Some(EngineError::Exhausted(_) | EngineError::RelaxationInfeasible | EngineError::NoFeasibleStart(_)) => 2,
        Some(EngineError::SolverLimit { .. }) => 3,
        _ => 1,
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn read_series(path: &Path) -> Result<TimeSeries> {
    parse_series(&read(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
    log::info!("wrote {}", path.display());
    Ok(())
}

fn to_json<T: Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)? + "\n")
}

fn stem(path: &Path) -> String {
    path.file_stem().map_or_else(|| "series".into(), |s| s.to_string_lossy().into_owned())
}

/// Compact directive syntax `kind:param:start..end`, or `@file.json` holding
/// a list of full directives whose donor paths are relative to the file.
fn parse_directives(arg: &str) -> Result<Vec<(RepairDirective, Option<PathBuf>)>> {
    if let Some(file) = arg.strip_prefix('@') {
        let path = Path::new(file);
        let list: Vec<RepairDirective> =
            serde_json::from_str(&read(path)?).with_context(|| format!("parsing directives in {file}"))?;
        let dir = path.parent().unwrap_or(Path::new("."));
        return Ok(list
            .into_iter()
            .map(|d| {
                let donor = match &d.kind {
                    DirectiveKind::DonorSplice { donor, .. } => Some(dir.join(donor)),
                    _ => None,
                };
                (d, donor)
            })
            .collect());
    }
    let mut parts = arg.splitn(3, ':');
    let (kind, param, range) = match (parts.next(), parts.next(), parts.next()) {
        (Some(k), Some(p), Some(r)) => (k, p, r),
        _ => bail!("directive `{arg}` is not `kind:param:start..end`"),
    };
    let (start, end) = range
        .split_once("..")
        .ok_or_else(|| anyhow!("directive range `{range}` is not `start..end`"))?;
    let range = TimeRange {
        start: start.parse().with_context(|| format!("directive start `{start}`"))?,
        end: end.parse().with_context(|| format!("directive end `{end}`"))?,
    };
    let kind = match kind {
        "constant_fill" => DirectiveKind::ConstantFill {
            level: param.parse().with_context(|| format!("constant_fill level `{param}`"))?,
        },
        "year_shift_fill" => DirectiveKind::YearShiftFill {
            source_year_offset: param.parse().with_context(|| format!("year_shift_fill offset `{param}`"))?,
        },
        other => bail!("unknown directive `{other}` (donor_splice needs the @file form)"),
    };
    Ok(vec![(RepairDirective { kind, range }, None)])
}

pub fn repair(a: &RepairArgs) -> Result<()> {
    let mut ts = read_series(&a.input)?;
    let mut applied = Vec::new();
    for arg in &a.directive {
        for (d, donor) in parse_directives(arg)? {
            let donor = donor.as_deref().map(read_series).transpose()?;
            ts = apply_directive(&ts, &d, donor.as_ref()).with_context(|| format!("directive `{}`", d.kind.name()))?;
            applied.push(d.kind.name().to_string());
        }
    }
    let cfg = RepairConfig {
        window: a.window,
        ..RepairConfig::default()
    };
    let (out, mut report) = repair_series(&ts, &cfg).context("repair")?;
    report.directive_applied = applied;
    write(&a.out_dir, "repaired.csv", &write_series(&out))?;
    write(&a.out_dir, "repair_report.json", &to_json(&report)?)?;
    Ok(())
}

pub fn decompose(a: &DecomposeArgs) -> Result<()> {
    let ts = read_series(&a.input)?;
    let cfg = StlConfig {
        outer_iterations: a.outer_iterations,
        ..StlConfig::with_period(a.period)
    };
    let r = stl_decompose(&ts, &cfg).context("decompose")?;
    let mut csv = String::from("trend,seasonal,remainder\n");
    for i in 0..r.trend.len() {
        csv.push_str(&format!("{:?},{:?},{:?}\n", r.trend[i], r.seasonal[i], r.remainder[i]));
    }
    write(&a.out_dir, "decomposition.csv", &csv)
}

#[derive(Serialize)]
struct MotifMeta {
    window_length: usize,
    seed_index: usize,
    seed_start: String,
    member_indices: Vec<usize>,
    total_dissimilarity: f64,
}

pub fn motif(a: &MotifArgs) -> Result<()> {
    let ts = read_series(&a.input)?;
    let cfg = MotifConfig {
        window_length: a.window,
        neighbor_count: a.neighbors,
        ..MotifConfig::default()
    };
    let rm = discover(&ts, &cfg).context("motif")?;
    let mut csv = String::from("slot,value\n");
    for (i, v) in rm.profile.iter().enumerate() {
        csv.push_str(&format!("{i},{v:?}\n"));
    }
    let meta = MotifMeta {
        window_length: a.window,
        seed_index: rm.seed_index,
        seed_start: ts.timestamp(rm.seed_index * rm.stride).to_rfc3339(),
        member_indices: rm.member_indices.clone(),
        total_dissimilarity: rm.total_dissimilarity,
    };
    write(&a.out_dir, "motif.csv", &csv)?;
    write(&a.out_dir, "motif.json", &to_json(&meta)?)
}

struct Forecasted {
    name: String,
    series: TimeSeries,
    mase: Option<f64>,
}

fn forecast_one(path: &Path, a: &ForecastArgs, base: &ForecastSpec, daily: Option<&DailyFeatures>) -> Result<Forecasted> {
    let ts = read_series(path)?;
    let mut spec = base.clone();
    let (train, actual) = match a.holdout {
        Some(h) => {
            if h == 0 || h >= ts.len() {
                bail!("holdout {h} must lie in 1..{}", ts.len());
            }
            spec.horizon = h;
            let cut = ts.len() - h;
            (ts.slice(0, cut), Some(ts.slice(cut, ts.len())))
        }
        None => (ts, None),
    };
    let values = run_spec(&spec, &train, daily).with_context(|| format!("forecast of {}", path.display()))?;
    let mase = match &actual {
        Some(act) => {
            if let Some(i) = (0..act.len()).find(|&i| !act.usable(i)) {
                bail!("holdout point {i} of {} is missing", path.display());
            }
            Some(mase(&values, &act.values, &train, a.period).with_context(|| format!("MASE of {}", path.display()))?)
        }
        None => None,
    };
    Ok(Forecasted {
        name: stem(path),
        series: TimeSeries::new(train.timestamp(train.len()), values),
        mase,
    })
}

pub fn forecast(a: &ForecastArgs) -> Result<()> {
    let spec = match &a.spec {
        Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        None => ForecastSpec {
            model: ForecastModel::SeasonalNaive { period: a.period },
            horizon: a.horizon,
            adjustments: vec![],
        },
    };
    let daily = match &a.exogenous {
        Some(p) => Some(daily_features(
            &parse_exogenous(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
        )),
        None => None,
    };
    let results: Vec<Result<Forecasted>> = std::thread::scope(|s| {
        let handles: Vec<_> = a
            .input
            .iter()
            .map(|p| s.spawn(|| forecast_one(p, a, &spec, daily.as_ref())))
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap_or_else(|_| Err(anyhow!("forecast worker panicked"))))
            .collect()
    });
    for r in results {
        let f = r?;
        write(&a.out_dir, &format!("{}_forecast.csv", f.name), &write_series(&f.series))?;
        if let Some(m) = f.mase {
            println!("{}: MASE {m:.4}", f.name);
        }
    }
    Ok(())
}

fn load(a: &ScheduleArgs) -> Result<Instance> {
    let mut inst = match &a.input {
        Some(p) => load_instance(&read(p)?, p.parent()).with_context(|| format!("loading {}", p.display()))?,
        None => load_instance(DEMO_INSTANCE, None).context("loading the bundled demo instance")?,
    };
    if let Some(p) = &a.baseload {
        let ts = read_series(p)?;
        if let Some(i) = (0..ts.len()).find(|&i| !ts.usable(i)) {
            bail!("baseload point {i} of {} is missing", p.display());
        }
        if ts.len() != inst.horizon() {
            bail!("baseload {} has {} points, horizon is {}", p.display(), ts.len(), inst.horizon());
        }
        inst.baseload_kw = ts.values;
    }
    Ok(inst)
}

#[derive(Serialize)]
struct Evaluation {
    planned: CostBreakdown,
    actual: CostBreakdown,
    relative_change: f64,
}

pub fn schedule(a: &ScheduleArgs) -> Result<()> {
    let inst = load(a)?;
    let mut cfg = EngineConfig {
        mf: a.mf,
        ..EngineConfig::default()
    };
    cfg.stage2.rel_gap = a.gap;
    cfg.stage2.audit = a.audit;
    cfg.stage2.time_limit = a
        .time_limit
        .map(|s| Duration::try_from_secs_f64(s).map_err(|_| anyhow!("time limit {s} is not a valid duration")))
        .transpose()?;
    if a.dump_lp {
        let (m, _) = build_stage1(&inst).context("stage 1")?;
        write(&a.out_dir, "stage1.lp", &write_milp_text(&m))?;
    }
    let out = two_stage(&inst, &cfg).context("schedule")?;
    if a.dump_lp {
        let (m, _) = build_stage2(&inst, out.diagnostics.cap_kw).context("stage 2")?;
        write(&a.out_dir, "stage2.lp", &write_milp_text(&m))?;
    }
    write(&a.out_dir, "schedule.json", &schedule_json(&out.schedule, &inst))?;
    write(&a.out_dir, "profile.csv", &profile_csv(&inst, &out.profile))?;
    write(&a.out_dir, "cost.json", &to_json(&out.cost)?)?;
    write(&a.out_dir, "diagnostics.json", &to_json(&out.diagnostics)?)?;
    println!(
        "energy ${:.2}, peak {:.2} kW (cap {:.2} at factor {:.2}), total ${:.2}",
        out.cost.energy_cost, out.cost.peak_kw, out.diagnostics.cap_kw, out.diagnostics.mf_used, out.cost.total
    );
    if let Some(p) = &a.evaluate_against {
        let ts = read_series(p)?;
        if let Some(i) = (0..ts.len()).find(|&i| !ts.usable(i)) {
            bail!("actual baseload point {i} of {} is missing", p.display());
        }
        let actual = evaluate(&out.schedule, &inst, Some(&ts.values)).context("evaluation")?;
        let eval = Evaluation {
            relative_change: (actual.total - out.cost.total) / out.cost.total.abs(),
            planned: out.cost,
            actual,
        };
        println!("against actuals: total ${:.2} ({:+.2}%)", eval.actual.total, 100.0 * eval.relative_change);
        write(&a.out_dir, "evaluation.json", &to_json(&eval)?)?;
    }
    Ok(())
}
