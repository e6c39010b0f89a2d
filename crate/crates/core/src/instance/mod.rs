//! Scheduling problem data: calendar, activities, rooms, batteries, prices
//! and baseload.

mod calendar;

pub use calendar::{derive_calendar, Calendar, CalendarSpec, WEEK};

use crate::series::{parse_series, SeriesError};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum InstanceError {
    #[error("schema error at `{path}`: {msg}")]
    Schema { path: String, msg: String },
    #[error("validation failed ({rule}) at `{field}`")]
    Validation { rule: String, field: String },
    #[error("invalid office hours: {0}")]
    InvalidHours(String),
    #[error("horizon {0} is not a positive multiple of 96")]
    InvalidHorizon(usize),
    #[error("reading `{path}`: {msg}")]
    Io { path: String, msg: String },
    #[error("series `{path}`: {source}")]
    Series { path: String, source: SeriesError },
    #[error("series lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

fn invalid(rule: &str, field: impl Into<String>) -> InstanceError {
    InstanceError::Validation {
        rule: rule.to_string(),
        field: field.into(),
    }
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

fn unit_efficiency() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Activity {
    pub id: String,
    /// Intervals.
    pub duration: usize,
    pub load_kw_per_room: f64,
    #[serde(default = "one")]
    pub rooms_required: usize,
    #[serde(default)]
    pub room_size_min: u32,
    /// Ids of activities whose weekly occurrence must end before this one
    /// starts.
    #[serde(default)]
    pub precedence: Vec<String>,
    #[serde(default = "yes")]
    pub recurring: bool,
}

impl Activity {
    pub fn load_kw(&self) -> f64 {
        self.load_kw_per_room * self.rooms_required as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Room {
    pub id: String,
    pub size: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Battery {
    pub id: String,
    pub capacity_kwh: f64,
    /// Symmetric charge and discharge power.
    pub power_kw: f64,
    #[serde(default = "unit_efficiency")]
    pub efficiency: f64,
    pub initial_soc_kwh: f64,
    /// Decisions are held for blocks of this many intervals.
    #[serde(default = "one")]
    pub decision_block: usize,
}

impl Battery {
    pub fn num_blocks(&self, horizon: usize) -> usize {
        horizon.div_ceil(self.decision_block)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostModel {
    pub price_per_mwh: Vec<f64>,
    /// $/kW² on the monthly import peak.
    pub peak_coefficient: f64,
    #[serde(default)]
    pub net_zero_required: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Instance {
    pub calendar_spec: CalendarSpec,
    pub calendar: Calendar,
    pub activities: Vec<Activity>,
    pub rooms: Vec<Room>,
    pub batteries: Vec<Battery>,
    pub cost: CostModel,
    /// Net demand (buildings minus solar), kW; may be negative.
    pub baseload_kw: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    price_per_mwh: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    price_csv: Option<String>,
    peak_coefficient: f64,
    #[serde(default)]
    net_zero_required: bool,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct InstanceDoc {
    calendar: CalendarSpec,
    activities: Vec<Activity>,
    #[serde(default)]
    rooms: Vec<Room>,
    #[serde(default)]
    batteries: Vec<Battery>,
    cost: CostDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseload_csv: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    baseload_kw: Option<Vec<f64>>,
}

fn read_series_file(base_dir: Option<&Path>, rel: &str, horizon: usize, field: &str) -> Result<Vec<f64>, InstanceError> {
    let path = base_dir.map_or_else(|| Path::new(rel).to_path_buf(), |d| d.join(rel));
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(&path).map_err(|e| InstanceError::Io {
        path: shown.clone(),
        msg: e.to_string(),
    })?;
    let ts = parse_series(&text).map_err(|source| InstanceError::Series { path: shown, source })?;
    if let Some(i) = (0..ts.len()).find(|&i| !ts.usable(i)) {
        return Err(invalid("series values must all be present", format!("{field}[{i}]")));
    }
    if ts.len() != horizon {
        return Err(invalid("series length must equal the horizon", field));
    }
    Ok(ts.values)
}

/// Parse and validate an instance document. Relative CSV paths resolve
/// against `base_dir` when given.
pub fn load_instance(json: &str, base_dir: Option<&Path>) -> Result<Instance, InstanceError> {
    let de = &mut serde_json::Deserializer::from_str(json);
    let doc: InstanceDoc = serde_path_to_error::deserialize(de).map_err(|e| InstanceError::Schema {
        path: e.path().to_string(),
        msg: e.inner().to_string(),
    })?;
    let calendar = Calendar::from_spec(&doc.calendar)?;
    let t = calendar.horizon;
    let baseload_kw = match (doc.baseload_kw, doc.baseload_csv) {
        (Some(v), None) => v,
        (None, Some(path)) => read_series_file(base_dir, &path, t, "baseload_csv")?,
        _ => return Err(invalid("exactly one of baseload_kw and baseload_csv", "baseload_kw")),
    };
    let price_per_mwh = match (doc.cost.price_per_mwh, doc.cost.price_csv) {
        (Some(v), None) => v,
        (None, Some(path)) => read_series_file(base_dir, &path, t, "cost.price_csv")?,
        _ => return Err(invalid("exactly one of price_per_mwh and price_csv", "cost.price_per_mwh")),
    };
    let inst = Instance {
        calendar_spec: doc.calendar,
        calendar,
        activities: doc.activities,
        rooms: doc.rooms,
        batteries: doc.batteries,
        cost: CostModel {
            price_per_mwh,
            peak_coefficient: doc.cost.peak_coefficient,
            net_zero_required: doc.cost.net_zero_required,
        },
        baseload_kw,
    };
    inst.validate()?;
    Ok(inst)
}

/// Self-contained JSON with inline baseload and prices.
pub fn serialize_instance(inst: &Instance) -> String {
    let doc = InstanceDoc {
        calendar: inst.calendar_spec.clone(),
        activities: inst.activities.clone(),
        rooms: inst.rooms.clone(),
        batteries: inst.batteries.clone(),
        cost: CostDoc {
            price_per_mwh: Some(inst.cost.price_per_mwh.clone()),
            price_csv: None,
            peak_coefficient: inst.cost.peak_coefficient,
            net_zero_required: inst.cost.net_zero_required,
        },
        baseload_csv: None,
        baseload_kw: Some(inst.baseload_kw.clone()),
    };
    serde_json::to_string_pretty(&doc).expect("instance serializes")
}

fn check_unique<'a>(ids: impl Iterator<Item = &'a String>, list: &str) -> Result<(), InstanceError> {
    let mut seen = BTreeSet::new();
    for (i, id) in ids.enumerate() {
        if !seen.insert(id) {
            return Err(invalid("ids must be unique", format!("{list}[{i}].id")));
        }
    }
    Ok(())
}

impl Instance {
    pub fn horizon(&self) -> usize {
        self.calendar.horizon
    }

    pub fn activity_index(&self) -> BTreeMap<&str, usize> {
        self.activities.iter().enumerate().map(|(i, a)| (a.id.as_str(), i)).collect()
    }

    /// Number of rooms at least `size` large.
    pub fn rooms_at_least(&self, size: u32) -> usize {
        self.rooms.iter().filter(|r| r.size >= size).count()
    }

    pub fn validate(&self) -> Result<(), InstanceError> {
        let t = self.horizon();
        check_unique(self.activities.iter().map(|a| &a.id), "activities")?;
        check_unique(self.rooms.iter().map(|r| &r.id), "rooms")?;
        check_unique(self.batteries.iter().map(|b| &b.id), "batteries")?;
        let span = self.calendar.longest_span();
        let index = self.activity_index();
        for (i, a) in self.activities.iter().enumerate() {
            let f = |name: &str| format!("activities[{i}].{name}");
            if !a.recurring {
                return Err(invalid("only recurring activities are supported", f("recurring")));
            }
            if a.duration == 0 {
                return Err(invalid("duration must be >= 1", f("duration")));
            }
            if a.duration > span {
                return Err(invalid("duration must fit inside one office span", f("duration")));
            }
            if !(a.load_kw_per_room.is_finite() && a.load_kw_per_room >= 0.0) {
                return Err(invalid("load must be finite and >= 0", f("load_kw_per_room")));
            }
            if a.rooms_required == 0 {
                return Err(invalid("rooms_required must be >= 1", f("rooms_required")));
            }
            if self.rooms_at_least(a.room_size_min) < a.rooms_required {
                return Err(invalid("not enough rooms of the required size", f("rooms_required")));
            }
            for (k, p) in a.precedence.iter().enumerate() {
                match index.get(p.as_str()) {
                    None => return Err(invalid("unknown predecessor", format!("activities[{i}].precedence[{k}]"))),
                    Some(&j) if j == i => return Err(invalid("precedence must be acyclic", format!("activities[{i}].precedence[{k}]"))),
                    _ => {}
                }
            }
        }
        if let Some(i) = self.precedence_cycle() {
            return Err(invalid("precedence must be acyclic", format!("activities[{i}].precedence")));
        }
        for (i, b) in self.batteries.iter().enumerate() {
            let f = |name: &str| format!("batteries[{i}].{name}");
            if !(b.capacity_kwh.is_finite() && b.capacity_kwh > 0.0) {
                return Err(invalid("capacity must be > 0", f("capacity_kwh")));
            }
            if !(b.power_kw.is_finite() && b.power_kw > 0.0) {
                return Err(invalid("power must be > 0", f("power_kw")));
            }
            if !(b.efficiency > 0.0 && b.efficiency <= 1.0) {
                return Err(invalid("efficiency must lie in (0, 1]", f("efficiency")));
            }
            if !(b.initial_soc_kwh >= 0.0 && b.initial_soc_kwh <= b.capacity_kwh) {
                return Err(invalid("initial SOC must lie in [0, capacity]", f("initial_soc_kwh")));
            }
            if b.decision_block == 0 {
                return Err(invalid("decision_block must be >= 1", f("decision_block")));
            }
        }
        if self.cost.price_per_mwh.len() != t {
            return Err(invalid("price length must equal the horizon", "cost.price_per_mwh"));
        }
        if let Some(i) = self.cost.price_per_mwh.iter().position(|v| !v.is_finite()) {
            return Err(invalid("prices must be finite", format!("cost.price_per_mwh[{i}]")));
        }
        if !(self.cost.peak_coefficient.is_finite() && self.cost.peak_coefficient >= 0.0) {
            return Err(invalid("peak coefficient must be >= 0", "cost.peak_coefficient"));
        }
        if self.baseload_kw.len() != t {
            return Err(invalid("baseload length must equal the horizon", "baseload_kw"));
        }
        if let Some(i) = self.baseload_kw.iter().position(|v| !v.is_finite()) {
            return Err(invalid("baseload must be finite", format!("baseload_kw[{i}]")));
        }
        Ok(())
    }

    /// Some activity on a precedence cycle, if any.
    fn precedence_cycle(&self) -> Option<usize> {
        let index = self.activity_index();
        let n = self.activities.len();
        // 0 = unseen, 1 = on stack, 2 = done
        let mut state = vec![0u8; n];
        for root in 0..n {
            if state[root] != 0 {
                continue;
            }
            let mut stack = vec![(root, 0usize)];
            state[root] = 1;
            while let Some(&mut (v, ref mut k)) = stack.last_mut() {
                let preds = &self.activities[v].precedence;
                if *k < preds.len() {
                    let u = index[preds[*k].as_str()];
                    *k += 1;
                    match state[u] {
                        1 => return Some(u),
                        0 => {
                            state[u] = 1;
                            stack.push((u, 0));
                        }
                        _ => {}
                    }
                } else {
                    state[v] = 2;
                    stack.pop();
                }
            }
        }
        None
    }
}

/// Element-wise Σ buildings − Σ solar.
pub fn combine_baseload(buildings: &[Vec<f64>], solar: &[Vec<f64>]) -> Result<Vec<f64>, InstanceError> {
    let n = buildings.iter().chain(solar).map(|s| s.len()).next().unwrap_or(0);
    let mut out = vec![0.0; n];
    for (s, sign) in buildings.iter().map(|s| (s, 1.0)).chain(solar.iter().map(|s| (s, -1.0))) {
        if s.len() != n {
            return Err(InstanceError::LengthMismatch(n, s.len()));
        }
        for (o, v) in out.iter_mut().zip(s) {
            *o += sign * v;
        }
    }
    Ok(out)
}
