//! 15-minute series: parsing, validity bookkeeping and gap repair.

use chrono::{DateTime, Duration, FixedOffset, Months, TimeZone, Timelike};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const STEP_MINUTES: i64 = 15;
pub const SLOTS_PER_DAY: usize = 96;

#[derive(Debug, Error, PartialEq)]
pub enum SeriesError {
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
    #[error("line {line}: spacing of {minutes} min, expected 15")]
    IrregularSpacing { line: usize, minutes: i64 },
    #[error("series has no rows")]
    Empty,
    #[error("time-of-day slot {0} has no valid values")]
    EmptySlot(usize),
    #[error("invalid repair config: {0}")]
    InvalidConfig(String),
    #[error("no valid source value for {0}")]
    RangeUncovered(String),
    #[error("range {0} is outside the series")]
    RangeOutOfSeries(String),
    #[error("donor series required for donor_splice")]
    MissingDonor,
    #[error("donor series given for a directive that does not use one")]
    UnexpectedDonor,
    #[error("values and validity differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
}

/// Regular 15-minute series.
///
/// A point is usable when `valid[i] && !excluded[i]`. Excluded points are
/// long gaps dropped by [`repair`]; they keep their slot so indices stay
/// aligned with the calendar.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSeries {
    pub start: DateTime<FixedOffset>,
    pub values: Vec<f64>,
    pub valid: Vec<bool>,
    pub excluded: Vec<bool>,
}

impl TimeSeries {
    /// All finite values are valid.
    pub fn new(start: DateTime<FixedOffset>, values: Vec<f64>) -> TimeSeries {
        let valid = values.iter().map(|v| v.is_finite()).collect();
        let excluded = vec![false; values.len()];
        TimeSeries {
            start,
            values,
            valid,
            excluded,
        }
    }

    /// Caller-supplied validity; non-finite values are forced invalid.
    pub fn with_validity(start: DateTime<FixedOffset>, values: Vec<f64>, valid: Vec<bool>) -> Result<TimeSeries, SeriesError> {
        if values.len() != valid.len() {
            return Err(SeriesError::LengthMismatch(values.len(), valid.len()));
        }
        let valid = valid.iter().zip(&values).map(|(&ok, v)| ok && v.is_finite()).collect();
        let excluded = vec![false; values.len()];
        Ok(TimeSeries {
            start,
            values,
            valid,
            excluded,
        })
    }

    pub fn step_minutes(&self) -> i64 {
        STEP_MINUTES
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn usable(&self, i: usize) -> bool {
        self.valid[i] && !self.excluded[i]
    }

    pub fn is_fully_valid(&self) -> bool {
        (0..self.len()).all(|i| self.usable(i))
    }

    pub fn timestamp(&self, i: usize) -> DateTime<FixedOffset> {
        self.start + Duration::minutes(STEP_MINUTES * i as i64)
    }

    /// Index of an on-grid timestamp; `None` when off-grid or out of range.
    pub fn index_at(&self, t: DateTime<FixedOffset>) -> Option<usize> {
        let secs = (t - self.start).num_seconds();
        if secs < 0 || secs % (STEP_MINUTES * 60) != 0 {
            return None;
        }
        let i = (secs / (STEP_MINUTES * 60)) as usize;
        (i < self.len()).then_some(i)
    }

    /// Time-of-day slot in `0..96` of index `i`, in the series' own offset.
    pub fn slot(&self, i: usize) -> usize {
        let first = (self.start.hour() * 60 + self.start.minute()) as usize / STEP_MINUTES as usize;
        (first + i) % SLOTS_PER_DAY
    }

    pub fn mark_invalid(&mut self, i: usize) {
        self.valid[i] = false;
    }

    /// Sub-series `[from, to)`.
    pub fn slice(&self, from: usize, to: usize) -> TimeSeries {
        TimeSeries {
            start: self.timestamp(from),
            values: self.values[from..to].to_vec(),
            valid: self.valid[from..to].to_vec(),
            excluded: self.excluded[from..to].to_vec(),
        }
    }

    /// Longest suffix with every point usable.
    pub fn trailing_valid(&self) -> TimeSeries {
        let from = (0..self.len()).rev().find(|&i| !self.usable(i)).map_or(0, |i| i + 1);
        self.slice(from, self.len())
    }
}

/// Read a `timestamp,value` CSV with RFC-3339 timestamps.
pub fn parse_series(text: &str) -> Result<TimeSeries, SeriesError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = rdr
        .headers()
        .map_err(|e| SeriesError::MalformedRow {
            line: 1,
            reason: e.to_string(),
        })?
        .clone();
    if header.len() != 2 || &header[0] != "timestamp" || &header[1] != "value" {
        return Err(SeriesError::MalformedRow {
            line: 1,
            reason: "header must be `timestamp,value`".into(),
        });
    }
    let mut start = None;
    let mut prev: Option<DateTime<FixedOffset>> = None;
    let mut values = Vec::new();
    let mut valid = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let line = k + 2;
        let rec = rec.map_err(|e| SeriesError::MalformedRow {
            line,
            reason: e.to_string(),
        })?;
        if rec.len() != 2 {
            return Err(SeriesError::MalformedRow {
                line,
                reason: format!("expected 2 fields, found {}", rec.len()),
            });
        }
        let t = DateTime::parse_from_rfc3339(&rec[0]).map_err(|e| SeriesError::MalformedRow {
            line,
            reason: format!("bad timestamp `{}`: {e}", &rec[0]),
        })?;
        if let Some(p) = prev {
            let minutes = (t - p).num_seconds() as f64 / 60.0;
            if minutes != STEP_MINUTES as f64 {
                return Err(SeriesError::IrregularSpacing {
                    line,
                    minutes: minutes.round() as i64,
                });
            }
        } else {
            start = Some(t);
        }
        prev = Some(t);
        let field = &rec[1];
        if field.is_empty() {
            values.push(f64::NAN);
            valid.push(false);
        } else {
            let v: f64 = field.parse().map_err(|_| SeriesError::MalformedRow {
                line,
                reason: format!("non-numeric value `{field}`"),
            })?;
            values.push(v);
            valid.push(v.is_finite());
        }
    }
    let start = start.ok_or(SeriesError::Empty)?;
    TimeSeries::with_validity(start, values, valid)
}

/// Write `timestamp,value`; unusable points get an empty value field.
pub fn write_series(ts: &TimeSeries) -> String {
    let mut out = String::from("timestamp,value\n");
    for i in 0..ts.len() {
        out.push_str(&ts.timestamp(i).to_rfc3339());
        out.push(',');
        if ts.usable(i) {
            out.push_str(&format!("{:?}", ts.values[i]));
        }
        out.push('\n');
    }
    out
}

/// Mean of usable values per time-of-day slot.
pub fn annual_average_profile(ts: &TimeSeries) -> Result<Vec<f64>, SeriesError> {
    let mut sum = vec![0.0; SLOTS_PER_DAY];
    let mut count = vec![0usize; SLOTS_PER_DAY];
    for i in 0..ts.len() {
        if ts.usable(i) {
            let s = ts.slot(i);
            sum[s] += ts.values[i];
            count[s] += 1;
        }
    }
    (0..SLOTS_PER_DAY)
        .map(|s| {
            if count[s] == 0 {
                Err(SeriesError::EmptySlot(s))
            } else {
                Ok(sum[s] / count[s] as f64)
            }
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RepairConfig {
    pub long_gap_threshold: usize,
    pub window: usize,
    pub invalid_majority_fraction: f64,
}

impl Default for RepairConfig {
    fn default() -> Self {
        RepairConfig {
            long_gap_threshold: 96,
            window: 96,
            invalid_majority_fraction: 0.5,
        }
    }
}

impl RepairConfig {
    pub fn validate(&self) -> Result<(), SeriesError> {
        if self.long_gap_threshold < 1 {
            return Err(SeriesError::InvalidConfig("long_gap_threshold must be >= 1".into()));
        }
        if self.window < 2 || !self.window.is_multiple_of(2) {
            return Err(SeriesError::InvalidConfig("window must be even and >= 2".into()));
        }
        let f = self.invalid_majority_fraction;
        if !(f > 0.0 && f <= 1.0) {
            return Err(SeriesError::InvalidConfig("invalid_majority_fraction must be in (0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RepairReport {
    /// `(start index, length)` of each excluded run.
    pub removed_spans: Vec<(usize, usize)>,
    pub window_imputed: usize,
    pub annual_imputed: usize,
    pub directive_applied: Vec<String>,
}

/// Maximal runs `(start, len)` of points that are invalid but not excluded.
fn invalid_runs(ts: &TimeSeries) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut i = 0;
    while i < ts.len() {
        if ts.valid[i] || ts.excluded[i] {
            i += 1;
            continue;
        }
        let s = i;
        while i < ts.len() && !ts.valid[i] && !ts.excluded[i] {
            i += 1;
        }
        runs.push((s, i - s));
    }
    runs
}

/// Apply the three gap rules in order: exclude long runs, then fill each
/// remaining gap point from its centered window when enough of the window
/// is valid, else from the per-slot average.
pub fn repair(ts: &TimeSeries, cfg: &RepairConfig) -> Result<(TimeSeries, RepairReport), SeriesError> {
    cfg.validate()?;
    let mut out = ts.clone();
    let mut report = RepairReport::default();
    let mut short = Vec::new();
    for (s, len) in invalid_runs(ts) {
        if len > cfg.long_gap_threshold {
            for i in s..s + len {
                out.excluded[i] = true;
                out.values[i] = f64::NAN;
            }
            report.removed_spans.push((s, len));
        } else {
            short.extend(s..s + len);
        }
    }
    if short.is_empty() {
        return Ok((out, report));
    }

    // prefix counts over usable input points
    let n = ts.len();
    let mut cnt = vec![0usize; n + 1];
    let mut sum = vec![0.0; n + 1];
    for i in 0..n {
        let u = ts.usable(i);
        cnt[i + 1] = cnt[i] + u as usize;
        sum[i + 1] = sum[i] + if u { ts.values[i] } else { 0.0 };
    }
    let half = cfg.window / 2;
    let mut annual: Option<Vec<f64>> = None;
    for i in short {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(n);
        let size = hi - lo;
        let good = cnt[hi] - cnt[lo];
        if good > 0 && good as f64 >= cfg.invalid_majority_fraction * size as f64 {
            out.values[i] = (sum[hi] - sum[lo]) / good as f64;
            report.window_imputed += 1;
        } else {
            if annual.is_none() {
                annual = Some(annual_average_profile(ts)?);
            }
            out.values[i] = annual.as_ref().unwrap()[ts.slot(i)];
            report.annual_imputed += 1;
        }
        out.valid[i] = true;
    }
    Ok((out, report))
}

/// Half-open timestamp interval.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimeRange {
    pub start: DateTime<FixedOffset>,
    pub end: DateTime<FixedOffset>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DirectiveKind {
    ConstantFill { level: f64 },
    /// Copy from the same wall-clock slot `source_year_offset` years away
    /// (negative is earlier).
    YearShiftFill { source_year_offset: i32 },
    /// Take donor values at identical timestamps before `cutoff`.
    DonorSplice { donor: String, cutoff: DateTime<FixedOffset> },
}

impl DirectiveKind {
    pub fn name(&self) -> &'static str {
        match self {
            DirectiveKind::ConstantFill { .. } => "constant_fill",
            DirectiveKind::YearShiftFill { .. } => "year_shift_fill",
            DirectiveKind::DonorSplice { .. } => "donor_splice",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepairDirective {
    pub kind: DirectiveKind,
    pub range: TimeRange,
}

fn range_indices(ts: &TimeSeries, r: &TimeRange) -> Result<std::ops::Range<usize>, SeriesError> {
    let describe = || format!("{} .. {}", r.start.to_rfc3339(), r.end.to_rfc3339());
    let a = ts.index_at(r.start).ok_or_else(|| SeriesError::RangeOutOfSeries(describe()))?;
    let b = if r.end == ts.timestamp(ts.len()) {
        ts.len()
    } else {
        ts.index_at(r.end).ok_or_else(|| SeriesError::RangeOutOfSeries(describe()))?
    };
    if b < a {
        return Err(SeriesError::RangeOutOfSeries(describe()));
    }
    Ok(a..b)
}

fn shift_years(t: DateTime<FixedOffset>, years: i32) -> Option<DateTime<FixedOffset>> {
    let months = Months::new(12 * years.unsigned_abs());
    let local = t.naive_local();
    let shifted = if years >= 0 {
        local.checked_add_months(months)?
    } else {
        local.checked_sub_months(months)?
    };
    t.offset().from_local_datetime(&shifted).single()
}

/// Overwrite a range of `ts` according to a named directive. Written points
/// become valid and are no longer excluded.
pub fn apply_directive(ts: &TimeSeries, d: &RepairDirective, donor: Option<&TimeSeries>) -> Result<TimeSeries, SeriesError> {
    let range = range_indices(ts, &d.range)?;
    let mut out = ts.clone();
    match (&d.kind, donor) {
        (DirectiveKind::ConstantFill { level }, None) => {
            for i in range {
                out.values[i] = *level;
                out.valid[i] = true;
                out.excluded[i] = false;
            }
        }
        (DirectiveKind::YearShiftFill { source_year_offset }, None) => {
            for i in range {
                let t = ts.timestamp(i);
                let src = shift_years(t, *source_year_offset)
                    .and_then(|s| ts.index_at(s))
                    .filter(|&j| ts.usable(j))
                    .ok_or_else(|| SeriesError::RangeUncovered(t.to_rfc3339()))?;
                out.values[i] = ts.values[src];
                out.valid[i] = true;
                out.excluded[i] = false;
            }
        }
        (DirectiveKind::DonorSplice { cutoff, .. }, Some(donor)) => {
            for i in range {
                let t = ts.timestamp(i);
                if t >= *cutoff {
                    break;
                }
                let j = donor
                    .index_at(t)
                    .filter(|&j| donor.usable(j))
                    .ok_or_else(|| SeriesError::RangeUncovered(t.to_rfc3339()))?;
                out.values[i] = donor.values[j];
                out.valid[i] = true;
                out.excluded[i] = false;
            }
        }
        (DirectiveKind::DonorSplice { .. }, None) => return Err(SeriesError::MissingDonor),
        (_, Some(_)) => return Err(SeriesError::UnexpectedDonor),
    }
    Ok(out)
}
