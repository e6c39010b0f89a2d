use super::InstanceError;
use crate::series::{SLOTS_PER_DAY, STEP_MINUTES};
use chrono::{DateTime, Datelike, Duration, FixedOffset, NaiveTime, Timelike, Weekday};
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::ops::Range;

pub const WEEK: usize = 7 * SLOTS_PER_DAY;

/// Inputs from which a [`Calendar`] is derived; this is what instance
/// documents carry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalendarSpec {
    /// Local midnight of the first day.
    pub start: DateTime<FixedOffset>,
    #[serde(default = "month")]
    pub horizon: usize,
    /// `["HH:MM", "HH:MM"]`, end exclusive.
    pub office_hours: (String, String),
    pub office_days: Vec<Weekday>,
}

fn month() -> usize {
    2880
}

#[derive(Clone, Debug, PartialEq)]
pub struct Calendar {
    pub start: DateTime<FixedOffset>,
    pub horizon: usize,
    pub interval_hours: f64,
    pub day_list: Vec<Weekday>,
    pub non_start: BTreeSet<usize>,
    /// Per calendar day, the office index range (absent on non-office days).
    pub office_day_spans: Vec<Option<Range<usize>>>,
}

fn parse_hhmm(s: &str) -> Result<NaiveTime, InstanceError> {
    NaiveTime::parse_from_str(s, "%H:%M").map_err(|_| InstanceError::InvalidHours(format!("bad time `{s}`")))
}

impl Calendar {
    pub fn from_spec(spec: &CalendarSpec) -> Result<Calendar, InstanceError> {
        let hours = (parse_hhmm(&spec.office_hours.0)?, parse_hhmm(&spec.office_hours.1)?);
        derive_calendar(spec.start, spec.horizon, hours, &spec.office_days)
    }

    pub fn timestamp(&self, t: usize) -> DateTime<FixedOffset> {
        self.start + Duration::minutes(STEP_MINUTES * t as i64)
    }

    pub fn num_days(&self) -> usize {
        self.horizon / SLOTS_PER_DAY
    }

    pub fn is_office(&self, t: usize) -> bool {
        t < self.horizon && !self.non_start.contains(&t)
    }

    /// Office span containing `t`, if any.
    pub fn span_of(&self, t: usize) -> Option<Range<usize>> {
        self.office_day_spans
            .get(t / SLOTS_PER_DAY)?
            .clone()
            .filter(|r| r.contains(&t))
    }

    pub fn longest_span(&self) -> usize {
        self.office_day_spans.iter().flatten().map(|r| r.len()).max().unwrap_or(0)
    }

    /// Length of the recurrence frame: one week, or the horizon if shorter.
    pub fn week_frame(&self) -> usize {
        WEEK.min(self.horizon)
    }
}

/// Build the day list and non-start set for `horizon` intervals from local
/// midnight `start`.
pub fn derive_calendar(
    start: DateTime<FixedOffset>,
    horizon: usize,
    office_hours: (NaiveTime, NaiveTime),
    office_days: &[Weekday],
) -> Result<Calendar, InstanceError> {
    if horizon == 0 || !horizon.is_multiple_of(SLOTS_PER_DAY) {
        return Err(InstanceError::InvalidHorizon(horizon));
    }
    if start.time() != NaiveTime::MIN {
        return Err(InstanceError::InvalidHours(format!("start {} is not local midnight", start.to_rfc3339())));
    }
    let (open, close) = office_hours;
    let slot = |t: NaiveTime| -> Result<usize, InstanceError> {
        let m = t.hour() as i64 * 60 + t.minute() as i64;
        if t.second() != 0 || m % STEP_MINUTES != 0 {
            return Err(InstanceError::InvalidHours(format!("{t} is not on the 15-minute grid")));
        }
        Ok((m / STEP_MINUTES) as usize)
    };
    let (s0, s1) = (slot(open)?, slot(close)?);
    if s0 >= s1 {
        return Err(InstanceError::InvalidHours(format!("office hours {open}-{close} are empty")));
    }
    let days = horizon / SLOTS_PER_DAY;
    let mut day_list = Vec::with_capacity(horizon);
    let mut spans = Vec::with_capacity(days);
    let mut non_start = BTreeSet::new();
    for d in 0..days {
        let wd = (start + Duration::days(d as i64)).weekday();
        day_list.extend(std::iter::repeat_n(wd, SLOTS_PER_DAY));
        let base = d * SLOTS_PER_DAY;
        let span = office_days.contains(&wd).then(|| base + s0..base + s1);
        for t in base..base + SLOTS_PER_DAY {
            if !span.as_ref().is_some_and(|r| r.contains(&t)) {
                non_start.insert(t);
            }
        }
        spans.push(span);
    }
    Ok(Calendar {
        start,
        horizon,
        interval_hours: STEP_MINUTES as f64 / 60.0,
        day_list,
        non_start,
        office_day_spans: spans,
    })
}
