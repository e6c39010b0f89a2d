//! Baseline forecasters, holiday scaling and MASE.

use crate::decomp::{stl_decompose, DecompError, StlConfig};
use crate::motif::{discover, relative_features, FeatureRecord, MotifConfig, MotifError, RefinedMotif};
use crate::series::{TimeSeries, SLOTS_PER_DAY, STEP_MINUTES};
use chrono::{DateTime, Datelike, FixedOffset, NaiveDate};
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ForecastError {
    #[error("training series of length {len} is shorter than {needed}")]
    TooShort { len: usize, needed: usize },
    #[error("training point {0} is missing or excluded")]
    InvalidData(usize),
    #[error(transparent)]
    Decomp(#[from] DecompError),
    #[error(transparent)]
    Motif(#[from] MotifError),
    #[error("feature key `{0}` is missing")]
    KeyMismatch(String),
    #[error("relative features cover {have} days, {need} needed")]
    FeaturesShort { have: usize, need: usize },
    #[error("holiday span {0} falls outside the forecast")]
    SpanOutOfRange(String),
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("scaling denominator is zero")]
    ZeroDenominator,
    #[error("invalid forecast spec: {0}")]
    InvalidSpec(String),
    #[error("least-squares system is not positive definite")]
    Singular,
    #[error("line {line}: {reason}")]
    MalformedRow { line: usize, reason: String },
}

fn check_usable(ts: &TimeSeries, from: usize) -> Result<(), ForecastError> {
    match (from..ts.len()).find(|&i| !ts.usable(i)) {
        Some(i) => Err(ForecastError::InvalidData(i)),
        None => Ok(()),
    }
}

/// Repeat the last `period` training values.
pub fn seasonal_naive(train: &TimeSeries, period: usize, horizon: usize) -> Result<Vec<f64>, ForecastError> {
    let n = train.len();
    if period == 0 || n < period {
        return Err(ForecastError::TooShort { len: n, needed: period.max(1) });
    }
    check_usable(train, n - period)?;
    Ok((0..horizon).map(|t| train.values[n - period + t % period]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrendMode {
    HoldLast,
    LinearExtrapolate,
}

/// Seasonal part repeated, trend extended, remainder set to zero.
pub fn stl_forecast(train: &TimeSeries, cfg: &StlConfig, trend_mode: TrendMode, horizon: usize) -> Result<Vec<f64>, ForecastError> {
    let r = stl_decompose(train, cfg)?;
    let n = train.len();
    let np = cfg.period;
    let last = r.trend[n - 1];
    let slope = match trend_mode {
        TrendMode::HoldLast => 0.0,
        TrendMode::LinearExtrapolate => ls_slope(&r.trend[n - np..]),
    };
    Ok((0..horizon)
        .map(|t| r.seasonal[n - np + t % np] + last + slope * (t + 1) as f64)
        .collect())
}

fn ls_slope(y: &[f64]) -> f64 {
    let n = y.len() as f64;
    let xm = (n - 1.0) / 2.0;
    let ym = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (i, v) in y.iter().enumerate() {
        let dx = i as f64 - xm;
        sxy += dx * (v - ym);
        sxx += dx * dx;
    }
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

/// Linear reshaping of the motif profile by relative features.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotifCoefficients {
    pub scale: BTreeMap<String, f64>,
    pub shift: BTreeMap<String, f64>,
}

fn feature<'a>(rec: &'a FeatureRecord, key: &str) -> Result<&'a f64, ForecastError> {
    rec.get(key).ok_or_else(|| ForecastError::KeyMismatch(key.to_string()))
}

/// Day `d` is `profile·(1 + Σ scale_f·rel_f) + Σ shift_f·rel_f`, clamped at
/// zero.
pub fn motif_forecast(rm: &RefinedMotif, rel: &[FeatureRecord], coef: &MotifCoefficients, horizon_days: usize) -> Result<Vec<f64>, ForecastError> {
    if rel.len() < horizon_days {
        return Err(ForecastError::FeaturesShort {
            have: rel.len(),
            need: horizon_days,
        });
    }
    let mut out = Vec::with_capacity(horizon_days * rm.profile.len());
    for day in &rel[..horizon_days] {
        let mut scale = 1.0;
        for (k, c) in &coef.scale {
            scale += c * feature(day, k)?;
        }
        let mut shift = 0.0;
        for (k, c) in &coef.shift {
            shift += c * feature(day, k)?;
        }
        out.extend(rm.profile.iter().map(|p| (p * scale + shift).max(0.0)));
    }
    Ok(out)
}

const RIDGE: f64 = 1e-8;

/// Least-squares fit of [`MotifCoefficients`] against observed days.
/// `actual_days[d]` holds one profile-length day.
pub fn fit_motif_coefficients(profile: &[f64], rel: &[FeatureRecord], actual_days: &[Vec<f64>]) -> Result<MotifCoefficients, ForecastError> {
    if rel.len() != actual_days.len() {
        return Err(ForecastError::LengthMismatch(rel.len(), actual_days.len()));
    }
    let keys: Vec<String> = rel.first().map(|r| r.keys().cloned().collect()).unwrap_or_default();
    let f = keys.len();
    let mut coef = MotifCoefficients::default();
    if f == 0 {
        return Ok(coef);
    }
    let dim = 2 * f;
    let mut ata = DMatrix::<f64>::zeros(dim, dim);
    let mut atb = DVector::<f64>::zeros(dim);
    let mut row = vec![0.0; dim];
    for (day, actual) in rel.iter().zip(actual_days) {
        if actual.len() != profile.len() {
            return Err(ForecastError::LengthMismatch(actual.len(), profile.len()));
        }
        let r: Vec<f64> = keys.iter().map(|k| feature(day, k).copied()).collect::<Result<_, _>>()?;
        for (s, &p) in profile.iter().enumerate() {
            for i in 0..f {
                row[i] = p * r[i];
                row[f + i] = r[i];
            }
            let target = actual[s] - p;
            for a in 0..dim {
                atb[a] += row[a] * target;
                for b in 0..dim {
                    ata[(a, b)] += row[a] * row[b];
                }
            }
        }
    }
    for a in 0..dim {
        ata[(a, a)] += RIDGE;
    }
    let theta = ata.cholesky().ok_or(ForecastError::Singular)?.solve(&atb);
    for (i, k) in keys.iter().enumerate() {
        coef.scale.insert(k.clone(), theta[i]);
        coef.shift.insert(k.clone(), theta[f + i]);
    }
    Ok(coef)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HolidayAdjustment {
    pub date: NaiveDate,
    #[serde(default = "half")]
    pub midday_factor: f64,
    /// Half-open time-of-day slot range `[start, end)` within the date.
    pub midday_span: (usize, usize),
}

fn half() -> f64 {
    0.5
}

/// Scale the slots of each holiday span. `start` is the timestamp of `f[0]`.
pub fn apply_holiday_adjustment(f: &[f64], adj: &[HolidayAdjustment], start: DateTime<FixedOffset>) -> Result<Vec<f64>, ForecastError> {
    let mut out = f.to_vec();
    let origin = start.naive_local();
    for a in adj {
        let (s0, s1) = a.midday_span;
        let describe = || format!("{} [{s0}, {s1})", a.date);
        if s0 >= s1 || s1 > SLOTS_PER_DAY || !(a.midday_factor > 0.0 && a.midday_factor <= 1.0) {
            return Err(ForecastError::SpanOutOfRange(describe()));
        }
        let midnight = a.date.and_hms_opt(0, 0, 0).unwrap();
        let minutes = (midnight - origin).num_minutes();
        if minutes % STEP_MINUTES != 0 {
            return Err(ForecastError::SpanOutOfRange(describe()));
        }
        let base = minutes / STEP_MINUTES;
        let lo = base + s0 as i64;
        let hi = base + s1 as i64;
        if lo < 0 || hi > out.len() as i64 {
            return Err(ForecastError::SpanOutOfRange(describe()));
        }
        for v in &mut out[lo as usize..hi as usize] {
            *v *= a.midday_factor;
        }
    }
    Ok(out)
}

/// Mean absolute error scaled by the in-sample lag-`m` naive error.
/// Training pairs with an unusable end are skipped.
pub fn mase(pred: &[f64], actual: &[f64], train: &TimeSeries, m: usize) -> Result<f64, ForecastError> {
    if pred.len() != actual.len() {
        return Err(ForecastError::LengthMismatch(pred.len(), actual.len()));
    }
    if m == 0 || train.len() <= m {
        return Err(ForecastError::TooShort {
            len: train.len(),
            needed: m + 1,
        });
    }
    let mut denom = 0.0;
    let mut count = 0usize;
    for t in m..train.len() {
        if train.usable(t) && train.usable(t - m) {
            denom += (train.values[t] - train.values[t - m]).abs();
            count += 1;
        }
    }
    if count == 0 || denom == 0.0 {
        return Err(ForecastError::ZeroDenominator);
    }
    let denom = denom / count as f64;
    if pred.is_empty() {
        return Ok(0.0);
    }
    let num = pred.iter().zip(actual).map(|(p, a)| (p - a).abs()).sum::<f64>() / pred.len() as f64;
    Ok(num / denom)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DayType {
    Weekday,
    Weekend,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Climate {
    Summer,
    Winter,
}

/// One row of an exogenous frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExogenousRecord {
    pub timestamp: DateTime<FixedOffset>,
    pub surface_radiation: f64,
    pub cloud_cover: f64,
    pub temperature: f64,
    pub monthly_cycle: f64,
    pub day_type: DayType,
    pub climate_flag: Climate,
}

pub const EXOGENOUS_HEADER: [&str; 7] = [
    "timestamp",
    "surface_radiation",
    "cloud_cover",
    "temperature",
    "monthly_cycle",
    "day_type",
    "climate_flag",
];

/// Parse an exogenous CSV; the header must equal [`EXOGENOUS_HEADER`].
pub fn parse_exogenous(text: &str) -> Result<Vec<ExogenousRecord>, ForecastError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
    let header = rdr.headers().map_err(|e| ForecastError::MalformedRow {
        line: 1,
        reason: e.to_string(),
    })?;
    if header.iter().ne(EXOGENOUS_HEADER) {
        return Err(ForecastError::MalformedRow {
            line: 1,
            reason: format!("header must be `{}`", EXOGENOUS_HEADER.join(",")),
        });
    }
    rdr.deserialize()
        .enumerate()
        .map(|(k, r)| {
            let rec: ExogenousRecord = r.map_err(|e| ForecastError::MalformedRow {
                line: k + 2,
                reason: e.to_string(),
            })?;
            if !(0.0..1.0).contains(&rec.monthly_cycle) {
                return Err(ForecastError::MalformedRow {
                    line: k + 2,
                    reason: "monthly_cycle must lie in [0, 1)".into(),
                });
            }
            Ok(rec)
        })
        .collect()
}

/// Position of a date within its month, in `[0, 1)`.
pub fn monthly_cycle(date: NaiveDate) -> f64 {
    let first = date.with_day(1).unwrap();
    let next = first.checked_add_months(chrono::Months::new(1)).unwrap();
    let len = (next - first).num_days() as f64;
    (date.day0() as f64) / len
}

pub type DailyFeatures = BTreeMap<NaiveDate, FeatureRecord>;

/// Average each numeric field per calendar day. Categorical fields become
/// 0/1 indicators (`weekend`, `summer`).
pub fn daily_features(frame: &[ExogenousRecord]) -> DailyFeatures {
    let mut acc: BTreeMap<NaiveDate, (FeatureRecord, usize)> = BTreeMap::new();
    for r in frame {
        let e = acc.entry(r.timestamp.date_naive()).or_default();
        let fields = [
            ("surface_radiation", r.surface_radiation),
            ("cloud_cover", r.cloud_cover),
            ("temperature", r.temperature),
            ("monthly_cycle", r.monthly_cycle),
            ("weekend", (r.day_type == DayType::Weekend) as u8 as f64),
            ("summer", (r.climate_flag == Climate::Summer) as u8 as f64),
        ];
        for (k, v) in fields {
            *e.0.entry(k.to_string()).or_insert(0.0) += v;
        }
        e.1 += 1;
    }
    acc.into_iter()
        .map(|(d, (mut rec, n))| {
            for v in rec.values_mut() {
                *v /= n as f64;
            }
            (d, rec)
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ForecastModel {
    SeasonalNaive {
        period: usize,
    },
    StlComponent {
        #[serde(default)]
        stl: StlConfig,
        trend_mode: TrendMode,
    },
    MotifRegression {
        #[serde(default)]
        motif: MotifConfig,
        /// Fitted by least squares on the training days when absent.
        #[serde(default)]
        coefficients: Option<MotifCoefficients>,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForecastSpec {
    #[serde(flatten)]
    pub model: ForecastModel,
    pub horizon: usize,
    #[serde(default)]
    pub adjustments: Vec<HolidayAdjustment>,
}

impl ForecastSpec {
    pub fn validate(&self) -> Result<(), ForecastError> {
        if self.horizon == 0 {
            return Err(ForecastError::InvalidSpec("horizon must be > 0".into()));
        }
        if let ForecastModel::MotifRegression { motif, .. } = &self.model {
            if !self.horizon.is_multiple_of(motif.window_length) {
                return Err(ForecastError::InvalidSpec("motif horizon must be whole windows".into()));
            }
        }
        Ok(())
    }
}

/// Run a spec end to end. Motif models need per-day features covering the
/// training days and the forecast days.
pub fn run_spec(spec: &ForecastSpec, train: &TimeSeries, daily: Option<&DailyFeatures>) -> Result<Vec<f64>, ForecastError> {
    spec.validate()?;
    let start = train.timestamp(train.len());
    let raw = match &spec.model {
        ForecastModel::SeasonalNaive { period } => seasonal_naive(train, *period, spec.horizon)?,
        ForecastModel::StlComponent { stl, trend_mode } => stl_forecast(train, stl, *trend_mode, spec.horizon)?,
        ForecastModel::MotifRegression { motif, coefficients } => {
            let l = motif.window_length;
            let days_in = train.len() / l;
            let train = train.slice(train.len() - days_in * l, train.len());
            let rm = discover(&train, motif)?;
            let daily = daily.ok_or_else(|| ForecastError::InvalidSpec("motif model needs exogenous features".into()))?;
            let lookup = |t: DateTime<FixedOffset>| {
                daily
                    .get(&t.date_naive())
                    .cloned()
                    .ok_or_else(|| ForecastError::InvalidSpec(format!("no features for {}", t.date_naive())))
            };
            let motif_day = lookup(train.timestamp(rm.seed_index * rm.stride))?;
            let horizon_days = spec.horizon / l;
            let future: Vec<FeatureRecord> = (0..horizon_days)
                .map(|d| lookup(start + chrono::Duration::minutes(STEP_MINUTES * (d * l) as i64)))
                .collect::<Result<_, _>>()?;
            let rel = relative_features(&future, &motif_day)?;
            let coef = match coefficients {
                Some(c) => c.clone(),
                None => {
                    let past: Vec<FeatureRecord> = (0..days_in)
                        .map(|d| lookup(train.timestamp(d * l)))
                        .collect::<Result<_, _>>()?;
                    let past_rel = relative_features(&past, &motif_day)?;
                    let actual: Vec<Vec<f64>> = (0..days_in).map(|d| train.values[d * l..(d + 1) * l].to_vec()).collect();
                    fit_motif_coefficients(&rm.profile, &past_rel, &actual)?
                }
            };
            motif_forecast(&rm, &rel, &coef, horizon_days)?
        }
    };
    apply_holiday_adjustment(&raw, &spec.adjustments, start)
}
