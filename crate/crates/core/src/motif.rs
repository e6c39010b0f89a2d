//! Refined motif: the daily window closest to its nearest neighbours,
//! averaged with them.

use crate::series::TimeSeries;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MotifError {
    #[error("windows differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("window has zero variance")]
    ZeroVariance,
    #[error("series of length {len} is too short for windows of {window}")]
    TooShort { len: usize, window: usize },
    #[error("series length {len} is not a multiple of the window {window}")]
    NotAligned { len: usize, window: usize },
    #[error("invalid motif config: {0}")]
    InvalidConfig(String),
    #[error("point {0} is missing or excluded")]
    InvalidData(usize),
    #[error("feature key `{0}` is missing on one side")]
    KeyMismatch(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DistanceMode {
    Euclidean,
    ZNormalizedEuclidean,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    DayAligned,
    Sliding,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MotifConfig {
    pub window_length: usize,
    pub neighbor_count: usize,
    pub distance: DistanceMode,
    pub candidate_alignment: Alignment,
}

impl Default for MotifConfig {
    fn default() -> Self {
        MotifConfig {
            window_length: 96,
            neighbor_count: 10,
            distance: DistanceMode::Euclidean,
            candidate_alignment: Alignment::DayAligned,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefinedMotif {
    pub profile: Vec<f64>,
    /// Window indices; window `w` starts at sample `w * stride`.
    pub seed_index: usize,
    pub member_indices: Vec<usize>,
    pub total_dissimilarity: f64,
    pub stride: usize,
}

fn z_normalize(a: &[f64]) -> Result<Vec<f64>, MotifError> {
    let n = a.len() as f64;
    let mean = a.iter().sum::<f64>() / n;
    let var = a.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    if sd < 1e-12 * mean.abs().max(1.0) {
        return Err(MotifError::ZeroVariance);
    }
    Ok(a.iter().map(|v| (v - mean) / sd).collect())
}

fn euclid(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

pub fn subpattern_distance(a: &[f64], b: &[f64], mode: DistanceMode) -> Result<f64, MotifError> {
    if a.len() != b.len() {
        return Err(MotifError::LengthMismatch(a.len(), b.len()));
    }
    match mode {
        DistanceMode::Euclidean => Ok(euclid(a, b)),
        DistanceMode::ZNormalizedEuclidean => Ok(euclid(&z_normalize(a)?, &z_normalize(b)?)),
    }
}

/// Find the window minimizing the summed distance to its `k` nearest
/// eligible windows, then average it with those neighbours.
///
/// Neighbours are ranked by (distance, index) and their distances summed in
/// that order. Sliding windows closer than half a window are never
/// neighbours of each other.
pub fn discover(ts: &TimeSeries, cfg: &MotifConfig) -> Result<RefinedMotif, MotifError> {
    if let Some(i) = (0..ts.len()).find(|&i| !ts.usable(i)) {
        return Err(MotifError::InvalidData(i));
    }
    discover_values(&ts.values, cfg)
}

pub fn discover_values(y: &[f64], cfg: &MotifConfig) -> Result<RefinedMotif, MotifError> {
    let l = cfg.window_length;
    let k = cfg.neighbor_count;
    if l < 2 {
        return Err(MotifError::InvalidConfig("window_length must be >= 2".into()));
    }
    if k < 1 {
        return Err(MotifError::InvalidConfig("neighbor_count must be >= 1".into()));
    }
    let n = y.len();
    if n < 2 * l {
        return Err(MotifError::TooShort { len: n, window: l });
    }
    let (stride, count) = match cfg.candidate_alignment {
        Alignment::DayAligned => {
            if !n.is_multiple_of(l) {
                return Err(MotifError::NotAligned { len: n, window: l });
            }
            (l, n / l)
        }
        Alignment::Sliding => (1, n - l + 1),
    };
    if k >= count {
        return Err(MotifError::InvalidConfig(format!(
            "neighbor_count {k} must be below the {count} candidate windows"
        )));
    }
    let windows: Vec<Vec<f64>> = (0..count)
        .map(|w| {
            let s = &y[w * stride..w * stride + l];
            match cfg.distance {
                DistanceMode::Euclidean => Ok(s.to_vec()),
                DistanceMode::ZNormalizedEuclidean => z_normalize(s),
            }
        })
        .collect::<Result<_, _>>()?;
    let zone = match cfg.candidate_alignment {
        Alignment::DayAligned => 1,
        Alignment::Sliding => l.div_ceil(2),
    };

    let mut dist = vec![0.0; count * count];
    for i in 0..count {
        for j in i + 1..count {
            let d = euclid(&windows[i], &windows[j]);
            dist[i * count + j] = d;
            dist[j * count + i] = d;
        }
    }

    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    let mut cand: Vec<(f64, usize)> = Vec::with_capacity(count);
    for w in 0..count {
        cand.clear();
        cand.extend((0..count).filter(|&j| j.abs_diff(w) >= zone).map(|j| (dist[w * count + j], j)));
        if cand.len() < k {
            continue;
        }
        cand.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let total: f64 = cand[..k].iter().map(|c| c.0).sum();
        if best.as_ref().is_none_or(|b| total < b.0) {
            best = Some((total, w, cand[..k].iter().map(|c| c.1).collect()));
        }
    }
    let (total, seed, members) = best.ok_or_else(|| {
        MotifError::InvalidConfig(format!("no window has {k} neighbours outside the exclusion zone"))
    })?;

    let mut profile = vec![0.0; l];
    for &w in std::iter::once(&seed).chain(&members) {
        for (p, v) in profile.iter_mut().zip(&y[w * stride..w * stride + l]) {
            *p += v;
        }
    }
    let m = (members.len() + 1) as f64;
    for p in &mut profile {
        *p /= m;
    }
    Ok(RefinedMotif {
        profile,
        seed_index: seed,
        member_indices: members,
        total_dissimilarity: total,
        stride,
    })
}

pub type FeatureRecord = BTreeMap<String, f64>;

/// Per-day difference `day − motif_day`, key by key.
pub fn relative_features(days: &[FeatureRecord], motif_day: &FeatureRecord) -> Result<Vec<FeatureRecord>, MotifError> {
    days.iter()
        .map(|day| {
            if let Some(k) = motif_day.keys().find(|k| !day.contains_key(*k)) {
                return Err(MotifError::KeyMismatch(k.clone()));
            }
            day.iter()
                .map(|(k, v)| {
                    let m = motif_day.get(k).ok_or_else(|| MotifError::KeyMismatch(k.clone()))?;
                    Ok((k.clone(), v - m))
                })
                .collect()
        })
        .collect()
}
