//! STL: seasonal-trend decomposition by loess.
//!
//! A direct port of the classic inner/outer loop with degree-1 smoothers
//! everywhere. Indices inside the smoothers are 1-based to keep the window
//! arithmetic identical to the reference routine.

use crate::series::TimeSeries;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DecompError {
    #[error("series of length {len} is shorter than two periods ({needed})")]
    TooShort { len: usize, needed: usize },
    #[error("invalid STL config: {0}")]
    InvalidConfig(String),
    #[error("point {0} is missing or excluded")]
    InvalidData(usize),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StlConfig {
    pub period: usize,
    /// Seasonal smoother span in cycles.
    pub seasonal_smoother_span: usize,
    /// `None` derives the usual default from period and seasonal span.
    pub trend_smoother_span: Option<usize>,
    /// `None` uses the smallest odd integer >= period.
    pub low_pass_span: Option<usize>,
    pub inner_iterations: usize,
    pub outer_iterations: usize,
}

impl Default for StlConfig {
    fn default() -> Self {
        StlConfig {
            period: 672,
            seasonal_smoother_span: 7,
            trend_smoother_span: None,
            low_pass_span: None,
            inner_iterations: 2,
            outer_iterations: 0,
        }
    }
}

fn next_odd(x: usize) -> usize {
    if x.is_multiple_of(2) {
        x + 1
    } else {
        x
    }
}

impl StlConfig {
    pub fn with_period(period: usize) -> StlConfig {
        StlConfig {
            period,
            ..StlConfig::default()
        }
    }

    /// Smallest odd integer >= 1.5·period / (1 − 1.5/ns).
    pub fn trend_span(&self) -> usize {
        self.trend_smoother_span.unwrap_or_else(|| {
            let ns = self.seasonal_smoother_span as f64;
            let x = 1.5 * self.period as f64 / (1.0 - 1.5 / ns);
            next_odd((x - 1e-9).ceil() as usize)
        })
    }

    pub fn low_pass(&self) -> usize {
        self.low_pass_span.unwrap_or_else(|| next_odd(self.period))
    }

    pub fn validate(&self) -> Result<(), DecompError> {
        let bad = |m: String| Err(DecompError::InvalidConfig(m));
        if self.period < 2 {
            return bad("period must be >= 2".into());
        }
        for (name, s) in [
            ("seasonal_smoother_span", self.seasonal_smoother_span),
            ("trend_smoother_span", self.trend_span()),
            ("low_pass_span", self.low_pass()),
        ] {
            if s < 3 || s % 2 == 0 {
                return bad(format!("{name} must be odd and >= 3, got {s}"));
            }
        }
        if self.inner_iterations == 0 {
            return bad("inner_iterations must be >= 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StlResult {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

pub fn reconstruct(r: &StlResult) -> Vec<f64> {
    r.trend
        .iter()
        .zip(&r.seasonal)
        .zip(&r.remainder)
        .map(|((t, s), e)| t + s + e)
        .collect()
}

pub fn stl_decompose(ts: &TimeSeries, cfg: &StlConfig) -> Result<StlResult, DecompError> {
    if let Some(i) = (0..ts.len()).find(|&i| !ts.usable(i)) {
        return Err(DecompError::InvalidData(i));
    }
    stl_values(&ts.values, cfg)
}

/// Decompose a plain slice.
pub fn stl_values(y: &[f64], cfg: &StlConfig) -> Result<StlResult, DecompError> {
    cfg.validate()?;
    let n = y.len();
    let np = cfg.period;
    if n < 2 * np {
        return Err(DecompError::TooShort { len: n, needed: 2 * np });
    }
    if let Some(i) = y.iter().position(|v| !v.is_finite()) {
        return Err(DecompError::InvalidData(i));
    }
    let ns = cfg.seasonal_smoother_span;
    let nt = cfg.trend_span();
    let nl = cfg.low_pass();
    let p = Params {
        np,
        ns,
        nt,
        nl,
        nsjump: ns.div_ceil(10),
        ntjump: nt.div_ceil(10),
        nljump: nl.div_ceil(10),
    };

    let mut trend = vec![0.0; n];
    let mut season = vec![0.0; n];
    let mut rw = vec![1.0; n];
    let mut userw = false;
    let mut k = 0;
    loop {
        inner_loop(y, &p, cfg.inner_iterations, userw, &rw, &mut season, &mut trend);
        k += 1;
        if k > cfg.outer_iterations {
            break;
        }
        let fit: Vec<f64> = trend.iter().zip(&season).map(|(t, s)| t + s).collect();
        robustness_weights(y, &fit, &mut rw);
        userw = true;
    }
    let remainder = (0..n).map(|i| y[i] - trend[i] - season[i]).collect();
    Ok(StlResult {
        trend,
        seasonal: season,
        remainder,
    })
}

struct Params {
    np: usize,
    ns: usize,
    nt: usize,
    nl: usize,
    nsjump: usize,
    ntjump: usize,
    nljump: usize,
}

fn inner_loop(y: &[f64], p: &Params, ni: usize, userw: bool, rw: &[f64], season: &mut [f64], trend: &mut [f64]) {
    let n = y.len();
    let np = p.np;
    let mut w1 = vec![0.0; n + 2 * np];
    let mut cycle = vec![0.0; n + 2 * np];
    let mut w3 = vec![0.0; n + 2 * np];
    let mut lowpass = vec![0.0; n];
    for _ in 0..ni {
        for i in 0..n {
            w1[i] = y[i] - trend[i];
        }
        smooth_cycles(&w1[..n], p, userw, rw, &mut cycle);
        low_pass_filter(&cycle, np, &mut w3, &mut w1);
        loess(&w3[..n], p.nl, p.nljump, None, &mut lowpass);
        for i in 0..n {
            season[i] = cycle[np + i] - lowpass[i];
        }
        for i in 0..n {
            w1[i] = y[i] - season[i];
        }
        loess(&w1[..n], p.nt, p.ntjump, userw.then_some(rw), trend);
    }
}

/// Loess each cycle-subseries and extend it by one cycle on both ends.
/// `out` has length `n + 2·np`.
fn smooth_cycles(y: &[f64], p: &Params, userw: bool, rw: &[f64], out: &mut [f64]) {
    let n = y.len();
    let np = p.np;
    let kmax = n.div_ceil(np);
    let mut sub = vec![0.0; kmax];
    let mut subw = vec![0.0; kmax];
    let mut fit = vec![0.0; kmax + 2];
    let mut work = vec![0.0; kmax];
    for j in 0..np {
        let k = (n - j - 1) / np + 1;
        for i in 0..k {
            sub[i] = y[j + i * np];
            if userw {
                subw[i] = rw[j + i * np];
            }
        }
        let weights = userw.then_some(&subw[..k]);
        loess(&sub[..k], p.ns, p.nsjump, weights, &mut fit[1..=k]);
        let nright = p.ns.min(k);
        fit[0] = estimate(&sub[..k], p.ns, 0.0, 1, nright, &mut work, weights).unwrap_or(fit[1]);
        let nleft = (k + 1).saturating_sub(p.ns).max(1);
        fit[k + 1] = estimate(&sub[..k], p.ns, (k + 1) as f64, nleft, k, &mut work, weights).unwrap_or(fit[k]);
        for m in 0..k + 2 {
            out[m * np + j] = fit[m];
        }
    }
}

/// Moving averages of lengths np, np, 3. Input length `n + 2·np`, output
/// length `n` written to `out`.
fn low_pass_filter(x: &[f64], np: usize, out: &mut [f64], work: &mut [f64]) {
    let len = x.len();
    moving_average(x, np, out);
    moving_average(&out[..len - np + 1], np, work);
    moving_average(&work[..len - 2 * np + 2], 3, out);
}

fn moving_average(x: &[f64], len: usize, ave: &mut [f64]) {
    let newn = x.len() - len + 1;
    let flen = len as f64;
    let mut v: f64 = x[..len].iter().sum();
    ave[0] = v / flen;
    for j in 1..newn {
        v = v - x[j - 1] + x[len + j - 1];
        ave[j] = v / flen;
    }
}

/// Degree-1 loess of `y` at every index, fitted every `njump` points and
/// linearly interpolated in between.
fn loess(y: &[f64], len: usize, njump: usize, rw: Option<&[f64]>, ys: &mut [f64]) {
    let n = y.len();
    if n < 2 {
        ys[0] = y[0];
        return;
    }
    let mut work = vec![0.0; n];
    let newnj = njump.min(n - 1);
    // ys and y are 1-based inside this routine
    let at = |ys: &mut [f64], i: usize, v: f64| ys[i - 1] = v;
    let mut nleft = 1;
    let mut nright = n;
    if len >= n {
        let mut i = 1;
        while i <= n {
            let v = estimate(y, len, i as f64, 1, n, &mut work, rw).unwrap_or(y[i - 1]);
            at(ys, i, v);
            i += newnj;
        }
    } else if newnj == 1 {
        let nsh = len.div_ceil(2);
        nleft = 1;
        nright = len;
        for i in 1..=n {
            if i > nsh && nright != n {
                nleft += 1;
                nright += 1;
            }
            let v = estimate(y, len, i as f64, nleft, nright, &mut work, rw).unwrap_or(y[i - 1]);
            at(ys, i, v);
        }
    } else {
        let nsh = len.div_ceil(2);
        let mut i = 1;
        while i <= n {
            if i < nsh {
                nleft = 1;
                nright = len;
            } else if i > n - nsh {
                nleft = n - len + 1;
                nright = n;
            } else {
                nleft = i - nsh + 1;
                nright = len + i - nsh;
            }
            let v = estimate(y, len, i as f64, nleft, nright, &mut work, rw).unwrap_or(y[i - 1]);
            at(ys, i, v);
            i += newnj;
        }
    }
    if newnj != 1 {
        let mut i = 1;
        while i + newnj <= n {
            let delta = (ys[i + newnj - 1] - ys[i - 1]) / newnj as f64;
            for j in i + 1..i + newnj {
                ys[j - 1] = ys[i - 1] + delta * (j - i) as f64;
            }
            i += newnj;
        }
        let k = ((n - 1) / newnj) * newnj + 1;
        if k != n {
            let v = estimate(y, len, n as f64, nleft, nright, &mut work, rw).unwrap_or(y[n - 1]);
            at(ys, n, v);
            if k != n - 1 {
                let delta = (ys[n - 1] - ys[k - 1]) / (n - k) as f64;
                for j in k + 1..n {
                    ys[j - 1] = ys[k - 1] + delta * (j - k) as f64;
                }
            }
        }
    }
}

/// Local linear fit at `xs` over points `nleft..=nright` (1-based) with
/// tricube weights. `None` when every weight vanishes.
fn estimate(y: &[f64], len: usize, xs: f64, nleft: usize, nright: usize, w: &mut [f64], rw: Option<&[f64]>) -> Option<f64> {
    let n = y.len();
    let range = n as f64 - 1.0;
    let mut h = (xs - nleft as f64).max(nright as f64 - xs);
    if len > n {
        h += ((len - n) / 2) as f64;
    }
    let h9 = 0.999 * h;
    let h1 = 0.001 * h;
    let mut a = 0.0;
    for j in nleft..=nright {
        let r = (j as f64 - xs).abs();
        let mut wj = 0.0;
        if r <= h9 {
            wj = if r <= h1 { 1.0 } else { (1.0 - (r / h).powi(3)).powi(3) };
            if let Some(rw) = rw {
                wj *= rw[j - 1];
            }
            a += wj;
        }
        w[j - 1] = wj;
    }
    if a <= 0.0 {
        return None;
    }
    for j in nleft..=nright {
        w[j - 1] /= a;
    }
    if h > 0.0 {
        let mut a = 0.0;
        for j in nleft..=nright {
            a += w[j - 1] * j as f64;
        }
        let mut b = xs - a;
        let mut c = 0.0;
        for j in nleft..=nright {
            c += w[j - 1] * (j as f64 - a) * (j as f64 - a);
        }
        if c.sqrt() > 0.001 * range {
            b /= c;
            for j in nleft..=nright {
                w[j - 1] *= b * (j as f64 - a) + 1.0;
            }
        }
    }
    let mut ys = 0.0;
    for j in nleft..=nright {
        ys += w[j - 1] * y[j - 1];
    }
    Some(ys)
}

/// Bisquare weights on residuals scaled by six times their median.
fn robustness_weights(y: &[f64], fit: &[f64], rw: &mut [f64]) {
    let n = y.len();
    let r: Vec<f64> = y.iter().zip(fit).map(|(a, b)| (a - b).abs()).collect();
    let mut sorted = r.clone();
    sorted.sort_by(f64::total_cmp);
    let mid1 = (n - 1) / 2;
    let mid2 = n / 2;
    let cmad = 3.0 * (sorted[mid1] + sorted[mid2]);
    let c9 = 0.999 * cmad;
    let c1 = 0.001 * cmad;
    for i in 0..n {
        rw[i] = if r[i] <= c1 {
            1.0
        } else if r[i] <= c9 {
            (1.0 - (r[i] / cmad).powi(2)).powi(2)
        } else {
            0.0
        };
    }
}
