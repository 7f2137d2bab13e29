//! How market error falls as trading progresses: per-market error paths,
//! cross-market mean error curves, LOESS smoothing, reduction milestones and
//! the late-trade smoothing check.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, MILLIS_PER_HOUR};
use crate::stats::{self, StatsError, TestResult};

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("market `{0}` has no trades")]
    EmptyMarket(String),
    #[error("grid must be strictly increasing")]
    GridNotIncreasing,
    #[error("LOESS needs at least {needed} points, got {got}")]
    InsufficientPoints { needed: usize, got: usize },
    #[error("invalid LOESS configuration: {0}")]
    InvalidConfig(String),
    #[error("curve shows no error reduction")]
    NoReduction,
    #[error("fraction must lie in (0, 1], got {0}")]
    InvalidFraction(f64),
    #[error("cutoff of {0} hours is beyond every market's duration")]
    CutoffBeyondMarkets(f64),
    #[error("{0}")]
    Dataset(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

impl From<DatasetError> for DynamicsError {
    fn from(e: DatasetError) -> Self {
        DynamicsError::Dataset(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Axis {
    /// 1-based ordinal of the trade within its market; 0 is before trading.
    TradeIndex,
    HoursSinceOpen,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorPoint {
    pub x: f64,
    pub error: f64,
}

/// `|outcome - price|` after each trade up to close.
pub fn error_series(ds: &Dataset, finding_id: &str, axis: Axis) -> Result<Vec<ErrorPoint>, DynamicsError> {
    let finding = ds.finding(finding_id)?;
    let trades = ds.trades_before_close(finding_id)?;
    if trades.is_empty() {
        return Err(DynamicsError::EmptyMarket(finding_id.to_string()));
    }
    let outcome = finding.outcome();
    Ok(trades
        .iter()
        .enumerate()
        .map(|(k, t)| ErrorPoint {
            x: match axis {
                Axis::TradeIndex => (k + 1) as f64,
                Axis::HoursSinceOpen => (t.timestamp - finding.market_open) as f64 / MILLIS_PER_HOUR,
            },
            error: (outcome - t.post_trade_price).abs(),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub x: f64,
    pub mean_abs_error: f64,
    /// Markets that had traded at least once by `x`.
    pub n_markets_contributing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorCurve {
    pub axis: Axis,
    pub points: Vec<CurvePoint>,
}

impl ErrorCurve {
    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.x).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.mean_abs_error).collect()
    }
}

/// `0, 1, ..., max trades per market`.
pub fn trade_grid(ds: &Dataset) -> Vec<f64> {
    let max = ds
        .findings()
        .iter()
        .map(|f| ds.trades_before_close(&f.finding_id).map(|t| t.len()).unwrap_or(0))
        .max()
        .unwrap_or(0);
    (0..=max).map(|k| k as f64).collect()
}

/// Hourly grid from 0 to the longest market duration (rounded up).
pub fn hour_grid(ds: &Dataset) -> Vec<f64> {
    let max = ds.findings().iter().map(|f| f.duration_hours()).fold(0.0, f64::max);
    (0..=max.ceil() as usize).map(|h| h as f64).collect()
}

/// Mean over markets of the error of each market's latest trade at or
/// before every grid point. Markets yet to trade contribute the error of the
/// uninformed price 0.5; markets past their last trade keep its error.
/// Markets without any trade are left out.
pub fn mean_error_curve(ds: &Dataset, axis: Axis, grid: &[f64]) -> Result<ErrorCurve, DynamicsError> {
    if grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(DynamicsError::GridNotIncreasing);
    }
    let mut series = Vec::new();
    for f in ds.findings() {
        match error_series(ds, &f.finding_id, axis) {
            Ok(s) => series.push((f.outcome(), s)),
            Err(DynamicsError::EmptyMarket(_)) => {}
            Err(e) => return Err(e),
        }
    }
    let m = series.len();
    let mut cursors = vec![0usize; m];
    let mut points = Vec::with_capacity(grid.len());
    for &x in grid {
        let mut sum = 0.0;
        let mut contributing = 0;
        for (i, (outcome, s)) in series.iter().enumerate() {
            while cursors[i] < s.len() && s[cursors[i]].x <= x {
                cursors[i] += 1;
            }
            if cursors[i] == 0 {
                sum += (outcome - 0.5).abs();
            } else {
                sum += s[cursors[i] - 1].error;
                contributing += 1;
            }
        }
        points.push(CurvePoint {
            x,
            mean_abs_error: if m > 0 { sum / m as f64 } else { 0.0 },
            n_markets_contributing: contributing,
        });
    }
    Ok(ErrorCurve { axis, points })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Kernel {
    Tricube,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoessConfig {
    pub span: f64,
    pub degree: usize,
    pub kernel: Kernel,
}

impl Default for LoessConfig {
    fn default() -> Self {
        LoessConfig {
            span: 0.75,
            degree: 2,
            kernel: Kernel::Tricube,
        }
    }
}

impl LoessConfig {
    fn check(&self) -> Result<(), DynamicsError> {
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(DynamicsError::InvalidConfig(format!("span {} outside (0, 1]", self.span)));
        }
        if !(1..=2).contains(&self.degree) {
            return Err(DynamicsError::InvalidConfig(format!("degree {} is not 1 or 2", self.degree)));
        }
        Ok(())
    }

    /// Points in each local window: `floor(span * n)`, raised to
    /// `degree + 2` so that `degree + 1` points keep positive weight.
    pub fn window(&self, n: usize) -> usize {
        ((self.span * n as f64).floor() as usize).max(self.degree + 2).min(n)
    }
}

fn tricube(u: f64) -> f64 {
    if u >= 1.0 {
        0.0
    } else {
        let t = 1.0 - u * u * u;
        t * t * t
    }
}

/// Locally weighted polynomial regression evaluated at every input `x`.
///
/// Each fit uses the `window` nearest points, tricube-weighted on distance
/// scaled by the distance to the farthest of them.
pub fn loess(xs: &[f64], ys: &[f64], cfg: &LoessConfig) -> Result<Vec<f64>, DynamicsError> {
    cfg.check()?;
    if xs.len() != ys.len() {
        return Err(DynamicsError::Stats(StatsError::LengthMismatch(xs.len(), ys.len())));
    }
    let n = xs.len();
    if n < cfg.degree + 2 {
        return Err(DynamicsError::InsufficientPoints {
            needed: cfg.degree + 2,
            got: n,
        });
    }
    let q = cfg.window(n);
    let mut dist = vec![0.0; n];
    let mut out = Vec::with_capacity(n);
    for &x0 in xs {
        for (d, &x) in dist.iter_mut().zip(xs) {
            *d = (x - x0).abs();
        }
        let mut sorted = dist.clone();
        let (_, &mut h, _) = sorted.select_nth_unstable_by(q - 1, f64::total_cmp);
        if !(h > 0.0) {
            return Err(DynamicsError::InsufficientPoints {
                needed: cfg.degree + 2,
                got: 1,
            });
        }
        out.push(local_fit(xs, ys, &dist, x0, h, cfg.degree)?);
    }
    Ok(out)
}

fn local_fit(xs: &[f64], ys: &[f64], dist: &[f64], x0: f64, h: f64, degree: usize) -> Result<f64, DynamicsError> {
    let p = degree + 1;
    // normal equations in scaled coordinates u = (x - x0) / h
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for i in 0..xs.len() {
        let w = tricube(dist[i] / h);
        if w == 0.0 {
            continue;
        }
        let u = (xs[i] - x0) / h;
        let powers = [1.0, u, u * u];
        for r in 0..p {
            b[r] += w * powers[r] * ys[i];
            for c in 0..p {
                a[r][c] += w * powers[r] * powers[c];
            }
        }
    }
    solve(&mut a, &mut b, p)
        .map(|beta| beta[0])
        .ok_or(DynamicsError::InsufficientPoints { needed: p, got: 0 })
}

/// Gaussian elimination with partial pivoting on the leading `p x p` block.
fn solve(a: &mut [[f64; 3]; 3], b: &mut [f64; 3], p: usize) -> Option<[f64; 3]> {
    let scale = (0..p).map(|i| a[i][i].abs()).fold(0.0, f64::max);
    for col in 0..p {
        let pivot = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() <= scale * 1e-13 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..p {
            let f = a[row][col] / a[col][col];
            for k in col..p {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..p).rev() {
        let s: f64 = (row + 1..p).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothedPoint {
    pub x: f64,
    pub mean_abs_error: f64,
    pub smoothed: f64,
    pub n_markets_contributing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedCurve {
    pub axis: Axis,
    pub config: LoessConfig,
    pub points: Vec<SmoothedPoint>,
}

impl SmoothedCurve {
    pub fn xy(&self) -> Vec<(f64, f64)> {
        self.points.iter().map(|p| (p.x, p.smoothed)).collect()
    }

    /// Writes `x,mean_abs_error,smoothed,n_contributing`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["x", "mean_abs_error", "smoothed", "n_contributing"])?;
        for p in &self.points {
            w.write_record([
                p.x.to_string(),
                p.mean_abs_error.to_string(),
                p.smoothed.to_string(),
                p.n_markets_contributing.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn loess_fit(curve: &ErrorCurve, cfg: &LoessConfig) -> Result<SmoothedCurve, DynamicsError> {
    let smoothed = loess(&curve.xs(), &curve.ys(), cfg)?;
    Ok(SmoothedCurve {
        axis: curve.axis,
        config: *cfg,
        points: curve
            .points
            .iter()
            .zip(smoothed)
            .map(|(p, s)| SmoothedPoint {
                x: p.x,
                mean_abs_error: p.mean_abs_error,
                smoothed: s,
                n_markets_contributing: p.n_markets_contributing,
            })
            .collect(),
    })
}

/// What "total reduction" is measured against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum ReductionBase {
    /// First value minus the curve minimum.
    #[default]
    Minimum,
    /// First value minus the last value.
    Final,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Milestone {
    pub fraction_of_total_reduction: f64,
    pub x_at_fraction: f64,
    pub total_reduction: f64,
}

/// Smallest `x` at which the curve has fallen by `fraction` of its total
/// reduction, interpolating linearly between points.
pub fn reduction_milestone(points: &[(f64, f64)], fraction: f64, base: ReductionBase) -> Result<Milestone, DynamicsError> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(DynamicsError::InvalidFraction(fraction));
    }
    let Some(&(_, first)) = points.first() else {
        return Err(DynamicsError::NoReduction);
    };
    let floor = match base {
        ReductionBase::Minimum => points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        ReductionBase::Final => points.last().map(|p| p.1).unwrap_or(first),
    };
    let total = first - floor;
    if !(total > 0.0) {
        return Err(DynamicsError::NoReduction);
    }
    let level = if fraction == 1.0 { floor } else { first - fraction * total };
    for w in points.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        // y0 > level here: every earlier point stayed above it
        if y1 <= level {
            let x = x0 + (y0 - level) / (y0 - y1) * (x1 - x0);
            return Ok(Milestone {
                fraction_of_total_reduction: fraction,
                x_at_fraction: x,
                total_reduction: total,
            });
        }
    }
    Err(DynamicsError::NoReduction)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateForecast {
    pub finding_id: String,
    pub final_price: f64,
    pub smoothed_price: f64,
    pub late_trades: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LateSmoothing {
    pub cutoff_hours: f64,
    pub forecasts: Vec<LateForecast>,
    /// Paired t-test, smoothed-forecast errors minus final-price errors;
    /// negative means smoothing helped.
    pub test: TestResult,
}

/// Replaces each final price by a linearly time-weighted mean of the prices
/// traded after `cutoff_hours` (weight rising from 0 at the cutoff to 1 at
/// close) and tests whether that lowers absolute error.
pub fn late_trade_smoothing(ds: &Dataset, cutoff_hours: f64) -> Result<LateSmoothing, DynamicsError> {
    let mut forecasts = Vec::new();
    let mut errs_smoothed = Vec::new();
    let mut errs_final = Vec::new();
    let mut any_window = false;
    for f in ds.findings() {
        let trades = ds.trades_before_close(&f.finding_id)?;
        let Some(last) = trades.last() else { continue };
        let cutoff = f.market_open as f64 + cutoff_hours * MILLIS_PER_HOUR;
        let close = f.market_close as f64;
        if cutoff < close {
            any_window = true;
        }
        let (mut wsum, mut wp, mut late) = (0.0, 0.0, 0);
        for t in &trades {
            let ts = t.timestamp as f64;
            if ts > cutoff {
                let w = (ts - cutoff) / (close - cutoff);
                wsum += w;
                wp += w * t.post_trade_price;
                late += 1;
            }
        }
        let final_price = last.post_trade_price;
        let smoothed_price = if wsum > 0.0 { wp / wsum } else { final_price };
        errs_smoothed.push((f.outcome() - smoothed_price).abs());
        errs_final.push((f.outcome() - final_price).abs());
        forecasts.push(LateForecast {
            finding_id: f.finding_id.clone(),
            final_price,
            smoothed_price,
            late_trades: late,
        });
    }
    if !any_window {
        return Err(DynamicsError::CutoffBeyondMarkets(cutoff_hours));
    }
    let test = stats::paired_t(&errs_smoothed, &errs_final)?;
    Ok(LateSmoothing {
        cutoff_hours,
        forecasts,
        test,
    })
}
