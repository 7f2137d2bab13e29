//! Correlations, paired t-test, 2x2 chi-square, simple OLS, and the special
//! functions behind their p-values.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },
    #[error("degenerate input: {0}")]
    DegenerateInput(&'static str),
    #[error("degenerate contingency table: a row or column total is zero")]
    DegenerateTable,
    #[error("argument outside the function's domain: {0}")]
    DomainError(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestKind {
    PairedT,
    ChiSquare1,
    OlsCoef,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub df: f64,
    pub p_value: f64,
    pub kind: TestKind,
}

// ---------------------------------------------------------------------------
// Special functions
// ---------------------------------------------------------------------------

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_93,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_13,
    -176.615_029_162_140_59,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_571_6e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0` (Lanczos approximation).
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

pub fn ln_beta(a: f64, b: f64) -> f64 {
    ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
}

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 10_000;

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn incomplete_beta(x: f64, a: f64, b: f64) -> Result<f64, StatsError> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(StatsError::DomainError(format!("I_x(a, b) needs a, b > 0 (a = {a}, b = {b})")));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(StatsError::DomainError(format!("I_x(a, b) needs x in [0, 1] (x = {x})")));
    }
    if x == 0.0 || x == 1.0 {
        return Ok(x);
    }
    let ln_front = a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b);
    // The continued fraction converges fast for x < (a + 1) / (a + b + 2).
    if x < (a + 1.0) / (a + b + 2.0) {
        Ok(ln_front.exp() * beta_cf(x, a, b) / a)
    } else {
        Ok(1.0 - ln_front.exp() * beta_cf(1.0 - x, b, a) / b)
    }
}

/// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized lower incomplete gamma `P(s, x)`.
pub fn gamma_p(s: f64, x: f64) -> Result<f64, StatsError> {
    check_gamma_domain(s, x)?;
    if x == 0.0 {
        return Ok(0.0);
    }
    if x < s + 1.0 {
        Ok(gamma_series(s, x))
    } else {
        Ok(1.0 - gamma_cf(s, x))
    }
}

/// Regularized upper incomplete gamma `Q(s, x) = 1 - P(s, x)`.
pub fn gamma_q(s: f64, x: f64) -> Result<f64, StatsError> {
    check_gamma_domain(s, x)?;
    if x == 0.0 {
        return Ok(1.0);
    }
    if x < s + 1.0 {
        Ok(1.0 - gamma_series(s, x))
    } else {
        Ok(gamma_cf(s, x))
    }
}

fn check_gamma_domain(s: f64, x: f64) -> Result<(), StatsError> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(StatsError::DomainError(format!("incomplete gamma needs s > 0 (s = {s})")));
    }
    if !(x >= 0.0) {
        return Err(StatsError::DomainError(format!("incomplete gamma needs x >= 0 (x = {x})")));
    }
    Ok(())
}

fn gamma_series(s: f64, x: f64) -> f64 {
    let mut ap = s;
    let mut del = 1.0 / s;
    let mut sum = del;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        del *= x / ap;
        sum += del;
        if del.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum * (-x + s * x.ln() - ln_gamma(s)).exp()
}

fn gamma_cf(s: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    (-x + s * x.ln() - ln_gamma(s)).exp() * h
}

/// Two-tailed p-value of a Student t statistic.
pub fn student_t_two_tailed(t: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::DomainError(format!("t distribution needs df > 0 (df = {df})")));
    }
    if t.is_nan() {
        return Err(StatsError::DomainError("t statistic is NaN".into()));
    }
    if t.is_infinite() {
        return Ok(0.0);
    }
    let p = incomplete_beta(df / (df + t * t), 0.5 * df, 0.5)?;
    Ok(p.clamp(0.0, 1.0))
}

/// CDF of the Student t distribution.
pub fn student_t_cdf(t: f64, df: f64) -> Result<f64, StatsError> {
    let tail = 0.5 * student_t_two_tailed(t, df)?;
    Ok(if t >= 0.0 { 1.0 - tail } else { tail })
}

/// Upper-tail probability of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: f64) -> Result<f64, StatsError> {
    if !(df > 0.0) {
        return Err(StatsError::DomainError(format!("chi-square needs df > 0 (df = {df})")));
    }
    if x <= 0.0 {
        return Ok(1.0);
    }
    Ok(gamma_q(0.5 * df, 0.5 * x)?.clamp(0.0, 1.0))
}

// ---------------------------------------------------------------------------
// Descriptive statistics
// ---------------------------------------------------------------------------

pub fn mean(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        None
    } else {
        Some(xs.iter().sum::<f64>() / xs.len() as f64)
    }
}

/// Sample variance (divisor n - 1). `None` for fewer than two values.
pub fn sample_variance(xs: &[f64]) -> Option<f64> {
    if xs.len() < 2 {
        return None;
    }
    let m = mean(xs)?;
    Some(xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64)
}

pub fn sample_sd(xs: &[f64]) -> Option<f64> {
    sample_variance(xs).map(f64::sqrt)
}

/// Median; the midpoint of the two central values for even counts.
pub fn median(xs: &[f64]) -> Option<f64> {
    if xs.is_empty() {
        return None;
    }
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

// ---------------------------------------------------------------------------
// Correlation
// ---------------------------------------------------------------------------

fn check_pair(x: &[f64], y: &[f64], min: usize) -> Result<(), StatsError> {
    if x.len() != y.len() {
        return Err(StatsError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < min {
        return Err(StatsError::TooFewObservations {
            needed: min,
            got: x.len(),
        });
    }
    Ok(())
}

/// Pearson product-moment correlation.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 3)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatsError::DegenerateInput("constant vector"));
    }
    Ok((sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0))
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(xs: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..xs.len()).collect();
    order.sort_by(|&i, &j| xs[i].total_cmp(&xs[j]));
    let mut ranks = vec![0.0; xs.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && xs[order[j + 1]] == xs[order[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

/// Spearman rank correlation (Pearson on average ranks).
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64, StatsError> {
    check_pair(x, y, 3)?;
    pearson(&average_ranks(x), &average_ranks(y))
}

// ---------------------------------------------------------------------------
// Tests
// ---------------------------------------------------------------------------

/// Paired t-test on `x - y`, two-tailed.
///
/// Identical inputs give `t = 0, p = 1`; differences that are constant but
/// nonzero have no defined t statistic and are rejected.
pub fn paired_t(x: &[f64], y: &[f64]) -> Result<TestResult, StatsError> {
    check_pair(x, y, 2)?;
    let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
    let n = d.len() as f64;
    let df = n - 1.0;
    if d.iter().all(|&v| v == 0.0) {
        return Ok(TestResult {
            statistic: 0.0,
            df,
            p_value: 1.0,
            kind: TestKind::PairedT,
        });
    }
    let m = d.iter().sum::<f64>() / n;
    let var = d.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / df;
    // A spread at rounding level relative to the mean is treated as constant.
    if var.sqrt() <= 1e-12 * m.abs() || var == 0.0 {
        return Err(StatsError::DegenerateInput("zero-variance differences"));
    }
    let t = m / (var / n).sqrt();
    Ok(TestResult {
        statistic: t,
        df,
        p_value: student_t_two_tailed(t, df)?,
        kind: TestKind::PairedT,
    })
}

/// Pearson chi-square test of independence on a 2x2 table (df = 1).
/// `yates` applies the continuity correction.
pub fn chi_square_2x2(table: [[u64; 2]; 2], yates: bool) -> Result<TestResult, StatsError> {
    let rows = [table[0][0] + table[0][1], table[1][0] + table[1][1]];
    let cols = [table[0][0] + table[1][0], table[0][1] + table[1][1]];
    if rows.contains(&0) || cols.contains(&0) {
        return Err(StatsError::DegenerateTable);
    }
    let n = (rows[0] + rows[1]) as f64;
    let mut stat = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            let expected = rows[i] as f64 * cols[j] as f64 / n;
            let mut diff = (table[i][j] as f64 - expected).abs();
            if yates {
                diff = (diff - 0.5).max(0.0);
            }
            stat += diff * diff / expected;
        }
    }
    Ok(TestResult {
        statistic: stat,
        df: 1.0,
        p_value: chi_square_sf(stat, 1.0)?,
        kind: TestKind::ChiSquare1,
    })
}

/// Simple least-squares fit `y = intercept + slope * x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub intercept: f64,
    pub slope: f64,
    pub se_intercept: f64,
    pub se_slope: f64,
    /// Zero when `y` is constant.
    pub r_squared: f64,
    pub n: usize,
}

impl OlsFit {
    pub fn residual_df(&self) -> f64 {
        self.n as f64 - 2.0
    }

    fn coef_test(&self, coef: f64, se: f64) -> Result<TestResult, StatsError> {
        let df = self.residual_df();
        let (statistic, p_value) = if se > 0.0 {
            let t = coef / se;
            (t, student_t_two_tailed(t, df)?)
        } else if coef == 0.0 {
            (0.0, 1.0)
        } else {
            (coef.signum() * f64::INFINITY, 0.0)
        };
        Ok(TestResult {
            statistic,
            df,
            p_value,
            kind: TestKind::OlsCoef,
        })
    }

    pub fn slope_test(&self) -> Result<TestResult, StatsError> {
        self.coef_test(self.slope, self.se_slope)
    }

    pub fn intercept_test(&self) -> Result<TestResult, StatsError> {
        self.coef_test(self.intercept, self.se_intercept)
    }
}

/// OLS with conventional homoskedastic standard errors.
pub fn ols_simple(x: &[f64], y: &[f64]) -> Result<OlsFit, StatsError> {
    check_pair(x, y, 3)?;
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxx += (a - mx) * (a - mx);
        sxy += (a - mx) * (b - my);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 {
        return Err(StatsError::DegenerateInput("constant regressor"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let r = b - intercept - slope * a;
            r * r
        })
        .sum();
    let s2 = ssr / (n - 2.0);
    let r_squared = if syy > 0.0 { (1.0 - ssr / syy).clamp(0.0, 1.0) } else { 0.0 };
    Ok(OlsFit {
        intercept,
        slope,
        se_intercept: (s2 * (1.0 / n + mx * mx / sxx)).sqrt(),
        se_slope: (s2 / sxx).sqrt(),
        r_squared,
        n: x.len(),
    })
}
