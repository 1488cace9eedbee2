//! Self-contained statistical kernel: Welch's t-test, Pearson correlation
//! with significance, Yates-corrected chi-square, and Fisher's exact test
//! for 2x2 tables.

pub mod special;

use serde::Serialize;
use special::{chisq_sf, ln_gamma, t_two_sided_p};
use thiserror::Error;

/// Outcome of one hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TestResult {
    /// What was run (e.g. `welch_t`, `pearson`, `chi_square_yates`,
    /// `fisher_exact`).
    pub method: String,
    pub statistic: f64,
    /// Degrees of freedom where the method has them.
    pub df: Option<f64>,
    pub p_value: f64,
}

impl TestResult {
    fn new(method: &str, statistic: f64, df: Option<f64>, p_value: f64) -> TestResult {
        TestResult { method: method.to_string(), statistic, df, p_value: p_value.clamp(0.0, 1.0) }
    }

    pub fn to_csv_row(&self) -> String {
        format!(
            "{},{},{},{}",
            self.method,
            self.statistic,
            self.df.map(|d| d.to_string()).unwrap_or_default(),
            self.p_value
        )
    }
}

/// Mean, sample standard deviation, and size of one sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SummarySample {
    pub mean: f64,
    pub sd: f64,
    pub n: u64,
}

impl SummarySample {
    pub fn new(mean: f64, sd: f64, n: u64) -> SummarySample {
        SummarySample { mean, sd, n }
    }

    /// Summarizes raw observations (sample SD, n - 1 denominator).
    pub fn from_data(xs: &[f64]) -> SummarySample {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = if xs.len() > 1 {
            xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
        } else {
            0.0
        };
        SummarySample { mean, sd: var.sqrt(), n: xs.len() as u64 }
    }
}

/// A 2x2 contingency table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> ContingencyTable {
        ContingencyTable { a, b, c, d }
    }

    pub fn n(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }

    pub fn row_sums(&self) -> (u64, u64) {
        (self.a + self.b, self.c + self.d)
    }

    pub fn col_sums(&self) -> (u64, u64) {
        (self.a + self.c, self.b + self.d)
    }

    fn has_empty_margin(&self) -> bool {
        let (r1, r2) = self.row_sums();
        let (c1, c2) = self.col_sums();
        r1 == 0 || r2 == 0 || c1 == 0 || c2 == 0 || self.n() == 0
    }

    /// Smallest expected cell count under independence.
    pub fn min_expected(&self) -> f64 {
        let n = self.n() as f64;
        let (r1, r2) = self.row_sums();
        let (c1, c2) = self.col_sums();
        let mut min = f64::INFINITY;
        for r in [r1, r2] {
            for c in [c1, c2] {
                min = min.min(r as f64 * c as f64 / n);
            }
        }
        min
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("samples need n >= 2, got {0} and {1}")]
    SampleTooSmall(u64, u64),
    #[error("both samples have zero variance and different means")]
    DegenerateSample,
    #[error("input lengths differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("{0} input has zero variance")]
    ZeroVariance(&'static str),
    #[error("contingency table has an empty margin")]
    EmptyMargin,
    #[error("correlation needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("input contains a non-finite value")]
    NonFiniteInput,
}

/// Welch's unequal-variance t-test from summary statistics, two-sided.
/// When both variances are zero and the means coincide the result is the
/// conventional p = 1, flagged through the method label.
pub fn welch_t_test(x: &SummarySample, y: &SummarySample) -> Result<TestResult, StatsError> {
    if x.n < 2 || y.n < 2 {
        return Err(StatsError::SampleTooSmall(x.n, y.n));
    }
    for s in [x, y] {
        if !s.mean.is_finite() || !s.sd.is_finite() || s.sd < 0.0 {
            return Err(StatsError::NonFiniteInput);
        }
    }
    let vx = x.sd * x.sd / x.n as f64;
    let vy = y.sd * y.sd / y.n as f64;
    if vx + vy == 0.0 {
        if x.mean == y.mean {
            return Ok(TestResult::new("welch_t_degenerate", 0.0, None, 1.0));
        }
        return Err(StatsError::DegenerateSample);
    }
    let t = (x.mean - y.mean) / (vx + vy).sqrt();
    let df = (vx + vy).powi(2)
        / (vx * vx / (x.n as f64 - 1.0) + vy * vy / (y.n as f64 - 1.0));
    let p = t_two_sided_p(t, df);
    Ok(TestResult::new("welch_t", t, Some(df), p))
}

/// Welch's t-test on raw observations.
pub fn welch_t_test_from_data(xs: &[f64], ys: &[f64]) -> Result<TestResult, StatsError> {
    welch_t_test(&SummarySample::from_data(xs), &SummarySample::from_data(ys))
}

/// Pearson correlation with a two-sided t-based significance test. The
/// statistic is r; df = n - 2.
pub fn pearson(xs: &[f64], ys: &[f64]) -> Result<TestResult, StatsError> {
    if xs.len() != ys.len() {
        return Err(StatsError::LengthMismatch(xs.len(), ys.len()));
    }
    let n = xs.len();
    if n < 3 {
        return Err(StatsError::TooFewPoints(n));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(StatsError::NonFiniteInput);
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    let mut sxy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        let dx = x - mx;
        let dy = y - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(StatsError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(StatsError::ZeroVariance("y"));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = nf - 2.0;
    // two-sided p of t = r sqrt(df / (1 - r^2)) collapses to I_{1-r^2}(df/2, 1/2)
    let p = if r.abs() >= 1.0 { 0.0 } else { special::reg_beta(df / 2.0, 0.5, 1.0 - r * r) };
    Ok(TestResult::new("pearson", r, Some(df), p))
}

/// Yates continuity-corrected chi-square test for a 2x2 table, df = 1.
pub fn chi_square_yates(t: &ContingencyTable) -> Result<TestResult, StatsError> {
    if t.has_empty_margin() {
        return Err(StatsError::EmptyMargin);
    }
    let n = t.n() as f64;
    let (r1, r2) = t.row_sums();
    let (c1, c2) = t.col_sums();
    let ad_bc = t.a as f64 * t.d as f64 - t.b as f64 * t.c as f64;
    let corrected = (ad_bc.abs() - n / 2.0).max(0.0);
    let stat = n * corrected * corrected
        / (r1 as f64 * r2 as f64 * c1 as f64 * c2 as f64);
    let p = chisq_sf(stat, 1.0);
    Ok(TestResult::new("chi_square_yates", stat, Some(1.0), p))
}

/// Fisher's exact test for a 2x2 table: two-sided p by the probability
/// method (sum of hypergeometric probabilities of all same-margin tables
/// no more probable than the observed one). The statistic is the sample
/// odds ratio.
pub fn fisher_exact(t: &ContingencyTable) -> Result<TestResult, StatsError> {
    if t.has_empty_margin() {
        return Err(StatsError::EmptyMargin);
    }
    let (r1, _) = t.row_sums();
    let (c1, _) = t.col_sums();
    let n = t.n();

    // log P(a = k) for tables with these margins
    let log_prob = |k: u64| -> f64 {
        let a = k as f64;
        let b = (r1 - k) as f64;
        let c = (c1 - k) as f64;
        let d = ((n - r1) - (c1 - k)) as f64;
        ln_gamma(r1 as f64 + 1.0) + ln_gamma((n - r1) as f64 + 1.0) + ln_gamma(c1 as f64 + 1.0)
            + ln_gamma((n - c1) as f64 + 1.0)
            - ln_gamma(n as f64 + 1.0)
            - ln_gamma(a + 1.0)
            - ln_gamma(b + 1.0)
            - ln_gamma(c + 1.0)
            - ln_gamma(d + 1.0)
    };

    let k_min = c1.saturating_sub(n - r1);
    let k_max = r1.min(c1);
    let observed = log_prob(t.a);
    // relative slack absorbs rounding when ranking equal-probability tables
    let cutoff = observed + 1e-7;
    let mut p = 0.0;
    for k in k_min..=k_max {
        let lp = log_prob(k);
        if lp <= cutoff {
            p += lp.exp();
        }
    }
    let odds = if t.b == 0 || t.c == 0 {
        f64::INFINITY
    } else {
        (t.a as f64 * t.d as f64) / (t.b as f64 * t.c as f64)
    };
    Ok(TestResult::new("fisher_exact", odds, None, p))
}

/// Threshold below which the chi-square approximation is considered
/// unreliable and Fisher's exact test is used instead.
pub const EXPECTED_COUNT_THRESHOLD: f64 = 5.0;

/// Dispatches a 2x2 table to Fisher's exact test when any expected count
/// is below five, otherwise to the Yates-corrected chi-square test.
pub fn select_2x2_test(t: &ContingencyTable) -> Result<TestResult, StatsError> {
    if t.has_empty_margin() {
        return Err(StatsError::EmptyMargin);
    }
    if t.min_expected() < EXPECTED_COUNT_THRESHOLD {
        fisher_exact(t)
    } else {
        chi_square_yates(t)
    }
}
