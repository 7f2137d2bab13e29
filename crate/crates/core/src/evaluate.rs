//! Scoring of aggregated forecasts against replication outcomes: accuracy,
//! absolute error, extremeness, per-project summaries, the hypothesis tests
//! comparing markets with surveys, and the p-value category regression.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::aggregate::{AggregateForecast, Method};
use crate::dataset::{Dataset, PValueCategory, Project};
use crate::stats::{self, OlsFit, StatsError, TestResult};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("forecast for `{0}` has no matching finding")]
    MissingOutcome(String),
    #[error("no findings scored by both {0} and {1}")]
    NoOverlap(Method, Method),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub finding_id: String,
    pub project: Project,
    pub method: Method,
    pub forecast: f64,
    pub outcome: u8,
    pub predicted: u8,
    pub correct: bool,
    pub abs_error: f64,
    pub extremeness: f64,
}

/// Scores each forecast; `threshold` is the binarization cut (forecasts at
/// or above it predict replication).
pub fn score(forecasts: &[AggregateForecast], ds: &Dataset, threshold: f64) -> Result<Vec<ScoreRow>, EvalError> {
    forecasts
        .iter()
        .map(|f| {
            let finding = ds
                .finding(&f.finding_id)
                .map_err(|_| EvalError::MissingOutcome(f.finding_id.clone()))?;
            let outcome = u8::from(finding.replicated);
            let predicted = u8::from(f.value >= threshold);
            Ok(ScoreRow {
                finding_id: f.finding_id.clone(),
                project: finding.project,
                method: f.method,
                forecast: f.value,
                outcome,
                predicted,
                correct: predicted == outcome,
                abs_error: (f64::from(outcome) - f.value).abs(),
                extremeness: (f.value - 0.5).abs(),
            })
        })
        .collect()
}

pub fn write_scores_csv<W: std::io::Write>(rows: &[ScoreRow], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "finding_id",
        "project",
        "method",
        "forecast",
        "outcome",
        "predicted",
        "correct",
        "abs_error",
        "extremeness",
    ])?;
    for r in rows {
        w.write_record([
            r.finding_id.clone(),
            r.project.to_string(),
            r.method.to_string(),
            r.forecast.to_string(),
            r.outcome.to_string(),
            r.predicted.to_string(),
            u8::from(r.correct).to_string(),
            r.abs_error.to_string(),
            r.extremeness.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// A project, or all findings together.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Group {
    Project(Project),
    Pooled,
}

impl Group {
    fn contains(&self, project: Project) -> bool {
        match self {
            Group::Project(p) => *p == project,
            Group::Pooled => true,
        }
    }
}

impl fmt::Display for Group {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Group::Project(p) => write!(f, "{p}"),
            Group::Pooled => f.write_str("Pooled"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub n_scored: usize,
    pub mean_forecast: f64,
    pub sd_forecast: Option<f64>,
    pub n_correct: usize,
    pub accuracy: f64,
    pub mae: f64,
    pub spearman_outcome: Option<f64>,
    pub pearson_outcome: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectSummary {
    pub group: Group,
    pub n_findings: usize,
    pub n_replicated: usize,
    pub replication_rate: f64,
    pub methods: BTreeMap<Method, MethodSummary>,
    /// Rank correlation of final market prices with survey means.
    pub spearman_market_survey: Option<f64>,
    pub pearson_market_survey: Option<f64>,
}

/// One summary per project present in the dataset, then the pooled row.
pub fn summarize(scores: &[ScoreRow], ds: &Dataset) -> Vec<ProjectSummary> {
    let mut groups: Vec<Group> = Project::ALL
        .iter()
        .filter(|&&p| ds.findings().iter().any(|f| f.project == p))
        .map(|&p| Group::Project(p))
        .collect();
    groups.push(Group::Pooled);
    groups.into_iter().map(|g| summarize_group(scores, ds, g)).collect()
}

pub fn summarize_group(scores: &[ScoreRow], ds: &Dataset, group: Group) -> ProjectSummary {
    let findings: Vec<_> = ds.findings().iter().filter(|f| group.contains(f.project)).collect();
    let n_findings = findings.len();
    let n_replicated = findings.iter().filter(|f| f.replicated).count();
    let mut methods = BTreeMap::new();
    for method in Method::ALL {
        let rows: Vec<&ScoreRow> = scores
            .iter()
            .filter(|r| r.method == method && group.contains(r.project))
            .collect();
        if rows.is_empty() {
            continue;
        }
        let forecasts: Vec<f64> = rows.iter().map(|r| r.forecast).collect();
        let outcomes: Vec<f64> = rows.iter().map(|r| f64::from(r.outcome)).collect();
        let n = rows.len();
        let n_correct = rows.iter().filter(|r| r.correct).count();
        methods.insert(
            method,
            MethodSummary {
                n_scored: n,
                mean_forecast: stats::mean(&forecasts).unwrap_or(f64::NAN),
                sd_forecast: stats::sample_sd(&forecasts),
                n_correct,
                accuracy: n_correct as f64 / n as f64,
                mae: rows.iter().map(|r| r.abs_error).sum::<f64>() / n as f64,
                spearman_outcome: stats::spearman(&outcomes, &forecasts).ok(),
                pearson_outcome: stats::pearson(&outcomes, &forecasts).ok(),
            },
        );
    }
    let (market, survey) = paired(scores, Method::MarketFinalPrice, Method::SurveyMean, |r| {
        group.contains(r.project)
    });
    ProjectSummary {
        group,
        n_findings,
        n_replicated,
        replication_rate: if n_findings > 0 {
            n_replicated as f64 / n_findings as f64
        } else {
            0.0
        },
        methods,
        spearman_market_survey: stats::spearman(&market, &survey).ok(),
        pearson_market_survey: stats::pearson(&market, &survey).ok(),
    }
}

/// Forecast pairs of two methods on the findings both scored, in the order
/// of method `a`'s rows.
fn paired_rows<'a>(
    scores: &'a [ScoreRow],
    a: Method,
    b: Method,
    keep: impl Fn(&ScoreRow) -> bool,
) -> Vec<(&'a ScoreRow, &'a ScoreRow)> {
    let b_rows: HashMap<&str, &ScoreRow> = scores
        .iter()
        .filter(|r| r.method == b)
        .map(|r| (r.finding_id.as_str(), r))
        .collect();
    scores
        .iter()
        .filter(|r| r.method == a && keep(r))
        .filter_map(|r| b_rows.get(r.finding_id.as_str()).map(|&rb| (r, rb)))
        .collect()
}

fn paired(scores: &[ScoreRow], a: Method, b: Method, keep: impl Fn(&ScoreRow) -> bool) -> (Vec<f64>, Vec<f64>) {
    paired_rows(scores, a, b, keep)
        .into_iter()
        .map(|(ra, rb)| (ra.forecast, rb.forecast))
        .unzip()
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionQuadrants {
    pub predicted_replicate_did: usize,
    pub predicted_replicate_did_not: usize,
    pub predicted_fail_did: usize,
    pub predicted_fail_did_not: usize,
}

impl ConfusionQuadrants {
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a ScoreRow>) -> Self {
        let mut q = ConfusionQuadrants::default();
        for r in rows {
            match (r.predicted, r.outcome) {
                (1, 1) => q.predicted_replicate_did += 1,
                (1, _) => q.predicted_replicate_did_not += 1,
                (_, 1) => q.predicted_fail_did += 1,
                _ => q.predicted_fail_did_not += 1,
            }
        }
        q
    }

    pub fn total(&self) -> usize {
        self.predicted_replicate_did + self.predicted_replicate_did_not + self.predicted_fail_did + self.predicted_fail_did_not
    }

    pub fn predicted_fail(&self) -> usize {
        self.predicted_fail_did + self.predicted_fail_did_not
    }

    pub fn predicted_replicate(&self) -> usize {
        self.predicted_replicate_did + self.predicted_replicate_did_not
    }

    /// Rows: predicted fail, predicted replicate. Columns: correct, wrong.
    pub fn accuracy_table(&self) -> [[u64; 2]; 2] {
        [
            [self.predicted_fail_did_not as u64, self.predicted_fail_did as u64],
            [self.predicted_replicate_did as u64, self.predicted_replicate_did_not as u64],
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymmetryResult {
    pub method: Method,
    pub quadrants: ConfusionQuadrants,
    /// Chi-square on correct/wrong by predicted class; `None` when a
    /// margin of the table is empty.
    pub test: Option<TestResult>,
}

/// Whether each method is more accurate when it predicts failure than when
/// it predicts replication.
pub fn asymmetry_tests(scores: &[ScoreRow], methods: &[Method], yates: bool) -> Vec<AsymmetryResult> {
    methods
        .iter()
        .filter(|m| scores.iter().any(|r| r.method == **m))
        .map(|&method| {
            let quadrants = ConfusionQuadrants::from_rows(scores.iter().filter(|r| r.method == method));
            AsymmetryResult {
                method,
                quadrants,
                test: stats::chi_square_2x2(quadrants.accuracy_table(), yates).ok(),
            }
        })
        .collect()
}

/// Chi-square comparing the correct/incorrect counts of two methods.
pub fn accuracy_comparison(scores: &[ScoreRow], a: Method, b: Method, yates: bool) -> Result<TestResult, EvalError> {
    let counts = |m: Method| {
        let rows: Vec<_> = scores.iter().filter(|r| r.method == m).collect();
        let c = rows.iter().filter(|r| r.correct).count() as u64;
        [c, rows.len() as u64 - c]
    };
    Ok(stats::chi_square_2x2([counts(a), counts(b)], yates)?)
}

/// Paired t-test of outcomes against a method's forecasts (outcome minus
/// forecast); a negative statistic means the method overestimates.
pub fn overestimation_test(scores: &[ScoreRow], method: Method) -> Result<TestResult, EvalError> {
    let rows: Vec<&ScoreRow> = scores.iter().filter(|r| r.method == method).collect();
    let outcomes: Vec<f64> = rows.iter().map(|r| f64::from(r.outcome)).collect();
    let forecasts: Vec<f64> = rows.iter().map(|r| r.forecast).collect();
    Ok(stats::paired_t(&outcomes, &forecasts)?)
}

/// Survey-mean and market overestimation tests.
pub fn overestimation_tests(scores: &[ScoreRow]) -> Result<(TestResult, TestResult), EvalError> {
    Ok((
        overestimation_test(scores, Method::SurveyMean)?,
        overestimation_test(scores, Method::MarketFinalPrice)?,
    ))
}

fn paired_test(
    scores: &[ScoreRow],
    a: Method,
    b: Method,
    value: impl Fn(&ScoreRow) -> f64,
) -> Result<TestResult, EvalError> {
    let pairs = paired_rows(scores, a, b, |_| true);
    if pairs.is_empty() {
        return Err(EvalError::NoOverlap(a, b));
    }
    let (x, y): (Vec<f64>, Vec<f64>) = pairs.iter().map(|(ra, rb)| (value(ra), value(rb))).unzip();
    Ok(stats::paired_t(&x, &y)?)
}

/// Paired t-test on absolute errors, `a` minus `b`. With `a` the survey mean
/// and `b` the market, a positive statistic means the market errs less.
pub fn error_difference_test(scores: &[ScoreRow], a: Method, b: Method) -> Result<TestResult, EvalError> {
    paired_test(scores, a, b, |r| r.abs_error)
}

/// Paired t-test on extremeness, `a` minus `b`.
pub fn extremeness_test(scores: &[ScoreRow], a: Method, b: Method) -> Result<TestResult, EvalError> {
    paired_test(scores, a, b, |r| r.extremeness)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryRate {
    pub category: PValueCategory,
    pub n: usize,
    pub n_replicated: usize,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueAnalysis {
    pub fit: OlsFit,
    pub intercept_test: TestResult,
    pub slope_test: TestResult,
    /// Correlation of the category indicator with outcomes; `None` when
    /// outcomes are constant.
    pub pearson_r: Option<f64>,
    pub rates: Vec<CategoryRate>,
}

/// Regresses the replication outcome on the indicator of p at or below the
/// threshold.
pub fn pvalue_regression(ds: &Dataset) -> Result<PValueAnalysis, EvalError> {
    let x: Vec<f64> = ds
        .findings()
        .iter()
        .map(|f| f64::from(u8::from(f.p_value_category == PValueCategory::AtOrBelowThreshold)))
        .collect();
    let y: Vec<f64> = ds.findings().iter().map(|f| f.outcome()).collect();
    let fit = stats::ols_simple(&x, &y)?;
    let rates = [PValueCategory::AtOrBelowThreshold, PValueCategory::AboveThreshold]
        .into_iter()
        .map(|category| {
            let members: Vec<_> = ds.findings().iter().filter(|f| f.p_value_category == category).collect();
            let n_replicated = members.iter().filter(|f| f.replicated).count();
            CategoryRate {
                category,
                n: members.len(),
                n_replicated,
                rate: n_replicated as f64 / members.len() as f64,
            }
        })
        .collect();
    Ok(PValueAnalysis {
        intercept_test: fit.intercept_test()?,
        slope_test: fit.slope_test()?,
        pearson_r: stats::pearson(&x, &y).ok(),
        fit,
        rates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Finding, SurveyResponse};

    fn finding(id: &str, project: Project, replicated: bool, cat: PValueCategory) -> Finding {
        Finding {
            finding_id: id.into(),
            project,
            replicated,
            p_value_category: cat,
            original_p_value: None,
            market_open: 0,
            market_close: 10,
        }
    }

    fn forecast(id: &str, method: Method, value: f64) -> AggregateForecast {
        AggregateForecast {
            finding_id: id.into(),
            method,
            value,
            n_inputs: 1,
        }
    }

    #[test]
    fn boundary_forecast_predicts_replication() {
        let ds = Dataset::new(
            vec![finding("f", Project::Rpp, false, PValueCategory::AboveThreshold)],
            vec![],
            vec![],
        );
        let rows = score(&[forecast("f", Method::MarketFinalPrice, 0.5)], &ds, 0.5).unwrap();
        let r = &rows[0];
        assert_eq!((r.predicted, r.correct, r.abs_error, r.extremeness), (1, false, 0.5, 0.0));
        assert_eq!(
            score(&[forecast("g", Method::SurveyMean, 0.3)], &ds, 0.5),
            Err(EvalError::MissingOutcome("g".into()))
        );
    }

    #[test]
    fn binary_forecasts_are_fixed_points() {
        let ds = Dataset::new(
            vec![
                finding("a", Project::Rpp, true, PValueCategory::AboveThreshold),
                finding("b", Project::Rpp, false, PValueCategory::AboveThreshold),
            ],
            vec![],
            vec![],
        );
        let rows = score(
            &[forecast("a", Method::SurveyMean, 1.0), forecast("b", Method::SurveyMean, 0.0)],
            &ds,
            0.5,
        )
        .unwrap();
        for r in rows {
            assert_eq!(f64::from(r.predicted), r.forecast);
            assert!(r.correct);
            assert_eq!(r.abs_error, 0.0);
        }
    }

    fn fixture() -> (Dataset, Vec<ScoreRow>) {
        let specs = [
            ("a", Project::Rpp, true, 0.8, 0.6),
            ("b", Project::Rpp, false, 0.3, 0.45),
            ("c", Project::Rpp, false, 0.6, 0.55),
            ("d", Project::Ssrp, true, 0.7, 0.65),
            ("e", Project::Ssrp, false, 0.2, 0.4),
            ("f", Project::Ssrp, true, 0.45, 0.52),
        ];
        let findings = specs
            .iter()
            .map(|&(id, p, r, _, _)| finding(id, p, r, PValueCategory::AboveThreshold))
            .collect();
        let surveys = specs
            .iter()
            .map(|&(id, ..)| SurveyResponse {
                finding_id: id.into(),
                forecaster_id: "x".into(),
                belief: 0.5,
            })
            .collect();
        let ds = Dataset::new(findings, surveys, vec![]);
        let mut fc = Vec::new();
        for &(id, _, _, m, s) in &specs {
            fc.push(forecast(id, Method::MarketFinalPrice, m));
            fc.push(forecast(id, Method::SurveyMean, s));
        }
        let rows = score(&fc, &ds, 0.5).unwrap();
        (ds, rows)
    }

    #[test]
    fn pooled_summary_is_sum_of_projects() {
        let (ds, rows) = fixture();
        let summaries = summarize(&rows, &ds);
        assert_eq!(summaries.len(), 3);
        let pooled = summaries.last().unwrap();
        assert_eq!(pooled.group, Group::Pooled);
        assert_eq!((pooled.n_findings, pooled.n_replicated), (6, 3));
        for m in [Method::MarketFinalPrice, Method::SurveyMean] {
            let parts: usize = summaries[..2].iter().map(|s| s.methods[&m].n_correct).sum();
            assert_eq!(parts, pooled.methods[&m].n_correct);
            let weighted: f64 = summaries[..2]
                .iter()
                .map(|s| s.methods[&m].mae * s.n_findings as f64)
                .sum::<f64>()
                / 6.0;
            assert!((weighted - pooled.methods[&m].mae).abs() < 1e-12);
        }
        let q = ConfusionQuadrants::from_rows(rows.iter().filter(|r| r.method == Method::MarketFinalPrice));
        assert_eq!(q.total(), 6);
        assert_eq!(q.predicted_fail_did, 1);
        assert_eq!(q.predicted_replicate_did_not, 1);
    }

    #[test]
    fn identical_methods_give_zero_statistics() {
        let (_, rows) = fixture();
        let t = extremeness_test(&rows, Method::MarketFinalPrice, Method::MarketFinalPrice).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
        let (_, market) = overestimation_tests(&rows).unwrap();
        assert!(market.statistic < 0.0 || market.statistic > 0.0);
    }

    #[test]
    fn forecasts_equal_to_outcomes_give_zero_overestimation() {
        let (ds, _) = fixture();
        let fc: Vec<_> = ds
            .findings()
            .iter()
            .map(|f| forecast(&f.finding_id, Method::SurveyMean, f.outcome()))
            .collect();
        let rows = score(&fc, &ds, 0.5).unwrap();
        let t = overestimation_test(&rows, Method::SurveyMean).unwrap();
        assert_eq!((t.statistic, t.p_value), (0.0, 1.0));
    }

    #[test]
    fn regression_matches_group_means() {
        let cats = [
            (true, PValueCategory::AtOrBelowThreshold),
            (true, PValueCategory::AtOrBelowThreshold),
            (false, PValueCategory::AtOrBelowThreshold),
            (true, PValueCategory::AboveThreshold),
            (false, PValueCategory::AboveThreshold),
            (false, PValueCategory::AboveThreshold),
            (false, PValueCategory::AboveThreshold),
        ];
        let findings = cats
            .iter()
            .enumerate()
            .map(|(i, &(r, c))| finding(&format!("f{i}"), Project::Ml2, r, c))
            .collect();
        let ds = Dataset::new(findings, vec![], vec![]);
        let a = pvalue_regression(&ds).unwrap();
        assert!((a.fit.intercept - 0.25).abs() < 1e-12);
        assert!((a.fit.intercept + a.fit.slope - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(a.rates[0].n_replicated, 2);
        assert_eq!(a.rates[1].n, 4);
        let r = a.pearson_r.unwrap();
        assert!((r * r - a.fit.r_squared).abs() < 1e-12);
    }

    #[test]
    fn regression_with_constant_outcome() {
        let findings = (0..4)
            .map(|i| {
                let cat = if i % 2 == 0 {
                    PValueCategory::AboveThreshold
                } else {
                    PValueCategory::AtOrBelowThreshold
                };
                finding(&format!("f{i}"), Project::Eerp, true, cat)
            })
            .collect();
        let a = pvalue_regression(&Dataset::new(findings, vec![], vec![])).unwrap();
        assert_eq!(a.fit.r_squared, 0.0);
        assert_eq!(a.pearson_r, None);
        let single = vec![finding("x", Project::Eerp, true, PValueCategory::AboveThreshold); 3]
            .into_iter()
            .enumerate()
            .map(|(i, mut f)| {
                f.finding_id = format!("x{i}");
                f
            })
            .collect();
        assert!(matches!(
            pvalue_regression(&Dataset::new(single, vec![], vec![])),
            Err(EvalError::Stats(StatsError::DegenerateInput(_)))
        ));
    }
}
