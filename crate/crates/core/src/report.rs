//! Assembles the full reproduction: aggregation, scoring, per-project
//! summaries, hypothesis tests, p-value regression and market dynamics,
//! plus a comparison against the published reference values.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::aggregate::{aggregate_all, AggregateConfig, AggregateTable, Method, WeightScope};
use crate::dataset::{Dataset, PValueCategory, Project, ValidationReport};
use crate::dynamics::{
    hour_grid, late_trade_smoothing, loess_fit, mean_error_curve, reduction_milestone, trade_grid, Axis, LateSmoothing,
    LoessConfig, Milestone, ReductionBase, SmoothedCurve,
};
use crate::evaluate::{
    accuracy_comparison, asymmetry_tests, error_difference_test, extremeness_test, overestimation_test, pvalue_regression,
    score, summarize, AsymmetryResult, Group, PValueAnalysis, ProjectSummary, ScoreRow,
};
use crate::stats::TestResult;

/// Reference values reported for the pooled 103-finding dataset.
pub mod published {
    use crate::dataset::Project;

    pub const FINDINGS: usize = 103;
    pub const REPLICATED: usize = 51;
    pub const TRADES: usize = 7850;
    pub const SURVEY_RESPONSES: usize = 7380;

    /// (project, findings, replicated)
    pub const PROJECT_COUNTS: [(Project, usize, usize); 4] = [
        (Project::Rpp, 40, 15),
        (Project::Eerp, 18, 11),
        (Project::Ml2, 24, 11),
        (Project::Ssrp, 21, 13),
    ];

    pub const MARKET_MEAN: f64 = 0.627;
    pub const MARKET_MAE: f64 = 0.384;
    /// The summary table and the running text disagree on this count.
    pub const MARKET_CORRECT_TABLE: usize = 76;
    pub const MARKET_CORRECT_TEXT: usize = 75;
    pub const SURVEY_MEAN: f64 = 0.610;
    pub const SURVEY_SD: f64 = 0.14;
    pub const SURVEY_MAE: f64 = 0.423;
    pub const SURVEY_CORRECT: usize = 68;

    /// (project, market mean, market correct, market MAE, survey mean,
    /// survey correct, survey MAE, spearman market~survey,
    /// spearman outcome~market, spearman outcome~survey)
    pub const PROJECT_ROWS: [(Project, f64, usize, f64, f64, usize, f64, f64, f64, f64); 4] = [
        (Project::Rpp, 0.556, 28, 0.431, 0.546, 23, 0.485, 0.736, 0.418, 0.243),
        (Project::Eerp, 0.751, 11, 0.414, 0.711, 11, 0.409, 0.792, 0.297, 0.516),
        (Project::Ml2, 0.644, 18, 0.354, 0.647, 16, 0.394, 0.947, 0.755, 0.731),
        (Project::Ssrp, 0.634, 18, 0.303, 0.605, 18, 0.348, 0.845, 0.842, 0.760),
    ];

    pub const SPEARMAN_MARKET_SURVEY: f64 = 0.837;
    pub const PEARSON_MARKET_SURVEY: f64 = 0.853;
    pub const SPEARMAN_OUTCOME_MARKET: f64 = 0.568;
    pub const SPEARMAN_OUTCOME_SURVEY: f64 = 0.557;
    pub const PEARSON_OUTCOME_MARKET: f64 = 0.581;
    pub const PEARSON_OUTCOME_SURVEY: f64 = 0.564;

    pub const T_OUTCOME_SURVEY: f64 = -2.89;
    pub const P_OUTCOME_SURVEY: f64 = 0.0046;
    pub const T_OUTCOME_MARKET: f64 = -3.43;
    pub const P_OUTCOME_MARKET: f64 = 0.00088;
    pub const T_ERROR_DIFFERENCE: f64 = 3.68;
    pub const T_EXTREMENESS: f64 = 7.87;
    pub const CHI2_ACCURACY: f64 = 1.12;
    pub const P_CHI2_ACCURACY: f64 = 0.29;
    pub const CHI2_ASYMMETRY_MARKET: f64 = 6.68;
    pub const CHI2_ASYMMETRY_SURVEY: f64 = 4.45;

    /// Quadrants as reported: predicted fail (of which replicated),
    /// predicted replicate (of which failed).
    pub const MARKET_QUADRANTS: (usize, usize, usize, usize) = (31, 3, 73, 25);
    pub const SURVEY_QUADRANTS: (usize, usize, usize, usize) = (22, 2, 81, 33);

    pub const MAE_VOTING: f64 = 0.39;
    pub const MAE_VAR_WEIGHTED: f64 = 0.407;
    pub const MAE_MEDIAN: f64 = 0.412;
    pub const MAE_MEAN: f64 = 0.422;
    pub const MEAN_MEDIAN: f64 = 0.63;
    pub const SD_MEDIAN: f64 = 0.17;
    pub const MEAN_VOTING: f64 = 0.66;
    pub const SD_VOTING: f64 = 0.21;
    pub const MEAN_VAR_WEIGHTED: f64 = 0.58;
    pub const SD_VAR_WEIGHTED: f64 = 0.17;
    pub const SD_MARKET: f64 = 0.21;

    pub const OLS_INTERCEPT: f64 = 0.2807;
    pub const OLS_SE_INTERCEPT: f64 = 0.0595;
    pub const OLS_SLOPE: f64 = 0.458;
    pub const OLS_SE_SLOPE: f64 = 0.0890;
    pub const OLS_R_SQUARED: f64 = 0.2079;
    pub const RATE_AT_OR_BELOW: f64 = 0.74;
    pub const RATE_ABOVE: f64 = 0.28;

    pub const TRADES_TO_90_PERCENT: f64 = 69.0;
    pub const HOURS_TO_90_PERCENT: f64 = 161.0;
    pub const SHARE_IN_FIRST_HOUR: f64 = 0.65;
    pub const MIN_TRADES_PER_MARKET: usize = 26;
    pub const MAX_TRADES_PER_MARKET: usize = 193;
}

/// Knobs for a reproduction run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisConfig {
    pub methods: Vec<Method>,
    pub threshold: f64,
    pub weight_scope: WeightScope,
    pub loess: LoessConfig,
    pub yates: bool,
    pub reduction_base: ReductionBase,
    pub milestone_fractions: Vec<f64>,
    pub late_cutoff_hours: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            methods: Method::ALL.to_vec(),
            threshold: crate::aggregate::DEFAULT_THRESHOLD,
            weight_scope: WeightScope::Pooled,
            loess: LoessConfig::default(),
            yates: false,
            reduction_base: ReductionBase::Minimum,
            milestone_fractions: vec![0.5, 0.65, 0.9],
            late_cutoff_hours: 168.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetCounts {
    pub findings: usize,
    pub surveys: usize,
    pub trades: usize,
    pub min_trades_per_market: usize,
    pub max_trades_per_market: usize,
    /// Whether any trade is recorded on the NO side.
    pub has_no_side_trades: bool,
}

impl DatasetCounts {
    pub fn of(ds: &Dataset) -> Self {
        let per_market: Vec<usize> = ds
            .findings()
            .iter()
            .map(|f| ds.trades_before_close(&f.finding_id).map(|t| t.len()).unwrap_or(0))
            .collect();
        DatasetCounts {
            findings: ds.findings().len(),
            surveys: ds.surveys().len(),
            trades: ds.trades().len(),
            min_trades_per_market: per_market.iter().copied().min().unwrap_or(0),
            max_trades_per_market: per_market.iter().copied().max().unwrap_or(0),
            has_no_side_trades: ds.has_no_side_trades(),
        }
    }
}

/// Named hypothesis tests; a test that could not be computed holds the
/// reason instead.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Ok(T),
    Failed { error: String },
}

impl<T> Outcome<T> {
    fn from<E: std::fmt::Display>(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Failed { error: e.to_string() },
        }
    }

    pub fn ok(&self) -> Option<&T> {
        match self {
            Outcome::Ok(v) => Some(v),
            Outcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisTests {
    /// Outcome minus survey mean.
    pub overestimation_survey: Outcome<TestResult>,
    /// Outcome minus final market price.
    pub overestimation_market: Outcome<TestResult>,
    /// Survey-mean absolute error minus market absolute error.
    pub error_difference: Outcome<TestResult>,
    /// Market extremeness minus survey-mean extremeness.
    pub extremeness: Outcome<TestResult>,
    /// Correct/incorrect counts, market vs survey mean.
    pub accuracy_market_vs_survey: Outcome<TestResult>,
    pub asymmetry: Vec<AsymmetryResult>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisDynamics {
    pub curve: Outcome<SmoothedCurve>,
    pub milestones: Vec<Outcome<Milestone>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DynamicsReport {
    pub trades: AxisDynamics,
    pub hours: AxisDynamics,
    pub late_smoothing: Outcome<LateSmoothing>,
}

impl DynamicsReport {
    pub fn milestone(&self, axis: Axis, fraction: f64) -> Option<&Milestone> {
        let a = match axis {
            Axis::TradeIndex => &self.trades,
            Axis::HoursSinceOpen => &self.hours,
        };
        a.milestones
            .iter()
            .filter_map(Outcome::ok)
            .find(|m| m.fraction_of_total_reduction == fraction)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discrepancy {
    pub key: String,
    pub published: f64,
    pub computed: Option<f64>,
    pub delta: Option<f64>,
    pub note: String,
}

/// Everything one reproduction run produces. Serializes to the structured
/// report document.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reproduction {
    pub config: AnalysisConfig,
    pub counts: DatasetCounts,
    pub validation_errors: usize,
    pub validation_warnings: usize,
    pub summaries: Vec<ProjectSummary>,
    pub tests: HypothesisTests,
    pub pvalue: Outcome<PValueAnalysis>,
    pub dynamics: DynamicsReport,
    pub discrepancies: Vec<Discrepancy>,
    #[serde(skip)]
    pub aggregates: AggregateTable,
    #[serde(skip)]
    pub scores: Vec<ScoreRow>,
}

impl Reproduction {
    pub fn summary(&self, group: Group) -> Option<&ProjectSummary> {
        self.summaries.iter().find(|s| s.group == group)
    }

    pub fn pooled(&self) -> &ProjectSummary {
        self.summary(Group::Pooled).expect("pooled row always present")
    }
}

fn axis_dynamics(ds: &Dataset, axis: Axis, cfg: &AnalysisConfig) -> AxisDynamics {
    let grid = match axis {
        Axis::TradeIndex => trade_grid(ds),
        Axis::HoursSinceOpen => hour_grid(ds),
    };
    let curve = mean_error_curve(ds, axis, &grid).and_then(|c| loess_fit(&c, &cfg.loess));
    let milestones = match &curve {
        Ok(c) => {
            let xy = c.xy();
            cfg.milestone_fractions
                .iter()
                .map(|&f| Outcome::from(reduction_milestone(&xy, f, cfg.reduction_base)))
                .collect()
        }
        Err(_) => Vec::new(),
    };
    AxisDynamics {
        curve: Outcome::from(curve),
        milestones,
    }
}

pub fn analyze_dynamics(ds: &Dataset, cfg: &AnalysisConfig) -> DynamicsReport {
    DynamicsReport {
        trades: axis_dynamics(ds, Axis::TradeIndex, cfg),
        hours: axis_dynamics(ds, Axis::HoursSinceOpen, cfg),
        late_smoothing: Outcome::from(late_trade_smoothing(ds, cfg.late_cutoff_hours)),
    }
}

pub fn hypothesis_tests(scores: &[ScoreRow], yates: bool) -> HypothesisTests {
    use Method::{MarketFinalPrice as M, SurveyMean as S};
    HypothesisTests {
        overestimation_survey: Outcome::from(overestimation_test(scores, S)),
        overestimation_market: Outcome::from(overestimation_test(scores, M)),
        error_difference: Outcome::from(error_difference_test(scores, S, M)),
        extremeness: Outcome::from(extremeness_test(scores, M, S)),
        accuracy_market_vs_survey: Outcome::from(accuracy_comparison(scores, M, S, yates)),
        asymmetry: asymmetry_tests(scores, &[M, S], yates),
    }
}

/// Runs every analysis on a validated dataset.
pub fn reproduce(ds: &Dataset, validation: &ValidationReport, cfg: &AnalysisConfig) -> Reproduction {
    let aggregates = aggregate_all(
        ds,
        &AggregateConfig {
            methods: cfg.methods.clone(),
            threshold: cfg.threshold,
            weight_scope: cfg.weight_scope,
        },
    );
    let scores = score(&aggregates.forecasts, ds, cfg.threshold).expect("aggregates only reference known findings");
    let summaries = summarize(&scores, ds);
    let tests = hypothesis_tests(&scores, cfg.yates);
    let pvalue = Outcome::from(pvalue_regression(ds));
    let dynamics = analyze_dynamics(ds, cfg);
    let counts = DatasetCounts::of(ds);
    let mut rep = Reproduction {
        config: cfg.clone(),
        counts,
        validation_errors: validation.error_count(),
        validation_warnings: validation.warnings().count(),
        summaries,
        tests,
        pvalue,
        dynamics,
        discrepancies: Vec::new(),
        aggregates,
        scores,
    };
    rep.discrepancies = discrepancies(&rep);
    rep
}

fn compare(out: &mut Vec<Discrepancy>, key: impl Into<String>, published: f64, computed: Option<f64>, note: &str) {
    out.push(Discrepancy {
        key: key.into(),
        published,
        computed,
        delta: computed.map(|c| c - published),
        note: note.to_string(),
    });
}

fn stat(t: &Outcome<TestResult>) -> Option<f64> {
    t.ok().map(|r| r.statistic)
}

/// Computed-minus-published deltas for every reference value.
pub fn discrepancies(rep: &Reproduction) -> Vec<Discrepancy> {
    use published as p;
    let mut out = Vec::new();
    let pooled = rep.pooled();
    let m = |s: &ProjectSummary, method: Method| s.methods.get(&method).cloned();

    compare(&mut out, "pooled.findings", p::FINDINGS as f64, Some(rep.counts.findings as f64), "");
    compare(&mut out, "pooled.trades", p::TRADES as f64, Some(rep.counts.trades as f64), "");
    compare(&mut out, "pooled.survey_responses", p::SURVEY_RESPONSES as f64, Some(rep.counts.surveys as f64), "");
    compare(&mut out, "pooled.replicated", p::REPLICATED as f64, Some(pooled.n_replicated as f64), "");
    for (project, n, rep_count) in p::PROJECT_COUNTS {
        if let Some(s) = rep.summary(Group::Project(project)) {
            compare(&mut out, format!("{project}.findings"), n as f64, Some(s.n_findings as f64), "");
            compare(&mut out, format!("{project}.replicated"), rep_count as f64, Some(s.n_replicated as f64), "");
        }
    }

    let market = m(pooled, Method::MarketFinalPrice);
    let survey = m(pooled, Method::SurveyMean);
    compare(&mut out, "pooled.market.mean", p::MARKET_MEAN, market.as_ref().map(|s| s.mean_forecast), "");
    compare(&mut out, "pooled.market.sd", p::SD_MARKET, market.as_ref().and_then(|s| s.sd_forecast), "");
    compare(&mut out, "pooled.market.mae", p::MARKET_MAE, market.as_ref().map(|s| s.mae), "");
    let market_correct = market.as_ref().map(|s| s.n_correct as f64);
    compare(
        &mut out,
        "pooled.market.correct(table)",
        p::MARKET_CORRECT_TABLE as f64,
        market_correct,
        "summary table value; the text reports 75",
    );
    compare(
        &mut out,
        "pooled.market.correct(text)",
        p::MARKET_CORRECT_TEXT as f64,
        market_correct,
        "text value; the summary table reports 76",
    );
    compare(&mut out, "pooled.survey.mean", p::SURVEY_MEAN, survey.as_ref().map(|s| s.mean_forecast), "");
    compare(&mut out, "pooled.survey.sd", p::SURVEY_SD, survey.as_ref().and_then(|s| s.sd_forecast), "");
    compare(&mut out, "pooled.survey.mae", p::SURVEY_MAE, survey.as_ref().map(|s| s.mae), "");
    compare(&mut out, "pooled.survey.correct", p::SURVEY_CORRECT as f64, survey.as_ref().map(|s| s.n_correct as f64), "");
    compare(&mut out, "pooled.spearman.market_survey", p::SPEARMAN_MARKET_SURVEY, pooled.spearman_market_survey, "");
    compare(&mut out, "pooled.pearson.market_survey", p::PEARSON_MARKET_SURVEY, pooled.pearson_market_survey, "");
    compare(&mut out, "pooled.spearman.outcome_market", p::SPEARMAN_OUTCOME_MARKET, market.as_ref().and_then(|s| s.spearman_outcome), "");
    compare(&mut out, "pooled.spearman.outcome_survey", p::SPEARMAN_OUTCOME_SURVEY, survey.as_ref().and_then(|s| s.spearman_outcome), "");
    compare(&mut out, "pooled.pearson.outcome_market", p::PEARSON_OUTCOME_MARKET, market.as_ref().and_then(|s| s.pearson_outcome), "");
    compare(
        &mut out,
        "pooled.pearson.outcome_survey",
        p::PEARSON_OUTCOME_SURVEY,
        survey.as_ref().and_then(|s| s.pearson_outcome),
        "reported as a Pearson correlation; the summary table's Spearman is 0.557",
    );

    for (project, mm, mc, mmae, sm, sc, smae, rs_ms, rs_om, rs_os) in p::PROJECT_ROWS {
        let Some(s) = rep.summary(Group::Project(project)) else { continue };
        let pm = m(s, Method::MarketFinalPrice);
        let ps = m(s, Method::SurveyMean);
        compare(&mut out, format!("{project}.market.mean"), mm, pm.as_ref().map(|x| x.mean_forecast), "");
        compare(&mut out, format!("{project}.market.correct"), mc as f64, pm.as_ref().map(|x| x.n_correct as f64), "");
        compare(&mut out, format!("{project}.market.mae"), mmae, pm.as_ref().map(|x| x.mae), "");
        compare(&mut out, format!("{project}.survey.mean"), sm, ps.as_ref().map(|x| x.mean_forecast), "");
        compare(&mut out, format!("{project}.survey.correct"), sc as f64, ps.as_ref().map(|x| x.n_correct as f64), "");
        compare(&mut out, format!("{project}.survey.mae"), smae, ps.as_ref().map(|x| x.mae), "");
        compare(&mut out, format!("{project}.spearman.market_survey"), rs_ms, s.spearman_market_survey, "");
        compare(&mut out, format!("{project}.spearman.outcome_market"), rs_om, pm.as_ref().and_then(|x| x.spearman_outcome), "");
        compare(&mut out, format!("{project}.spearman.outcome_survey"), rs_os, ps.as_ref().and_then(|x| x.spearman_outcome), "");
    }

    let t = &rep.tests;
    compare(&mut out, "test.outcome_vs_survey.t", p::T_OUTCOME_SURVEY, stat(&t.overestimation_survey), "");
    compare(&mut out, "test.outcome_vs_survey.p", p::P_OUTCOME_SURVEY, t.overestimation_survey.ok().map(|r| r.p_value), "");
    compare(&mut out, "test.outcome_vs_market.t", p::T_OUTCOME_MARKET, stat(&t.overestimation_market), "");
    compare(&mut out, "test.outcome_vs_market.p", p::P_OUTCOME_MARKET, t.overestimation_market.ok().map(|r| r.p_value), "");
    compare(&mut out, "test.error_difference.t", p::T_ERROR_DIFFERENCE, stat(&t.error_difference), "survey minus market absolute errors");
    compare(&mut out, "test.extremeness.t", p::T_EXTREMENESS, stat(&t.extremeness), "market minus survey extremeness");
    compare(&mut out, "test.accuracy_chi2", p::CHI2_ACCURACY, stat(&t.accuracy_market_vs_survey), "");
    compare(&mut out, "test.accuracy_chi2.p", p::P_CHI2_ACCURACY, t.accuracy_market_vs_survey.ok().map(|r| r.p_value), "");
    for a in &t.asymmetry {
        let (published_chi, quads, label) = match a.method {
            Method::MarketFinalPrice => (p::CHI2_ASYMMETRY_MARKET, p::MARKET_QUADRANTS, "market"),
            Method::SurveyMean => (p::CHI2_ASYMMETRY_SURVEY, p::SURVEY_QUADRANTS, "survey"),
            _ => continue,
        };
        let q = a.quadrants;
        compare(&mut out, format!("asymmetry.{label}.chi2"), published_chi, a.test.map(|r| r.statistic), "");
        let note = if quads.0 + quads.2 != p::FINDINGS {
            "reported quadrants sum to 104, not 103"
        } else {
            ""
        };
        compare(&mut out, format!("asymmetry.{label}.predicted_fail"), quads.0 as f64, Some(q.predicted_fail() as f64), note);
        compare(&mut out, format!("asymmetry.{label}.predicted_fail_replicated"), quads.1 as f64, Some(q.predicted_fail_did as f64), "");
        compare(&mut out, format!("asymmetry.{label}.predicted_replicate"), quads.2 as f64, Some(q.predicted_replicate() as f64), note);
        compare(
            &mut out,
            format!("asymmetry.{label}.predicted_replicate_failed"),
            quads.3 as f64,
            Some(q.predicted_replicate_did_not as f64),
            "",
        );
    }

    for (method, mae, mean, sd) in [
        (Method::SurveyVoting, p::MAE_VOTING, Some(p::MEAN_VOTING), Some(p::SD_VOTING)),
        (Method::SurveyVarWeighted, p::MAE_VAR_WEIGHTED, Some(p::MEAN_VAR_WEIGHTED), Some(p::SD_VAR_WEIGHTED)),
        (Method::SurveyMedian, p::MAE_MEDIAN, Some(p::MEAN_MEDIAN), Some(p::SD_MEDIAN)),
        (Method::SurveyMean, p::MAE_MEAN, None, None),
    ] {
        let s = m(pooled, method);
        compare(&mut out, format!("aggregator.{method}.mae"), mae, s.as_ref().map(|x| x.mae), "");
        if let (Some(mean), Some(sd)) = (mean, sd) {
            compare(&mut out, format!("aggregator.{method}.mean"), mean, s.as_ref().map(|x| x.mean_forecast), "");
            compare(&mut out, format!("aggregator.{method}.sd"), sd, s.as_ref().and_then(|x| x.sd_forecast), "");
        }
    }

    let pv = rep.pvalue.ok();
    compare(&mut out, "pvalue.intercept", p::OLS_INTERCEPT, pv.map(|a| a.fit.intercept), "");
    compare(&mut out, "pvalue.se_intercept", p::OLS_SE_INTERCEPT, pv.map(|a| a.fit.se_intercept), "");
    compare(&mut out, "pvalue.slope", p::OLS_SLOPE, pv.map(|a| a.fit.slope), "");
    compare(&mut out, "pvalue.se_slope", p::OLS_SE_SLOPE, pv.map(|a| a.fit.se_slope), "");
    compare(&mut out, "pvalue.r_squared", p::OLS_R_SQUARED, pv.map(|a| a.fit.r_squared), "");
    let rate = |c: PValueCategory| pv.and_then(|a| a.rates.iter().find(|r| r.category == c).map(|r| r.rate));
    compare(&mut out, "pvalue.rate_at_or_below", p::RATE_AT_OR_BELOW, rate(PValueCategory::AtOrBelowThreshold), "");
    compare(&mut out, "pvalue.rate_above", p::RATE_ABOVE, rate(PValueCategory::AboveThreshold), "");

    let d = &rep.dynamics;
    compare(
        &mut out,
        "dynamics.trades_to_90_percent",
        p::TRADES_TO_90_PERCENT,
        d.milestone(Axis::TradeIndex, 0.9).map(|m| m.x_at_fraction),
        "LOESS configuration of the original analysis is unknown",
    );
    compare(
        &mut out,
        "dynamics.hours_to_90_percent",
        p::HOURS_TO_90_PERCENT,
        d.milestone(Axis::HoursSinceOpen, 0.9).map(|m| m.x_at_fraction),
        "LOESS configuration of the original analysis is unknown",
    );
    compare(
        &mut out,
        "dynamics.share_in_first_hour",
        p::SHARE_IN_FIRST_HOUR,
        share_by(d, Axis::HoursSinceOpen, 1.0, rep.config.reduction_base),
        "",
    );
    compare(
        &mut out,
        "dynamics.min_trades_per_market",
        p::MIN_TRADES_PER_MARKET as f64,
        Some(rep.counts.min_trades_per_market as f64),
        "",
    );
    compare(
        &mut out,
        "dynamics.max_trades_per_market",
        p::MAX_TRADES_PER_MARKET as f64,
        Some(rep.counts.max_trades_per_market as f64),
        "",
    );
    out
}

/// Fraction of the total smoothed reduction achieved by `x`.
pub fn share_by(d: &DynamicsReport, axis: Axis, x: f64, base: ReductionBase) -> Option<f64> {
    let curve = match axis {
        Axis::TradeIndex => d.trades.curve.ok()?,
        Axis::HoursSinceOpen => d.hours.curve.ok()?,
    };
    let pts = curve.xy();
    let first = pts.first()?.1;
    let floor = match base {
        ReductionBase::Minimum => pts.iter().map(|p| p.1).fold(f64::INFINITY, f64::min),
        ReductionBase::Final => pts.last()?.1,
    };
    let total = first - floor;
    if !(total > 0.0) {
        return None;
    }
    let y = interpolate(&pts, x)?;
    Some((first - y) / total)
}

fn interpolate(pts: &[(f64, f64)], x: f64) -> Option<f64> {
    if x <= pts.first()?.0 {
        return Some(pts[0].1);
    }
    for w in pts.windows(2) {
        let ((x0, y0), (x1, y1)) = (w[0], w[1]);
        if x <= x1 {
            return Some(y0 + (x - x0) / (x1 - x0) * (y1 - y0));
        }
    }
    pts.last().map(|p| p.1)
}

fn fmt4(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "NA".into())
}

fn count_pct(n: Option<usize>, of: usize) -> String {
    match n {
        Some(n) if of > 0 => format!("{n} ({:.1}%)", 100.0 * n as f64 / of as f64),
        Some(n) => n.to_string(),
        None => "NA".into(),
    }
}

/// Project-by-column summary table, one metric per row.
pub fn write_table1<W: Write>(rep: &Reproduction, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["metric".to_string()];
    header.extend(rep.summaries.iter().map(|s| s.group.to_string()));
    w.write_record(&header)?;
    let row = |w: &mut csv::Writer<W>, name: &str, f: &dyn Fn(&ProjectSummary) -> String| -> csv::Result<()> {
        let mut r = vec![name.to_string()];
        r.extend(rep.summaries.iter().map(f));
        w.write_record(&r)
    };
    row(&mut w, "findings", &|s| s.n_findings.to_string())?;
    row(&mut w, "successful_replications", &|s| count_pct(Some(s.n_replicated), s.n_findings))?;
    for method in &rep.config.methods {
        let get = |s: &ProjectSummary| s.methods.get(method).cloned();
        row(&mut w, &format!("mean_belief.{method}"), &|s| fmt4(get(s).map(|x| x.mean_forecast)))?;
        row(&mut w, &format!("sd_belief.{method}"), &|s| fmt4(get(s).and_then(|x| x.sd_forecast)))?;
        row(&mut w, &format!("correct.{method}"), &|s| count_pct(get(s).map(|x| x.n_correct), s.n_findings))?;
        row(&mut w, &format!("mae.{method}"), &|s| fmt4(get(s).map(|x| x.mae)))?;
        row(&mut w, &format!("spearman_outcome.{method}"), &|s| fmt4(get(s).and_then(|x| x.spearman_outcome)))?;
        row(&mut w, &format!("pearson_outcome.{method}"), &|s| fmt4(get(s).and_then(|x| x.pearson_outcome)))?;
    }
    row(&mut w, "spearman.market_survey", &|s| fmt4(s.spearman_market_survey))?;
    row(&mut w, "pearson.market_survey", &|s| fmt4(s.pearson_market_survey))?;
    w.flush()?;
    Ok(())
}

/// Regression of outcome on p-value category.
pub fn write_table2<W: Write>(analysis: &PValueAnalysis, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["term", "estimate", "std_error", "t", "p_value"])?;
    for (term, est, se, test) in [
        ("intercept", analysis.fit.intercept, analysis.fit.se_intercept, analysis.intercept_test),
        ("p_at_or_below_threshold", analysis.fit.slope, analysis.fit.se_slope, analysis.slope_test),
    ] {
        w.write_record([
            term.to_string(),
            format!("{est:.4}"),
            format!("{se:.4}"),
            format!("{:.4}", test.statistic),
            format!("{:.3e}", test.p_value),
        ])?;
    }
    w.write_record(["observations", &analysis.fit.n.to_string(), "", "", ""])?;
    w.write_record(["r_squared", &format!("{:.4}", analysis.fit.r_squared), "", "", ""])?;
    w.write_record(["pearson_r", &fmt4(analysis.pearson_r), "", "", ""])?;
    for r in &analysis.rates {
        w.write_record([
            format!("replication_rate.{}", r.category.as_str()),
            format!("{:.4}", r.rate),
            format!("{}/{}", r.n_replicated, r.n),
            String::new(),
            String::new(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_discrepancies<W: Write>(items: &[Discrepancy], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["key", "published", "computed", "delta", "note"])?;
    for d in items {
        w.write_record([
            d.key.clone(),
            d.published.to_string(),
            d.computed.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
            d.delta.map(|v| v.to_string()).unwrap_or_else(|| "NA".into()),
            d.note.clone(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Final market price against survey mean per finding (scatter data).
pub fn write_market_vs_survey<W: Write>(rep: &Reproduction, ds: &Dataset, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["finding_id", "project", "outcome", "market_final_price", "survey_mean"])?;
    let by_id: BTreeMap<(&str, Method), f64> = rep
        .aggregates
        .forecasts
        .iter()
        .map(|f| ((f.finding_id.as_str(), f.method), f.value))
        .collect();
    for f in ds.findings() {
        let get = |m| by_id.get(&(f.finding_id.as_str(), m)).map(|v: &f64| v.to_string()).unwrap_or_else(|| "NA".into());
        w.write_record([
            f.finding_id.clone(),
            f.project.to_string(),
            (f.outcome() as u8).to_string(),
            get(Method::MarketFinalPrice),
            get(Method::SurveyMean),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Projects present, in canonical order.
pub fn projects(ds: &Dataset) -> Vec<Project> {
    Project::ALL
        .into_iter()
        .filter(|p| ds.findings().iter().any(|f| f.project == *p))
        .collect()
}
