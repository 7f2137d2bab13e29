//! Per-finding aggregation of raw forecasts: final market price and four
//! survey pooling rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{Dataset, DatasetError, Project};
use crate::stats;

/// Forecasts at or above this value count as predicting replication.
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error, PartialEq)]
pub enum AggregateError {
    #[error("market `{0}` has no trades")]
    EmptyMarket(String),
    #[error("finding `{0}` has no survey responses")]
    NoSurveyResponses(String),
    #[error("every respondent of finding `{0}` has zero weight")]
    AllWeightsZero(String),
    #[error("unknown aggregation method `{0}`")]
    UnknownMethod(String),
    #[error("{0}")]
    Dataset(String),
}

impl From<DatasetError> for AggregateError {
    fn from(e: DatasetError) -> Self {
        AggregateError::Dataset(e.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    MarketFinalPrice,
    SurveyMean,
    SurveyMedian,
    SurveyVoting,
    SurveyVarWeighted,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::MarketFinalPrice,
        Method::SurveyMean,
        Method::SurveyMedian,
        Method::SurveyVoting,
        Method::SurveyVarWeighted,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::MarketFinalPrice => "market_final_price",
            Method::SurveyMean => "survey_mean",
            Method::SurveyMedian => "survey_median",
            Method::SurveyVoting => "survey_voting",
            Method::SurveyVarWeighted => "survey_var_weighted",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = AggregateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace('-', "_").as_str() {
            "market_final_price" | "market" => Ok(Method::MarketFinalPrice),
            "survey_mean" | "mean" => Ok(Method::SurveyMean),
            "survey_median" | "median" => Ok(Method::SurveyMedian),
            "survey_voting" | "voting" => Ok(Method::SurveyVoting),
            "survey_var_weighted" | "var_weighted" | "variance_weighted" => Ok(Method::SurveyVarWeighted),
            _ => Err(AggregateError::UnknownMethod(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateForecast {
    pub finding_id: String,
    pub method: Method,
    pub value: f64,
    pub n_inputs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecasterWeight {
    pub forecaster_id: String,
    /// Sample variance of the forecaster's beliefs; zero below two responses.
    pub weight: f64,
}

/// Forecaster weights keyed by forecaster id.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Weights(BTreeMap<String, f64>);

impl Weights {
    pub fn get(&self, forecaster: &str) -> f64 {
        self.0.get(forecaster).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl FromIterator<ForecasterWeight> for Weights {
    fn from_iter<I: IntoIterator<Item = ForecasterWeight>>(iter: I) -> Self {
        Weights(iter.into_iter().map(|w| (w.forecaster_id, w.weight)).collect())
    }
}

impl FromIterator<(String, f64)> for Weights {
    fn from_iter<I: IntoIterator<Item = (String, f64)>>(iter: I) -> Self {
        Weights(iter.into_iter().collect())
    }
}

// Pure pooling rules over a slice of beliefs.

pub fn pool_mean(beliefs: &[f64]) -> Option<f64> {
    stats::mean(beliefs).map(|m| m.clamp(0.0, 1.0))
}

pub fn pool_median(beliefs: &[f64]) -> Option<f64> {
    stats::median(beliefs)
}

/// Fraction of beliefs at or above `threshold`.
pub fn pool_voting(beliefs: &[f64], threshold: f64) -> Option<f64> {
    if beliefs.is_empty() {
        return None;
    }
    let votes = beliefs.iter().filter(|&&b| b >= threshold).count();
    Some(votes as f64 / beliefs.len() as f64)
}

/// Weighted mean over `(belief, weight)` pairs; `None` when the weights sum
/// to zero.
pub fn pool_weighted(pairs: &[(f64, f64)]) -> Option<f64> {
    let total: f64 = pairs.iter().map(|&(_, w)| w).sum();
    if !(total > 0.0) {
        return None;
    }
    let v = pairs.iter().map(|&(b, w)| b * w).sum::<f64>() / total;
    Some(v.clamp(0.0, 1.0))
}

/// Last recorded price at or before the market close.
pub fn market_final_price(ds: &Dataset, finding_id: &str) -> Result<AggregateForecast, AggregateError> {
    let trades = ds.trades_before_close(finding_id)?;
    let last = trades.last().ok_or_else(|| AggregateError::EmptyMarket(finding_id.to_string()))?;
    Ok(AggregateForecast {
        finding_id: finding_id.to_string(),
        method: Method::MarketFinalPrice,
        value: last.post_trade_price,
        n_inputs: trades.len(),
    })
}

fn beliefs(ds: &Dataset, finding_id: &str) -> Result<Vec<f64>, AggregateError> {
    let b: Vec<f64> = ds.surveys_for(finding_id)?.iter().map(|s| s.belief).collect();
    if b.is_empty() {
        Err(AggregateError::NoSurveyResponses(finding_id.to_string()))
    } else {
        Ok(b)
    }
}

fn survey_forecast(
    ds: &Dataset,
    finding_id: &str,
    method: Method,
    rule: impl FnOnce(&[f64]) -> Option<f64>,
) -> Result<AggregateForecast, AggregateError> {
    let b = beliefs(ds, finding_id)?;
    let value = rule(&b).expect("nonempty input");
    Ok(AggregateForecast {
        finding_id: finding_id.to_string(),
        method,
        value,
        n_inputs: b.len(),
    })
}

pub fn survey_mean(ds: &Dataset, finding_id: &str) -> Result<AggregateForecast, AggregateError> {
    survey_forecast(ds, finding_id, Method::SurveyMean, pool_mean)
}

pub fn survey_median(ds: &Dataset, finding_id: &str) -> Result<AggregateForecast, AggregateError> {
    survey_forecast(ds, finding_id, Method::SurveyMedian, pool_median)
}

pub fn survey_voting(ds: &Dataset, finding_id: &str, threshold: f64) -> Result<AggregateForecast, AggregateError> {
    survey_forecast(ds, finding_id, Method::SurveyVoting, |b| pool_voting(b, threshold))
}

/// Sample variance of each forecaster's beliefs across every finding they
/// answered, sorted by forecaster id.
pub fn forecaster_weights(ds: &Dataset) -> Vec<ForecasterWeight> {
    weights_over(ds, |_| true)
}

/// As [`forecaster_weights`], computed separately inside each project.
pub fn forecaster_weights_by_project(ds: &Dataset) -> BTreeMap<Project, Vec<ForecasterWeight>> {
    Project::ALL
        .iter()
        .map(|&p| (p, weights_over(ds, |fp| fp == p)))
        .filter(|(_, w)| !w.is_empty())
        .collect()
}

fn weights_over(ds: &Dataset, keep: impl Fn(Project) -> bool) -> Vec<ForecasterWeight> {
    let mut by_forecaster: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for s in ds.surveys() {
        let Ok(f) = ds.finding(&s.finding_id) else { continue };
        if keep(f.project) {
            by_forecaster.entry(&s.forecaster_id).or_default().push(s.belief);
        }
    }
    by_forecaster
        .into_iter()
        .map(|(id, b)| ForecasterWeight {
            forecaster_id: id.to_string(),
            weight: stats::sample_variance(&b).unwrap_or(0.0),
        })
        .collect()
}

pub fn survey_var_weighted(ds: &Dataset, finding_id: &str, weights: &Weights) -> Result<AggregateForecast, AggregateError> {
    let responses = ds.surveys_for(finding_id)?;
    if responses.is_empty() {
        return Err(AggregateError::NoSurveyResponses(finding_id.to_string()));
    }
    let pairs: Vec<(f64, f64)> = responses.iter().map(|s| (s.belief, weights.get(&s.forecaster_id))).collect();
    let value = pool_weighted(&pairs).ok_or_else(|| AggregateError::AllWeightsZero(finding_id.to_string()))?;
    Ok(AggregateForecast {
        finding_id: finding_id.to_string(),
        method: Method::SurveyVarWeighted,
        value,
        n_inputs: pairs.iter().filter(|&&(_, w)| w > 0.0).count(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum WeightScope {
    #[default]
    Pooled,
    PerProject,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateConfig {
    pub methods: Vec<Method>,
    pub threshold: f64,
    pub weight_scope: WeightScope,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            methods: Method::ALL.to_vec(),
            threshold: DEFAULT_THRESHOLD,
            weight_scope: WeightScope::Pooled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateFailure {
    pub finding_id: String,
    pub method: Method,
    pub reason: String,
}

/// Forecasts for every (finding, method) that could be computed, in finding
/// order then method order, plus the pairs that could not.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AggregateTable {
    pub forecasts: Vec<AggregateForecast>,
    pub failures: Vec<AggregateFailure>,
}

impl AggregateTable {
    pub fn for_method(&self, method: Method) -> impl Iterator<Item = &AggregateForecast> {
        self.forecasts.iter().filter(move |f| f.method == method)
    }

    pub fn get(&self, finding_id: &str, method: Method) -> Option<&AggregateForecast> {
        self.forecasts.iter().find(|f| f.method == method && f.finding_id == finding_id)
    }

    /// Writes `finding_id,method,value,n_inputs`.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["finding_id", "method", "value", "n_inputs"])?;
        for f in &self.forecasts {
            w.write_record([f.finding_id.as_str(), f.method.as_str(), &f.value.to_string(), &f.n_inputs.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn aggregate_all(ds: &Dataset, config: &AggregateConfig) -> AggregateTable {
    let pooled: Weights = forecaster_weights(ds).into_iter().collect();
    let per_project: BTreeMap<Project, Weights> = match config.weight_scope {
        WeightScope::Pooled => BTreeMap::new(),
        WeightScope::PerProject => forecaster_weights_by_project(ds)
            .into_iter()
            .map(|(p, w)| (p, w.into_iter().collect()))
            .collect(),
    };
    let empty = Weights::default();
    let mut table = AggregateTable::default();
    for finding in ds.findings() {
        let id = finding.finding_id.as_str();
        for &method in &config.methods {
            let result = match method {
                Method::MarketFinalPrice => market_final_price(ds, id),
                Method::SurveyMean => survey_mean(ds, id),
                Method::SurveyMedian => survey_median(ds, id),
                Method::SurveyVoting => survey_voting(ds, id, config.threshold),
                Method::SurveyVarWeighted => {
                    let w = match config.weight_scope {
                        WeightScope::Pooled => &pooled,
                        WeightScope::PerProject => per_project.get(&finding.project).unwrap_or(&empty),
                    };
                    survey_var_weighted(ds, id, w)
                }
            };
            match result {
                Ok(f) => table.forecasts.push(f),
                Err(e) => table.failures.push(AggregateFailure {
                    finding_id: id.to_string(),
                    method,
                    reason: e.to_string(),
                }),
            }
        }
    }
    table
}
