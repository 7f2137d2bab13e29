//! Prediction-market and survey forecasts of replication outcomes: an LMSR
//! market engine, survey aggregation rules, forecast scoring with the
//! associated hypothesis tests, and market-dynamics smoothing.
//!
//! The input is three CSV tables (findings with outcomes, survey responses,
//! market trades). See [`dataset`] for the schema and [`pipeline`] for the
//! end-to-end runs behind the command-line tool.

pub mod aggregate;
pub mod dataset;
pub mod dynamics;
pub mod evaluate;
pub mod lmsr;
pub mod pipeline;
pub mod report;
pub mod stats;
pub mod synth;

pub use aggregate::{aggregate_all, AggregateConfig, AggregateForecast, AggregateTable, Method};
pub use dataset::{
    load_dataset, validate, write_dataset, ColumnMapping, Dataset, DatasetError, DatasetPaths, Finding, LoadOptions,
    PValueCategory, Project, Side, SurveyResponse, Trade, ValidationReport,
};
pub use dynamics::{loess, LoessConfig};
pub use evaluate::{score, summarize, ScoreRow};
pub use lmsr::{replay, Lmsr, MarketError, MarketState, ReplayMode};
pub use report::{reproduce, AnalysisConfig, Reproduction};
pub use stats::TestResult;
