//! End-to-end runs behind each command-line subcommand. Every run reads the
//! three input tables, does its analysis and writes its files into one
//! output directory. Outputs depend only on the inputs and the config.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::dataset::{
    format_timestamp, load_dataset, validate_with, write_dataset, ColumnMapping, Dataset, DatasetError, DatasetPaths,
    LoadCounts, LoadOptions, ValidationOptions, ValidationReport, DEFAULT_PVALUE_THRESHOLD,
};
use crate::evaluate::{score, summarize, write_scores_csv, ProjectSummary};
use crate::lmsr::{replay, MarketError, ReplayMode};
use crate::report::{analyze_dynamics, hypothesis_tests, reproduce, AnalysisConfig, DynamicsReport, HypothesisTests, Outcome};
use crate::synth::{generate, SynthConfig};

/// Environment variable naming the default input directory.
pub const DATA_DIR_ENV: &str = "REPLIMARKET_DATA_DIR";

pub const AGGREGATES_FILE: &str = "aggregates.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const TABLE1_FILE: &str = "table1.csv";
pub const TABLE2_FILE: &str = "table2.csv";
pub const CURVE_TRADES_FILE: &str = "curve_trades.csv";
pub const CURVE_HOURS_FILE: &str = "curve_hours.csv";
pub const DISCREPANCIES_FILE: &str = "discrepancies.csv";
pub const MARKET_VS_SURVEY_FILE: &str = "market_vs_survey.csv";
pub const REPLAY_FILE: &str = "replay.csv";
pub const REPORT_FILE: &str = "report.json";
pub const VALIDATION_FILE: &str = "validation.json";
pub const EVALUATION_FILE: &str = "evaluation.json";
pub const DYNAMICS_FILE: &str = "dynamics.json";
pub const PVALUE_FILE: &str = "pvalue.json";

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Market(#[from] MarketError),
    #[error("{0}")]
    Analysis(String),
    #[error("writing {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("writing {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("serializing {path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub inputs: DatasetPaths,
    pub mapping: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub analysis: AnalysisConfig,
    pub pvalue_threshold: f64,
}

impl RunConfig {
    pub fn new(inputs: DatasetPaths, out_dir: impl Into<PathBuf>) -> Self {
        RunConfig {
            inputs,
            mapping: None,
            out_dir: out_dir.into(),
            analysis: AnalysisConfig::default(),
            pvalue_threshold: DEFAULT_PVALUE_THRESHOLD,
        }
    }

    pub fn check(&self) -> Result<(), PipelineError> {
        let t = self.analysis.threshold;
        if !(t > 0.0 && t < 1.0) {
            return Err(PipelineError::Config(format!("threshold {t} must lie in (0, 1)")));
        }
        if !(self.pvalue_threshold > 0.0) {
            return Err(PipelineError::Config(format!(
                "p-value threshold {} must be positive",
                self.pvalue_threshold
            )));
        }
        if self.analysis.methods.is_empty() {
            return Err(PipelineError::Config("no aggregation method selected".into()));
        }
        Ok(())
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>), PipelineError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(name);
    let file = File::create(&path).map_err(io_err(&path))?;
    Ok((path, BufWriter::new(file)))
}

fn write_csv_file(
    dir: &Path,
    name: &str,
    f: impl FnOnce(&mut BufWriter<File>) -> csv::Result<()>,
) -> Result<PathBuf, PipelineError> {
    let (path, mut w) = create(dir, name)?;
    f(&mut w).map_err(|source| PipelineError::Csv {
        path: path.clone(),
        source,
    })?;
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

fn write_json_file<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, PipelineError> {
    let (path, mut w) = create(dir, name)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|source| PipelineError::Json {
        path: path.clone(),
        source,
    })?;
    w.write_all(b"\n").map_err(io_err(&path))?;
    w.flush().map_err(io_err(&path))?;
    Ok(path)
}

/// The loaded dataset together with what the loader and validator found.
#[derive(Debug, Clone)]
pub struct Input {
    pub dataset: Dataset,
    pub counts: LoadCounts,
    pub report: ValidationReport,
}

pub fn load(cfg: &RunConfig) -> Result<Input, PipelineError> {
    cfg.check()?;
    let mapping = match &cfg.mapping {
        Some(p) => ColumnMapping::from_path(p)?,
        None => ColumnMapping::default(),
    };
    let loaded = load_dataset(
        &cfg.inputs,
        &LoadOptions {
            mapping,
            pvalue_threshold: cfg.pvalue_threshold,
        },
    )?;
    let mut report = loaded.report;
    let post = validate_with(
        &loaded.dataset,
        &ValidationOptions {
            pvalue_threshold: Some(cfg.pvalue_threshold),
            expected_findings: None,
        },
    );
    for issue in post.issues {
        if !report.issues.contains(&issue) {
            report.issues.push(issue);
        }
    }
    Ok(Input {
        dataset: loaded.dataset,
        counts: loaded.counts,
        report,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ValidationSummary {
    pub counts: LoadCounts,
    pub errors: usize,
    pub warnings: usize,
    pub report: ValidationReport,
}

/// Loads and validates the inputs and writes `validation.json`.
pub fn run_validate(cfg: &RunConfig) -> Result<ValidationSummary, PipelineError> {
    let input = load(cfg)?;
    let summary = ValidationSummary {
        counts: input.counts,
        errors: input.report.error_count(),
        warnings: input.report.warnings().count(),
        report: input.report,
    };
    write_json_file(&cfg.out_dir, VALIDATION_FILE, &summary)?;
    Ok(summary)
}

/// Writes every market's price path as `finding_id,index,timestamp,price_yes`.
/// Markets without trades are skipped.
pub fn run_replay(cfg: &RunConfig, mode: ReplayMode) -> Result<usize, PipelineError> {
    let input = load(cfg)?;
    let ds = &input.dataset;
    let mut series = Vec::new();
    for f in ds.findings() {
        match replay(ds, &f.finding_id, mode) {
            Ok(s) => series.push(s),
            Err(MarketError::EmptyMarket(_)) => {}
            Err(e) => return Err(e.into()),
        }
    }
    write_csv_file(&cfg.out_dir, REPLAY_FILE, |out| {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["finding_id", "index", "timestamp", "price_yes"])?;
        for s in &series {
            for (i, p) in s.points.iter().enumerate() {
                w.write_record([
                    s.finding_id.clone(),
                    (i + 1).to_string(),
                    format_timestamp(p.timestamp),
                    p.price_yes.to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    })?;
    Ok(series.len())
}

fn aggregate_config(cfg: &RunConfig) -> crate::aggregate::AggregateConfig {
    crate::aggregate::AggregateConfig {
        methods: cfg.analysis.methods.clone(),
        threshold: cfg.analysis.threshold,
        weight_scope: cfg.analysis.weight_scope,
    }
}

/// Writes `aggregates.csv`. Returns the number of forecasts and of
/// (finding, method) pairs that could not be computed.
pub fn run_aggregate(cfg: &RunConfig) -> Result<(usize, usize), PipelineError> {
    let input = load(cfg)?;
    let table = crate::aggregate::aggregate_all(&input.dataset, &aggregate_config(cfg));
    write_csv_file(&cfg.out_dir, AGGREGATES_FILE, |w| table.write_csv(w))?;
    Ok((table.forecasts.len(), table.failures.len()))
}

#[derive(Debug, Clone, Serialize)]
pub struct Evaluation {
    pub summaries: Vec<ProjectSummary>,
    pub tests: HypothesisTests,
}

/// Writes `aggregates.csv`, `scores.csv` and `evaluation.json`.
pub fn run_evaluate(cfg: &RunConfig) -> Result<Evaluation, PipelineError> {
    let input = load(cfg)?;
    let ds = &input.dataset;
    let table = crate::aggregate::aggregate_all(ds, &aggregate_config(cfg));
    let scores = score(&table.forecasts, ds, cfg.analysis.threshold).map_err(|e| PipelineError::Analysis(e.to_string()))?;
    write_csv_file(&cfg.out_dir, AGGREGATES_FILE, |w| table.write_csv(w))?;
    write_csv_file(&cfg.out_dir, SCORES_FILE, |w| write_scores_csv(&scores, w))?;
    let eval = Evaluation {
        summaries: summarize(&scores, ds),
        tests: hypothesis_tests(&scores, cfg.analysis.yates),
    };
    write_json_file(&cfg.out_dir, EVALUATION_FILE, &eval)?;
    Ok(eval)
}

fn write_curves(dir: &Path, d: &DynamicsReport) -> Result<(), PipelineError> {
    for (name, curve) in [(CURVE_TRADES_FILE, &d.trades.curve), (CURVE_HOURS_FILE, &d.hours.curve)] {
        if let Outcome::Ok(c) = curve {
            write_csv_file(dir, name, |w| c.write_csv(w))?;
        }
    }
    Ok(())
}

/// Writes the smoothed error curves and `dynamics.json`.
pub fn run_dynamics(cfg: &RunConfig) -> Result<DynamicsReport, PipelineError> {
    let input = load(cfg)?;
    let d = analyze_dynamics(&input.dataset, &cfg.analysis);
    write_curves(&cfg.out_dir, &d)?;
    write_json_file(&cfg.out_dir, DYNAMICS_FILE, &d)?;
    Ok(d)
}

/// Writes `table2.csv` and `pvalue.json`.
pub fn run_pvalue(cfg: &RunConfig) -> Result<crate::evaluate::PValueAnalysis, PipelineError> {
    let input = load(cfg)?;
    let analysis =
        crate::evaluate::pvalue_regression(&input.dataset).map_err(|e| PipelineError::Analysis(e.to_string()))?;
    write_csv_file(&cfg.out_dir, TABLE2_FILE, |w| crate::report::write_table2(&analysis, w))?;
    write_json_file(&cfg.out_dir, PVALUE_FILE, &analysis)?;
    Ok(analysis)
}

/// Runs everything and writes every table, curve and the structured report.
pub fn run_report(cfg: &RunConfig) -> Result<crate::report::Reproduction, PipelineError> {
    let input = load(cfg)?;
    let ds = &input.dataset;
    let rep = reproduce(ds, &input.report, &cfg.analysis);
    let dir = &cfg.out_dir;
    write_csv_file(dir, AGGREGATES_FILE, |w| rep.aggregates.write_csv(w))?;
    write_csv_file(dir, SCORES_FILE, |w| write_scores_csv(&rep.scores, w))?;
    write_csv_file(dir, TABLE1_FILE, |w| crate::report::write_table1(&rep, w))?;
    if let Outcome::Ok(a) = &rep.pvalue {
        write_csv_file(dir, TABLE2_FILE, |w| crate::report::write_table2(a, w))?;
    }
    write_curves(dir, &rep.dynamics)?;
    write_csv_file(dir, DISCREPANCIES_FILE, |w| crate::report::write_discrepancies(&rep.discrepancies, w))?;
    write_csv_file(dir, MARKET_VS_SURVEY_FILE, |w| crate::report::write_market_vs_survey(&rep, ds, w))?;
    write_json_file(dir, REPORT_FILE, &rep)?;
    Ok(rep)
}

/// Generates a synthetic dataset and writes it as the three canonical tables.
pub fn run_synth(cfg: &SynthConfig, out_dir: &Path) -> Result<DatasetPaths, PipelineError> {
    if cfg.markets == 0 {
        return Err(PipelineError::Config("at least one market is required".into()));
    }
    let ds = generate(cfg)?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    Ok(write_dataset(&ds, out_dir)?)
}
