use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use replimarket::aggregate::{Method, WeightScope};
use replimarket::dataset::{DatasetPaths, OUTCOMES_FILE, SURVEYS_FILE, TRADES_FILE};
use replimarket::dynamics::LoessConfig;
use replimarket::lmsr::{ReplayMode, DEFAULT_LIQUIDITY};
use replimarket::pipeline::{self, PipelineError, RunConfig, DATA_DIR_ENV};
use replimarket::report::AnalysisConfig;
use replimarket::synth::SynthConfig;

#[derive(Parser)]
#[command(name = "replimarket", version, about = "Replication forecasts from prediction markets and surveys")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check the input tables and list every invariant violation.
    Validate(Common),
    /// Rebuild each market's price path.
    Replay {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "price-taking")]
        mode: Mode,
        /// Liquidity parameter for simulated replay.
        #[arg(long, default_value_t = DEFAULT_LIQUIDITY)]
        liquidity: f64,
    },
    /// Compute one forecast per finding for each aggregation method.
    Aggregate(Common),
    /// Score forecasts against outcomes and run the comparison tests.
    Evaluate(Common),
    /// Smoothed mean absolute error against trade index and time.
    Dynamics(Common),
    /// Regress outcomes on the original p-value category.
    Pvalue(Common),
    /// Run everything and compare against the published values.
    Report(Common),
    /// Write a synthetic dataset generated by the market engine.
    Synth {
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 12)]
        markets: usize,
        #[arg(long, default_value_t = 40)]
        traders: usize,
        #[arg(long, default_value = "synth")]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    PriceTaking,
    Simulated,
}

#[derive(Args)]
struct Common {
    /// Directory holding outcomes.csv, surveys.csv and trades.csv.
    #[arg(long, env = DATA_DIR_ENV)]
    data_dir: Option<PathBuf>,
    #[arg(long)]
    trades: Option<PathBuf>,
    #[arg(long)]
    surveys: Option<PathBuf>,
    #[arg(long)]
    outcomes: Option<PathBuf>,
    /// TOML file renaming columns.
    #[arg(long)]
    mapping: Option<PathBuf>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Aggregation methods, comma separated (default: all).
    #[arg(long, value_delimiter = ',')]
    method: Vec<Method>,
    #[arg(long, default_value_t = replimarket::aggregate::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, default_value_t = 0.75)]
    loess_span: f64,
    #[arg(long, default_value_t = 2)]
    loess_degree: usize,
    #[arg(long, default_value_t = replimarket::dataset::DEFAULT_PVALUE_THRESHOLD)]
    pvalue_threshold: f64,
    /// Apply the continuity correction to 2x2 chi-square tests.
    #[arg(long)]
    yates: bool,
    /// Fit variance weights within each project instead of pooled.
    #[arg(long)]
    per_project_weights: bool,
    /// Hours after open beyond which late trades are down-weighted.
    #[arg(long, default_value_t = 168.0)]
    late_cutoff_hours: f64,
    /// Accepted for symmetry with `synth`; analyses are deterministic.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn config(&self) -> Result<RunConfig, PipelineError> {
        let dir = self.data_dir.clone();
        let pick = |explicit: &Option<PathBuf>, name: &str| -> Result<PathBuf, PipelineError> {
            match (explicit, &dir) {
                (Some(p), _) => Ok(p.clone()),
                (None, Some(d)) => Ok(d.join(name)),
                (None, None) => Err(PipelineError::Config(format!(
                    "no path for {name}: pass --data-dir, set {DATA_DIR_ENV}, or give the file explicitly"
                ))),
            }
        };
        let inputs = DatasetPaths {
            outcomes: pick(&self.outcomes, OUTCOMES_FILE)?,
            surveys: pick(&self.surveys, SURVEYS_FILE)?,
            trades: pick(&self.trades, TRADES_FILE)?,
        };
        let mut cfg = RunConfig::new(inputs, &self.out);
        cfg.mapping = self.mapping.clone();
        cfg.pvalue_threshold = self.pvalue_threshold;
        cfg.analysis = AnalysisConfig {
            methods: if self.method.is_empty() {
                Method::ALL.to_vec()
            } else {
                self.method.clone()
            },
            threshold: self.threshold,
            weight_scope: if self.per_project_weights {
                WeightScope::PerProject
            } else {
                WeightScope::Pooled
            },
            loess: LoessConfig {
                span: self.loess_span,
                degree: self.loess_degree,
                ..LoessConfig::default()
            },
            yates: self.yates,
            late_cutoff_hours: self.late_cutoff_hours,
            ..AnalysisConfig::default()
        };
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<ExitCode, PipelineError> {
    match cli.command {
        Command::Validate(c) => {
            let s = pipeline::run_validate(&c.config()?)?;
            for issue in &s.report.issues {
                eprintln!("{issue}");
            }
            println!("{} errors, {} warnings", s.errors, s.warnings);
            return Ok(if s.errors > 0 { ExitCode::from(2) } else { ExitCode::SUCCESS });
        }
        Command::Replay { common, mode, liquidity } => {
            let mode = match mode {
                Mode::PriceTaking => ReplayMode::PriceTaking,
                Mode::Simulated => ReplayMode::Simulated { liquidity_b: liquidity },
            };
            let n = pipeline::run_replay(&common.config()?, mode)?;
            println!("replayed {n} markets");
        }
        Command::Aggregate(c) => {
            let (ok, failed) = pipeline::run_aggregate(&c.config()?)?;
            println!("{ok} forecasts, {failed} not computable");
        }
        Command::Evaluate(c) => {
            let e = pipeline::run_evaluate(&c.config()?)?;
            println!("{} summary groups", e.summaries.len());
        }
        Command::Dynamics(c) => {
            pipeline::run_dynamics(&c.config()?)?;
        }
        Command::Pvalue(c) => {
            let a = pipeline::run_pvalue(&c.config()?)?;
            println!(
                "slope {:.4} (SE {:.4}), intercept {:.4} (SE {:.4}), R^2 {:.4}, n {}",
                a.fit.slope, a.fit.se_slope, a.fit.intercept, a.fit.se_intercept, a.fit.r_squared, a.fit.n
            );
        }
        Command::Report(c) => {
            let rep = pipeline::run_report(&c.config()?)?;
            let p = rep.pooled();
            println!("{} findings, {} replicated", p.n_findings, p.n_replicated);
        }
        Command::Synth {
            seed,
            markets,
            traders,
            out,
        } => {
            let cfg = SynthConfig {
                seed,
                markets,
                traders,
                ..SynthConfig::default()
            };
            pipeline::run_synth(&cfg, &out)?;
            println!("wrote {markets} markets to {}", out.display());
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::FAILURE
        }
    }
}
