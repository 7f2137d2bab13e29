//! Three-table data model: findings (outcomes), survey responses and market
//! trades, plus CSV loading, validation and canonical writing.
//!
//! Timestamps are ISO-8601 in the files and integer milliseconds since the
//! Unix epoch in memory. Rows that violate an invariant are dropped from the
//! loaded [`Dataset`] and recorded in the accompanying [`ValidationReport`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use chrono::{DateTime, NaiveDate, NaiveDateTime, TimeZone, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default significance threshold separating the two p-value categories.
pub const DEFAULT_PVALUE_THRESHOLD: f64 = 0.005;

pub const OUTCOMES_FILE: &str = "outcomes.csv";
pub const SURVEYS_FILE: &str = "surveys.csv";
pub const TRADES_FILE: &str = "trades.csv";

/// Timestamp in milliseconds since the Unix epoch (UTC).
pub type Millis = i64;

pub const MILLIS_PER_HOUR: f64 = 3_600_000.0;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error in {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
    #[error("column mapping: {0}")]
    Mapping(String),
    #[error("{table} table: column `{column}` not found in header")]
    MissingColumn { table: Table, column: String },
    #[error("{table} table, row {row}, column `{column}`: invalid value `{value}` ({reason})")]
    InvalidValue {
        table: Table,
        row: usize,
        column: String,
        value: String,
        reason: String,
    },
    #[error("{table} table, row {row}: unknown finding_id `{finding_id}`")]
    DanglingReference {
        table: Table,
        row: usize,
        finding_id: String,
    },
    #[error("{table} table, row {row}: {message}")]
    Rejected {
        table: Table,
        row: usize,
        message: String,
    },
    #[error("unknown finding `{0}`")]
    UnknownFinding(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Table {
    Outcomes,
    Surveys,
    Trades,
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Table::Outcomes => "outcomes",
            Table::Surveys => "surveys",
            Table::Trades => "trades",
        })
    }
}

/// The forecasting study a finding belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Project {
    #[serde(rename = "RPP")]
    Rpp,
    #[serde(rename = "EERP")]
    Eerp,
    #[serde(rename = "ML2")]
    Ml2,
    #[serde(rename = "SSRP")]
    Ssrp,
}

impl Project {
    pub const ALL: [Project; 4] = [Project::Rpp, Project::Eerp, Project::Ml2, Project::Ssrp];

    pub fn as_str(&self) -> &'static str {
        match self {
            Project::Rpp => "RPP",
            Project::Eerp => "EERP",
            Project::Ml2 => "ML2",
            Project::Ssrp => "SSRP",
        }
    }
}

impl fmt::Display for Project {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Project {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "RPP" => Ok(Project::Rpp),
            "EERP" => Ok(Project::Eerp),
            "ML2" => Ok(Project::Ml2),
            "SSRP" => Ok(Project::Ssrp),
            other => Err(format!("unknown project `{other}`")),
        }
    }
}

/// Strength-of-evidence category of the original finding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum PValueCategory {
    /// p above the threshold ("suggestive").
    AboveThreshold,
    /// p at or below the threshold ("significant").
    AtOrBelowThreshold,
}

impl PValueCategory {
    pub fn from_p_value(p: f64, threshold: f64) -> Self {
        if p <= threshold {
            PValueCategory::AtOrBelowThreshold
        } else {
            PValueCategory::AboveThreshold
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            PValueCategory::AboveThreshold => "above",
            PValueCategory::AtOrBelowThreshold => "at_or_below",
        }
    }
}

impl FromStr for PValueCategory {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .to_ascii_lowercase()
            .chars()
            .filter(|c| !c.is_whitespace())
            .collect();
        match norm.as_str() {
            "at_or_below" | "atorbelow" | "<=0.005" | "p<=0.005" | "p<0.005" | "<0.005"
            | "significant" | "1" => Ok(PValueCategory::AtOrBelowThreshold),
            "above" | ">0.005" | "p>0.005" | "suggestive" | "0" => Ok(PValueCategory::AboveThreshold),
            _ => Err(format!("unrecognised p-value category `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Side {
    Yes,
    No,
}

impl Side {
    pub fn as_str(&self) -> &'static str {
        match self {
            Side::Yes => "YES",
            Side::No => "NO",
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_uppercase().as_str() {
            "YES" | "Y" | "BUY_YES" => Ok(Side::Yes),
            "NO" | "N" | "BUY_NO" => Ok(Side::No),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

/// One replicated claim.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Finding {
    pub finding_id: String,
    pub project: Project,
    pub replicated: bool,
    pub p_value_category: PValueCategory,
    pub original_p_value: Option<f64>,
    pub market_open: Millis,
    pub market_close: Millis,
}

impl Finding {
    /// Outcome as a number in {0, 1}.
    pub fn outcome(&self) -> f64 {
        if self.replicated {
            1.0
        } else {
            0.0
        }
    }

    pub fn duration_hours(&self) -> f64 {
        (self.market_close - self.market_open) as f64 / MILLIS_PER_HOUR
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub finding_id: String,
    pub forecaster_id: String,
    pub belief: f64,
}

/// One market transaction.
///
/// `quantity` is signed: positive buys, negative sells contracts of `side`.
/// It is `None` when the source only records prices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trade {
    pub finding_id: String,
    pub trader_id: String,
    pub timestamp: Millis,
    pub side: Side,
    pub quantity: Option<f64>,
    /// YES price after the trade, whichever side was traded.
    pub post_trade_price: f64,
    /// Load order; breaks timestamp ties.
    pub seq: usize,
}

/// Maps canonical field names onto the column names of the source files.
///
/// The file form is TOML with one table per source file:
///
/// ```toml
/// delimiter = ","
/// [outcomes]
/// finding_id = "study_id"
/// [trades]
/// post_trade_price = "new_price"
/// ```
///
/// Fields that are not mentioned keep their canonical name.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ColumnMapping {
    #[serde(default)]
    pub delimiter: Option<String>,
    #[serde(default)]
    pub outcomes: BTreeMap<String, String>,
    #[serde(default)]
    pub surveys: BTreeMap<String, String>,
    #[serde(default)]
    pub trades: BTreeMap<String, String>,
}

const OUTCOME_FIELDS: &[&str] = &[
    "finding_id",
    "project",
    "outcome",
    "p_value_category",
    "original_p_value",
    "market_open",
    "market_close",
];
const SURVEY_FIELDS: &[&str] = &["finding_id", "forecaster_id", "belief"];
const TRADE_FIELDS: &[&str] = &[
    "finding_id",
    "trader_id",
    "timestamp",
    "side",
    "quantity",
    "post_trade_price",
];

impl ColumnMapping {
    pub fn from_toml_str(s: &str) -> Result<Self, DatasetError> {
        let mapping: ColumnMapping =
            toml::from_str(s).map_err(|e| DatasetError::Mapping(e.to_string()))?;
        mapping.check()?;
        Ok(mapping)
    }

    pub fn from_path(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn check(&self) -> Result<(), DatasetError> {
        for (table, map, fields) in [
            ("outcomes", &self.outcomes, OUTCOME_FIELDS),
            ("surveys", &self.surveys, SURVEY_FIELDS),
            ("trades", &self.trades, TRADE_FIELDS),
        ] {
            if let Some(key) = map.keys().find(|k| !fields.contains(&k.as_str())) {
                return Err(DatasetError::Mapping(format!(
                    "[{table}] has no canonical field `{key}`"
                )));
            }
        }
        self.delimiter_byte().map(|_| ())
    }

    pub fn delimiter_byte(&self) -> Result<u8, DatasetError> {
        match self.delimiter.as_deref() {
            None => Ok(b','),
            Some("\\t") | Some("tab") => Ok(b'\t'),
            Some(d) if d.len() == 1 => Ok(d.as_bytes()[0]),
            Some(d) => Err(DatasetError::Mapping(format!(
                "delimiter must be a single byte, got `{d}`"
            ))),
        }
    }

    fn table(&self, table: Table) -> &BTreeMap<String, String> {
        match table {
            Table::Outcomes => &self.outcomes,
            Table::Surveys => &self.surveys,
            Table::Trades => &self.trades,
        }
    }

    fn source_name<'a>(&'a self, table: Table, field: &'a str) -> (&'a str, bool) {
        match self.table(table).get(field) {
            Some(name) => (name.as_str(), true),
            None => (field, false),
        }
    }
}

/// Locations of the three input tables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetPaths {
    pub outcomes: PathBuf,
    pub surveys: PathBuf,
    pub trades: PathBuf,
}

impl DatasetPaths {
    /// The canonical file names inside `dir`.
    pub fn in_dir(dir: &Path) -> Self {
        DatasetPaths {
            outcomes: dir.join(OUTCOMES_FILE),
            surveys: dir.join(SURVEYS_FILE),
            trades: dir.join(TRADES_FILE),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IssueKind {
    InvalidValue,
    DanglingReference,
    DuplicateKey,
    MarketWindow,
    TradeOutsideWindow,
    PValueCategoryMismatch,
    SurveyorWithoutTrades,
    FindingCount,
}

/// One invariant violation.
///
/// `row` is the 1-based data row in the source file for load-time issues and
/// the 1-based position in the in-memory collection for [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Issue {
    pub severity: Severity,
    pub kind: IssueKind,
    pub table: Table,
    pub row: Option<usize>,
    pub column: Option<String>,
    pub finding_id: Option<String>,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}", self.table)?;
        if let Some(row) = self.row {
            write!(f, " row {row}")?;
        }
        if let Some(col) = &self.column {
            write!(f, " column `{col}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub issues: Vec<Issue>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Error)
    }

    pub fn warnings(&self) -> impl Iterator<Item = &Issue> {
        self.issues.iter().filter(|i| i.severity == Severity::Warning)
    }

    pub fn error_count(&self) -> usize {
        self.errors().count()
    }

    pub fn is_clean(&self) -> bool {
        self.error_count() == 0
    }

    pub fn is_empty(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, issue: Issue) {
        self.issues.push(issue);
    }
}

fn error(kind: IssueKind, table: Table, row: usize, column: Option<&str>, finding: Option<&str>, message: String) -> Issue {
    Issue {
        severity: Severity::Error,
        kind,
        table,
        row: Some(row),
        column: column.map(str::to_string),
        finding_id: finding.map(str::to_string),
        message,
    }
}

/// Validated, immutable collection of the three tables.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    findings: Vec<Finding>,
    surveys: Vec<SurveyResponse>,
    trades: Vec<Trade>,
    finding_index: HashMap<String, usize>,
    trades_by_finding: Vec<Vec<usize>>,
    surveys_by_finding: Vec<Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from in-memory records. Trade `seq` numbers are
    /// reassigned in the given order. No validation is performed; call
    /// [`validate`] for that.
    pub fn new(findings: Vec<Finding>, surveys: Vec<SurveyResponse>, mut trades: Vec<Trade>) -> Self {
        for (i, t) in trades.iter_mut().enumerate() {
            t.seq = i;
        }
        let mut finding_index = HashMap::with_capacity(findings.len());
        for (i, f) in findings.iter().enumerate() {
            finding_index.entry(f.finding_id.clone()).or_insert(i);
        }
        let mut trades_by_finding = vec![Vec::new(); findings.len()];
        for (i, t) in trades.iter().enumerate() {
            if let Some(&fi) = finding_index.get(&t.finding_id) {
                trades_by_finding[fi].push(i);
            }
        }
        for idx in &mut trades_by_finding {
            idx.sort_by_key(|&i| (trades[i].timestamp, trades[i].seq));
        }
        let mut surveys_by_finding = vec![Vec::new(); findings.len()];
        for (i, s) in surveys.iter().enumerate() {
            if let Some(&fi) = finding_index.get(&s.finding_id) {
                surveys_by_finding[fi].push(i);
            }
        }
        Dataset {
            findings,
            surveys,
            trades,
            finding_index,
            trades_by_finding,
            surveys_by_finding,
        }
    }

    pub fn findings(&self) -> &[Finding] {
        &self.findings
    }

    pub fn surveys(&self) -> &[SurveyResponse] {
        &self.surveys
    }

    pub fn trades(&self) -> &[Trade] {
        &self.trades
    }

    pub fn finding(&self, finding_id: &str) -> Result<&Finding, DatasetError> {
        self.finding_index
            .get(finding_id)
            .map(|&i| &self.findings[i])
            .ok_or_else(|| DatasetError::UnknownFinding(finding_id.to_string()))
    }

    /// Trades of one market ordered by `(timestamp, seq)`.
    pub fn trades_for(&self, finding_id: &str) -> Result<Vec<&Trade>, DatasetError> {
        let &fi = self
            .finding_index
            .get(finding_id)
            .ok_or_else(|| DatasetError::UnknownFinding(finding_id.to_string()))?;
        Ok(self.trades_by_finding[fi].iter().map(|&i| &self.trades[i]).collect())
    }

    pub fn surveys_for(&self, finding_id: &str) -> Result<Vec<&SurveyResponse>, DatasetError> {
        let &fi = self
            .finding_index
            .get(finding_id)
            .ok_or_else(|| DatasetError::UnknownFinding(finding_id.to_string()))?;
        Ok(self.surveys_by_finding[fi].iter().map(|&i| &self.surveys[i]).collect())
    }

    /// Trades that fall at or before the market close, in market order.
    pub fn trades_before_close(&self, finding_id: &str) -> Result<Vec<&Trade>, DatasetError> {
        let finding = self.finding(finding_id)?;
        let close = finding.market_close;
        Ok(self
            .trades_for(finding_id)?
            .into_iter()
            .filter(|t| t.timestamp <= close)
            .collect())
    }

    /// `true` when at least one trade records a NO-side transaction.
    pub fn has_no_side_trades(&self) -> bool {
        self.trades.iter().any(|t| t.side == Side::No)
    }
}

/// Options controlling how raw files are interpreted.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadOptions {
    pub mapping: ColumnMapping,
    pub pvalue_threshold: f64,
}

impl Default for LoadOptions {
    fn default() -> Self {
        LoadOptions {
            mapping: ColumnMapping::default(),
            pvalue_threshold: DEFAULT_PVALUE_THRESHOLD,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TableCounts {
    pub rows_read: usize,
    pub rejected: usize,
}

impl TableCounts {
    pub fn accepted(&self) -> usize {
        self.rows_read - self.rejected
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoadCounts {
    pub outcomes: TableCounts,
    pub surveys: TableCounts,
    pub trades: TableCounts,
}

/// Result of [`load_dataset`]: the accepted rows plus everything that was
/// rejected or flagged.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub report: ValidationReport,
    pub counts: LoadCounts,
}

impl LoadedDataset {
    /// Fails on the first rejected row instead of dropping it.
    pub fn strict(self) -> Result<Dataset, DatasetError> {
        match self.report.errors().next() {
            None => Ok(self.dataset),
            Some(issue) => Err(issue_to_error(issue)),
        }
    }
}

fn issue_to_error(issue: &Issue) -> DatasetError {
    let row = issue.row.unwrap_or(0);
    match issue.kind {
        IssueKind::InvalidValue => DatasetError::InvalidValue {
            table: issue.table,
            row,
            column: issue.column.clone().unwrap_or_default(),
            value: String::new(),
            reason: issue.message.clone(),
        },
        IssueKind::DanglingReference => DatasetError::DanglingReference {
            table: issue.table,
            row,
            finding_id: issue.finding_id.clone().unwrap_or_default(),
        },
        _ => DatasetError::Rejected {
            table: issue.table,
            row,
            message: issue.message.clone(),
        },
    }
}

/// Parses an ISO-8601 timestamp. Values without an offset are read as UTC;
/// a bare date means midnight UTC.
pub fn parse_timestamp(s: &str) -> Result<Millis, String> {
    let s = s.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(s) {
        return Ok(dt.timestamp_millis());
    }
    for fmt in ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(naive) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(Utc.from_utc_datetime(&naive).timestamp_millis());
        }
    }
    if let Ok(date) = NaiveDate::parse_from_str(s, "%Y-%m-%d") {
        let naive = date.and_hms_opt(0, 0, 0).expect("midnight is valid");
        return Ok(Utc.from_utc_datetime(&naive).timestamp_millis());
    }
    Err(format!("not an ISO-8601 timestamp: `{s}`"))
}

/// Canonical ISO-8601 form with millisecond precision.
pub fn format_timestamp(ms: Millis) -> String {
    match Utc.timestamp_millis_opt(ms).single() {
        Some(dt) => dt.format("%Y-%m-%dT%H:%M:%S%.3fZ").to_string(),
        None => ms.to_string(),
    }
}

struct TableReader {
    columns: HashMap<&'static str, usize>,
    records: Vec<csv::StringRecord>,
}

impl TableReader {
    fn open(
        path: &Path,
        table: Table,
        fields: &'static [&'static str],
        required: &[&str],
        mapping: &ColumnMapping,
    ) -> Result<Self, DatasetError> {
        let delimiter = mapping.delimiter_byte()?;
        let mut reader = csv::ReaderBuilder::new()
            .delimiter(delimiter)
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_path(path)
            .map_err(|source| csv_error(path, source))?;
        let headers = reader.headers().map_err(|source| csv_error(path, source))?.clone();
        let mut columns = HashMap::new();
        for &field in fields {
            let (name, explicit) = mapping.source_name(table, field);
            match headers.iter().position(|h| h.trim_start_matches('\u{feff}') == name) {
                Some(i) => {
                    columns.insert(field, i);
                }
                None if explicit || required.contains(&field) => {
                    return Err(DatasetError::MissingColumn {
                        table,
                        column: name.to_string(),
                    })
                }
                None => {}
            }
        }
        let mut records = Vec::new();
        for rec in reader.records() {
            records.push(rec.map_err(|source| csv_error(path, source))?);
        }
        Ok(TableReader {
            columns,
            records,
        })
    }

    fn has(&self, field: &str) -> bool {
        self.columns.contains_key(field)
    }

    fn get<'r>(&self, rec: &'r csv::StringRecord, field: &str) -> Option<&'r str> {
        self.columns.get(field).and_then(|&i| rec.get(i))
    }
}

fn csv_error(path: &Path, source: csv::Error) -> DatasetError {
    match source.kind() {
        csv::ErrorKind::Io(_) => {
            let msg = source.to_string();
            DatasetError::Io {
                path: path.to_path_buf(),
                source: std::io::Error::other(msg),
            }
        }
        _ => DatasetError::Csv {
            path: path.to_path_buf(),
            source,
        },
    }
}

struct RowCtx<'a> {
    table: Table,
    row: usize,
    reader: &'a TableReader,
    rec: &'a csv::StringRecord,
}

impl RowCtx<'_> {
    fn raw(&self, field: &str) -> &str {
        self.reader.get(self.rec, field).unwrap_or("")
    }

    fn invalid(&self, field: &str, reason: impl Into<String>) -> Issue {
        let value = self.raw(field);
        error(
            IssueKind::InvalidValue,
            self.table,
            self.row,
            Some(field),
            None,
            format!("invalid value `{value}`: {}", reason.into()),
        )
    }

    fn parse<T>(&self, field: &str, f: impl FnOnce(&str) -> Result<T, String>) -> Result<T, Issue> {
        f(self.raw(field)).map_err(|e| self.invalid(field, e))
    }

    fn non_empty(&self, field: &str) -> Result<String, Issue> {
        let v = self.raw(field);
        if v.is_empty() {
            Err(self.invalid(field, "empty"))
        } else {
            Ok(v.to_string())
        }
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|_| "not a number".to_string())?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err("not finite".into())
    }
}

fn parse_outcome(s: &str) -> Result<bool, String> {
    match s.to_ascii_lowercase().as_str() {
        "1" | "1.0" | "true" | "yes" => Ok(true),
        "0" | "0.0" | "false" | "no" => Ok(false),
        _ => Err("outcome must be 0 or 1".into()),
    }
}

fn parse_belief(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if (0.0..=1.0).contains(&v) {
        Ok(v)
    } else {
        Err("belief outside [0, 1]".into())
    }
}

fn parse_price(s: &str) -> Result<f64, String> {
    let v = parse_f64(s)?;
    if v > 0.0 && v < 1.0 {
        Ok(v)
    } else {
        Err("price outside (0, 1)".into())
    }
}

/// Loads and validates the three tables.
///
/// Missing files, unreadable CSV and absent columns are fatal. Row-level
/// violations exclude the row and are listed in the returned report.
pub fn load_dataset(paths: &DatasetPaths, options: &LoadOptions) -> Result<LoadedDataset, DatasetError> {
    for p in [&paths.outcomes, &paths.surveys, &paths.trades] {
        if !p.exists() {
            return Err(DatasetError::Io {
                path: p.clone(),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "file not found"),
            });
        }
    }
    let mapping = &options.mapping;
    let outcomes = TableReader::open(
        &paths.outcomes,
        Table::Outcomes,
        OUTCOME_FIELDS,
        &["finding_id", "project", "outcome", "market_open", "market_close"],
        mapping,
    )?;
    if !outcomes.has("p_value_category") && !outcomes.has("original_p_value") {
        return Err(DatasetError::MissingColumn {
            table: Table::Outcomes,
            column: mapping.source_name(Table::Outcomes, "p_value_category").0.to_string(),
        });
    }
    let surveys = TableReader::open(&paths.surveys, Table::Surveys, SURVEY_FIELDS, SURVEY_FIELDS, mapping)?;
    let trades = TableReader::open(
        &paths.trades,
        Table::Trades,
        TRADE_FIELDS,
        &["finding_id", "trader_id", "timestamp", "post_trade_price"],
        mapping,
    )?;

    let mut report = ValidationReport::default();
    let mut counts = LoadCounts::default();

    let mut findings = Vec::new();
    let mut seen_findings = HashSet::new();
    counts.outcomes.rows_read = outcomes.records.len();
    for (i, rec) in outcomes.records.iter().enumerate() {
        let ctx = RowCtx {
            table: Table::Outcomes,
            row: i + 1,
            reader: &outcomes,
            rec,
        };
        match parse_finding(&ctx, options.pvalue_threshold) {
            Ok(f) if !seen_findings.insert(f.finding_id.clone()) => {
                report.push(error(
                    IssueKind::DuplicateKey,
                    Table::Outcomes,
                    i + 1,
                    Some("finding_id"),
                    Some(&f.finding_id),
                    format!("duplicate finding_id `{}`", f.finding_id),
                ));
                counts.outcomes.rejected += 1;
            }
            Ok(f) => findings.push(f),
            Err(issue) => {
                report.push(issue);
                counts.outcomes.rejected += 1;
            }
        }
    }
    let windows: HashMap<&str, (Millis, Millis)> = findings
        .iter()
        .map(|f| (f.finding_id.as_str(), (f.market_open, f.market_close)))
        .collect();

    let mut survey_rows = Vec::new();
    let mut seen_pairs = HashSet::new();
    counts.surveys.rows_read = surveys.records.len();
    for (i, rec) in surveys.records.iter().enumerate() {
        let ctx = RowCtx {
            table: Table::Surveys,
            row: i + 1,
            reader: &surveys,
            rec,
        };
        let parsed = (|| {
            let finding_id = ctx.non_empty("finding_id")?;
            let forecaster_id = ctx.non_empty("forecaster_id")?;
            let belief = ctx.parse("belief", parse_belief)?;
            if !windows.contains_key(finding_id.as_str()) {
                return Err(dangling(Table::Surveys, i + 1, &finding_id));
            }
            if !seen_pairs.insert((finding_id.clone(), forecaster_id.clone())) {
                return Err(error(
                    IssueKind::DuplicateKey,
                    Table::Surveys,
                    i + 1,
                    Some("forecaster_id"),
                    Some(&finding_id),
                    format!("second response from `{forecaster_id}` for `{finding_id}`"),
                ));
            }
            Ok(SurveyResponse {
                finding_id,
                forecaster_id,
                belief,
            })
        })();
        match parsed {
            Ok(s) => survey_rows.push(s),
            Err(issue) => {
                report.push(issue);
                counts.surveys.rejected += 1;
            }
        }
    }

    let mut trade_rows = Vec::new();
    counts.trades.rows_read = trades.records.len();
    for (i, rec) in trades.records.iter().enumerate() {
        let ctx = RowCtx {
            table: Table::Trades,
            row: i + 1,
            reader: &trades,
            rec,
        };
        let parsed = (|| {
            let finding_id = ctx.non_empty("finding_id")?;
            let trader_id = ctx.non_empty("trader_id")?;
            let timestamp = ctx.parse("timestamp", parse_timestamp)?;
            let side = if trades.has("side") && !ctx.raw("side").is_empty() {
                ctx.parse("side", |s| s.parse())?
            } else {
                Side::Yes
            };
            let quantity = if trades.has("quantity") && !ctx.raw("quantity").is_empty() {
                let q = ctx.parse("quantity", parse_f64)?;
                if q == 0.0 {
                    return Err(ctx.invalid("quantity", "zero quantity"));
                }
                Some(q)
            } else {
                None
            };
            let post_trade_price = ctx.parse("post_trade_price", parse_price)?;
            let Some(&(open, close)) = windows.get(finding_id.as_str()) else {
                return Err(dangling(Table::Trades, i + 1, &finding_id));
            };
            if timestamp < open || timestamp > close {
                return Err(error(
                    IssueKind::TradeOutsideWindow,
                    Table::Trades,
                    i + 1,
                    Some("timestamp"),
                    Some(&finding_id),
                    format!(
                        "trade at {} outside market window [{}, {}]",
                        format_timestamp(timestamp),
                        format_timestamp(open),
                        format_timestamp(close)
                    ),
                ));
            }
            Ok(Trade {
                finding_id,
                trader_id,
                timestamp,
                side,
                quantity,
                post_trade_price,
                seq: 0,
            })
        })();
        match parsed {
            Ok(t) => trade_rows.push(t),
            Err(issue) => {
                report.push(issue);
                counts.trades.rejected += 1;
            }
        }
    }

    let dataset = Dataset::new(findings, survey_rows, trade_rows);
    report.issues.extend(surveyor_warnings(&dataset));
    Ok(LoadedDataset {
        dataset,
        report,
        counts,
    })
}

fn dangling(table: Table, row: usize, finding_id: &str) -> Issue {
    error(
        IssueKind::DanglingReference,
        table,
        row,
        Some("finding_id"),
        Some(finding_id),
        format!("unknown finding_id `{finding_id}`"),
    )
}

fn parse_finding(ctx: &RowCtx<'_>, threshold: f64) -> Result<Finding, Issue> {
    let finding_id = ctx.non_empty("finding_id")?;
    let project = ctx.parse("project", |s| s.parse::<Project>())?;
    let replicated = ctx.parse("outcome", parse_outcome)?;
    let original_p_value = if ctx.reader.has("original_p_value") && !ctx.raw("original_p_value").is_empty() {
        let p = ctx.parse("original_p_value", parse_f64)?;
        if p < 0.0 {
            return Err(ctx.invalid("original_p_value", "negative p-value"));
        }
        Some(p)
    } else {
        None
    };
    let p_value_category = if ctx.reader.has("p_value_category") && !ctx.raw("p_value_category").is_empty() {
        ctx.parse("p_value_category", |s| s.parse::<PValueCategory>())?
    } else if let Some(p) = original_p_value {
        PValueCategory::from_p_value(p, threshold)
    } else {
        return Err(ctx.invalid("p_value_category", "no category and no numeric p-value"));
    };
    if let Some(p) = original_p_value {
        if PValueCategory::from_p_value(p, threshold) != p_value_category {
            return Err(error(
                IssueKind::PValueCategoryMismatch,
                ctx.table,
                ctx.row,
                Some("p_value_category"),
                Some(&finding_id),
                format!(
                    "p-value {p} disagrees with category `{}` at threshold {threshold}",
                    p_value_category.as_str()
                ),
            ));
        }
    }
    let market_open = ctx.parse("market_open", parse_timestamp)?;
    let market_close = ctx.parse("market_close", parse_timestamp)?;
    if market_open >= market_close {
        return Err(error(
            IssueKind::MarketWindow,
            ctx.table,
            ctx.row,
            Some("market_close"),
            Some(&finding_id),
            "market_open is not before market_close".into(),
        ));
    }
    Ok(Finding {
        finding_id,
        project,
        replicated,
        p_value_category,
        original_p_value,
        market_open,
        market_close,
    })
}

fn surveyor_warnings(ds: &Dataset) -> Vec<Issue> {
    let traders: HashSet<&str> = ds.trades.iter().map(|t| t.trader_id.as_str()).collect();
    let surveyors: BTreeSet<&str> = ds.surveys.iter().map(|s| s.forecaster_id.as_str()).collect();
    surveyors
        .into_iter()
        .filter(|f| !traders.contains(f))
        .map(|f| Issue {
            severity: Severity::Warning,
            kind: IssueKind::SurveyorWithoutTrades,
            table: Table::Surveys,
            row: None,
            column: Some("forecaster_id".into()),
            finding_id: None,
            message: format!("forecaster `{f}` answered the survey but never traded"),
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationOptions {
    pub pvalue_threshold: Option<f64>,
    /// Expected number of findings; a mismatch is a warning.
    pub expected_findings: Option<usize>,
}

/// Checks every dataset invariant. Pure: the same dataset always yields the
/// same report.
pub fn validate(ds: &Dataset) -> ValidationReport {
    validate_with(ds, &ValidationOptions::default())
}

pub fn validate_with(ds: &Dataset, options: &ValidationOptions) -> ValidationReport {
    let threshold = options.pvalue_threshold.unwrap_or(DEFAULT_PVALUE_THRESHOLD);
    let mut report = ValidationReport::default();
    let mut seen = HashSet::new();
    for (i, f) in ds.findings.iter().enumerate() {
        let row = i + 1;
        let fid = Some(f.finding_id.as_str());
        if !seen.insert(f.finding_id.as_str()) {
            report.push(error(IssueKind::DuplicateKey, Table::Outcomes, row, Some("finding_id"), fid, "duplicate finding_id".into()));
        }
        if f.market_open >= f.market_close {
            report.push(error(IssueKind::MarketWindow, Table::Outcomes, row, Some("market_close"), fid, "market_open is not before market_close".into()));
        }
        if let Some(p) = f.original_p_value {
            if !(p >= 0.0) {
                report.push(error(IssueKind::InvalidValue, Table::Outcomes, row, Some("original_p_value"), fid, format!("invalid p-value {p}")));
            } else if PValueCategory::from_p_value(p, threshold) != f.p_value_category {
                report.push(error(
                    IssueKind::PValueCategoryMismatch,
                    Table::Outcomes,
                    row,
                    Some("p_value_category"),
                    fid,
                    format!("p-value {p} disagrees with category `{}`", f.p_value_category.as_str()),
                ));
            }
        }
    }
    let mut pairs = HashSet::new();
    for (i, s) in ds.surveys.iter().enumerate() {
        let row = i + 1;
        let fid = Some(s.finding_id.as_str());
        if !(0.0..=1.0).contains(&s.belief) {
            report.push(error(IssueKind::InvalidValue, Table::Surveys, row, Some("belief"), fid, format!("belief {} outside [0, 1]", s.belief)));
        }
        if !ds.finding_index.contains_key(&s.finding_id) {
            report.push(dangling(Table::Surveys, row, &s.finding_id));
        }
        if !pairs.insert((s.finding_id.as_str(), s.forecaster_id.as_str())) {
            report.push(error(IssueKind::DuplicateKey, Table::Surveys, row, Some("forecaster_id"), fid, format!("second response from `{}`", s.forecaster_id)));
        }
    }
    for (i, t) in ds.trades.iter().enumerate() {
        let row = i + 1;
        let fid = Some(t.finding_id.as_str());
        if !(t.post_trade_price > 0.0 && t.post_trade_price < 1.0) {
            report.push(error(IssueKind::InvalidValue, Table::Trades, row, Some("post_trade_price"), fid, format!("price {} outside (0, 1)", t.post_trade_price)));
        }
        if let Some(q) = t.quantity {
            if q == 0.0 || !q.is_finite() {
                report.push(error(IssueKind::InvalidValue, Table::Trades, row, Some("quantity"), fid, format!("invalid quantity {q}")));
            }
        }
        match ds.finding_index.get(&t.finding_id) {
            None => report.push(dangling(Table::Trades, row, &t.finding_id)),
            Some(&fi) => {
                let f = &ds.findings[fi];
                if t.timestamp < f.market_open || t.timestamp > f.market_close {
                    report.push(error(
                        IssueKind::TradeOutsideWindow,
                        Table::Trades,
                        row,
                        Some("timestamp"),
                        fid,
                        format!("trade at {} outside market window", format_timestamp(t.timestamp)),
                    ));
                }
            }
        }
    }
    report.issues.extend(surveyor_warnings(ds));
    if let Some(expected) = options.expected_findings {
        if ds.findings.len() != expected {
            report.push(Issue {
                severity: Severity::Warning,
                kind: IssueKind::FindingCount,
                table: Table::Outcomes,
                row: None,
                column: None,
                finding_id: None,
                message: format!("{} findings loaded, expected {expected}", ds.findings.len()),
            });
        }
    }
    report
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Writes the dataset in canonical form (canonical headers, comma
/// delimiter, millisecond ISO-8601 timestamps) into `dir`.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<DatasetPaths, DatasetError> {
    fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let paths = DatasetPaths::in_dir(dir);

    let mut w = writer(&paths.outcomes)?;
    write_row(&mut w, &paths.outcomes, OUTCOME_FIELDS.iter().map(|s| s.to_string()))?;
    for f in &ds.findings {
        write_row(
            &mut w,
            &paths.outcomes,
            [
                f.finding_id.clone(),
                f.project.to_string(),
                if f.replicated { "1" } else { "0" }.to_string(),
                f.p_value_category.as_str().to_string(),
                fmt_opt(f.original_p_value),
                format_timestamp(f.market_open),
                format_timestamp(f.market_close),
            ],
        )?;
    }
    flush(w, &paths.outcomes)?;

    let mut w = writer(&paths.surveys)?;
    write_row(&mut w, &paths.surveys, SURVEY_FIELDS.iter().map(|s| s.to_string()))?;
    for s in &ds.surveys {
        write_row(&mut w, &paths.surveys, [s.finding_id.clone(), s.forecaster_id.clone(), s.belief.to_string()])?;
    }
    flush(w, &paths.surveys)?;

    let mut w = writer(&paths.trades)?;
    write_row(&mut w, &paths.trades, TRADE_FIELDS.iter().map(|s| s.to_string()))?;
    let mut order: Vec<&Trade> = ds.trades.iter().collect();
    order.sort_by_key(|t| t.seq);
    for t in order {
        write_row(
            &mut w,
            &paths.trades,
            [
                t.finding_id.clone(),
                t.trader_id.clone(),
                format_timestamp(t.timestamp),
                t.side.to_string(),
                fmt_opt(t.quantity),
                t.post_trade_price.to_string(),
            ],
        )?;
    }
    flush(w, &paths.trades)?;
    Ok(paths)
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>, DatasetError> {
    csv::Writer::from_path(path).map_err(|source| csv_error(path, source))
}

fn write_row<I: IntoIterator<Item = String>>(w: &mut csv::Writer<fs::File>, path: &Path, row: I) -> Result<(), DatasetError> {
    w.write_record(row).map_err(|source| csv_error(path, source))
}

fn flush(mut w: csv::Writer<fs::File>, path: &Path) -> Result<(), DatasetError> {
    w.flush().map_err(|source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    })
}
