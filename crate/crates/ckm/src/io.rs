//! CSV ingestion, plain-text study configs, and manifest-stamped outputs.
//!
//! File formats are deliberately plain: samples and scenario covariates are
//! CSV with a mandatory header, study configs are `key = value` lines, and
//! result tables are CSV or JSON stamped with a [`RunManifest`]. Floating
//! point numbers are written with the shortest representation that parses
//! back to the same bits, so a write-then-read cycle reproduces a sample
//! exactly and identical manifests yield identical files.

use std::fs;
use std::path::{Path, PathBuf};

use serde::ser::SerializeSeq;
use serde::{Deserialize, Serialize, Serializer};

use crate::counterfactual::HazardMethod;
use crate::data::{CensoredSample, CounterfactualCovariates, Grid};
use crate::kernel::{BandwidthRule, KernelProfile};
use crate::simulation::{EstimatorId, StudyConfig};
use crate::survival::BeranVariant;
use crate::{Error, Result};

/// Unwraps I/O problems hidden inside CSV errors so a missing file stays an
/// I/O failure rather than a parse failure.
fn csv_err(err: csv::Error) -> Error {
    if err.is_io_error() {
        match err.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!("is_io_error guarantees the kind"),
        }
    } else {
        Error::Csv(err)
    }
}

/// Reads a censored sample from CSV with header `y,delta,x1,..,xd`.
///
/// Numbers are decimal doubles, scientific notation accepted. Row numbers in
/// errors count data rows from 1; the header is not a row.
pub fn read_sample_csv(path: &Path) -> Result<CensoredSample> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    check_sample_header(&header)?;
    let dim = header.len() - 2;
    let mut y = Vec::new();
    let mut delta = Vec::new();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        y.push(parse_cell(record.get(0).unwrap_or(""), row, "y")?);
        delta.push(parse_cell(record.get(1).unwrap_or(""), row, "delta")?);
        let mut x = Vec::with_capacity(dim);
        for (k, name) in header[2..].iter().enumerate() {
            x.push(parse_cell(record.get(k + 2).unwrap_or(""), row, name)?);
        }
        rows.push(x);
    }
    CensoredSample::from_columns(&y, &delta, rows).map_err(bump_row)
}

/// Writes a sample as `y,delta,x1,..,xd` in canonical order.
pub fn write_sample_csv(path: &Path, sample: &CensoredSample) -> Result<()> {
    let mut out = String::from("y,delta");
    for k in 1..=sample.dim() {
        out.push_str(&format!(",x{k}"));
    }
    out.push('\n');
    for obs in sample.observations() {
        out.push_str(&format!("{},{}", obs.y, u8::from(obs.delta)));
        for v in &obs.x {
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// Reads scenario covariates from CSV with header `x1,..,xd`.
///
/// When `expected_dim` is given (the dimension of an already loaded sample),
/// a differing column count is a dimension error.
pub fn read_counterfactual_csv(
    path: &Path,
    expected_dim: Option<usize>,
) -> Result<CounterfactualCovariates> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(csv_err)?;
    let header: Vec<String> = reader
        .headers()
        .map_err(csv_err)?
        .iter()
        .map(str::to_string)
        .collect();
    check_covariate_header(&header)?;
    if let Some(expected) = expected_dim {
        if header.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: header.len(),
            });
        }
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let row = i + 1;
        let mut x = Vec::with_capacity(header.len());
        for (k, name) in header.iter().enumerate() {
            x.push(parse_cell(record.get(k).unwrap_or(""), row, name)?);
        }
        rows.push(x);
    }
    CounterfactualCovariates::new(rows).map_err(bump_row)
}

/// Parses a `start:stop:step` uniform grid argument.
pub fn parse_grid_spec(spec: &str) -> Result<Grid> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::Usage(format!(
            "grid spec `{spec}` must be start:stop:step"
        )));
    }
    let mut nums = [0.0f64; 3];
    for (slot, raw) in nums.iter_mut().zip(&parts) {
        *slot = raw.trim().parse().map_err(|_| {
            Error::Usage(format!("grid spec `{spec}`: `{raw}` is not a number"))
        })?;
    }
    Grid::from_range(nums[0], nums[1], nums[2])
}

/// Reads evaluation times from a text file, one number per line.
///
/// Blank lines and `#` comments are skipped; points must come out finite,
/// nonnegative and strictly increasing.
pub fn read_grid_file(path: &Path) -> Result<Grid> {
    let text = fs::read_to_string(path)?;
    let shown = path.display().to_string();
    let mut points = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let value: f64 = line.parse().map_err(|_| {
            config_err(&shown, i + 1, format!("`{line}` is not a number"))
        })?;
        points.push(value);
    }
    Grid::new(points)
}

/// A parsed study config file: the library configuration plus output routing.
#[derive(Debug, Clone)]
pub struct StudyFile {
    pub config: StudyConfig,
    /// Report destination named in the file, if any.
    pub output: Option<PathBuf>,
}

/// Parses a plain-text `key = value` study config.
///
/// Keys: `sizes`, `s` (or `replications`), `base_seed` (or `seed`), `grid`
/// (start:stop:step), `bandwidth` (`auto` or a number), `kernel`, `variant`,
/// `hazard`, `estimators` (comma list or `all`), `strict`, `isotonize`,
/// `nodes`, `output`. Unknown keys are errors; `#` starts a comment. Every
/// key is optional and falls back to the library default.
pub fn parse_study_config(path: &Path) -> Result<StudyFile> {
    let text = fs::read_to_string(path)?;
    parse_study_config_text(&text, &path.display().to_string())
}

fn parse_study_config_text(text: &str, path: &str) -> Result<StudyFile> {
    let mut config = StudyConfig::default();
    let mut output = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(config_err(path, line_no, "expected `key = value`".into()));
        };
        let key = key.trim().to_ascii_lowercase();
        let value = value.trim();
        let fail = |message: String| config_err(path, line_no, message);
        match key.as_str() {
            "sizes" => {
                config.sizes = split_list(value)
                    .map(|tok| {
                        tok.parse::<usize>()
                            .map_err(|_| fail(format!("`{tok}` is not a sample size")))
                    })
                    .collect::<Result<_>>()?;
            }
            "s" | "replications" => {
                config.replications = value
                    .parse()
                    .map_err(|_| fail(format!("`{value}` is not a replication count")))?;
            }
            "base_seed" | "seed" => {
                config.base_seed = value
                    .parse()
                    .map_err(|_| fail(format!("`{value}` is not a 64-bit seed")))?;
            }
            "grid" => {
                config.grid = parse_grid_spec(value).map_err(|e| fail(e.to_string()))?;
            }
            "bandwidth" => {
                config.bandwidth =
                    parse_bandwidth_rule(value).map_err(|e| fail(e.to_string()))?;
            }
            "kernel" => {
                config.kernel =
                    KernelProfile::from_name(value).map_err(|e| fail(e.to_string()))?;
            }
            "variant" => {
                config.variant =
                    BeranVariant::from_name(value).map_err(|e| fail(e.to_string()))?;
            }
            "hazard" => {
                config.hazard =
                    HazardMethod::from_name(value).map_err(|e| fail(e.to_string()))?;
            }
            "estimators" => {
                config.estimators = if value == "all" {
                    EstimatorId::ALL.to_vec()
                } else {
                    split_list(value)
                        .map(|tok| EstimatorId::from_name(tok).map_err(|e| fail(e.to_string())))
                        .collect::<Result<_>>()?
                };
            }
            "strict" => config.strict = parse_bool(value).map_err(|e| fail(e.to_string()))?,
            "isotonize" => {
                config.isotonize = parse_bool(value).map_err(|e| fail(e.to_string()))?;
            }
            "nodes" | "quadrature_nodes" => {
                config.quadrature_nodes = value
                    .parse()
                    .map_err(|_| fail(format!("`{value}` is not a node count")))?;
            }
            "output" => output = Some(PathBuf::from(value)),
            other => return Err(fail(format!("unknown key `{other}`"))),
        }
    }
    Ok(StudyFile { config, output })
}

/// Parses `auto` or a fixed positive number as a bandwidth rule.
pub fn parse_bandwidth_rule(value: &str) -> Result<BandwidthRule> {
    if value == "auto" {
        return Ok(BandwidthRule::Auto);
    }
    let h: f64 = value
        .parse()
        .map_err(|_| Error::Usage(format!("bandwidth must be `auto` or a number, got `{value}`")))?;
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::Bandwidth { value: h });
    }
    Ok(BandwidthRule::Fixed(h))
}

fn parse_bool(value: &str) -> Result<bool> {
    match value {
        "true" | "on" | "1" => Ok(true),
        "false" | "off" | "0" => Ok(false),
        other => Err(Error::Usage(format!("`{other}` is not a boolean"))),
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|tok| !tok.is_empty())
}

fn config_err(path: &str, line: usize, message: String) -> Error {
    Error::Config {
        path: path.to_string(),
        line,
        message,
    }
}

fn check_sample_header(header: &[String]) -> Result<()> {
    if header.len() < 3 || header[0] != "y" || header[1] != "delta" {
        return Err(Error::CsvSchema {
            message: format!(
                "expected header `y,delta,x1,..`, got `{}`",
                header.join(",")
            ),
        });
    }
    check_x_names(&header[2..])
}

fn check_covariate_header(header: &[String]) -> Result<()> {
    if header.is_empty() {
        return Err(Error::CsvSchema {
            message: "expected header `x1,..`, got an empty header".into(),
        });
    }
    check_x_names(header)
}

fn check_x_names(names: &[String]) -> Result<()> {
    for (k, name) in names.iter().enumerate() {
        let want = format!("x{}", k + 1);
        if *name != want {
            return Err(Error::CsvSchema {
                message: format!("covariate column {} must be named `{want}`, got `{name}`", k + 1),
            });
        }
    }
    Ok(())
}

fn parse_cell(raw: &str, row: usize, column: &str) -> Result<f64> {
    raw.parse().map_err(|_| Error::CsvSchema {
        message: format!("row {row}, column {column}: `{raw}` is not a number"),
    })
}

/// Shifts 0-based in-memory row indices to 1-based CSV data rows.
fn bump_row(err: Error) -> Error {
    match err {
        Error::NegativeDuration { row, value } => Error::NegativeDuration { row: row + 1, value },
        Error::NonBinaryStatus { row, value } => Error::NonBinaryStatus { row: row + 1, value },
        Error::NonFinite { row, field } => Error::NonFinite { row: row + 1, field },
        Error::RaggedCovariates {
            row,
            expected,
            found,
        } => Error::RaggedCovariates {
            row: row + 1,
            expected,
            found,
        },
        other => other,
    }
}

/// Provenance header stamped into every result file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub input: Option<String>,
    pub counterfactual: Option<String>,
    pub config: Option<String>,
    pub kernel: Option<String>,
    pub bandwidth: Option<String>,
    pub grid: Option<String>,
    pub hazard: Option<String>,
    pub alpha: Option<f64>,
    pub seed: Option<u64>,
    pub timestamp: String,
}

impl RunManifest {
    /// A manifest with every optional field empty.
    pub fn new(command: &str, timestamp: &str) -> Self {
        RunManifest {
            tool: "ckm".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            input: None,
            counterfactual: None,
            config: None,
            kernel: None,
            bandwidth: None,
            grid: None,
            hazard: None,
            alpha: None,
            seed: None,
            timestamp: timestamp.into(),
        }
    }
}

/// Result file encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Csv,
    Json,
}

impl OutputFormat {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(Error::Usage(format!(
                "unknown format `{other}` (expected csv or json)"
            ))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

/// One result table cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(u64),
    Real(f64),
}

impl Serialize for Cell {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Cell::Text(s) => serializer.serialize_str(s),
            Cell::Int(v) => serializer.serialize_u64(*v),
            // JSON has no non-finite numbers; mirror them as null
            Cell::Real(v) if !v.is_finite() => serializer.serialize_none(),
            Cell::Real(v) => serializer.serialize_f64(*v),
        }
    }
}

impl Cell {
    fn render_csv(&self, out: &mut String) {
        match self {
            Cell::Text(s) => {
                if s.contains(',') || s.contains('"') || s.contains('\n') {
                    out.push('"');
                    out.push_str(&s.replace('"', "\"\""));
                    out.push('"');
                } else {
                    out.push_str(s);
                }
            }
            Cell::Int(v) => {
                out.push_str(&v.to_string());
            }
            Cell::Real(v) => {
                out.push_str(&v.to_string());
            }
        }
    }
}

/// Columns plus rows; both output formats mirror this exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl OutputTable {
    pub fn new(columns: Vec<String>) -> Self {
        OutputTable {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

struct RowsAsJson<'a>(&'a [Vec<Cell>]);

impl Serialize for RowsAsJson<'_> {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.0.len()))?;
        for row in self.0 {
            seq.serialize_element(row)?;
        }
        seq.end()
    }
}

#[derive(Serialize)]
struct JsonDocument<'a> {
    manifest: &'a RunManifest,
    columns: &'a [String],
    rows: RowsAsJson<'a>,
}

/// Renders a result table with its manifest.
///
/// CSV places the manifest as a leading `# manifest {..}` comment line; JSON
/// nests it under a `manifest` key. Identical inputs render identical bytes.
pub fn render_output(
    manifest: &RunManifest,
    table: &OutputTable,
    format: OutputFormat,
) -> Result<String> {
    match format {
        OutputFormat::Csv => {
            let mut out = String::from("# manifest ");
            out.push_str(&serde_json::to_string(manifest)?);
            out.push('\n');
            out.push_str(&table.columns.join(","));
            out.push('\n');
            for row in &table.rows {
                for (k, cell) in row.iter().enumerate() {
                    if k > 0 {
                        out.push(',');
                    }
                    cell.render_csv(&mut out);
                }
                out.push('\n');
            }
            Ok(out)
        }
        OutputFormat::Json => {
            let doc = JsonDocument {
                manifest,
                columns: &table.columns,
                rows: RowsAsJson(&table.rows),
            };
            let mut out = serde_json::to_string_pretty(&doc)?;
            out.push('\n');
            Ok(out)
        }
    }
}

/// Renders and writes a result table; `None` writes to stdout.
pub fn write_output(
    path: Option<&Path>,
    manifest: &RunManifest,
    table: &OutputTable,
    format: OutputFormat,
) -> Result<()> {
    let text = render_output(manifest, table, format)?;
    match path {
        Some(path) => fs::write(path, text)?,
        None => {
            use std::io::Write;
            std::io::stdout().lock().write_all(text.as_bytes())?;
        }
    }
    Ok(())
}
