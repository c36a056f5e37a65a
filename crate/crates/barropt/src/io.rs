//! JSON configs for models and rewards, and the CSV/JSON writers shared by
//! every command.

use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use barropt_core::{HyperExpJumps, LevyModel, Phase, RewardFunction, RewardKind};
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Failures while reading configs or writing outputs.
#[derive(Debug, thiserror::Error)]
pub enum IoError {
    /// The file could not be read or written.
    #[error("{path}: {source}")]
    File {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: io::Error,
    },
    /// The file is not valid JSON for the expected schema.
    #[error("{path}: {source}")]
    Parse {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: serde_json::Error,
    },
    /// The parsed values were rejected by the core crate.
    #[error("{path}: {source}")]
    Invalid {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: barropt_core::Error,
    },
    /// CSV serialization failed.
    #[error("{path}: {source}")]
    Csv {
        /// Offending path.
        path: PathBuf,
        /// Underlying error.
        source: csv::Error,
    },
}

/// On-disk model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    /// Drift.
    pub mu: f64,
    /// Volatility.
    pub sigma: f64,
    /// Discount rate.
    pub q: f64,
    /// Optional hyperexponential downward jumps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub jumps: Option<JumpSpec>,
}

/// Jump part of [`ModelSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JumpSpec {
    /// Total jump intensity.
    pub lambda: f64,
    /// Mixture phases.
    pub phases: Vec<PhaseSpec>,
}

/// One exponential phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhaseSpec {
    /// Mixture weight.
    pub p: f64,
    /// Rate.
    pub alpha: f64,
}

impl ModelSpec {
    /// Builds the validated model.
    pub fn build(&self) -> barropt_core::Result<LevyModel> {
        let jumps = match &self.jumps {
            None => None,
            Some(j) => Some(HyperExpJumps::new(
                j.lambda,
                j.phases.iter().map(|p| Phase { p: p.p, alpha: p.alpha }).collect(),
            )?),
        };
        LevyModel::new(self.mu, self.sigma, self.q, jumps)
    }
}

/// On-disk reward description, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum RewardSpec {
    /// `x^alpha`.
    Power {
        /// Exponent.
        alpha: f64,
        /// Optional multiplier.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// `e^{-beta x}`.
    Exp {
        /// Decay rate.
        beta: f64,
        /// Optional multiplier.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// Constant `c`.
    Constant {
        /// Level.
        c: f64,
    },
    /// Ratio of polynomials, coefficients in ascending degree.
    Rational {
        /// Numerator.
        num: Vec<f64>,
        /// Denominator.
        den: Vec<f64>,
        /// Optional multiplier.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
    /// Tabulated values joined by a natural cubic spline.
    Table {
        /// Abscissae.
        x: Vec<f64>,
        /// Values.
        g: Vec<f64>,
        /// Optional multiplier.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        scale: Option<f64>,
    },
}

impl RewardSpec {
    /// Builds the validated reward.
    pub fn build(&self) -> barropt_core::Result<RewardFunction> {
        let (kind, scale) = match self.clone() {
            RewardSpec::Power { alpha, scale } => (RewardKind::Power { alpha }, scale),
            RewardSpec::Exp { beta, scale } => (RewardKind::Exponential { beta }, scale),
            RewardSpec::Constant { c } => (RewardKind::Constant { c }, None),
            RewardSpec::Rational { num, den, scale } => (RewardKind::Rational { num, den }, scale),
            RewardSpec::Table { x, g, scale } => (RewardKind::Table { x, g }, scale),
        };
        let r = RewardFunction::new(kind)?;
        match scale {
            Some(c) => r.scaled(c),
            None => Ok(r),
        }
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, IoError> {
    let text = fs::read_to_string(path).map_err(|source| IoError::File { path: path.into(), source })?;
    serde_json::from_str(&text).map_err(|source| IoError::Parse { path: path.into(), source })
}

/// Reads and validates a model file.
pub fn load_model(path: &Path) -> Result<(ModelSpec, LevyModel), IoError> {
    let spec: ModelSpec = read_json(path)?;
    let model = spec.build().map_err(|source| IoError::Invalid { path: path.into(), source })?;
    Ok((spec, model))
}

/// Reads and validates a reward file.
pub fn load_reward(path: &Path) -> Result<(RewardSpec, RewardFunction), IoError> {
    let spec: RewardSpec = read_json(path)?;
    let reward = spec.build().map_err(|source| IoError::Invalid { path: path.into(), source })?;
    Ok((spec, reward))
}

/// Provenance block written at the top of every output.
#[derive(Debug, Clone, Serialize)]
pub struct Header {
    /// Program name.
    pub tool: &'static str,
    /// Crate version.
    pub version: &'static str,
    /// Subcommand.
    pub command: String,
    /// Echo of the inputs and options.
    pub config: Value,
}

impl Header {
    /// Header for `command` with the given config echo.
    pub fn new(command: &str, config: Value) -> Self {
        Self { tool: "barropt", version: env!("CARGO_PKG_VERSION"), command: command.into(), config }
    }
}

/// Writes `{"header": …, <body fields>}` as pretty JSON.
pub fn write_json<T: Serialize>(path: &Path, header: &Header, body: &T) -> Result<(), IoError> {
    let mut doc = serde_json::Map::new();
    doc.insert("header".into(), serde_json::to_value(header).expect("header serializes"));
    match serde_json::to_value(body).map_err(|source| IoError::Parse { path: path.into(), source })? {
        Value::Object(fields) => doc.extend(fields),
        other => {
            doc.insert("result".into(), other);
        }
    }
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("map serializes");
    fs::write(path, text + "\n").map_err(|source| IoError::File { path: path.into(), source })
}

/// Formats a float with 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        format!("{x}")
    }
}

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    /// Number, written with 17 significant digits.
    Num(f64),
    /// Integer.
    Int(i64),
    /// Text.
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::Int(i as i64)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.into())
    }
}

/// Writes a CSV file preceded by `# `-prefixed header lines carrying the
/// JSON header.
pub fn write_csv(path: &Path, header: &Header, columns: &[&str], rows: &[Vec<Cell>]) -> Result<(), IoError> {
    let file_err = |source| IoError::File { path: path.into(), source };
    let mut out = BufWriter::new(fs::File::create(path).map_err(file_err)?);
    let json = serde_json::to_string(header).expect("header serializes");
    writeln!(out, "# {json}").map_err(file_err)?;
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |source| IoError::Csv { path: path.into(), source };
    w.write_record(columns).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(Cell::render)).map_err(csv_err)?;
    }
    w.flush().map_err(file_err)?;
    Ok(())
}

/// Parses `"a:b:h"` into the points `a, a+h, …` not exceeding `b`.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("grid must look like a:b:h, got {spec:?}"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("bad number {p:?} in grid: {e}")))
        .collect::<Result<_, _>>()?;
    let (a, b, h) = (nums[0], nums[1], nums[2]);
    if !(h > 0.0) || !(b >= a) || !a.is_finite() || !b.is_finite() {
        return Err(format!("grid needs a <= b and h > 0, got {spec:?}"));
    }
    let n = ((b - a) / h + 1e-9).floor() as usize;
    if n > 50_000_000 {
        return Err(format!("grid {spec:?} has too many points"));
    }
    Ok((0..=n).map(|i| a + i as f64 * h).collect())
}

/// Parses `"a:b:n"` into `n` evenly spaced points from `a` to `b`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>, String> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(format!("range must look like a:b:n, got {spec:?}"));
    }
    let a: f64 = parts[0].trim().parse().map_err(|e| format!("bad number in range: {e}"))?;
    let b: f64 = parts[1].trim().parse().map_err(|e| format!("bad number in range: {e}"))?;
    let n: usize = parts[2].trim().parse().map_err(|e| format!("bad count in range: {e}"))?;
    if n < 2 || !(b > a) {
        return Err(format!("range needs a < b and n >= 2, got {spec:?}"));
    }
    Ok((0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect())
}

/// Parses a comma-separated list of levels.
pub fn parse_levels(spec: &str) -> Result<Vec<f64>, String> {
    spec.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|e| format!("bad barrier {s:?}: {e}")))
        .collect()
}
