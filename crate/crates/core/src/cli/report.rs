use std::fs;
use std::path::Path;

use serde::{de::DeserializeOwned, Deserialize, Serialize};

use super::CliError;

pub const SCHEMA: &str = "nsgeom.report/1";

/// One checked invariant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "String::is_empty", default)]
    pub detail: String,
}

impl AuditEntry {
    /// Passes when `value <= tolerance`.
    pub fn at_most(name: &str, value: f64, tolerance: f64) -> Self {
        Self {
            name: name.into(),
            pass: value <= tolerance,
            value,
            tolerance,
            detail: String::new(),
        }
    }

    pub fn flag(name: &str, pass: bool) -> Self {
        Self {
            name: name.into(),
            pass,
            value: if pass { 1.0 } else { 0.0 },
            tolerance: 1.0,
            detail: String::new(),
        }
    }

    pub fn with_detail(mut self, detail: impl Into<String>) -> Self {
        self.detail = detail.into();
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub schema: String,
    pub tool_version: String,
    pub command: String,
    pub seed: u64,
    pub config: serde_json::Value,
    pub tables: serde_json::Value,
    pub audits: Vec<AuditEntry>,
    pub pass: bool,
}

impl DiagnosticsReport {
    pub fn new(command: &str, seed: u64, config: &impl Serialize, tables: serde_json::Value, audits: Vec<AuditEntry>) -> Self {
        Self {
            schema: SCHEMA.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed,
            config: serde_json::to_value(config).unwrap_or(serde_json::Value::Null),
            pass: audits.iter().all(|a| a.pass),
            tables,
            audits,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Writes to `path`, or stdout without one.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        match path {
            Some(p) => write_text(p, &self.to_json()),
            None => {
                print!("{}", self.to_json());
                Ok(())
            }
        }
    }
}

pub fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Output(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, text).map_err(|e| CliError::Output(format!("{}: {e}", path.display())))
}

/// Flat CSV table with a header from the row's field names.
pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Output(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Output(e.to_string()))?;
    write_text(path, &String::from_utf8(bytes).expect("csv is utf-8"))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| CliError::Input(e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<T>, _>>()
        .map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

/// Row of the flux table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FluxRow {
    pub t: f64,
    pub z: f64,
    pub r: f64,
    pub gamma: f64,
    pub w: f64,
    pub b1: f64,
    pub b2: f64,
    pub ineq_lhs: f64,
    pub id_0115_3_resid: f64,
    pub id_0115_4_resid: f64,
}

pub const FLUX_COLUMNS: &str = "t,z,r,gamma,w,b1,b2,ineq_lhs,id_0115_3_resid,id_0115_4_resid";

/// Vorticity direction in spherical angles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionRow {
    /// Polar angle from `e3`.
    pub theta: f64,
    /// Azimuth in `(-pi, pi]`.
    pub phi: f64,
}

impl DirectionRow {
    pub fn of(d: [f64; 3]) -> Self {
        Self {
            theta: d[2].clamp(-1.0, 1.0).acos(),
            phi: d[1].atan2(d[0]),
        }
    }
}

/// Scale quantities per center and radius.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleRow {
    pub center: usize,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub r: f64,
    #[serde(rename = "F")]
    pub f: f64,
    #[serde(rename = "E")]
    pub e: f64,
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "D")]
    pub d: f64,
}

/// Supremum of `Gamma` per dyadic level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub level: usize,
    pub r: f64,
    pub sup_gamma: f64,
}
