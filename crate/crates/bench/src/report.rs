use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use optiq::TraceRecord;
use serde::{Deserialize, Serialize};

use crate::error::BenchError;
use crate::suite::SuiteSpec;

pub const CSV_HEADER: [&str; 8] =
    ["problem", "n", "solver", "status", "iterations", "wall_time_s", "f_final", "grad_norm_final"];

pub const TRACE_HEADER: [&str; 11] = [
    "iteration",
    "t",
    "dt",
    "f_value",
    "grad_norm",
    "kind",
    "quiescent_count",
    "promoted_count",
    "demoted_count",
    "factored_size",
    "nq_velocity_energy",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Csv,
    Json,
}

impl FromStr for Format {
    type Err = BenchError;

    fn from_str(s: &str) -> Result<Self, BenchError> {
        match s {
            "csv" => Ok(Format::Csv),
            "json" => Ok(Format::Json),
            _ => Err(BenchError::Config(format!("unknown format `{s}` (expected csv or json)"))),
        }
    }
}

impl fmt::Display for Format {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Format::Csv => "csv",
            Format::Json => "json",
        })
    }
}

/// JSON has no NaN or infinity; those are written as strings.
mod float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_str(&v.to_string())
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Str(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(v) => Ok(v),
            Repr::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub problem: String,
    pub n: usize,
    pub solver: String,
    /// A solver status, or `error` when the run could not be carried out.
    pub status: String,
    pub iterations: usize,
    #[serde(with = "float")]
    pub wall_time_s: f64,
    #[serde(with = "float")]
    pub f_final: f64,
    #[serde(with = "float")]
    pub grad_norm_final: f64,
    /// Factorized order → count.
    pub factored_block_sizes: BTreeMap<usize, usize>,
    pub runtime_vs_newton: Option<f64>,
    pub message: Option<String>,
}

impl Row {
    pub fn failed(problem: &str, n: usize, solver: &str, message: String) -> Self {
        Self {
            problem: problem.to_string(),
            n,
            solver: solver.to_string(),
            status: "error".to_string(),
            iterations: 0,
            wall_time_s: 0.0,
            f_final: f64::NAN,
            grad_norm_final: f64::NAN,
            factored_block_sizes: BTreeMap::new(),
            runtime_vs_newton: None,
            message: Some(message),
        }
    }

    pub fn converged(&self) -> bool {
        self.status == "converged"
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StartRecord {
    pub problem: String,
    pub n: usize,
    pub x0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metadata {
    pub eta: f64,
    pub max_iterations: usize,
    pub starts: Vec<StartRecord>,
    pub config: SuiteSpec,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub metadata: Metadata,
    pub rows: Vec<Row>,
}

/// 17 significant digits.
fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

fn csv_writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

impl BenchmarkReport {
    pub fn to_csv(&self) -> Result<String, BenchError> {
        let mut w = csv_writer(Vec::new());
        w.write_record(CSV_HEADER)?;
        for r in &self.rows {
            w.write_record([
                r.problem.clone(),
                r.n.to_string(),
                r.solver.clone(),
                r.status.clone(),
                r.iterations.to_string(),
                fmt_float(r.wall_time_s),
                fmt_float(r.f_final),
                fmt_float(r.grad_norm_final),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }

    pub fn to_json(&self) -> Result<String, BenchError> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self, BenchError> {
        Ok(serde_json::from_str(text)?)
    }
}

pub fn emit_report(report: &BenchmarkReport, format: Format, path: &Path) -> Result<(), BenchError> {
    let text = match format {
        Format::Csv => report.to_csv()?,
        Format::Json => report.to_json()?,
    };
    fs::write(path, text)?;
    Ok(())
}

pub fn trace_csv(trace: &[TraceRecord]) -> Result<String, BenchError> {
    let mut w = csv_writer(Vec::new());
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        w.write_record([
            r.iteration.to_string(),
            fmt_float(r.t),
            fmt_float(r.dt),
            fmt_float(r.f_value),
            fmt_float(r.grad_norm),
            r.kind.as_str().to_string(),
            r.quiescent_count.to_string(),
            r.promoted_count.to_string(),
            r.demoted_count.to_string(),
            r.factored_size.map(|s| s.to_string()).unwrap_or_default(),
            fmt_float(r.nq_velocity_energy),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| BenchError::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

pub fn write_trace_csv(trace: &[TraceRecord], path: &Path) -> Result<(), BenchError> {
    fs::write(path, trace_csv(trace)?)?;
    Ok(())
}
