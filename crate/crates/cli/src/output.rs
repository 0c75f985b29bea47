use std::fmt::Write as _;
use std::process::ExitCode;

use clap::ValueEnum;
use nare_sushi::Error;
use serde_json::json;

pub const SCHEMA_VERSION: u32 = 1;

pub const EXIT_OK: u8 = 0;
pub const EXIT_USAGE: u8 = 1;
pub const EXIT_BREAKDOWN: u8 = 2;
pub const EXIT_NO_CONVERGENCE: u8 = 3;
pub const EXIT_CLASSIFICATION: u8 = 4;
pub const EXIT_IO: u8 = 5;

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Debug)]
pub struct CliError {
    pub code: String,
    pub exit: u8,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError { code: "usage".into(), exit: EXIT_USAGE, message: message.into() }
    }

    /// Failure to read or write a problem or report, whatever the root cause.
    pub fn io(e: Error) -> Self {
        CliError { code: e.code().into(), exit: EXIT_IO, message: e.to_string() }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError { code: e.code().into(), exit: exit_code(&e), message: e.to_string() }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.into())
    }
}

pub fn exit_code(e: &Error) -> u8 {
    match e.root() {
        Error::Breakdown { .. }
        | Error::InitSingular { .. }
        | Error::SingularMatrix { .. }
        | Error::SingularH
        | Error::UVSingular
        | Error::RankDeficient { .. }
        | Error::CentralPairIllConditioned { .. }
        | Error::OrthogonalPair { .. }
        | Error::DegenerateSpectrum { .. }
        | Error::PoleHit { .. } => EXIT_BREAKDOWN,
        Error::NoConvergence { .. } | Error::QuadratureFailure => EXIT_NO_CONVERGENCE,
        Error::NotMNare(_) | Error::ClassificationAmbiguous { .. } => EXIT_CLASSIFICATION,
        Error::Io(_) | Error::Json(_) | Error::Parse(_) => EXIT_IO,
        _ => EXIT_USAGE,
    }
}

/// Message on standard error; in JSON mode also an error object on standard output.
pub fn report_error(e: &CliError, json: bool) -> ExitCode {
    eprintln!("error: {}", e.message);
    if json {
        let v = json!({
            "schema_version": SCHEMA_VERSION,
            "error": { "code": e.code, "exit_code": e.exit, "message": e.message },
        });
        println!("{v}");
    }
    ExitCode::from(e.exit)
}

/// Whether the raw command line asked for JSON output. Used when argument
/// parsing itself failed and no typed value is available.
pub fn json_requested() -> bool {
    let args: Vec<String> = std::env::args().collect();
    args.windows(2).any(|w| w[0] == "--format" && w[1] == "json") || args.iter().any(|a| a == "--format=json")
}

/// Shortest representation that round-trips; NaN and infinities spelled out.
pub fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:e}")
    } else {
        x.to_string()
    }
}

/// Short fixed-precision scientific form for tables.
pub fn sci(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.2e}")
    } else {
        x.to_string()
    }
}

pub fn csv(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = header.join(",");
    s.push('\n');
    for r in rows {
        s.push_str(&r.join(","));
        s.push('\n');
    }
    s
}

/// Right-aligned columns under a header line.
pub fn table(header: &[&str], rows: &[Vec<String>]) -> String {
    let widths: Vec<usize> = (0..header.len())
        .map(|j| rows.iter().map(|r| r[j].len()).chain([header[j].len()]).max().unwrap_or(0))
        .collect();
    let mut s = String::new();
    let line = |s: &mut String, cells: &[&str]| {
        let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&mut s, header);
    for r in rows {
        let cells: Vec<&str> = r.iter().map(String::as_str).collect();
        line(&mut s, &cells);
    }
    s
}

/// Two-column key/value table.
pub fn key_values(rows: &[(&str, String)]) -> String {
    let width = rows.iter().map(|r| r.0.len()).max().unwrap_or(0);
    let mut s = String::new();
    for (k, v) in rows {
        let _ = writeln!(s, "{k:<width$}  {v}");
    }
    s
}

/// One-record CSV from key/value pairs.
pub fn record_csv(rows: &[(&str, String)]) -> String {
    let header: Vec<&str> = rows.iter().map(|r| r.0).collect();
    csv(&header, &[rows.iter().map(|r| r.1.clone()).collect()])
}
