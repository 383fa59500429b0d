//! CSV and JSON export. Floats in CSV carry 17 significant digits; JSON
//! objects are written with lexicographically sorted keys.

use std::path::Path;

use cartan_core::ode::Trajectory;
use serde_json::Value;

use crate::scene::{Failure, Res};

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Float(v) if v.is_finite() => format!("{v:.16e}"),
            Cell::Float(v) => format!("{v}"),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Table {
        Table { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.iter().map(Cell::render).collect::<Vec<_>>().join(","));
            s.push('\n');
        }
        s
    }
}

/// Columns t, x1..xn.
pub fn trajectory_table(tr: &Trajectory) -> Table {
    let mut header = vec!["t".to_string()];
    header.extend((1..=tr.dim()).map(|i| format!("x{i}")));
    let rows = tr.t.iter().zip(&tr.x).map(|(t, x)| std::iter::once(Cell::Float(*t)).chain(x.iter().map(|v| Cell::Float(*v))).collect()).collect();
    Table { header, rows }
}

/// What a subcommand produced. `failure` is set when the artifacts are
/// still worth writing but the run must not report success.
pub struct Report {
    pub json: Value,
    pub table: Table,
    pub failure: Option<Failure>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Format {
    Csv,
    Json,
}

pub fn format_of(path: &str) -> Res<Format> {
    match Path::new(path).extension().and_then(|e| e.to_str()).map(str::to_ascii_lowercase).as_deref() {
        Some("csv") => Ok(Format::Csv),
        Some("json") => Ok(Format::Json),
        _ => Err(Failure::Usage(format!("--out {path}: extension must be .csv or .json"))),
    }
}

pub fn render(report: &Report, format: Format) -> String {
    match format {
        Format::Csv => report.table.render(),
        // serde_json's default map is ordered by key
        Format::Json => {
            let mut s = serde_json::to_string_pretty(&report.json).expect("values serialize");
            s.push('\n');
            s
        }
    }
}
