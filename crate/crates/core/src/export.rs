//! Tabular results and their CSV / JSON serialisation.
//!
//! CSV files carry a `#`-prefixed provenance block (tool version, command,
//! config SHA-256, generation time) followed by one header row; numbers are
//! written in scientific notation with 13 significant digits.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Num(f64),
    Text(String),
    Missing,
}

impl Cell {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Cell::Num(x) => Some(*x),
            _ => None,
        }
    }

    fn csv(&self) -> String {
        match self {
            Cell::Num(x) => format_number(*x),
            Cell::Text(s) => s.clone(),
            Cell::Missing => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

pub fn format_number(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.12e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new<S: AsRef<str>>(columns: &[S]) -> Self {
        Table { columns: columns.iter().map(|c| c.as_ref().to_string()).collect(), rows: Vec::new() }
    }

    /// Table from equally long numeric columns.
    pub fn from_columns<S: AsRef<str>>(names: &[S], cols: &[&[f64]]) -> Result<Self> {
        let n = cols.first().map_or(0, |c| c.len());
        if names.len() != cols.len() || cols.iter().any(|c| c.len() != n) {
            return Err(Error::InvalidSpectrum("column lengths differ".into()));
        }
        let mut t = Table::new(names);
        for i in 0..n {
            t.rows.push(cols.iter().map(|c| Cell::Num(c[i])).collect());
        }
        Ok(t)
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Numeric column, `None` entries for text or missing cells.
    pub fn column(&self, name: &str) -> Option<Vec<Option<f64>>> {
        let k = self.column_index(name)?;
        Some(self.rows.iter().map(|r| r[k].as_f64()).collect())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Provenance {
    pub command: String,
    pub config_sha256: String,
    /// Unix seconds; the only field that differs between re-runs.
    pub generated: Option<u64>,
}

impl Provenance {
    pub fn now(command: &str, config_sha256: &str) -> Self {
        let generated = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).ok().map(|d| d.as_secs());
        Provenance { command: command.to_string(), config_sha256: config_sha256.to_string(), generated }
    }
}

pub fn write_csv<W: Write>(w: &mut W, table: &Table, prov: &Provenance) -> std::io::Result<()> {
    writeln!(w, "# chiralpoint {VERSION}")?;
    writeln!(w, "# command: {}", prov.command)?;
    writeln!(w, "# config_sha256: {}", prov.config_sha256)?;
    if let Some(t) = prov.generated {
        writeln!(w, "# generated_unix: {t}")?;
    }
    writeln!(w, "{}", table.columns.join(","))?;
    for row in &table.rows {
        let line: Vec<String> = row.iter().map(Cell::csv).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    Ok(())
}

pub fn csv_string(table: &Table, prov: &Provenance) -> String {
    let mut buf = Vec::new();
    write_csv(&mut buf, table, prov).expect("writing to memory");
    String::from_utf8(buf).expect("utf-8")
}

/// Structured run record: config, results, optional summary and wall time.
pub fn run_record(table: &Table, prov: &Provenance, config: &Value, summary: Option<Value>, elapsed_s: f64) -> Value {
    json!({
        "tool": "chiralpoint",
        "version": VERSION,
        "command": prov.command,
        "config_sha256": prov.config_sha256,
        "generated_unix": prov.generated,
        "config": config,
        "results": table,
        "summary": summary,
        "timing": { "elapsed_s": elapsed_s },
    })
}

pub fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, contents)?;
    Ok(())
}

/// Read a numeric CSV, skipping `#` comments and a header row if present.
pub fn read_numeric_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed: std::result::Result<Vec<f64>, _> = fields.iter().map(|f| f.parse::<f64>()).collect();
        match parsed {
            Ok(v) => rows.push(v),
            Err(_) if rows.is_empty() => continue, // header
            Err(e) => return Err(Error::Parse { line: i + 1, column: 1, message: e.to_string() }),
        }
    }
    Ok(rows)
}
