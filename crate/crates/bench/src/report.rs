//! Deterministic CSV output.

use std::fs;
use std::path::Path;

use crate::error::{BenchError, Result};

pub const VERSION: &str = concat!("v", env!("CARGO_PKG_VERSION"));

/// Twelve significant digits in scientific notation.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.11e}")
    }
}

pub fn fmt_opt(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

/// `# config_hash=… seeds=… version=…`
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub config_hash: String,
    pub seeds: Vec<u64>,
}

impl Provenance {
    pub fn line(&self) -> String {
        let seeds: Vec<String> = self.seeds.iter().map(u64::to_string).collect();
        format!(
            "# config_hash={} seeds={} version={}\n",
            self.config_hash,
            seeds.join(";"),
            VERSION
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Table {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn render(&self, provenance: &Provenance) -> Result<Vec<u8>> {
        let mut out = provenance.line().into_bytes();
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(&self.header)?;
            for row in &self.rows {
                w.write_record(row)?;
            }
            w.flush().map_err(|e| BenchError::io("<csv buffer>", e))?;
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path, provenance: &Provenance) -> Result<()> {
        let bytes = self.render(provenance)?;
        fs::write(path, bytes).map_err(|e| BenchError::io(path, e))
    }
}
