//! Result sets and their on-disk layout:
//! `<out>/<command>/<config hash>/{rows.csv, summary.json, config.json}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::error::Result;

/// Full-precision float field (17 significant digits).
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Rounded percentage for display columns.
pub fn pct(x: f64) -> String {
    format!("{:.2}", 100.0 * x)
}

pub fn opt<T: ToString>(x: Option<T>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

/// A CSV table with a header row.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Meta {
    pub config_hash: String,
    pub version: &'static str,
    pub seed: u64,
}

/// Output of one command run.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultSet {
    pub command: &'static str,
    pub config: ExperimentConfig,
    pub rows: Table,
    /// Additional named tables, written next to `rows.csv`.
    pub extra: Vec<(String, Table)>,
    pub summary: Value,
    /// Failures that should make the process exit nonzero.
    pub asserted_failures: usize,
}

impl ResultSet {
    pub fn meta(&self) -> Meta {
        Meta { config_hash: self.config.hash(), version: env!("CARGO_PKG_VERSION"), seed: self.config.seed }
    }

    pub fn summary_json(&self) -> Value {
        json!({ "command": self.command, "meta": self.meta(), "results": self.summary })
    }

    pub fn table(&self, file: &str) -> Option<&Table> {
        if file == "rows.csv" {
            return Some(&self.rows);
        }
        self.extra.iter().find(|(name, _)| name == file).map(|(_, t)| t)
    }

    /// Writes every file and returns the run directory.
    pub fn write(&self, out: &Path) -> Result<PathBuf> {
        let dir = out.join(self.command).join(self.config.hash());
        fs::create_dir_all(&dir)?;
        fs::write(dir.join("rows.csv"), self.rows.to_csv()?)?;
        for (name, t) in &self.extra {
            fs::write(dir.join(name), t.to_csv()?)?;
        }
        fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&self.summary_json())? + "\n")?;
        fs::write(dir.join("config.json"), self.config.to_json_pretty() + "\n")?;
        Ok(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_formats() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(0.1).parse::<f64>().unwrap(), 0.1);
        assert_eq!(pct(0.79816), "79.82");
        assert_eq!(opt::<u64>(None), "");
    }

    #[test]
    fn csv_quoting() {
        let mut t = Table::new(["name", "params"]);
        t.push(vec!["r".into(), "L=3;p=0.7".into()]);
        t.push(vec!["a,b".into(), "x".into()]);
        assert_eq!(t.to_csv().unwrap(), "name,params\nr,L=3;p=0.7\n\"a,b\",x\n");
        assert_eq!(t.column("params"), Some(1));
    }
}
