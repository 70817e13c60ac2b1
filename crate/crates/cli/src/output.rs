use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

/// Rows of plot-ready numbers with named columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(columns: Vec<&'static str>) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        self.push_text(row.iter().map(f64::to_string).collect());
    }

    pub fn push_text(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with a leading `# config-sha256:` comment line.
    pub fn to_csv(&self, digest: &str) -> Result<String> {
        let mut out = String::new();
        writeln!(out, "# config-sha256: {digest}")?;
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.columns)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        out.push_str(std::str::from_utf8(&w.into_inner().context("flushing csv")?)?);
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// What a command produced: a JSON report and, for most commands, a table.
#[derive(Debug, Clone)]
pub struct CommandOutput {
    pub name: &'static str,
    pub json: String,
    pub table: Option<Table>,
    /// Set when the run completed but a tolerance check failed.
    pub failure: Option<String>,
}

impl CommandOutput {
    pub fn new<T: Serialize>(name: &'static str, report: &T, table: Option<Table>) -> Result<Self> {
        Ok(Self {
            name,
            json: serde_json::to_string_pretty(report)? + "\n",
            table,
            failure: None,
        })
    }

    /// With `dir`, writes `<name>.json` and `<name>.csv`; otherwise prints
    /// the requested format to `stdout`.
    pub fn emit(&self, digest: &str, format: Format, dir: Option<&Path>, stdout: &mut impl Write) -> Result<()> {
        match dir {
            Some(dir) => {
                std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
                let json = dir.join(format!("{}.json", self.name));
                std::fs::write(&json, &self.json).with_context(|| format!("writing {}", json.display()))?;
                if let Some(table) = &self.table {
                    let csv = dir.join(format!("{}.csv", self.name));
                    std::fs::write(&csv, table.to_csv(digest)?).with_context(|| format!("writing {}", csv.display()))?;
                }
            }
            None => match (format, &self.table) {
                (Format::Csv, Some(table)) => stdout.write_all(table.to_csv(digest)?.as_bytes())?,
                _ => stdout.write_all(self.json.as_bytes())?,
            },
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_header_and_rows() {
        let mut t = Table::new(vec!["a", "b"]);
        t.push(vec![1.0, 0.25]);
        t.push(vec![1e-12, -3.0]);
        let csv = t.to_csv("abc").unwrap();
        assert_eq!(csv, "# config-sha256: abc\na,b\n1,0.25\n0.000000000001,-3\n");
    }
}
