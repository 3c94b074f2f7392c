//! Result files and the run manifest.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

/// A named table: column headers and rows of numbers or strings.
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Table { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Numbers that JSON cannot carry (infinite EVM of a perfect link, say)
/// are written as strings.
pub fn num(v: f64) -> Value {
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config: Option<String>,
    run_id: &'a str,
    seed: u64,
    threads: usize,
    engine: &'a str,
    engine_version: &'a str,
    format: &'a str,
    outputs: &'a [String],
}

pub struct Writer {
    pub dir: PathBuf,
    pub format: Format,
    pub run_id: String,
    written: Vec<String>,
}

impl Writer {
    pub fn new(dir: &Path, format: Format, run_id: String) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Writer { dir: dir.to_path_buf(), format, run_id, written: Vec::new() })
    }

    pub fn text(&mut self, file: &str, body: &str) -> std::io::Result<()> {
        fs::write(self.dir.join(file), body)?;
        self.written.push(file.to_string());
        Ok(())
    }

    pub fn table(&mut self, t: &Table) -> std::io::Result<()> {
        let (file, bytes) = match self.format {
            Format::Csv => (format!("{}.csv", t.name), self.csv(t)?),
            Format::Json => (format!("{}.json", t.name), self.json(t)?),
        };
        fs::write(self.dir.join(&file), bytes)?;
        self.written.push(file);
        Ok(())
    }

    fn csv(&self, t: &Table) -> std::io::Result<Vec<u8>> {
        let mut out = Vec::new();
        writeln!(out, "# run {}, manifest manifest.json", self.run_id)?;
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(&t.columns)?;
        for row in &t.rows {
            w.write_record(row.iter().map(|v| match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            }))?;
        }
        w.flush()?;
        drop(w);
        Ok(out)
    }

    fn json(&self, t: &Table) -> std::io::Result<Vec<u8>> {
        let rows: Vec<Value> = t
            .rows
            .iter()
            .map(|r| Value::Object(t.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect()))
            .collect();
        let doc = json!({ "manifest": "manifest.json", "run_id": self.run_id, "rows": rows });
        let mut s = serde_json::to_vec_pretty(&doc)?;
        s.push(b'\n');
        Ok(s)
    }

    /// Writes `manifest.json` last, so its presence marks a complete run.
    pub fn finish(self, command: &str, config: Option<&Path>, seed: u64, threads: usize) -> std::io::Result<()> {
        let m = Manifest {
            command,
            config: config.map(|p| p.display().to_string()),
            run_id: &self.run_id,
            seed,
            threads,
            engine: "fcfb",
            engine_version: fcfb::VERSION,
            format: match self.format {
                Format::Csv => "csv",
                Format::Json => "json",
            },
            outputs: &self.written,
        };
        let mut s = serde_json::to_vec_pretty(&m)?;
        s.push(b'\n');
        fs::write(self.dir.join("manifest.json"), s)
    }
}
