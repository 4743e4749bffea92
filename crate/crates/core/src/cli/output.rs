use std::io::Write;
use std::path::Path;

use serde_json::Value;
use tempfile::NamedTempFile;

use super::config::OutputFormat;

/// Writes `bytes` to `dir/name` through a temporary file in `dir`, so readers
/// never see a partial file.
pub fn write_atomic(dir: &Path, name: &str, bytes: &[u8]) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(dir.join(name)).map_err(|e| e.error)?;
    Ok(())
}

pub fn write_json(dir: &Path, name: &str, value: &Value) -> std::io::Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(std::io::Error::other)?;
    text.push('\n');
    write_atomic(dir, name, text.as_bytes())
}

/// A table of scalar cells, written as CSV or as a JSON array of records.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Self { headers: headers.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        assert_eq!(row.len(), self.headers.len(), "row width must match the headers");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> std::io::Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        w.into_inner().map_err(|e| e.into_error())
    }

    pub fn to_json(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| Value::Object(self.headers.iter().map(|h| h.to_string()).zip(row.iter().cloned()).collect()))
                .collect(),
        )
    }

    /// Writes `dir/stem.csv` or `dir/stem.json`; returns the file name.
    pub fn write(&self, dir: &Path, stem: &str, format: OutputFormat) -> std::io::Result<String> {
        match format {
            OutputFormat::Csv => {
                let name = format!("{stem}.csv");
                write_atomic(dir, &name, &self.to_csv()?)?;
                Ok(name)
            }
            OutputFormat::Json => {
                let name = format!("{stem}.json");
                write_json(dir, &name, &self.to_json())?;
                Ok(name)
            }
        }
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
