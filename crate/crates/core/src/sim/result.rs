//! Uniformly sampled run output and its CSV form.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SimError};

/// Time series of named signals plus timing and run metadata.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct RunResult {
    pub names: Vec<String>,
    pub time: Vec<f64>,
    /// One column per name, each as long as `time`.
    pub columns: Vec<Vec<f64>>,
    /// Wall-clock seconds spent in the integration loop.
    pub wall_clock_s: f64,
    pub meta: BTreeMap<String, String>,
}

impl RunResult {
    pub fn new(names: Vec<String>) -> Self {
        let columns = vec![Vec::new(); names.len()];
        Self {
            names,
            columns,
            ..Default::default()
        }
    }

    pub fn push(&mut self, t: f64, values: &[f64]) {
        debug_assert_eq!(values.len(), self.columns.len());
        self.time.push(t);
        for (c, v) in self.columns.iter_mut().zip(values) {
            c.push(*v);
        }
    }

    pub fn len(&self) -> usize {
        self.time.len()
    }

    pub fn is_empty(&self) -> bool {
        self.time.is_empty()
    }

    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.names
            .iter()
            .position(|n| n == name)
            .map(|k| self.columns[k].as_slice())
    }

    pub fn column_or_err(&self, name: &str) -> Result<&[f64]> {
        self.column(name)
            .ok_or_else(|| SimError::config(format!("signal '{name}' not recorded")))
    }

    /// Copy with only the named signals, in the given order.
    pub fn select(&self, names: &[String]) -> Result<Self> {
        let mut out = RunResult::new(names.to_vec());
        let mut missing = Vec::new();
        for (k, n) in names.iter().enumerate() {
            match self.column(n) {
                Some(c) => out.columns[k] = c.to_vec(),
                None => missing.push(format!("signal '{n}' not recorded")),
            }
        }
        if !missing.is_empty() {
            return Err(SimError::Validation(missing));
        }
        out.time = self.time.clone();
        out.wall_clock_s = self.wall_clock_s;
        out.meta = self.meta.clone();
        Ok(out)
    }

    /// Value of `name` at the last sample at or before `t`.
    pub fn value_at(&self, name: &str, t: f64) -> Option<f64> {
        let c = self.column(name)?;
        let k = self.time.partition_point(|&x| x <= t);
        (k > 0).then(|| c[k - 1])
    }

    /// CSV text: header `time_s,<signals>`, LF endings, shortest round-trip
    /// decimal floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(16 * (self.names.len() + 1) * (self.time.len() + 1));
        out.push_str("time_s");
        for n in &self.names {
            out.push(',');
            out.push_str(n);
        }
        out.push('\n');
        for (k, t) in self.time.iter().enumerate() {
            let _ = write!(out, "{t}");
            for c in &self.columns {
                let _ = write!(out, ",{}", c[k]);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, path: &str) -> Result<Self> {
        let err = |m: String| SimError::Parse {
            path: path.to_string(),
            message: m,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(text.as_bytes());
        let header = rdr.headers().map_err(|e| err(e.to_string()))?.clone();
        if header.get(0) != Some("time_s") {
            return Err(err("first column must be time_s".into()));
        }
        let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
        let mut r = RunResult::new(names);
        let mut row = Vec::with_capacity(r.names.len());
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| err(e.to_string()))?;
            row.clear();
            for f in rec.iter() {
                row.push(
                    f.parse::<f64>()
                        .map_err(|e| err(format!("row {}: '{f}': {e}", line + 2)))?,
                );
            }
            r.push(row[0], &row[1..]);
        }
        Ok(r)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv()).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_csv(&text, &path.display().to_string())
    }
}
