//! Run logs and their CSV form.
//!
//! A file starts with `#`-prefixed lines holding the code version and the
//! echoed configuration, then the column header
//! `iter,y,best,fit_s,sample_s,afo_s,wall_s,<variables…>`, one row per
//! evaluation, and finally a `# summary` line. Numbers use the shortest
//! representation that parses back to the same `f64`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::bench::RawPoint;
use crate::{Error, Result};

pub const CODE_VERSION: &str = concat!("hybo ", env!("CARGO_PKG_VERSION"));

/// Columns that hold wall-clock measurements.
pub const TIMING_COLUMNS: [&str; 4] = ["fit_s", "sample_s", "afo_s", "wall_s"];

/// One objective evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct IterRecord {
    /// 1-based evaluation index, counting the initial design.
    pub iter: usize,
    pub point: RawPoint,
    /// Objective value (minimized).
    pub y: f64,
    /// Lowest objective value so far.
    pub best: f64,
    pub fit_s: f64,
    pub sample_s: f64,
    pub afo_s: f64,
    /// Wall-clock time of the whole iteration.
    pub wall_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunLog {
    pub config: RunConfig,
    pub version: String,
    pub variables: Vec<String>,
    pub records: Vec<IterRecord>,
    pub total_wall_s: f64,
}

impl RunLog {
    pub fn final_best(&self) -> Option<f64> {
        self.records.last().map(|r| r.best)
    }

    /// The record with the lowest objective value (earliest on ties).
    pub fn argbest(&self) -> Option<&IterRecord> {
        self.records
            .iter()
            .fold(None, |acc: Option<&IterRecord>, r| match acc {
                Some(b) if b.y <= r.y => Some(b),
                _ => Some(r),
            })
    }

    pub fn incumbent_curve(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.best).collect()
    }

    /// Total time spent in hyper-parameter inference.
    pub fn total_sample_s(&self) -> f64 {
        self.records.iter().map(|r| r.sample_s).sum()
    }

    pub fn emit(&self, path: &Path) -> Result<()> {
        let mut w = CsvWriter::create(path, &self.config, &self.variables)?;
        for r in &self.records {
            w.append(r)?;
        }
        if !self.records.is_empty() {
            w.finish(self)?;
        }
        Ok(())
    }

    /// The whole file as a string.
    pub fn to_csv_string(&self) -> String {
        let mut out = header_text(&self.config, &self.variables);
        for r in &self.records {
            out.push_str(&row_text(r));
        }
        if !self.records.is_empty() {
            out.push_str(&summary_text(self));
        }
        out
    }
}

fn header_text(config: &RunConfig, variables: &[String]) -> String {
    let mut out = format!("# version: {CODE_VERSION}\n");
    for line in config.to_toml().lines() {
        out.push_str(&format!("# config: {line}\n"));
    }
    out.push_str("iter,y,best,");
    out.push_str(&TIMING_COLUMNS.join(","));
    for v in variables {
        out.push(',');
        out.push_str(v);
    }
    out.push('\n');
    out
}

fn row_text(r: &IterRecord) -> String {
    let mut out = format!(
        "{},{},{},{},{},{},{}",
        r.iter, r.y, r.best, r.fit_s, r.sample_s, r.afo_s, r.wall_s
    );
    for d in &r.point.discrete {
        out.push_str(&format!(",{d}"));
    }
    for c in &r.point.continuous {
        out.push_str(&format!(",{c}"));
    }
    out.push('\n');
    out
}

fn summary_text(log: &RunLog) -> String {
    let best = log.argbest().expect("non-empty log");
    format!(
        "# summary: final_best={} argbest_iter={} total_wall_s={}\n",
        best.y, best.iter, log.total_wall_s
    )
}

/// Incremental CSV output: the header is written on creation and each row
/// is flushed as soon as it is appended, so an aborted run leaves a valid
/// prefix behind.
pub struct CsvWriter {
    path: PathBuf,
    file: File,
}

impl CsvWriter {
    pub fn create(path: &Path, config: &RunConfig, variables: &[String]) -> Result<Self> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let mut file = File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(header_text(config, variables).as_bytes())
            .map_err(|e| Error::io(path, e))?;
        Ok(Self {
            path: path.to_path_buf(),
            file,
        })
    }

    pub fn append(&mut self, r: &IterRecord) -> Result<()> {
        self.file
            .write_all(row_text(r).as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }

    pub fn finish(&mut self, log: &RunLog) -> Result<()> {
        self.file
            .write_all(summary_text(log).as_bytes())
            .and_then(|_| self.file.flush())
            .map_err(|e| Error::io(&self.path, e))
    }
}

/// Data rows of an emitted CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedCsv {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl ParsedCsv {
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Values of a numeric column.
    pub fn floats(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .column(name)
            .ok_or_else(|| Error::Config(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("column `{name}`: {e}")))
            })
            .collect()
    }

    /// Rows with the timing columns blanked, for comparing runs.
    pub fn without_timings(&self) -> Vec<Vec<String>> {
        let mask: Vec<usize> = TIMING_COLUMNS.iter().filter_map(|c| self.column(c)).collect();
        self.rows
            .iter()
            .map(|r| {
                r.iter()
                    .enumerate()
                    .map(|(i, v)| if mask.contains(&i) { String::new() } else { v.clone() })
                    .collect()
            })
            .collect()
    }
}

pub fn parse_csv(path: &Path) -> Result<ParsedCsv> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut columns = None;
    let mut rows = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.starts_with('#') || line.is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        match &columns {
            None => columns = Some(fields),
            Some(cols) => {
                if fields.len() != cols.len() {
                    return Err(Error::Config(format!(
                        "{}: row has {} fields, header has {}",
                        path.display(),
                        fields.len(),
                        cols.len()
                    )));
                }
                rows.push(fields);
            }
        }
    }
    let columns = columns.ok_or_else(|| Error::Config(format!("{}: no header", path.display())))?;
    Ok(ParsedCsv { columns, rows })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(iter: usize, y: f64, best: f64) -> IterRecord {
        IterRecord {
            iter,
            point: RawPoint {
                discrete: vec![3],
                continuous: vec![0.1 * iter as f64],
            },
            y,
            best,
            fit_s: 0.0,
            sample_s: 0.0,
            afo_s: 0.0,
            wall_s: 0.0,
        }
    }

    fn log(records: Vec<IterRecord>) -> RunLog {
        RunLog {
            config: RunConfig::default(),
            version: CODE_VERSION.into(),
            variables: vec!["a".into(), "b".into()],
            records,
            total_wall_s: 1.5,
        }
    }

    #[test]
    fn empty_log_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.csv");
        log(vec![]).emit(&path).unwrap();
        let parsed = parse_csv(&path).unwrap();
        assert!(parsed.rows.is_empty());
        assert_eq!(parsed.columns[..3], ["iter", "y", "best"]);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(!text.contains("summary"));
    }

    #[test]
    fn incumbent_curve_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.csv");
        let l = log(vec![
            record(1, 3.0, 3.0),
            record(2, 1.0 / 3.0, 1.0 / 3.0),
            record(3, 2.5, 1.0 / 3.0),
        ]);
        l.emit(&path).unwrap();
        let parsed = parse_csv(&path).unwrap();
        assert_eq!(parsed.rows.len(), 3);
        let best = parsed.floats("best").unwrap();
        assert_eq!(best, l.incumbent_curve());
        assert!(best.windows(2).all(|w| w[1] <= w[0]));
        assert_eq!(std::fs::read_to_string(&path).unwrap(), l.to_csv_string());
    }
}
