//! Per-iteration training metrics as plain CSV.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

pub const METRICS_HEADER: &str = "iteration,env_steps,mean_return,mean_episode_cost,violation_steps,cost_rate,cumulative_cost,mean_multiplier,max_multiplier,alpha,q_loss,qc_loss,policy_loss";

/// One training iteration. Means over an empty set (no finished episode, no
/// gradient step) are NaN.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricsRow {
    pub iteration: u64,
    pub env_steps: u64,
    pub mean_return: f64,
    /// Mean number of violation steps per finished episode.
    pub mean_episode_cost: f64,
    pub violation_steps: u64,
    /// Cumulative violation steps over cumulative env steps.
    pub cost_rate: f64,
    pub cumulative_cost: f64,
    pub mean_multiplier: f64,
    pub max_multiplier: f64,
    pub alpha: f64,
    pub q_loss: f64,
    pub qc_loss: f64,
    pub policy_loss: f64,
}

impl MetricsRow {
    /// Shortest decimal that parses back to the identical value.
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.env_steps,
            self.mean_return,
            self.mean_episode_cost,
            self.violation_steps,
            self.cost_rate,
            self.cumulative_cost,
            self.mean_multiplier,
            self.max_multiplier,
            self.alpha,
            self.q_loss,
            self.qc_loss,
            self.policy_loss
        )
    }

    pub fn parse_csv_line(line: &str) -> Result<Self> {
        let fields: Vec<&str> = line.trim_end().split(',').collect();
        if fields.len() != 13 {
            return Err(Error::Config(format!("metrics row needs 13 fields, got {}", fields.len())));
        }
        let int = |i: usize| {
            fields[i]
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("metrics field {i} ({:?}): {e}", fields[i])))
        };
        let float = |i: usize| {
            fields[i]
                .parse::<f64>()
                .map_err(|e| Error::Config(format!("metrics field {i} ({:?}): {e}", fields[i])))
        };
        Ok(MetricsRow {
            iteration: int(0)?,
            env_steps: int(1)?,
            mean_return: float(2)?,
            mean_episode_cost: float(3)?,
            violation_steps: int(4)?,
            cost_rate: float(5)?,
            cumulative_cost: float(6)?,
            mean_multiplier: float(7)?,
            max_multiplier: float(8)?,
            alpha: float(9)?,
            q_loss: float(10)?,
            qc_loss: float(11)?,
            policy_loss: float(12)?,
        })
    }
}

pub fn render_metrics(rows: &[MetricsRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(METRICS_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv_line());
    }
    out
}

pub fn write_metrics(path: &Path, rows: &[MetricsRow]) -> Result<()> {
    fs::write(path, render_metrics(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_metrics(text: &str) -> Result<Vec<MetricsRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim_end() == METRICS_HEADER => {}
        other => return Err(Error::Config(format!("unexpected metrics header {other:?}"))),
    }
    lines.filter(|l| !l.trim().is_empty()).map(MetricsRow::parse_csv_line).collect()
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_metrics(&text)
}

/// Appends rows as they are produced so a crashed run keeps its history.
pub struct MetricsWriter {
    file: fs::File,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        use std::io::Write;
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        writeln!(file, "{METRICS_HEADER}").map_err(|e| Error::io(path, e))?;
        Ok(MetricsWriter {
            file,
            path: path.to_path_buf(),
        })
    }

    pub fn append(&mut self, row: &MetricsRow) -> Result<()> {
        use std::io::Write;
        writeln!(self.file, "{}", row.to_csv_line()).map_err(|e| Error::io(&self.path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(i: u64) -> MetricsRow {
        MetricsRow {
            iteration: i,
            env_steps: 1000 * i,
            mean_return: 0.1 + 0.2,
            mean_episode_cost: f64::NAN,
            violation_steps: 3,
            cost_rate: 1.0 / 3.0,
            cumulative_cost: 7.0,
            mean_multiplier: 1e-300,
            max_multiplier: 12345.678901234567,
            alpha: std::f64::consts::E,
            q_loss: -0.0,
            qc_loss: 5e-324,
            policy_loss: -1.7976931348623157e308,
        }
    }

    #[test]
    fn header_only_for_no_rows() {
        assert_eq!(render_metrics(&[]), format!("{METRICS_HEADER}\n"));
        assert!(parse_metrics(&render_metrics(&[])).unwrap().is_empty());
    }

    #[test]
    fn round_trip_is_exact() {
        let rows = vec![row(1), row(2)];
        let back = parse_metrics(&render_metrics(&rows)).unwrap();
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.to_csv_line(), b.to_csv_line());
            assert_eq!(a.mean_return.to_bits(), b.mean_return.to_bits());
            assert_eq!(a.qc_loss.to_bits(), b.qc_loss.to_bits());
            assert_eq!(a.policy_loss.to_bits(), b.policy_loss.to_bits());
            assert!(b.mean_episode_cost.is_nan());
        }
    }

    #[test]
    fn rejects_bad_header_and_short_rows() {
        assert!(parse_metrics("a,b\n").is_err());
        assert!(MetricsRow::parse_csv_line("1,2,3").is_err());
    }
}
