//! Tab-separated per-step loss log.
//!
//! The first line names the columns (`step` then every loss term); each
//! further line holds one step. Values are written in shortest round-trip
//! form, so reading a log back gives the exact numbers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use strokevid_core::losses::LossReport;

use crate::{format_err, io_err, Result};

pub fn header() -> String {
    let mut s = String::from("step");
    for f in LossReport::FIELDS {
        s.push('\t');
        s.push_str(f);
    }
    s
}

pub fn format_row(step: u64, r: &LossReport) -> String {
    let mut s = step.to_string();
    for v in r.values() {
        s.push('\t');
        s.push_str(&v.to_string());
    }
    s
}

fn parse_row(line: &str) -> Result<(u64, LossReport)> {
    let bad = || format_err(format!("bad metrics row: {line}"));
    let mut f = line.split('\t');
    let step = f.next().and_then(|s| s.parse().ok()).ok_or_else(bad)?;
    let v: Vec<f64> = f.map(|s| s.parse().map_err(|_| bad())).collect::<Result<_>>()?;
    let [rec1, rec2, gan1_g, gan1_d, gan2_g, gan2_d, perceptual, total_g, total_d] =
        <[f64; 9]>::try_from(v).map_err(|_| bad())?;
    Ok((
        step,
        LossReport {
            rec1,
            rec2,
            gan1_g,
            gan1_d,
            gan2_g,
            gan2_d,
            perceptual,
            total_g,
            total_d,
        },
    ))
}

pub fn read(path: &Path) -> Result<Vec<(u64, LossReport)>> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    let mut lines = text.lines();
    if lines.next() != Some(header().as_str()) {
        return Err(format_err(format!("{} lacks the metrics header", path.display())));
    }
    lines.map(parse_row).collect()
}

/// An open log that flushes after every row.
pub struct MetricsLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl MetricsLog {
    /// Starts a new log, replacing any existing file.
    pub fn create(path: &Path) -> Result<Self> {
        let file = File::create(path).map_err(io_err(path))?;
        let mut log = MetricsLog {
            path: path.to_path_buf(),
            out: BufWriter::new(file),
        };
        log.line(&header())?;
        Ok(log)
    }

    /// Continues a log after step `step`, dropping any later rows left by an
    /// interrupted run. A missing log is created.
    pub fn resume(path: &Path, step: u64) -> Result<Self> {
        if !path.exists() {
            return Self::create(path);
        }
        let kept: Vec<_> = read(path)?.into_iter().filter(|(s, _)| *s <= step).collect();
        let mut log = Self::create(path)?;
        for (s, r) in &kept {
            log.append(*s, r)?;
        }
        Ok(log)
    }

    pub fn append(&mut self, step: u64, report: &LossReport) -> Result<()> {
        self.line(&format_row(step, report))
    }

    fn line(&mut self, s: &str) -> Result<()> {
        writeln!(self.out, "{s}")
            .and_then(|_| self.out.flush())
            .map_err(io_err(&self.path))
    }
}

