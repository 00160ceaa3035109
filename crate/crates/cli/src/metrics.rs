//! Append-only metrics log: a config header line, then one JSON object per
//! optimizer step. Two runs with the same seed produce identical bytes.

use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Write};
use std::path::Path;

use selnmt_core::StepMetrics;

use crate::corpus_io::FileHeader;
use crate::fail::{io_fail, Failure};
use crate::runconfig::RunConfig;

pub struct MetricsWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl MetricsWriter {
    /// Starts a fresh log with the effective config as its first line.
    pub fn create(path: &Path, config: &RunConfig) -> Result<Self, Failure> {
        let file = File::create(path).map_err(|e| io_fail(path, e))?;
        let mut w = Self { out: BufWriter::new(file), path: path.to_path_buf() };
        let header = FileHeader::new("selnmt/metrics", config);
        w.line(&serde_json::to_string(&header).expect("header serializes"))?;
        Ok(w)
    }

    /// Reopens an existing log to continue a resumed run; the header was
    /// written by the original run.
    pub fn append(path: &Path) -> Result<Self, Failure> {
        let file = OpenOptions::new()
            .append(true)
            .open(path)
            .map_err(|e| io_fail(path, e))?;
        Ok(Self { out: BufWriter::new(file), path: path.to_path_buf() })
    }

    pub fn log(&mut self, metrics: &StepMetrics) -> Result<(), Failure> {
        self.line(&serde_json::to_string(metrics).expect("metrics serialize"))
    }

    fn line(&mut self, text: &str) -> Result<(), Failure> {
        self.out
            .write_all(text.as_bytes())
            .and_then(|_| self.out.write_all(b"\n"))
            .map_err(|e| io_fail(&self.path, e))
    }

    pub fn finish(mut self) -> Result<(), Failure> {
        self.out.flush().map_err(|e| io_fail(&self.path, e))
    }
}
