//! Per-run report: the exact configuration echo plus the artifact listing,
//! and (opt-in) wall-clock stage timings.
//!
//! Timings are written only when requested: they vary run to run, and every
//! default artifact of a command must be byte-identical across reruns with
//! the same seed.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use oscmodes::error::{Error, Result};
use oscmodes::metrics::MetricsReport;

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    /// The fully resolved configuration; re-running the command with this
    /// config reproduces every artifact bit-for-bit on the same build.
    pub config: serde_json::Value,
    pub artifacts: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metrics: Option<MetricsReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<BTreeMap<String, u128>>,
}

impl RunReport {
    pub fn new(command: &str, config: serde_json::Value) -> Self {
        RunReport {
            command: command.to_string(),
            config,
            artifacts: Vec::new(),
            metrics: None,
            extra: None,
            timings_ms: None,
        }
    }

    pub fn write(&self, out_dir: &Path) -> Result<()> {
        let path = out_dir.join("run_report.json");
        let text = serde_json::to_string_pretty(self).expect("report serializes");
        std::fs::write(&path, text).map_err(|e| Error::io(path.display().to_string(), e))
    }
}

/// Stage stopwatch: always logs to stderr, collects for the report only
/// when `--timings` asked for it.
pub struct StageClock {
    collect: bool,
    timings: BTreeMap<String, u128>,
}

impl StageClock {
    pub fn new(collect: bool) -> Self {
        StageClock { collect, timings: BTreeMap::new() }
    }

    pub fn stage<T>(&mut self, name: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        let elapsed = start.elapsed();
        eprintln!("[{name}] {:.2?}", elapsed);
        if self.collect {
            self.timings.insert(name.to_string(), elapsed.as_millis());
        }
        out
    }

    pub fn into_timings(self) -> Option<BTreeMap<String, u128>> {
        if self.collect {
            Some(self.timings)
        } else {
            None
        }
    }
}
