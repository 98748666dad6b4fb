//! Versioned JSON report shared by every subcommand.

use std::io::Write;
use std::path::Path;
use std::time::Duration;

use anyhow::{Context, Result};
use mallows_core::verify::CriterionRecord;
use serde::Serialize;
use serde_json::Value;

pub const SCHEMA: &str = "mallows-report/1";

#[derive(Debug, Serialize)]
pub struct Timing {
    pub wall_seconds: f64,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub schema: &'static str,
    pub kind: &'static str,
    pub seed: Option<u64>,
    /// Echo of the run parameters.
    pub spec: Value,
    pub results: Value,
    pub criteria: Vec<CriterionRecord>,
    /// Conjunction of the criterion verdicts.
    pub pass: bool,
    /// Kept apart from everything above so reports compare equal across runs.
    pub timing: Timing,
}

impl Report {
    pub fn new(
        kind: &'static str,
        seed: Option<u64>,
        spec: impl Serialize,
        results: impl Serialize,
        criteria: Vec<CriterionRecord>,
        elapsed: Duration,
    ) -> Result<Self> {
        Ok(Report {
            schema: SCHEMA,
            kind,
            seed,
            spec: serde_json::to_value(spec)?,
            results: serde_json::to_value(results)?,
            pass: criteria.iter().all(|c| c.pass),
            criteria,
            timing: Timing {
                wall_seconds: elapsed.as_secs_f64(),
            },
        })
    }

    /// One line per criterion on stderr.
    pub fn summarize(&self) {
        for c in &self.criteria {
            eprintln!(
                "[{}] {}: observed {:.6}, expected {:.6} ± {:.6}",
                if c.pass { "PASS" } else { "FAIL" },
                c.criterion,
                c.observed,
                c.expected,
                c.tolerance
            );
        }
    }
}

/// Writes to `path`, or stdout when absent.
pub fn write_output(path: Option<&Path>, body: &str) -> Result<()> {
    match path {
        Some(p) => std::fs::write(p, body).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(body.as_bytes())?;
            out.flush()?;
            Ok(())
        }
    }
}

pub fn emit(report: &Report, path: Option<&Path>) -> Result<()> {
    let mut body = serde_json::to_string_pretty(report)?;
    body.push('\n');
    write_output(path, &body)
}
