//! Scenario runner: parses a TOML scenario, runs the requested checks in
//! dependency order and writes line-delimited JSON records plus a CSV summary.
//!
//! # Result schema (version 1)
//!
//! `results.jsonl` holds one JSON object per line, each with `schema` =
//! `"fkdrift-result"`, `version` and `kind`:
//!
//! * `header`: `scenario` (the validated scenario with defaults filled in),
//!   `tool_version`, `threads`.
//! * `check`: `check`, `status` (`pass`, `fail`, `inconclusive`, `error`),
//!   `wall_time_s`, `message`, `values` (check-specific numbers and error
//!   bounds).
//! * `trailer`: `complete` (always `true`), `exit_code`, `counts`.
//!
//! A run that stops early has no trailer and leaves an `INCOMPLETE` marker
//! file beside the results. `summary.csv` is rewritten after every check
//! with columns `check,status,wall_time_s,message`.

pub mod checks;
pub mod scenario;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};
use thiserror::Error;

pub use checks::{Outcome, Status, ALL_CHECKS};
pub use scenario::{parse_scenario, Scenario};

pub const RESULT_SCHEMA: &str = "fkdrift-result";
pub const RESULT_SCHEMA_VERSION: u32 = 1;
pub const INCOMPLETE_MARKER: &str = "INCOMPLETE";

#[derive(Debug, Error)]
pub enum RunnerError {
    #[error("parse error: {0}")]
    Parse(String),
    #[error("validation error: {0}")]
    Invalid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunnerError + '_ {
    move |source| RunnerError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One executed check.
#[derive(Clone, Debug)]
pub struct CheckRecord {
    pub check: String,
    pub status: Status,
    pub wall_time_s: f64,
    pub message: String,
    pub values: Value,
}

impl CheckRecord {
    fn to_json(&self) -> Value {
        json!({
            "schema": RESULT_SCHEMA,
            "version": RESULT_SCHEMA_VERSION,
            "kind": "check",
            "check": self.check,
            "status": self.status,
            "wall_time_s": self.wall_time_s,
            "message": self.message,
            "values": self.values,
        })
    }
}

#[derive(Clone, Debug)]
pub struct RunReport {
    pub records: Vec<CheckRecord>,
    pub exit_code: i32,
    pub out_dir: PathBuf,
}

/// 0 when every check passed, 2 on any failure or error, 3 when the only
/// shortfalls are inconclusive checks.
pub fn exit_code(records: &[CheckRecord]) -> i32 {
    if records.iter().any(|r| matches!(r.status, Status::Fail | Status::Error)) {
        2
    } else if records.iter().any(|r| r.status == Status::Inconclusive) {
        3
    } else {
        0
    }
}

fn panic_message(p: Box<dyn std::any::Any + Send>) -> String {
    if let Some(s) = p.downcast_ref::<&str>() {
        s.to_string()
    } else if let Some(s) = p.downcast_ref::<String>() {
        s.clone()
    } else {
        "panic with a non-string payload".into()
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn write_summary(path: &Path, records: &[CheckRecord]) -> Result<(), RunnerError> {
    let mut s = String::from("check,status,wall_time_s,message\n");
    for r in records {
        s.push_str(&format!(
            "{},{},{:.3},{}\n",
            r.check,
            r.status.as_str(),
            r.wall_time_s,
            csv_field(&r.message)
        ));
    }
    fs::write(path, s).map_err(io_err(path))
}

fn write_line(w: &mut impl Write, v: &Value, path: &Path) -> Result<(), RunnerError> {
    serde_json::to_writer(&mut *w, v).map_err(|e| RunnerError::Io {
        path: path.to_path_buf(),
        source: e.into(),
    })?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// Run every requested check of a validated scenario, writing results into
/// `out_dir`. `progress` receives each record as it completes.
pub fn run(sc: &Scenario, out_dir: &Path, mut progress: impl FnMut(&CheckRecord)) -> Result<RunReport, RunnerError> {
    sc.validate()?;
    let drift = sc.build_drift()?;
    fs::create_dir_all(out_dir).map_err(io_err(out_dir))?;
    let marker = out_dir.join(INCOMPLETE_MARKER);
    fs::write(&marker, "run in progress or interrupted\n").map_err(io_err(&marker))?;
    let results = out_dir.join("results.jsonl");
    let summary = out_dir.join("summary.csv");
    let mut w = BufWriter::new(File::create(&results).map_err(io_err(&results))?);
    write_line(
        &mut w,
        &json!({
            "schema": RESULT_SCHEMA,
            "version": RESULT_SCHEMA_VERSION,
            "kind": "header",
            "tool_version": env!("CARGO_PKG_VERSION"),
            "threads": rayon::current_num_threads(),
            "scenario": sc,
        }),
        &results,
    )?;
    write_summary(&summary, &[])?;

    let mut ctx = checks::Context::new(sc.clone(), drift);
    let mut records = Vec::new();
    for id in sc.ordered_checks() {
        let t = Instant::now();
        let outcome = match catch_unwind(AssertUnwindSafe(|| checks::run_check(id, &mut ctx))) {
            Ok(Ok(o)) => o,
            Ok(Err(e)) => checks::outcome_of_error(&e),
            Err(p) => Outcome {
                status: Status::Error,
                values: Value::Null,
                message: format!("panicked: {}", panic_message(p)),
            },
        };
        let rec = CheckRecord {
            check: id.to_string(),
            status: outcome.status,
            wall_time_s: t.elapsed().as_secs_f64(),
            message: outcome.message,
            values: outcome.values,
        };
        write_line(&mut w, &rec.to_json(), &results)?;
        records.push(rec);
        write_summary(&summary, &records)?;
        progress(records.last().unwrap());
    }

    let code = exit_code(&records);
    let count = |s: Status| records.iter().filter(|r| r.status == s).count();
    write_line(
        &mut w,
        &json!({
            "schema": RESULT_SCHEMA,
            "version": RESULT_SCHEMA_VERSION,
            "kind": "trailer",
            "complete": true,
            "exit_code": code,
            "counts": {
                "pass": count(Status::Pass),
                "fail": count(Status::Fail),
                "inconclusive": count(Status::Inconclusive),
                "error": count(Status::Error),
            },
        }),
        &results,
    )?;
    fs::remove_file(&marker).map_err(io_err(&marker))?;
    Ok(RunReport {
        records,
        exit_code: code,
        out_dir: out_dir.to_path_buf(),
    })
}
