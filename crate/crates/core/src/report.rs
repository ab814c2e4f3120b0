//! Trace and result serialization, and cross-run comparison.

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::fs::File;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{RunTrace, TraceEvent, TraceRow};
use crate::problem::Sense;

pub const TRACE_COLUMNS: [&str; 6] =
    ["iteration", "wall_seconds", "cumulative_evaluations", "best_objective", "event", "worker_id"];

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("no traces to compare")]
    Empty,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_trace<W: Write>(trace: &RunTrace, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_COLUMNS)?;
    for r in &trace.rows {
        w.write_record([
            r.iteration.to_string(),
            format!("{:.6}", r.wall_seconds),
            r.cumulative_evaluations.to_string(),
            opt(r.best_objective),
            r.event.to_string(),
            opt(r.worker_id),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn write_trace_file(trace: &RunTrace, path: &Path) -> Result<(), ReportError> {
    let file = File::create(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    write_trace(trace, file)
}

/// Reads a trace written by [`write_trace`]; the `worker_id` column is
/// optional.
pub fn read_trace<R: Read>(input: R, path: &Path) -> Result<RunTrace, ReportError> {
    let bad = |message: String| ReportError::Malformed { path: path.to_path_buf(), message };
    let mut reader = csv::Reader::from_reader(input);
    let headers = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    let column = |name: &str| headers.iter().position(|h| h == name);
    let mut index = [0usize; 5];
    for (slot, name) in index.iter_mut().zip(&TRACE_COLUMNS[..5]) {
        *slot = column(name).ok_or_else(|| bad(format!("missing column {name}")))?;
    }
    let worker_column = column("worker_id");
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let at = |what: &str| format!("row {}: bad {what}", line + 1);
        let optional_f64 = |s: &str| -> Result<Option<f64>, String> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| at("best_objective"))
            }
        };
        let row = TraceRow {
            iteration: field(index[0]).parse().map_err(|_| bad(at("iteration")))?,
            wall_seconds: field(index[1]).parse().map_err(|_| bad(at("wall_seconds")))?,
            cumulative_evaluations: field(index[2]).parse().map_err(|_| bad(at("cumulative_evaluations")))?,
            best_objective: optional_f64(field(index[3])).map_err(bad)?,
            event: field(index[4]).parse::<TraceEvent>().map_err(bad)?,
            worker_id: match worker_column.map(field).filter(|s| !s.is_empty()) {
                None => None,
                Some(s) => Some(s.parse().map_err(|_| bad(at("worker_id")))?),
            },
        };
        rows.push(row);
    }
    Ok(RunTrace { rows })
}

pub fn read_trace_file(path: &Path) -> Result<RunTrace, ReportError> {
    let file = File::open(path).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    read_trace(file, path)
}

/// First row at which the incumbent reached its final value.
fn first_best(trace: &RunTrace) -> Option<&TraceRow> {
    let best = trace.final_best()?;
    trace.rows.iter().find(|r| r.best_objective == Some(best))
}

/// Evaluations spent before the incumbent first met `target`.
pub fn evaluations_to_target(trace: &RunTrace, target: f64, sense: Sense) -> Option<usize> {
    trace
        .rows
        .iter()
        .find(|r| r.best_objective.is_some_and(|b| sense.meets(b, target)))
        .map(|r| r.cumulative_evaluations)
}

/// Best incumbent after at most `evaluations` evaluations.
pub fn best_at_evaluations(trace: &RunTrace, evaluations: usize) -> Option<f64> {
    trace
        .rows
        .iter()
        .take_while(|r| r.cumulative_evaluations <= evaluations)
        .filter_map(|r| r.best_objective)
        .last()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonEntry {
    pub label: String,
    pub best_objective: Option<f64>,
    pub evaluations_to_best: Option<usize>,
    pub wall_time_to_best: Option<f64>,
    pub total_evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub sense: Sense,
    /// Best first; runs without an incumbent last.
    pub entries: Vec<ComparisonEntry>,
}

pub fn compare(traces: &[(String, RunTrace)], sense: Sense) -> Result<ComparisonSummary, ReportError> {
    if traces.is_empty() {
        return Err(ReportError::Empty);
    }
    let mut entries: Vec<ComparisonEntry> = traces
        .iter()
        .map(|(label, trace)| {
            let row = first_best(trace);
            ComparisonEntry {
                label: label.clone(),
                best_objective: trace.final_best(),
                evaluations_to_best: row.map(|r| r.cumulative_evaluations),
                wall_time_to_best: row.map(|r| r.wall_seconds),
                total_evaluations: trace.evaluations(),
            }
        })
        .collect();
    entries.sort_by(|a, b| match (a.best_objective, b.best_objective) {
        (Some(x), Some(y)) => {
            let by_value = match sense {
                Sense::Maximize => y.total_cmp(&x),
                Sense::Minimize => x.total_cmp(&y),
            };
            by_value.then(a.evaluations_to_best.cmp(&b.evaluations_to_best))
        }
        (Some(_), None) => Ordering::Less,
        (None, Some(_)) => Ordering::Greater,
        (None, None) => Ordering::Equal,
    });
    Ok(ComparisonSummary { sense, entries })
}

pub fn render_table(summary: &ComparisonSummary) -> String {
    let width = summary.entries.iter().map(|e| e.label.len()).max().unwrap_or(0).max(5);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:<4} {:<width$} {:>16} {:>12} {:>12} {:>8}",
        "rank", "trace", "best", "evals@best", "secs@best", "evals"
    );
    for (i, e) in summary.entries.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<4} {:<width$} {:>16} {:>12} {:>12} {:>8}",
            i + 1,
            e.label,
            e.best_objective.map_or("-".into(), |v| format!("{v:.6}")),
            e.evaluations_to_best.map_or("-".into(), |v| v.to_string()),
            e.wall_time_to_best.map_or("-".into(), |v| format!("{v:.3}")),
            e.total_evaluations,
        );
    }
    out
}

pub fn write_comparison<W: Write>(summary: &ComparisonSummary, out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["rank", "trace", "best_objective", "evaluations_to_best", "wall_time_to_best", "total_evaluations"])?;
    for (i, e) in summary.entries.iter().enumerate() {
        w.write_record([
            (i + 1).to_string(),
            e.label.clone(),
            opt(e.best_objective),
            opt(e.evaluations_to_best),
            opt(e.wall_time_to_best),
            e.total_evaluations.to_string(),
        ])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesPoint {
    pub evaluations: usize,
    pub wall_seconds: f64,
    pub best_objective: Option<f64>,
}

/// The incumbent curve, one point per improvement (plus the last row),
/// thinned evenly to at most `max_points`.
pub fn best_series(trace: &RunTrace, max_points: usize) -> Vec<SeriesPoint> {
    let mut points: Vec<SeriesPoint> = Vec::new();
    for r in &trace.rows {
        let p = SeriesPoint { evaluations: r.cumulative_evaluations, wall_seconds: r.wall_seconds, best_objective: r.best_objective };
        if points.last().is_none_or(|q| q.best_objective != p.best_objective) {
            points.push(p);
        }
    }
    if let Some(last) = trace.rows.last() {
        if points.last().is_some_and(|q| q.evaluations != last.cumulative_evaluations) {
            points.push(SeriesPoint {
                evaluations: last.cumulative_evaluations,
                wall_seconds: last.wall_seconds,
                best_objective: last.best_objective,
            });
        }
    }
    if max_points >= 2 && points.len() > max_points {
        let n = points.len();
        points = (0..max_points).map(|i| points[i * (n - 1) / (max_points - 1)]).collect();
    }
    points
}

pub fn write_series<W: Write>(label: &str, series: &[SeriesPoint], out: W) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["trace", "evaluations", "wall_seconds", "best_objective"])?;
    for p in series {
        w.write_record([label.to_string(), p.evaluations.to_string(), format!("{:.6}", p.wall_seconds), opt(p.best_objective)])?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}
