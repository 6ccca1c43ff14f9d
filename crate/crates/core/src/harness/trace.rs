//! CSV traces: `epoch,mse_db_train,mse_db_test,model`.
//!
//! Values are printed with 12 significant digits; cells that do not apply
//! (an untracked column, the epoch of a closed-form fit) are left empty.

use std::fmt::Write as _;
use std::path::Path;

use crate::models::TracePoint;
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "epoch,mse_db_train,mse_db_test,model";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub epoch: Option<usize>,
    pub train: Option<f64>,
    pub test: Option<f64>,
    pub model: String,
}

impl TraceRow {
    pub fn from_point(model: &str, p: &TracePoint) -> Self {
        Self {
            epoch: Some(p.epoch),
            train: p.train,
            test: p.test,
            model: model.to_string(),
        }
    }
}

/// Training points and test points logged at the same epochs, merged into
/// one row per epoch.
pub fn merge_points(model: &str, train: &[TracePoint], test: &[TracePoint]) -> Vec<TraceRow> {
    let mut rows: Vec<TraceRow> = train.iter().map(|p| TraceRow::from_point(model, p)).collect();
    for p in test {
        match rows.iter_mut().find(|r| r.epoch == Some(p.epoch)) {
            Some(r) => r.test = p.test.or(r.test),
            None => rows.push(TraceRow::from_point(model, p)),
        }
    }
    rows.sort_by_key(|r| r.epoch);
    rows
}

pub fn format_value(v: f64) -> String {
    format!("{v:.11e}")
}

fn cell(v: Option<f64>) -> String {
    v.map(format_value).unwrap_or_default()
}

pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let epoch = r.epoch.map(|e| e.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{epoch},{},{},{}", cell(r.train), cell(r.test), r.model);
    }
    out
}

pub fn emit_trace(rows: &[TraceRow], path: &Path) -> Result<()> {
    std::fs::write(path, trace_csv(rows)).map_err(|e| Error::io(path, e))
}

pub fn parse_trace(text: &str) -> Result<Vec<TraceRow>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == TRACE_HEADER => {}
        other => return Err(Error::Config(format!("unexpected trace header {other:?}"))),
    }
    let bad = |n: usize, what: &str| Error::Config(format!("trace line {}: {what}", n + 2));
    let mut rows = Vec::new();
    for (n, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        let [epoch, train, test, model] = fields[..] else {
            return Err(bad(n, "expected 4 fields"));
        };
        let num = |s: &str| -> Result<Option<f64>> {
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse().map(Some).map_err(|_| bad(n, "bad number"))
            }
        };
        rows.push(TraceRow {
            epoch: if epoch.is_empty() {
                None
            } else {
                Some(epoch.parse().map_err(|_| bad(n, "bad epoch"))?)
            },
            train: num(train)?,
            test: num(test)?,
            model: model.to_string(),
        });
    }
    Ok(rows)
}
