use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, FormatError, Result};
use crate::solver::SolverTrace;

const HEADER: &str = "iter,cost,grad_norm";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
}

/// One row per recorded iterate, values with 17 significant digits.
pub fn trace_to_csv(trace: &SolverTrace) -> String {
    let mut out = String::from(HEADER);
    out.push('\n');
    for (t, (c, g)) in trace.costs.iter().zip(&trace.grad_norms).enumerate() {
        writeln!(out, "{t},{c:.16e},{g:.16e}").unwrap();
    }
    out
}

pub fn write_trace_csv(path: impl AsRef<Path>, trace: &SolverTrace) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, trace_to_csv(trace)).map_err(|e| Error::io(path, e))
}

pub fn parse_trace_csv(text: &str) -> Result<Vec<TraceRow>> {
    let bad = |line: usize, what: &str| {
        Error::from(FormatError::Manifest(format!("trace line {line}: {what}")))
    };
    let mut lines = text.lines();
    if lines.next() != Some(HEADER) {
        return Err(bad(1, "missing header"));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 3 {
                return Err(bad(i + 2, "expected 3 columns"));
            }
            Ok(TraceRow {
                iter: fields[0].parse().map_err(|_| bad(i + 2, "bad iteration"))?,
                cost: fields[1].parse().map_err(|_| bad(i + 2, "bad cost"))?,
                grad_norm: fields[2]
                    .parse()
                    .map_err(|_| bad(i + 2, "bad gradient norm"))?,
            })
        })
        .collect()
}
