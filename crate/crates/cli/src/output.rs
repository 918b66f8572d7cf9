//! Trace CSV and JSON summary.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use stdd_core::IterationTrace;

use crate::error::CliError;

/// `sweep,err_H,err_k_total,err_k_1..err_k_q,pr_v_norm,pr_w_norm,wall_ms`.
pub fn csv_header(q: usize) -> Vec<String> {
    let mut h = vec!["sweep".to_string(), "err_H".into(), "err_k_total".into()];
    h.extend((1..=q).map(|l| format!("err_k_{l}")));
    h.extend(["pr_v_norm".into(), "pr_w_norm".into(), "wall_ms".into()]);
    h
}

/// 17 significant digits, enough to round-trip an f64.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_float).unwrap_or_default()
}

pub fn write_csv<W: Write>(trace: &IterationTrace, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(trace.q))?;
    for r in &trace.rows {
        let mut rec = vec![r.sweep.to_string(), opt(r.err_h), opt(r.err_k_total())];
        match &r.err_k {
            Some(ks) => rec.extend(ks.iter().map(|&k| fmt_float(k))),
            None => rec.extend((0..trace.q).map(|_| String::new())),
        }
        rec.extend([opt(r.pr_v), opt(r.pr_w), opt(r.wall_ms)]);
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    #[serde(rename = "final_err_H")]
    pub final_err_h: Option<f64>,
    pub sweeps: usize,
    pub s_used: f64,
    pub monotone_violations: usize,
}

impl Summary {
    pub fn from_trace(trace: &IterationTrace) -> Self {
        Self {
            final_err_h: trace.last().and_then(|r| r.err_h),
            sweeps: trace.sweeps(),
            s_used: trace.s,
            monotone_violations: trace.monotone_violations,
        }
    }
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

/// Fails early when a file cannot be created at `path`.
pub fn check_writable(path: &Path) -> Result<(), CliError> {
    std::fs::OpenOptions::new()
        .create(true)
        .append(true)
        .open(path)
        .map(drop)
        .map_err(|e| CliError::Io(format!("cannot write {}: {e}", path.display())))
}

pub fn csv_bytes(trace: &IterationTrace) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    write_csv(trace, &mut buf).map_err(|e| CliError::Io(format!("csv: {e}")))?;
    Ok(buf)
}

pub fn summary_bytes(summary: &Summary) -> Vec<u8> {
    let mut s = serde_json::to_vec_pretty(summary).expect("summary serializes");
    s.push(b'\n');
    s
}
