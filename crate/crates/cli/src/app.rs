//! The `run` and `verify` commands.

use std::io::Write;
use std::path::Path;

use stdd_core::iteration::{Clock, NoClock};

use crate::checks;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::exec::{PoolExecutor, WallClock};
use crate::experiment::Experiment;
use crate::output::{check_writable, csv_bytes, summary_bytes, write_file, Summary};

#[derive(Debug, Clone, Copy, Default)]
pub struct Options {
    pub seed: Option<u64>,
    /// Worker cap for additive fan-out; all available cores if absent.
    pub threads: Option<usize>,
}

pub fn load(path: &Path, opts: &Options) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(seed) = opts.seed {
        cfg.rng_seed = seed;
    }
    Ok(cfg)
}

/// Builds, solves the reference and runs the scheme; writes the trace CSV
/// and summary even when a sweep fails.
pub fn run(cfg: &ExperimentConfig, opts: &Options, log: &mut dyn Write) -> Result<Summary, CliError> {
    for p in [&cfg.output.csv_path, &cfg.output.json_summary_path].into_iter().flatten() {
        check_writable(p)?;
    }
    let exp = Experiment::build(cfg)?;
    let threads = opts
        .threads
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if threads == 0 {
        return Err(CliError::Config("--threads must be at least 1".into()));
    }
    let executor = PoolExecutor::new(threads).map_err(|e| CliError::Io(format!("thread pool: {e}")))?;
    let wall = WallClock::new();
    let clock: &dyn Clock = if cfg.output.timing { &wall } else { &NoClock };

    let u_ref = exp.reference()?;
    let (trace, failure) = match exp.run(&u_ref, &executor, clock) {
        Ok(out) => (Some(out.trace), None),
        Err((e, trace)) => (trace, Some(e)),
    };
    let summary = trace.as_ref().map(Summary::from_trace);
    if let Some(t) = &trace {
        if let Some(p) = &cfg.output.csv_path {
            write_file(p, &csv_bytes(t)?)?;
        }
        if let (Some(p), Some(s)) = (&cfg.output.json_summary_path, &summary) {
            write_file(p, &summary_bytes(s))?;
        }
    }
    if let Some(e) = failure {
        return Err(e);
    }
    let summary = summary.expect("successful runs carry a trace");
    let _ = writeln!(
        log,
        "{}: {} sweeps, s = {}, final err_H = {}, monotone violations = {}",
        exp.scheme.kind.name(),
        summary.sweeps,
        summary.s_used,
        summary.final_err_h.map_or("n/a".into(), |e| format!("{e:.3e}")),
        summary.monotone_violations
    );
    Ok(summary)
}

/// Runs the property suite and prints one line per check.
pub fn verify(cfg: &ExperimentConfig, log: &mut dyn Write) -> Result<Vec<checks::Check>, CliError> {
    let exp = Experiment::build(cfg)?;
    let out = checks::run_all(&exp.ctx, exp.scheme.s_value(), exp.seed)?;
    for c in &out {
        let _ = writeln!(log, "{}", c.line());
    }
    let failed = out.iter().filter(|c| !c.passed()).count();
    if failed > 0 {
        return Err(CliError::ChecksFailed(failed));
    }
    Ok(out)
}
