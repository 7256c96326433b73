//! CSV output.
//!
//! Column sets are fixed:
//!
//! * design records (`evaluate --csv`, `grid`):
//!   `l_oa,l_ab,l_bc,c_static_i,c_static_e,c_dyn,t_rms,feasible`
//! * trajectories (`trace`):
//!   `t,delta,delta_dot,delta_ddot,theta,theta_dot,theta_ddot,torque`
//! * optimization traces (`optimize`):
//!   `iter,l_oa,l_ab,l_bc,c_static_i,c_static_e,c_dyn,t_rms,acq,best_so_far`
//!
//! Missing values are empty fields. Trajectory values carry 12 significant
//! digits; everything else is written in shortest round-trip form.

use crate::error::Result;
use crate::model::{EvaluationRecord, TrajectorySample};
use crate::optimizer::OptimizationTrace;
use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

pub const RECORD_HEADER: [&str; 8] = ["l_oa", "l_ab", "l_bc", "c_static_i", "c_static_e", "c_dyn", "t_rms", "feasible"];
pub const TRAJECTORY_HEADER: [&str; 8] =
    ["t", "delta", "delta_dot", "delta_ddot", "theta", "theta_dot", "theta_ddot", "torque"];
pub const TRACE_HEADER: [&str; 10] =
    ["iter", "l_oa", "l_ab", "l_bc", "c_static_i", "c_static_e", "c_dyn", "t_rms", "acq", "best_so_far"];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn sci(v: f64) -> String {
    format!("{v:.11e}")
}

fn to_io(e: csv::Error) -> crate::Error {
    crate::Error::Io(e.into())
}

fn record_row(r: &EvaluationRecord) -> Vec<String> {
    let c = &r.constraints;
    vec![
        num(r.design.l_oa),
        num(r.design.l_ab),
        num(r.design.l_bc),
        num(c.c_static_i),
        num(c.c_static_e),
        opt(c.c_dyn),
        opt(r.objective),
        c.feasible.to_string(),
    ]
}

/// Writes design records with a header.
pub fn write_records<W: Write>(out: W, records: &[EvaluationRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(RECORD_HEADER).map_err(to_io)?;
    for r in records {
        w.write_record(record_row(r)).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Appends one record to `path`, writing the header first if the file is new or empty.
pub fn append_record(path: impl AsRef<Path>, record: &EvaluationRecord) -> Result<()> {
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let fresh = file.metadata()?.len() == 0;
    let mut w = csv::Writer::from_writer(file);
    if fresh {
        w.write_record(RECORD_HEADER).map_err(to_io)?;
    }
    w.write_record(record_row(record)).map_err(to_io)?;
    w.flush()?;
    Ok(())
}

/// Writes a trajectory with its motor torque. `torque` may be shorter than
/// `samples` (or empty) when the torque is not available.
pub fn write_trajectory<W: Write>(out: W, samples: &[TrajectorySample], torque: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRAJECTORY_HEADER).map_err(to_io)?;
    for (k, s) in samples.iter().enumerate() {
        let row = [s.t, s.delta, s.delta_dot, s.delta_ddot, s.theta, s.theta_dot, s.theta_ddot]
            .into_iter()
            .map(sci)
            .chain(std::iter::once(torque.get(k).copied().map(sci).unwrap_or_default()));
        w.write_record(row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes an optimization trace of a three-parameter mechanism problem.
pub fn write_trace<W: Write>(out: W, trace: &OptimizationTrace) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(to_io)?;
    for (entry, record) in trace.entries.iter().zip(trace.records()) {
        let base = record_row(&record);
        let row = std::iter::once(entry.iter.to_string())
            .chain(base.into_iter().take(7))
            .chain([opt(entry.acq), opt(entry.best_so_far)]);
        w.write_record(row).map_err(to_io)?;
    }
    w.flush()?;
    Ok(())
}
