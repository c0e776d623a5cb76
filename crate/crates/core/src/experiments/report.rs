//! CSV output of the experiment metrics.

use std::io::{self, Write};

/// One point of a stepwise NMSE curve.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NmseRow {
    pub step: usize,
    pub nmse: f64,
    pub n_f: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AccuracyRow {
    pub n_a: usize,
    pub method: &'static str,
    pub epsilon: f64,
    pub accuracy: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub method: &'static str,
    pub accuracy: f64,
}

pub fn write_nmse_csv(rows: &[NmseRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "step,nmse,n_f")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.step, r.nmse, r.n_f)?;
    }
    Ok(())
}

pub fn write_accuracy_csv(rows: &[AccuracyRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "n_a,method,epsilon,accuracy")?;
    for r in rows {
        writeln!(out, "{},{},{},{}", r.n_a, r.method, r.epsilon, r.accuracy)?;
    }
    Ok(())
}

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "epsilon,method,accuracy")?;
    for r in rows {
        writeln!(out, "{},{},{}", r.epsilon, r.method, r.accuracy)?;
    }
    Ok(())
}
