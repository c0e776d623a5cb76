use std::io::{self, Write};

/// Per-packet outcome of one authentication run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct DecisionTrace {
    /// `true` for packets judged legitimate.
    pub decisions: Vec<bool>,
    /// Correlation each decision was based on.
    pub correlations: Vec<f64>,
    /// Packet index at which each prediction iteration began.
    pub iteration_starts: Vec<usize>,
}

impl DecisionTrace {
    pub fn len(&self) -> usize {
        self.decisions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.decisions.is_empty()
    }

    pub(crate) fn push(&mut self, r: f64, decision: bool) {
        self.correlations.push(r);
        self.decisions.push(decision);
    }

    /// Iteration that authenticated packet `k`.
    pub fn iteration_of(&self, k: usize) -> Option<usize> {
        if k >= self.len() {
            return None;
        }
        Some(self.iteration_starts.partition_point(|&s| s <= k) - 1)
    }

    /// True when every decision equals the matching ground-truth bit.
    pub fn matches(&self, truth: &[bool]) -> bool {
        self.decisions == truth
    }

    /// CSV with header `packet_index,r,decision,iteration_index`.
    pub fn write_csv(&self, mut out: impl Write) -> io::Result<()> {
        writeln!(out, "packet_index,r,decision,iteration_index")?;
        let mut it = 0;
        for (k, (r, d)) in self.correlations.iter().zip(&self.decisions).enumerate() {
            while it + 1 < self.iteration_starts.len() && self.iteration_starts[it + 1] <= k {
                it += 1;
            }
            writeln!(out, "{k},{r},{},{it}", u8::from(*d))?;
        }
        Ok(())
    }
}
