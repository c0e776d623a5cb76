use super::pearson::{decide, pearson};
use super::trace::DecisionTrace;
use crate::channel::CsiVector;
use crate::error::Result;

/// Prediction-free detector: correlate each packet with the last accepted
/// one; an accepted packet becomes the new reference.
pub fn benchmark_authenticate(
    h_ref0: &CsiVector,
    h_rx: &[CsiVector],
    epsilon: f64,
) -> Result<DecisionTrace> {
    benchmark_with(h_ref0, h_rx, |_, r| decide(r, epsilon))
}

/// [`benchmark_authenticate`] with an arbitrary decision rule. Every packet is
/// its own iteration.
pub fn benchmark_with(
    h_ref0: &CsiVector,
    h_rx: &[CsiVector],
    mut accept: impl FnMut(usize, f64) -> bool,
) -> Result<DecisionTrace> {
    let mut reference = h_ref0;
    let mut trace = DecisionTrace::default();
    for (k, obs) in h_rx.iter().enumerate() {
        let r = pearson(reference, obs)?;
        let d = accept(k, r);
        trace.iteration_starts.push(k);
        trace.push(r, d);
        if d {
            reference = obs;
        }
    }
    Ok(trace)
}
