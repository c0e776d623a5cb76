use super::testset::TestSequence;
use crate::auth::{benchmark_with, run_batch, DecisionTrace, Session};
use crate::channel::CsiVector;
use crate::error::{invalid, Error, Result};
use crate::model::Predictor;

const BATCH: usize = 256;

/// Per-step NMSE when every prediction is fed back as if it were observed.
///
/// Each sequence starts from its history window; after every iteration the
/// window slides by `n_f` and takes the `n_f` predictions. Entry `n - 1` is
/// the mean over sequences of `‖pred_n − truth_n‖² / ‖truth_n‖²`, with the
/// truth taken from Bob's legitimate measurements.
pub fn stepwise_nmse(
    predictor: &impl Predictor,
    seqs: &[TestSequence],
    horizon: usize,
) -> Result<Vec<f64>> {
    let (n_p, n_f) = (predictor.n_p(), predictor.n_f());
    if seqs.is_empty() || horizon < n_f {
        return Err(invalid!(
            "need sequences and a horizon of at least n_f={n_f}, got {} / {horizon}",
            seqs.len()
        ));
    }
    if let Some(s) = seqs.iter().find(|s| s.legit.len() < horizon || s.h_hist.len() != n_p) {
        return Err(Error::Shape(format!(
            "sequence with {} history / {} future packets cannot cover n_p={n_p}, horizon {horizon}",
            s.h_hist.len(),
            s.legit.len()
        )));
    }
    let mut totals = vec![0.0; horizon];
    for chunk in seqs.chunks(BATCH) {
        let mut windows: Vec<Vec<CsiVector>> = chunk.iter().map(|s| s.h_hist.clone()).collect();
        let mut step = 0;
        while step < horizon {
            let refs: Vec<&[CsiVector]> = windows.iter().map(Vec::as_slice).collect();
            let preds = predictor.predict_batch(&refs)?;
            for ((w, pred), s) in windows.iter_mut().zip(preds).zip(chunk) {
                for (j, p) in pred.iter().enumerate().take(horizon - step) {
                    let truth = &s.legit[step + j];
                    let err: f64 = p
                        .as_slice()
                        .iter()
                        .zip(truth.as_slice())
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum();
                    totals[step + j] += err / truth.energy();
                }
                w.drain(..n_f);
                w.extend(pred);
            }
            step += n_f;
        }
    }
    Ok(totals.into_iter().map(|t| t / seqs.len() as f64).collect())
}

/// Fraction of sequences in which every decision is correct.
pub fn sequence_accuracy<'a>(
    runs: impl IntoIterator<Item = (&'a DecisionTrace, &'a [bool])>,
) -> Result<f64> {
    let (mut correct, mut total) = (0usize, 0usize);
    for (trace, truth) in runs {
        if trace.len() != truth.len() {
            return Err(Error::Shape(format!(
                "trace of {} decisions against {} ground-truth bits",
                trace.len(),
                truth.len()
            )));
        }
        total += 1;
        correct += usize::from(trace.matches(truth));
    }
    if total == 0 {
        return Err(invalid!("accuracy of an empty sequence set"));
    }
    Ok(correct as f64 / total as f64)
}

/// Thresholds for which a sequence is authenticated without error:
/// exactly those `ε` with `lo < ε ≤ hi`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AcceptanceInterval {
    /// Largest correlation of a spoofed packet (`-inf` if none).
    pub lo: f64,
    /// Smallest correlation of a legitimate packet (`+inf` if none).
    pub hi: f64,
}

impl AcceptanceInterval {
    /// Reads the interval off a run whose decisions were forced to the
    /// ground truth. Up to the first wrong decision a thresholded run follows
    /// the same states as the forced run, so the thresholded run is entirely
    /// correct iff every forced-run correlation lies on its side of `ε`.
    pub fn from_forced(trace: &DecisionTrace, truth: &[bool]) -> Self {
        let mut out = Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        };
        for (&r, &legit) in trace.correlations.iter().zip(truth) {
            if legit {
                out.hi = out.hi.min(r);
            } else {
                out.lo = out.lo.max(r);
            }
        }
        out
    }

    pub fn contains(&self, epsilon: f64) -> bool {
        self.lo < epsilon && epsilon <= self.hi
    }
}

/// Authentication scheme under evaluation.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    /// Prediction-based detector.
    Proposed,
    /// Correlation against the last accepted packet.
    Benchmark,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Proposed => "proposed",
            Method::Benchmark => "benchmark",
        }
    }
}

/// Forced-decision runs of the prediction-based detector over `seqs`.
pub fn proposed_intervals(
    predictor: &impl Predictor,
    seqs: &[TestSequence],
) -> Result<Vec<AcceptanceInterval>> {
    let (n_p, n_f) = (predictor.n_p(), predictor.n_f());
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(4 * BATCH) {
        let mut sessions = chunk
            .iter()
            .map(|s| Session::new(&s.h_hist, &s.h_rx, n_p, n_f))
            .collect::<Result<Vec<_>>>()?;
        run_batch(predictor, &mut sessions, |i, k, _| chunk[i].ground_truth[k])?;
        out.extend(
            sessions
                .iter()
                .zip(chunk)
                .map(|(s, q)| AcceptanceInterval::from_forced(s.trace(), &q.ground_truth)),
        );
    }
    Ok(out)
}

/// Forced-decision runs of the benchmark detector over `seqs`.
pub fn benchmark_intervals(seqs: &[TestSequence]) -> Result<Vec<AcceptanceInterval>> {
    seqs.iter()
        .map(|s| {
            let reference = s
                .h_hist
                .last()
                .ok_or_else(|| invalid!("sequence without history"))?;
            let trace = benchmark_with(reference, &s.h_rx, |k, _| s.ground_truth[k])?;
            Ok(AcceptanceInterval::from_forced(&trace, &s.ground_truth))
        })
        .collect()
}

/// `0.800, 0.801, …, 0.999`.
pub fn epsilon_grid() -> Vec<f64> {
    (800..1000).map(|m| m as f64 / 1000.0).collect()
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepResult {
    /// `(ε, accuracy)` for every grid point, in grid order.
    pub curve: Vec<(f64, f64)>,
    pub best_epsilon: f64,
    pub best_accuracy: f64,
}

/// Sequence accuracy at every `ε` of the grid; the best `ε` is the smallest
/// one reaching the maximum accuracy.
pub fn threshold_sweep(intervals: &[AcceptanceInterval], grid: &[f64]) -> Result<SweepResult> {
    if intervals.is_empty() || grid.is_empty() {
        return Err(invalid!("sweep needs sequences and at least one threshold"));
    }
    if let Some(e) = grid.iter().find(|e| !(-1.0..=1.0).contains(*e)) {
        return Err(invalid!("threshold {e} outside [-1, 1]"));
    }
    let curve: Vec<(f64, f64)> = grid
        .iter()
        .map(|&e| {
            let ok = intervals.iter().filter(|iv| iv.contains(e)).count();
            (e, ok as f64 / intervals.len() as f64)
        })
        .collect();
    let (mut best_epsilon, mut best_accuracy) = curve[0];
    for &(e, a) in &curve[1..] {
        if a > best_accuracy || (a == best_accuracy && e < best_epsilon) {
            (best_epsilon, best_accuracy) = (e, a);
        }
    }
    Ok(SweepResult {
        curve,
        best_epsilon,
        best_accuracy,
    })
}
