use super::pearson::{decide, pearson};
use super::trace::DecisionTrace;
use crate::channel::CsiVector;
use crate::error::{invalid, Error, Result};
use crate::model::Predictor;

/// Windows handed to the predictor per call in [`run_batch`].
const BATCH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AuthConfig {
    /// Correlation threshold; a packet with `r ≥ epsilon` is accepted.
    pub epsilon: f64,
    pub n_p: usize,
    pub n_f: usize,
}

impl AuthConfig {
    pub fn new(epsilon: f64, n_p: usize, n_f: usize) -> Result<Self> {
        if !(-1.0..=1.0).contains(&epsilon) {
            return Err(invalid!("threshold {epsilon} outside [-1, 1]"));
        }
        if n_f == 0 || n_f >= n_p {
            return Err(invalid!("need 0 < n_f < n_p, got n_f={n_f}, n_p={n_p}"));
        }
        Ok(Self { epsilon, n_p, n_f })
    }
}

/// Current predictor input and how many packets have been authenticated.
#[derive(Clone, Debug, PartialEq)]
pub struct PredictorState {
    h_in: Vec<CsiVector>,
    n_auth: usize,
}

impl PredictorState {
    /// Starts from `n_p` trusted legitimate measurements.
    pub fn new(h_hist: Vec<CsiVector>, n_p: usize) -> Result<Self> {
        if h_hist.len() != n_p {
            return Err(Error::Shape(format!(
                "history holds {} packets, predictor expects {n_p}",
                h_hist.len()
            )));
        }
        Ok(Self {
            h_in: h_hist,
            n_auth: 0,
        })
    }

    pub fn window(&self) -> &[CsiVector] {
        &self.h_in
    }

    pub fn n_auth(&self) -> usize {
        self.n_auth
    }

    /// Drops the oldest `upd.len()` packets and appends `upd`.
    pub fn slide(&mut self, upd: Vec<CsiVector>) {
        let j = upd.len();
        self.h_in.drain(..j);
        self.h_in.extend(upd);
        self.n_auth += j;
    }
}

/// One authentication run over a received stream, advanced one prediction
/// iteration at a time.
#[derive(Clone, Debug)]
pub struct Session<'a> {
    state: PredictorState,
    rx: &'a [CsiVector],
    n_f: usize,
    trace: DecisionTrace,
}

impl<'a> Session<'a> {
    pub fn new(h_hist: &[CsiVector], rx: &'a [CsiVector], n_p: usize, n_f: usize) -> Result<Self> {
        if n_f == 0 || n_f >= n_p {
            return Err(invalid!("need 0 < n_f < n_p, got n_f={n_f}, n_p={n_p}"));
        }
        Ok(Self {
            state: PredictorState::new(h_hist.to_vec(), n_p)?,
            rx,
            n_f,
            trace: DecisionTrace::default(),
        })
    }

    pub fn is_done(&self) -> bool {
        self.state.n_auth >= self.rx.len()
    }

    pub fn state(&self) -> &PredictorState {
        &self.state
    }

    pub fn trace(&self) -> &DecisionTrace {
        &self.trace
    }

    pub fn into_trace(self) -> DecisionTrace {
        self.trace
    }

    /// One iteration given the forecast for the current window.
    ///
    /// `accept(k, r)` decides packet `k` from its correlation. The iteration
    /// stops at the first acceptance or after `n_f` packets (fewer at the end
    /// of the stream).
    pub fn step(
        &mut self,
        pred: &[CsiVector],
        mut accept: impl FnMut(usize, f64) -> bool,
    ) -> Result<()> {
        if pred.len() != self.n_f {
            return Err(Error::Shape(format!(
                "predictor returned {} packets, expected {}",
                pred.len(),
                self.n_f
            )));
        }
        let start = self.state.n_auth;
        let steps = self.n_f.min(self.rx.len() - start);
        self.trace.iteration_starts.push(start);
        let mut upd = Vec::with_capacity(steps);
        for (p, obs) in pred.iter().zip(&self.rx[start..start + steps]) {
            let k = start + upd.len();
            let r = pearson(p, obs)?;
            let d = accept(k, r);
            self.trace.push(r, d);
            if d {
                upd.push(obs.clone());
                break;
            }
            upd.push(p.clone());
        }
        self.state.slide(upd);
        Ok(())
    }
}

fn check_predictor(p: &impl Predictor, cfg: &AuthConfig) -> Result<()> {
    if (p.n_p(), p.n_f()) != (cfg.n_p, cfg.n_f) {
        return Err(invalid!(
            "predictor is (n_p {}, n_f {}) but authentication expects ({}, {})",
            p.n_p(),
            p.n_f(),
            cfg.n_p,
            cfg.n_f
        ));
    }
    Ok(())
}

/// Authenticates `h_rx` starting from the trusted window `h_hist`.
pub fn run_authentication(
    predictor: &impl Predictor,
    h_hist: &[CsiVector],
    h_rx: &[CsiVector],
    cfg: &AuthConfig,
) -> Result<DecisionTrace> {
    let eps = cfg.epsilon;
    run_with(predictor, h_hist, h_rx, cfg, |_, r| decide(r, eps))
}

/// [`run_authentication`] with an arbitrary per-packet decision rule.
pub fn run_with(
    predictor: &impl Predictor,
    h_hist: &[CsiVector],
    h_rx: &[CsiVector],
    cfg: &AuthConfig,
    mut accept: impl FnMut(usize, f64) -> bool,
) -> Result<DecisionTrace> {
    check_predictor(predictor, cfg)?;
    let mut s = Session::new(h_hist, h_rx, cfg.n_p, cfg.n_f)?;
    while !s.is_done() {
        let pred = predictor.predict(s.state.window())?;
        s.step(&pred, &mut accept)?;
    }
    Ok(s.into_trace())
}

/// Advances many sessions in lockstep so the predictor sees batches.
///
/// `accept(session, k, r)` decides packet `k` of session `session`.
pub fn run_batch(
    predictor: &impl Predictor,
    sessions: &mut [Session<'_>],
    mut accept: impl FnMut(usize, usize, f64) -> bool,
) -> Result<()> {
    loop {
        let live: Vec<usize> = (0..sessions.len()).filter(|&i| !sessions[i].is_done()).collect();
        if live.is_empty() {
            return Ok(());
        }
        for chunk in live.chunks(BATCH) {
            let windows: Vec<&[CsiVector]> =
                chunk.iter().map(|&i| sessions[i].state.window()).collect();
            let preds = predictor.predict_batch(&windows)?;
            for (&i, pred) in chunk.iter().zip(preds) {
                sessions[i].step(&pred, |k, r| accept(i, k, r))?;
            }
        }
    }
}
