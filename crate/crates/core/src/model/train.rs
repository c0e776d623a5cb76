use rand::seq::SliceRandom;

use super::config::ModelConfig;
use super::params::Weights;
use super::records::Records;
use super::transformer::{Forward, ModelParams};
use crate::error::{invalid, Error, Result};
use crate::seed::{self, tag};
use crate::tensor::{AdamConfig, AdamState, Tape, Tensor};

#[derive(Clone, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many epochs without a new best validation NMSE.
    pub patience: usize,
    pub seed: u64,
    /// Cosine decay from `lr` to `lr · final_lr_ratio` over `max_epochs`;
    /// `1.0` keeps the rate constant.
    pub final_lr_ratio: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            batch_size: 64,
            max_epochs: 200,
            patience: 10,
            seed: 0,
            final_lr_ratio: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch.
    pub train_nmse: f64,
    pub val_nmse: f64,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the epoch with the lowest validation NMSE.
    pub params: ModelParams,
    pub initial_val_nmse: f64,
    pub history: Vec<EpochStats>,
    pub best_epoch: usize,
}

/// 90/10 split keyed by a hash of each record index; when the hash leaves the
/// validation side empty (tiny datasets) the training records double as
/// validation records.
pub fn validation_split(n: usize, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let (val, train): (Vec<usize>, Vec<usize>) =
        (0..n).partition(|&i| seed::derive(seed, &[tag::VALIDATION, i as u64]).is_multiple_of(10));
    if val.is_empty() {
        (train.clone(), train)
    } else {
        (train, val)
    }
}

fn gather(records: &impl Records, indices: &[usize], target: bool) -> Result<Tensor> {
    let s = records.shape();
    let per = if target { s.n_f } else { s.n_p };
    let mut data = Vec::with_capacity(indices.len() * per * s.dim);
    for &i in indices {
        data.extend_from_slice(if target {
            records.target(i)
        } else {
            records.input(i)
        });
    }
    Tensor::new(&[indices.len() * per, s.dim], data)
}

fn check_compatible(config: &ModelConfig, records: &impl Records) -> Result<()> {
    let s = records.shape();
    if (s.dim, s.n_p, s.n_f) != (config.input_dim, config.n_p, config.n_f) {
        return Err(Error::Shape(format!(
            "dataset records {s:?} do not match model (dim {}, n_p {}, n_f {})",
            config.input_dim, config.n_p, config.n_f
        )));
    }
    Ok(())
}

/// Per-row weights `1/(B·‖truth_b‖²)` so the weighted squared error is the
/// minibatch-mean NMSE.
fn nmse_row_weights(targets: &Tensor, n_f: usize) -> Result<Vec<f64>> {
    let batch = targets.rows() / n_f;
    let mut w = Vec::with_capacity(targets.rows());
    for b in 0..batch {
        let energy: f64 = (b * n_f..(b + 1) * n_f)
            .map(|r| targets.row(r).iter().map(|v| v * v).sum::<f64>())
            .sum();
        if energy == 0.0 {
            return Err(invalid!("record with all-zero target cannot be normalized"));
        }
        w.extend(std::iter::repeat_n(1.0 / (batch as f64 * energy), n_f));
    }
    Ok(w)
}

fn record_loss(
    tape: &mut Tape,
    params: &ModelParams,
    records: &impl Records,
    indices: &[usize],
    trainable: bool,
) -> Result<(crate::tensor::Var, Weights<crate::tensor::Var>)> {
    let inputs = gather(records, indices, false)?;
    let targets = gather(records, indices, true)?;
    let weights = nmse_row_weights(&targets, params.config.n_f)?;
    let mut f = Forward::new(tape, params, trainable);
    let vars = f.weights.clone();
    let pred = f.run(inputs)?;
    let truth = tape.constant(targets);
    let diff = tape.sub(pred, truth)?;
    Ok((tape.weighted_sum_squares(diff, weights)?, vars))
}

/// Minibatch-mean NMSE and its gradient for every weight.
pub fn minibatch_loss_and_grads(
    params: &ModelParams,
    records: &impl Records,
    indices: &[usize],
) -> Result<(f64, Weights<Tensor>)> {
    check_compatible(&params.config, records)?;
    let mut tape = Tape::new();
    let (loss, vars) = record_loss(&mut tape, params, records, indices, true)?;
    let value = tape.value(loss).item();
    let mut grads = tape.backward(loss)?;
    let g = vars.map(|v| grads.take(*v).expect("every weight is a trainable leaf"));
    Ok((value, g))
}

/// Mean per-record NMSE, evaluated in chunks of `batch`.
pub fn evaluate_nmse(
    params: &ModelParams,
    records: &impl Records,
    indices: &[usize],
    batch: usize,
) -> Result<f64> {
    check_compatible(&params.config, records)?;
    if indices.is_empty() {
        return Err(invalid!("no records to evaluate"));
    }
    let mut total = 0.0;
    let mut tape = Tape::new();
    for chunk in indices.chunks(batch.max(1)) {
        tape.reset();
        let (loss, _) = record_loss(&mut tape, params, records, chunk, false)?;
        total += tape.value(loss).item() * chunk.len() as f64;
    }
    Ok(total / indices.len() as f64)
}

/// Parameters plus Adam state; one call to [`Trainer::step`] is one update.
pub struct Trainer {
    pub params: ModelParams,
    adam: AdamState,
}

impl Trainer {
    pub fn new(params: ModelParams, lr: f64) -> Self {
        let adam = AdamState::new(
            AdamConfig {
                lr,
                ..AdamConfig::default()
            },
            params.weights.leaves(),
        );
        Self { params, adam }
    }

    pub fn lr(&self) -> f64 {
        self.adam.config.lr
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.adam.config.lr = lr;
    }

    /// Adam step on the given records; returns the pre-step minibatch NMSE.
    pub fn step(&mut self, records: &impl Records, indices: &[usize]) -> Result<f64> {
        let (loss, grads) = minibatch_loss_and_grads(&self.params, records, indices)?;
        if !loss.is_finite() {
            return Err(Error::Numerical(format!("training loss became {loss}")));
        }
        let grads: Vec<Tensor> = grads.leaves().into_iter().cloned().collect();
        self.adam.step(self.params.weights.leaves_mut(), &grads)?;
        Ok(loss)
    }
}

/// Minibatch Adam on the NMSE loss with per-epoch shuffling and early stopping.
pub fn train(
    records: &impl Records,
    config: ModelConfig,
    hyper: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<TrainOutcome> {
    config.validate()?;
    if records.is_empty() {
        return Err(invalid!("cannot train on an empty dataset"));
    }
    if hyper.batch_size == 0 || !(hyper.lr > 0.0) {
        return Err(invalid!("batch size and learning rate must be positive"));
    }
    if !(0.0..=1.0).contains(&hyper.final_lr_ratio) {
        return Err(invalid!(
            "final_lr_ratio must lie in [0, 1], got {}",
            hyper.final_lr_ratio
        ));
    }
    check_compatible(&config, records)?;
    let (mut train_idx, val_idx) = validation_split(records.len(), hyper.seed);
    let params = ModelParams::init(config, seed::derive(hyper.seed, &[tag::INIT]))?;
    let initial_val_nmse = evaluate_nmse(&params, records, &val_idx, hyper.batch_size)?;
    let mut trainer = Trainer::new(params, hyper.lr);
    let mut best = (initial_val_nmse, trainer.params.clone(), 0);
    let mut history = Vec::new();
    let per_epoch = train_idx.len().div_ceil(hyper.batch_size);
    let total_steps = (per_epoch * hyper.max_epochs).max(1) as f64;
    let mut step = 0usize;

    for epoch in 1..=hyper.max_epochs {
        let mut rng = seed::rng(seed::derive(hyper.seed, &[tag::SHUFFLE, epoch as u64]));
        train_idx.shuffle(&mut rng);
        let mut total = 0.0;
        for batch in train_idx.chunks(hyper.batch_size) {
            let r = hyper.final_lr_ratio;
            let cos = 0.5 * (1.0 + (std::f64::consts::PI * step as f64 / total_steps).cos());
            trainer.set_lr(hyper.lr * (r + (1.0 - r) * cos));
            step += 1;
            total += trainer.step(records, batch)? * batch.len() as f64;
        }
        let stats = EpochStats {
            epoch,
            train_nmse: total / train_idx.len() as f64,
            val_nmse: evaluate_nmse(&trainer.params, records, &val_idx, hyper.batch_size)?,
        };
        on_epoch(&stats);
        history.push(stats);
        if stats.val_nmse < best.0 {
            best = (stats.val_nmse, trainer.params.clone(), epoch);
        } else if epoch - best.2 >= hyper.patience {
            break;
        }
    }
    Ok(TrainOutcome {
        params: best.1,
        initial_val_nmse,
        history,
        best_epoch: best.2,
    })
}
