//! `csiauth`: generate datasets, train the predictor and evaluate both
//! authentication schemes from one TOML config.

mod config;

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use csiauth::auth::{benchmark_authenticate, run_batch, DecisionTrace, Session};
use csiauth::experiments::{
    benchmark_intervals, build_test_sequences, build_train_dataset, encode_dataset,
    proposed_intervals, read_dataset, sequence_accuracy, stepwise_nmse, threshold_sweep,
    write_accuracy_csv, write_nmse_csv, write_sweep_csv, AccuracyRow, GroundTruth, Method,
    NmseRow, SweepRow, TestSequence,
};
use csiauth::model::{
    load_checkpoint, save_checkpoint, train, ModelParams, Predictor, Records,
};
use serde::Serialize;
use sha2::{Digest, Sha256};

use config::RunConfig;

const REVISION: &str = env!("CSIAUTH_REVISION");

#[derive(Parser)]
#[command(name = "csiauth", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides the master seed of the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for generation and evaluation.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Replace the trained model by a predictor that returns Bob's true CSI.
    #[arg(long, global = true)]
    stub_predictor: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Build the training dataset.
    Gen,
    /// Train the predictor on the dataset.
    Train,
    /// Per-step NMSE with predictions fed back as observations.
    EvalNmse,
    /// Sequence accuracy of both schemes at the configured threshold.
    EvalAuth,
    /// Sequence accuracy over the threshold grid.
    Sweep,
}

impl Command {
    fn name(self) -> &'static str {
        match self {
            Command::Gen => "gen",
            Command::Train => "train",
            Command::EvalNmse => "eval-nmse",
            Command::EvalAuth => "eval-auth",
            Command::Sweep => "sweep",
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(n) = cli.threads {
        ensure!(n > 0, "--threads must be positive");
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("cannot configure the thread pool")?;
    }
    fs::create_dir_all(&cli.out)
        .with_context(|| format!("cannot create output directory {}", cli.out.display()))?;
    write_file(&cli.out.join("config.toml"), cfg.to_toml().as_bytes())?;
    write_file(
        &cli.out.join("revision.txt"),
        format!("{REVISION}\n{}\n", cli.command.name()).as_bytes(),
    )?;
    match cli.command {
        Command::Gen => gen(&cfg, &cli.out),
        Command::Train => train_cmd(&cfg, &cli.out),
        Command::EvalNmse => eval_nmse(&cfg, &cli.out, cli.stub_predictor),
        Command::EvalAuth => eval_auth(&cfg, &cli.out, cli.stub_predictor),
        Command::Sweep => sweep(&cfg, &cli.out, cli.stub_predictor),
    }
}

/// Writes through a `.partial` sibling so a failed run leaves no truncated file.
fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let res = fs::write(&tmp, bytes).and_then(|()| fs::rename(&tmp, path));
    if res.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    res.with_context(|| format!("cannot write {}", path.display()))
}

fn csv(f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Vec<u8> {
    let mut buf = Vec::new();
    f(&mut buf).expect("writing to memory");
    buf
}

fn require(path: &Path, what: &str) -> Result<()> {
    if !path.exists() {
        bail!("{what} not found: {}", path.display());
    }
    Ok(())
}

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[derive(Serialize)]
struct Manifest {
    file: String,
    sha256: String,
    bytes: usize,
    records: usize,
    dim: usize,
    n_p: usize,
    n_f: usize,
    seed: u64,
    trajectories: usize,
    grid: config::GridSection,
}

fn gen(cfg: &RunConfig, out: &Path) -> Result<()> {
    let grid = cfg.grid();
    let model = cfg.model();
    let records = build_train_dataset(&grid, model.n_p, model.n_f)?;
    let shape = records.shape();
    let mut bytes = Vec::new();
    encode_dataset(&records, &mut bytes)?;
    let path = out.join("train.csid");
    write_file(&path, &bytes)?;

    let manifest = Manifest {
        file: "train.csid".into(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len(),
        records: records.len(),
        dim: shape.dim,
        n_p: shape.n_p,
        n_f: shape.n_f,
        seed: cfg.seed,
        trajectories: grid.scenarios()?.len(),
        grid: cfg.grid.clone(),
    };
    let text = toml::to_string(&manifest).context("cannot serialize the manifest")?;
    write_file(&out.join("manifest.toml"), text.as_bytes())?;

    let written = fs::read(&path).with_context(|| format!("cannot reread {}", path.display()))?;
    ensure!(
        sha256_hex(&written) == manifest.sha256,
        "{} does not match its manifest checksum",
        path.display()
    );
    eprintln!("{} records -> {}", records.len(), path.display());
    Ok(())
}

fn train_cmd(cfg: &RunConfig, out: &Path) -> Result<()> {
    let path = cfg.train.dataset.clone().unwrap_or_else(|| out.join("train.csid"));
    require(&path, "dataset")?;
    let records = read_dataset(&path)?;
    let model = cfg.model();
    let shape = records.shape();
    ensure!(
        (shape.dim, shape.n_p, shape.n_f) == (model.input_dim, model.n_p, model.n_f),
        "dataset {} holds dim={} n_p={} n_f={} records but the model expects dim={} n_p={} n_f={}",
        path.display(),
        shape.dim,
        shape.n_p,
        shape.n_f,
        model.input_dim,
        model.n_p,
        model.n_f
    );
    let outcome = train(&records, model, &cfg.train(), |s| {
        eprintln!("epoch {} train {:.6} val {:.6}", s.epoch, s.train_nmse, s.val_nmse);
    })?;

    let ckpt = out.join("model.cptx");
    save_checkpoint(&outcome.params, &ckpt)?;
    let history = csv(|w| {
        writeln!(w, "epoch,train_nmse,val_nmse")?;
        for s in &outcome.history {
            writeln!(w, "{},{},{}", s.epoch, s.train_nmse, s.val_nmse)?;
        }
        Ok(())
    });
    write_file(&out.join("loss_history.csv"), &history)?;

    let reloaded = load_checkpoint(&ckpt)?;
    ensure!(
        reloaded.weights == outcome.params.weights,
        "{} does not reload to the trained weights",
        ckpt.display()
    );
    eprintln!(
        "best epoch {} (initial val {:.6}) -> {}",
        outcome.best_epoch,
        outcome.initial_val_nmse,
        ckpt.display()
    );
    Ok(())
}

fn load_model(cfg: &RunConfig, out: &Path) -> Result<ModelParams> {
    let path = cfg.eval.checkpoint.clone().unwrap_or_else(|| out.join("model.cptx"));
    require(&path, "checkpoint")?;
    let params = load_checkpoint(&path)?;
    let dim = cfg.scenario().csi_dim();
    ensure!(
        params.config.input_dim == dim,
        "checkpoint {} expects {}-wide CSI, the scenario produces {dim}",
        path.display(),
        params.config.input_dim
    );
    Ok(params)
}

/// The trained model, or with `stub` Bob's true future CSI.
fn with_predictor<T>(
    cfg: &RunConfig,
    out: &Path,
    stub: bool,
    seqs: &[TestSequence],
    f: impl FnOnce(&dyn Predictor) -> Result<T>,
) -> Result<T> {
    if stub {
        let m = &cfg.model;
        f(&GroundTruth::for_sequences(m.n_p, m.n_f, seqs))
    } else {
        f(&load_model(cfg, out)?)
    }
}

fn test_sequences(cfg: &RunConfig, n_p: usize, n_a: &[usize]) -> Result<Vec<TestSequence>> {
    let e = &cfg.eval;
    ensure!(e.sequences_per_n_a > 0, "eval.sequences_per_n_a must be positive");
    Ok(build_test_sequences(
        &cfg.scenario(),
        n_p,
        n_a,
        e.sequences_per_n_a,
        e.post_attack_packets,
    )?)
}

fn model_n_p(cfg: &RunConfig, out: &Path, stub: bool) -> Result<usize> {
    Ok(if stub { cfg.model.n_p } else { load_model(cfg, out)?.config.n_p })
}

fn eval_nmse(cfg: &RunConfig, out: &Path, stub: bool) -> Result<()> {
    let seqs = test_sequences(cfg, model_n_p(cfg, out, stub)?, &[0])?;
    let horizon = cfg.eval.horizon;
    ensure!(
        cfg.eval.post_attack_packets >= horizon,
        "eval.horizon {horizon} exceeds eval.post_attack_packets {}",
        cfg.eval.post_attack_packets
    );
    let (nmse, n_f) = with_predictor(cfg, out, stub, &seqs, |p| {
        Ok((stepwise_nmse(&p, &seqs, horizon)?, p.n_f()))
    })?;
    let rows: Vec<NmseRow> = nmse
        .iter()
        .enumerate()
        .map(|(i, &nmse)| NmseRow { step: i + 1, nmse, n_f })
        .collect();
    ensure!(rows.iter().all(|r| r.nmse.is_finite()), "non-finite NMSE");
    write_file(&out.join("nmse_by_step.csv"), &csv(|w| write_nmse_csv(&rows, w)))?;
    eprintln!("step-1 NMSE {:.6}", nmse[0]);
    Ok(())
}

/// Thresholded runs of the prediction-based detector.
fn proposed_traces(p: &dyn Predictor, seqs: &[TestSequence], eps: f64) -> Result<Vec<DecisionTrace>> {
    let mut sessions = seqs
        .iter()
        .map(|s| Session::new(&s.h_hist, &s.h_rx, p.n_p(), p.n_f()))
        .collect::<csiauth::Result<Vec<_>>>()?;
    run_batch(&p, &mut sessions, |_, _, r| r >= eps)?;
    Ok(sessions.into_iter().map(Session::into_trace).collect())
}

fn benchmark_traces(seqs: &[TestSequence], eps: f64) -> Result<Vec<DecisionTrace>> {
    seqs.iter()
        .map(|s| {
            let reference = s.h_hist.last().context("sequence without history")?;
            Ok(benchmark_authenticate(reference, &s.h_rx, eps)?)
        })
        .collect()
}

fn eval_auth(cfg: &RunConfig, out: &Path, stub: bool) -> Result<()> {
    let eps = cfg.eval.epsilon;
    ensure!((-1.0..=1.0).contains(&eps), "eval.epsilon {eps} outside [-1, 1]");
    let n_p = model_n_p(cfg, out, stub)?;
    let traces_dir = out.join("traces");
    fs::create_dir_all(&traces_dir)
        .with_context(|| format!("cannot create {}", traces_dir.display()))?;
    let mut rows = Vec::new();
    for &n_a in &cfg.eval.n_a {
        let seqs = test_sequences(cfg, n_p, &[n_a])?;
        let proposed = with_predictor(cfg, out, stub, &seqs, |p| proposed_traces(p, &seqs, eps))?;
        let benchmark = benchmark_traces(&seqs, eps)?;
        for (method, traces) in [(Method::Proposed, &proposed), (Method::Benchmark, &benchmark)] {
            let accuracy = sequence_accuracy(
                traces.iter().zip(&seqs).map(|(t, s)| (t, s.ground_truth.as_slice())),
            )?;
            rows.push(AccuracyRow { n_a, method: method.name(), epsilon: eps, accuracy });
            let sample = traces_dir.join(format!("{}_na{n_a}.csv", method.name()));
            write_file(&sample, &csv(|w| traces[0].write_csv(w)))?;
            eprintln!("n_a {n_a:>3} {:<9} accuracy {accuracy:.3}", method.name());
        }
    }
    write_file(&out.join("accuracy_by_na.csv"), &csv(|w| write_accuracy_csv(&rows, w)))?;
    Ok(())
}

fn sweep(cfg: &RunConfig, out: &Path, stub: bool) -> Result<()> {
    let grid = cfg.epsilon_grid()?;
    let n_p = model_n_p(cfg, out, stub)?;
    let methods = [Method::Proposed, Method::Benchmark];
    let mut pooled = vec![Vec::new(); methods.len()];
    let mut rows = Vec::new();
    for &n_a in &cfg.eval.n_a {
        let seqs = test_sequences(cfg, n_p, &[n_a])?;
        let intervals = [
            with_predictor(cfg, out, stub, &seqs, |p| Ok(proposed_intervals(&p, &seqs)?))?,
            benchmark_intervals(&seqs)?,
        ];
        for ((method, iv), all) in methods.iter().zip(intervals).zip(&mut pooled) {
            let best = threshold_sweep(&iv, &grid)?;
            rows.push(AccuracyRow {
                n_a,
                method: method.name(),
                epsilon: best.best_epsilon,
                accuracy: best.best_accuracy,
            });
            eprintln!(
                "n_a {n_a:>3} {:<9} best accuracy {:.3} at epsilon {}",
                method.name(),
                best.best_accuracy,
                best.best_epsilon
            );
            all.extend(iv);
        }
    }
    let mut curve = Vec::new();
    for (method, iv) in methods.iter().zip(&pooled) {
        let result = threshold_sweep(iv, &grid)?;
        curve.extend(result.curve.iter().map(|&(epsilon, accuracy)| SweepRow {
            epsilon,
            method: method.name(),
            accuracy,
        }));
    }
    ensure!(curve.len() == grid.len() * methods.len(), "incomplete sweep");
    write_file(&out.join("sweep.csv"), &csv(|w| write_sweep_csv(&curve, w)))?;
    write_file(&out.join("accuracy_by_na.csv"), &csv(|w| write_accuracy_csv(&rows, w)))?;
    Ok(())
}
