//! Run configuration: one TOML file, every section optional.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use csiauth::channel::ScenarioConfig;
use csiauth::experiments::{TrainGrid, POST_ATTACK_PACKETS};
use csiauth::model::{ModelConfig, TrainConfig};
use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, Default, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub scenario: ScenarioSection,
    pub grid: GridSection,
    pub model: ModelSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

/// Test-time link; defaults to the accuracy study scenario.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioSection {
    pub trms_ns: f64,
    pub snr_db: f64,
    pub v0_mps: f64,
    pub dt_ms: f64,
    pub d_bm_m: f64,
    pub fc_hz: f64,
    pub bandwidth_hz: f64,
}

impl Default for ScenarioSection {
    fn default() -> Self {
        let d = ScenarioConfig::default();
        Self {
            trms_ns: d.trms_ns,
            snr_db: d.snr_db,
            v0_mps: d.v0_mps,
            dt_ms: d.dt_ms,
            d_bm_m: d.d_bm_m,
            fc_hz: d.fc_hz,
            bandwidth_hz: d.bandwidth_hz,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub trms_ns: Vec<f64>,
    pub snr_db: Vec<f64>,
    pub v0_min_mps: f64,
    pub v0_max_mps: f64,
    pub dt_ms: f64,
    pub trajectories_per_cell: usize,
    pub packets_per_trajectory: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        let g = TrainGrid::default();
        Self {
            trms_ns: g.trms_ns,
            snr_db: g.snr_db,
            v0_min_mps: g.v0_range_mps.0,
            v0_max_mps: g.v0_range_mps.1,
            dt_ms: g.dt_ms,
            trajectories_per_cell: g.trajectories_per_cell,
            packets_per_trajectory: g.packets_per_trajectory,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub d_model: usize,
    pub n_head: usize,
    pub n_layers: usize,
    pub d_ff: usize,
    pub n_p: usize,
    pub n_f: usize,
}

impl Default for ModelSection {
    fn default() -> Self {
        let m = ModelConfig::default();
        Self {
            d_model: m.d_model,
            n_head: m.n_head,
            n_layers: m.n_layers,
            d_ff: m.d_ff,
            n_p: m.n_p,
            n_f: m.n_f,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    /// CSID file; relative paths resolve against the config file.
    pub dataset: Option<PathBuf>,
    pub lr: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    /// Cosine decay target as a fraction of `lr`; `1.0` disables decay.
    pub final_lr_ratio: f64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            dataset: None,
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            final_lr_ratio: t.final_lr_ratio,
        }
    }
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Trained model; relative paths resolve against the config file.
    pub checkpoint: Option<PathBuf>,
    pub horizon: usize,
    pub n_a: Vec<usize>,
    pub sequences_per_n_a: usize,
    pub post_attack_packets: usize,
    /// Threshold used by `eval-auth`.
    pub epsilon: f64,
    /// Sweep grid `epsilon_min, epsilon_min + step, …` up to `epsilon_max`.
    pub epsilon_min: f64,
    pub epsilon_max: f64,
    pub epsilon_step: f64,
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            checkpoint: None,
            horizon: 20,
            n_a: vec![1, 2, 3, 5, 10, 15, 20],
            sequences_per_n_a: 500,
            post_attack_packets: POST_ATTACK_PACKETS,
            epsilon: 0.9,
            epsilon_min: 0.8,
            epsilon_max: 0.999,
            epsilon_step: 0.001,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: RunConfig =
            toml::from_str(&text).with_context(|| format!("invalid config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.train.dataset, &mut cfg.eval.checkpoint].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Test-time scenario with the master seed.
    pub fn scenario(&self) -> ScenarioConfig {
        let s = &self.scenario;
        ScenarioConfig {
            trms_ns: s.trms_ns,
            snr_db: s.snr_db,
            v0_mps: s.v0_mps,
            dt_ms: s.dt_ms,
            d_bm_m: s.d_bm_m,
            fc_hz: s.fc_hz,
            bandwidth_hz: s.bandwidth_hz,
            seed: self.seed,
            ..ScenarioConfig::default()
        }
    }

    pub fn grid(&self) -> TrainGrid {
        let g = &self.grid;
        TrainGrid {
            trms_ns: g.trms_ns.clone(),
            snr_db: g.snr_db.clone(),
            v0_range_mps: (g.v0_min_mps, g.v0_max_mps),
            dt_ms: g.dt_ms,
            trajectories_per_cell: g.trajectories_per_cell,
            packets_per_trajectory: g.packets_per_trajectory,
            seed: self.seed,
        }
    }

    pub fn model(&self) -> ModelConfig {
        let m = &self.model;
        ModelConfig {
            d_model: m.d_model,
            n_head: m.n_head,
            n_layers: m.n_layers,
            d_ff: m.d_ff,
            n_p: m.n_p,
            n_f: m.n_f,
            input_dim: self.scenario().csi_dim(),
        }
    }

    pub fn train(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            lr: t.lr,
            batch_size: t.batch_size,
            max_epochs: t.max_epochs,
            patience: t.patience,
            seed: self.seed,
            final_lr_ratio: t.final_lr_ratio,
        }
    }

    pub fn epsilon_grid(&self) -> Result<Vec<f64>> {
        let e = &self.eval;
        anyhow::ensure!(
            e.epsilon_step > 0.0 && e.epsilon_min <= e.epsilon_max,
            "epsilon grid needs epsilon_step > 0 and epsilon_min <= epsilon_max"
        );
        let n = ((e.epsilon_max - e.epsilon_min) / e.epsilon_step + 1e-9).floor() as usize;
        // rounded to the step's decimals so grid points print cleanly
        let scale = 1e9;
        Ok((0..=n)
            .map(|i| ((e.epsilon_min + i as f64 * e.epsilon_step) * scale).round() / scale)
            .collect())
    }
}
