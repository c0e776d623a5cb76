//! Training records sliced from simulated trajectories, and the CSID file.
//!
//! File layout, all little-endian: `"CSID"`, `u16` version, `u32` M′,
//! `u32` N_p, `u32` N_f, `u64` record count, `u16` float width in bits (64),
//! then per record the `N_p` input packets followed by the `N_f` target
//! packets, each packet `2M′` reals.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::channel::{simulate_bob, ScenarioConfig};
use crate::error::{invalid, Error, Result};
use crate::fsio::write_atomically;
use crate::model::{FlatRecords, RecordShape, Records};
use crate::seed::{self, tag};

pub const DATASET_MAGIC: &[u8; 4] = b"CSID";
pub const DATASET_VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 3 * 4 + 8 + 2;

/// Parameter combinations the training trajectories are drawn from.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainGrid {
    pub trms_ns: Vec<f64>,
    pub snr_db: Vec<f64>,
    /// Each trajectory draws its speed uniformly from this range.
    pub v0_range_mps: (f64, f64),
    pub dt_ms: f64,
    pub trajectories_per_cell: usize,
    pub packets_per_trajectory: usize,
    pub seed: u64,
}

impl Default for TrainGrid {
    fn default() -> Self {
        Self {
            trms_ns: vec![20.0, 40.0, 80.0, 160.0, 220.0],
            snr_db: vec![
                5.0, 8.0, 10.0, 12.0, 13.0, 14.0, 15.0, 16.0, 17.0, 18.0, 19.0, 20.0, 50.0,
            ],
            v0_range_mps: (0.5, 2.0),
            dt_ms: 3.0,
            trajectories_per_cell: 4,
            packets_per_trajectory: 200,
            seed: 0,
        }
    }
}

impl TrainGrid {
    /// One scenario per (T_rms, SNR, trajectory), T_rms-major.
    pub fn scenarios(&self) -> Result<Vec<ScenarioConfig>> {
        let (lo, hi) = self.v0_range_mps;
        if !(lo > 0.0 && hi >= lo) {
            return Err(invalid!("speed range ({lo}, {hi}) must be positive and ordered"));
        }
        let mut out = Vec::new();
        for &trms_ns in &self.trms_ns {
            for &snr_db in &self.snr_db {
                let cell = out.len() / self.trajectories_per_cell.max(1);
                for t in 0..self.trajectories_per_cell {
                    let key = [cell as u64, t as u64];
                    let mut speed = seed::rng(seed::derive(self.seed, &[tag::SPEED, key[0], key[1]]));
                    let cfg = ScenarioConfig {
                        trms_ns,
                        snr_db,
                        v0_mps: if hi > lo { speed.random_range(lo..hi) } else { lo },
                        dt_ms: self.dt_ms,
                        seed: seed::derive(self.seed, &[tag::TRAIN, key[0], key[1]]),
                        sequence_length: self.packets_per_trajectory,
                        ..ScenarioConfig::default()
                    };
                    cfg.validate()?;
                    out.push(cfg);
                }
            }
        }
        Ok(out)
    }
}

/// Sliding windows over whole trajectories, without copying each window.
#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryRecords {
    shape: RecordShape,
    trajectories: Vec<Vec<f64>>,
    /// (trajectory, first packet) of every record.
    index: Vec<(usize, usize)>,
}

impl TrajectoryRecords {
    pub fn new(dim: usize, n_p: usize, n_f: usize) -> Self {
        Self {
            shape: RecordShape { dim, n_p, n_f },
            trajectories: Vec::new(),
            index: Vec::new(),
        }
    }

    /// Adds every `(n_p, n_f)` window of a packet-major trajectory.
    pub fn push_trajectory(&mut self, packets: Vec<f64>) -> Result<()> {
        let s = self.shape;
        if !packets.len().is_multiple_of(s.dim) {
            return Err(Error::Shape(format!(
                "trajectory of {} values is not a whole number of {}-wide packets",
                packets.len(),
                s.dim
            )));
        }
        let n = packets.len() / s.dim;
        let t = self.trajectories.len();
        self.index
            .extend((0..(n + 1).saturating_sub(s.n_p + s.n_f)).map(|start| (t, start)));
        self.trajectories.push(packets);
        Ok(())
    }
}

impl Records for TrajectoryRecords {
    fn shape(&self) -> RecordShape {
        self.shape
    }

    fn len(&self) -> usize {
        self.index.len()
    }

    fn input(&self, i: usize) -> &[f64] {
        let (t, s) = self.index[i];
        let d = self.shape.dim;
        &self.trajectories[t][s * d..(s + self.shape.n_p) * d]
    }

    fn target(&self, i: usize) -> &[f64] {
        let (t, s) = self.index[i];
        let d = self.shape.dim;
        let first = s + self.shape.n_p;
        &self.trajectories[t][first * d..(first + self.shape.n_f) * d]
    }
}

/// Simulates every grid trajectory of Bob's channel and slices it into records.
pub fn build_train_dataset(grid: &TrainGrid, n_p: usize, n_f: usize) -> Result<TrajectoryRecords> {
    if n_f == 0 || n_f >= n_p {
        return Err(invalid!("need 0 < n_f < n_p, got n_f={n_f}, n_p={n_p}"));
    }
    let scenarios = grid.scenarios()?;
    let dim = ScenarioConfig::default().csi_dim();
    let trajectories: Vec<Vec<f64>> = scenarios
        .par_iter()
        .map(|cfg| {
            let (_, csi) = simulate_bob(cfg)?;
            Ok(csi.into_iter().flat_map(|v| v.into_vec()).collect())
        })
        .collect::<Result<_>>()?;
    let mut records = TrajectoryRecords::new(dim, n_p, n_f);
    for t in trajectories {
        records.push_trajectory(t)?;
    }
    Ok(records)
}

fn header(shape: RecordShape, count: usize) -> Vec<u8> {
    let mut h = Vec::with_capacity(HEADER_LEN);
    h.extend_from_slice(DATASET_MAGIC);
    h.extend_from_slice(&DATASET_VERSION.to_le_bytes());
    for v in [shape.dim / 2, shape.n_p, shape.n_f] {
        h.extend_from_slice(&(v as u32).to_le_bytes());
    }
    h.extend_from_slice(&(count as u64).to_le_bytes());
    h.extend_from_slice(&64u16.to_le_bytes());
    h
}

/// Serializes records into the CSID layout.
pub fn encode_dataset(records: &impl Records, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(&header(records.shape(), records.len()))?;
    for i in 0..records.len() {
        for v in records.input(i).iter().chain(records.target(i)) {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    out.flush()
}

/// Writes a CSID file; nothing is left at `path` if writing fails.
pub fn write_dataset(records: &impl Records, path: &Path) -> Result<()> {
    write_atomically(path, |w| encode_dataset(records, w))
}

pub fn decode_dataset(bytes: &[u8], path: &Path) -> Result<FlatRecords> {
    if bytes.len() < HEADER_LEN || &bytes[..4] != DATASET_MAGIC {
        return Err(Error::format(path, "not a CSID dataset"));
    }
    let u16_at = |o: usize| u16::from_le_bytes([bytes[o], bytes[o + 1]]);
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes")) as usize;
    let version = u16_at(4);
    if version != DATASET_VERSION {
        return Err(Error::format(
            path,
            format!("dataset version {version}, this build reads {DATASET_VERSION}"),
        ));
    }
    let shape = RecordShape {
        dim: 2 * u32_at(6),
        n_p: u32_at(10),
        n_f: u32_at(14),
    };
    let count = u64::from_le_bytes(bytes[18..26].try_into().expect("8 bytes")) as usize;
    let width = u16_at(26);
    if width != 64 {
        return Err(Error::format(path, format!("{width}-bit reals are not supported")));
    }
    let per_record = (shape.n_p + shape.n_f) * shape.dim;
    if shape.dim == 0 || per_record == 0 || bytes.len() != HEADER_LEN + 8 * per_record * count {
        return Err(Error::format(
            path,
            format!("{} bytes do not hold {count} records of {shape:?}", bytes.len()),
        ));
    }
    let values: Vec<f64> = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let mut records = FlatRecords::new(shape);
    let split = shape.n_p * shape.dim;
    for r in values.chunks_exact(per_record) {
        records.push(&r[..split], &r[split..])?;
    }
    Ok(records)
}

pub fn read_dataset(path: &Path) -> Result<FlatRecords> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_dataset(&bytes, path)
}
