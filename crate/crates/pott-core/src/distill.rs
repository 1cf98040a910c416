//! Trajectory-matching data synthesis.
//!
//! Given a dataless proof, learn a small synthetic dataset S such that
//! running the proof's own recorded algorithms on S reproduces the recorded
//! state transitions. Each iteration picks a random trajectory fragment
//! `(M_i, .., M_{i+K})`, unrolls the recorded algorithms from `M_i` on S
//! (noiselessly, manipulations and all), and descends the normalized
//! matching loss `|m_syn - M_{i+K}|^2 / (|M_i - M_{i+K}|^2 + 1e-12)` with
//! respect to S through the entire unrolled computation, second-order terms
//! included. Labels stay fixed and balanced; only features are learned.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::autodiff::Tape;
use crate::models;
use crate::record::{LabeledDataset, Proof};
use crate::tensor::DenseTensor;
use crate::trainer;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Trainer(trainer::Error),
    Model(models::Error),
    Graph(crate::autodiff::Error),
    BadConfig(&'static str),
    /// The matching loss stopped being finite.
    Diverged { iteration: usize },
}

impl From<trainer::Error> for Error {
    fn from(e: trainer::Error) -> Self {
        Error::Trainer(e)
    }
}

impl From<models::Error> for Error {
    fn from(e: models::Error) -> Self {
        Error::Model(e)
    }
}

impl From<crate::autodiff::Error> for Error {
    fn from(e: crate::autodiff::Error) -> Self {
        Error::Graph(e)
    }
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Trainer(e) => write!(f, "{e}"),
            Error::Model(e) => write!(f, "{e}"),
            Error::Graph(e) => write!(f, "{e}"),
            Error::BadConfig(msg) => write!(f, "{msg}"),
            Error::Diverged { iteration } => {
                write!(f, "synthesis diverged at iteration {iteration}")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistillConfig {
    /// Synthesis iterations (one fragment each).
    pub iterations: usize,
    /// Checkpoints per fragment; clamped to the trajectory length.
    pub fragment_len: usize,
    /// Rows of the synthetic dataset.
    pub synth_rows: usize,
    /// Plain gradient-descent rate on the synthetic features.
    pub synth_lr: f64,
    pub seed: u64,
}

impl Default for DistillConfig {
    fn default() -> Self {
        Self {
            iterations: 300,
            fragment_len: 2,
            synth_rows: 16,
            synth_lr: 0.05,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationTrace {
    pub iteration: usize,
    pub fragment_start: usize,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Synthesis {
    pub features: DenseTensor,
    pub labels: Vec<usize>,
    pub trace: Vec<IterationTrace>,
}

impl Synthesis {
    pub fn dataset(&self, distribution_id: &str) -> LabeledDataset {
        LabeledDataset {
            features: self.features.clone(),
            labels: self.labels.clone(),
            distribution_id: alloc::string::String::from(distribution_id),
        }
    }
}

/// `0, 1, .., classes-1, 0, ..`: the label layout every synthesized dataset
/// uses, matching the interleaving of the task samplers.
pub fn balanced_labels(rows: usize, classes: usize) -> Vec<usize> {
    (0..rows).map(|i| i % classes).collect()
}

/// Synthetic-data starting point drawn from a reference dataset's per-column
/// moments: row `r`, column `c` is `mean_c + std_c * z`. Starting inside the
/// task's feature envelope instead of at standard normal keeps the matching
/// optimization from spending its whole budget crossing scale mismatches.
pub fn moment_matched_init(
    reference: &LabeledDataset,
    rows: usize,
    classes: usize,
    seed: u64,
) -> Result<LabeledDataset, Error> {
    let ref_rows = reference.features.shape()[0];
    let width = reference.features.shape()[1];
    if ref_rows < 2 {
        return Err(Error::BadConfig("moment init needs at least two reference rows"));
    }
    let vals = reference.features.values();
    let mut mean = alloc::vec![0.0f64; width];
    for r in 0..ref_rows {
        for c in 0..width {
            mean[c] += vals[r * width + c];
        }
    }
    for m in mean.iter_mut() {
        *m /= ref_rows as f64;
    }
    let mut std = alloc::vec![0.0f64; width];
    for r in 0..ref_rows {
        for c in 0..width {
            let d = vals[r * width + c] - mean[c];
            std[c] += d * d;
        }
    }
    for s in std.iter_mut() {
        *s = crate::fmath::sqrt(*s / (ref_rows as f64 - 1.0));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(rows * width);
    for _ in 0..rows {
        for c in 0..width {
            let z: f64 = rng.sample(StandardNormal);
            out.push(mean[c] + std[c] * z);
        }
    }
    Ok(LabeledDataset {
        features: DenseTensor::new(alloc::vec![rows, width], out)
            .map_err(models::Error::from)?,
        labels: balanced_labels(rows, classes),
        distribution_id: alloc::string::String::from("moment-matched"),
    })
}

/// Starting features copied from reference rows whose labels match the
/// balanced label vector. Rows of each class are consumed in seeded shuffled
/// order and recycled when a class runs short.
pub fn test_pool_init(
    reference: &LabeledDataset,
    rows: usize,
    classes: usize,
    seed: u64,
) -> Result<LabeledDataset, Error> {
    let width = reference.features.shape()[1];
    let labels = balanced_labels(rows, classes);
    let mut pools: Vec<Vec<usize>> = alloc::vec![Vec::new(); classes];
    for (i, &l) in reference.labels.iter().enumerate() {
        if l < classes {
            pools[l].push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for pool in pools.iter_mut() {
        // Fisher-Yates so the picked rows do not favor the reference order.
        for i in (1..pool.len()).rev() {
            let j = rng.random_range(0..=i);
            pool.swap(i, j);
        }
    }
    let vals = reference.features.values();
    let mut cursors = alloc::vec![0usize; classes];
    let mut out = Vec::with_capacity(rows * width);
    for &label in &labels {
        let pool = &pools[label];
        if pool.is_empty() {
            return Err(Error::BadConfig("reference pool is missing a class"));
        }
        let row = pool[cursors[label] % pool.len()];
        cursors[label] += 1;
        out.extend_from_slice(&vals[row * width..(row + 1) * width]);
    }
    Ok(LabeledDataset {
        features: DenseTensor::new(alloc::vec![rows, width], out)
            .map_err(models::Error::from)?,
        labels,
        distribution_id: alloc::string::String::from("test-pool"),
    })
}

/// Matching loss of one fragment: unrolls the proof's algorithms from
/// `M_start` on the feature node and returns the scalar loss node.
fn record_fragment_loss(
    tape: &mut Tape,
    proof: &Proof,
    start: usize,
    len: usize,
    features: crate::autodiff::NodeId,
    labels: &[usize],
) -> Result<crate::autodiff::NodeId, Error> {
    let m_start = &proof.trajectory.states[start].params;
    let m_end = &proof.trajectory.states[start + len].params;
    let denom = {
        let d = m_start.sub(m_end).map_err(models::Error::from)?;
        let n = d.l2_norm();
        n * n + 1e-12
    };
    let mut theta = tape.leaf(m_start.clone());
    for j in 0..len {
        theta = trainer::record_checkpoint_update(
            tape,
            &proof.arch,
            &proof.algs[start + j],
            theta,
            features,
            labels,
        )?;
    }
    let target = tape.leaf(m_end.clone());
    let d = tape.sub(theta, target)?;
    let sq = tape.mul(d, d)?;
    let p = proof.arch.param_count();
    let flat = tape.reshape(sq, alloc::vec![1, p])?;
    let total = tape.sum_all(flat)?;
    Ok(tape.scale(total, 1.0 / denom)?)
}

/// Runs the synthesis loop. `initial` seeds the features (shape
/// `[synth_rows, input_width]`); when absent they start standard normal.
/// The returned trace has one entry per iteration.
pub fn synthesize(
    proof: &Proof,
    cfg: &DistillConfig,
    initial: Option<&LabeledDataset>,
) -> Result<Synthesis, Error> {
    if cfg.iterations == 0 {
        return Err(Error::BadConfig("synthesis needs at least one iteration"));
    }
    if cfg.synth_rows == 0 {
        return Err(Error::BadConfig("synthetic dataset needs at least one row"));
    }
    if cfg.fragment_len == 0 {
        return Err(Error::BadConfig("fragments need at least one checkpoint"));
    }
    let n = proof.trajectory.len();
    if n < 2 {
        return Err(Error::BadConfig("proof trajectory has no transitions"));
    }
    let len = cfg.fragment_len.min(n - 1);
    let width = proof.arch.input_width;
    let labels = balanced_labels(cfg.synth_rows, proof.arch.classes);
    let mut features = match initial {
        Some(d) => {
            if d.features.shape() != [cfg.synth_rows, width] {
                return Err(Error::BadConfig("initial features have the wrong shape"));
            }
            if d.labels != labels {
                return Err(Error::BadConfig("initial labels must be balanced"));
            }
            d.features.clone()
        }
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(cfg.seed, 0));
            let values: Vec<f64> = (0..cfg.synth_rows * width)
                .map(|_| {
                    let v: f64 = rng.sample(StandardNormal);
                    v
                })
                .collect();
            DenseTensor::new(alloc::vec![cfg.synth_rows, width], values)
                .map_err(models::Error::from)?
        }
    };
    let mut fragment_rng = ChaCha8Rng::seed_from_u64(crate::seed::derive(cfg.seed, 1));
    let mut trace = Vec::with_capacity(cfg.iterations);
    for iteration in 0..cfg.iterations {
        let start = fragment_rng.random_range(0..=(n - 1 - len));
        let mut tape = Tape::new();
        let x = tape.leaf(features.clone());
        let loss = record_fragment_loss(&mut tape, proof, start, len, x, &labels)?;
        let loss_value = tape.value(loss).scalar_value();
        if !loss_value.is_finite() {
            return Err(Error::Diverged { iteration });
        }
        trace.push(IterationTrace {
            iteration,
            fragment_start: start,
            loss: loss_value,
        });
        let g = tape.grad(loss, &[x])?.remove(0);
        features = features
            .sub(&g.scale(cfg.synth_lr))
            .map_err(models::Error::from)?;
        if !features.all_finite() {
            return Err(Error::Diverged { iteration });
        }
    }
    Ok(Synthesis {
        features,
        labels,
        trace,
    })
}
