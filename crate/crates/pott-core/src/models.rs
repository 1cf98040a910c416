//! Desk-scale classifiers over a single flat parameter vector.
//!
//! A model is linear or an MLP (any list of hidden widths) with relu or tanh
//! activations and one logit column per class. Parameters live in one rank-1
//! tensor laid out layer by layer, weight matrix `[in, out]` row-major then
//! bias `[out]`; the forward pass slices the flat vector on the autodiff
//! tape, so gradients flow both into parameters and into the input batch.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::tensor::{DenseTensor, ShapeError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Tanh,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchitectureSpec {
    pub input_width: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
    pub activation: Activation,
}

impl ArchitectureSpec {
    pub fn linear(input_width: usize, classes: usize) -> Self {
        Self {
            input_width,
            hidden: Vec::new(),
            classes,
            activation: Activation::Relu,
        }
    }

    pub fn mlp(input_width: usize, hidden: Vec<usize>, classes: usize, activation: Activation) -> Self {
        Self {
            input_width,
            hidden,
            classes,
            activation,
        }
    }

    /// Layer extents from input to logits, e.g. `[2, 16, 2]`.
    pub fn extents(&self) -> Vec<usize> {
        let mut v = Vec::with_capacity(self.hidden.len() + 2);
        v.push(self.input_width);
        v.extend_from_slice(&self.hidden);
        v.push(self.classes);
        v
    }

    pub fn param_count(&self) -> usize {
        let ext = self.extents();
        ext.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    /// Per-layer slices into the flat vector: `(weight offset, in, out)`;
    /// the bias follows the weight block directly.
    pub fn layer_layout(&self) -> Vec<(usize, usize, usize)> {
        let ext = self.extents();
        let mut off = 0;
        let mut out = Vec::with_capacity(ext.len() - 1);
        for w in ext.windows(2) {
            out.push((off, w[0], w[1]));
            off += w[0] * w[1] + w[1];
        }
        out
    }

    pub fn name(&self) -> String {
        use core::fmt::Write;
        let mut s = String::new();
        if self.hidden.is_empty() {
            let _ = write!(s, "linear-{}-{}", self.input_width, self.classes);
        } else {
            let _ = write!(s, "mlp-{}", self.input_width);
            for h in &self.hidden {
                let _ = write!(s, "-{h}");
            }
            let _ = write!(s, "-{}", self.classes);
        }
        s
    }
}

/// Flat parameter snapshot. Arch binding is by length; operations that pair
/// a state with an architecture check `param_count` first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelState {
    pub params: DenseTensor,
}

impl ModelState {
    pub fn new(params: DenseTensor) -> Self {
        Self { params }
    }

    pub fn dim(&self) -> usize {
        self.params.numel()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitAlgorithmSpec {
    Gaussian { mean: f64, std: f64, seed: u64 },
    Uniform { lo: f64, hi: f64, seed: u64 },
    Pretrained { handle: String },
}

/// Previously verified initial states, keyed by provenance handle.
#[derive(Clone, Debug, Default)]
pub struct InitRegistry {
    entries: alloc::collections::BTreeMap<String, RegistryEntry>,
}

#[derive(Clone, Debug)]
pub struct RegistryEntry {
    pub params: DenseTensor,
    pub verified: bool,
}

impl InitRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, handle: impl Into<String>, params: DenseTensor, verified: bool) {
        self.entries.insert(handle.into(), RegistryEntry { params, verified });
    }

    pub fn get(&self, handle: &str) -> Option<&RegistryEntry> {
        self.entries.get(handle)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Graph(crate::autodiff::Error),
    BadLabel { row: usize, label: usize, classes: usize },
    UnknownProvenance { handle: String },
    Shape(ShapeError),
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Graph(e) => write!(f, "{e}"),
            Error::BadLabel { row, label, classes } => {
                write!(f, "label {label} at row {row} out of range for {classes} classes")
            }
            Error::UnknownProvenance { handle } => {
                write!(f, "pretrained init handle {handle:?} not in registry")
            }
            Error::Shape(e) => write!(f, "{e}"),
        }
    }
}

impl From<crate::autodiff::Error> for Error {
    fn from(e: crate::autodiff::Error) -> Self {
        Error::Graph(e)
    }
}

impl From<ShapeError> for Error {
    fn from(e: ShapeError) -> Self {
        Error::Shape(e)
    }
}

/// Draws the initial flat parameter vector. Sampling is index-ascending from
/// one seeded stream, so a given spec always produces the same state.
pub fn init_model(
    init: &InitAlgorithmSpec,
    arch: &ArchitectureSpec,
    registry: &InitRegistry,
) -> Result<ModelState, Error> {
    let p = arch.param_count();
    let params = match init {
        InitAlgorithmSpec::Gaussian { mean, std, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let normal = Normal::new(*mean, *std).expect("finite std");
            let values: Vec<f64> = (0..p).map(|_| normal.sample(&mut rng)).collect();
            DenseTensor::vector(values)
        }
        InitAlgorithmSpec::Uniform { lo, hi, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let values: Vec<f64> = if hi > lo {
                (0..p).map(|_| rng.random_range(*lo..*hi)).collect()
            } else {
                vec![*lo; p]
            };
            DenseTensor::vector(values)
        }
        InitAlgorithmSpec::Pretrained { handle } => {
            let entry = registry.get(handle).ok_or_else(|| Error::UnknownProvenance {
                handle: handle.clone(),
            })?;
            if entry.params.numel() != p {
                return Err(ShapeError {
                    op: "pretrained init",
                    left: entry.params.shape().to_vec(),
                    right: vec![p],
                }
                .into());
            }
            entry.params.clone()
        }
    };
    Ok(ModelState::new(params))
}

/// Records the forward pass on `tape`: `theta` is the flat parameter node,
/// `batch` is `[rows, input_width]`; returns the `[rows, classes]` logits.
pub fn record_forward(
    tape: &mut Tape,
    arch: &ArchitectureSpec,
    theta: NodeId,
    batch: NodeId,
) -> Result<NodeId, Error> {
    let rows = tape.value(batch).shape()[0];
    let mut x = batch;
    let layers = arch.layer_layout();
    let last = layers.len() - 1;
    for (li, (off, fan_in, fan_out)) in layers.into_iter().enumerate() {
        let w = tape.slice(theta, off, fan_in * fan_out)?;
        let w = tape.reshape(w, vec![fan_in, fan_out])?;
        let b = tape.slice(theta, off + fan_in * fan_out, fan_out)?;
        let b = tape.reshape(b, vec![1, fan_out])?;
        let xw = tape.matmul(x, w)?;
        let bb = tape.repeat_rows(b, rows)?;
        let z = tape.add(xw, bb)?;
        x = if li == last {
            z
        } else {
            match arch.activation {
                Activation::Relu => tape.relu(z)?,
                Activation::Tanh => tape.tanh(z)?,
            }
        };
    }
    Ok(x)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    Mse,
}

/// Records the scalar training loss for `logits` against integer labels.
///
/// Cross-entropy is the batch mean of `logsumexp(logits) - logit[label]`,
/// stabilized by a detached per-row max (the shift cancels analytically, so
/// derivatives of every order are unaffected). MSE is the batch mean of the
/// squared distance between the logit row and the label's one-hot vector.
pub fn record_loss_from_logits(
    tape: &mut Tape,
    logits: NodeId,
    labels: &[usize],
    classes: usize,
    kind: LossKind,
) -> Result<NodeId, Error> {
    for (row, &label) in labels.iter().enumerate() {
        if label >= classes {
            return Err(Error::BadLabel {
                row,
                label,
                classes,
            });
        }
    }
    let rows = labels.len();
    match kind {
        LossKind::CrossEntropy => {
            let m = tape.row_max_detached(logits)?;
            let mfull = tape.repeat_cols(m, classes)?;
            let shifted = tape.sub(logits, mfull)?;
            let e = tape.exp(shifted)?;
            let sums = tape.row_sum(e)?;
            let lse = tape.ln(sums)?;
            let lse = tape.add(lse, m)?;
            let picked = tape.pick_per_row(logits, labels.to_vec())?;
            let per_row = tape.sub(lse, picked)?;
            let total = tape.sum_all(per_row)?;
            Ok(tape.scale(total, 1.0 / rows as f64)?)
        }
        LossKind::Mse => {
            let mut onehot = DenseTensor::zeros(vec![rows, classes]);
            for (i, &label) in labels.iter().enumerate() {
                onehot.values_mut()[i * classes + label] = 1.0;
            }
            let y = tape.leaf(onehot);
            let d = tape.sub(logits, y)?;
            let sq = tape.mul(d, d)?;
            let total = tape.sum_all(sq)?;
            Ok(tape.scale(total, 1.0 / rows as f64)?)
        }
    }
}

/// Forward + loss in one call, recorded on `tape`.
pub fn record_loss(
    tape: &mut Tape,
    arch: &ArchitectureSpec,
    theta: NodeId,
    batch: NodeId,
    labels: &[usize],
    kind: LossKind,
) -> Result<NodeId, Error> {
    let logits = record_forward(tape, arch, theta, batch)?;
    record_loss_from_logits(tape, logits, labels, arch.classes, kind)
}

/// Plain logits evaluation (throwaway tape).
pub fn forward(
    arch: &ArchitectureSpec,
    state: &ModelState,
    batch: &DenseTensor,
) -> Result<DenseTensor, Error> {
    check_binding(arch, state)?;
    let mut tape = Tape::new();
    let theta = tape.leaf(state.params.clone());
    let x = tape.leaf(batch.clone());
    let logits = record_forward(&mut tape, arch, theta, x)?;
    Ok(tape.value(logits).clone())
}

/// Plain loss evaluation (throwaway tape).
pub fn loss(
    arch: &ArchitectureSpec,
    state: &ModelState,
    batch: &DenseTensor,
    labels: &[usize],
    kind: LossKind,
) -> Result<f64, Error> {
    check_binding(arch, state)?;
    let mut tape = Tape::new();
    let theta = tape.leaf(state.params.clone());
    let x = tape.leaf(batch.clone());
    let node = record_loss(&mut tape, arch, theta, x, labels, kind)?;
    Ok(tape.value(node).scalar_value())
}

/// Fraction of rows whose argmax logit (lowest index on ties) matches the
/// label.
pub fn accuracy(
    arch: &ArchitectureSpec,
    state: &ModelState,
    batch: &DenseTensor,
    labels: &[usize],
) -> Result<f64, Error> {
    let logits = forward(arch, state, batch)?;
    let (rows, classes) = (logits.shape()[0], logits.shape()[1]);
    let mut hits = 0usize;
    for i in 0..rows {
        let row = &logits.values()[i * classes..(i + 1) * classes];
        let mut best = 0usize;
        for j in 1..classes {
            if row[j] > row[best] {
                best = j;
            }
        }
        if best == labels[i] {
            hits += 1;
        }
    }
    Ok(hits as f64 / rows as f64)
}

pub fn check_binding(arch: &ArchitectureSpec, state: &ModelState) -> Result<(), Error> {
    if state.dim() != arch.param_count() {
        return Err(ShapeError {
            op: "arch binding",
            left: vec![state.dim()],
            right: vec![arch.param_count()],
        }
        .into());
    }
    Ok(())
}

/// Splits a flat vector into per-layer `(weights [in, out], bias [1, out])`.
pub fn unflatten(arch: &ArchitectureSpec, flat: &DenseTensor) -> Result<Vec<(DenseTensor, DenseTensor)>, Error> {
    if flat.numel() != arch.param_count() {
        return Err(ShapeError {
            op: "unflatten",
            left: flat.shape().to_vec(),
            right: vec![arch.param_count()],
        }
        .into());
    }
    let mut out = Vec::new();
    for (off, fan_in, fan_out) in arch.layer_layout() {
        let w = DenseTensor::new(
            vec![fan_in, fan_out],
            flat.values()[off..off + fan_in * fan_out].to_vec(),
        )?;
        let b = DenseTensor::new(
            vec![1, fan_out],
            flat.values()[off + fan_in * fan_out..off + fan_in * fan_out + fan_out].to_vec(),
        )?;
        out.push((w, b));
    }
    Ok(out)
}

/// Inverse of [`unflatten`].
pub fn flatten(layers: &[(DenseTensor, DenseTensor)]) -> DenseTensor {
    let mut values = Vec::new();
    for (w, b) in layers {
        values.extend_from_slice(w.values());
        values.extend_from_slice(b.values());
    }
    DenseTensor::vector(values)
}
