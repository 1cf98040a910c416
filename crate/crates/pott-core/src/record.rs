//! Training records and proofs.
//!
//! A record is the quadruple (init algorithm, training algorithms,
//! trajectory, datasets) plus the prover id and the claimed noise bound B.
//! A proof is the record with the datasets stripped. The structural checker
//! validates everything that can be validated without data synthesis; when
//! datasets are present it also replays each recorded algorithm and checks
//! the update-bound property `|M_{i+1} - M_i - T_A_i(M_i, D_i)| <= B`.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::models::{ArchitectureSpec, InitAlgorithmSpec, ModelState};
use crate::tensor::DenseTensor;

/// Float slack added on top of B by the bound check: with zero noise the
/// stored state is `fl(M_i + delta)`, which recomputes to a residual of a
/// few ulps rather than exactly zero.
pub const STRUCTURE_NUMERICAL_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledDataset {
    pub features: DenseTensor,
    pub labels: Vec<usize>,
    /// Names the distribution the rows were drawn from, e.g.
    /// `two_moons?noise=0.20`; lets an attacker resample honestly.
    pub distribution_id: String,
}

impl LabeledDataset {
    pub fn rows(&self) -> usize {
        self.labels.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Optimizer {
    Sgd,
    SgdMomentum { beta: f64 },
}

/// Hidden objective baked into a recorded training algorithm. The verifier
/// can execute the algorithm but treats it as a black box.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Manipulation {
    None,
    /// Adds `alpha * d(theta, target)` to the loss (Euclidean distance on
    /// flat parameters). `alpha = 0` degenerates to the honest algorithm.
    TargetPull { target: DenseTensor, alpha: f64 },
    /// Runs at learning rate `epsilon_lr` instead of the advertised rate,
    /// so the produced update is negligibly small.
    ConstantOutput { epsilon_lr: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingAlgorithmSpec {
    pub optimizer: Optimizer,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps_per_checkpoint: usize,
    pub loss: crate::models::LossKind,
    pub seed: u64,
    pub manipulation: Manipulation,
}

impl TrainingAlgorithmSpec {
    /// Plain SGD spec. Zero-step specs are rejected: an algorithm that does
    /// no work has no positive cost and cannot appear in a record.
    pub fn sgd(
        learning_rate: f64,
        batch_size: usize,
        steps_per_checkpoint: usize,
        loss: crate::models::LossKind,
        seed: u64,
    ) -> Result<Self, SpecError> {
        if steps_per_checkpoint == 0 {
            return Err(SpecError::ZeroSteps);
        }
        if batch_size == 0 {
            return Err(SpecError::EmptyBatch);
        }
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(SpecError::BadLearningRate(learning_rate));
        }
        Ok(Self {
            optimizer: Optimizer::Sgd,
            learning_rate,
            batch_size,
            steps_per_checkpoint,
            loss,
            seed,
            manipulation: Manipulation::None,
        })
    }

    pub fn with_manipulation(mut self, m: Manipulation) -> Self {
        self.manipulation = m;
        self
    }

    pub fn with_momentum(mut self, beta: f64) -> Self {
        self.optimizer = Optimizer::SgdMomentum { beta };
        self
    }

    /// Learning rate the algorithm actually runs at.
    pub fn effective_learning_rate(&self) -> f64 {
        match &self.manipulation {
            Manipulation::ConstantOutput { epsilon_lr } => *epsilon_lr,
            _ => self.learning_rate,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpecError {
    ZeroSteps,
    EmptyBatch,
    BadLearningRate(f64),
}

impl core::fmt::Display for SpecError {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            SpecError::ZeroSteps => write!(f, "steps_per_checkpoint must be positive"),
            SpecError::EmptyBatch => write!(f, "batch_size must be positive"),
            SpecError::BadLearningRate(lr) => write!(f, "learning rate {lr} must be finite and nonnegative"),
        }
    }
}

/// Ordered model states `M_1 .. M_n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub states: Vec<ModelState>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn first(&self) -> &ModelState {
        &self.states[0]
    }

    pub fn last(&self) -> &ModelState {
        &self.states[self.states.len() - 1]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub prover_id: String,
    pub arch: ArchitectureSpec,
    pub init: InitAlgorithmSpec,
    pub algs: Vec<TrainingAlgorithmSpec>,
    pub trajectory: Trajectory,
    pub datasets: Vec<LabeledDataset>,
    pub noise_bound: f64,
}

/// Record minus datasets: what the prover hands to the verifier.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Proof {
    pub prover_id: String,
    pub arch: ArchitectureSpec,
    pub init: InitAlgorithmSpec,
    pub algs: Vec<TrainingAlgorithmSpec>,
    pub trajectory: Trajectory,
    pub noise_bound: f64,
}

impl TrainingRecord {
    pub fn to_proof(&self) -> Proof {
        Proof {
            prover_id: self.prover_id.clone(),
            arch: self.arch.clone(),
            init: self.init.clone(),
            algs: self.algs.clone(),
            trajectory: self.trajectory.clone(),
            noise_bound: self.noise_bound,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum StructureViolation {
    EmptyTrajectory,
    /// Fewer than two states: nothing was trained.
    TooFewStates { states: usize },
    AlgorithmCountMismatch { states: usize, algs: usize },
    DatasetCountMismatch { states: usize, datasets: usize },
    StateWidthMismatch { index: usize, dim: usize, expected: usize },
    NonFiniteState { index: usize },
    NegativeNoiseBound { bound: f64 },
    ZeroStepSpec { index: usize },
    EmptyBatchSpec { index: usize },
    BadSpecLearningRate { index: usize, lr: f64 },
    NonFiniteManipulationTarget { index: usize },
    EmptyDataset { index: usize },
    FeatureWidthMismatch { index: usize, width: usize, expected: usize },
    LabelRowMismatch { index: usize, rows: usize, labels: usize },
    BadLabel { dataset: usize, row: usize, label: usize, classes: usize },
    /// Replayed update residual exceeded `B + STRUCTURE_NUMERICAL_SLACK`.
    UpdateBoundExceeded { index: usize, residual: f64, bound: f64 },
    /// Replaying the recorded algorithm failed outright.
    ReplayFailed { index: usize },
}

impl core::fmt::Display for StructureViolation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            StructureViolation::EmptyTrajectory => write!(f, "trajectory is empty"),
            StructureViolation::TooFewStates { states } => {
                write!(f, "trajectory has {states} state(s), need at least 2")
            }
            StructureViolation::AlgorithmCountMismatch { states, algs } => {
                write!(f, "{states} states need {} algorithms, got {algs}", states - 1)
            }
            StructureViolation::DatasetCountMismatch { states, datasets } => {
                write!(f, "{states} states need {} datasets, got {datasets}", states - 1)
            }
            StructureViolation::StateWidthMismatch { index, dim, expected } => {
                write!(f, "state {index} has {dim} parameters, architecture has {expected}")
            }
            StructureViolation::NonFiniteState { index } => {
                write!(f, "state {index} contains non-finite values")
            }
            StructureViolation::NegativeNoiseBound { bound } => {
                write!(f, "noise bound {bound} is negative or non-finite")
            }
            StructureViolation::ZeroStepSpec { index } => {
                write!(f, "algorithm {index} declares zero steps per checkpoint")
            }
            StructureViolation::EmptyBatchSpec { index } => {
                write!(f, "algorithm {index} declares an empty batch")
            }
            StructureViolation::BadSpecLearningRate { index, lr } => {
                write!(f, "algorithm {index} has invalid learning rate {lr}")
            }
            StructureViolation::NonFiniteManipulationTarget { index } => {
                write!(f, "algorithm {index} embeds a non-finite target")
            }
            StructureViolation::EmptyDataset { index } => write!(f, "dataset {index} is empty"),
            StructureViolation::FeatureWidthMismatch { index, width, expected } => {
                write!(f, "dataset {index} feature width {width}, architecture expects {expected}")
            }
            StructureViolation::LabelRowMismatch { index, rows, labels } => {
                write!(f, "dataset {index} has {rows} rows but {labels} labels")
            }
            StructureViolation::BadLabel { dataset, row, label, classes } => {
                write!(f, "dataset {dataset} row {row} label {label} out of range for {classes} classes")
            }
            StructureViolation::UpdateBoundExceeded { index, residual, bound } => {
                write!(f, "update {index} residual {residual:.6e} exceeds noise bound {bound:.6e}")
            }
            StructureViolation::ReplayFailed { index } => {
                write!(f, "recorded algorithm {index} could not be replayed")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StructureReport {
    pub violations: Vec<StructureViolation>,
}

impl StructureReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

fn check_common(
    arch: &ArchitectureSpec,
    algs: &[TrainingAlgorithmSpec],
    trajectory: &Trajectory,
    noise_bound: f64,
    out: &mut Vec<StructureViolation>,
) {
    let n = trajectory.len();
    if n == 0 {
        out.push(StructureViolation::EmptyTrajectory);
        return;
    }
    if n < 2 {
        out.push(StructureViolation::TooFewStates { states: n });
    }
    if n >= 1 && algs.len() + 1 != n {
        out.push(StructureViolation::AlgorithmCountMismatch {
            states: n,
            algs: algs.len(),
        });
    }
    if !(noise_bound.is_finite() && noise_bound >= 0.0) {
        out.push(StructureViolation::NegativeNoiseBound { bound: noise_bound });
    }
    let expected = arch.param_count();
    for (i, state) in trajectory.states.iter().enumerate() {
        if state.dim() != expected {
            out.push(StructureViolation::StateWidthMismatch {
                index: i,
                dim: state.dim(),
                expected,
            });
        } else if !state.params.all_finite() {
            out.push(StructureViolation::NonFiniteState { index: i });
        }
    }
    for (i, alg) in algs.iter().enumerate() {
        if alg.steps_per_checkpoint == 0 {
            out.push(StructureViolation::ZeroStepSpec { index: i });
        }
        if alg.batch_size == 0 {
            out.push(StructureViolation::EmptyBatchSpec { index: i });
        }
        let lr = alg.learning_rate;
        if !(lr.is_finite() && lr >= 0.0) {
            out.push(StructureViolation::BadSpecLearningRate { index: i, lr });
        }
        if let Manipulation::TargetPull { target, .. } = &alg.manipulation {
            if !target.all_finite() || target.numel() != expected {
                out.push(StructureViolation::NonFiniteManipulationTarget { index: i });
            }
        }
    }
}

/// Structural check of a dataless proof: shape, counts, finiteness, spec
/// sanity. The update-bound property needs datasets and is not checkable.
pub fn check_structure_proof(proof: &Proof) -> StructureReport {
    let mut violations = Vec::new();
    check_common(
        &proof.arch,
        &proof.algs,
        &proof.trajectory,
        proof.noise_bound,
        &mut violations,
    );
    StructureReport { violations }
}

/// Full structural check of a record, including dataset shapes and the
/// update-bound replay of every recorded algorithm.
pub fn check_structure(record: &TrainingRecord) -> StructureReport {
    let mut violations = Vec::new();
    check_common(
        &record.arch,
        &record.algs,
        &record.trajectory,
        record.noise_bound,
        &mut violations,
    );
    let n = record.trajectory.len();
    if n >= 1 && record.datasets.len() + 1 != n {
        violations.push(StructureViolation::DatasetCountMismatch {
            states: n,
            datasets: record.datasets.len(),
        });
    }
    for (i, d) in record.datasets.iter().enumerate() {
        if d.rows() == 0 || d.features.numel() == 0 {
            violations.push(StructureViolation::EmptyDataset { index: i });
            continue;
        }
        if d.features.rank() != 2 || d.features.shape()[1] != record.arch.input_width {
            violations.push(StructureViolation::FeatureWidthMismatch {
                index: i,
                width: if d.features.rank() == 2 { d.features.shape()[1] } else { 0 },
                expected: record.arch.input_width,
            });
        }
        if d.features.rank() == 2 && d.features.shape()[0] != d.labels.len() {
            violations.push(StructureViolation::LabelRowMismatch {
                index: i,
                rows: d.features.shape()[0],
                labels: d.labels.len(),
            });
        }
        for (row, &label) in d.labels.iter().enumerate() {
            if label >= record.arch.classes {
                violations.push(StructureViolation::BadLabel {
                    dataset: i,
                    row,
                    label,
                    classes: record.arch.classes,
                });
                break;
            }
        }
    }
    // Replay only once the shapes are coherent; otherwise apply() would just
    // fail with less precise diagnostics.
    if violations.is_empty() {
        let tol = record.noise_bound + STRUCTURE_NUMERICAL_SLACK;
        for i in 0..record.algs.len() {
            let m_i = &record.trajectory.states[i];
            match crate::trainer::apply_training_algorithm(
                &record.arch,
                &record.algs[i],
                m_i,
                &record.datasets[i],
            ) {
                Ok(delta) => {
                    let next = &record.trajectory.states[i + 1].params;
                    let moved = match next.sub(&m_i.params).and_then(|d| d.sub(&delta)) {
                        Ok(r) => r.l2_norm(),
                        Err(_) => {
                            violations.push(StructureViolation::ReplayFailed { index: i });
                            continue;
                        }
                    };
                    if moved > tol {
                        violations.push(StructureViolation::UpdateBoundExceeded {
                            index: i,
                            residual: moved,
                            bound: record.noise_bound,
                        });
                    }
                }
                Err(_) => violations.push(StructureViolation::ReplayFailed { index: i }),
            }
        }
    }
    StructureReport { violations }
}
