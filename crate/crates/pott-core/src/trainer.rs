//! Executing training algorithms and producing honest records.
//!
//! Everything that ever runs a recorded algorithm goes through one graph
//! builder, `record_checkpoint_update`. Honest training, the structural
//! bound replay, attack construction, and data synthesis therefore agree
//! bit for bit on what an algorithm does to a state: the same seeded batch
//! draws, the same node emission order, the same float operations.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::autodiff::{NodeId, Tape};
use crate::models::{self, ArchitectureSpec, InitAlgorithmSpec, InitRegistry, ModelState};
use crate::record::{
    LabeledDataset, Manipulation, Optimizer, TrainingAlgorithmSpec, TrainingRecord, Trajectory,
};
use crate::tensor::DenseTensor;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Model(models::Error),
    Graph(crate::autodiff::Error),
    /// A parameter state stopped being finite at the given checkpoint.
    Diverged { checkpoint: usize },
    DatasetCount { algs: usize, datasets: usize },
    LabelRows { rows: usize, labels: usize },
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
            Error::Model(e) => write!(f, "model error: {e}"),
            Error::Graph(e) => write!(f, "graph error: {e}"),
            Error::Diverged { checkpoint } => {
                write!(f, "training diverged at checkpoint {checkpoint}")
            }
            Error::DatasetCount { algs, datasets } => {
                write!(f, "{algs} algorithms need {algs} datasets, got {datasets}")
            }
            Error::LabelRows { rows, labels } => {
                write!(f, "feature matrix has {rows} rows but {labels} labels")
            }
        }
    }
}

/// Monotonic time source. The core crate never reads a real clock; callers
/// that want wall time inject one.
pub trait Clock {
    fn now_seconds(&self) -> f64;
}

/// Always reads zero; phases timed with it have zero duration.
#[derive(Clone, Copy, Debug, Default)]
pub struct NullClock;

impl Clock for NullClock {
    fn now_seconds(&self) -> f64 {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CostMode {
    /// Optimizer steps executed.
    Steps,
    /// Wall-clock seconds of the metered phases.
    Wall,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseCost {
    pub phase: String,
    pub steps: u64,
    pub wall_seconds: f64,
}

/// Ordered accumulator of work done while producing an artifact.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct CostMeter {
    pub phases: Vec<PhaseCost>,
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, phase: impl Into<String>, steps: u64, wall_seconds: f64) {
        self.phases.push(PhaseCost {
            phase: phase.into(),
            steps,
            wall_seconds,
        });
    }

    pub fn total_steps(&self) -> u64 {
        self.phases.iter().map(|p| p.steps).sum()
    }

    pub fn total_wall_seconds(&self) -> f64 {
        self.phases.iter().map(|p| p.wall_seconds).sum()
    }

    /// Scalar cost under `mode`. Producing any artifact costs at least one
    /// step: a prover cannot claim less work than writing the states down.
    pub fn cost(&self, mode: CostMode) -> f64 {
        match mode {
            CostMode::Steps => (self.total_steps().max(1)) as f64,
            CostMode::Wall => self.total_wall_seconds(),
        }
    }
}

/// Step cost of running a list of recorded algorithms once, floored at one.
pub fn step_cost(algs: &[TrainingAlgorithmSpec]) -> u64 {
    algs.iter()
        .map(|a| a.steps_per_checkpoint as u64)
        .sum::<u64>()
        .max(1)
}

/// Per-checkpoint noise added on top of the algorithm's update.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    None,
    /// Uniform draw from the closed L2 ball of radius `bound`.
    UniformBall { bound: f64, seed: u64 },
}

impl NoiseModel {
    /// Noise vector for checkpoint `index`, or `None` when noiseless. Draws
    /// a standard normal direction and a `U^(1/dim)`-scaled radius from a
    /// stream derived per checkpoint, so records are reproducible and
    /// checkpoints are independent.
    pub fn draw(&self, dim: usize, index: usize) -> Option<DenseTensor> {
        match self {
            NoiseModel::None => None,
            NoiseModel::UniformBall { bound, seed } => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(crate::seed::derive(*seed, index as u64));
                let mut dir: Vec<f64> = (0..dim)
                    .map(|_| {
                        let v: f64 = rng.sample(StandardNormal);
                        v
                    })
                    .collect();
                let norm = crate::fmath::sqrt(dir.iter().map(|v| v * v).sum::<f64>());
                let u: f64 = rng.random();
                if norm == 0.0 || *bound == 0.0 {
                    return Some(DenseTensor::zeros(alloc::vec![dim]));
                }
                let radius = bound * crate::fmath::powf(u, 1.0 / dim as f64);
                for v in dir.iter_mut() {
                    *v *= radius / norm;
                }
                Some(DenseTensor::vector(dir))
            }
        }
    }

    pub fn bound(&self) -> f64 {
        match self {
            NoiseModel::None => 0.0,
            NoiseModel::UniformBall { bound, .. } => *bound,
        }
    }
}

fn sample_batch(rng: &mut ChaCha8Rng, rows: usize, batch_size: usize) -> Vec<usize> {
    (0..batch_size).map(|_| rng.random_range(0..rows)).collect()
}

/// Records one full checkpoint application on `tape`: starting from the
/// parameter node `theta0`, runs `alg.steps_per_checkpoint` optimizer steps
/// on minibatches of `features`/`labels` and returns the final parameter
/// node. Batches are drawn with replacement from a stream seeded by the
/// algorithm's seed; when the batch covers the whole set no draw happens and
/// the feature node is used directly.
///
/// Hidden objectives execute here too: a target pull adds
/// `alpha * (theta - target) / |theta - target|` to every gradient (skipped
/// entirely at `alpha == 0` so the honest degeneration is bit-identical),
/// and a constant-output algorithm swaps in its tiny learning rate.
///
/// Inner gradient sweeps are cut at the current parameter and feature nodes,
/// which keeps the tape linear in the number of steps while leaving the
/// composed graph exactly differentiable for meta-gradients.
pub fn record_checkpoint_update(
    tape: &mut Tape,
    arch: &ArchitectureSpec,
    alg: &TrainingAlgorithmSpec,
    theta0: NodeId,
    features: NodeId,
    labels: &[usize],
) -> Result<NodeId, Error> {
    let rows = tape.value(features).shape()[0];
    if rows != labels.len() {
        return Err(Error::LabelRows {
            rows,
            labels: labels.len(),
        });
    }
    let lr = alg.effective_learning_rate();
    let mut rng = ChaCha8Rng::seed_from_u64(alg.seed);
    let pull = match &alg.manipulation {
        Manipulation::TargetPull { target, alpha } if *alpha != 0.0 => {
            Some((tape.leaf(target.clone()), *alpha))
        }
        _ => None,
    };
    let dim = tape.value(theta0).numel();
    let mut velocity = match alg.optimizer {
        Optimizer::Sgd => None,
        Optimizer::SgdMomentum { .. } => Some(tape.leaf(DenseTensor::zeros(alloc::vec![dim]))),
    };
    let mut theta = theta0;
    for _ in 0..alg.steps_per_checkpoint {
        let (batch, batch_labels) = if alg.batch_size >= rows {
            (features, labels.to_vec())
        } else {
            let idx = sample_batch(&mut rng, rows, alg.batch_size);
            let picked = idx.iter().map(|&i| labels[i]).collect::<Vec<_>>();
            (tape.gather_rows(features, idx)?, picked)
        };
        let loss = models::record_loss(tape, arch, theta, batch, &batch_labels, alg.loss)?;
        let adj = tape.backward_graph_stopped(loss, None, &[theta, features])?;
        let mut g = match adj[theta] {
            Some(g) => g,
            None => tape.leaf(DenseTensor::zeros(alloc::vec![dim])),
        };
        if let Some((target, alpha)) = pull {
            let diff = tape.sub(theta, target)?;
            let sq = tape.mul(diff, diff)?;
            let flat = tape.reshape(sq, alloc::vec![1, dim])?;
            let total = tape.sum_all(flat)?;
            let safe = tape.add_scalar(total, 1e-24)?;
            let norm = tape.sqrt(safe)?;
            let denom = tape.broadcast_as(norm, alloc::vec![dim])?;
            let unit = tape.div(diff, denom)?;
            let scaled = tape.scale(unit, alpha)?;
            g = tape.add(g, scaled)?;
        }
        let update = match (&alg.optimizer, &mut velocity) {
            (Optimizer::Sgd, _) => g,
            (Optimizer::SgdMomentum { beta }, Some(v)) => {
                let damped = tape.scale(*v, *beta)?;
                let next = tape.add(damped, g)?;
                *v = next;
                next
            }
            (Optimizer::SgdMomentum { .. }, None) => unreachable!(),
        };
        let step = tape.scale(update, lr)?;
        theta = tape.sub(theta, step)?;
    }
    Ok(theta)
}

/// Runs one checkpoint on a throwaway tape and returns the final parameters.
pub fn run_checkpoint(
    arch: &ArchitectureSpec,
    alg: &TrainingAlgorithmSpec,
    state: &ModelState,
    data: &LabeledDataset,
) -> Result<DenseTensor, Error> {
    models::check_binding(arch, state)?;
    let mut tape = Tape::new();
    let theta0 = tape.leaf(state.params.clone());
    let features = tape.leaf(data.features.clone());
    let out = record_checkpoint_update(&mut tape, arch, alg, theta0, features, &data.labels)?;
    Ok(tape.value(out).clone())
}

/// The update `T_A(M, D)` a recorded algorithm produces: final minus initial
/// parameters. This is what the bound replay recomputes.
pub fn apply_training_algorithm(
    arch: &ArchitectureSpec,
    alg: &TrainingAlgorithmSpec,
    state: &ModelState,
    data: &LabeledDataset,
) -> Result<DenseTensor, Error> {
    let out = run_checkpoint(arch, alg, state, data)?;
    Ok(out
        .sub(&state.params)
        .map_err(|e| Error::Model(models::Error::from(e)))?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HonestTrainConfig {
    pub prover_id: String,
    pub arch: ArchitectureSpec,
    pub init: InitAlgorithmSpec,
    pub algs: Vec<TrainingAlgorithmSpec>,
    pub noise: NoiseModel,
    /// Claimed bound B carried by the record; must dominate the noise model.
    pub noise_bound: f64,
}

/// Runs the declared algorithms over the datasets and assembles the record.
/// The successor of each checkpoint is taken directly from the executed
/// graph (plus noise), so replaying an algorithm on the stored states
/// reproduces the stored successor to float roundoff.
pub fn train_honest(
    cfg: &HonestTrainConfig,
    datasets: Vec<LabeledDataset>,
    registry: &InitRegistry,
    meter: &mut CostMeter,
    clock: &dyn Clock,
) -> Result<TrainingRecord, Error> {
    if cfg.algs.len() != datasets.len() {
        return Err(Error::DatasetCount {
            algs: cfg.algs.len(),
            datasets: datasets.len(),
        });
    }
    let started = clock.now_seconds();
    let init_state = models::init_model(&cfg.init, &cfg.arch, registry)?;
    let dim = init_state.dim();
    let mut states = alloc::vec![init_state];
    for (i, alg) in cfg.algs.iter().enumerate() {
        let current = &states[i];
        let mut next = run_checkpoint(&cfg.arch, alg, current, &datasets[i])?;
        if let Some(z) = cfg.noise.draw(dim, i) {
            next = next
                .add(&z)
                .map_err(|e| Error::Model(models::Error::from(e)))?;
        }
        if !next.all_finite() {
            return Err(Error::Diverged { checkpoint: i });
        }
        states.push(ModelState::new(next));
    }
    meter.record(
        "train",
        cfg.algs
            .iter()
            .map(|a| a.steps_per_checkpoint as u64)
            .sum(),
        clock.now_seconds() - started,
    );
    Ok(TrainingRecord {
        prover_id: cfg.prover_id.clone(),
        arch: cfg.arch.clone(),
        init: cfg.init.clone(),
        algs: cfg.algs.clone(),
        trajectory: Trajectory { states },
        datasets,
        noise_bound: cfg.noise_bound,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::finite_difference;
    use crate::models::{Activation, LossKind};
    use crate::record::check_structure;

    fn tiny_dataset(rows: usize, width: usize, classes: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let values: Vec<f64> = (0..rows * width).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels: Vec<usize> = (0..rows).map(|i| i % classes).collect();
        LabeledDataset {
            features: DenseTensor::new(alloc::vec![rows, width], values).unwrap(),
            labels,
            distribution_id: String::from("test"),
        }
    }

    fn tiny_arch() -> ArchitectureSpec {
        ArchitectureSpec::mlp(2, alloc::vec![4], 2, Activation::Tanh)
    }

    #[test]
    fn full_batch_checkpoint_matches_manual_gradient_descent() {
        // One step, full batch, linear model: the update must be exactly
        // lr * dloss/dtheta as computed by a plain gradient call.
        let arch = ArchitectureSpec::linear(2, 2);
        let data = tiny_dataset(4, 2, 2, 9);
        let alg = TrainingAlgorithmSpec::sgd(0.3, 4, 1, LossKind::CrossEntropy, 5).unwrap();
        let state = ModelState::new(DenseTensor::vector(alloc::vec![0.1, -0.2, 0.3, 0.0, 0.05, -0.1]));
        let delta = apply_training_algorithm(&arch, &alg, &state, &data).unwrap();

        let mut tape = Tape::new();
        let theta = tape.leaf(state.params.clone());
        let x = tape.leaf(data.features.clone());
        let loss = models::record_loss(&mut tape, &arch, theta, x, &data.labels, LossKind::CrossEntropy)
            .unwrap();
        let g = tape.grad(loss, &[theta]).unwrap().remove(0);
        for i in 0..delta.numel() {
            assert!(
                crate::fmath::abs(delta.values()[i] + 0.3 * g.values()[i]) < 1e-15,
                "coord {i}"
            );
        }
    }

    #[test]
    fn checkpoint_replay_is_bit_identical() {
        let arch = tiny_arch();
        let data = tiny_dataset(16, 2, 2, 3);
        let alg = TrainingAlgorithmSpec::sgd(0.1, 4, 7, LossKind::CrossEntropy, 42).unwrap();
        let state = ModelState::new(DenseTensor::filled(alloc::vec![arch.param_count()], 0.05));
        let a = run_checkpoint(&arch, &alg, &state, &data).unwrap();
        let b = run_checkpoint(&arch, &alg, &state, &data).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn zero_alpha_pull_degenerates_to_honest_bitwise() {
        let arch = tiny_arch();
        let data = tiny_dataset(16, 2, 2, 3);
        let honest = TrainingAlgorithmSpec::sgd(0.1, 4, 5, LossKind::CrossEntropy, 42).unwrap();
        let pulled = honest.clone().with_manipulation(Manipulation::TargetPull {
            target: DenseTensor::filled(alloc::vec![arch.param_count()], 9.0),
            alpha: 0.0,
        });
        let state = ModelState::new(DenseTensor::filled(alloc::vec![arch.param_count()], 0.05));
        let a = run_checkpoint(&arch, &honest, &state, &data).unwrap();
        let b = run_checkpoint(&arch, &pulled, &state, &data).unwrap();
        assert_eq!(a.values(), b.values());
    }

    #[test]
    fn nonzero_pull_moves_toward_target() {
        let arch = ArchitectureSpec::linear(2, 2);
        let data = tiny_dataset(8, 2, 2, 3);
        let p = arch.param_count();
        let target = DenseTensor::filled(alloc::vec![p], 2.0);
        let state = ModelState::new(DenseTensor::zeros(alloc::vec![p]));
        let honest = TrainingAlgorithmSpec::sgd(0.05, 8, 10, LossKind::CrossEntropy, 7).unwrap();
        let pulled = honest.clone().with_manipulation(Manipulation::TargetPull {
            target: target.clone(),
            alpha: 5.0,
        });
        let h = run_checkpoint(&arch, &honest, &state, &data).unwrap();
        let m = run_checkpoint(&arch, &pulled, &state, &data).unwrap();
        let dh = crate::tensor::l2_distance(&h, &target).unwrap();
        let dm = crate::tensor::l2_distance(&m, &target).unwrap();
        assert!(dm < dh, "pulled run must end closer to target: {dm} vs {dh}");
    }

    #[test]
    fn constant_output_update_is_negligible() {
        let arch = tiny_arch();
        let data = tiny_dataset(16, 2, 2, 3);
        let alg = TrainingAlgorithmSpec::sgd(0.5, 4, 10, LossKind::CrossEntropy, 1)
            .unwrap()
            .with_manipulation(Manipulation::ConstantOutput { epsilon_lr: 1e-12 });
        let state = ModelState::new(DenseTensor::filled(alloc::vec![arch.param_count()], 0.05));
        let delta = apply_training_algorithm(&arch, &alg, &state, &data).unwrap();
        assert!(delta.l2_norm() < 1e-9, "norm {}", delta.l2_norm());
    }

    #[test]
    fn momentum_two_steps_match_hand_unrolled_recurrence() {
        let arch = ArchitectureSpec::linear(2, 2);
        let data = tiny_dataset(6, 2, 2, 11);
        let beta = 0.9;
        let lr = 0.2;
        let alg = TrainingAlgorithmSpec::sgd(lr, 6, 2, LossKind::Mse, 5)
            .unwrap()
            .with_momentum(beta);
        let theta0 = DenseTensor::vector(alloc::vec![0.2, -0.1, 0.0, 0.3, -0.2, 0.1]);
        let state = ModelState::new(theta0.clone());
        let got = run_checkpoint(&arch, &alg, &state, &data).unwrap();

        let grad_at = |params: &DenseTensor| -> DenseTensor {
            let mut tape = Tape::new();
            let t = tape.leaf(params.clone());
            let x = tape.leaf(data.features.clone());
            let l = models::record_loss(&mut tape, &arch, t, x, &data.labels, LossKind::Mse).unwrap();
            tape.grad(l, &[t]).unwrap().remove(0)
        };
        let g0 = grad_at(&theta0);
        let v1 = g0.clone();
        let theta1 = theta0.sub(&v1.scale(lr)).unwrap();
        let g1 = grad_at(&theta1);
        let v2 = v1.scale(beta).add(&g1).unwrap();
        let theta2 = theta1.sub(&v2.scale(lr)).unwrap();
        for i in 0..theta2.numel() {
            assert!(
                crate::fmath::abs(got.values()[i] - theta2.values()[i]) < 1e-12,
                "coord {i}: {} vs {}",
                got.values()[i],
                theta2.values()[i]
            );
        }
    }

    #[test]
    fn meta_gradient_through_checkpoint_matches_finite_differences() {
        // Differentiate an outer distance through a full minibatch
        // checkpoint with respect to the feature matrix.
        let arch = ArchitectureSpec::mlp(2, alloc::vec![3], 2, Activation::Tanh);
        let p = arch.param_count();
        let data = tiny_dataset(6, 2, 2, 21);
        let alg = TrainingAlgorithmSpec::sgd(0.2, 3, 4, LossKind::CrossEntropy, 13).unwrap();
        let theta0v = {
            let mut rng = ChaCha8Rng::seed_from_u64(2);
            DenseTensor::vector((0..p).map(|_| rng.random_range(-0.4..0.4)).collect())
        };
        let target = DenseTensor::filled(alloc::vec![p], 0.1);

        let eval = |features: &DenseTensor, want_grad: bool| -> (f64, Option<DenseTensor>) {
            let mut tape = Tape::new();
            let theta0 = tape.leaf(theta0v.clone());
            let x = tape.leaf(features.clone());
            let out =
                record_checkpoint_update(&mut tape, &arch, &alg, theta0, x, &data.labels).unwrap();
            let t = tape.leaf(target.clone());
            let d = tape.sub(out, t).unwrap();
            let sq = tape.mul(d, d).unwrap();
            let flat = tape.reshape(sq, alloc::vec![1, p]).unwrap();
            let loss = tape.sum_all(flat).unwrap();
            let lv = tape.value(loss).scalar_value();
            let g = if want_grad {
                Some(tape.grad(loss, &[x]).unwrap().remove(0))
            } else {
                None
            };
            (lv, g)
        };
        let (_, g) = eval(&data.features, true);
        let g = g.unwrap();
        let fd = finite_difference(
            &mut |f: &DenseTensor| eval(f, false).0,
            &data.features,
            1e-5,
        );
        for i in 0..g.numel() {
            let (a, b) = (g.values()[i], fd.values()[i]);
            assert!(
                crate::fmath::abs(a - b) <= 1e-4 * crate::fmath::abs(b).max(1e-3),
                "coord {i}: {a} vs {b}"
            );
        }
    }

    #[test]
    fn honest_record_passes_structure_check_with_and_without_noise() {
        let arch = tiny_arch();
        let datasets: Vec<LabeledDataset> =
            (0..3).map(|i| tiny_dataset(12, 2, 2, 100 + i)).collect();
        let algs: Vec<TrainingAlgorithmSpec> = (0..3)
            .map(|i| TrainingAlgorithmSpec::sgd(0.1, 4, 5, LossKind::CrossEntropy, 50 + i).unwrap())
            .collect();
        for noise in [
            NoiseModel::None,
            NoiseModel::UniformBall {
                bound: 0.01,
                seed: 77,
            },
        ] {
            let cfg = HonestTrainConfig {
                prover_id: String::from("alice"),
                arch: arch.clone(),
                init: InitAlgorithmSpec::Gaussian {
                    mean: 0.0,
                    std: 0.2,
                    seed: 4,
                },
                algs: algs.clone(),
                noise,
                noise_bound: noise.bound(),
            };
            let mut meter = CostMeter::new();
            let record =
                train_honest(&cfg, datasets.clone(), &InitRegistry::new(), &mut meter, &NullClock)
                    .unwrap();
            assert_eq!(record.trajectory.len(), 4);
            assert_eq!(meter.total_steps(), 15);
            let report = check_structure(&record);
            assert!(report.ok(), "violations: {:?}", report.violations);
        }
    }

    #[test]
    fn tampered_state_fails_the_bound_replay() {
        let arch = tiny_arch();
        let datasets: Vec<LabeledDataset> = (0..2).map(|i| tiny_dataset(12, 2, 2, 7 + i)).collect();
        let algs: Vec<TrainingAlgorithmSpec> = (0..2)
            .map(|i| TrainingAlgorithmSpec::sgd(0.1, 4, 5, LossKind::CrossEntropy, 60 + i).unwrap())
            .collect();
        let cfg = HonestTrainConfig {
            prover_id: String::from("alice"),
            arch: arch.clone(),
            init: InitAlgorithmSpec::Gaussian {
                mean: 0.0,
                std: 0.2,
                seed: 4,
            },
            algs,
            noise: NoiseModel::None,
            noise_bound: 0.0,
        };
        let mut meter = CostMeter::new();
        let mut record =
            train_honest(&cfg, datasets, &InitRegistry::new(), &mut meter, &NullClock).unwrap();
        record.trajectory.states[1].params.values_mut()[0] += 0.5;
        let report = check_structure(&record);
        assert!(!report.ok());
    }

    #[test]
    fn uniform_ball_noise_stays_inside_the_bound() {
        let noise = NoiseModel::UniformBall {
            bound: 0.3,
            seed: 9,
        };
        for i in 0..50 {
            let z = noise.draw(10, i).unwrap();
            assert!(z.l2_norm() <= 0.3 + 1e-12, "draw {i}: {}", z.l2_norm());
        }
        let a = noise.draw(10, 3).unwrap();
        let b = noise.draw(10, 3).unwrap();
        assert_eq!(a.values(), b.values());
        let c = noise.draw(10, 4).unwrap();
        assert_ne!(a.values(), c.values());
    }

    #[test]
    fn cost_meter_floors_at_one_step() {
        let meter = CostMeter::new();
        assert_eq!(meter.cost(CostMode::Steps), 1.0);
        let mut m2 = CostMeter::new();
        m2.record("a", 5, 0.1);
        m2.record("b", 7, 0.2);
        assert_eq!(m2.cost(CostMode::Steps), 12.0);
        assert!((m2.cost(CostMode::Wall) - 0.3).abs() < 1e-12);
    }
}
