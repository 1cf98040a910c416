//! Record and proof forgery.
//!
//! Four ways a prover can claim training work it did not do honestly:
//! steering a real training run toward a stolen target (forward
//! manipulation), walking from a legitimate init to the target in
//! bound-sized hops while the recorded algorithms do nothing (reverse
//! manipulation), interpolating states on the straight segment between init
//! and target, and growing a chain backward from the target with pull
//! updates evaluated on fabricated data. The module also provides the weak
//! mutations (structure breaks, init swaps) used to exercise the cheap
//! verifier stages.

use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::models::{self, ArchitectureSpec, InitAlgorithmSpec, InitRegistry, ModelState};
use crate::record::{
    LabeledDataset, Manipulation, Proof, TrainingAlgorithmSpec, TrainingRecord, Trajectory,
};
use crate::tensor::{l2_distance, DenseTensor};
use crate::trainer::{self, Clock, CostMeter, HonestTrainConfig};

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Trainer(trainer::Error),
    Model(models::Error),
    Shape(crate::tensor::ShapeError),
    /// The walk cannot cover the init-to-target distance in the available
    /// number of bound-sized hops.
    InfeasibleWalk { distance: f64, capacity: f64 },
    BadConfig(&'static str),
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

impl From<crate::tensor::ShapeError> for Error {
    fn from(e: crate::tensor::ShapeError) -> Self {
        Error::Shape(e)
    }
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Trainer(e) => write!(f, "{e}"),
            Error::Model(e) => write!(f, "{e}"),
            Error::Shape(e) => write!(f, "{e}"),
            Error::InfeasibleWalk { distance, capacity } => write!(
                f,
                "init is {distance:.4} from target but the walk can cover at most {capacity:.4}"
            ),
            Error::BadConfig(msg) => write!(f, "{msg}"),
        }
    }
}

// ---------------------------------------------------------------------------
// Forward algorithm manipulation
// ---------------------------------------------------------------------------

/// Trains for real, but every checkpoint's gradient carries an extra
/// `alpha * (theta - target)/|theta - target|` term. At `alpha = 0` the
/// output is bit-identical to the honest record; growing alpha trades task
/// loss for progress toward the target.
pub fn attack_forward_pull(
    cfg: &HonestTrainConfig,
    target: &DenseTensor,
    alpha: f64,
    datasets: Vec<LabeledDataset>,
    registry: &InitRegistry,
    meter: &mut CostMeter,
    clock: &dyn Clock,
) -> Result<TrainingRecord, Error> {
    let mut steered = cfg.clone();
    for alg in steered.algs.iter_mut() {
        alg.manipulation = Manipulation::TargetPull {
            target: target.clone(),
            alpha,
        };
    }
    Ok(trainer::train_honest(&steered, datasets, registry, meter, clock)?)
}

/// Forward pull that stops as soon as the trajectory gets within
/// `threshold` of the target (or all checkpoints run out). Returns the
/// record plus the number of checkpoints actually executed; unused datasets
/// and algorithm slots are dropped from the record.
pub fn attack_forward_pull_to_threshold(
    cfg: &HonestTrainConfig,
    target: &DenseTensor,
    alpha: f64,
    datasets: Vec<LabeledDataset>,
    threshold: f64,
    registry: &InitRegistry,
    meter: &mut CostMeter,
    clock: &dyn Clock,
) -> Result<(TrainingRecord, usize), Error> {
    if cfg.algs.len() != datasets.len() {
        return Err(Error::Trainer(trainer::Error::DatasetCount {
            algs: cfg.algs.len(),
            datasets: datasets.len(),
        }));
    }
    let started = clock.now_seconds();
    let init_state = models::init_model(&cfg.init, &cfg.arch, registry)?;
    let dim = init_state.dim();
    let mut states = alloc::vec![init_state];
    let mut used = 0usize;
    let mut steps: u64 = 0;
    for (i, alg) in cfg.algs.iter().enumerate() {
        if l2_distance(&states[i].params, target)? <= threshold {
            break;
        }
        let mut steered = alg.clone();
        steered.manipulation = Manipulation::TargetPull {
            target: target.clone(),
            alpha,
        };
        let mut next = trainer::run_checkpoint(&cfg.arch, &steered, &states[i], &datasets[i])?;
        if let Some(z) = cfg.noise.draw(dim, i) {
            next = next.add(&z)?;
        }
        if !next.all_finite() {
            return Err(Error::Trainer(trainer::Error::Diverged { checkpoint: i }));
        }
        states.push(ModelState::new(next));
        steps += steered.steps_per_checkpoint as u64;
        used += 1;
    }
    meter.record("forward_pull", steps, clock.now_seconds() - started);
    let mut algs = Vec::with_capacity(used);
    for alg in cfg.algs.iter().take(used) {
        let mut steered = alg.clone();
        steered.manipulation = Manipulation::TargetPull {
            target: target.clone(),
            alpha,
        };
        algs.push(steered);
    }
    Ok((
        TrainingRecord {
            prover_id: cfg.prover_id.clone(),
            arch: cfg.arch.clone(),
            init: cfg.init.clone(),
            algs,
            trajectory: Trajectory { states },
            datasets: datasets.into_iter().take(used).collect(),
            noise_bound: cfg.noise_bound,
        },
        used,
    ))
}

// ---------------------------------------------------------------------------
// Reverse algorithm manipulation
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct ReverseWalkConfig {
    pub prover_id: String,
    pub arch: ArchitectureSpec,
    pub init: InitAlgorithmSpec,
    /// Honest-looking claimed algorithms; their manipulation field is
    /// overwritten with a constant-output objective.
    pub claimed_algs: Vec<TrainingAlgorithmSpec>,
    /// Learning rate the constant-output algorithms actually run at.
    pub epsilon_lr: f64,
    pub noise_bound: f64,
    pub walk_seed: u64,
}

/// Hop budget kept strictly inside the bound so the recorded tiny update
/// plus float slack still fits.
pub const WALK_HOP_FRACTION: f64 = 0.88;
/// Per-hop distance capacity assumed by the feasibility check; the slack
/// between this and the hop budget absorbs the tangential jitter.
pub const WALK_PACING_FRACTION: f64 = 0.72;

/// Writes the trajectory directly: a random walk from the honest init to
/// the target in hops smaller than the bound, with distance to the target
/// strictly decreasing and the final state exactly the target. The recorded
/// algorithms run at a negligible learning rate, so replaying them on the
/// supplied datasets reproduces every transition within the bound; no
/// optimizer step is ever taken while building the record.
pub fn attack_reverse_walk(
    cfg: &ReverseWalkConfig,
    target: &DenseTensor,
    datasets: Vec<LabeledDataset>,
    registry: &InitRegistry,
    meter: &mut CostMeter,
    clock: &dyn Clock,
) -> Result<TrainingRecord, Error> {
    let hops = cfg.claimed_algs.len();
    if hops != datasets.len() {
        return Err(Error::Trainer(trainer::Error::DatasetCount {
            algs: hops,
            datasets: datasets.len(),
        }));
    }
    if hops == 0 {
        return Err(Error::BadConfig("reverse walk needs at least one hop"));
    }
    let started = clock.now_seconds();
    let b = cfg.noise_bound;
    if !(b.is_finite() && b > 0.0) {
        return Err(Error::BadConfig("reverse walk needs a positive noise bound"));
    }
    let init_state = models::init_model(&cfg.init, &cfg.arch, registry)?;
    let dim = init_state.dim();
    let d1 = l2_distance(&init_state.params, target)?;
    let capacity = WALK_PACING_FRACTION * b * hops as f64;
    if d1 > capacity {
        return Err(Error::InfeasibleWalk {
            distance: d1,
            capacity,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.walk_seed);
    let mut states = alloc::vec![init_state];
    let mut x = states[0].params.clone();
    for s in 0..hops {
        let remaining = hops - s;
        if remaining == 1 {
            states.push(ModelState::new(target.clone()));
            break;
        }
        let diff = target.sub(&x)?;
        let r = diff.l2_norm();
        if r == 0.0 {
            // Already sitting on the target; pad with zero hops.
            states.push(ModelState::new(x.clone()));
            continue;
        }
        // Radial progress: even pacing, floored so the remaining hops can
        // always finish, never more than the per-hop capacity.
        let p_even = r / remaining as f64;
        let p_floor = r - WALK_PACING_FRACTION * b * (remaining - 1) as f64;
        let p = p_even.max(p_floor).min(r);
        // Tangential jitter, capped three ways: strict distance decrease,
        // hop budget, and the pacing invariant for the next hop.
        let decrease_cap = 0.98 * crate::fmath::sqrt(p * (2.0 * r - p));
        let hop_cap_sq = (WALK_HOP_FRACTION * b) * (WALK_HOP_FRACTION * b) - p * p;
        let pace = WALK_PACING_FRACTION * b * (remaining - 1) as f64;
        let pace_cap_sq = pace * pace - (r - p) * (r - p);
        let mut jitter_cap = decrease_cap;
        if hop_cap_sq > 0.0 {
            jitter_cap = jitter_cap.min(crate::fmath::sqrt(hop_cap_sq));
        } else {
            jitter_cap = 0.0;
        }
        if pace_cap_sq > 0.0 {
            jitter_cap = jitter_cap.min(crate::fmath::sqrt(pace_cap_sq));
        } else {
            jitter_cap = 0.0;
        }
        let unit = diff.scale(1.0 / r);
        let mut next = x.add(&unit.scale(p))?;
        if jitter_cap > 0.0 {
            let raw: Vec<f64> = (0..dim)
                .map(|_| {
                    let v: f64 = rng.sample(StandardNormal);
                    v
                })
                .collect();
            let raw = DenseTensor::vector(raw);
            let along = raw.dot(&unit)?;
            let tangent = raw.sub(&unit.scale(along))?;
            let tnorm = tangent.l2_norm();
            if tnorm > 0.0 {
                let mag: f64 = rng.random::<f64>() * 0.7 * jitter_cap;
                next = next.add(&tangent.scale(mag / tnorm))?;
            }
        }
        states.push(ModelState::new(next.clone()));
        x = next;
    }
    let algs: Vec<TrainingAlgorithmSpec> = cfg
        .claimed_algs
        .iter()
        .map(|a| {
            a.clone().with_manipulation(Manipulation::ConstantOutput {
                epsilon_lr: cfg.epsilon_lr,
            })
        })
        .collect();
    meter.record("reverse_walk", 0, clock.now_seconds() - started);
    Ok(TrainingRecord {
        prover_id: cfg.prover_id.clone(),
        arch: cfg.arch.clone(),
        init: cfg.init.clone(),
        algs,
        trajectory: Trajectory { states },
        datasets,
        noise_bound: cfg.noise_bound,
    })
}

// ---------------------------------------------------------------------------
// Interpolation
// ---------------------------------------------------------------------------

/// Proof whose states sit on the straight segment between the honest init
/// and the target: `M_i = (1 - a_i) M_1 + a_i T` with a strictly increasing
/// random schedule from 0 to 1. Costs essentially nothing and ships no data.
pub fn attack_interpolation(
    prover_id: &str,
    arch: &ArchitectureSpec,
    init: &InitAlgorithmSpec,
    claimed_algs: &[TrainingAlgorithmSpec],
    target: &DenseTensor,
    noise_bound: f64,
    schedule_seed: u64,
    registry: &InitRegistry,
    meter: &mut CostMeter,
    clock: &dyn Clock,
) -> Result<Proof, Error> {
    if claimed_algs.is_empty() {
        return Err(Error::BadConfig("interpolation needs at least one claimed algorithm"));
    }
    let started = clock.now_seconds();
    let init_state = models::init_model(init, arch, registry)?;
    let n = claimed_algs.len() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(schedule_seed);
    let gaps: Vec<f64> = (0..n - 1).map(|_| 0.1 + rng.random::<f64>()).collect();
    let total: f64 = gaps.iter().sum();
    let mut states = Vec::with_capacity(n);
    states.push(init_state.clone());
    let mut cum = 0.0;
    for (i, g) in gaps.iter().enumerate() {
        cum += g;
        if i + 2 == n {
            states.push(ModelState::new(target.clone()));
        } else {
            let a = cum / total;
            let blended = init_state.params.scale(1.0 - a).add(&target.scale(a))?;
            states.push(ModelState::new(blended));
        }
    }
    meter.record("interpolation", 0, clock.now_seconds() - started);
    Ok(Proof {
        prover_id: String::from(prover_id),
        arch: arch.clone(),
        init: init.clone(),
        algs: claimed_algs.to_vec(),
        trajectory: Trajectory { states },
        noise_bound,
    })
}

// ---------------------------------------------------------------------------
// Backward chain
// ---------------------------------------------------------------------------

pub struct BackwardChainOutcome {
    pub proof: Proof,
    /// Distance between the chain's own (discarded) first state and the
    /// pinned honest init; the seam the attack hides.
    pub candidate_init_distance: f64,
    /// Backward hops actually executed.
    pub hops_used: usize,
}

/// Grows a chain backward from the target: each predecessor is the current
/// state plus a real optimizer update whose gradient is pulled toward the
/// honest init, evaluated on fabricated (falsely labeled) data. The emitted
/// proof pins the first state to the honest init and presents the reversed
/// chain as the trajectory. If `stop_threshold` is set, the chain stops as
/// soon as its candidate first state gets that close to the init.
pub fn attack_backward_chain(
    prover_id: &str,
    arch: &ArchitectureSpec,
    init: &InitAlgorithmSpec,
    claimed_algs: &[TrainingAlgorithmSpec],
    working_data: &[LabeledDataset],
    target: &DenseTensor,
    pull_alpha: f64,
    noise_bound: f64,
    stop_threshold: Option<f64>,
    registry: &InitRegistry,
    meter: &mut CostMeter,
    clock: &dyn Clock,
) -> Result<BackwardChainOutcome, Error> {
    if claimed_algs.is_empty() || claimed_algs.len() != working_data.len() {
        return Err(Error::BadConfig(
            "backward chain needs one working dataset per claimed algorithm",
        ));
    }
    let started = clock.now_seconds();
    let init_state = models::init_model(init, arch, registry)?;
    let mut chain = alloc::vec![target.clone()];
    let mut x = target.clone();
    let mut steps: u64 = 0;
    let mut hops = 0usize;
    for i in (0..claimed_algs.len()).rev() {
        let pull_alg = claimed_algs[i]
            .clone()
            .with_manipulation(Manipulation::TargetPull {
                target: init_state.params.clone(),
                alpha: pull_alpha,
            });
        let state = ModelState::new(x.clone());
        let delta = trainer::apply_training_algorithm(arch, &pull_alg, &state, &working_data[i])?;
        x = x.add(&delta)?;
        if !x.all_finite() {
            return Err(Error::Trainer(trainer::Error::Diverged { checkpoint: i }));
        }
        chain.push(x.clone());
        steps += pull_alg.steps_per_checkpoint as u64;
        hops += 1;
        if let Some(th) = stop_threshold {
            if l2_distance(&x, &init_state.params)? <= th {
                break;
            }
        }
    }
    let candidate_init_distance = l2_distance(&x, &init_state.params)?;
    chain.reverse();
    let mut states: Vec<ModelState> = Vec::with_capacity(chain.len());
    states.push(init_state);
    for params in chain.into_iter().skip(1) {
        states.push(ModelState::new(params));
    }
    let first_alg = claimed_algs.len() - hops;
    meter.record("backward_chain", steps, clock.now_seconds() - started);
    Ok(BackwardChainOutcome {
        proof: Proof {
            prover_id: String::from(prover_id),
            arch: arch.clone(),
            init: init.clone(),
            algs: claimed_algs[first_alg..].to_vec(),
            trajectory: Trajectory { states },
            noise_bound,
        },
        candidate_init_distance,
        hops_used: hops,
    })
}

/// Rotates every label by one class: plausible-looking, systematically
/// wrong data for backward chains.
pub fn falsify_labels(data: &LabeledDataset, classes: usize) -> LabeledDataset {
    let mut out = data.clone();
    for l in out.labels.iter_mut() {
        *l = (*l + 1) % classes;
    }
    out
}

// ---------------------------------------------------------------------------
// Weak mutations
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StructureMutation {
    /// Drop the last dataset so counts stop matching.
    DropDataset,
    /// Drop the last algorithm so counts stop matching.
    DropAlgorithm,
    /// Kick a middle state far outside the update bound.
    BreakUpdateBound,
}

pub fn mutate_structure(record: &TrainingRecord, m: StructureMutation) -> TrainingRecord {
    let mut out = record.clone();
    match m {
        StructureMutation::DropDataset => {
            out.datasets.pop();
        }
        StructureMutation::DropAlgorithm => {
            out.algs.pop();
        }
        StructureMutation::BreakUpdateBound => {
            let mid = out.trajectory.states.len() / 2;
            let kick = 10.0 * record.noise_bound + 1.0;
            if let Some(v) = out.trajectory.states[mid].params.values_mut().first_mut() {
                *v += kick;
            }
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum InitMutation {
    /// Replace the first state with a constant vector.
    ConstantVector { value: f64 },
    /// Shift every coordinate of the first state, faking a different mean.
    ShiftedGaussian { shift: f64 },
}

pub fn mutate_init(proof: &Proof, m: InitMutation) -> Proof {
    let mut out = proof.clone();
    let first = &mut out.trajectory.states[0].params;
    match m {
        InitMutation::ConstantVector { value } => {
            for v in first.values_mut() {
                *v = value;
            }
        }
        InitMutation::ShiftedGaussian { shift } => {
            for v in first.values_mut() {
                *v += shift;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Activation, LossKind};
    use crate::record::{check_structure, check_structure_proof};
    use crate::tasks::Task;
    use crate::trainer::{NoiseModel, NullClock};

    fn setup() -> (ArchitectureSpec, HonestTrainConfig, Vec<LabeledDataset>) {
        let arch = ArchitectureSpec::mlp(2, alloc::vec![4], 2, Activation::Tanh);
        let task = Task::TwoMoons { noise: 0.15 };
        let datasets: Vec<LabeledDataset> = (0..4).map(|i| task.sample(24, 100 + i)).collect();
        let algs: Vec<TrainingAlgorithmSpec> = (0..4)
            .map(|i| TrainingAlgorithmSpec::sgd(0.1, 8, 5, LossKind::CrossEntropy, 40 + i).unwrap())
            .collect();
        let cfg = HonestTrainConfig {
            prover_id: String::from("eve"),
            arch: arch.clone(),
            init: InitAlgorithmSpec::Gaussian {
                mean: 0.0,
                std: 0.3,
                seed: 11,
            },
            algs,
            noise: NoiseModel::None,
            noise_bound: 0.0,
        };
        (arch, cfg, datasets)
    }

    fn some_target(dim: usize) -> DenseTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(999);
        DenseTensor::vector((0..dim).map(|_| rng.random_range(-0.5..0.5)).collect())
    }

    #[test]
    fn zero_alpha_forward_pull_is_bitwise_honest() {
        let (_, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let mut m1 = CostMeter::new();
        let mut m2 = CostMeter::new();
        let honest =
            trainer::train_honest(&cfg, datasets.clone(), &registry, &mut m1, &NullClock).unwrap();
        let target = some_target(honest.trajectory.first().dim());
        let forged =
            attack_forward_pull(&cfg, &target, 0.0, datasets, &registry, &mut m2, &NullClock)
                .unwrap();
        for (a, b) in honest
            .trajectory
            .states
            .iter()
            .zip(forged.trajectory.states.iter())
        {
            assert_eq!(a.params.values(), b.params.values());
        }
    }

    #[test]
    fn forward_pull_approaches_target_and_keeps_structure() {
        let (_, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let mut m1 = CostMeter::new();
        let mut m2 = CostMeter::new();
        let honest =
            trainer::train_honest(&cfg, datasets.clone(), &registry, &mut m1, &NullClock).unwrap();
        let target = some_target(honest.trajectory.first().dim());
        let forged =
            attack_forward_pull(&cfg, &target, 3.0, datasets, &registry, &mut m2, &NullClock)
                .unwrap();
        let dh = l2_distance(&honest.trajectory.last().params, &target).unwrap();
        let dm = l2_distance(&forged.trajectory.last().params, &target).unwrap();
        assert!(dm < dh, "{dm} vs {dh}");
        assert!(check_structure(&forged).ok());
    }

    #[test]
    fn forward_pull_to_threshold_stops_early_for_large_alpha() {
        let (arch, mut cfg, _) = setup();
        let task = Task::TwoMoons { noise: 0.15 };
        let checkpoints: usize = 30;
        cfg.algs = (0..checkpoints)
            .map(|i| {
                TrainingAlgorithmSpec::sgd(0.1, 8, 5, LossKind::CrossEntropy, 40 + i as u64)
                    .unwrap()
            })
            .collect();
        let datasets: Vec<LabeledDataset> = (0..checkpoints)
            .map(|i| task.sample(24, 200 + i as u64))
            .collect();
        let registry = InitRegistry::new();
        let init = models::init_model(&cfg.init, &arch, &registry).unwrap();
        let target = {
            // A target far from anywhere honest SGD would wander.
            let mut t = init.params.clone();
            for v in t.values_mut() {
                *v += 1.0;
            }
            t
        };
        // Pull speed per step is lr * alpha = 0.2, so the stop ball must be
        // wider than one step; 1.0 is about a fifth of the init distance.
        let threshold = 1.0;
        let mut meter = CostMeter::new();
        let (record, used) = attack_forward_pull_to_threshold(
            &cfg,
            &target,
            2.0,
            datasets,
            threshold,
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap();
        assert!(used < checkpoints, "pull should hit the threshold early, used {used}");
        assert_eq!(record.algs.len(), used);
        assert_eq!(record.datasets.len(), used);
        assert_eq!(record.trajectory.len(), used + 1);
        assert!(
            l2_distance(&record.trajectory.last().params, &target).unwrap() <= threshold + 1e-12
        );
        assert!(check_structure(&record).ok());
    }

    #[test]
    fn reverse_walk_respects_bound_and_pins_target() {
        let (arch, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let init = models::init_model(&cfg.init, &arch, &registry).unwrap();
        let target = some_target(init.dim());
        let d1 = l2_distance(&init.params, &target).unwrap();
        let hops = 6;
        let b = d1 / (0.72 * hops as f64) * 1.3;
        let walk_cfg = ReverseWalkConfig {
            prover_id: String::from("eve"),
            arch: arch.clone(),
            init: cfg.init.clone(),
            claimed_algs: (0..hops)
                .map(|i| {
                    TrainingAlgorithmSpec::sgd(0.1, 8, 5, LossKind::CrossEntropy, 70 + i).unwrap()
                })
                .collect(),
            epsilon_lr: 1e-12,
            noise_bound: b,
            walk_seed: 5,
        };
        let mut meter = CostMeter::new();
        let record = attack_reverse_walk(
            &walk_cfg,
            &target,
            datasets.iter().cycle().take(hops as usize).cloned().collect(),
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap();
        assert_eq!(record.trajectory.len(), hops as usize + 1);
        assert_eq!(record.trajectory.first().params.values(), init.params.values());
        assert_eq!(record.trajectory.last().params.values(), target.values());
        let states = &record.trajectory.states;
        let mut prev_dist = f64::INFINITY;
        for (i, s) in states.iter().enumerate() {
            let d = l2_distance(&s.params, &target).unwrap();
            assert!(d < prev_dist || (d == 0.0 && prev_dist == 0.0), "state {i}");
            prev_dist = d;
            if i > 0 {
                let hop = l2_distance(&s.params, &states[i - 1].params).unwrap();
                assert!(hop < b, "hop {i} is {hop}, bound {b}");
            }
        }
        // The retraining check is exactly the structural replay: negligible
        // recorded updates plus bound-sized hops stay inside B.
        assert!(check_structure(&record).ok(), "{:?}", check_structure(&record).violations);
        assert_eq!(meter.total_steps(), 0);
        assert_eq!(meter.cost(crate::trainer::CostMode::Steps), 1.0);
    }

    #[test]
    fn reverse_walk_reports_infeasible_distances() {
        let (arch, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let init = models::init_model(&cfg.init, &arch, &registry).unwrap();
        let target = some_target(init.dim());
        let walk_cfg = ReverseWalkConfig {
            prover_id: String::from("eve"),
            arch,
            init: cfg.init.clone(),
            claimed_algs: alloc::vec![TrainingAlgorithmSpec::sgd(
                0.1,
                8,
                5,
                LossKind::CrossEntropy,
                70
            )
            .unwrap()],
            epsilon_lr: 1e-12,
            noise_bound: 1e-6,
            walk_seed: 5,
        };
        let mut meter = CostMeter::new();
        let err = attack_reverse_walk(
            &walk_cfg,
            &target,
            datasets.into_iter().take(1).collect(),
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap_err();
        assert!(matches!(err, Error::InfeasibleWalk { .. }));
    }

    #[test]
    fn interpolation_states_sit_on_the_segment() {
        let (arch, cfg, _) = setup();
        let registry = InitRegistry::new();
        let init = models::init_model(&cfg.init, &arch, &registry).unwrap();
        let target = some_target(init.dim());
        let claimed: Vec<TrainingAlgorithmSpec> = (0..5)
            .map(|i| TrainingAlgorithmSpec::sgd(0.1, 8, 5, LossKind::CrossEntropy, 80 + i).unwrap())
            .collect();
        let mut meter = CostMeter::new();
        let proof = attack_interpolation(
            "eve",
            &arch,
            &cfg.init,
            &claimed,
            &target,
            0.05,
            3,
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap();
        assert_eq!(proof.trajectory.len(), 6);
        assert_eq!(proof.trajectory.first().params.values(), init.params.values());
        assert_eq!(proof.trajectory.last().params.values(), target.values());
        assert!(check_structure_proof(&proof).ok());
        // Interior states are convex combinations: distance from init plus
        // distance to target equals the segment length.
        let seg = l2_distance(&init.params, &target).unwrap();
        let mut prev_a = -1.0;
        for s in &proof.trajectory.states {
            let da = l2_distance(&s.params, &init.params).unwrap();
            let db = l2_distance(&s.params, &target).unwrap();
            assert!((da + db - seg).abs() < 1e-9, "off segment: {}", da + db - seg);
            let a = da / seg;
            assert!(a > prev_a, "schedule must strictly increase");
            prev_a = a;
        }
        assert_eq!(meter.cost(crate::trainer::CostMode::Steps), 1.0);
    }

    #[test]
    fn backward_chain_pins_init_and_target() {
        let (arch, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let init = models::init_model(&cfg.init, &arch, &registry).unwrap();
        let target = some_target(init.dim());
        let claimed: Vec<TrainingAlgorithmSpec> = (0..4)
            .map(|i| TrainingAlgorithmSpec::sgd(0.1, 8, 5, LossKind::CrossEntropy, 90 + i).unwrap())
            .collect();
        let falsified: Vec<LabeledDataset> = datasets
            .iter()
            .map(|d| falsify_labels(d, arch.classes))
            .collect();
        let mut meter = CostMeter::new();
        let out = attack_backward_chain(
            "eve",
            &arch,
            &cfg.init,
            &claimed,
            &falsified,
            &target,
            2.0,
            0.05,
            None,
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap();
        assert_eq!(out.hops_used, 4);
        assert_eq!(out.proof.trajectory.len(), 5);
        assert_eq!(
            out.proof.trajectory.first().params.values(),
            init.params.values()
        );
        assert_eq!(out.proof.trajectory.last().params.values(), target.values());
        assert!(out.candidate_init_distance > 0.0);
        assert!(out.candidate_init_distance.is_finite());
        assert!(check_structure_proof(&out.proof).ok());
        assert_eq!(meter.total_steps(), 20);
    }

    #[test]
    fn falsified_labels_still_bound_by_class_count() {
        let task = Task::Digits8x8 { noise: 0.2 };
        let d = task.sample(30, 5);
        let f = falsify_labels(&d, 10);
        assert_eq!(f.labels.len(), 30);
        for (a, b) in d.labels.iter().zip(f.labels.iter()) {
            assert_eq!((*a + 1) % 10, *b);
            assert!(*b < 10);
        }
    }

    #[test]
    fn structure_mutations_break_the_checker() {
        let (_, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let mut meter = CostMeter::new();
        let record =
            trainer::train_honest(&cfg, datasets, &registry, &mut meter, &NullClock).unwrap();
        assert!(check_structure(&record).ok());
        for m in [
            StructureMutation::DropDataset,
            StructureMutation::DropAlgorithm,
            StructureMutation::BreakUpdateBound,
        ] {
            let broken = mutate_structure(&record, m);
            assert!(!check_structure(&broken).ok(), "{m:?} must be caught");
        }
    }

    #[test]
    fn init_mutations_change_only_the_first_state() {
        let (_, cfg, datasets) = setup();
        let registry = InitRegistry::new();
        let mut meter = CostMeter::new();
        let record =
            trainer::train_honest(&cfg, datasets, &registry, &mut meter, &NullClock).unwrap();
        let proof = record.to_proof();
        for m in [
            InitMutation::ConstantVector { value: 0.25 },
            InitMutation::ShiftedGaussian { shift: 0.4 },
        ] {
            let mutated = mutate_init(&proof, m);
            assert_ne!(
                mutated.trajectory.first().params.values(),
                proof.trajectory.first().params.values()
            );
            for i in 1..proof.trajectory.len() {
                assert_eq!(
                    mutated.trajectory.states[i].params.values(),
                    proof.trajectory.states[i].params.values()
                );
            }
        }
    }
}
