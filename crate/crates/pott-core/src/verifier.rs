//! Three-stage proof verification.
//!
//! Stage 1 is cheap: structural coherence plus a check that the first state
//! really came from the claimed initialization (a registry lookup for
//! pretrained handles, a pooled one-sample KS test for distributional
//! claims). Stage 2 synthesizes data that explains the trajectory under the
//! proof's own recorded algorithms. Stage 3 measures how useful that data
//! is: fresh models are trained on it and scored on held-out task data.
//! Competing proofs for the same model are then judged by that score.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::distill::{self, DistillConfig};
use crate::models::{self, ArchitectureSpec, InitAlgorithmSpec, InitRegistry, LossKind, ModelState};
use crate::record::{
    check_structure, check_structure_proof, LabeledDataset, Proof, StructureReport,
    TrainingAlgorithmSpec, TrainingRecord, Trajectory,
};
use crate::trainer;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    Distill(distill::Error),
    Trainer(trainer::Error),
    Model(models::Error),
    BadConfig(&'static str),
}

impl From<distill::Error> for Error {
    fn from(e: distill::Error) -> Self {
        Error::Distill(e)
    }
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

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::Distill(e) => write!(f, "{e}"),
            Error::Trainer(e) => write!(f, "{e}"),
            Error::Model(e) => write!(f, "{e}"),
            Error::BadConfig(msg) => write!(f, "{msg}"),
        }
    }
}

// ---------------------------------------------------------------------------
// One-sample KS test
// ---------------------------------------------------------------------------

/// Complementary CDF of the Kolmogorov distribution,
/// `Q(x) = 2 sum_{j>=1} (-1)^(j-1) exp(-2 j^2 x^2)`, clamped to [0, 1].
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if lambda < 0.1 {
        return 1.0;
    }
    let mut sum = 0.0;
    let mut sign = 1.0;
    for j in 1..=100u32 {
        let jj = j as f64;
        let term = crate::fmath::exp(-2.0 * jj * jj * lambda * lambda);
        sum += sign * term;
        sign = -sign;
        if term < 1e-14 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub p_value: f64,
    pub samples: usize,
}

/// One-sample KS statistic of `values` against the continuous CDF `cdf`.
/// `D = max_i max(F(x_(i)) - i/N, (i+1)/N - F(x_(i)))` over the sorted
/// sample.
pub fn ks_test(values: &[f64], cdf: &dyn Fn(f64) -> f64) -> KsResult {
    let n = values.len();
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("non-finite sample"));
    let nf = n as f64;
    let mut d: f64 = 0.0;
    for (i, x) in sorted.iter().enumerate() {
        let f = cdf(*x);
        let lo = f - i as f64 / nf;
        let hi = (i + 1) as f64 / nf - f;
        d = d.max(lo).max(hi);
    }
    let sqrt_n = crate::fmath::sqrt(nf);
    let lambda = (sqrt_n + 0.12 + 0.11 / sqrt_n) * d;
    KsResult {
        statistic: d,
        p_value: kolmogorov_q(lambda),
        samples: n,
    }
}

/// Standard normal CDF via the error function.
pub fn gaussian_cdf(mean: f64, std: f64, x: f64) -> f64 {
    0.5 * (1.0 + crate::fmath::erf((x - mean) / (std * crate::fmath::sqrt(2.0))))
}

pub fn uniform_cdf(lo: f64, hi: f64, x: f64) -> f64 {
    if x <= lo {
        0.0
    } else if x >= hi {
        1.0
    } else {
        (x - lo) / (hi - lo)
    }
}

// ---------------------------------------------------------------------------
// Stage 1
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitVerdict {
    /// Distributional claim tested by pooled KS over the first state.
    Ks { result: KsResult, passed: bool },
    /// Pretrained claim resolved against the registry.
    Registry {
        handle: String,
        found: bool,
        verified: bool,
        matches: bool,
    },
    /// Degenerate claim (zero-width distribution) checked by equality.
    Exact { passed: bool },
}

impl InitVerdict {
    pub fn passed(&self) -> bool {
        match self {
            InitVerdict::Ks { passed, .. } => *passed,
            InitVerdict::Registry {
                found,
                verified,
                matches,
                ..
            } => *found && *verified && *matches,
            InitVerdict::Exact { passed } => *passed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stage1Report {
    pub structure: StructureReport,
    pub init: InitVerdict,
}

impl Stage1Report {
    pub fn passed(&self) -> bool {
        self.structure.ok() && self.init.passed()
    }
}

/// Checks the first trajectory state against the claimed initialization.
pub fn check_init(
    init: &InitAlgorithmSpec,
    first: &ModelState,
    registry: &InitRegistry,
    significance: f64,
) -> InitVerdict {
    match init {
        InitAlgorithmSpec::Gaussian { mean, std, .. } => {
            if *std <= 0.0 {
                let passed = first.params.values().iter().all(|v| *v == *mean);
                return InitVerdict::Exact { passed };
            }
            let (m, s) = (*mean, *std);
            let cdf = move |x: f64| gaussian_cdf(m, s, x);
            let result = ks_test(first.params.values(), &cdf);
            InitVerdict::Ks {
                passed: result.p_value >= significance,
                result,
            }
        }
        InitAlgorithmSpec::Uniform { lo, hi, .. } => {
            if hi <= lo {
                let passed = first.params.values().iter().all(|v| *v == *lo);
                return InitVerdict::Exact { passed };
            }
            let (l, h) = (*lo, *hi);
            let cdf = move |x: f64| uniform_cdf(l, h, x);
            let result = ks_test(first.params.values(), &cdf);
            InitVerdict::Ks {
                passed: result.p_value >= significance,
                result,
            }
        }
        InitAlgorithmSpec::Pretrained { handle } => match registry.get(handle) {
            None => InitVerdict::Registry {
                handle: handle.clone(),
                found: false,
                verified: false,
                matches: false,
            },
            Some(entry) => InitVerdict::Registry {
                handle: handle.clone(),
                found: true,
                verified: entry.verified,
                matches: entry.params.values() == first.params.values(),
            },
        },
    }
}

/// Stage 1 for a dataless proof: structure plus init provenance.
pub fn stage1_proof(proof: &Proof, registry: &InitRegistry, significance: f64) -> Stage1Report {
    let structure = check_structure_proof(proof);
    let init = check_init(&proof.init, proof.trajectory.first(), registry, significance);
    Stage1Report { structure, init }
}

/// Stage 1 for a full record: adds the dataset checks and the update-bound
/// replay of every recorded algorithm (the retraining check).
pub fn stage1_record(
    record: &TrainingRecord,
    registry: &InitRegistry,
    significance: f64,
) -> Stage1Report {
    let structure = check_structure(record);
    let init = check_init(
        &record.init,
        record.trajectory.first(),
        registry,
        significance,
    );
    Stage1Report { structure, init }
}

// ---------------------------------------------------------------------------
// Stages 2 and 3
// ---------------------------------------------------------------------------

/// How the synthetic features start before matching optimizes them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SynthInit {
    /// Standard-normal features; carries no information about the task.
    Gaussian,
    /// Per-column mean and standard deviation of the held-out set, drawn as
    /// independent gaussians. In-distribution scale without any example
    /// structure, so a data-free trajectory still synthesizes junk.
    #[default]
    MomentMatched,
    /// Rows copied from the held-out set to match the balanced labels.
    /// Inflates fidelity for every proof; useful only as an upper anchor.
    TestPool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifierConfig {
    /// KS significance level for the init check.
    pub significance: f64,
    /// Synthesis iterations per proof.
    pub distill_iterations: usize,
    /// Checkpoints per matched fragment.
    pub fragment_len: usize,
    /// Rows of the synthesized dataset.
    pub synth_rows: usize,
    /// Gradient-descent rate on the synthetic features.
    pub synth_lr: f64,
    /// Feature initialization for the synthesis.
    #[serde(default)]
    pub synth_init: SynthInit,
    /// Fresh models trained on the synthesized data.
    pub eval_models: usize,
    /// Optimizer steps per fresh model.
    pub eval_steps: usize,
    /// Steps per evaluation chunk (each chunk reseeds its batch stream).
    pub eval_chunk: usize,
    pub eval_lr: f64,
    pub eval_batch: usize,
    pub eval_init_std: f64,
    pub seed: u64,
}

impl Default for VerifierConfig {
    fn default() -> Self {
        Self {
            significance: 0.01,
            distill_iterations: 300,
            fragment_len: 2,
            synth_rows: 16,
            synth_lr: 0.05,
            synth_init: SynthInit::default(),
            eval_models: 3,
            eval_steps: 500,
            eval_chunk: 50,
            eval_lr: 0.1,
            eval_batch: 16,
            eval_init_std: 0.3,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofAssessment {
    pub prover_id: String,
    pub stage1: Stage1Report,
    /// Matching loss at the first synthesis iteration, when stage 2 ran.
    pub matching_first: Option<f64>,
    /// Matching loss at the last synthesis iteration.
    pub matching_final: Option<f64>,
    /// Median matching loss over the last tenth of iterations.
    pub matching_tail_median: Option<f64>,
    /// Held-out accuracy of each fresh model trained on the synthesis.
    pub model_accuracies: Vec<f64>,
    /// Mean of `model_accuracies`; zero when stage 1 already rejected.
    pub score: f64,
}

/// Trains one fresh model on the synthesized data in reseeded chunks and
/// returns its held-out accuracy.
fn eval_one_model(
    arch: &ArchitectureSpec,
    synth: &LabeledDataset,
    test: &LabeledDataset,
    cfg: &VerifierConfig,
    stream: u64,
) -> Result<f64, Error> {
    let init = InitAlgorithmSpec::Gaussian {
        mean: 0.0,
        std: cfg.eval_init_std,
        seed: crate::seed::derive(stream, 0),
    };
    let mut state = models::init_model(&init, arch, &InitRegistry::new())?;
    let mut remaining = cfg.eval_steps;
    let mut chunk_index = 0u64;
    while remaining > 0 {
        let steps = remaining.min(cfg.eval_chunk.max(1));
        let alg = TrainingAlgorithmSpec::sgd(
            cfg.eval_lr,
            cfg.eval_batch,
            steps,
            LossKind::CrossEntropy,
            crate::seed::derive(stream, 1 + chunk_index),
        )
        .map_err(|_| Error::BadConfig("evaluation algorithm spec"))?;
        let next = trainer::run_checkpoint(arch, &alg, &state, synth)?;
        if !next.all_finite() {
            // A diverged evaluee scores zero rather than poisoning the run.
            return Ok(0.0);
        }
        state = ModelState::new(next);
        remaining -= steps;
        chunk_index += 1;
    }
    Ok(models::accuracy(
        arch,
        &state,
        &test.features,
        &test.labels,
    )?)
}

/// Builds the synthesis starting features the configured way. `None` means
/// the synthesis draws its own standard-normal start.
pub fn synth_initial(
    cfg: &VerifierConfig,
    test: &LabeledDataset,
    classes: usize,
) -> Result<Option<LabeledDataset>, Error> {
    let seed = crate::seed::derive2(cfg.seed, 4, cfg.synth_rows as u64);
    Ok(match cfg.synth_init {
        SynthInit::Gaussian => None,
        SynthInit::MomentMatched => Some(distill::moment_matched_init(
            test,
            cfg.synth_rows,
            classes,
            seed,
        )?),
        SynthInit::TestPool => Some(distill::test_pool_init(
            test,
            cfg.synth_rows,
            classes,
            seed,
        )?),
    })
}

/// Full three-stage assessment of one proof against held-out task data.
pub fn verify_proof(
    proof: &Proof,
    registry: &InitRegistry,
    test: &LabeledDataset,
    cfg: &VerifierConfig,
) -> Result<ProofAssessment, Error> {
    let stage1 = stage1_proof(proof, registry, cfg.significance);
    if !stage1.passed() {
        return Ok(ProofAssessment {
            prover_id: proof.prover_id.clone(),
            stage1,
            matching_first: None,
            matching_final: None,
            matching_tail_median: None,
            model_accuracies: Vec::new(),
            score: 0.0,
        });
    }
    let proof_stream = crate::seed::derive2(cfg.seed, crate::seed::hash_str(&proof.prover_id), 2);
    let dcfg = DistillConfig {
        iterations: cfg.distill_iterations,
        fragment_len: cfg.fragment_len,
        synth_rows: cfg.synth_rows,
        synth_lr: cfg.synth_lr,
        seed: proof_stream,
    };
    // Every proof's synthesis starts from the same draw off the verifier's
    // own held-out set, so competing proofs are scored from a common
    // starting point.
    let initial = synth_initial(cfg, test, proof.arch.classes)?;
    let synthesis = distill::synthesize(proof, &dcfg, initial.as_ref())?;
    let matching_first = synthesis.trace.first().map(|t| t.loss);
    let matching_final = synthesis.trace.last().map(|t| t.loss);
    let tail_start = synthesis.trace.len() - (synthesis.trace.len() / 10).max(1);
    let mut tail: Vec<f64> = synthesis.trace[tail_start..].iter().map(|t| t.loss).collect();
    tail.sort_by(|a, b| a.partial_cmp(b).expect("finite losses"));
    let matching_tail_median = Some(tail[tail.len() / 2]);
    let synth_data = synthesis.dataset("synthesized");
    let mut model_accuracies = Vec::with_capacity(cfg.eval_models);
    for m in 0..cfg.eval_models {
        let stream =
            crate::seed::derive2(proof_stream, 3, m as u64);
        model_accuracies.push(eval_one_model(&proof.arch, &synth_data, test, cfg, stream)?);
    }
    let score = if model_accuracies.is_empty() {
        0.0
    } else {
        model_accuracies.iter().sum::<f64>() / model_accuracies.len() as f64
    };
    Ok(ProofAssessment {
        prover_id: proof.prover_id.clone(),
        stage1,
        matching_first,
        matching_final,
        matching_tail_median,
        model_accuracies,
        score,
    })
}

// ---------------------------------------------------------------------------
// Prior-scheme baseline verifiers
// ---------------------------------------------------------------------------

/// The retraining baseline from earlier ownership schemes: replay every
/// recorded algorithm on its dataset and accept when each residual stays
/// within the declared noise bound plus `epsilon`. Algorithm-manipulation
/// forgeries pass this check by construction, which is why the staged
/// verifier exists.
pub fn retraining_check(record: &TrainingRecord, epsilon: f64) -> Result<bool, Error> {
    let n = record.trajectory.len();
    if n < 2 || record.datasets.len() != n - 1 || record.algs.len() != n - 1 {
        return Err(Error::BadConfig(
            "retraining baseline needs a full record: n states, n-1 algorithms, n-1 datasets",
        ));
    }
    let tol = record.noise_bound + epsilon;
    for i in 0..n - 1 {
        let delta = trainer::apply_training_algorithm(
            &record.arch,
            &record.algs[i],
            &record.trajectory.states[i],
            &record.datasets[i],
        )
        .map_err(Error::Trainer)?;
        let expected = record.trajectory.states[i]
            .params
            .add(&delta)
            .map_err(|_| Error::BadConfig("state/update shape mismatch"))?;
        let residual = record.trajectory.states[i + 1]
            .params
            .sub(&expected)
            .map_err(|_| Error::BadConfig("state/update shape mismatch"))?
            .l2_norm();
        if residual > tol {
            return Ok(false);
        }
    }
    Ok(true)
}

// ---------------------------------------------------------------------------
// Judging competing proofs
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Verdict {
    /// One proof scored clearly above every rival.
    Winner { index: usize, margin: f64 },
    /// Top two scores are within the tie threshold.
    Inconclusive { first: usize, second: usize, margin: f64 },
    /// No proof survived stage 1.
    AllRejected,
}

/// Picks the proof with the best stage-3 score among those passing stage 1.
/// A lead smaller than `tie_threshold` over the runner-up is inconclusive.
pub fn judge(assessments: &[ProofAssessment], tie_threshold: f64) -> Verdict {
    let mut survivors: Vec<(usize, f64)> = assessments
        .iter()
        .enumerate()
        .filter(|(_, a)| a.stage1.passed())
        .map(|(i, a)| (i, a.score))
        .collect();
    if survivors.is_empty() {
        return Verdict::AllRejected;
    }
    survivors.sort_by(|a, b| b.1.partial_cmp(&a.1).expect("finite scores"));
    if survivors.len() == 1 {
        return Verdict::Winner {
            index: survivors[0].0,
            margin: survivors[0].1,
        };
    }
    let margin = survivors[0].1 - survivors[1].1;
    if margin < tie_threshold {
        Verdict::Inconclusive {
            first: survivors[0].0,
            second: survivors[1].0,
            margin,
        }
    } else {
        Verdict::Winner {
            index: survivors[0].0,
            margin,
        }
    }
}

// ---------------------------------------------------------------------------
// Trajectory plausibility statistics
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStats {
    pub max_step: f64,
    pub mean_step: f64,
    pub total_path: f64,
}

/// Hop-size statistics of a trajectory, the cheap separability signal for
/// forged state sequences.
pub fn trajectory_stats(t: &Trajectory) -> TrajectoryStats {
    let mut max_step: f64 = 0.0;
    let mut total = 0.0;
    let hops = t.len().saturating_sub(1);
    for i in 0..hops {
        let d = t.states[i + 1]
            .params
            .sub(&t.states[i].params)
            .map(|d| d.l2_norm())
            .unwrap_or(f64::INFINITY);
        max_step = max_step.max(d);
        total += d;
    }
    TrajectoryStats {
        max_step,
        mean_step: if hops == 0 { 0.0 } else { total / hops as f64 },
        total_path: total,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::Activation;
    use crate::record::Manipulation;
    use crate::tasks::Task;
    use crate::tensor::DenseTensor;
    use crate::trainer::{CostMeter, HonestTrainConfig, NoiseModel, NullClock};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ks_statistic_on_exact_uniform_quantiles() {
        // Midpoint quantiles of U(0,1): the empirical CDF brackets the true
        // CDF symmetrically and D is exactly 1/(2N).
        let n = 100;
        let values: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let cdf = |x: f64| uniform_cdf(0.0, 1.0, x);
        let r = ks_test(&values, &cdf);
        assert!((r.statistic - 0.005).abs() < 1e-15, "D = {}", r.statistic);
        assert!(r.p_value > 0.999999);
    }

    #[test]
    fn ks_statistic_three_point_oracle() {
        let values = [0.1, 0.5, 0.9];
        let cdf = |x: f64| uniform_cdf(0.0, 1.0, x);
        let r = ks_test(&values, &cdf);
        assert!((r.statistic - 7.0 / 30.0).abs() < 1e-15, "D = {}", r.statistic);
        assert!((r.p_value - 0.9883352304122826).abs() < 1e-9);
    }

    #[test]
    fn kolmogorov_series_reference_points() {
        assert!((kolmogorov_q(1.0) - 0.26999967167735456).abs() < 1e-12);
        assert!((kolmogorov_q(0.5) - 0.9639452436648751).abs() < 1e-12);
        assert!((kolmogorov_q(2.0) - 0.0006709252557796953).abs() < 1e-12);
        assert_eq!(kolmogorov_q(0.01), 1.0);
        assert!(kolmogorov_q(5.0) < 1e-10);
        // Monotone decreasing.
        let mut prev = 1.0;
        for i in 1..40 {
            let q = kolmogorov_q(i as f64 * 0.1);
            assert!(q <= prev + 1e-15);
            prev = q;
        }
    }

    #[test]
    fn gaussian_cdf_reference_points() {
        assert!((gaussian_cdf(0.0, 1.0, 0.0) - 0.5).abs() < 1e-15);
        // Phi(1) from the standard normal table.
        assert!((gaussian_cdf(0.0, 1.0, 1.0) - 0.8413447460685429).abs() < 1e-12);
        assert!((gaussian_cdf(2.0, 0.5, 2.0) - 0.5).abs() < 1e-15);
    }

    fn honest_gaussian_state(p: usize, seed: u64, mean: f64, std: f64) -> ModelState {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let normal = rand_distr::Normal::new(mean, std).unwrap();
        let values: Vec<f64> = (0..p).map(|_| rng.sample(normal)).collect();
        ModelState::new(DenseTensor::vector(values))
    }

    #[test]
    fn init_check_accepts_honest_and_rejects_weak_inits() {
        let p = 300;
        let registry = InitRegistry::new();
        let claim = InitAlgorithmSpec::Gaussian {
            mean: 0.0,
            std: 0.3,
            seed: 1,
        };
        let mut passes = 0;
        let mut const_rejects = 0;
        let mut shift_rejects = 0;
        for s in 0..60 {
            let honest = honest_gaussian_state(p, 1000 + s, 0.0, 0.3);
            if check_init(&claim, &honest, &registry, 0.01).passed() {
                passes += 1;
            }
            let constant = ModelState::new(DenseTensor::filled(alloc::vec![p], 0.05));
            if !check_init(&claim, &constant, &registry, 0.01).passed() {
                const_rejects += 1;
            }
            let shifted = honest_gaussian_state(p, 2000 + s, 0.3, 0.3);
            if !check_init(&claim, &shifted, &registry, 0.01).passed() {
                shift_rejects += 1;
            }
        }
        assert!(passes >= 57, "honest passes: {passes}/60");
        assert_eq!(const_rejects, 60);
        assert!(shift_rejects >= 57, "shift rejects: {shift_rejects}/60");
    }

    #[test]
    fn registry_verdicts_cover_all_failure_modes() {
        let p = 10;
        let params = DenseTensor::filled(alloc::vec![p], 0.5);
        let state = ModelState::new(params.clone());
        let claim = InitAlgorithmSpec::Pretrained {
            handle: String::from("base-v1"),
        };
        let empty = InitRegistry::new();
        assert!(!check_init(&claim, &state, &empty, 0.01).passed());
        let mut unverified = InitRegistry::new();
        unverified.insert("base-v1", params.clone(), false);
        assert!(!check_init(&claim, &state, &unverified, 0.01).passed());
        let mut good = InitRegistry::new();
        good.insert("base-v1", params.clone(), true);
        assert!(check_init(&claim, &state, &good, 0.01).passed());
        let other = ModelState::new(DenseTensor::filled(alloc::vec![p], 0.7));
        assert!(!check_init(&claim, &other, &good, 0.01).passed());
    }

    fn quick_verifier_config(seed: u64) -> VerifierConfig {
        VerifierConfig {
            significance: 0.01,
            distill_iterations: 60,
            fragment_len: 1,
            synth_rows: 12,
            synth_lr: 0.05,
            eval_models: 2,
            eval_steps: 120,
            eval_chunk: 30,
            eval_lr: 0.2,
            eval_batch: 12,
            eval_init_std: 0.3,
            seed,
        }
    }

    fn train_small_honest(task: Task, seed: u64) -> (TrainingRecord, LabeledDataset) {
        let data = task.sample(24, seed);
        let arch = ArchitectureSpec::mlp(2, alloc::vec![4], 2, Activation::Tanh);
        let algs: Vec<TrainingAlgorithmSpec> = (0..4)
            .map(|i| {
                TrainingAlgorithmSpec::sgd(0.25, 8, 5, LossKind::CrossEntropy, seed + 10 + i as u64)
                    .unwrap()
            })
            .collect();
        let cfg = HonestTrainConfig {
            prover_id: String::from("alice"),
            arch,
            init: InitAlgorithmSpec::Gaussian {
                mean: 0.0,
                std: 0.3,
                seed: seed ^ 0x55,
            },
            algs,
            noise: NoiseModel::None,
            noise_bound: 0.0,
        };
        let mut meter = CostMeter::new();
        let record = trainer::train_honest(
            &cfg,
            alloc::vec![data.clone(); 4],
            &InitRegistry::new(),
            &mut meter,
            &NullClock,
        )
        .unwrap();
        (record, data)
    }

    #[test]
    fn honest_proof_beats_a_reverse_walk() {
        let task = Task::TwoMoons { noise: 0.15 };
        let (record, _) = train_small_honest(task, 400);
        let honest_proof = record.to_proof();
        let test = task.sample(200, 999);
        let registry = InitRegistry::new();

        // Reverse walk claiming the same final model.
        let target = record.trajectory.last().params.clone();
        let init = models::init_model(&record.init, &record.arch, &registry).unwrap();
        let d1 = crate::tensor::l2_distance(&init.params, &target).unwrap();
        let walk_cfg = crate::attacks::ReverseWalkConfig {
            prover_id: String::from("eve"),
            arch: record.arch.clone(),
            init: record.init.clone(),
            claimed_algs: record.algs.clone(),
            epsilon_lr: 1e-12,
            noise_bound: d1 / (0.72 * record.algs.len() as f64) * 1.4,
            walk_seed: 8,
        };
        let mut meter = CostMeter::new();
        let walk = crate::attacks::attack_reverse_walk(
            &walk_cfg,
            &target,
            record.datasets.clone(),
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap()
        .to_proof();

        let cfg = quick_verifier_config(5);
        let a_honest = verify_proof(&honest_proof, &registry, &test, &cfg).unwrap();
        let a_walk = verify_proof(&walk, &registry, &test, &cfg).unwrap();
        assert!(a_honest.stage1.passed());
        assert!(a_walk.stage1.passed(), "walk is structurally clean");
        assert!(
            a_honest.score > a_walk.score,
            "honest {} vs walk {}",
            a_honest.score,
            a_walk.score
        );
        match judge(&[a_walk.clone(), a_honest.clone()], 0.01) {
            Verdict::Winner { index, .. } => assert_eq!(index, 1),
            v => panic!("expected the honest proof to win, got {v:?}"),
        }
    }

    #[test]
    fn stage1_rejection_short_circuits_scoring() {
        let task = Task::TwoMoons { noise: 0.15 };
        let (record, _) = train_small_honest(task, 401);
        let proof = record.to_proof();
        let broken = crate::attacks::mutate_init(
            &proof,
            crate::attacks::InitMutation::ConstantVector { value: 0.1 },
        );
        let test = task.sample(100, 999);
        let cfg = quick_verifier_config(6);
        let a = verify_proof(&broken, &InitRegistry::new(), &test, &cfg).unwrap();
        assert!(!a.stage1.passed());
        assert_eq!(a.score, 0.0);
        assert!(a.matching_first.is_none());
        assert!(matches!(judge(&[a], 0.01), Verdict::AllRejected));
    }

    #[test]
    fn retraining_baseline_passes_walks_and_fails_tampering() {
        let task = Task::TwoMoons { noise: 0.15 };
        let (record, _) = train_small_honest(task, 402);
        assert_eq!(retraining_check(&record, 1e-9), Ok(true));

        // A bound-respecting reverse walk sails through: its declared
        // constant-output updates reproduce each hop within the bound.
        let registry = InitRegistry::new();
        let target = record.trajectory.last().params.clone();
        let init = models::init_model(&record.init, &record.arch, &registry).unwrap();
        let d1 = crate::tensor::l2_distance(&init.params, &target).unwrap();
        let walk_cfg = crate::attacks::ReverseWalkConfig {
            prover_id: String::from("eve"),
            arch: record.arch.clone(),
            init: record.init.clone(),
            claimed_algs: record.algs.clone(),
            epsilon_lr: 1e-12,
            noise_bound: d1 / (0.72 * record.algs.len() as f64) * 1.4,
            walk_seed: 9,
        };
        let mut meter = CostMeter::new();
        let walk = crate::attacks::attack_reverse_walk(
            &walk_cfg,
            &target,
            record.datasets.clone(),
            &registry,
            &mut meter,
            &NullClock,
        )
        .unwrap();
        assert_eq!(retraining_check(&walk, 1e-9), Ok(true));

        // Tampering with one interior state breaks the replay.
        let mut tampered = record.clone();
        let kick =
            DenseTensor::filled(tampered.trajectory.states[2].params.shape().to_vec(), 0.5);
        tampered.trajectory.states[2].params =
            tampered.trajectory.states[2].params.add(&kick).unwrap();
        assert_eq!(retraining_check(&tampered, 1e-9), Ok(false));
    }

    #[test]
    fn judge_flags_near_ties() {
        let mk = |id: &str, score: f64| ProofAssessment {
            prover_id: String::from(id),
            stage1: Stage1Report {
                structure: StructureReport::default(),
                init: InitVerdict::Exact { passed: true },
            },
            matching_first: None,
            matching_final: None,
            matching_tail_median: None,
            model_accuracies: alloc::vec![score],
            score,
        };
        match judge(&[mk("a", 0.90), mk("b", 0.895)], 0.01) {
            Verdict::Inconclusive { first, second, .. } => {
                assert_eq!(first, 0);
                assert_eq!(second, 1);
            }
            v => panic!("expected a tie, got {v:?}"),
        }
        match judge(&[mk("a", 0.70), mk("b", 0.895)], 0.01) {
            Verdict::Winner { index, .. } => assert_eq!(index, 1),
            v => panic!("expected b to win, got {v:?}"),
        }
    }

    #[test]
    fn trajectory_stats_track_hops() {
        let states: Vec<ModelState> = [0.0, 1.0, 1.5, 3.5]
            .iter()
            .map(|v| ModelState::new(DenseTensor::vector(alloc::vec![*v])))
            .collect();
        let t = Trajectory { states };
        let s = trajectory_stats(&t);
        assert!((s.max_step - 2.0).abs() < 1e-15);
        assert!((s.mean_step - (1.0 + 0.5 + 2.0) / 3.0).abs() < 1e-15);
        assert!((s.total_path - 3.5).abs() < 1e-15);
    }

    #[test]
    fn constant_output_manipulation_scores_below_honest_data() {
        // Direct check that a constant-output proof synthesizes useless
        // data: its fresh-model accuracy is near chance on the moons task.
        let task = Task::TwoMoons { noise: 0.15 };
        let (record, _) = train_small_honest(task, 402);
        let mut forged = record.to_proof();
        for alg in forged.algs.iter_mut() {
            alg.manipulation = Manipulation::ConstantOutput { epsilon_lr: 1e-12 };
        }
        // Forged states: tiny hops from the init so the structure is clean.
        let first = forged.trajectory.first().params.clone();
        for (i, s) in forged.trajectory.states.iter_mut().enumerate().skip(1) {
            let mut v = first.clone();
            v.values_mut()[0] += 1e-6 * i as f64;
            s.params = v;
        }
        forged.noise_bound = 1e-3;
        let test = task.sample(200, 999);
        let cfg = quick_verifier_config(7);
        let honest = verify_proof(&record.to_proof(), &InitRegistry::new(), &test, &cfg).unwrap();
        let walked = verify_proof(&forged, &InitRegistry::new(), &test, &cfg).unwrap();
        assert!(honest.score > walked.score + 0.05, "{} vs {}", honest.score, walked.score);
    }
}
