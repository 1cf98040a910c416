//! The `pott` command-line tool: train, attack, prove, verify, bench, and
//! mi-probe subcommands.
//!
//! Exit codes are stable: 0 success, 2 config or usage error, 3 training
//! divergence, 4 attack infeasible, 5 resource limit exceeded.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use pott_core::attacks::{self, InitMutation, ReverseWalkConfig, StructureMutation};
use pott_core::distill::{self, DistillConfig};
use pott_core::infoprobe::{self, ToyRule};
use pott_core::models::InitRegistry;
use pott_core::record::{LabeledDataset, Proof, TrainingAlgorithmSpec, TrainingRecord};
use pott_core::seed::{derive, derive2, hash_str};
use pott_core::tasks::Task;
use pott_core::trainer::{self, CostMeter, HonestTrainConfig};
use pott_core::verifier::{self, ProofAssessment, VerifierConfig};

use crate::archive::{
    self, dataset_pair_paths, load_archive, load_dataset_pair, load_registry, save_proof,
    save_record, ArchiveError, CostReport, LoadedArchive,
};
use crate::bench::{self, BenchError};
use crate::clock::WallClock;
use crate::configs::{load_config, BenchSuiteConfig, MiProbeConfig, TrainConfig};
use crate::par::{default_jobs, parallel_map};
use crate::report::{build_report, write_report};

#[derive(Debug)]
pub enum CliError {
    /// Bad config file, bad flags, unreadable archives: exit 2.
    Config(String),
    /// Training or synthesis produced non-finite values: exit 3.
    Diverged(String),
    /// The requested forgery cannot exist under its constraints: exit 4.
    Infeasible(String),
    /// A hard resource ceiling was hit: exit 5.
    Resource(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Diverged(_) => 3,
            CliError::Infeasible(_) => 4,
            CliError::Resource(_) => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m)
            | CliError::Diverged(m)
            | CliError::Infeasible(m)
            | CliError::Resource(m) => f.write_str(m),
        }
    }
}

impl std::error::Error for CliError {}

#[derive(Parser, Debug)]
#[command(
    name = "pott",
    version,
    about = "Proof-of-training records: generation, forgery, and staged verification"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Train an honest record from a JSON config and archive it.
    Train(TrainArgs),
    /// Forge a record or proof against a victim archive.
    Attack(AttackArgs),
    /// Strip the datasets from a record archive, leaving the proof.
    Prove(ProveArgs),
    /// Run the staged verifier over competing proof archives.
    Verify(VerifyArgs),
    /// Run the honest-vs-forged benchmark suite.
    Bench(BenchArgs),
    /// Exact information accounting on a discretized training channel.
    MiProbe(MiProbeArgs),
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// JSON training config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output archive directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
pub enum AttackKind {
    /// Train honestly but pull every update toward the stolen model.
    A1,
    /// Write a bound-respecting random walk from init to the stolen model.
    A2,
    /// Interpolate states on the straight segment to the stolen model.
    A3,
    /// Grow a trajectory backward from the stolen model on falsified data.
    A4,
    /// Break the record's structural invariants.
    WeakStructure,
    /// Replace the claimed initialization with a dishonest one.
    WeakInit,
}

#[derive(Args, Debug)]
pub struct AttackArgs {
    #[arg(long, value_enum)]
    pub kind: AttackKind,
    /// Victim archive (record or proof) whose final model is claimed.
    #[arg(long)]
    pub target: PathBuf,
    /// Output archive directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Prover id recorded in the forged archive.
    #[arg(long)]
    pub prover_id: Option<String>,
    /// Attacker randomness (data resampling, walk, schedule).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Pull weight (a1, a4).
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Stop once within this distance of the target (a1).
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Trajectory state count (a3).
    #[arg(long)]
    pub m: Option<usize>,
    /// Backward hops (a4).
    #[arg(long)]
    pub hops: Option<usize>,
    /// Stop once the chain gets this close to the claimed init (a4).
    #[arg(long)]
    pub stop_threshold: Option<f64>,
    /// Learning rate the walk's constant-output algorithms run at (a2).
    #[arg(long, default_value_t = 1e-12)]
    pub epsilon_lr: f64,
    /// Claimed noise bound; defaults to the victim's.
    #[arg(long)]
    pub noise_bound: Option<f64>,
    /// Task id to resample attacker data from; defaults to the victim
    /// record's data distribution.
    #[arg(long)]
    pub task: Option<String>,
    /// Rows per resampled dataset; defaults to the victim's.
    #[arg(long)]
    pub rows: Option<usize>,
    /// Structure mutation (weak-structure): drop-dataset, drop-algorithm,
    /// break-update-bound. Init mutation (weak-init): constant, shifted.
    #[arg(long)]
    pub mutation: Option<String>,
    /// Constant fill value or Gaussian shift size (weak-init).
    #[arg(long)]
    pub value: Option<f64>,
}

#[derive(Args, Debug)]
pub struct ProveArgs {
    /// Record archive to strip.
    #[arg(long)]
    pub record: PathBuf,
    /// Output proof archive directory.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Proof archive directories (at least two competing claims).
    #[arg(long, num_args = 1.., required = true)]
    pub proofs: Vec<PathBuf>,
    /// Held-out test data: either one path prefix (expanded to
    /// <prefix>.features.bin / <prefix>.labels.bin) or the two tensor
    /// files themselves.
    #[arg(long, num_args = 1..=2, required = true)]
    pub test: Vec<PathBuf>,
    /// Synthetic dataset size.
    #[arg(long, default_value_t = 16)]
    pub sds: usize,
    /// Synthesis iterations.
    #[arg(long, default_value_t = 300)]
    pub iters: usize,
    /// Fragment length in checkpoints.
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    /// Fresh models trained per proof in stage 3.
    #[arg(long, default_value_t = 3)]
    pub t: usize,
    /// Report JSON path.
    #[arg(long)]
    pub report: PathBuf,
    /// Directory of verified pretrained inits (<handle>.bin).
    #[arg(long)]
    pub registry: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.01)]
    pub tie_threshold: f64,
    /// Synthesis learning rate.
    #[arg(long, default_value_t = 0.05)]
    pub synth_lr: f64,
    /// Synthesis feature initialization.
    #[arg(long, value_enum, default_value_t = SynthInitArg::MomentMatched)]
    pub synth_init: SynthInitArg,
    /// Stage-3 training steps per model.
    #[arg(long, default_value_t = 500)]
    pub eval_steps: usize,
    /// Stage-3 reseeding chunk.
    #[arg(long, default_value_t = 50)]
    pub eval_chunk: usize,
    /// Stage-3 learning rate.
    #[arg(long, default_value_t = 0.1)]
    pub eval_lr: f64,
    /// Stage-3 batch size.
    #[arg(long, default_value_t = 16)]
    pub eval_batch: usize,
    /// Stage-3 fresh-init standard deviation.
    #[arg(long, default_value_t = 0.3)]
    pub eval_init_std: f64,
    /// Save each proof's synthesized dataset and loss trace here.
    #[arg(long)]
    pub synth_out: Option<PathBuf>,
    /// Worker threads (default: available cores). Results do not depend
    /// on this.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// JSON suite config.
    #[arg(long)]
    pub suite: PathBuf,
    /// Output directory for tables.
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads (default: available cores). Results do not depend
    /// on this.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct MiProbeArgs {
    /// JSON channel config.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Train(a) => cmd_train(&a),
        Command::Attack(a) => cmd_attack(&a),
        Command::Prove(a) => cmd_prove(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Bench(a) => cmd_bench(&a),
        Command::MiProbe(a) => cmd_mi_probe(&a),
    }
}

impl From<ArchiveError> for CliError {
    fn from(e: ArchiveError) -> Self {
        CliError::Config(e.to_string())
    }
}

fn trainer_error(e: trainer::Error) -> CliError {
    match &e {
        trainer::Error::Diverged { .. } => CliError::Diverged(e.to_string()),
        trainer::Error::Graph(pott_core::autodiff::Error::GraphTooLarge { .. }) => {
            CliError::Resource(e.to_string())
        }
        _ => CliError::Config(e.to_string()),
    }
}

fn attacks_error(e: attacks::Error) -> CliError {
    match &e {
        attacks::Error::InfeasibleWalk { .. } => CliError::Infeasible(e.to_string()),
        attacks::Error::Trainer(inner) => trainer_error(inner.clone()),
        _ => CliError::Config(e.to_string()),
    }
}

fn verifier_error(e: &verifier::Error) -> CliError {
    match e {
        verifier::Error::Distill(distill::Error::Diverged { .. }) => {
            CliError::Diverged(e.to_string())
        }
        verifier::Error::Distill(distill::Error::Graph(
            pott_core::autodiff::Error::GraphTooLarge { .. },
        )) => CliError::Resource(e.to_string()),
        verifier::Error::Trainer(trainer::Error::Graph(
            pott_core::autodiff::Error::GraphTooLarge { .. },
        )) => CliError::Resource(e.to_string()),
        other => CliError::Config(other.to_string()),
    }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

fn cmd_train(args: &TrainArgs) -> Result<(), CliError> {
    let cfg: TrainConfig = load_config(&args.config).map_err(CliError::Config)?;
    let task = cfg.validate().map_err(CliError::Config)?;
    let algs = cfg
        .algorithm
        .specs(cfg.checkpoints)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let datasets: Vec<LabeledDataset> = if cfg.shared_dataset {
        let one = task.sample(cfg.rows_per_checkpoint, cfg.data_seed);
        vec![one; cfg.checkpoints]
    } else {
        (0..cfg.checkpoints)
            .map(|i| task.sample(cfg.rows_per_checkpoint, derive(cfg.data_seed, i as u64)))
            .collect()
    };
    let hcfg = HonestTrainConfig {
        prover_id: cfg.prover_id.clone(),
        arch: cfg.arch.materialize(&task),
        init: cfg.init.clone(),
        algs,
        noise: cfg.noise,
        noise_bound: cfg.noise_bound,
    };
    let clock = WallClock::new();
    let mut meter = CostMeter::new();
    let record = trainer::train_honest(&hcfg, datasets, &InitRegistry::new(), &mut meter, &clock)
        .map_err(trainer_error)?;
    save_record(&record, Some(CostReport::from_meter(&meter)), &args.out)?;
    println!(
        "trained {}: {} states, {} steps -> {}",
        record.prover_id,
        record.trajectory.len(),
        meter.total_steps(),
        args.out.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// attack
// ---------------------------------------------------------------------------

/// What the attacker reads off the victim's archive.
struct Victim {
    record: Option<TrainingRecord>,
    proof: Proof,
}

impl Victim {
    fn load(path: &Path) -> Result<Victim, CliError> {
        Ok(match load_archive(path)? {
            LoadedArchive::Record { record, .. } => Victim {
                proof: record.to_proof(),
                record: Some(record),
            },
            LoadedArchive::Proof { proof, .. } => Victim {
                record: None,
                proof,
            },
        })
    }

    fn target(&self) -> pott_core::tensor::DenseTensor {
        self.proof.trajectory.last().params.clone()
    }

    fn default_rows(&self) -> Option<usize> {
        self.record
            .as_ref()
            .and_then(|r| r.datasets.first())
            .map(|d| d.labels.len())
    }

    fn distribution_id(&self) -> Option<&str> {
        self.record
            .as_ref()
            .and_then(|r| r.datasets.first())
            .map(|d| d.distribution_id.as_str())
    }

    /// Algorithm claims for an `n`-long list: the victim's own specs,
    /// cycled if the forgery needs more or fewer.
    fn claimed_algs(&self, n: usize) -> Vec<TrainingAlgorithmSpec> {
        (0..n)
            .map(|i| self.proof.algs[i % self.proof.algs.len()].clone())
            .collect()
    }
}

/// Datasets the attacker brings: the victim's own rows when the archive
/// carries them and the count matches, otherwise a fresh honest resample
/// from the task distribution.
fn attacker_data(
    victim: &Victim,
    args: &AttackArgs,
    count: usize,
) -> Result<Vec<LabeledDataset>, CliError> {
    if args.task.is_none() && args.rows.is_none() {
        if let Some(r) = &victim.record {
            if r.datasets.len() == count {
                return Ok(r.datasets.clone());
            }
        }
    }
    let task_id = args
        .task
        .clone()
        .or_else(|| victim.distribution_id().map(|s| s.to_string()))
        .ok_or_else(|| {
            CliError::Config(
                "victim archive carries no data; pass --task to resample".to_string(),
            )
        })?;
    let task = Task::parse(&task_id)
        .ok_or_else(|| CliError::Config(format!("unknown task id {task_id:?}")))?;
    let rows = args.rows.or_else(|| victim.default_rows()).ok_or_else(|| {
        CliError::Config("victim archive carries no data; pass --rows".to_string())
    })?;
    Ok((0..count)
        .map(|i| task.sample(rows, derive2(args.seed, 0xDA7A, i as u64)))
        .collect())
}

fn require<T: Copy>(v: Option<T>, what: &str) -> Result<T, CliError> {
    v.ok_or_else(|| CliError::Config(format!("this attack kind requires {what}")))
}

fn cmd_attack(args: &AttackArgs) -> Result<(), CliError> {
    let victim = Victim::load(&args.target)?;
    let registry = InitRegistry::new();
    let clock = WallClock::new();
    let mut meter = CostMeter::new();
    let target = victim.target();
    let bound = args.noise_bound.unwrap_or(victim.proof.noise_bound);

    enum Forged {
        Record(TrainingRecord),
        Proof(Proof),
    }

    let (default_id, forged) = match args.kind {
        AttackKind::A1 => {
            let alpha = require(args.alpha, "--alpha")?;
            let data = attacker_data(&victim, args, victim.proof.algs.len())?;
            let hcfg = HonestTrainConfig {
                prover_id: String::new(), // patched below
                arch: victim.proof.arch.clone(),
                init: victim.proof.init.clone(),
                algs: victim.proof.algs.clone(),
                noise: pott_core::trainer::NoiseModel::None,
                noise_bound: bound,
            };
            let record = if alpha == 0.0 && args.threshold.is_none() {
                // Degenerate pull: exactly honest retraining, manipulation-
                // free, so the archive reproduces an honest one bit for bit.
                trainer::train_honest(&hcfg, data, &registry, &mut meter, &clock)
                    .map_err(trainer_error)?
            } else if let Some(threshold) = args.threshold {
                attacks::attack_forward_pull_to_threshold(
                    &hcfg, &target, alpha, data, threshold, &registry, &mut meter, &clock,
                )
                .map_err(attacks_error)?
                .0
            } else {
                attacks::attack_forward_pull(
                    &hcfg, &target, alpha, data, &registry, &mut meter, &clock,
                )
                .map_err(attacks_error)?
            };
            ("attacker-A1", Forged::Record(record))
        }
        AttackKind::A2 => {
            if bound <= 0.0 {
                return Err(CliError::Infeasible(format!(
                    "claimed noise bound {bound} permits no movement; the walk cannot reach the target (pass --noise-bound)"
                )));
            }
            let hops = victim.proof.algs.len();
            let data = attacker_data(&victim, args, hops)?;
            let wcfg = ReverseWalkConfig {
                prover_id: String::new(),
                arch: victim.proof.arch.clone(),
                init: victim.proof.init.clone(),
                claimed_algs: victim.claimed_algs(hops),
                epsilon_lr: args.epsilon_lr,
                noise_bound: bound,
                walk_seed: derive(args.seed, 0x2A11),
            };
            let record =
                attacks::attack_reverse_walk(&wcfg, &target, data, &registry, &mut meter, &clock)
                    .map_err(attacks_error)?;
            ("attacker-A2", Forged::Record(record))
        }
        AttackKind::A3 => {
            let m = args.m.unwrap_or(victim.proof.trajectory.len());
            if m < 2 {
                return Err(CliError::Config("--m must be at least 2".to_string()));
            }
            let proof = attacks::attack_interpolation(
                "attacker-A3",
                &victim.proof.arch,
                &victim.proof.init,
                &victim.claimed_algs(m - 1),
                &target,
                bound,
                derive(args.seed, 0x3A11),
                &registry,
                &mut meter,
                &clock,
            )
            .map_err(attacks_error)?;
            ("attacker-A3", Forged::Proof(proof))
        }
        AttackKind::A4 => {
            let hops = args.hops.unwrap_or(victim.proof.algs.len());
            if hops == 0 {
                return Err(CliError::Config("--hops must be positive".to_string()));
            }
            let alpha = args.alpha.unwrap_or(1.0);
            let classes = victim.proof.arch.classes;
            let working: Vec<LabeledDataset> = attacker_data(&victim, args, hops)?
                .iter()
                .map(|d| attacks::falsify_labels(d, classes))
                .collect();
            let outcome = attacks::attack_backward_chain(
                "attacker-A4",
                &victim.proof.arch,
                &victim.proof.init,
                &victim.claimed_algs(hops),
                &working,
                &target,
                alpha,
                bound,
                args.stop_threshold,
                &registry,
                &mut meter,
                &clock,
            )
            .map_err(attacks_error)?;
            println!(
                "backward chain: {} hops, candidate init misses the claimed one by {:.6}",
                outcome.hops_used, outcome.candidate_init_distance
            );
            ("attacker-A4", Forged::Proof(outcome.proof))
        }
        AttackKind::WeakStructure => {
            let record = victim.record.clone().ok_or_else(|| {
                CliError::Config("weak-structure needs a record archive with data".to_string())
            })?;
            let mutation = match args.mutation.as_deref() {
                Some("drop-dataset") => StructureMutation::DropDataset,
                Some("drop-algorithm") => StructureMutation::DropAlgorithm,
                Some("break-update-bound") => StructureMutation::BreakUpdateBound,
                other => {
                    return Err(CliError::Config(format!(
                        "weak-structure needs --mutation drop-dataset|drop-algorithm|break-update-bound, got {other:?}"
                    )))
                }
            };
            ("attacker-WS", Forged::Record(attacks::mutate_structure(&record, mutation)))
        }
        AttackKind::WeakInit => {
            let mutation = match args.mutation.as_deref() {
                Some("constant") => InitMutation::ConstantVector {
                    value: args.value.unwrap_or(0.1),
                },
                Some("shifted") => InitMutation::ShiftedGaussian {
                    shift: args.value.unwrap_or(1.0),
                },
                other => {
                    return Err(CliError::Config(format!(
                        "weak-init needs --mutation constant|shifted, got {other:?}"
                    )))
                }
            };
            (
                "attacker-WI",
                Forged::Proof(attacks::mutate_init(&victim.proof, mutation)),
            )
        }
    };

    let prover_id = args
        .prover_id
        .clone()
        .unwrap_or_else(|| default_id.to_string());
    let cost = Some(CostReport::from_meter(&meter));
    match forged {
        Forged::Record(mut record) => {
            record.prover_id = prover_id.clone();
            save_record(&record, cost, &args.out)?;
            println!(
                "forged record {}: {} states, {} steps -> {}",
                prover_id,
                record.trajectory.len(),
                meter.total_steps(),
                args.out.display()
            );
        }
        Forged::Proof(mut proof) => {
            proof.prover_id = prover_id.clone();
            save_proof(&proof, cost, &args.out)?;
            println!(
                "forged proof {}: {} states, {} steps -> {}",
                prover_id,
                proof.trajectory.len(),
                meter.total_steps(),
                args.out.display()
            );
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// prove
// ---------------------------------------------------------------------------

fn cmd_prove(args: &ProveArgs) -> Result<(), CliError> {
    let loaded = load_archive(&args.record)?;
    let cost = loaded.cost();
    match loaded {
        LoadedArchive::Record { record, .. } => {
            let proof = record.to_proof();
            save_proof(&proof, cost, &args.out)?;
            println!("proof of {} -> {}", proof.prover_id, args.out.display());
            Ok(())
        }
        LoadedArchive::Proof { .. } => Err(CliError::Config(
            "archive is already a dataless proof".to_string(),
        )),
    }
}

// ---------------------------------------------------------------------------
// verify
// ---------------------------------------------------------------------------

fn load_test_data(paths: &[PathBuf]) -> Result<LabeledDataset, CliError> {
    let (features, labels) = match paths {
        [prefix] => dataset_pair_paths(prefix),
        [f, l] => (f.clone(), l.clone()),
        _ => return Err(CliError::Config("--test takes one prefix or two files".to_string())),
    };
    Ok(load_dataset_pair(&features, &labels, "test")?)
}

/// Clap-facing mirror of [`verifier::SynthInit`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SynthInitArg {
    Gaussian,
    MomentMatched,
    TestPool,
}

impl From<SynthInitArg> for verifier::SynthInit {
    fn from(a: SynthInitArg) -> Self {
        match a {
            SynthInitArg::Gaussian => verifier::SynthInit::Gaussian,
            SynthInitArg::MomentMatched => verifier::SynthInit::MomentMatched,
            SynthInitArg::TestPool => verifier::SynthInit::TestPool,
        }
    }
}

fn verifier_config_from(args: &VerifyArgs) -> VerifierConfig {
    VerifierConfig {
        significance: 0.01,
        distill_iterations: args.iters,
        fragment_len: args.k,
        synth_rows: args.sds,
        synth_lr: args.synth_lr,
        synth_init: args.synth_init.into(),
        eval_models: args.t,
        eval_steps: args.eval_steps,
        eval_chunk: args.eval_chunk,
        eval_lr: args.eval_lr,
        eval_batch: args.eval_batch,
        eval_init_std: args.eval_init_std,
        seed: args.seed,
    }
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), CliError> {
    if args.proofs.len() < 2 {
        return Err(CliError::Config(
            "need at least two competing proofs to select a winner".to_string(),
        ));
    }
    let proofs: Vec<Proof> = args
        .proofs
        .iter()
        .map(|p| Ok(load_archive(p)?.into_proof()))
        .collect::<Result<_, CliError>>()?;
    let mut ids = BTreeSet::new();
    for p in &proofs {
        if !ids.insert(p.prover_id.clone()) {
            return Err(CliError::Config(format!(
                "duplicate prover id {:?} among the proofs",
                p.prover_id
            )));
        }
    }
    let test = load_test_data(&args.test)?;
    let registry = match &args.registry {
        Some(dir) => load_registry(dir)?,
        None => InitRegistry::new(),
    };
    let cfg = verifier_config_from(args);
    let jobs = args.jobs.unwrap_or_else(default_jobs);

    let results: Vec<Result<ProofAssessment, CliError>> = parallel_map(&proofs, jobs, |proof| {
        match verifier::verify_proof(proof, &registry, &test, &cfg) {
            Ok(a) => Ok(a),
            // A proof that blows up its own synthesis has failed stage 2;
            // it scores zero rather than aborting the whole comparison.
            Err(verifier::Error::Distill(distill::Error::Diverged { .. })) => {
                Ok(ProofAssessment {
                    prover_id: proof.prover_id.clone(),
                    stage1: verifier::stage1_proof(proof, &registry, cfg.significance),
                    matching_first: None,
                    matching_final: None,
                    matching_tail_median: None,
                    model_accuracies: Vec::new(),
                    score: 0.0,
                })
            }
            Err(e) => Err(verifier_error(&e)),
        }
    });
    let mut assessments = Vec::with_capacity(results.len());
    for r in results {
        assessments.push(r?);
    }
    let verdict = verifier::judge(&assessments, args.tie_threshold);
    let report = build_report(&assessments, verdict.clone(), cfg.clone(), args.tie_threshold);
    write_report(&report, &args.report)
        .map_err(|e| CliError::Config(format!("{}: {e}", args.report.display())))?;

    if let Some(dir) = &args.synth_out {
        save_syntheses(&proofs, &assessments, &cfg, &test, dir)?;
    }

    match &verdict {
        verifier::Verdict::Winner { index, margin } => println!(
            "winner: {} (margin {margin:.4})",
            assessments[*index].prover_id
        ),
        verifier::Verdict::Inconclusive { first, second, margin } => println!(
            "inconclusive: {} vs {} within {margin:.4}",
            assessments[*first].prover_id, assessments[*second].prover_id
        ),
        verifier::Verdict::AllRejected => println!("all proofs rejected at stage 1"),
    }
    println!("report -> {}", args.report.display());
    Ok(())
}

/// Re-derives each surviving proof's synthesis (same stream the verifier
/// used) and saves the dataset plus its loss trace.
fn save_syntheses(
    proofs: &[Proof],
    assessments: &[ProofAssessment],
    cfg: &VerifierConfig,
    test: &LabeledDataset,
    dir: &Path,
) -> Result<(), CliError> {
    for (proof, assessment) in proofs.iter().zip(assessments) {
        if !assessment.stage1.passed() || assessment.matching_first.is_none() {
            continue;
        }
        let stream = derive2(cfg.seed, hash_str(&proof.prover_id), 2);
        let dcfg = DistillConfig {
            iterations: cfg.distill_iterations,
            fragment_len: cfg.fragment_len,
            synth_rows: cfg.synth_rows,
            synth_lr: cfg.synth_lr,
            seed: stream,
        };
        let initial = verifier::synth_initial(cfg, test, proof.arch.classes).map_err(|e| {
            CliError::Config(format!("synthesis replay for {}: {e}", proof.prover_id))
        })?;
        let synthesis = distill::synthesize(proof, &dcfg, initial.as_ref()).map_err(|e| {
            CliError::Config(format!("synthesis replay for {}: {e}", proof.prover_id))
        })?;
        let base = dir.join(&proof.prover_id);
        std::fs::create_dir_all(&base)
            .map_err(|e| CliError::Config(format!("{}: {e}", base.display())))?;
        archive::save_dataset_pair(&base.join("synthesized"), &synthesis.dataset("synthesized"))?;
        let mut w = csv::Writer::from_path(base.join("trace.csv"))
            .map_err(|e| CliError::Config(e.to_string()))?;
        w.write_record(["iteration", "fragment_start", "loss"])
            .map_err(|e| CliError::Config(e.to_string()))?;
        for t in &synthesis.trace {
            w.write_record([
                t.iteration.to_string(),
                t.fragment_start.to_string(),
                format!("{:.12e}", t.loss),
            ])
            .map_err(|e| CliError::Config(e.to_string()))?;
        }
        w.flush().map_err(|e| CliError::Config(e.to_string()))?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// bench
// ---------------------------------------------------------------------------

fn cmd_bench(args: &BenchArgs) -> Result<(), CliError> {
    let cfg: BenchSuiteConfig = load_config(&args.suite).map_err(CliError::Config)?;
    let jobs = args.jobs.unwrap_or_else(default_jobs);
    let result = bench::run_suite(&cfg, jobs).map_err(|e| match e {
        BenchError::Config(m) => CliError::Config(m),
        BenchError::Infeasible(m) => CliError::Infeasible(m),
        BenchError::Diverged(m) => CliError::Diverged(m),
        BenchError::Failed(m) => CliError::Config(m),
    })?;
    result.write_tables(&args.out).map_err(CliError::Config)?;
    for t in result.seed_trends() {
        println!(
            "seed {}: honest wins at max sds = {}, all eta > 1 = {}, hardest attack = {}",
            t.seed,
            t.honest_wins_at_max_sds,
            t.all_eta_above_one_at_max_sds,
            t.min_eta_attack_at_max_sds.as_deref().unwrap_or("-")
        );
    }
    println!("tables -> {}", args.out.display());
    Ok(())
}

// ---------------------------------------------------------------------------
// mi-probe
// ---------------------------------------------------------------------------

fn probe_rows(
    label: &str,
    alpha: Option<f64>,
    channel: &infoprobe::ToyChannel,
) -> Result<Vec<Vec<String>>, CliError> {
    let map_err = |e: infoprobe::Error| match e {
        infoprobe::Error::StateSpaceTooLarge { .. } => CliError::Resource(e.to_string()),
        infoprobe::Error::BadConfig(_) => CliError::Config(e.to_string()),
    };
    let enumerated = infoprobe::mutual_information_enumerated(channel).map_err(map_err)?;
    let steps = infoprobe::per_step_decomposition(channel).map_err(map_err)?;
    let decomposed: f64 = steps.iter().map(|s| s.information).sum();
    let alpha_text = alpha.map(|a| format!("{a}")).unwrap_or_default();
    Ok(steps
        .iter()
        .enumerate()
        .map(|(j, s)| {
            vec![
                label.to_string(),
                alpha_text.clone(),
                format!("{enumerated:.12}"),
                format!("{decomposed:.12}"),
                (j + 1).to_string(),
                format!("{:.12}", s.update_entropy),
                format!("{:.12}", s.channel_entropy),
                format!("{:.12}", s.information),
            ]
        })
        .collect())
}

fn cmd_mi_probe(args: &MiProbeArgs) -> Result<(), CliError> {
    let cfg: MiProbeConfig = load_config(&args.config).map_err(CliError::Config)?;
    cfg.validate().map_err(CliError::Config)?;
    let mut rows: Vec<Vec<String>> = Vec::new();
    if cfg.include_honest {
        rows.extend(probe_rows("honest", None, &cfg.channel(ToyRule::Honest))?);
    }
    for &alpha in &cfg.alphas {
        let rule = ToyRule::TargetPull {
            mix: alpha,
            target: cfg.target,
            pull_mag: cfg.pull_mag,
        };
        rows.extend(probe_rows("target_pull", Some(alpha), &cfg.channel(rule))?);
    }
    if cfg.include_constant {
        rows.extend(probe_rows(
            "constant_output",
            None,
            &cfg.channel(ToyRule::ConstantOutput),
        )?);
    }
    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| CliError::Config(format!("{}: {e}", parent.display())))?;
        }
    }
    let mut w = csv::Writer::from_path(&args.out).map_err(|e| CliError::Config(e.to_string()))?;
    w.write_record([
        "process",
        "alpha",
        "i_bits",
        "i_bits_decomposed",
        "step",
        "update_entropy_bits",
        "channel_entropy_bits",
        "step_information_bits",
    ])
    .map_err(|e| CliError::Config(e.to_string()))?;
    for row in &rows {
        w.write_record(row).map_err(|e| CliError::Config(e.to_string()))?;
    }
    w.flush().map_err(|e| CliError::Config(e.to_string()))?;
    println!("probe table -> {}", args.out.display());
    Ok(())
}
