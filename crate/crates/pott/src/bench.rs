//! Benchmark suite: honest proofs against the four forgery families,
//! swept over synthetic-data sizes and seeds.
//!
//! One suite run fixes a task and architecture; per seed it trains an
//! honest record, forges the configured attack proofs against the honest
//! final model, and has the staged verifier score every proof at every
//! synthetic-data size. Output rows carry the discrimination degree
//! `eta = honest accuracy / forged accuracy`; per-seed trend summaries
//! report who wins at the largest size, which attack is hardest to
//! discriminate, and whether the worst case improves as the size grows.

use std::fmt;
use std::path::Path;

use pott_core::attacks::{self, ReverseWalkConfig};
use pott_core::distill;
use pott_core::models::{init_model, ArchitectureSpec, InitAlgorithmSpec, InitRegistry};
use pott_core::record::{LabeledDataset, Proof, TrainingAlgorithmSpec};
use pott_core::seed::{derive, derive2};
use pott_core::tasks::Task;
use pott_core::tensor::l2_distance;
use pott_core::trainer::{
    train_honest, CostMeter, CostMode, HonestTrainConfig, NoiseModel, NullClock,
};
use pott_core::verifier::{self, VerifierConfig};
use serde::{Deserialize, Serialize};

use crate::configs::{AlgorithmConfig, BenchSuiteConfig};
use crate::par::parallel_map;

#[derive(Debug)]
pub enum BenchError {
    Config(String),
    Infeasible(String),
    Diverged(String),
    Failed(String),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::Config(m) => write!(f, "config: {m}"),
            BenchError::Infeasible(m) => write!(f, "attack infeasible: {m}"),
            BenchError::Diverged(m) => write!(f, "diverged: {m}"),
            BenchError::Failed(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for BenchError {}

fn attack_error(e: attacks::Error) -> BenchError {
    match e {
        attacks::Error::InfeasibleWalk { .. } => BenchError::Infeasible(e.to_string()),
        attacks::Error::Trainer(pott_core::trainer::Error::Diverged { .. }) => {
            BenchError::Diverged(e.to_string())
        }
        other => BenchError::Failed(other.to_string()),
    }
}

/// One (proof, synthetic-data size, seed) measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub prover_id: String,
    /// Attack label (`honest`, `a1_large`, ... from the config).
    pub attack: String,
    pub sds: usize,
    pub seed: u64,
    pub avg_acc: f64,
    /// Honest average accuracy divided by this proof's; 1 for the honest
    /// row itself, infinite when the forged proof scored zero.
    pub eta: f64,
}

/// Metered production cost of one proof.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostRow {
    pub seed: u64,
    pub attack: String,
    pub prover_id: String,
    /// Step-count cost (floored at one step).
    pub steps: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedTrends {
    pub seed: u64,
    /// Honest proof has strictly the highest average accuracy at the
    /// largest synthetic-data size.
    pub honest_wins_at_max_sds: bool,
    /// Every attack's eta exceeds 1 at the largest size.
    pub all_eta_above_one_at_max_sds: bool,
    /// Attack with the smallest eta at the largest size.
    pub min_eta_attack_at_max_sds: Option<String>,
    /// Worst-case (minimum over attacks) eta per grid entry, grid order.
    pub worst_eta_by_sds: Vec<f64>,
    /// Worst-case eta never decreases along the ascending grid.
    pub worst_eta_nondecreasing: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub attack: String,
    pub sds: usize,
    pub mean_avg_acc: f64,
    pub mean_eta: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub config: BenchSuiteConfig,
    pub rows: Vec<BenchRow>,
    pub costs: Vec<CostRow>,
}

/// The honest reference plus every configured forgery for one seed.
struct SeedArtifacts {
    seed: u64,
    /// `(attack label, proof)`, honest first.
    proofs: Vec<(String, Proof)>,
    test: LabeledDataset,
    costs: Vec<CostRow>,
}

fn prover_id_for(label: &str) -> String {
    match label {
        "honest" => "honest".to_string(),
        "a1_large" => "attacker-A1-large".to_string(),
        "a1_small" => "attacker-A1-small".to_string(),
        "a2" => "attacker-A2".to_string(),
        "a3_short" => "attacker-A3-short".to_string(),
        "a3_long" => "attacker-A3-long".to_string(),
        "a4_short" => "attacker-A4-short".to_string(),
        "a4_long" => "attacker-A4-long".to_string(),
        other => format!("attacker-{other}"),
    }
}

/// Per-checkpoint algorithm specs whose batch seeds derive from `stream`.
fn algs_for(
    train: &AlgorithmConfig,
    checkpoints: usize,
    stream: u64,
) -> Result<Vec<TrainingAlgorithmSpec>, BenchError> {
    (0..checkpoints)
        .map(|i| {
            let spec = TrainingAlgorithmSpec::sgd(
                train.learning_rate,
                train.batch_size,
                train.steps_per_checkpoint,
                train.loss,
                derive2(stream, train.seed, i as u64),
            )
            .map_err(|e| BenchError::Config(e.to_string()))?;
            Ok(match train.momentum {
                Some(beta) => spec.with_momentum(beta),
                None => spec,
            })
        })
        .collect()
}

fn resample(task: &Task, rows: usize, count: usize, stream: u64) -> Vec<LabeledDataset> {
    (0..count)
        .map(|i| task.sample(rows, derive(stream, i as u64)))
        .collect()
}

fn generate_seed_artifacts(
    cfg: &BenchSuiteConfig,
    task: &Task,
    arch: &ArchitectureSpec,
    seed: u64,
) -> Result<SeedArtifacts, BenchError> {
    let registry = InitRegistry::new();
    let knobs = cfg.attack_knobs;
    let mut proofs = Vec::new();
    let mut costs = Vec::new();

    // Honest reference.
    let (datasets, test) =
        task.sample_run(cfg.checkpoints, cfg.rows_per_checkpoint, cfg.test_rows, derive(seed, 2));
    let honest_cfg = HonestTrainConfig {
        prover_id: prover_id_for("honest"),
        arch: arch.clone(),
        init: InitAlgorithmSpec::Gaussian {
            mean: 0.0,
            std: cfg.init_std,
            seed: derive2(seed, 0x11, 0),
        },
        algs: algs_for(&cfg.train, cfg.checkpoints, derive2(seed, 0x11, 1))?,
        noise: NoiseModel::None,
        noise_bound: 0.0,
    };
    let mut meter = CostMeter::new();
    let record = train_honest(&honest_cfg, datasets, &registry, &mut meter, &NullClock)
        .map_err(|e| BenchError::Diverged(format!("honest training failed: {e}")))?;
    let target = record.trajectory.last().params.clone();
    costs.push(CostRow {
        seed,
        attack: "honest".to_string(),
        prover_id: prover_id_for("honest"),
        steps: meter.cost(CostMode::Steps),
    });
    proofs.push(("honest".to_string(), record.to_proof()));

    for label in &cfg.attacks {
        let id = prover_id_for(label);
        let mut meter = CostMeter::new();
        let proof = match label.as_str() {
            "a1_large" | "a1_small" => {
                let alpha = if label == "a1_large" {
                    knobs.alpha_large
                } else {
                    knobs.alpha_small
                };
                let tag = if label == "a1_large" { 0x1A } else { 0x1B };
                let init = InitAlgorithmSpec::Gaussian {
                    mean: 0.0,
                    std: cfg.init_std,
                    seed: derive2(seed, tag, 0),
                };
                let acfg = HonestTrainConfig {
                    prover_id: id.clone(),
                    arch: arch.clone(),
                    init,
                    algs: algs_for(&cfg.train, cfg.checkpoints, derive2(seed, tag, 1))?,
                    noise: NoiseModel::None,
                    noise_bound: 0.0,
                };
                let data = resample(task, cfg.rows_per_checkpoint, cfg.checkpoints, derive2(seed, tag, 2));
                // Full-length pulled training: the discrimination sweep
                // compares like-shaped trajectories; early stopping is the
                // cost benchmark's business, not this one's.
                let rec = attacks::attack_forward_pull(
                    &acfg, &target, alpha, data, &registry, &mut meter, &NullClock,
                )
                .map_err(attack_error)?;
                rec.to_proof()
            }
            "a2" => {
                let init = InitAlgorithmSpec::Gaussian {
                    mean: 0.0,
                    std: cfg.init_std,
                    seed: derive2(seed, 0x2A, 0),
                };
                let init_state = init_model(&init, arch, &registry)
                    .map_err(|e| BenchError::Failed(e.to_string()))?;
                let d1 = l2_distance(&init_state.params, &target)
                    .map_err(|e| BenchError::Failed(e.to_string()))?;
                let hops = cfg.checkpoints;
                let wcfg = ReverseWalkConfig {
                    prover_id: id.clone(),
                    arch: arch.clone(),
                    init,
                    claimed_algs: algs_for(&cfg.train, hops, derive2(seed, 0x2A, 1))?,
                    epsilon_lr: 1e-12,
                    noise_bound: d1 / (attacks::WALK_PACING_FRACTION * hops as f64)
                        * knobs.walk_bound_slack,
                    walk_seed: derive2(seed, 0x2A, 3),
                };
                let data = resample(task, cfg.rows_per_checkpoint, hops, derive2(seed, 0x2A, 2));
                attacks::attack_reverse_walk(&wcfg, &target, data, &registry, &mut meter, &NullClock)
                    .map_err(attack_error)?
                    .to_proof()
            }
            "a3_short" | "a3_long" => {
                let states = if label == "a3_short" {
                    knobs.a3_short_states
                } else {
                    cfg.checkpoints + 1
                };
                let tag = if label == "a3_short" { 0x3A } else { 0x3B };
                let init = InitAlgorithmSpec::Gaussian {
                    mean: 0.0,
                    std: cfg.init_std,
                    seed: derive2(seed, tag, 0),
                };
                let init_state = init_model(&init, arch, &registry)
                    .map_err(|e| BenchError::Failed(e.to_string()))?;
                let d1 = l2_distance(&init_state.params, &target)
                    .map_err(|e| BenchError::Failed(e.to_string()))?;
                attacks::attack_interpolation(
                    &id,
                    arch,
                    &init,
                    &algs_for(&cfg.train, states - 1, derive2(seed, tag, 1))?,
                    &target,
                    d1,
                    derive2(seed, tag, 3),
                    &registry,
                    &mut meter,
                    &NullClock,
                )
                .map_err(attack_error)?
            }
            "a4_short" | "a4_long" => {
                let hops = if label == "a4_short" {
                    knobs.a4_short_hops.min(cfg.checkpoints)
                } else {
                    cfg.checkpoints
                };
                let tag = if label == "a4_short" { 0x4A } else { 0x4B };
                let init = InitAlgorithmSpec::Gaussian {
                    mean: 0.0,
                    std: cfg.init_std,
                    seed: derive2(seed, tag, 0),
                };
                let init_state = init_model(&init, arch, &registry)
                    .map_err(|e| BenchError::Failed(e.to_string()))?;
                let d1 = l2_distance(&init_state.params, &target)
                    .map_err(|e| BenchError::Failed(e.to_string()))?;
                let working: Vec<LabeledDataset> =
                    resample(task, cfg.rows_per_checkpoint, hops, derive2(seed, tag, 2))
                        .iter()
                        .map(|d| attacks::falsify_labels(d, arch.classes))
                        .collect();
                attacks::attack_backward_chain(
                    &id,
                    arch,
                    &init,
                    &algs_for(&cfg.train, hops, derive2(seed, tag, 1))?,
                    &working,
                    &target,
                    knobs.a4_alpha,
                    d1,
                    None,
                    &registry,
                    &mut meter,
                    &NullClock,
                )
                .map_err(attack_error)?
                .proof
            }
            other => return Err(BenchError::Config(format!("unknown attack {other:?}"))),
        };
        costs.push(CostRow {
            seed,
            attack: label.clone(),
            prover_id: id,
            steps: meter.cost(CostMode::Steps),
        });
        proofs.push((label.clone(), proof));
    }
    Ok(SeedArtifacts {
        seed,
        proofs,
        test,
        costs,
    })
}

fn verifier_config(cfg: &BenchSuiteConfig, seed: u64, sds: usize) -> VerifierConfig {
    VerifierConfig {
        significance: 0.01,
        distill_iterations: cfg.distill.iterations,
        fragment_len: cfg.distill.fragment_len,
        synth_rows: sds,
        synth_lr: cfg.distill.synth_lr,
        synth_init: verifier::SynthInit::MomentMatched,
        eval_models: cfg.stage3.models,
        eval_steps: cfg.stage3.steps,
        eval_chunk: cfg.stage3.chunk,
        eval_lr: cfg.stage3.learning_rate,
        eval_batch: cfg.stage3.batch,
        eval_init_std: cfg.stage3.init_std,
        // One verifier stream per bench seed, shared by every point of the
        // size grid: common random numbers keep the synthesis and eval
        // lotteries aligned across sizes, so eta differences along the grid
        // reflect the capacity change rather than independent redraws.
        seed: derive2(seed, 0, 0x5EED),
    }
}

/// Runs the whole suite. Work fans out over `jobs` threads; results are
/// identical for any job count.
pub fn run_suite(cfg: &BenchSuiteConfig, jobs: usize) -> Result<SuiteResult, BenchError> {
    let task = cfg.validate().map_err(BenchError::Config)?;
    let arch = cfg.arch.materialize(&task);

    let seeds: Vec<u64> = cfg.seeds.clone();
    let artifacts: Vec<SeedArtifacts> = {
        let produced = parallel_map(&seeds, jobs, |&seed| {
            generate_seed_artifacts(cfg, &task, &arch, seed)
        });
        let mut out = Vec::with_capacity(produced.len());
        for a in produced {
            out.push(a?);
        }
        out
    };

    // One verification job per (seed, sds, proof).
    let mut items: Vec<(usize, usize, usize)> = Vec::new();
    for (si, art) in artifacts.iter().enumerate() {
        for (gi, _) in cfg.sds_grid.iter().enumerate() {
            for (pi, _) in art.proofs.iter().enumerate() {
                items.push((si, gi, pi));
            }
        }
    }
    let registry = InitRegistry::new();
    let scores: Vec<Result<f64, BenchError>> = parallel_map(&items, jobs, |&(si, gi, pi)| {
        let art = &artifacts[si];
        let (label, proof) = &art.proofs[pi];
        let vcfg = verifier_config(cfg, art.seed, cfg.sds_grid[gi]);
        match verifier::verify_proof(proof, &registry, &art.test, &vcfg) {
            Ok(a) => Ok(a.score),
            // A forged proof whose synthesis blows up has failed to be
            // explained by any data; score it zero rather than abort.
            Err(verifier::Error::Distill(distill::Error::Diverged { .. })) if label != "honest" => {
                Ok(0.0)
            }
            Err(e) => Err(BenchError::Failed(format!(
                "verification of {label} (seed {}, sds {}): {e}",
                art.seed, cfg.sds_grid[gi]
            ))),
        }
    });

    let mut score_of = vec![0.0; items.len()];
    for (i, s) in scores.into_iter().enumerate() {
        score_of[i] = s?;
    }
    // Every seed carries the same proof list: honest plus each attack.
    let proofs_per_seed = 1 + cfg.attacks.len();
    let index_of = |si: usize, gi: usize, pi: usize| -> usize {
        (si * cfg.sds_grid.len() + gi) * proofs_per_seed + pi
    };

    let mut rows = Vec::with_capacity(items.len());
    for (si, art) in artifacts.iter().enumerate() {
        for (gi, &sds) in cfg.sds_grid.iter().enumerate() {
            let honest = score_of[index_of(si, gi, 0)];
            for (pi, (label, _)) in art.proofs.iter().enumerate() {
                let acc = score_of[index_of(si, gi, pi)];
                let eta = if pi == 0 {
                    1.0
                } else if acc > 0.0 {
                    honest / acc
                } else {
                    f64::INFINITY
                };
                rows.push(BenchRow {
                    prover_id: prover_id_for(label),
                    attack: label.clone(),
                    sds,
                    seed: art.seed,
                    avg_acc: acc,
                    eta,
                });
            }
        }
    }
    let costs = artifacts.into_iter().flat_map(|a| a.costs).collect();
    Ok(SuiteResult {
        config: cfg.clone(),
        rows,
        costs,
    })
}

impl SuiteResult {
    fn rows_for(&self, seed: u64, sds: usize) -> Vec<&BenchRow> {
        self.rows
            .iter()
            .filter(|r| r.seed == seed && r.sds == sds)
            .collect()
    }

    /// Per-seed trend summary used by the headline assertions.
    pub fn seed_trends(&self) -> Vec<SeedTrends> {
        let max_sds = *self.config.sds_grid.last().expect("validated nonempty");
        self.config
            .seeds
            .iter()
            .map(|&seed| {
                let at_max = self.rows_for(seed, max_sds);
                let honest_acc = at_max
                    .iter()
                    .find(|r| r.attack == "honest")
                    .map(|r| r.avg_acc)
                    .unwrap_or(0.0);
                let attack_rows: Vec<&&BenchRow> =
                    at_max.iter().filter(|r| r.attack != "honest").collect();
                let honest_wins = !attack_rows.is_empty()
                    && attack_rows.iter().all(|r| r.avg_acc < honest_acc);
                let all_above_one = !attack_rows.is_empty()
                    && attack_rows.iter().all(|r| r.eta > 1.0);
                let min_eta_attack = attack_rows
                    .iter()
                    .min_by(|a, b| a.eta.partial_cmp(&b.eta).expect("eta is never NaN"))
                    .map(|r| r.attack.clone());
                let worst_by_sds: Vec<f64> = self
                    .config
                    .sds_grid
                    .iter()
                    .map(|&sds| {
                        self.rows_for(seed, sds)
                            .iter()
                            .filter(|r| r.attack != "honest")
                            .map(|r| r.eta)
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                let nondecreasing = worst_by_sds.windows(2).all(|w| w[1] >= w[0] - 1e-9);
                SeedTrends {
                    seed,
                    honest_wins_at_max_sds: honest_wins,
                    all_eta_above_one_at_max_sds: all_above_one,
                    min_eta_attack_at_max_sds: min_eta_attack,
                    worst_eta_by_sds: worst_by_sds,
                    worst_eta_nondecreasing: nondecreasing,
                }
            })
            .collect()
    }

    /// Mean accuracy and eta per (attack, sds) across seeds.
    pub fn aggregate(&self) -> Vec<AggregateRow> {
        let mut labels: Vec<String> = vec!["honest".to_string()];
        labels.extend(self.config.attacks.iter().cloned());
        let mut out = Vec::new();
        for label in labels {
            for &sds in &self.config.sds_grid {
                let vals: Vec<&BenchRow> = self
                    .rows
                    .iter()
                    .filter(|r| r.attack == label && r.sds == sds)
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                let n = vals.len() as f64;
                out.push(AggregateRow {
                    attack: label.clone(),
                    sds,
                    mean_avg_acc: vals.iter().map(|r| r.avg_acc).sum::<f64>() / n,
                    mean_eta: vals.iter().map(|r| r.eta).sum::<f64>() / n,
                });
            }
        }
        out
    }

    /// Writes `rows.csv`, `costs.csv`, `aggregate.csv`, and `summary.json`
    /// into `dir`.
    pub fn write_tables(&self, dir: &Path) -> Result<(), String> {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        let fail = |e: csv::Error| e.to_string();

        let mut w = csv::Writer::from_path(dir.join("rows.csv")).map_err(fail)?;
        w.write_record(["prover_id", "attack", "sds", "seed", "avg_acc", "eta"])
            .map_err(fail)?;
        for r in &self.rows {
            w.write_record([
                r.prover_id.as_str(),
                r.attack.as_str(),
                &r.sds.to_string(),
                &r.seed.to_string(),
                &format!("{:.6}", r.avg_acc),
                &format_eta(r.eta),
            ])
            .map_err(fail)?;
        }
        w.flush().map_err(|e| e.to_string())?;

        let mut w = csv::Writer::from_path(dir.join("costs.csv")).map_err(fail)?;
        w.write_record(["seed", "attack", "prover_id", "steps"]).map_err(fail)?;
        for c in &self.costs {
            w.write_record([
                &c.seed.to_string(),
                c.attack.as_str(),
                c.prover_id.as_str(),
                &format!("{}", c.steps),
            ])
            .map_err(fail)?;
        }
        w.flush().map_err(|e| e.to_string())?;

        let mut w = csv::Writer::from_path(dir.join("aggregate.csv")).map_err(fail)?;
        w.write_record(["attack", "sds", "mean_avg_acc", "mean_eta"]).map_err(fail)?;
        for a in self.aggregate() {
            w.write_record([
                a.attack.as_str(),
                &a.sds.to_string(),
                &format!("{:.6}", a.mean_avg_acc),
                &format_eta(a.mean_eta),
            ])
            .map_err(fail)?;
        }
        w.flush().map_err(|e| e.to_string())?;

        let summary = serde_json::json!({
            "config": self.config,
            "seed_trends": self.seed_trends(),
            "aggregate": self.aggregate(),
        });
        let mut bytes = serde_json::to_vec_pretty(&summary).expect("summary serializes");
        bytes.push(b'\n');
        std::fs::write(dir.join("summary.json"), bytes).map_err(|e| e.to_string())?;
        Ok(())
    }
}

fn format_eta(eta: f64) -> String {
    if eta.is_infinite() {
        "inf".to_string()
    } else {
        format!("{eta:.6}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::configs::{ArchConfig, AttackKnobs, DistillKnobs, Stage3Knobs};
    use pott_core::models::Activation;
    use pott_core::models::LossKind;

    fn tiny_suite() -> BenchSuiteConfig {
        BenchSuiteConfig {
            version: 1,
            task: "two_moons?noise=0.15".to_string(),
            arch: ArchConfig {
                hidden: vec![6],
                activation: Activation::Tanh,
            },
            sds_grid: vec![6, 12],
            attacks: vec!["a2".to_string(), "a3_short".to_string()],
            seeds: vec![11, 12],
            checkpoints: 4,
            rows_per_checkpoint: 16,
            test_rows: 120,
            train: AlgorithmConfig {
                learning_rate: 0.25,
                batch_size: 8,
                steps_per_checkpoint: 5,
                loss: LossKind::CrossEntropy,
                seed: 3,
                momentum: None,
            },
            init_std: 0.3,
            distill: DistillKnobs {
                iterations: 40,
                fragment_len: 1,
                synth_lr: 0.05,
            },
            stage3: Stage3Knobs {
                models: 2,
                steps: 120,
                chunk: 30,
                learning_rate: 0.2,
                batch: 8,
                init_std: 0.3,
            },
            attack_knobs: AttackKnobs::default(),
            tie_threshold: 0.01,
        }
    }

    #[test]
    fn suite_runs_and_is_job_count_invariant() {
        let cfg = tiny_suite();
        let r1 = run_suite(&cfg, 1).unwrap();
        let r2 = run_suite(&cfg, 4).unwrap();
        assert_eq!(r1.rows, r2.rows);
        assert_eq!(r1.costs, r2.costs);
        // 2 seeds x 2 sds x (honest + 2 attacks) rows.
        assert_eq!(r1.rows.len(), 12);
        // Honest rows pin eta to exactly 1.
        assert!(r1
            .rows
            .iter()
            .filter(|r| r.attack == "honest")
            .all(|r| r.eta == 1.0));
        let trends = r1.seed_trends();
        assert_eq!(trends.len(), 2);
        assert_eq!(trends[0].worst_eta_by_sds.len(), 2);
    }

    #[test]
    fn tables_land_on_disk() {
        let cfg = tiny_suite();
        let result = run_suite(&cfg, 0).unwrap();
        let dir = tempfile::tempdir().unwrap();
        result.write_tables(dir.path()).unwrap();
        for f in ["rows.csv", "costs.csv", "aggregate.csv", "summary.json"] {
            assert!(dir.path().join(f).is_file(), "{f} missing");
        }
        let rows = std::fs::read_to_string(dir.path().join("rows.csv")).unwrap();
        assert!(rows.starts_with("prover_id,attack,sds,seed,avg_acc,eta"));
        assert!(rows.contains("attacker-A2"));
    }
}
