//! JSON configuration files for the command-line tool.
//!
//! Every config carries a `version` field and rejects unknown fields, so a
//! typo in an experiment file fails loudly instead of silently running a
//! different experiment.

use std::path::Path;

use pott_core::infoprobe;
use pott_core::models::{Activation, ArchitectureSpec, InitAlgorithmSpec, LossKind};
use pott_core::record::{self, TrainingAlgorithmSpec};
use pott_core::tasks::Task;
use pott_core::trainer::NoiseModel;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub const CONFIG_VERSION: u32 = 1;

/// Reads and parses one JSON config file.
pub fn load_config<T: DeserializeOwned>(path: &Path) -> Result<T, String> {
    let bytes =
        std::fs::read(path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
    serde_json::from_slice(&bytes).map_err(|e| format!("bad config {}: {e}", path.display()))
}

fn check_version(version: u32) -> Result<(), String> {
    if version != CONFIG_VERSION {
        return Err(format!(
            "config version {version} not supported (expected {CONFIG_VERSION})"
        ));
    }
    Ok(())
}

/// Network shape without the parts the task dictates: input width and class
/// count come from the task id.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArchConfig {
    pub hidden: Vec<usize>,
    pub activation: Activation,
}

impl ArchConfig {
    pub fn materialize(&self, task: &Task) -> ArchitectureSpec {
        ArchitectureSpec::mlp(
            task.input_width(),
            self.hidden.clone(),
            task.classes(),
            self.activation,
        )
    }
}

/// One training algorithm template; per-checkpoint specs derive their batch
/// seed from `seed` and the checkpoint index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps_per_checkpoint: usize,
    pub loss: LossKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
}

impl AlgorithmConfig {
    pub fn spec_for_checkpoint(&self, i: usize) -> Result<TrainingAlgorithmSpec, record::SpecError> {
        let spec = TrainingAlgorithmSpec::sgd(
            self.learning_rate,
            self.batch_size,
            self.steps_per_checkpoint,
            self.loss,
            pott_core::seed::derive(self.seed, i as u64),
        )?;
        Ok(match self.momentum {
            Some(beta) => spec.with_momentum(beta),
            None => spec,
        })
    }

    pub fn specs(&self, checkpoints: usize) -> Result<Vec<TrainingAlgorithmSpec>, record::SpecError> {
        (0..checkpoints).map(|i| self.spec_for_checkpoint(i)).collect()
    }
}

fn default_noise() -> NoiseModel {
    NoiseModel::None
}

/// Config for `pott train`: honest training on a sampled task.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub version: u32,
    pub prover_id: String,
    /// Task id, e.g. `two_moons?noise=0.2` or `digits8x8?noise=0.1`.
    pub task: String,
    pub checkpoints: usize,
    pub rows_per_checkpoint: usize,
    pub data_seed: u64,
    /// Reuse one sampled dataset for every checkpoint (training in epochs)
    /// instead of drawing fresh rows per checkpoint.
    #[serde(default)]
    pub shared_dataset: bool,
    pub arch: ArchConfig,
    pub init: InitAlgorithmSpec,
    pub algorithm: AlgorithmConfig,
    #[serde(default = "default_noise")]
    pub noise: NoiseModel,
    #[serde(default)]
    pub noise_bound: f64,
}

impl TrainConfig {
    pub fn validate(&self) -> Result<Task, String> {
        check_version(self.version)?;
        let task = Task::parse(&self.task).ok_or_else(|| format!("unknown task id {:?}", self.task))?;
        if self.checkpoints == 0 {
            return Err("checkpoints must be positive".to_string());
        }
        if self.rows_per_checkpoint == 0 {
            return Err("rows_per_checkpoint must be positive".to_string());
        }
        if self.prover_id.is_empty() {
            return Err("prover_id must be nonempty".to_string());
        }
        if let NoiseModel::UniformBall { bound, .. } = self.noise {
            if bound > self.noise_bound {
                return Err(format!(
                    "noise radius {bound} exceeds the declared noise_bound {}",
                    self.noise_bound
                ));
            }
        }
        Ok(task)
    }
}

/// Stage-2 knobs of the verifier (trajectory-matching synthesis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DistillKnobs {
    pub iterations: usize,
    pub fragment_len: usize,
    pub synth_lr: f64,
}

impl Default for DistillKnobs {
    fn default() -> Self {
        DistillKnobs {
            iterations: 300,
            fragment_len: 2,
            synth_lr: 0.05,
        }
    }
}

/// Stage-3 knobs of the verifier (fresh models trained on the synthesis).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stage3Knobs {
    pub models: usize,
    pub steps: usize,
    pub chunk: usize,
    pub learning_rate: f64,
    pub batch: usize,
    pub init_std: f64,
}

impl Default for Stage3Knobs {
    fn default() -> Self {
        Stage3Knobs {
            models: 3,
            steps: 500,
            chunk: 50,
            learning_rate: 0.1,
            batch: 16,
            init_std: 0.3,
        }
    }
}

/// Forgery parameters used when the benchmark generates its attack proofs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AttackKnobs {
    /// Strong pull weight; drives the run-to-threshold variant.
    pub alpha_large: f64,
    /// Weak pull weight; the stealthier variant.
    pub alpha_small: f64,
    /// Stop ball for the run-to-threshold pull, as a fraction of the
    /// initial distance to the target.
    pub a1_threshold_fraction: f64,
    /// Trajectory length (state count) of the short interpolation forgery.
    pub a3_short_states: usize,
    /// Backward-chain hops of the short variant; the long variant uses as
    /// many hops as the honest record has checkpoints.
    pub a4_short_hops: usize,
    /// Pull weight of the backward chain toward the claimed init.
    pub a4_alpha: f64,
    /// How much slack the reverse walk's claimed bound has over the
    /// feasibility minimum.
    pub walk_bound_slack: f64,
}

impl Default for AttackKnobs {
    fn default() -> Self {
        AttackKnobs {
            alpha_large: 4.0,
            alpha_small: 0.5,
            a1_threshold_fraction: 0.35,
            a3_short_states: 4,
            a4_short_hops: 3,
            a4_alpha: 1.0,
            walk_bound_slack: 1.2,
        }
    }
}

pub const KNOWN_ATTACKS: &[&str] = &[
    "a1_large", "a1_small", "a2", "a3_short", "a3_long", "a4_short", "a4_long",
];

fn default_tie() -> f64 {
    0.01
}

/// Config for `pott bench`: the full honest-vs-forged comparison suite on
/// one task, swept over synthetic-data sizes and seeds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSuiteConfig {
    pub version: u32,
    pub task: String,
    pub arch: ArchConfig,
    /// Synthetic-data sizes to sweep, ascending.
    pub sds_grid: Vec<usize>,
    /// Attack proofs to include, from [`KNOWN_ATTACKS`]. The honest proof
    /// is always included as the reference.
    pub attacks: Vec<String>,
    pub seeds: Vec<u64>,
    pub checkpoints: usize,
    pub rows_per_checkpoint: usize,
    pub test_rows: usize,
    pub train: AlgorithmConfig,
    /// Standard deviation of the honest Gaussian initialization.
    pub init_std: f64,
    #[serde(default)]
    pub distill: DistillKnobs,
    #[serde(default)]
    pub stage3: Stage3Knobs,
    #[serde(default)]
    pub attack_knobs: AttackKnobs,
    #[serde(default = "default_tie")]
    pub tie_threshold: f64,
}

impl BenchSuiteConfig {
    pub fn validate(&self) -> Result<Task, String> {
        check_version(self.version)?;
        let task = Task::parse(&self.task).ok_or_else(|| format!("unknown task id {:?}", self.task))?;
        if self.sds_grid.is_empty() {
            return Err("sds_grid must be nonempty".to_string());
        }
        if !self.sds_grid.windows(2).all(|w| w[0] < w[1]) {
            return Err("sds_grid must be strictly ascending".to_string());
        }
        if self.attacks.is_empty() {
            return Err("attacks must be nonempty".to_string());
        }
        for a in &self.attacks {
            if !KNOWN_ATTACKS.contains(&a.as_str()) {
                return Err(format!("unknown attack {a:?} (known: {KNOWN_ATTACKS:?})"));
            }
        }
        if self.seeds.len() < 2 {
            return Err("need at least 2 seeds for trend assertions".to_string());
        }
        if self.checkpoints < 2 {
            return Err("need at least 2 checkpoints".to_string());
        }
        if self.attack_knobs.a3_short_states < 3 {
            return Err("a3_short_states must be at least 3".to_string());
        }
        if self.attack_knobs.a4_short_hops < 2 {
            return Err("a4_short_hops must be at least 2".to_string());
        }
        Ok(task)
    }
}

/// One data symbol of the information probe's channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SymbolConfig {
    pub step: i64,
    pub prob: f64,
}

/// One noise offset of the information probe's channel.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseOffsetConfig {
    pub offset: i64,
    pub prob: f64,
}

fn default_true() -> bool {
    true
}

/// Config for `pott mi-probe`: exact information accounting over a rule
/// family on one discretized channel.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MiProbeConfig {
    pub version: u32,
    pub grid_lo: i64,
    pub grid_hi: i64,
    pub start: i64,
    pub alphabet: Vec<SymbolConfig>,
    pub noise: Vec<NoiseOffsetConfig>,
    pub steps: usize,
    /// Target-pull mixing weights to sweep.
    pub alphas: Vec<f64>,
    pub target: i64,
    pub pull_mag: i64,
    #[serde(default = "default_true")]
    pub include_honest: bool,
    #[serde(default = "default_true")]
    pub include_constant: bool,
}

impl MiProbeConfig {
    pub fn validate(&self) -> Result<(), String> {
        check_version(self.version)?;
        if self.alphabet.is_empty() || self.noise.is_empty() {
            return Err("alphabet and noise must be nonempty".to_string());
        }
        if !self.include_honest && !self.include_constant && self.alphas.is_empty() {
            return Err("nothing to probe: no rules selected".to_string());
        }
        Ok(())
    }

    pub fn channel(&self, rule: infoprobe::ToyRule) -> infoprobe::ToyChannel {
        infoprobe::ToyChannel {
            grid_lo: self.grid_lo,
            grid_hi: self.grid_hi,
            start: self.start,
            alphabet: self
                .alphabet
                .iter()
                .map(|s| infoprobe::Symbol {
                    step: s.step,
                    prob: s.prob,
                })
                .collect(),
            noise: self
                .noise
                .iter()
                .map(|z| infoprobe::NoiseOffset {
                    offset: z.offset,
                    prob: z.prob,
                })
                .collect(),
            rule,
            steps: self.steps,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_train_config() -> TrainConfig {
        TrainConfig {
            version: 1,
            prover_id: "alice".to_string(),
            task: "two_moons?noise=0.2".to_string(),
            checkpoints: 4,
            rows_per_checkpoint: 16,
            data_seed: 5,
            shared_dataset: false,
            arch: ArchConfig {
                hidden: vec![8],
                activation: Activation::Tanh,
            },
            init: InitAlgorithmSpec::Gaussian {
                mean: 0.0,
                std: 0.3,
                seed: 7,
            },
            algorithm: AlgorithmConfig {
                learning_rate: 0.2,
                batch_size: 8,
                steps_per_checkpoint: 5,
                loss: LossKind::CrossEntropy,
                seed: 11,
                momentum: None,
            },
            noise: NoiseModel::None,
            noise_bound: 0.0,
        }
    }

    #[test]
    fn train_config_roundtrips_and_validates() {
        let cfg = sample_train_config();
        let json = serde_json::to_string_pretty(&cfg).unwrap();
        let back: TrainConfig = serde_json::from_str(&json).unwrap();
        assert_eq!(back, cfg);
        assert!(back.validate().is_ok());
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let mut v = serde_json::to_value(sample_train_config()).unwrap();
        v.as_object_mut()
            .unwrap()
            .insert("learning_rate_typo".to_string(), 1.0.into());
        assert!(serde_json::from_value::<TrainConfig>(v).is_err());
    }

    #[test]
    fn version_and_task_are_checked() {
        let mut cfg = sample_train_config();
        cfg.version = 2;
        assert!(cfg.validate().is_err());
        let mut cfg = sample_train_config();
        cfg.task = "mnist".to_string();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn bench_config_guards_its_grids() {
        let mut cfg = BenchSuiteConfig {
            version: 1,
            task: "two_moons?noise=0.2".to_string(),
            arch: ArchConfig {
                hidden: vec![8],
                activation: Activation::Tanh,
            },
            sds_grid: vec![4, 8, 16],
            attacks: vec!["a2".to_string()],
            seeds: vec![1, 2],
            checkpoints: 5,
            rows_per_checkpoint: 16,
            test_rows: 100,
            train: sample_train_config().algorithm,
            init_std: 0.3,
            distill: DistillKnobs::default(),
            stage3: Stage3Knobs::default(),
            attack_knobs: AttackKnobs::default(),
            tie_threshold: 0.01,
        };
        assert!(cfg.validate().is_ok());
        cfg.sds_grid = vec![8, 4];
        assert!(cfg.validate().is_err());
        cfg.sds_grid = vec![4, 8];
        cfg.attacks.clear();
        assert!(cfg.validate().is_err());
        cfg.attacks = vec!["a9".to_string()];
        assert!(cfg.validate().is_err());
        cfg.attacks = vec!["a2".to_string()];
        cfg.seeds = vec![1];
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn algorithm_config_derives_distinct_checkpoint_seeds() {
        let alg = sample_train_config().algorithm;
        let specs = alg.specs(3).unwrap();
        assert_eq!(specs.len(), 3);
        assert!(specs[0].seed != specs[1].seed && specs[1].seed != specs[2].seed);
        let negative = AlgorithmConfig {
            learning_rate: -0.5,
            ..alg
        };
        assert!(negative.specs(2).is_err());
    }
}
