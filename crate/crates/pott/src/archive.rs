//! Record and proof archives on disk.
//!
//! An archive is a directory: `manifest.json` describing the claim plus one
//! POTT tensor file per checkpoint state (`states/0000.bin`, ...) and, when
//! the datasets travel along, per-checkpoint data files
//! (`data/0000.features.bin` / `data/0000.labels.bin`, labels stored as a
//! float vector). One file per checkpoint keeps fragment streaming cheap
//! for the verifier. Archives written with the same inputs are
//! byte-identical: the manifest's cost block records step counts only, with
//! the wall-seconds slot fixed at zero.

use std::fs;
use std::path::{Path, PathBuf};

use pott_core::models::{ArchitectureSpec, InitAlgorithmSpec, InitRegistry, ModelState};
use pott_core::record::{LabeledDataset, Proof, TrainingAlgorithmSpec, TrainingRecord, Trajectory};
use pott_core::tensor::{decode_pott, encode_pott, DenseTensor};
use pott_core::trainer::CostMeter;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MANIFEST_VERSION: u32 = 1;
pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("missing file: {path}")]
    MissingFile { path: PathBuf },
    #[error("corrupt archive at {path}: {reason}")]
    CorruptArchive { path: PathBuf, reason: String },
}

fn io_err(path: &Path, source: std::io::Error) -> ArchiveError {
    ArchiveError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn corrupt(path: &Path, reason: impl Into<String>) -> ArchiveError {
    ArchiveError::CorruptArchive {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

/// Work that went into producing the archived artifact. Only the step
/// count is meaningful in a stored manifest; wall seconds are written as
/// zero so that equal inputs give byte-equal archives.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub steps: u64,
    pub wall_seconds: f64,
}

impl CostReport {
    pub fn from_meter(meter: &CostMeter) -> Self {
        CostReport {
            steps: meter.total_steps(),
            wall_seconds: 0.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub prover_id: String,
    pub arch: ArchitectureSpec,
    pub init: InitAlgorithmSpec,
    pub algs: Vec<TrainingAlgorithmSpec>,
    pub noise_bound: f64,
    /// Number of checkpoint states in the trajectory.
    pub n: usize,
    pub has_data: bool,
    /// Relative paths of every tensor file, in canonical order.
    pub files: Vec<String>,
    /// Distribution id of each dataset, present iff `has_data`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data_distributions: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<CostReport>,
}

fn state_file(i: usize) -> String {
    format!("states/{i:04}.bin")
}

fn features_file(i: usize) -> String {
    format!("data/{i:04}.features.bin")
}

fn labels_file(i: usize) -> String {
    format!("data/{i:04}.labels.bin")
}

fn expected_files(n: usize, has_data: bool) -> Vec<String> {
    let mut files: Vec<String> = (0..n).map(state_file).collect();
    if has_data {
        for i in 0..n - 1 {
            files.push(features_file(i));
            files.push(labels_file(i));
        }
    }
    files
}

pub fn write_tensor(path: &Path, t: &DenseTensor) -> Result<(), ArchiveError> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    fs::write(path, encode_pott(t)).map_err(|e| io_err(path, e))
}

pub fn read_tensor(path: &Path) -> Result<DenseTensor, ArchiveError> {
    if !path.is_file() {
        return Err(ArchiveError::MissingFile {
            path: path.to_path_buf(),
        });
    }
    let bytes = fs::read(path).map_err(|e| io_err(path, e))?;
    decode_pott(&bytes).map_err(|e| corrupt(path, e.to_string()))
}

fn labels_to_tensor(labels: &[usize]) -> DenseTensor {
    DenseTensor::vector(labels.iter().map(|&l| l as f64).collect())
}

fn labels_from_tensor(path: &Path, t: &DenseTensor) -> Result<Vec<usize>, ArchiveError> {
    let mut labels = Vec::with_capacity(t.values().len());
    for &v in t.values() {
        if !(v.is_finite() && v >= 0.0 && v.fract() == 0.0) {
            return Err(corrupt(path, format!("label value {v} is not an index")));
        }
        labels.push(v as usize);
    }
    Ok(labels)
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), ArchiveError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let path = dir.join(MANIFEST_NAME);
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    fs::write(&path, bytes).map_err(|e| io_err(&path, e))
}

fn write_states(dir: &Path, states: &[ModelState]) -> Result<(), ArchiveError> {
    for (i, s) in states.iter().enumerate() {
        write_tensor(&dir.join(state_file(i)), &s.params)?;
    }
    Ok(())
}

fn write_data(dir: &Path, datasets: &[LabeledDataset]) -> Result<(), ArchiveError> {
    for (i, d) in datasets.iter().enumerate() {
        write_tensor(&dir.join(features_file(i)), &d.features)?;
        write_tensor(&dir.join(labels_file(i)), &labels_to_tensor(&d.labels))?;
    }
    Ok(())
}

/// Saves a full record (states and datasets) as an archive directory.
pub fn save_record(
    record: &TrainingRecord,
    cost: Option<CostReport>,
    dir: &Path,
) -> Result<(), ArchiveError> {
    let n = record.trajectory.len();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        prover_id: record.prover_id.clone(),
        arch: record.arch.clone(),
        init: record.init.clone(),
        algs: record.algs.clone(),
        noise_bound: record.noise_bound,
        n,
        has_data: true,
        files: expected_files(n, true),
        data_distributions: Some(
            record
                .datasets
                .iter()
                .map(|d| d.distribution_id.clone())
                .collect(),
        ),
        cost,
    };
    write_manifest(dir, &manifest)?;
    write_states(dir, &record.trajectory.states)?;
    write_data(dir, &record.datasets)
}

/// Saves a dataless proof as an archive directory.
pub fn save_proof(proof: &Proof, cost: Option<CostReport>, dir: &Path) -> Result<(), ArchiveError> {
    let n = proof.trajectory.len();
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        prover_id: proof.prover_id.clone(),
        arch: proof.arch.clone(),
        init: proof.init.clone(),
        algs: proof.algs.clone(),
        noise_bound: proof.noise_bound,
        n,
        has_data: false,
        files: expected_files(n, false),
        data_distributions: None,
        cost,
    };
    write_manifest(dir, &manifest)?;
    write_states(dir, &proof.trajectory.states)
}

/// An archive read back from disk: a record when the data traveled along,
/// otherwise a proof.
pub enum LoadedArchive {
    Record {
        record: TrainingRecord,
        cost: Option<CostReport>,
    },
    Proof {
        proof: Proof,
        cost: Option<CostReport>,
    },
}

impl LoadedArchive {
    pub fn prover_id(&self) -> &str {
        match self {
            LoadedArchive::Record { record, .. } => &record.prover_id,
            LoadedArchive::Proof { proof, .. } => &proof.prover_id,
        }
    }

    pub fn cost(&self) -> Option<CostReport> {
        match self {
            LoadedArchive::Record { cost, .. } | LoadedArchive::Proof { cost, .. } => *cost,
        }
    }

    /// The dataless claim, dropping datasets if present.
    pub fn into_proof(self) -> Proof {
        match self {
            LoadedArchive::Record { record, .. } => record.to_proof(),
            LoadedArchive::Proof { proof, .. } => proof,
        }
    }

    /// The full record, or `None` for a dataless archive.
    pub fn into_record(self) -> Option<TrainingRecord> {
        match self {
            LoadedArchive::Record { record, .. } => Some(record),
            LoadedArchive::Proof { .. } => None,
        }
    }
}

pub fn load_manifest(dir: &Path) -> Result<Manifest, ArchiveError> {
    let path = dir.join(MANIFEST_NAME);
    if !path.is_file() {
        return Err(ArchiveError::MissingFile { path });
    }
    let bytes = fs::read(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest =
        serde_json::from_slice(&bytes).map_err(|e| corrupt(&path, e.to_string()))?;
    if manifest.version != MANIFEST_VERSION {
        return Err(corrupt(
            &path,
            format!(
                "manifest version {} (this tool reads version {MANIFEST_VERSION})",
                manifest.version
            ),
        ));
    }
    if manifest.n < 2 {
        return Err(corrupt(&path, "trajectory needs at least two states"));
    }
    if manifest.files != expected_files(manifest.n, manifest.has_data) {
        return Err(corrupt(&path, "file listing does not match n/has_data"));
    }
    match (&manifest.data_distributions, manifest.has_data) {
        (Some(ids), true) if ids.len() != manifest.n - 1 => {
            return Err(corrupt(&path, "need one distribution id per dataset"));
        }
        (None, true) => return Err(corrupt(&path, "datasets present but no distribution ids")),
        (Some(_), false) => {
            return Err(corrupt(&path, "distribution ids present without datasets"));
        }
        _ => {}
    }
    Ok(manifest)
}

/// Loads an archive directory written by [`save_record`] or [`save_proof`].
pub fn load_archive(dir: &Path) -> Result<LoadedArchive, ArchiveError> {
    let manifest = load_manifest(dir)?;
    let mut states = Vec::with_capacity(manifest.n);
    for i in 0..manifest.n {
        states.push(ModelState::new(read_tensor(&dir.join(state_file(i)))?));
    }
    let trajectory = Trajectory { states };
    if manifest.has_data {
        let ids = manifest.data_distributions.as_ref().expect("validated");
        let mut datasets = Vec::with_capacity(manifest.n - 1);
        for i in 0..manifest.n - 1 {
            let features = read_tensor(&dir.join(features_file(i)))?;
            let lpath = dir.join(labels_file(i));
            let labels = labels_from_tensor(&lpath, &read_tensor(&lpath)?)?;
            datasets.push(LabeledDataset {
                features,
                labels,
                distribution_id: ids[i].clone(),
            });
        }
        Ok(LoadedArchive::Record {
            record: TrainingRecord {
                prover_id: manifest.prover_id,
                arch: manifest.arch,
                init: manifest.init,
                algs: manifest.algs,
                trajectory,
                datasets,
                noise_bound: manifest.noise_bound,
            },
            cost: manifest.cost,
        })
    } else {
        Ok(LoadedArchive::Proof {
            proof: Proof {
                prover_id: manifest.prover_id,
                arch: manifest.arch,
                init: manifest.init,
                algs: manifest.algs,
                trajectory,
                noise_bound: manifest.noise_bound,
            },
            cost: manifest.cost,
        })
    }
}

/// Loads a directory of verified initial states: every `<handle>.bin` POTT
/// tensor becomes a registry entry with provenance accepted.
pub fn load_registry(dir: &Path) -> Result<InitRegistry, ArchiveError> {
    let mut registry = InitRegistry::new();
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().map(|x| x == "bin").unwrap_or(false))
        .collect();
    paths.sort();
    for path in paths {
        let handle = path
            .file_stem()
            .and_then(|s| s.to_str())
            .ok_or_else(|| corrupt(&path, "handle is not unicode"))?
            .to_string();
        registry.insert(&handle, read_tensor(&path)?, true);
    }
    Ok(registry)
}

/// `<prefix>.features.bin` and `<prefix>.labels.bin` paths for a dataset
/// stored as a tensor pair. Appended, not extension-swapped, so dotted
/// prefixes survive.
pub fn dataset_pair_paths(prefix: &Path) -> (PathBuf, PathBuf) {
    let mut features = prefix.as_os_str().to_os_string();
    features.push(".features.bin");
    let mut labels = prefix.as_os_str().to_os_string();
    labels.push(".labels.bin");
    (PathBuf::from(features), PathBuf::from(labels))
}

/// Saves one dataset as a `<prefix>.features.bin` / `<prefix>.labels.bin`
/// tensor pair.
pub fn save_dataset_pair(prefix: &Path, data: &LabeledDataset) -> Result<(), ArchiveError> {
    let (features, labels) = dataset_pair_paths(prefix);
    write_tensor(&features, &data.features)?;
    write_tensor(&labels, &labels_to_tensor(&data.labels))
}

/// Loads a dataset saved by [`save_dataset_pair`].
pub fn load_dataset_pair(
    features_path: &Path,
    labels_path: &Path,
    distribution_id: &str,
) -> Result<LabeledDataset, ArchiveError> {
    let features = read_tensor(features_path)?;
    let labels = labels_from_tensor(labels_path, &read_tensor(labels_path)?)?;
    if features.shape().first().copied().unwrap_or(0) != labels.len() {
        return Err(corrupt(
            features_path,
            format!(
                "features have {} rows but {} labels given",
                features.shape().first().copied().unwrap_or(0),
                labels.len()
            ),
        ));
    }
    Ok(LabeledDataset {
        features,
        labels,
        distribution_id: distribution_id.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use pott_core::models::{Activation, LossKind};
    use pott_core::record::check_structure;
    use pott_core::tasks::Task;
    use pott_core::trainer::{train_honest, HonestTrainConfig, NoiseModel, NullClock};

    fn sample_record(seed: u64) -> (TrainingRecord, CostMeter) {
        let task = Task::TwoMoons { noise: 0.2 };
        let data: Vec<LabeledDataset> = (0..3).map(|i| task.sample(10, seed + i)).collect();
        let cfg = HonestTrainConfig {
            prover_id: "alice".to_string(),
            arch: ArchitectureSpec::mlp(2, vec![4], 2, Activation::Tanh),
            init: InitAlgorithmSpec::Gaussian {
                mean: 0.0,
                std: 0.3,
                seed,
            },
            algs: (0..3)
                .map(|i| {
                    TrainingAlgorithmSpec::sgd(0.2, 8, 4, LossKind::CrossEntropy, seed + 50 + i)
                        .unwrap()
                })
                .collect(),
            noise: NoiseModel::None,
            noise_bound: 0.0,
        };
        let mut meter = CostMeter::new();
        let record = train_honest(&cfg, data, &InitRegistry::new(), &mut meter, &NullClock).unwrap();
        (record, meter)
    }

    #[test]
    fn record_roundtrip_is_lossless() {
        let (record, meter) = sample_record(7);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec");
        save_record(&record, Some(CostReport::from_meter(&meter)), &path).unwrap();
        let loaded = load_archive(&path).unwrap();
        assert_eq!(loaded.cost().unwrap().steps, meter.total_steps());
        assert_eq!(loaded.cost().unwrap().wall_seconds, 0.0);
        let back = loaded.into_record().expect("record archive");
        assert_eq!(back, record);
        assert!(check_structure(&back).ok());
    }

    #[test]
    fn proof_roundtrip_is_lossless() {
        let (record, _) = sample_record(8);
        let proof = record.to_proof();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("proof");
        save_proof(&proof, None, &path).unwrap();
        match load_archive(&path).unwrap() {
            LoadedArchive::Proof { proof: back, cost } => {
                assert_eq!(back, proof);
                assert!(cost.is_none());
            }
            _ => panic!("expected a proof archive"),
        }
    }

    #[test]
    fn equal_inputs_give_byte_equal_archives() {
        let (record, meter) = sample_record(9);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a"), dir.path().join("b"));
        save_record(&record, Some(CostReport::from_meter(&meter)), &a).unwrap();
        save_record(&record, Some(CostReport::from_meter(&meter)), &b).unwrap();
        for f in expected_files(record.trajectory.len(), true)
            .iter()
            .chain([MANIFEST_NAME.to_string()].iter())
        {
            let fa = fs::read(a.join(f)).unwrap();
            let fb = fs::read(b.join(f)).unwrap();
            assert_eq!(fa, fb, "file {f} differs");
        }
    }

    #[test]
    fn bad_version_is_corrupt() {
        let (record, _) = sample_record(10);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec");
        save_record(&record, None, &path).unwrap();
        let mpath = path.join(MANIFEST_NAME);
        let text = fs::read_to_string(&mpath).unwrap();
        fs::write(&mpath, text.replace("\"version\": 1", "\"version\": 99")).unwrap();
        assert!(matches!(
            load_archive(&path),
            Err(ArchiveError::CorruptArchive { .. })
        ));
    }

    #[test]
    fn truncated_tensor_is_corrupt_and_missing_state_is_missing() {
        let (record, _) = sample_record(11);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("rec");
        save_record(&record, None, &path).unwrap();
        let s0 = path.join("states/0000.bin");
        let bytes = fs::read(&s0).unwrap();
        fs::write(&s0, &bytes[..bytes.len() / 2]).unwrap();
        assert!(matches!(
            load_archive(&path),
            Err(ArchiveError::CorruptArchive { .. })
        ));
        fs::remove_file(&s0).unwrap();
        assert!(matches!(
            load_archive(&path),
            Err(ArchiveError::MissingFile { .. })
        ));
    }

    #[test]
    fn registry_dir_loads_sorted_handles() {
        let dir = tempfile::tempdir().unwrap();
        let t = DenseTensor::vector(vec![1.0, 2.0]);
        write_tensor(&dir.path().join("base-v1.bin"), &t).unwrap();
        write_tensor(&dir.path().join("other.bin"), &t.scale(2.0)).unwrap();
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let reg = load_registry(dir.path()).unwrap();
        assert!(reg.get("base-v1").is_some());
        assert!(reg.get("other").is_some());
        assert!(reg.get("notes").is_none());
    }

    #[test]
    fn dataset_pair_roundtrip() {
        let task = Task::TwoMoons { noise: 0.2 };
        let data = task.sample(12, 3);
        let dir = tempfile::tempdir().unwrap();
        let prefix = dir.path().join("test");
        save_dataset_pair(&prefix, &data).unwrap();
        let back = load_dataset_pair(
            &dir.path().join("test.features.bin"),
            &dir.path().join("test.labels.bin"),
            &data.distribution_id,
        )
        .unwrap();
        assert_eq!(back, data);
    }
}
