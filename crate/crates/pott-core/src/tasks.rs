//! Synthetic classification tasks.
//!
//! Each task names a data distribution; datasets carry the task id so that
//! anyone holding a record (or attacking one) can resample fresh rows from
//! the same distribution. Ids round-trip through `parse`, and sampling is
//! fully determined by (task, rows, seed). Labels are interleaved
//! `row % classes`, so every prefix of a dataset is nearly balanced.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::record::LabeledDataset;
use crate::tensor::DenseTensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Task {
    /// Two isotropic Gaussians on the plane, means `(+-sep/2, 0)`.
    TwoGaussians { sep: f64 },
    /// Two interleaved half circles with Gaussian pixel noise.
    TwoMoons { noise: f64 },
    /// Ten 8x8 digit glyphs with Gaussian pixel noise.
    Digits8x8 { noise: f64 },
}

impl Task {
    pub fn input_width(&self) -> usize {
        match self {
            Task::TwoGaussians { .. } | Task::TwoMoons { .. } => 2,
            Task::Digits8x8 { .. } => 64,
        }
    }

    pub fn classes(&self) -> usize {
        match self {
            Task::TwoGaussians { .. } | Task::TwoMoons { .. } => 2,
            Task::Digits8x8 { .. } => 10,
        }
    }

    /// Canonical id, e.g. `two_moons?noise=0.2`. Seeds are not part of the
    /// id: the id names the distribution, not a draw from it.
    pub fn id(&self) -> String {
        match self {
            Task::TwoGaussians { sep } => format!("two_gaussians?sep={sep}"),
            Task::TwoMoons { noise } => format!("two_moons?noise={noise}"),
            Task::Digits8x8 { noise } => format!("digits8x8?noise={noise}"),
        }
    }

    pub fn parse(id: &str) -> Option<Task> {
        let (name, query) = match id.split_once('?') {
            Some((n, q)) => (n, q),
            None => (id, ""),
        };
        let param = |key: &str| -> Option<f64> {
            for pair in query.split('&') {
                if let Some((k, v)) = pair.split_once('=') {
                    if k == key {
                        return v.parse::<f64>().ok();
                    }
                }
            }
            None
        };
        match name {
            "two_gaussians" => Some(Task::TwoGaussians { sep: param("sep")? }),
            "two_moons" => Some(Task::TwoMoons {
                noise: param("noise")?,
            }),
            "digits8x8" => Some(Task::Digits8x8 {
                noise: param("noise")?,
            }),
            _ => None,
        }
    }

    /// Draws `rows` labeled rows. Labels go `0, 1, .., classes-1, 0, ..` and
    /// the feature stream is consumed row by row, so a draw is reproducible
    /// from the seed alone.
    pub fn sample(&self, rows: usize, seed: u64) -> LabeledDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let classes = self.classes();
        let width = self.input_width();
        let mut values = Vec::with_capacity(rows * width);
        let mut labels = Vec::with_capacity(rows);
        for i in 0..rows {
            let label = i % classes;
            labels.push(label);
            match self {
                Task::TwoGaussians { sep } => {
                    let cx = if label == 0 { -sep / 2.0 } else { sep / 2.0 };
                    let dx: f64 = rng.sample(StandardNormal);
                    let dy: f64 = rng.sample(StandardNormal);
                    values.push(cx + dx);
                    values.push(dy);
                }
                Task::TwoMoons { noise } => {
                    let t: f64 = rng.random_range(0.0..core::f64::consts::PI);
                    let (mut x, mut y) = if label == 0 {
                        (crate::fmath::cos(t), crate::fmath::sin(t))
                    } else {
                        (1.0 - crate::fmath::cos(t), 0.5 - crate::fmath::sin(t))
                    };
                    let dx: f64 = rng.sample(StandardNormal);
                    let dy: f64 = rng.sample(StandardNormal);
                    x += noise * dx;
                    y += noise * dy;
                    values.push(x);
                    values.push(y);
                }
                Task::Digits8x8 { noise } => {
                    let glyph = DIGIT_GLYPHS[label];
                    for r in 0..8 {
                        for c in 0..8 {
                            let on = glyph[r].as_bytes()[c] == b'#';
                            let base = if on { 1.0 } else { 0.0 };
                            let d: f64 = rng.sample(StandardNormal);
                            values.push(base + noise * d);
                        }
                    }
                }
            }
        }
        LabeledDataset {
            features: DenseTensor::new(alloc::vec![rows, width], values).unwrap(),
            labels,
            distribution_id: self.id(),
        }
    }

    /// A sequence of per-checkpoint datasets plus one held-out test set,
    /// each drawn from its own derived stream.
    pub fn sample_run(
        &self,
        checkpoints: usize,
        rows_per_checkpoint: usize,
        test_rows: usize,
        seed: u64,
    ) -> (Vec<LabeledDataset>, LabeledDataset) {
        let train = (0..checkpoints)
            .map(|i| self.sample(rows_per_checkpoint, crate::seed::derive(seed, i as u64)))
            .collect();
        let test = self.sample(test_rows, crate::seed::derive(seed, u64::MAX));
        (train, test)
    }
}

/// 8x8 glyph per digit; `#` is ink. Deliberately blocky so the classes stay
/// separable under heavy pixel noise.
const DIGIT_GLYPHS: [[&str; 8]; 10] = [
    [
        "..####..",
        ".##..##.",
        ".#....#.",
        ".#....#.",
        ".#....#.",
        ".#....#.",
        ".##..##.",
        "..####..",
    ],
    [
        "...##...",
        "..###...",
        ".####...",
        "...##...",
        "...##...",
        "...##...",
        "...##...",
        ".######.",
    ],
    [
        ".#####..",
        "##...##.",
        ".....##.",
        "....##..",
        "...##...",
        "..##....",
        ".##.....",
        ".#######",
    ],
    [
        ".#####..",
        "#....##.",
        ".....##.",
        "...###..",
        ".....##.",
        ".....##.",
        "#....##.",
        ".#####..",
    ],
    [
        "...###..",
        "..####..",
        ".##.##..",
        "##..##..",
        "########",
        "....##..",
        "....##..",
        "....##..",
    ],
    [
        "#######.",
        "##......",
        "##......",
        "######..",
        ".....##.",
        ".....##.",
        "##...##.",
        ".#####..",
    ],
    [
        "..####..",
        ".##.....",
        "##......",
        "######..",
        "##...##.",
        "##...##.",
        ".##..##.",
        "..####..",
    ],
    [
        "########",
        ".....##.",
        "....##..",
        "...##...",
        "..##....",
        "..##....",
        "..##....",
        "..##....",
    ],
    [
        ".#####..",
        "##...##.",
        "##...##.",
        ".#####..",
        "##...##.",
        "##...##.",
        "##...##.",
        ".#####..",
    ],
    [
        "..####..",
        ".##..##.",
        ".##..##.",
        "..#####.",
        ".....##.",
        ".....##.",
        "....##..",
        ".####...",
    ],
];

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_round_trip() {
        for task in [
            Task::TwoGaussians { sep: 2.5 },
            Task::TwoMoons { noise: 0.2 },
            Task::Digits8x8 { noise: 0.25 },
        ] {
            assert_eq!(Task::parse(&task.id()), Some(task));
        }
        assert_eq!(Task::parse("nonsense?x=1"), None);
        assert_eq!(Task::parse("two_moons"), None);
    }

    #[test]
    fn sampling_is_deterministic_and_shaped() {
        let task = Task::TwoMoons { noise: 0.1 };
        let a = task.sample(40, 7);
        let b = task.sample(40, 7);
        assert_eq!(a, b);
        assert_eq!(a.features.shape(), &[40, 2]);
        assert_eq!(a.labels[0], 0);
        assert_eq!(a.labels[1], 1);
        assert_eq!(a.labels[38], 0);
        let c = task.sample(40, 8);
        assert_ne!(a.features.values(), c.features.values());
    }

    #[test]
    fn labels_are_interleaved_for_every_family() {
        for task in [
            Task::TwoGaussians { sep: 2.0 },
            Task::TwoMoons { noise: 0.2 },
            Task::Digits8x8 { noise: 0.3 },
        ] {
            let d = task.sample(25, 3);
            for (i, &l) in d.labels.iter().enumerate() {
                assert_eq!(l, i % task.classes());
            }
            assert_eq!(d.features.shape(), &[25, task.input_width()]);
            assert!(d.features.all_finite());
        }
    }

    #[test]
    fn glyphs_are_mutually_distinct() {
        // Every pair of noiseless digit templates differs in at least 8
        // pixels, so the classes are separable long before the noise floor.
        let clean = Task::Digits8x8 { noise: 0.0 };
        let d = clean.sample(10, 1);
        for a in 0..10 {
            for b in (a + 1)..10 {
                let ra = &d.features.values()[a * 64..(a + 1) * 64];
                let rb = &d.features.values()[b * 64..(b + 1) * 64];
                let differing = ra
                    .iter()
                    .zip(rb)
                    .filter(|(x, y)| (**x - **y).abs() > 0.5)
                    .count();
                assert!(differing >= 8, "digits {a} and {b} differ in {differing} pixels");
            }
        }
    }

    #[test]
    fn run_sampling_gives_distinct_checkpoint_sets() {
        let task = Task::TwoGaussians { sep: 2.0 };
        let (train, test) = task.sample_run(3, 20, 50, 99);
        assert_eq!(train.len(), 3);
        assert_eq!(test.rows(), 50);
        assert_ne!(train[0].features.values(), train[1].features.values());
        assert_ne!(train[1].features.values(), train[2].features.values());
    }
}
