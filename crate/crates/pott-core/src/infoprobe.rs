//! Exact information accounting for a discretized training channel.
//!
//! Models one training run as a finite channel: states live on an integer
//! grid, each step consumes one data symbol from a finite alphabet and adds
//! an independent noise offset. The information the final trajectory leaks
//! about the consumed data, `I(D; M)`, is computed two independent ways:
//! brute-force enumeration of every (data, noise, branch) path, and a
//! per-step decomposition `sum_j [H(M_{j+1}|M_j) - H(M_{j+1}|M_j, D_j)]`
//! justified by the chain rule plus the memoryless update. The two must
//! agree to float accumulation error, which is what the probe checks.
//!
//! Update rules mirror the recorded-algorithm manipulations: an honest rule
//! moves by the data symbol, a target pull replaces the data-driven move
//! with a data-independent pull toward a target with some mixing
//! probability, and a constant-output rule ignores the data entirely. The
//! mixture makes `I` convex in the mixing probability, hence nonincreasing
//! from the honest value down to exactly zero.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

/// Enumeration budget: total number of distinct (data, noise, branch)
/// paths a probe may expand.
pub const MAX_PATHS: f64 = 1e7;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Symbol {
    pub step: i64,
    pub prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NoiseOffset {
    pub offset: i64,
    pub prob: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ToyRule {
    /// `M' = M + step(D) + Z`.
    Honest,
    /// With probability `mix`, `M' = M + clamp(target - M, +-pull_mag) + Z`
    /// (no data dependence); otherwise the honest move.
    TargetPull { mix: f64, target: i64, pull_mag: i64 },
    /// `M' = M + Z` regardless of the data.
    ConstantOutput,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ToyChannel {
    pub grid_lo: i64,
    pub grid_hi: i64,
    pub start: i64,
    pub alphabet: Vec<Symbol>,
    pub noise: Vec<NoiseOffset>,
    pub rule: ToyRule,
    /// Number of data symbols consumed (trajectory transitions).
    pub steps: usize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Error {
    StateSpaceTooLarge { paths: f64, budget: f64 },
    BadConfig(&'static str),
}

impl core::fmt::Display for Error {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Error::StateSpaceTooLarge { paths, budget } => {
                write!(f, "probe would expand {paths:.3e} paths, budget is {budget:.3e}")
            }
            Error::BadConfig(msg) => write!(f, "{msg}"),
        }
    }
}

fn validate(ch: &ToyChannel) -> Result<(), Error> {
    if ch.steps == 0 {
        return Err(Error::BadConfig("probe needs at least one step"));
    }
    if ch.alphabet.is_empty() || ch.noise.is_empty() {
        return Err(Error::BadConfig("alphabet and noise must be nonempty"));
    }
    if ch.grid_lo >= ch.grid_hi {
        return Err(Error::BadConfig("grid is empty"));
    }
    if ch.start < ch.grid_lo || ch.start > ch.grid_hi {
        return Err(Error::BadConfig("start state is off the grid"));
    }
    for s in &ch.alphabet {
        if !(s.prob >= 0.0 && s.prob.is_finite()) {
            return Err(Error::BadConfig("alphabet probabilities must be nonnegative"));
        }
    }
    for z in &ch.noise {
        if !(z.prob >= 0.0 && z.prob.is_finite()) {
            return Err(Error::BadConfig("noise probabilities must be nonnegative"));
        }
    }
    let pa: f64 = ch.alphabet.iter().map(|s| s.prob).sum();
    let pz: f64 = ch.noise.iter().map(|z| z.prob).sum();
    if (pa - 1.0).abs() > 1e-9 || (pz - 1.0).abs() > 1e-9 {
        return Err(Error::BadConfig("probabilities must sum to one"));
    }
    if let ToyRule::TargetPull { mix, pull_mag, .. } = ch.rule {
        if !(0.0..=1.0).contains(&mix) {
            return Err(Error::BadConfig("mixing probability must be in [0, 1]"));
        }
        if pull_mag < 0 {
            return Err(Error::BadConfig("pull magnitude must be nonnegative"));
        }
    }
    let branches = match ch.rule {
        ToyRule::TargetPull { mix, .. } if mix > 0.0 && mix < 1.0 => 2.0,
        _ => 1.0,
    };
    let per_step = ch.alphabet.len() as f64 * ch.noise.len() as f64 * branches;
    let mut paths = 1.0;
    for _ in 0..ch.steps {
        paths *= per_step;
        if paths > MAX_PATHS {
            return Err(Error::StateSpaceTooLarge {
                paths,
                budget: MAX_PATHS,
            });
        }
    }
    Ok(())
}

fn clamp_state(ch: &ToyChannel, m: i64) -> i64 {
    m.max(ch.grid_lo).min(ch.grid_hi)
}

fn pull_move(m: i64, target: i64, pull_mag: i64) -> i64 {
    (target - m).max(-pull_mag).min(pull_mag)
}

/// `(move, probability)` branches of one update at state `m` given data
/// symbol `d`, before noise.
fn branches(ch: &ToyChannel, m: i64, d: &Symbol) -> Vec<(i64, f64)> {
    match ch.rule {
        ToyRule::Honest => alloc::vec![(d.step, 1.0)],
        ToyRule::ConstantOutput => alloc::vec![(0, 1.0)],
        ToyRule::TargetPull { mix, target, pull_mag } => {
            if mix == 0.0 {
                alloc::vec![(d.step, 1.0)]
            } else if mix == 1.0 {
                alloc::vec![(pull_move(m, target, pull_mag), 1.0)]
            } else {
                alloc::vec![
                    (pull_move(m, target, pull_mag), mix),
                    (d.step, 1.0 - mix),
                ]
            }
        }
    }
}

fn entropy_bits(probs: impl Iterator<Item = f64>) -> f64 {
    let mut h = 0.0;
    for p in probs {
        if p > 0.0 {
            h -= p * crate::fmath::log2(p);
        }
    }
    h
}

/// Mutual information `I(D; M)` in bits by explicit enumeration of the
/// joint distribution over (data sequence, state sequence).
pub fn mutual_information_enumerated(ch: &ToyChannel) -> Result<f64, Error> {
    validate(ch)?;
    let width = (ch.grid_hi - ch.grid_lo + 1) as u128;
    let asize = ch.alphabet.len() as u128;
    // One partial path: data code, state code, current state, probability.
    let mut frontier: Vec<(u128, u128, i64, f64)> = alloc::vec![(0, 0, ch.start, 1.0)];
    for _ in 0..ch.steps {
        let mut next = Vec::with_capacity(frontier.len() * ch.alphabet.len() * ch.noise.len());
        for (dcode, mcode, m, p) in frontier.into_iter() {
            for (di, d) in ch.alphabet.iter().enumerate() {
                if d.prob == 0.0 {
                    continue;
                }
                for (mv, bp) in branches(ch, m, d) {
                    if bp == 0.0 {
                        continue;
                    }
                    for z in &ch.noise {
                        if z.prob == 0.0 {
                            continue;
                        }
                        let m2 = clamp_state(ch, m + mv + z.offset);
                        let dcode2 = dcode * asize + di as u128;
                        let mcode2 = mcode * width + (m2 - ch.grid_lo) as u128;
                        next.push((dcode2, mcode2, m2, p * d.prob * bp * z.prob));
                    }
                }
            }
        }
        frontier = next;
    }
    let mut joint: BTreeMap<(u128, u128), f64> = BTreeMap::new();
    let mut pd: BTreeMap<u128, f64> = BTreeMap::new();
    let mut pm: BTreeMap<u128, f64> = BTreeMap::new();
    for (dcode, mcode, _, p) in frontier.into_iter() {
        *joint.entry((dcode, mcode)).or_insert(0.0) += p;
        *pd.entry(dcode).or_insert(0.0) += p;
    }
    for (&(_, mcode), &p) in joint.iter() {
        *pm.entry(mcode).or_insert(0.0) += p;
    }
    let mut info = 0.0;
    for (&(dcode, mcode), &p) in joint.iter() {
        if p > 0.0 {
            let ratio = p / (pd[&dcode] * pm[&mcode]);
            info += p * crate::fmath::log2(ratio);
        }
    }
    Ok(info)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StepInformation {
    /// `H(M_{j+1} | M_j)` in bits.
    pub update_entropy: f64,
    /// `H(M_{j+1} | M_j, D_j)` in bits.
    pub channel_entropy: f64,
    /// Their difference: what step j reveals about its data symbol.
    pub information: f64,
}

/// Per-step decomposition of `I(D; M)` from forward state marginals. The
/// sum of the step terms equals the enumerated value exactly (up to float
/// accumulation): conditioned on the previous state, each transition is an
/// independent channel from its own data symbol.
pub fn per_step_decomposition(ch: &ToyChannel) -> Result<Vec<StepInformation>, Error> {
    validate(ch)?;
    let mut marginal: BTreeMap<i64, f64> = BTreeMap::new();
    marginal.insert(ch.start, 1.0);
    let mut out = Vec::with_capacity(ch.steps);
    for _ in 0..ch.steps {
        let mut update_entropy = 0.0;
        let mut channel_entropy = 0.0;
        let mut next_marginal: BTreeMap<i64, f64> = BTreeMap::new();
        for (&m, &pm) in marginal.iter() {
            if pm == 0.0 {
                continue;
            }
            // P(m' | m) pooled over data, and P(m' | m, d) per symbol.
            let mut pooled: BTreeMap<i64, f64> = BTreeMap::new();
            for d in &ch.alphabet {
                if d.prob == 0.0 {
                    continue;
                }
                let mut per_symbol: BTreeMap<i64, f64> = BTreeMap::new();
                for (mv, bp) in branches(ch, m, d) {
                    if bp == 0.0 {
                        continue;
                    }
                    for z in &ch.noise {
                        if z.prob == 0.0 {
                            continue;
                        }
                        let m2 = clamp_state(ch, m + mv + z.offset);
                        *per_symbol.entry(m2).or_insert(0.0) += bp * z.prob;
                    }
                }
                channel_entropy += pm * d.prob * entropy_bits(per_symbol.values().copied());
                for (m2, q) in per_symbol {
                    *pooled.entry(m2).or_insert(0.0) += d.prob * q;
                }
            }
            update_entropy += pm * entropy_bits(pooled.values().copied());
            for (m2, q) in pooled {
                *next_marginal.entry(m2).or_insert(0.0) += pm * q;
            }
        }
        out.push(StepInformation {
            update_entropy,
            channel_entropy,
            information: update_entropy - channel_entropy,
        });
        marginal = next_marginal;
    }
    Ok(out)
}

/// `I(D; M)` in bits via the per-step decomposition.
pub fn mutual_information_decomposed(ch: &ToyChannel) -> Result<f64, Error> {
    Ok(per_step_decomposition(ch)?
        .iter()
        .map(|s| s.information)
        .sum())
}

/// Information carried by each sliding window of `window` consecutive
/// steps (conditioned on the window's entry state): partial sums of the
/// per-step terms.
pub fn fragment_scan(ch: &ToyChannel, window: usize) -> Result<Vec<f64>, Error> {
    if window == 0 || window > ch.steps {
        return Err(Error::BadConfig("window must be between 1 and the step count"));
    }
    let steps = per_step_decomposition(ch)?;
    Ok(steps
        .windows(window)
        .map(|w| w.iter().map(|s| s.information).sum())
        .collect())
}

/// A default probe family whose honest variant extracts the full data
/// entropy each step: data moves live on a coarse sub-lattice (multiples of
/// four) and noise offsets are finer, so every noisy sum decodes uniquely.
/// All probabilities are dyadic, keeping the degenerate cases exact.
pub fn decodable_channel(rule: ToyRule, steps: usize) -> ToyChannel {
    ToyChannel {
        grid_lo: -64,
        grid_hi: 64,
        start: 0,
        alphabet: alloc::vec![
            Symbol { step: -4, prob: 0.25 },
            Symbol { step: 0, prob: 0.5 },
            Symbol { step: 4, prob: 0.25 },
        ],
        noise: alloc::vec![
            NoiseOffset { offset: -1, prob: 0.25 },
            NoiseOffset { offset: 0, prob: 0.5 },
            NoiseOffset { offset: 1, prob: 0.25 },
        ],
        rule,
        steps,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_bit_channel_is_exact() {
        let ch = ToyChannel {
            grid_lo: -8,
            grid_hi: 8,
            start: 0,
            alphabet: alloc::vec![
                Symbol { step: -1, prob: 0.5 },
                Symbol { step: 1, prob: 0.5 },
            ],
            noise: alloc::vec![NoiseOffset { offset: 0, prob: 1.0 }],
            rule: ToyRule::Honest,
            steps: 1,
        };
        let e = mutual_information_enumerated(&ch).unwrap();
        let d = mutual_information_decomposed(&ch).unwrap();
        assert_eq!(e, 1.0);
        assert_eq!(d, 1.0);
    }

    #[test]
    fn constant_output_carries_exactly_zero_bits() {
        for steps in [1, 2, 3] {
            let ch = decodable_channel(ToyRule::ConstantOutput, steps);
            assert_eq!(mutual_information_enumerated(&ch).unwrap(), 0.0);
            assert_eq!(mutual_information_decomposed(&ch).unwrap(), 0.0);
        }
    }

    #[test]
    fn full_mix_pull_carries_exactly_zero_bits() {
        let ch = decodable_channel(
            ToyRule::TargetPull {
                mix: 1.0,
                target: 8,
                pull_mag: 3,
            },
            2,
        );
        assert_eq!(mutual_information_enumerated(&ch).unwrap(), 0.0);
        assert_eq!(mutual_information_decomposed(&ch).unwrap(), 0.0);
    }

    #[test]
    fn honest_decodable_channel_extracts_full_data_entropy() {
        // Entropy of the alphabet {1/4, 1/2, 1/4} is 1.5 bits per step.
        for steps in [1, 2, 3] {
            let ch = decodable_channel(ToyRule::Honest, steps);
            let e = mutual_information_enumerated(&ch).unwrap();
            assert!(
                (e - 1.5 * steps as f64).abs() < 1e-9,
                "steps {steps}: {e} bits"
            );
        }
    }

    #[test]
    fn enumeration_matches_decomposition_on_lopsided_channels() {
        // Non-dyadic probabilities, colliding sums, and both branching
        // rules: the two computations must still agree to accumulation
        // error.
        let base = ToyChannel {
            grid_lo: -40,
            grid_hi: 40,
            start: 3,
            alphabet: alloc::vec![
                Symbol { step: -2, prob: 0.3 },
                Symbol { step: 1, prob: 0.45 },
                Symbol { step: 3, prob: 0.25 },
            ],
            noise: alloc::vec![
                NoiseOffset { offset: -1, prob: 0.2 },
                NoiseOffset { offset: 0, prob: 0.5 },
                NoiseOffset { offset: 2, prob: 0.3 },
            ],
            rule: ToyRule::Honest,
            steps: 3,
        };
        let pull = ToyChannel {
            rule: ToyRule::TargetPull {
                mix: 0.35,
                target: 10,
                pull_mag: 2,
            },
            ..base.clone()
        };
        for ch in [base, pull] {
            let e = mutual_information_enumerated(&ch).unwrap();
            let d = mutual_information_decomposed(&ch).unwrap();
            assert!((e - d).abs() <= 1e-9, "{e} vs {d}");
            assert!(e > 0.0);
        }
    }

    #[test]
    fn information_is_nonincreasing_in_the_pull_mix() {
        let honest = mutual_information_enumerated(&decodable_channel(ToyRule::Honest, 2)).unwrap();
        let mut prev = honest;
        for mix in [0.25, 0.5, 0.75, 1.0] {
            let ch = decodable_channel(
                ToyRule::TargetPull {
                    mix,
                    target: 8,
                    pull_mag: 3,
                },
                2,
            );
            let i = mutual_information_enumerated(&ch).unwrap();
            assert!(i <= prev + 1e-9, "mix {mix}: {i} > {prev}");
            assert!(
                i <= (1.0 - mix) * honest + 1e-9,
                "mix {mix}: {i} above the convexity bound"
            );
            if mix > 0.0 {
                assert!(i < honest - 1e-6, "mix {mix} must strictly lose information");
            }
            prev = i;
        }
    }

    #[test]
    fn fragment_scan_partial_sums_are_consistent() {
        let ch = decodable_channel(ToyRule::Honest, 3);
        let per_step = per_step_decomposition(&ch).unwrap();
        let windows = fragment_scan(&ch, 2).unwrap();
        assert_eq!(windows.len(), 2);
        assert!(
            (windows[0] - (per_step[0].information + per_step[1].information)).abs() < 1e-12
        );
        let full = fragment_scan(&ch, 3).unwrap();
        let total = mutual_information_decomposed(&ch).unwrap();
        assert!((full[0] - total).abs() < 1e-12);
    }

    #[test]
    fn budget_and_config_errors() {
        let mut ch = decodable_channel(ToyRule::Honest, 20);
        assert!(matches!(
            mutual_information_enumerated(&ch),
            Err(Error::StateSpaceTooLarge { .. })
        ));
        ch.steps = 0;
        assert!(matches!(
            mutual_information_enumerated(&ch),
            Err(Error::BadConfig(_))
        ));
        let bad = ToyChannel {
            alphabet: alloc::vec![Symbol { step: 1, prob: 0.7 }],
            ..decodable_channel(ToyRule::Honest, 1)
        };
        assert!(matches!(
            mutual_information_enumerated(&bad),
            Err(Error::BadConfig(_))
        ));
    }

    #[test]
    fn clamping_keeps_the_identity_intact() {
        // A tiny grid where clamping fires constantly; the identity between
        // the two computations must survive.
        let ch = ToyChannel {
            grid_lo: -2,
            grid_hi: 2,
            start: 0,
            alphabet: alloc::vec![
                Symbol { step: -3, prob: 0.5 },
                Symbol { step: 3, prob: 0.5 },
            ],
            noise: alloc::vec![
                NoiseOffset { offset: -1, prob: 0.5 },
                NoiseOffset { offset: 1, prob: 0.5 },
            ],
            rule: ToyRule::Honest,
            steps: 3,
        };
        let e = mutual_information_enumerated(&ch).unwrap();
        let d = mutual_information_decomposed(&ch).unwrap();
        assert!((e - d).abs() <= 1e-9, "{e} vs {d}");
    }
}
