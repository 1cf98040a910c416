//! Verification report assembly and JSON emission.

use std::collections::BTreeMap;
use std::path::Path;

use pott_core::verifier::{ProofAssessment, Verdict, VerifierConfig};
use serde::{Deserialize, Serialize};

/// One verified proof in the report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProofReportEntry {
    pub prover_id: String,
    pub stage1: pott_core::verifier::Stage1Report,
    /// Matching loss at the final synthesis iteration; absent when stage 1
    /// already rejected the proof.
    pub stage2_final_loss: Option<f64>,
    pub stage3_acc: Vec<f64>,
    pub avg_acc: f64,
}

/// Verifier settings echoed into the report so a reader can re-run it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportConfig {
    pub verifier: VerifierConfig,
    pub tie_threshold: f64,
}

/// The verdict over a set of competing proofs, with per-proof detail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub proofs: Vec<ProofReportEntry>,
    /// Prover id of the clear winner, or null when rejected or tied.
    pub winner: Option<String>,
    /// Discrimination degree per prover: the top survivor's average
    /// accuracy divided by this prover's. Exactly 1 for the reference
    /// itself; null when the proof was rejected or scored zero.
    pub eta: BTreeMap<String, Option<f64>>,
    pub config: ReportConfig,
    /// Full judgment, including tie details.
    pub verdict: Verdict,
}

/// Builds the report for one verification run. `assessments` must be in
/// the order the proofs were supplied; `verdict` must come from judging
/// that same slice.
pub fn build_report(
    assessments: &[ProofAssessment],
    verdict: Verdict,
    verifier: VerifierConfig,
    tie_threshold: f64,
) -> VerificationReport {
    let proofs: Vec<ProofReportEntry> = assessments
        .iter()
        .map(|a| ProofReportEntry {
            prover_id: a.prover_id.clone(),
            stage1: a.stage1.clone(),
            stage2_final_loss: a.matching_final,
            stage3_acc: a.model_accuracies.clone(),
            avg_acc: a.score,
        })
        .collect();
    let winner = match &verdict {
        Verdict::Winner { index, .. } => Some(assessments[*index].prover_id.clone()),
        _ => None,
    };
    // Reference for the discrimination ratio: the winner, or the best
    // stage-1 survivor when the judgment was inconclusive.
    let reference = match &verdict {
        Verdict::Winner { index, .. } => Some(*index),
        Verdict::Inconclusive { first, .. } => Some(*first),
        Verdict::AllRejected => None,
    };
    let mut eta = BTreeMap::new();
    for (i, a) in assessments.iter().enumerate() {
        let value = match reference {
            Some(r) if i == r => Some(1.0),
            Some(r) if a.stage1.passed() && a.score > 0.0 => {
                Some(assessments[r].score / a.score)
            }
            _ => None,
        };
        eta.insert(a.prover_id.clone(), value);
    }
    VerificationReport {
        proofs,
        winner,
        eta,
        config: ReportConfig {
            verifier,
            tie_threshold,
        },
        verdict,
    }
}

/// Serializes the report as pretty JSON with a trailing newline; the same
/// report always produces the same bytes.
pub fn report_to_json(report: &VerificationReport) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(report).expect("report serializes");
    bytes.push(b'\n');
    bytes
}

pub fn write_report(report: &VerificationReport, path: &Path) -> std::io::Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    std::fs::write(path, report_to_json(report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use pott_core::record::StructureReport;
    use pott_core::verifier::{InitVerdict, Stage1Report};

    fn assessment(id: &str, passed: bool, score: f64) -> ProofAssessment {
        ProofAssessment {
            prover_id: id.to_string(),
            stage1: Stage1Report {
                structure: StructureReport::default(),
                init: InitVerdict::Exact { passed },
            },
            matching_first: Some(1.0),
            matching_final: Some(0.2),
            matching_tail_median: Some(0.25),
            model_accuracies: vec![score],
            score,
        }
    }

    #[test]
    fn winner_eta_is_exactly_one_and_rejected_is_null() {
        let a = vec![
            assessment("honest", true, 0.9),
            assessment("attacker-A2", true, 0.6),
            assessment("attacker-WI", false, 0.0),
        ];
        let verdict = pott_core::verifier::judge(&a, 0.01);
        let report = build_report(&a, verdict, VerifierConfig::default(), 0.01);
        assert_eq!(report.winner.as_deref(), Some("honest"));
        assert_eq!(report.eta["honest"], Some(1.0));
        assert!(report.eta["attacker-A2"].unwrap() > 1.0);
        assert_eq!(report.eta["attacker-WI"], None);
        assert_eq!(report.proofs[2].avg_acc, 0.0);
    }

    #[test]
    fn tie_leaves_winner_null_but_keeps_reference_eta() {
        let a = vec![
            assessment("p1", true, 0.800),
            assessment("p2", true, 0.799),
        ];
        let verdict = pott_core::verifier::judge(&a, 0.01);
        let report = build_report(&a, verdict.clone(), VerifierConfig::default(), 0.01);
        assert!(matches!(verdict, Verdict::Inconclusive { .. }));
        assert_eq!(report.winner, None);
        assert_eq!(report.eta["p1"], Some(1.0));
        assert!(report.eta["p2"].unwrap() >= 1.0);
    }

    #[test]
    fn report_bytes_are_stable() {
        let a = vec![assessment("p1", true, 0.8), assessment("p2", true, 0.5)];
        let verdict = pott_core::verifier::judge(&a, 0.01);
        let r1 = build_report(&a, verdict.clone(), VerifierConfig::default(), 0.01);
        let r2 = build_report(&a, verdict, VerifierConfig::default(), 0.01);
        assert_eq!(report_to_json(&r1), report_to_json(&r2));
    }
}
