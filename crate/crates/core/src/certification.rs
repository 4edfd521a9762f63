//! Checking a sample against a bound certificate.
//!
//! A verified full-coverage sample of size `ub` and a verified set of `lb`
//! pairwise exclusive interactions prove that the optimum lies in
//! `[lb, ub]`; equal sizes prove the sample optimal.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::interactions::{Interaction, InteractionUniverse};
use crate::lower_bound::{verify_mutex_certificate, CertificateFile, CertificateViolation};
use crate::model::FeatureModel;
use crate::sample::{Sample, SampleFile};
use crate::upper_bound::{verify_sample, SampleViolation};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GapStatus {
    Optimal,
    Gap,
}

impl fmt::Display for GapStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GapStatus::Optimal => "optimal",
            GapStatus::Gap => "gap",
        })
    }
}

/// Verified bounds for one model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub model: String,
    pub hash: String,
    pub ub: usize,
    pub lb: usize,
    /// `ub / lb`; with an empty bound the denominator is taken as 1.
    pub ratio: f64,
    pub status: GapStatus,
    pub t_last_ub_s: f64,
    pub t_last_lb_s: f64,
}

impl GapReport {
    pub fn new(model: &FeatureModel, ub: usize, lb: usize) -> Self {
        GapReport {
            model: model.name().to_string(),
            hash: model.content_hash(),
            ub,
            lb,
            ratio: if ub == 0 && lb == 0 {
                1.0
            } else {
                ub as f64 / lb.max(1) as f64
            },
            status: if ub == lb { GapStatus::Optimal } else { GapStatus::Gap },
            t_last_ub_s: 0.0,
            t_last_lb_s: 0.0,
        }
    }

    pub fn with_times(mut self, t_last_ub_s: f64, t_last_lb_s: f64) -> Self {
        self.t_last_ub_s = t_last_ub_s;
        self.t_last_lb_s = t_last_lb_s;
        self
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CertificationError {
    #[error("{artifact} was produced for model `{found}`, expected `{expected}`")]
    ModelMismatch {
        artifact: &'static str,
        expected: String,
        found: String,
    },
    #[error("{artifact} was produced for a different model version (hash {found}, expected {expected})")]
    HashMismatch {
        artifact: &'static str,
        expected: String,
        found: String,
    },
    #[error("certificate has strength {found}, expected {expected}")]
    StrengthMismatch { expected: usize, found: usize },
    #[error("invalid sample: {0}")]
    Sample(#[from] SampleViolation),
    #[error("invalid certificate: {0}")]
    Certificate(#[from] CertificateViolation),
    #[error("bound {lb} exceeds sample size {ub}")]
    BoundExceedsSample { lb: usize, ub: usize },
}

/// Verifies both artifacts independently and reports the gap.
pub fn check_duality(
    sample: &Sample,
    bound: &[Interaction],
    model: &FeatureModel,
    universe: &InteractionUniverse,
) -> Result<GapReport, CertificationError> {
    verify_sample(sample, model, universe)?;
    verify_mutex_certificate(bound, model, universe.t())?;
    if bound.len() > sample.len() {
        return Err(CertificationError::BoundExceedsSample {
            lb: bound.len(),
            ub: sample.len(),
        });
    }
    Ok(GapReport::new(model, sample.len(), bound.len()))
}

/// Checks that the file headers name `model` and carry its hash, then runs
/// [`check_duality`].
pub fn check_files(
    sample: &SampleFile,
    certificate: &CertificateFile,
    model: &FeatureModel,
    universe: &InteractionUniverse,
) -> Result<GapReport, CertificationError> {
    let hash = model.content_hash();
    for (artifact, name, found_hash) in [
        ("sample", &sample.model_name, &sample.model_hash),
        ("certificate", &certificate.model_name, &certificate.model_hash),
    ] {
        if name != model.name() {
            return Err(CertificationError::ModelMismatch {
                artifact,
                expected: model.name().to_string(),
                found: name.clone(),
            });
        }
        match found_hash {
            Some(h) if *h == hash => {}
            other => {
                return Err(CertificationError::HashMismatch {
                    artifact,
                    expected: hash,
                    found: other.clone().unwrap_or_else(|| "none".into()),
                })
            }
        }
    }
    if certificate.t != universe.t() {
        return Err(CertificationError::StrengthMismatch {
            expected: universe.t(),
            found: certificate.t,
        });
    }
    check_duality(&sample.sample, &certificate.members, model, universe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interactions::enumerate_universe;
    use crate::model::{Configuration, Literal};

    fn cfg(lits: &[i32]) -> Configuration {
        let lits: Vec<Literal> = lits.iter().map(|&v| Literal::new(v)).collect();
        Configuration::from_literals(lits.len(), &lits).unwrap()
    }

    fn free3() -> (FeatureModel, InteractionUniverse, Sample, Vec<Interaction>) {
        let m = FeatureModel::new("free3", 3, vec![], None).unwrap();
        let u = enumerate_universe(&m, 2, None).unwrap();
        let s = Sample::new(vec![
            cfg(&[1, -2, 3]),
            cfg(&[-1, -2, -3]),
            cfg(&[1, 2, -3]),
            cfg(&[-1, 2, 3]),
        ]);
        let e = [[1, 2], [1, -2], [-1, 2], [-1, -2]]
            .iter()
            .map(|v| Interaction::of(v))
            .collect();
        (m, u, s, e)
    }

    #[test]
    fn matching_bounds_are_optimal() {
        let (m, u, s, e) = free3();
        let r = check_duality(&s, &e, &m, &u).unwrap();
        assert_eq!(r.status, GapStatus::Optimal);
        assert_eq!((r.ub, r.lb, r.ratio), (4, 4, 1.0));
    }

    #[test]
    fn worked_sample_with_smaller_bound_is_gap() {
        let m = FeatureModel::new("toy", 4, vec![vec![1, 2], vec![3, 4]], None).unwrap();
        let u = enumerate_universe(&m, 2, None).unwrap();
        let s = Sample::new(vec![
            cfg(&[1, -2, 3, -4]),
            cfg(&[1, -2, -3, 4]),
            cfg(&[-1, 2, -3, 4]),
            cfg(&[1, 2, 3, 4]),
            cfg(&[-1, 2, 3, -4]),
        ]);
        let e4: Vec<Interaction> = [[1, 2], [-1, 3], [-1, -3], [-2, 3]]
            .iter()
            .map(|v| Interaction::of(v))
            .collect();
        let r = check_duality(&s, &e4, &m, &u).unwrap();
        assert_eq!(r.status, GapStatus::Gap);
        assert!((r.ratio - 1.25).abs() < 1e-12);
        // the largest exclusive set has five members, closing the gap
        let e5: Vec<Interaction> = [[1, 2], [-1, 3], [-1, -3], [-2, 3], [-2, -3]]
            .iter()
            .map(|v| Interaction::of(v))
            .collect();
        assert_eq!(check_duality(&s, &e5, &m, &u).unwrap().status, GapStatus::Optimal);
        let too_big = [e5.clone(), vec![Interaction::of(&[1, 4])]].concat();
        assert!(matches!(
            check_duality(&s, &too_big, &m, &u),
            Err(CertificationError::Certificate(CertificateViolation::Compatible(..)))
        ));
    }

    #[test]
    fn mismatched_model_is_rejected() {
        let (m, u, s, e) = free3();
        let sample = SampleFile {
            model_name: "other".into(),
            model_hash: Some(m.content_hash()),
            sample: s.clone(),
        };
        let cert = CertificateFile {
            model_name: "free3".into(),
            t: 2,
            model_hash: Some(m.content_hash()),
            members: e.clone(),
        };
        assert!(matches!(
            check_files(&sample, &cert, &m, &u),
            Err(CertificationError::ModelMismatch { .. })
        ));
        let sample = SampleFile {
            model_name: "free3".into(),
            model_hash: Some("stale".into()),
            sample: s.clone(),
        };
        assert!(matches!(
            check_files(&sample, &cert, &m, &u),
            Err(CertificationError::HashMismatch { .. })
        ));
        let sample = SampleFile {
            model_hash: Some(m.content_hash()),
            ..sample
        };
        assert_eq!(check_files(&sample, &cert, &m, &u).unwrap().status, GapStatus::Optimal);
    }

    #[test]
    fn report_json_round_trip() {
        let (m, _, _, _) = free3();
        let r = GapReport::new(&m, 5, 4).with_times(1.5, 0.25);
        let json = r.to_json();
        assert!(json.contains("\"status\":\"gap\""));
        assert_eq!(GapReport::from_json(&json).unwrap(), r);
    }
}
