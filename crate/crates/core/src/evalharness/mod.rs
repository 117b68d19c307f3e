//! Verification protocols, genuine/impostor scheduling, FMR-constrained
//! thresholds, error-rate reports and three-finger score fusion.

mod fusion;
mod manifest;
mod pipeline;
mod protocol;
mod report;
mod svm;
mod threshold;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::domain::{Camera, Hand, Wavelength};
use crate::error::Error;

pub use fusion::{fuse_fingers, FusedScores, FusionVector};
pub use manifest::{Manifest, ManifestEntry};
pub use pipeline::{evaluate_protocols, extract_templates, EvalConfig, EvaluationOutput, TemplateStore};
pub use protocol::{build_protocol, run_comparisons, schedule_comparisons, Comparison, ProtocolSets, ScoreRecord, ENROLLMENT_SAMPLE};
pub use report::{evaluate_fusion, evaluate_scores, scores_csv, ProtocolReport, Report};
pub use svm::{default_gamma, svm_decision, svm_train, SvmModel, SvmParams};
pub use threshold::{hter, metrics, round2, threshold_at_fmr, Metrics};

/// The eight single-modality protocols, ordered by hand, camera, wavelength.
/// Deserializes from either the id (`P7`) or the name (`RH_right_850`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String")]
pub enum ProtocolId {
    P1,
    P2,
    P3,
    P4,
    P5,
    P6,
    P7,
    P8,
}

impl ProtocolId {
    pub const ALL: [ProtocolId; 8] =
        [ProtocolId::P1, ProtocolId::P2, ProtocolId::P3, ProtocolId::P4, ProtocolId::P5, ProtocolId::P6, ProtocolId::P7, ProtocolId::P8];

    fn index(self) -> usize {
        self as usize
    }

    pub fn hand(self) -> Hand {
        if self.index() < 4 {
            Hand::Left
        } else {
            Hand::Right
        }
    }

    pub fn camera(self) -> Camera {
        if self.index() % 4 < 2 {
            Camera::Left
        } else {
            Camera::Right
        }
    }

    pub fn wavelength(self) -> Wavelength {
        if self.index() % 2 == 0 {
            Wavelength::Nir850
        } else {
            Wavelength::Nir950
        }
    }

    /// `<hand>_<camera>_<wavelength>`, e.g. `LH_left_850`.
    pub fn name(self) -> String {
        format!("{}_{}_{}", self.hand(), self.camera(), self.wavelength())
    }
}

impl fmt::Display for ProtocolId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "P{}", self.index() + 1)
    }
}

impl FromStr for ProtocolId {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        ProtocolId::ALL
            .iter()
            .copied()
            .find(|p| p.to_string() == s || p.name() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown protocol {s:?}")))
    }
}

impl TryFrom<String> for ProtocolId {
    type Error = Error;
    fn try_from(s: String) -> Result<Self, Error> {
        s.parse()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Dev,
    Eval,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Dev => "dev",
            Split::Eval => "eval",
        })
    }
}

/// Declarative protocol definition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolSpec {
    pub id: ProtocolId,
    /// The lowest `dev_subjects` subject ids form the Dev split.
    pub dev_subjects: usize,
    pub zei_per_probe: usize,
    pub seed: u64,
}

impl ProtocolSpec {
    pub fn new(id: ProtocolId) -> Self {
        ProtocolSpec { id, dev_subjects: 60, zei_per_probe: 3, seed: 0 }
    }

    pub fn name(&self) -> String {
        self.id.name()
    }
}
