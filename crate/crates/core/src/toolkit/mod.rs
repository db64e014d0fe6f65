//! The eight correction tools: retrieval, diagnostics, bounding, synthesis
//! and verification. Every tool is a pure function of its inputs and is
//! generic over [`Scalar`](crate::Scalar).

mod bias;
mod correction;
mod phase;
mod range;
mod similarity;
mod trajectory;
mod verify;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use bias::{learn_bias, trailing_zeros, BiasEstimate};
pub use correction::{
    adjust_correction, apply_correction, rule_adjust_weight, Adjustment, AppliedRule, Correction, CorrectionInputs,
};
pub use phase::{detect_phase, Phase, PhaseEstimate, PhaseInputs};
pub use range::{horizon_changes, validate_range, RangeVerdict};
pub use similarity::{find_similar, shape_vector, ShapeVector, SimilarPlot};
pub use trajectory::{evaluate_trajectory, TrajectoryVerdict, Verdict, MAX_ADJUSTMENTS};
pub use verify::{verify_correction, SafetyStatus, SafetyVerdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToolName {
    FindSimilar,
    LearnBias,
    DetectPhase,
    ValidateRange,
    ApplyCorrection,
    EvaluateTrajectory,
    AdjustCorrection,
    VerifyCorrection,
}

impl ToolName {
    pub const ALL: [ToolName; 8] = [
        ToolName::LearnBias,
        ToolName::DetectPhase,
        ToolName::FindSimilar,
        ToolName::ValidateRange,
        ToolName::ApplyCorrection,
        ToolName::EvaluateTrajectory,
        ToolName::AdjustCorrection,
        ToolName::VerifyCorrection,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ToolName::FindSimilar => "find_similar",
            ToolName::LearnBias => "learn_bias",
            ToolName::DetectPhase => "detect_phase",
            ToolName::ValidateRange => "validate_range",
            ToolName::ApplyCorrection => "apply_correction",
            ToolName::EvaluateTrajectory => "evaluate_trajectory",
            ToolName::AdjustCorrection => "adjust_correction",
            ToolName::VerifyCorrection => "verify_correction",
        }
    }

    /// Tools whose results feed apply_correction.
    pub fn is_diagnostic(self) -> bool {
        matches!(
            self,
            ToolName::LearnBias | ToolName::DetectPhase | ToolName::FindSimilar | ToolName::ValidateRange
        )
    }
}

impl fmt::Display for ToolName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ToolName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let needle = s.trim().to_ascii_lowercase().replace('-', "_");
        ToolName::ALL
            .into_iter()
            .find(|t| t.as_str() == needle)
            .ok_or_else(|| format!("unknown tool '{}'", s.trim()))
    }
}
