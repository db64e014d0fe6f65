use serde::{Deserialize, Serialize};

use super::PhaseEstimate;
use crate::features::ProfileKind;
use crate::memory::JumpDistribution;
use crate::scalar::{lit, Scalar};

/// Phase confidence needed before a dormant-season prediction is zeroed.
const DORMANT_CONFIDENCE: f64 = 0.75;
/// Multiple of the historical maximum treated as physically impossible.
const HIST_MAX_FACTOR: f64 = 3.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SafetyStatus {
    Pass,
    Warn,
    Override,
}

impl SafetyStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            SafetyStatus::Pass => "pass",
            SafetyStatus::Warn => "warn",
            SafetyStatus::Override => "override",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SafetyVerdict<T> {
    pub status: SafetyStatus,
    pub ratio: T,
    pub input: T,
    pub final_value: T,
    pub reason: String,
}

/// Final guardrail on a corrected value.
///
/// The correction ratio `R = y_star / y_raw` is compared to the training
/// jump distribution: inside (P05, P95) passes, the bands up to P01/P99 warn
/// without changing the value, and anything beyond is pulled back to the
/// nearer of P01/P99. Absolute checks follow: values above three times the
/// historical maximum fall to the maximum, positive values in a confident
/// dormant phase of a zero-valley dataset fall to zero, negatives to zero.
pub fn verify_correction<T: Scalar>(
    y_star: T,
    y_raw: T,
    jumps: &JumpDistribution<T>,
    phase: Option<&PhaseEstimate<T>>,
    profile: ProfileKind,
    hist_max: T,
) -> SafetyVerdict<T> {
    let zero = T::zero();
    let ratio = if y_raw == zero { T::one() } else { y_star / y_raw };
    let mut value = y_star;
    let mut status = SafetyStatus::Pass;
    let mut reasons: Vec<String> = Vec::new();

    if y_raw != zero && (ratio < jumps.p01 || ratio > jumps.p99) {
        let bounded = ratio.max(jumps.p01).min(jumps.p99);
        value = y_raw * bounded;
        status = SafetyStatus::Override;
        reasons.push(format!("ratio {ratio:.4} outside [P01, P99]; clamped to {bounded:.4}"));
    } else if ratio <= jumps.p05 || ratio >= jumps.p95 {
        status = SafetyStatus::Warn;
        reasons.push(format!("ratio {ratio:.4} in warning zone"));
    }

    if value > lit::<T>(HIST_MAX_FACTOR) * hist_max {
        value = hist_max;
        status = SafetyStatus::Override;
        reasons.push("exceeds 3x historical maximum; clamped to maximum".into());
    }

    if let Some(p) = phase {
        if profile == ProfileKind::ZeroValley
            && p.phase.is_dormant()
            && p.confidence >= lit(DORMANT_CONFIDENCE)
            && value > zero
        {
            value = zero;
            status = SafetyStatus::Override;
            reasons.push(format!("positive value during confident {} phase", p.phase.as_str()));
        }
    }

    if value < zero {
        value = zero;
        status = SafetyStatus::Override;
        reasons.push("negative value floored at zero".into());
    }

    if status == SafetyStatus::Override && value == y_star {
        status = SafetyStatus::Pass;
    }
    let reason = if reasons.is_empty() { "ratio within (P05, P95)".to_string() } else { reasons.join("; ") };
    SafetyVerdict { status, ratio, input: y_star, final_value: value, reason }
}
