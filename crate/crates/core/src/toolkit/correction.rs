use serde::{Deserialize, Serialize};

use super::{BiasEstimate, PhaseEstimate, RangeVerdict, TrajectoryVerdict, Verdict};
use crate::error::{Error, Result};
use crate::scalar::{lit, Scalar};

/// Confidence at which the phase estimate takes over from the statistical tier.
const PHASE_THRESHOLD: f64 = 0.5;
/// Bounds on the combined statistical multiplier.
const MIN_MULTIPLIER: f64 = 0.5;
const MAX_MULTIPLIER: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AppliedRule {
    /// No correction ran; the raw prediction passed through.
    None,
    PhysicalLimit,
    PhaseBlend,
    Statistical,
}

impl AppliedRule {
    pub fn as_str(self) -> &'static str {
        match self {
            AppliedRule::None => "none",
            AppliedRule::PhysicalLimit => "physical_limit",
            AppliedRule::PhaseBlend => "phase_blend",
            AppliedRule::Statistical => "statistical",
        }
    }
}

/// Diagnostics handed to [`apply_correction`]. A `None` field is a tool that
/// did not run and contributes its neutral default.
#[derive(Clone, Copy, Debug)]
pub struct CorrectionInputs<'a, T> {
    pub y_raw: T,
    pub phase: Option<&'a PhaseEstimate<T>>,
    pub bias: Option<&'a BiasEstimate<T>>,
    pub range: Option<&'a RangeVerdict<T>>,
    /// Signed fraction: +0.1 means the base model under-predicts by 10% here.
    pub position_bias: T,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correction<T> {
    pub value: T,
    pub rule: AppliedRule,
    /// Phase-conditioned estimate the blend weight refers to.
    pub y_phase: T,
    /// Weight `w` such that `value = w * y_phase + (1 - w) * y_raw`, clamped to [0, 1].
    pub weight: T,
    /// Statistical multiplier after clamping; only set by the statistical tier.
    pub multiplier: Option<T>,
}

fn implied_weight<T: Scalar>(value: T, y_phase: T, y_raw: T) -> T {
    if y_phase == y_raw {
        T::zero()
    } else {
        ((value - y_raw) / (y_phase - y_raw)).max(T::zero()).min(T::one())
    }
}

/// Three-tier cascade; the first tier that matches decides the value.
///
/// 1. Range breach: the clamped value.
/// 2. Phase confidence >= 0.5: `c * y_phase + (1 - c) * y_raw`, with the
///    statistical multipliers left out entirely.
/// 3. Otherwise `y_raw * gamma' * (1 + position_bias)`, the multiplier clamped to [0.5, 2].
pub fn apply_correction<T: Scalar>(inp: &CorrectionInputs<'_, T>) -> Correction<T> {
    let y_raw = inp.y_raw;
    let (y_phase, c) = inp
        .phase
        .map(|p| (p.y_phase, p.confidence))
        .unwrap_or((y_raw, T::zero()));

    if let Some(clamped) = inp.range.and_then(|r| r.clamped_value) {
        return Correction {
            value: clamped,
            rule: AppliedRule::PhysicalLimit,
            y_phase,
            weight: implied_weight(clamped, y_phase, y_raw),
            multiplier: None,
        };
    }

    if c >= lit(PHASE_THRESHOLD) {
        return Correction {
            value: c * y_phase + (T::one() - c) * y_raw,
            rule: AppliedRule::PhaseBlend,
            y_phase,
            weight: c,
            multiplier: None,
        };
    }

    let gamma = inp.bias.map(|b| b.gamma_decayed).unwrap_or_else(T::one);
    let multiplier = (gamma * (T::one() + inp.position_bias))
        .max(lit(MIN_MULTIPLIER))
        .min(lit(MAX_MULTIPLIER));
    let value = y_raw * multiplier;
    Correction {
        value,
        rule: AppliedRule::Statistical,
        y_phase,
        weight: implied_weight(value, y_phase, y_raw),
        multiplier: Some(multiplier),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Adjustment<T> {
    pub prior: T,
    pub value: T,
    pub weight: T,
    pub attempts_remaining: u8,
}

/// Re-blends the phase estimate and the raw prediction with a revised weight
/// after a trajectory contradiction.
pub fn adjust_correction<T: Scalar>(
    prior: T,
    verdict: &TrajectoryVerdict<T>,
    y_phase: T,
    y_raw: T,
    weight: T,
) -> Result<Adjustment<T>> {
    if verdict.verdict == Verdict::Consistent {
        return Err(Error::Contract(
            "adjust_correction called on a consistent trajectory".into(),
        ));
    }
    if verdict.attempts_remaining == 0 {
        return Err(Error::Contract(
            "adjust_correction called with no attempts remaining".into(),
        ));
    }
    let w = weight.max(T::zero()).min(T::one());
    Ok(Adjustment {
        prior,
        value: w * y_phase + (T::one() - w) * y_raw,
        weight: w,
        attempts_remaining: verdict.attempts_remaining - 1,
    })
}

/// Weight the rule policy picks for the next adjustment: halve the current
/// weight on a trend contradiction, 0.25 on a phase contradiction.
pub fn rule_adjust_weight<T: Scalar>(verdict: Verdict, previous_weight: T) -> T {
    match verdict {
        Verdict::TrendContradiction => previous_weight / lit(2.0),
        Verdict::PhaseContradiction => lit(0.25),
        Verdict::Consistent => previous_weight,
    }
}

#[cfg(test)]
mod tests {
    use super::super::Phase;
    use super::*;
    use proptest::prelude::*;

    fn phase(y_phase: f64, c: f64) -> PhaseEstimate<f64> {
        PhaseEstimate {
            phase: Phase::Ended,
            y_phase,
            confidence: c,
            decay_rate: None,
            active_window: None,
            trailing_zeros: 1,
            rule: String::new(),
        }
    }

    fn bias(g: f64) -> BiasEstimate<f64> {
        BiasEstimate { directional: true, gamma: g, gamma_decayed: g, ..BiasEstimate::neutral() }
    }

    fn breach(clamp: f64) -> RangeVerdict<f64> {
        RangeVerdict { in_range: false, clamped_value: Some(clamp), p10: -0.3, p90: 0.5, samples: 10, change: Some(2.0) }
    }

    #[test]
    fn physical_limit_supersedes_phase() {
        let (p, r) = (phase(0.0, 0.9), breach(150.0));
        let c = apply_correction(&CorrectionInputs { y_raw: 300.0, phase: Some(&p), bias: None, range: Some(&r), position_bias: 0.0 });
        assert_eq!(c.value, 150.0);
        assert_eq!(c.rule, AppliedRule::PhysicalLimit);
    }

    #[test]
    fn phase_blend() {
        let p = phase(0.0, 0.8);
        let c = apply_correction(&CorrectionInputs { y_raw: 10.0, phase: Some(&p), bias: None, range: None, position_bias: 0.0 });
        assert!((c.value - 2.0).abs() < 1e-12);
        assert_eq!(c.rule, AppliedRule::PhaseBlend);
        assert_eq!(c.weight, 0.8);
    }

    #[test]
    fn statistical_tier() {
        let (p, b) = (phase(10.0, 0.3), bias(1.2));
        let c = apply_correction(&CorrectionInputs { y_raw: 10.0, phase: Some(&p), bias: Some(&b), range: None, position_bias: 0.0 });
        assert!((c.value - 12.0).abs() < 1e-12);
        assert_eq!(c.rule, AppliedRule::Statistical);
    }

    #[test]
    fn statistical_multiplier_is_clamped() {
        let b = bias(5.0);
        let c = apply_correction(&CorrectionInputs { y_raw: 10.0, phase: None, bias: Some(&b), range: None, position_bias: 0.5 });
        assert_eq!(c.value, 20.0);
        let c = apply_correction(&CorrectionInputs { y_raw: 10.0, phase: None, bias: None, range: None, position_bias: -0.9 });
        assert_eq!(c.value, 5.0);
    }

    #[test]
    fn neutral_inputs_are_identity() {
        let c = apply_correction(&CorrectionInputs { y_raw: 7.5f32, phase: None, bias: None, range: None, position_bias: 0.0 });
        assert_eq!(c.value, 7.5);
        assert_eq!(c.rule, AppliedRule::Statistical);
    }

    fn verdict(v: Verdict, left: u8) -> TrajectoryVerdict<f64> {
        TrajectoryVerdict { verdict: v, lo: 0.0, hi: 1.0, slope: 0.0, attempts_remaining: left }
    }

    #[test]
    fn adjustment_blends() {
        let a = adjust_correction(2.0, &verdict(Verdict::TrendContradiction, 2), 0.0, 10.0, 0.5).unwrap();
        assert_eq!(a.value, 5.0);
        assert_eq!(a.attempts_remaining, 1);
        let a = adjust_correction(2.0, &verdict(Verdict::PhaseContradiction, 1), 0.0, 10.0, 0.0).unwrap();
        assert_eq!(a.value, 10.0);
        assert_eq!(a.attempts_remaining, 0);
    }

    #[test]
    fn adjustment_contract() {
        assert!(matches!(
            adjust_correction(2.0, &verdict(Verdict::TrendContradiction, 0), 0.0, 10.0, 0.5),
            Err(Error::Contract(_))
        ));
        assert!(matches!(
            adjust_correction(2.0, &verdict(Verdict::Consistent, 2), 0.0, 10.0, 0.5),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn rule_weights() {
        assert_eq!(rule_adjust_weight(Verdict::TrendContradiction, 0.8), 0.4);
        assert_eq!(rule_adjust_weight(Verdict::PhaseContradiction, 0.8), 0.25);
    }

    proptest! {
        #[test]
        fn blend_ignores_statistical_inputs(
            y_raw in 0.0f64..100.0, y_phase in 0.0f64..100.0, c in 0.5f64..=1.0, pb in -1.0f64..1.0,
        ) {
            let p = phase(y_phase, c);
            let neutral = apply_correction(&CorrectionInputs { y_raw, phase: Some(&p), bias: None, range: None, position_bias: 0.0 });
            let b = bias(5.0);
            let loud = apply_correction(&CorrectionInputs { y_raw, phase: Some(&p), bias: Some(&b), range: None, position_bias: pb });
            prop_assert_eq!(neutral, loud);
            prop_assert_eq!(loud.rule, AppliedRule::PhaseBlend);
        }
    }
}
