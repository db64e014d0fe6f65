use serde::{Deserialize, Serialize};

use super::Phase;
use crate::scalar::{lit, Scalar};

/// Adjustment attempts allowed per prediction.
pub const MAX_ADJUSTMENTS: u8 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Consistent,
    TrendContradiction,
    PhaseContradiction,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Consistent => "consistent",
            Verdict::TrendContradiction => "trend_contradiction",
            Verdict::PhaseContradiction => "phase_contradiction",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryVerdict<T> {
    pub verdict: Verdict,
    pub lo: T,
    pub hi: T,
    pub slope: T,
    pub attempts_remaining: u8,
}

/// Direction a phase implies for the next weeks: +1 rising, -1 falling, 0 none.
fn expected_direction(phase: Phase) -> i8 {
    match phase {
        Phase::Ramping | Phase::TrendingUp => 1,
        Phase::Declining | Phase::TrendingDown | Phase::Ended | Phase::PreSeason | Phase::FalseStart => -1,
        Phase::Early | Phase::Peak | Phase::Stable => 0,
    }
}

/// Projects a plausible band from the last three observations and checks
/// the corrected value against it and against the phase direction.
///
/// `last3` is oldest first. With fewer than three observations the verdict is
/// consistent. The direction of a correction is the sign of `y_star - y_raw`;
/// without a phase estimate only the band is checked.
pub fn evaluate_trajectory<T: Scalar>(
    y_star: T,
    y_raw: T,
    last3: &[T],
    phase: Option<Phase>,
    attempts_remaining: u8,
) -> TrajectoryVerdict<T> {
    let zero = T::zero();
    if last3.len() < 3 {
        return TrajectoryVerdict {
            verdict: Verdict::Consistent,
            lo: zero,
            hi: zero,
            slope: zero,
            attempts_remaining,
        };
    }
    let w = &last3[last3.len() - 3..];
    let (y_old, y_t) = (w[0], w[2]);
    let w_bar = (w[0] + w[1] + w[2]) / lit(3.0);
    let slope = if w_bar == zero { zero } else { (y_t - y_old) / (lit::<T>(2.0) * w_bar) };
    let projected = y_t * (T::one() + slope);
    let lo = lit::<T>(0.7) * y_t.min(projected);
    let hi = lit::<T>(1.3) * y_t.max(projected);

    let moved: i8 = if y_star > y_raw {
        1
    } else if y_star < y_raw {
        -1
    } else {
        0
    };
    let expected = phase.map_or(0, expected_direction);
    let verdict = if moved != 0 && expected != 0 && moved != expected {
        Verdict::PhaseContradiction
    } else if y_star < lo || y_star > hi {
        Verdict::TrendContradiction
    } else {
        Verdict::Consistent
    };
    TrajectoryVerdict { verdict, lo, hi, slope, attempts_remaining }
}
