use serde::{Deserialize, Serialize};

use super::bias::trailing_zeros;
use crate::features::ProfileKind;
use crate::scalar::{lit, mean, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    PreSeason,
    FalseStart,
    Early,
    Ramping,
    Peak,
    Declining,
    Ended,
    TrendingUp,
    TrendingDown,
    Stable,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::PreSeason => "pre_season",
            Phase::FalseStart => "false_start",
            Phase::Early => "early",
            Phase::Ramping => "ramping",
            Phase::Peak => "peak",
            Phase::Declining => "declining",
            Phase::Ended => "ended",
            Phase::TrendingUp => "trending_up",
            Phase::TrendingDown => "trending_down",
            Phase::Stable => "stable",
        }
    }

    /// Off-season phases in which a zero-valley crop cannot yield.
    pub fn is_dormant(self) -> bool {
        matches!(self, Phase::PreSeason | Phase::FalseStart | Phase::Ended)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseEstimate<T> {
    pub phase: Phase,
    pub y_phase: T,
    pub confidence: T,
    pub decay_rate: Option<T>,
    pub active_window: Option<u32>,
    pub trailing_zeros: u32,
    /// Which branch fired, kept so the boundary decisions are auditable.
    pub rule: String,
}

#[derive(Clone, Copy, Debug)]
pub struct PhaseInputs<'a, T> {
    /// Last observed yields (normally four), oldest first.
    pub recent: &'a [T],
    pub y_hat: T,
    pub horizon: u32,
    /// Baseline prediction one week beyond the target.
    pub lookahead: T,
    /// Every observed yield of the current series up to the information cutoff.
    pub history: &'a [T],
    pub profile: ProfileKind,
    /// Decline projections below this are floored to zero.
    pub zero_floor: T,
    /// Lookahead values below this count as near zero for false-start detection.
    pub near_zero: T,
}

pub fn detect_phase<T: Scalar>(inp: &PhaseInputs<'_, T>) -> PhaseEstimate<T> {
    match inp.profile {
        ProfileKind::ZeroValley => seasonal(inp),
        ProfileKind::PositiveFloor => continuous(inp),
    }
}

fn estimate<T: Scalar>(phase: Phase, y_phase: T, confidence: f64, k: u32, rule: String) -> PhaseEstimate<T> {
    PhaseEstimate {
        phase,
        y_phase,
        confidence: lit(confidence),
        decay_rate: None,
        active_window: None,
        trailing_zeros: k,
        rule,
    }
}

fn seasonal<T: Scalar>(inp: &PhaseInputs<'_, T>) -> PhaseEstimate<T> {
    let zero = T::zero();
    let history = inp.history;
    let nonzero: Vec<usize> = history
        .iter()
        .enumerate()
        .filter(|(_, v)| **v > zero)
        .map(|(i, _)| i)
        .collect();
    let k = trailing_zeros(history);

    let (Some(&first), Some(&last)) = (nonzero.first(), nonzero.last()) else {
        if inp.y_hat > zero && inp.lookahead < inp.near_zero {
            return estimate(Phase::FalseStart, zero, 0.85, k, "no yield yet; positive prediction with near-zero lookahead".into());
        }
        return estimate(Phase::PreSeason, zero, 0.90, k, "no non-zero yield observed".into());
    };

    let y_l = history[last];
    if k >= 1 {
        let c = (0.75 + 0.05 * k as f64).min(0.95);
        return estimate(Phase::Ended, zero, c, k, format!("{k} trailing zero week(s) after last yield"));
    }
    if nonzero.len() == 1 {
        return estimate(Phase::Early, inp.y_hat.max(y_l), 0.35, k, "single non-zero week".into());
    }

    let mut i_peak = first;
    for &i in &nonzero {
        if history[i] > history[i_peak] {
            i_peak = i;
        }
    }
    let y_peak = history[i_peak];
    let ratio = y_l / y_peak;
    let step_down = last >= 1 && y_l <= history[last - 1];

    if ratio >= lit(0.9) {
        return estimate(Phase::Peak, inp.y_hat, 0.40, k, format!("last/peak = {ratio:.4} >= 0.9"));
    }
    if !step_down {
        return estimate(Phase::Ramping, inp.y_hat, 0.0, k, format!("last/peak = {ratio:.4} < 0.9 with rising last step"));
    }

    let elapsed = (last - i_peak).max(1) as i32;
    let delta = ratio.powf(T::one() / T::from_i32(elapsed).unwrap_or_else(T::one));
    let mut y_phase = y_l * delta.powi(inp.horizon as i32);
    if y_phase < inp.zero_floor {
        y_phase = zero;
    }
    let active = (last - first + 1) as u32;
    let c = (0.4 + 0.1 * active as f64).min(0.85);
    PhaseEstimate {
        phase: Phase::Declining,
        y_phase,
        confidence: lit(c),
        decay_rate: Some(delta),
        active_window: Some(active),
        trailing_zeros: k,
        rule: format!("last/peak = {ratio:.4} < 0.9 with non-increasing last step"),
    }
}

fn continuous<T: Scalar>(inp: &PhaseInputs<'_, T>) -> PhaseEstimate<T> {
    let zero = T::zero();
    let recent = inp.recent;
    let k = trailing_zeros(inp.history);
    if recent.len() < 2 {
        return estimate(Phase::Stable, inp.y_hat, 0.0, k, "fewer than two recent weeks".into());
    }
    let half = recent.len() / 2;
    let first = mean(&recent[..half]).unwrap_or(zero);
    let second = mean(&recent[half..]).unwrap_or(zero);
    let change = if first == zero {
        if second == zero {
            zero
        } else {
            (second - first).signum()
        }
    } else {
        (second - first) / first.abs()
    };
    let phase = if change > lit(0.10) {
        Phase::TrendingUp
    } else if change < lit(-0.10) {
        Phase::TrendingDown
    } else {
        Phase::Stable
    };
    PhaseEstimate {
        phase,
        y_phase: inp.y_hat,
        confidence: (change.abs() / lit(0.4)).min(lit(0.75)),
        decay_rate: None,
        active_window: None,
        trailing_zeros: k,
        rule: format!("half-window change = {change:.4}"),
    }
}
