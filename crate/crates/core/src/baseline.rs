//! Raw predictions: external quantile tables or the built-in windowed mean.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::{Artifact, ArtifactEffect, Entity, PredictionTable, Quantiles};
use crate::Real;

/// Weeks in the built-in context window.
pub const CONTEXT_WEEKS: u32 = 4;
/// Relative half-width of the built-in interval.
const BUILTIN_SPREAD: Real = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawPrediction {
    pub q50: Real,
    pub q10: Real,
    pub q90: Real,
    /// Prediction one week beyond the target.
    pub lookahead_q50: Real,
    pub horizon: u32,
}

impl RawPrediction {
    pub fn quantiles(&self) -> Quantiles {
        Quantiles { q10: self.q10, q50: self.q50, q90: self.q90 }
    }
}

#[derive(Clone, Copy, Debug)]
pub enum BaselineSource<'a> {
    Builtin,
    External(&'a PredictionTable),
}

/// Week indices of the context window `t-h-3 ..= t-h`, or `None` when the
/// target is too early to have one.
pub fn context_weeks(target_week: u32, horizon: u32) -> Option<std::ops::RangeInclusive<u32>> {
    let last = target_week.checked_sub(horizon)?;
    let first = last.checked_sub(CONTEXT_WEEKS - 1)?;
    Some(first..=last)
}

fn inject(mut q: Quantiles, artifacts: &[Artifact], week_index: u32) -> Quantiles {
    for a in artifacts.iter().filter(|a| a.week_index.map_or(true, |w| w == week_index)) {
        match a.effect {
            ArtifactEffect::Spike { amount } => {
                q.q10 += amount;
                q.q50 += amount;
                q.q90 += amount;
            }
            ArtifactEffect::Scale { factor } => {
                q.q10 *= factor;
                q.q50 *= factor;
                q.q90 *= factor;
            }
        }
    }
    q
}

fn builtin(entity: &Entity, target_week: u32, horizon: u32) -> Result<Quantiles> {
    let missing = || Error::Prediction { entity: entity.entity_id.clone(), week: target_week };
    let weeks = context_weeks(target_week, horizon).ok_or_else(missing)?;
    let mut sum = 0.0;
    for w in weeks {
        sum += entity.observation(w).ok_or_else(missing)?.yield_value;
    }
    let m = sum / CONTEXT_WEEKS as Real;
    Ok(Quantiles { q10: m * (1.0 - BUILTIN_SPREAD), q50: m, q90: m * (1.0 + BUILTIN_SPREAD) })
}

/// Raw prediction for `target_week` plus the one-week lookahead.
///
/// The built-in source averages the context window and shifts or scales the
/// result by any artifacts attached to the target (or lookahead) week. The
/// lookahead reuses the same context. External rows are returned untouched;
/// a missing lookahead row falls back to the target's median.
pub fn predict(
    entity: &Entity,
    target_week: u32,
    horizon: u32,
    source: BaselineSource<'_>,
    artifacts: &[Artifact],
) -> Result<RawPrediction> {
    let (q, lookahead) = match source {
        BaselineSource::Builtin => {
            let base = builtin(entity, target_week, horizon)?;
            let q = inject(base, artifacts, target_week);
            let ahead = inject(base, artifacts, target_week + 1);
            (q, ahead.q50)
        }
        BaselineSource::External(table) => {
            let q = table
                .get(&entity.entity_id, target_week)
                .ok_or_else(|| Error::Prediction { entity: entity.entity_id.clone(), week: target_week })?;
            let ahead = match table.get(&entity.entity_id, target_week + 1) {
                Some(a) => a.q50,
                None => {
                    tracing::debug!(entity = %entity.entity_id, target_week, "no lookahead row; reusing target median");
                    q.q50
                }
            };
            (q, ahead)
        }
    };
    Ok(RawPrediction { q50: q.q50, q10: q.q10, q90: q.q90, lookahead_q50: lookahead, horizon })
}
