//! Per-entity curve geometry, growth-pattern classification, the training
//! knowledge graph, and dataset profiling.

mod kg;
mod profile;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Entity;
use crate::scalar::{count, lit, mean, std_dev, Scalar};
use crate::Real;

pub use kg::{build_kg, KgNode, KnowledgeGraph};
pub use profile::{heuristic_profile, parse_profile_reply, profile_dataset, DatasetProfile, ProfileEvidence, ProfileKind, ProfileSource};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GrowthPattern {
    PeakMiddle,
    Increasing,
    Decreasing,
    Flat,
}

impl GrowthPattern {
    pub fn as_str(self) -> &'static str {
        match self {
            GrowthPattern::PeakMiddle => "peak_middle",
            GrowthPattern::Increasing => "increasing",
            GrowthPattern::Decreasing => "decreasing",
            GrowthPattern::Flat => "flat",
        }
    }
}

/// Start, peak and end ISO week of the harvest season.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HarvestWindow {
    pub start: u32,
    pub peak: u32,
    pub end: u32,
}

impl HarvestWindow {
    /// Position of `iso_week` inside the window, clamped to [0, 1].
    pub fn progress(&self, iso_week: u32) -> Real {
        if self.end <= self.start {
            return if iso_week >= self.end { 1.0 } else { 0.0 };
        }
        let p = (iso_week as Real - self.start as Real) / (self.end as Real - self.start as Real);
        p.clamp(0.0, 1.0)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveShapeFeatures<T> {
    pub mean: T,
    pub std: T,
    pub cv: T,
    pub volatility: T,
    pub peak_position: T,
    pub zero_fraction: T,
    pub early_mean: T,
    pub mid_mean: T,
    pub late_mean: T,
    pub growth_pattern: GrowthPattern,
    /// Absent when the series never leaves zero.
    pub harvest_window: Option<HarvestWindow>,
}

pub fn classify_growth_pattern<T: Scalar>(early: T, mid: T, late: T) -> GrowthPattern {
    let up: T = lit(1.1);
    let down: T = lit(0.9);
    if mid > up * early && mid > up * late {
        GrowthPattern::PeakMiddle
    } else if late > up * early {
        GrowthPattern::Increasing
    } else if late < down * early {
        GrowthPattern::Decreasing
    } else {
        GrowthPattern::Flat
    }
}

/// Index bounds of the three thirds; the last third takes the remainder.
pub fn thirds(n: usize) -> [std::ops::Range<usize>; 3] {
    let a = n / 3;
    let b = 2 * n / 3;
    [0..a, a..b, b..n]
}

fn lower_median(mut v: Vec<u32>) -> Option<u32> {
    if v.is_empty() {
        return None;
    }
    v.sort_unstable();
    Some(v[(v.len() - 1) / 2])
}

/// Harvest window from `(year, iso_week, value)` triples. Each year
/// contributes its first and last non-zero week and the week of its
/// maximum; years combine by the (lower) median.
pub fn harvest_window<T: Scalar>(points: &[(i32, u32, T)]) -> Option<HarvestWindow> {
    let mut by_year: BTreeMap<i32, Vec<(u32, T)>> = BTreeMap::new();
    for &(year, week, v) in points {
        by_year.entry(year).or_default().push((week, v));
    }
    let (mut starts, mut peaks, mut ends) = (Vec::new(), Vec::new(), Vec::new());
    for weeks in by_year.values() {
        let nonzero: Vec<&(u32, T)> = weeks.iter().filter(|(_, v)| *v > T::zero()).collect();
        let (Some(first), Some(last)) = (nonzero.first(), nonzero.last()) else {
            continue;
        };
        let mut peak = *first;
        for p in &nonzero {
            if p.1 > peak.1 {
                peak = p;
            }
        }
        starts.push(first.0);
        peaks.push(peak.0);
        ends.push(last.0);
    }
    Some(HarvestWindow {
        start: lower_median(starts)?,
        peak: lower_median(peaks)?,
        end: lower_median(ends)?,
    })
}

/// Table of curve features for one series. `points` carries the calendar
/// stamp of every value and is only used for the harvest window.
pub fn series_features<T: Scalar>(values: &[T], points: &[(i32, u32, T)]) -> Option<CurveShapeFeatures<T>> {
    let n = values.len();
    if n < 3 {
        return None;
    }
    let zero = T::zero();
    let m = mean(values)?;
    let sd = std_dev(values)?;
    let diffs: Vec<T> = values.windows(2).map(|w| w[1] - w[0]).collect();
    let mut i_peak = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[i_peak] {
            i_peak = i;
        }
    }
    let positive = values.iter().filter(|&&v| v > zero).count();
    let [a, b, c] = thirds(n);
    let third_mean = |r: std::ops::Range<usize>| mean(&values[r]).unwrap_or(zero);
    let (early, mid, late) = (third_mean(a), third_mean(b), third_mean(c));
    Some(CurveShapeFeatures {
        mean: m,
        std: sd,
        cv: if m == zero { zero } else { sd / m },
        volatility: std_dev(&diffs).unwrap_or(zero),
        peak_position: count::<T>(i_peak) / count(n),
        zero_fraction: T::one() - count::<T>(positive) / count(n),
        early_mean: early,
        mid_mean: mid,
        late_mean: late,
        growth_pattern: classify_growth_pattern(early, mid, late),
        harvest_window: harvest_window(points),
    })
}

pub fn curve_features(entity: &Entity) -> Result<CurveShapeFeatures<Real>> {
    let values = entity.values();
    let points: Vec<(i32, u32, Real)> = entity
        .observations
        .iter()
        .map(|o| (o.year, o.iso_week, o.yield_value))
        .collect();
    series_features(&values, &points).ok_or_else(|| Error::Feature {
        entity: entity.entity_id.clone(),
        message: format!("need at least 3 observations, found {}", values.len()),
    })
}
