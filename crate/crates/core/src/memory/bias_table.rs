use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::scalar::median;
use crate::Real;

/// Progress decile 0..=9.
pub fn decile(progress: Real) -> u8 {
    ((progress.clamp(0.0, 1.0) * 10.0).floor() as u8).min(9)
}

/// Signed fractional errors `(actual - predicted) / predicted` bucketed by
/// ISO week and season-progress decile.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PositionBiasTable {
    /// iso_week -> decile -> errors in recording order.
    buckets: BTreeMap<u32, BTreeMap<u8, Vec<Real>>>,
}

/// How a bias figure was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasSource {
    Bucket,
    Decile,
    Empty,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasDigest {
    pub iso_week: u32,
    pub decile: u8,
    pub bucket_entries: usize,
    pub decile_entries: usize,
    pub total_entries: usize,
    pub value: Real,
    pub source: BiasSource,
}

impl PositionBiasTable {
    /// Appends the fractional error; returns it, or `None` when `predicted` is not positive.
    pub fn record(&mut self, iso_week: u32, progress: Real, predicted: Real, actual: Real) -> Option<Real> {
        if predicted <= 0.0 {
            return None;
        }
        let err = (actual - predicted) / predicted;
        self.buckets
            .entry(iso_week)
            .or_default()
            .entry(decile(progress))
            .or_default()
            .push(err);
        Some(err)
    }

    pub fn bucket(&self, iso_week: u32, progress: Real) -> &[Real] {
        self.buckets
            .get(&iso_week)
            .and_then(|d| d.get(&decile(progress)))
            .map_or(&[], |v| v.as_slice())
    }

    fn decile_pool(&self, d: u8) -> Vec<Real> {
        self.buckets
            .values()
            .filter_map(|m| m.get(&d))
            .flat_map(|v| v.iter().copied())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.buckets.values().flat_map(|m| m.values()).map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Median of the matching bucket, else of the same decile across all
    /// weeks, else 0.
    pub fn position_bias(&self, iso_week: u32, progress: Real) -> Real {
        self.digest(iso_week, progress).value
    }

    pub fn digest(&self, iso_week: u32, progress: Real) -> BiasDigest {
        let d = decile(progress);
        let bucket = self.bucket(iso_week, progress);
        let pool = self.decile_pool(d);
        let (value, source) = if let Some(m) = median(bucket) {
            (m, BiasSource::Bucket)
        } else if let Some(m) = median(&pool) {
            (m, BiasSource::Decile)
        } else {
            (0.0, BiasSource::Empty)
        };
        BiasDigest {
            iso_week,
            decile: d,
            bucket_entries: bucket.len(),
            decile_entries: pool.len(),
            total_entries: self.len(),
            value,
            source,
        }
    }

    /// `(iso_week, decile, errors)` in key order.
    pub fn entries(&self) -> impl Iterator<Item = (u32, u8, &[Real])> {
        self.buckets
            .iter()
            .flat_map(|(&w, m)| m.iter().map(move |(&d, v)| (w, d, v.as_slice())))
    }
}
