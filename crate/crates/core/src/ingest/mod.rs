//! Weekly yield datasets: loading, differencing, normalization, synthesis,
//! and external baseline predictions.

mod csv_io;
mod synthetic;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::Real;

pub use csv_io::{
    load_external_predictions, load_long_csv, write_long_csv, write_predictions_csv, ColumnFilter,
    CsvSchema,
};
pub use synthetic::{generate_synthetic, Artifact, ArtifactEffect, ArtifactSpec, SeriesProfile, SyntheticSpec};

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    /// 0-based position in the entity's timeline.
    pub week_index: u32,
    pub iso_week: u32,
    pub year: i32,
    pub yield_value: Real,
    /// Set when the week was missing from the source and filled in.
    #[serde(default, skip_serializing_if = "is_false")]
    pub filled: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub entity_id: String,
    pub metadata: BTreeMap<String, String>,
    pub observations: Vec<Observation>,
    pub split: Split,
}

impl Entity {
    pub fn values(&self) -> Vec<Real> {
        self.observations.iter().map(|o| o.yield_value).collect()
    }

    pub fn observation(&self, week_index: u32) -> Option<&Observation> {
        // week_index is strictly increasing, so a binary search suffices.
        self.observations
            .binary_search_by_key(&week_index, |o| o.week_index)
            .ok()
            .map(|i| &self.observations[i])
    }

    pub fn max_yield(&self) -> Real {
        self.observations
            .iter()
            .map(|o| o.yield_value)
            .fold(0.0, Real::max)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntityCollection {
    pub entities: Vec<Entity>,
    pub dataset_name: String,
    /// Divisor applied by the last [`normalize`] call; 1.0 for raw data.
    pub normalization_scale: Real,
    /// Baseline-side anomalies resolved by the synthetic generator.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub artifacts: Vec<Artifact>,
}

impl EntityCollection {
    pub fn train(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.split == Split::Train)
    }

    pub fn test(&self) -> impl Iterator<Item = &Entity> {
        self.entities.iter().filter(|e| e.split == Split::Test)
    }

    pub fn get(&self, entity_id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.entity_id == entity_id)
    }

    /// Checks the collection invariants: unique ids, disjoint splits,
    /// strictly increasing week indices and non-negative yields.
    pub fn validate(&self) -> Result<()> {
        let mut ids = BTreeSet::new();
        for e in &self.entities {
            if !ids.insert(e.entity_id.as_str()) {
                return Err(Error::config(format!("duplicate entity id {}", e.entity_id)));
            }
            if e.split == Split::Train && e.observations.is_empty() {
                return Err(Error::config(format!(
                    "training entity {} has no observations",
                    e.entity_id
                )));
            }
            for pair in e.observations.windows(2) {
                if pair[1].week_index <= pair[0].week_index {
                    return Err(Error::config(format!(
                        "entity {}: week_index not strictly increasing at {}",
                        e.entity_id, pair[1].week_index
                    )));
                }
            }
            if let Some(o) = e.observations.iter().find(|o| !(o.yield_value >= 0.0)) {
                return Err(Error::config(format!(
                    "entity {}: negative or non-finite yield at week {}",
                    e.entity_id, o.week_index
                )));
            }
        }
        Ok(())
    }

    /// Artifacts attached to one entity and week.
    pub fn artifacts_at(&self, entity_id: &str, week_index: u32) -> Vec<Artifact> {
        self.artifacts
            .iter()
            .filter(|a| a.entity_id == entity_id && a.week_index.map_or(true, |w| w == week_index))
            .cloned()
            .collect()
    }
}

/// First differences of a cumulative series, floored at zero.
///
/// `output[0] = input[0]`; every later value is `max(0, input[t] - input[t-1])`.
pub fn difference_cumulative(series: &[Observation]) -> Vec<Observation> {
    let mut out = Vec::with_capacity(series.len());
    let mut prev: Option<Real> = None;
    for obs in series {
        let value = match prev {
            None => obs.yield_value,
            Some(p) => (obs.yield_value - p).max(0.0),
        };
        prev = Some(obs.yield_value);
        out.push(Observation {
            yield_value: value,
            ..*obs
        });
    }
    out
}

/// Max-scales every yield by the largest training value.
///
/// Test values may exceed 1.0 afterwards. Spike artifacts are scaled with
/// the data since they are yields too.
pub fn normalize(collection: &EntityCollection) -> Result<EntityCollection> {
    let scale = collection
        .train()
        .map(Entity::max_yield)
        .fold(0.0, Real::max);
    if !(scale > 0.0) {
        return Err(Error::config(
            "cannot normalize: training data contains no positive yield",
        ));
    }
    let mut out = collection.clone();
    for entity in &mut out.entities {
        for obs in &mut entity.observations {
            obs.yield_value /= scale;
        }
    }
    for artifact in &mut out.artifacts {
        if let ArtifactEffect::Spike { amount } = &mut artifact.effect {
            *amount /= scale;
        }
    }
    out.normalization_scale = scale;
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quantiles {
    pub q10: Real,
    pub q50: Real,
    pub q90: Real,
}

/// External baseline predictions keyed by `(entity_id, week_index)`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    rows: BTreeMap<(String, u32), Quantiles>,
}

impl PredictionTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, entity_id: &str, week_index: u32, q: Quantiles) -> Result<()> {
        if !(q.q10 <= q.q50 && q.q50 <= q.q90) {
            return Err(Error::Argument(format!(
                "quantiles out of order for ({entity_id}, {week_index}): {} {} {}",
                q.q10, q.q50, q.q90
            )));
        }
        self.rows.insert((entity_id.to_string(), week_index), q);
        Ok(())
    }

    pub fn get(&self, entity_id: &str, week_index: u32) -> Option<Quantiles> {
        self.rows.get(&(entity_id.to_string(), week_index)).copied()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32, &Quantiles)> {
        self.rows.iter().map(|((e, w), q)| (e.as_str(), *w, q))
    }
}
