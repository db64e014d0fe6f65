use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{curve_features, CurveShapeFeatures, HarvestWindow};
use crate::error::{Error, Result};
use crate::ingest::{Entity, Split};
use crate::toolkit::{shape_vector, ShapeVector};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KgNode<T> {
    pub metadata: BTreeMap<String, String>,
    pub features: CurveShapeFeatures<T>,
    pub shape: ShapeVector<T>,
    pub zero_fraction_by_year: BTreeMap<i32, T>,
    /// Mean yield per ISO week across years.
    pub week_profile: BTreeMap<u32, T>,
}

/// Feature store of training entities, keyed by entity id.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KnowledgeGraph<T> {
    pub nodes: BTreeMap<String, KgNode<T>>,
}

impl<T> KnowledgeGraph<T> {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn contains(&self, entity_id: &str) -> bool {
        self.nodes.contains_key(entity_id)
    }
}

impl KnowledgeGraph<Real> {
    /// Median harvest window over all nodes that have one.
    pub fn typical_window(&self) -> Option<HarvestWindow> {
        let mut starts: Vec<u32> = Vec::new();
        let mut peaks: Vec<u32> = Vec::new();
        let mut ends: Vec<u32> = Vec::new();
        for w in self.nodes.values().filter_map(|n| n.features.harvest_window) {
            starts.push(w.start);
            peaks.push(w.peak);
            ends.push(w.end);
        }
        let mid = |mut v: Vec<u32>| -> Option<u32> {
            v.sort_unstable();
            v.get(v.len().checked_sub(1)? / 2).copied()
        };
        Some(HarvestWindow { start: mid(starts)?, peak: mid(peaks)?, end: mid(ends)? })
    }

    /// Mean of the node means; the reference level for "near zero".
    pub fn mean_level(&self) -> Real {
        if self.nodes.is_empty() {
            return 0.0;
        }
        self.nodes.values().map(|n| n.features.mean).sum::<Real>() / self.nodes.len() as Real
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

fn node(entity: &Entity) -> Result<KgNode<Real>> {
    let features = curve_features(entity)?;
    let values = entity.values();
    let mut years: BTreeMap<i32, (usize, usize)> = BTreeMap::new();
    let mut weeks: BTreeMap<u32, (Real, usize)> = BTreeMap::new();
    for o in &entity.observations {
        let y = years.entry(o.year).or_default();
        y.1 += 1;
        if o.yield_value <= 0.0 {
            y.0 += 1;
        }
        let w = weeks.entry(o.iso_week).or_default();
        w.0 += o.yield_value;
        w.1 += 1;
    }
    Ok(KgNode {
        metadata: entity.metadata.clone(),
        shape: shape_vector(&values),
        features,
        zero_fraction_by_year: years.into_iter().map(|(y, (z, n))| (y, z as Real / n as Real)).collect(),
        week_profile: weeks.into_iter().map(|(w, (s, n))| (w, s / n as Real)).collect(),
    })
}

/// Builds one node per training entity. Test entities are refused outright;
/// entities too short for curve features are skipped with a warning.
pub fn build_kg<'a>(train: impl IntoIterator<Item = &'a Entity>) -> Result<KnowledgeGraph<Real>> {
    let mut kg = KnowledgeGraph { nodes: BTreeMap::new() };
    let mut seen = 0usize;
    for entity in train {
        seen += 1;
        if entity.split != Split::Train {
            return Err(Error::Leakage(format!(
                "test entity {} offered to the knowledge graph",
                entity.entity_id
            )));
        }
        match node(entity) {
            Ok(n) => {
                kg.nodes.insert(entity.entity_id.clone(), n);
            }
            Err(e) => tracing::warn!("skipping {}: {e}", entity.entity_id),
        }
    }
    if seen == 0 {
        return Err(Error::config("no training entities to build the knowledge graph from"));
    }
    Ok(kg)
}
