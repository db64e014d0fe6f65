use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::toolkit::{Phase, ShapeVector, ToolName};
use crate::Real;

/// What one prediction did, kept for archiving and reflection.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    pub entity_id: String,
    pub week_index: u32,
    pub phase: Option<Phase>,
    pub tools: Vec<ToolName>,
    pub y_raw: Real,
    pub y_final: Real,
    /// Filled in once the actual is confirmed.
    pub actual: Option<Real>,
}

impl Outcome {
    /// Whether the correction moved the value and ended further from the actual.
    pub fn worsened(&self) -> Option<bool> {
        let a = self.actual?;
        Some((self.y_final - a).abs() > (self.y_raw - a).abs())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ArchivedPlot {
    pub shape: ShapeVector<Real>,
    /// Last week index of the archived partial curve.
    pub through_week: u32,
    pub outcomes: Vec<Outcome>,
    pub mae_raw: Option<Real>,
    pub mae_corrected: Option<Real>,
}

/// Latest partial curve of each processed test plot.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlotArchive {
    pub plots: BTreeMap<String, ArchivedPlot>,
}

impl PlotArchive {
    /// Inserts or replaces the entry for `entity_id`.
    pub fn upsert(&mut self, entity_id: &str, shape: ShapeVector<Real>, through_week: u32, outcomes: Vec<Outcome>) {
        let confirmed: Vec<&Outcome> = outcomes.iter().filter(|o| o.actual.is_some()).collect();
        let mae = |f: fn(&Outcome) -> Real| -> Option<Real> {
            if confirmed.is_empty() {
                return None;
            }
            Some(confirmed.iter().map(|o| (f(o) - o.actual.unwrap_or(0.0)).abs()).sum::<Real>() / confirmed.len() as Real)
        };
        let mae_raw = mae(|o| o.y_raw);
        let mae_corrected = mae(|o| o.y_final);
        self.plots.insert(
            entity_id.to_string(),
            ArchivedPlot { shape, through_week, outcomes, mae_raw, mae_corrected },
        );
    }

    pub fn len(&self) -> usize {
        self.plots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plots.is_empty()
    }

    /// Archived shapes other than `exclude`'s own entry.
    pub fn corpus<'a>(&'a self, exclude: &'a str) -> impl Iterator<Item = (&'a str, &'a ShapeVector<Real>)> + 'a {
        self.plots
            .iter()
            .filter(move |(id, _)| id.as_str() != exclude)
            .map(|(id, p)| (id.as_str(), &p.shape))
    }

    /// Highest week index any archived curve reaches.
    pub fn through_week(&self) -> Option<u32> {
        self.plots.values().map(|p| p.through_week).max()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::toolkit::shape_vector;

    #[test]
    fn upsert_replaces() {
        let mut a = PlotArchive::default();
        a.upsert("p1", shape_vector(&[0.0, 1.0]), 3, vec![]);
        a.upsert("p1", shape_vector(&[0.0, 1.0, 2.0]), 4, vec![]);
        assert_eq!(a.len(), 1);
        assert_eq!(a.plots["p1"].through_week, 4);
        assert_eq!(a.plots["p1"].mae_raw, None);
        a.upsert("p2", shape_vector(&[1.0, 1.0]), 4, vec![]);
        assert_eq!(a.corpus("p1").count(), 1);
    }

    #[test]
    fn mae_over_confirmed_outcomes() {
        let o = |raw: Real, fin: Real, act: Option<Real>| Outcome {
            entity_id: "p".into(),
            week_index: 7,
            phase: None,
            tools: vec![],
            y_raw: raw,
            y_final: fin,
            actual: act,
        };
        let mut a = PlotArchive::default();
        a.upsert("p", shape_vector(&[1.0]), 5, vec![o(4.0, 2.0, Some(1.0)), o(2.0, 2.0, Some(2.0)), o(9.0, 9.0, None)]);
        let p = &a.plots["p"];
        assert_eq!(p.mae_raw, Some(1.5));
        assert_eq!(p.mae_corrected, Some(0.5));
        assert_eq!(o(4.0, 2.0, Some(1.0)).worsened(), Some(false));
        assert_eq!(o(4.0, 6.0, Some(4.5)).worsened(), Some(true));
    }
}
