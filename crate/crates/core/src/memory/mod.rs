//! Cross-plot memory: position-bias table, plot archive, jump-distribution
//! guardrails and strategy directives. The runner is the only writer.

mod archive;
mod bias_table;
mod jumps;
mod reflect;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agent::ReasonerPolicy;
use crate::error::{Error, Result};
use crate::toolkit::ShapeVector;
use crate::Real;

pub use archive::{ArchivedPlot, Outcome, PlotArchive};
pub use bias_table::{decile, BiasDigest, BiasSource, PositionBiasTable};
pub use jumps::{jump_distribution, JumpDistribution};
pub use reflect::{parse_directives, reflect, render_reflection, summarize, Directive, MetaDirectives, ReflectionSummary, ToolImpact, REFLECTION_HEADER};

/// Default number of archive commits between reflections.
pub const REFLECTION_INTERVAL: u64 = 10;

/// Whether all test plots share one position-bias table.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasScope {
    #[default]
    Shared,
    PerPlot,
}

#[derive(Clone, Debug)]
pub struct MemoryStore {
    pub scope: BiasScope,
    pub reflection_interval: u64,
    pub jumps: JumpDistribution<Real>,
    pub archive: PlotArchive,
    pub directives: MetaDirectives,
    shared: PositionBiasTable,
    per_plot: BTreeMap<String, PositionBiasTable>,
    confirmed: BTreeMap<String, u32>,
    pending: Vec<Outcome>,
    commits: u64,
    bias_through: Option<u32>,
}

impl MemoryStore {
    pub fn new(jumps: JumpDistribution<Real>, scope: BiasScope, reflection_interval: u64) -> Self {
        MemoryStore {
            scope,
            reflection_interval: reflection_interval.max(1),
            jumps,
            archive: PlotArchive::default(),
            directives: MetaDirectives::default(),
            shared: PositionBiasTable::default(),
            per_plot: BTreeMap::new(),
            confirmed: BTreeMap::new(),
            pending: Vec::new(),
            commits: 0,
            bias_through: None,
        }
    }

    /// Records the confirmed error of an earlier prediction. `source_week`
    /// is the week index of the actual. The actual counts towards the
    /// entity's eligibility even when `predicted` is not positive and no
    /// error can be stored.
    pub fn record_lagged_error(
        &mut self,
        entity_id: &str,
        iso_week: u32,
        progress: Real,
        predicted: Real,
        actual: Real,
        source_week: u32,
    ) -> Option<Real> {
        *self.confirmed.entry(entity_id.to_string()).or_default() += 1;
        let table = match self.scope {
            BiasScope::Shared => &mut self.shared,
            BiasScope::PerPlot => self.per_plot.entry(entity_id.to_string()).or_default(),
        };
        let err = table.record(iso_week, progress, predicted, actual);
        match err {
            Some(_) => self.bias_through = Some(self.bias_through.map_or(source_week, |w| w.max(source_week))),
            None => tracing::debug!(entity_id, source_week, "non-positive prediction; bias entry skipped"),
        }
        err
    }

    pub fn confirmed_actuals(&self, entity_id: &str) -> u32 {
        self.confirmed.get(entity_id).copied().unwrap_or(0)
    }

    pub fn table(&self, entity_id: &str) -> Option<&PositionBiasTable> {
        match self.scope {
            BiasScope::Shared => Some(&self.shared),
            BiasScope::PerPlot => self.per_plot.get(entity_id),
        }
    }

    pub fn bias_digest(&self, entity_id: &str, iso_week: u32, progress: Real) -> BiasDigest {
        match self.table(entity_id) {
            Some(t) => t.digest(iso_week, progress),
            None => PositionBiasTable::default().digest(iso_week, progress),
        }
    }

    pub fn position_bias(&self, entity_id: &str, iso_week: u32, progress: Real) -> Real {
        self.bias_digest(entity_id, iso_week, progress).value
    }

    /// Highest source week of any stored bias entry.
    pub fn bias_through(&self) -> Option<u32> {
        self.bias_through
    }

    /// Commits a plot's latest partial curve. Returns whether a reflection is due.
    pub fn archive_plot(&mut self, entity_id: &str, shape: ShapeVector<Real>, through_week: u32, outcomes: Vec<Outcome>) -> bool {
        self.archive.upsert(entity_id, shape, through_week, outcomes);
        self.commits += 1;
        self.commits % self.reflection_interval == 0
    }

    pub fn commits(&self) -> u64 {
        self.commits
    }

    /// Queues a confirmed outcome for the next reflection.
    pub fn confirm_outcome(&mut self, outcome: Outcome) {
        self.pending.push(outcome);
    }

    /// Reflects over the outcomes confirmed since the previous reflection.
    pub fn reflect(&mut self, policy: &mut dyn ReasonerPolicy) -> Vec<Directive> {
        let window = std::mem::take(&mut self.pending);
        reflect(&window, policy, &mut self.directives, self.commits)
    }

    /// Writes the memory contents as JSON lines of `{record, key, payload}`.
    pub fn dump(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        let mut line = |record: &str, key: String, payload: serde_json::Value| -> Result<()> {
            serde_json::to_writer(&mut out, &json!({ "record": record, "key": key, "payload": payload }))?;
            out.push(b'\n');
            Ok(())
        };
        line("jump_distribution", "train".into(), serde_json::to_value(self.jumps)?)?;
        let mut tables: Vec<(String, &PositionBiasTable)> = vec![("shared".into(), &self.shared)];
        tables.extend(self.per_plot.iter().map(|(k, t)| (k.clone(), t)));
        for (scope, t) in tables {
            for (w, d, errs) in t.entries() {
                line("position_bias", format!("{scope}/{w}/{d}"), json!(errs))?;
            }
        }
        for (id, p) in &self.archive.plots {
            line("plot_history", id.clone(), serde_json::to_value(p)?)?;
        }
        for d in self.directives.entries() {
            line("directive", d.created.to_string(), serde_json::to_value(d)?)?;
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::file(path, e))?;
        f.write_all(&out).map_err(|e| Error::file(path, e))
    }
}
