//! The lockstep week-by-week correction run.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::agent::{
    assemble_state, run_react, CorrectionRecord, ReasonerPolicy, RemoteConfig, RemotePolicy, RulePolicy, SeasonContext,
    ToolEnv,
};
use crate::baseline::{context_weeks, predict, BaselineSource};
use crate::error::{Error, Result};
use crate::evaluation::{self, naive_scale, MetricTriple, PlotImprovement, ToolUsage};
use crate::features::{build_kg, profile_dataset, DatasetProfile, KnowledgeGraph};
use crate::ingest::{
    generate_synthetic, load_external_predictions, load_long_csv, normalize, CsvSchema, Entity, EntityCollection,
    PredictionTable, Quantiles, SyntheticSpec,
};
use crate::memory::{jump_distribution, BiasScope, Directive, JumpDistribution, MemoryStore, Outcome, REFLECTION_INTERVAL};
use crate::selection::{rank_training_plots, SimilarityRanking};
use crate::toolkit::{shape_vector, ToolName};
use crate::Real;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Long-format CSV; ignored when `synthetic` is set.
    pub path: Option<PathBuf>,
    pub schema: CsvSchema,
    pub synthetic: Option<SyntheticSpec>,
    /// Divide every yield by the training maximum.
    pub normalize: bool,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { path: None, schema: CsvSchema::default(), synthetic: None, normalize: true }
    }
}

/// Units of an external prediction file.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictionUnits {
    /// Same units as the dataset CSV; divided by the normalization scale on load.
    #[default]
    Raw,
    Normalized,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    /// External quantile predictions; the built-in windowed mean when absent.
    pub predictions: Option<PathBuf>,
    pub units: PredictionUnits,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    #[default]
    Rule,
    Remote,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub kind: PolicyKind,
    pub remote: RemoteConfig,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    /// Directory for `records.jsonl` and `summary.json`.
    pub dir: Option<PathBuf>,
    pub selection_cache: Option<PathBuf>,
    /// Also write `memory.jsonl` with the final memory contents.
    pub memory_dump: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    pub baseline: BaselineConfig,
    pub policy: PolicyConfig,
    pub horizon: u32,
    /// Training entities kept by DTW selection.
    pub k: usize,
    pub disabled_tools: Vec<ToolName>,
    pub reflection_interval: u64,
    pub bias_scope: BiasScope,
    /// Seed for profiling samples.
    pub seed: u64,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: DatasetConfig::default(),
            baseline: BaselineConfig::default(),
            policy: PolicyConfig::default(),
            horizon: 2,
            k: 50,
            disabled_tools: Vec::new(),
            reflection_interval: REFLECTION_INTERVAL,
            bias_scope: BiasScope::Shared,
            seed: 7,
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("config: {e}")))
    }

    pub fn enabled_tools(&self) -> BTreeSet<ToolName> {
        ToolName::ALL.into_iter().filter(|t| !self.disabled_tools.contains(t)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(Error::config("horizon must be at least 1"));
        }
        if self.k == 0 {
            return Err(Error::config("k must be at least 1"));
        }
        if self.dataset.synthetic.is_none() && self.dataset.path.is_none() {
            return Err(Error::config("no dataset: set dataset.path or dataset.synthetic"));
        }
        Ok(())
    }
}

/// Loads (or generates) the dataset and applies normalization when configured.
pub fn load_dataset(cfg: &DatasetConfig) -> Result<EntityCollection> {
    let raw = match (&cfg.synthetic, &cfg.path) {
        (Some(spec), _) => generate_synthetic(spec),
        (None, Some(path)) => load_long_csv(path, &cfg.schema)?,
        (None, None) => return Err(Error::config("no dataset: set dataset.path or dataset.synthetic")),
    };
    raw.validate()?;
    if cfg.normalize {
        normalize(&raw)
    } else {
        Ok(raw)
    }
}

pub fn build_policy(cfg: &PolicyConfig) -> Result<Box<dyn ReasonerPolicy + Send>> {
    Ok(match cfg.kind {
        PolicyKind::Rule => Box::new(RulePolicy),
        PolicyKind::Remote => Box::new(RemotePolicy::new(cfg.remote.clone())?),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SkippedPrediction {
    pub entity_id: String,
    pub week_index: u32,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetSummary {
    pub name: String,
    pub normalization_scale: Real,
    pub train_entities: usize,
    pub test_entities: usize,
    pub kg_nodes: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub raw: MetricTriple<Real>,
    pub corrected: MetricTriple<Real>,
}

/// Everything but the per-prediction records.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: RunConfig,
    pub dataset: DatasetSummary,
    pub profile: DatasetProfile,
    pub selection: SimilarityRanking,
    pub naive_scale: Real,
    pub records: usize,
    pub skipped: Vec<SkippedPrediction>,
    pub metrics: Option<MetricPair>,
    pub per_entity: Vec<PlotImprovement>,
    pub tool_usage: ToolUsage,
    pub directives: Vec<Directive>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub summary: RunSummary,
    pub records: Vec<CorrectionRecord>,
}

impl RunReport {
    pub fn records_jsonl(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.push(b'\n');
        }
        Ok(out)
    }

    pub fn summary_json(&self) -> Result<Vec<u8>> {
        let mut out = serde_json::to_vec_pretty(&self.summary)?;
        out.push(b'\n');
        Ok(out)
    }

    /// Writes `records.jsonl` and `summary.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
        for (name, body) in [("records.jsonl", self.records_jsonl()?), ("summary.json", self.summary_json()?)] {
            let path = dir.join(name);
            let mut f = std::fs::File::create(&path).map_err(|e| Error::file(&path, e))?;
            f.write_all(&body).map_err(|e| Error::file(&path, e))?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let read = |name: &str| {
            let path = dir.join(name);
            std::fs::read_to_string(&path).map_err(|e| Error::file(&path, e))
        };
        let summary: RunSummary = serde_json::from_str(&read("summary.json")?)?;
        let records = read("records.jsonl")?
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<Vec<CorrectionRecord>, _>>()?;
        Ok(RunReport { summary, records })
    }
}

/// Checks that no record used information from inside the horizon gap:
/// actuals and bias entries must be at least `horizon` weeks old, archived
/// curves must end before the target week, and the baseline context must
/// end at the cutoff.
pub fn audit_leakage(report: &RunReport) -> Result<()> {
    for r in &report.records {
        let cutoff = r.target_week.checked_sub(r.horizon);
        let late = |w: Option<u32>| match (w, cutoff) {
            (None, _) => false,
            (Some(_), None) => true,
            (Some(w), Some(c)) => w > c,
        };
        let fail = |what: &str, w: Option<u32>| {
            Err(Error::Leakage(format!(
                "{} week {}: {what} from week {:?}, cutoff {:?}",
                r.entity_id, r.target_week, w, cutoff
            )))
        };
        if late(r.provenance.actuals_through) {
            return fail("actuals", r.provenance.actuals_through);
        }
        if late(r.provenance.bias_through) {
            return fail("position bias", r.provenance.bias_through);
        }
        if r.provenance.archive_through.is_some_and(|w| w >= r.target_week) || late(r.provenance.archive_through) {
            return fail("archived curve", r.provenance.archive_through);
        }
        if late(r.provenance.context_weeks.iter().max().copied()) {
            return fail("baseline context", r.provenance.context_weeks.iter().max().copied());
        }
    }
    Ok(())
}

/// Runs the configured season, writing outputs when `output.dir` is set.
pub fn run_season(config: &RunConfig) -> Result<RunReport> {
    config.validate()?;
    let collection = load_dataset(&config.dataset)?;
    let mut policy = build_policy(&config.policy)?;
    let report = run_collection(config, &collection, policy.as_mut())?;
    if let Some(dir) = &config.output.dir {
        report.save(dir)?;
    }
    Ok(report)
}

/// Run-wide inputs derived from the training split before any test week.
#[derive(Clone, Debug)]
pub struct Season {
    pub selection: SimilarityRanking,
    pub kg: KnowledgeGraph<Real>,
    pub profile: DatasetProfile,
    pub jumps: JumpDistribution<Real>,
    pub train_values: Vec<Vec<Real>>,
    pub season: SeasonContext,
    /// Fractional `horizon`-week changes of the training series, keyed by the
    /// ISO week of the later point.
    pub range_samples: BTreeMap<u32, Vec<Real>>,
}

/// Ranks, profiles and summarizes the training entities.
pub fn prepare_season(
    config: &RunConfig,
    train: &[&Entity],
    test: &[&Entity],
    normalization_scale: Real,
    policy: &mut dyn ReasonerPolicy,
) -> Result<Season> {
    let selection =
        rank_training_plots(train, test, config.k, normalization_scale, config.output.selection_cache.as_deref())?;
    let kg = build_kg(train.iter().copied())?;
    let profile = profile_dataset(&kg, policy, config.seed);
    let train_values: Vec<Vec<Real>> = train.iter().map(|e| e.values()).collect();
    let jumps = jump_distribution(train_values.iter().map(|v| v.as_slice()))?;
    let hist_max = train.iter().map(|e| e.max_yield()).fold(0.0, Real::max);
    let season = SeasonContext {
        profile: profile.kind,
        window: kg.typical_window(),
        zero_floor: 1.0 / normalization_scale,
        near_zero: (0.1 * kg.mean_level()).max(1e-9),
        hist_max,
    };
    let range_samples = range_samples(train, config.horizon as usize);
    Ok(Season { selection, kg, profile, jumps, train_values, season, range_samples })
}

fn range_samples(train: &[&Entity], horizon: usize) -> BTreeMap<u32, Vec<Real>> {
    let mut out: BTreeMap<u32, Vec<Real>> = BTreeMap::new();
    for e in train {
        let obs = &e.observations;
        for i in horizon..obs.len() {
            let prev = obs[i - horizon].yield_value;
            if prev > 0.0 {
                out.entry(obs[i].iso_week).or_default().push((obs[i].yield_value - prev) / prev);
            }
        }
    }
    out
}

fn external_table(cfg: &BaselineConfig, scale: Real) -> Result<Option<PredictionTable>> {
    let Some(path) = &cfg.predictions else {
        return Ok(None);
    };
    let table = load_external_predictions(path)?;
    if cfg.units == PredictionUnits::Normalized || scale == 1.0 {
        return Ok(Some(table));
    }
    let mut scaled = PredictionTable::new();
    for (id, w, q) in table.iter() {
        scaled.insert(id, w, Quantiles { q10: q.q10 / scale, q50: q.q50 / scale, q90: q.q90 / scale })?;
    }
    Ok(Some(scaled))
}

/// Runs the lockstep loop on an already loaded collection with the given policy.
pub fn run_collection(
    config: &RunConfig,
    collection: &EntityCollection,
    policy: &mut dyn ReasonerPolicy,
) -> Result<RunReport> {
    config.validate()?;
    let h = config.horizon;
    let mut train: Vec<&Entity> = collection.train().collect();
    let mut test: Vec<&Entity> = collection.test().collect();
    train.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
    test.sort_by(|a, b| a.entity_id.cmp(&b.entity_id));
    if train.is_empty() || test.is_empty() {
        return Err(Error::config("dataset needs at least one training and one test entity"));
    }

    let prepared = prepare_season(config, &train, &test, collection.normalization_scale, policy)?;
    let Season { kg, train_values, season, range_samples: samples, .. } = &prepared;
    let table = external_table(&config.baseline, collection.normalization_scale)?;
    let source = match &table {
        Some(t) => BaselineSource::External(t),
        None => BaselineSource::Builtin,
    };
    let enabled = config.enabled_tools();
    let mut memory = MemoryStore::new(prepared.jumps, config.bias_scope, config.reflection_interval);

    let artifacts: BTreeMap<&str, Vec<_>> = test
        .iter()
        .map(|e| {
            let a: Vec<_> = collection.artifacts.iter().filter(|a| a.entity_id == e.entity_id).cloned().collect();
            (e.entity_id.as_str(), a)
        })
        .collect();
    let mut stored: BTreeMap<&str, BTreeMap<u32, Real>> = BTreeMap::new();
    let mut outcomes: BTreeMap<&str, Vec<Outcome>> = BTreeMap::new();
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let last_week = test.iter().filter_map(|e| e.observations.last()).map(|o| o.week_index).max().unwrap_or(0);

    for week in 0..=last_week {
        // Lagged actuals: the prediction made for week - h is now confirmed.
        if let Some(src) = week.checked_sub(h) {
            for e in &test {
                let id = e.entity_id.as_str();
                let (Some(&pred), Some(obs)) = (stored.get(id).and_then(|m| m.get(&src)), e.observation(src)) else {
                    continue;
                };
                let progress = season.window.map_or(0.0, |w| w.progress(obs.iso_week));
                memory.record_lagged_error(id, obs.iso_week, progress, pred, obs.yield_value, src);
                if let Some(o) = outcomes.get_mut(id).and_then(|v| v.iter_mut().find(|o| o.week_index == src)) {
                    o.actual = Some(obs.yield_value);
                    memory.confirm_outcome(o.clone());
                }
            }
        }

        for e in &test {
            let id = e.entity_id.as_str();
            if e.observation(week).is_none() || context_weeks(week, h).is_none() {
                continue;
            }
            let raw = match predict(e, week, h, source, &artifacts[id]) {
                Ok(r) => r,
                Err(err @ Error::Prediction { .. }) => {
                    skipped.push(SkippedPrediction { entity_id: id.to_string(), week_index: week, reason: err.to_string() });
                    continue;
                }
                Err(err) => return Err(err),
            };
            let entity_stored = stored.entry(id).or_default();
            let state = assemble_state(e, week, raw, entity_stored, season);
            entity_stored.insert(week, raw.q50);

            let mut record = if memory.confirmed_actuals(id) >= 1 {
                let env = ToolEnv { kg, memory: &memory, range_samples: samples, enabled: &enabled };
                run_react(&state, policy, &env)
            } else {
                CorrectionRecord::passthrough(&state)
            };
            record.provenance.context_weeks = context_weeks(week, h).map(|r| r.collect()).unwrap_or_default();

            let plot_outcomes = outcomes.entry(id).or_default();
            plot_outcomes.push(Outcome {
                entity_id: id.to_string(),
                week_index: week,
                phase: record.phase,
                tools: record.tools_run().into_iter().collect(),
                y_raw: record.y_raw,
                y_final: record.y_final,
                actual: None,
            });
            records.push(record);

            if let Some(cutoff) = state.cutoff() {
                if memory.archive_plot(id, shape_vector(&state.history), cutoff, plot_outcomes.clone()) {
                    let added = memory.reflect(policy);
                    if !added.is_empty() {
                        tracing::info!(count = added.len(), "reflection added directives");
                    }
                }
            }
        }
    }

    for r in &mut records {
        r.actual = collection.get(&r.entity_id).and_then(|e| e.observation(r.target_week)).map(|o| o.yield_value);
    }
    if let Some(dir) = &config.output.dir {
        if config.output.memory_dump {
            std::fs::create_dir_all(dir).map_err(|e| Error::file(dir, e))?;
            memory.dump(&dir.join("memory.jsonl"))?;
        }
    }

    let scale = naive_scale(train_values.iter().map(|v| v.as_slice()));
    let Season { selection, kg, profile, .. } = prepared;
    let metrics = evaluation::metric_pair(&records, scale).ok().map(|(raw, corrected)| MetricPair { raw, corrected });
    let summary = RunSummary {
        config: config.clone(),
        dataset: DatasetSummary {
            name: collection.dataset_name.clone(),
            normalization_scale: collection.normalization_scale,
            train_entities: train.len(),
            test_entities: test.len(),
            kg_nodes: kg.len(),
        },
        profile,
        selection,
        naive_scale: scale,
        records: records.len(),
        skipped,
        metrics,
        per_entity: evaluation::per_plot_improvement(&records),
        tool_usage: evaluation::tool_usage(&records),
        directives: memory.directives.entries().to_vec(),
    };
    Ok(RunReport { summary, records })
}
