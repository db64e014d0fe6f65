//! The agent: state assembly, prompts, reply parsing, policies and the
//! ReAct correction loop.

mod policy;
mod prompt;
mod react;
mod remote;
mod reply;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baseline::RawPrediction;
use crate::features::{HarvestWindow, ProfileKind};
use crate::ingest::Entity;
use crate::Real;

pub use policy::{rule_policy_decide, ReasonerPolicy, RulePolicy};
pub use prompt::{render_prompt, LoopStatus, PromptInputs};
pub use react::{run_react, CorrectionRecord, Iteration, LearnBiasOutput, Provenance, ToolEnv, ToolEvent, ToolOutput, MAX_ITERATIONS};
pub use remote::{RemoteConfig, RemotePolicy};
pub use reply::{parse_reply, ParsedReply};

/// Recent weeks handed to the tools.
pub const RECENT_WEEKS: usize = 4;

/// Run-wide constants every prediction shares.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeasonContext {
    pub profile: ProfileKind,
    /// Typical harvest window of the training entities.
    pub window: Option<HarvestWindow>,
    /// Decline projections below this are floored to zero.
    pub zero_floor: Real,
    /// Lookahead values below this count as near zero.
    pub near_zero: Real,
    /// Largest training yield.
    pub hist_max: Real,
}

/// Everything the tools may see for one prediction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub entity_id: String,
    pub target_week: u32,
    pub iso_week: u32,
    pub progress: Real,
    pub horizon: u32,
    pub raw: RawPrediction,
    /// Last observed yields at least `horizon` weeks old, oldest first.
    pub recent_actuals: Vec<Real>,
    pub recent_weeks: Vec<u32>,
    /// Stored raw predictions for `recent_weeks`, where one was made.
    pub recent_predictions: Vec<Option<Real>>,
    /// Every observed yield up to the information cutoff.
    pub history: Vec<Real>,
    /// `actual - predicted` for the week `horizon` weeks back, once confirmed.
    pub lagged_error: Option<Real>,
    pub metadata: BTreeMap<String, String>,
    pub season: SeasonContext,
}

impl AgentState {
    /// Last week index whose actual the state may contain.
    pub fn cutoff(&self) -> Option<u32> {
        self.target_week.checked_sub(self.horizon)
    }
}

/// Builds the state for `entity` at `target_week`. `stored` holds the raw
/// predictions made for earlier weeks of this entity.
pub fn assemble_state(
    entity: &Entity,
    target_week: u32,
    raw: RawPrediction,
    stored: &BTreeMap<u32, Real>,
    season: &SeasonContext,
) -> AgentState {
    let cutoff = target_week.checked_sub(raw.horizon);
    let seen: Vec<_> = entity
        .observations
        .iter()
        .filter(|o| cutoff.is_some_and(|c| o.week_index <= c))
        .collect();
    let recent = &seen[seen.len().saturating_sub(RECENT_WEEKS)..];
    let iso_week = entity
        .observation(target_week)
        .map(|o| o.iso_week)
        .unwrap_or_else(|| seen.last().map_or(1, |o| (o.iso_week + raw.horizon - 1) % 52 + 1));
    let lagged_error = cutoff.and_then(|c| {
        let actual = seen.last().filter(|o| o.week_index == c)?.yield_value;
        Some(actual - stored.get(&c)?)
    });
    AgentState {
        entity_id: entity.entity_id.clone(),
        target_week,
        iso_week,
        progress: season.window.map_or(0.0, |w| w.progress(iso_week)),
        horizon: raw.horizon,
        raw,
        recent_actuals: recent.iter().map(|o| o.yield_value).collect(),
        recent_weeks: recent.iter().map(|o| o.week_index).collect(),
        recent_predictions: recent.iter().map(|o| stored.get(&o.week_index).copied()).collect(),
        history: seen.iter().map(|o| o.yield_value).collect(),
        lagged_error,
        metadata: entity.metadata.clone(),
        season: *season,
    }
}
