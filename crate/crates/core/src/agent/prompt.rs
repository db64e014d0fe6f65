use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::AgentState;
use crate::memory::{BiasDigest, MetaDirectives};
use crate::toolkit::{AppliedRule, ToolName, Verdict, MAX_ADJUSTMENTS};
use crate::Real;

/// Progress of the correction so far, as shown to the policy.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoopStatus {
    /// Current corrected value, the rule that produced it and its blend weight.
    pub correction: Option<(Real, AppliedRule, Real)>,
    /// Latest trajectory verdict since the last correction.
    pub trajectory: Option<Verdict>,
    pub adjustments_used: u8,
}

pub struct PromptInputs<'a> {
    pub state: &'a AgentState,
    pub called: &'a BTreeSet<ToolName>,
    pub enabled: &'a BTreeSet<ToolName>,
    /// One summary line per tool execution so far.
    pub results: &'a [String],
    pub bias: &'a BiasDigest,
    pub directives: &'a MetaDirectives,
    pub status: &'a LoopStatus,
}

fn list(values: impl Iterator<Item = String>) -> String {
    let v: Vec<String> = values.collect();
    if v.is_empty() {
        "n/a".into()
    } else {
        v.join(" ")
    }
}

/// Renders the prompt. Sections appear in a fixed order and every number
/// has fixed precision, so the same inputs give byte-identical text.
pub fn render_prompt(p: &PromptInputs<'_>) -> String {
    let s = p.state;
    let mut out = String::with_capacity(2048);
    out.push_str("STATE\n");
    let _ = writeln!(out, "entity: {}", s.entity_id);
    let _ = writeln!(out, "target_week: {} (iso week {}, season progress {:.3})", s.target_week, s.iso_week, s.progress);
    let _ = writeln!(out, "horizon: {}", s.horizon);
    let _ = writeln!(
        out,
        "raw_prediction: q50={:.6} q10={:.6} q90={:.6} lookahead={:.6}",
        s.raw.q50, s.raw.q10, s.raw.q90, s.raw.lookahead_q50
    );
    let _ = writeln!(out, "recent_actuals: {}", list(s.recent_actuals.iter().map(|v| format!("{v:.6}"))));
    let _ = writeln!(
        out,
        "recent_predictions: {}",
        list(s.recent_predictions.iter().map(|v| v.map_or("n/a".into(), |v| format!("{v:.6}"))))
    );
    let _ = writeln!(out, "lagged_error: {}", s.lagged_error.map_or("n/a".into(), |e| format!("{e:+.6}")));
    let meta: Vec<String> = s.metadata.iter().map(|(k, v)| format!("{k}={v}")).collect();
    let _ = writeln!(out, "metadata: {}", if meta.is_empty() { "n/a".into() } else { meta.join(", ") });
    let _ = writeln!(out, "profile: {}", s.season.profile.as_str());
    match p.status.correction {
        Some((v, rule, w)) => {
            let _ = writeln!(out, "correction: value={v:.6} rule={} weight={w:.4}", rule.as_str());
        }
        None => out.push_str("correction: none\n"),
    }
    let _ = writeln!(out, "trajectory: {}", p.status.trajectory.map_or("none", Verdict::as_str));
    let _ = writeln!(
        out,
        "adjustments: used={} remaining={}",
        p.status.adjustments_used,
        MAX_ADJUSTMENTS.saturating_sub(p.status.adjustments_used)
    );

    out.push_str("\nTOOL RESULTS\n");
    if p.results.is_empty() {
        out.push_str("none yet\n");
    }
    for r in p.results {
        out.push_str(r);
        out.push('\n');
    }

    out.push_str("\nTOOLS\n");
    for t in ToolName::ALL.into_iter().filter(|t| p.enabled.contains(t)) {
        let flag = if p.called.contains(&t) { "already called" } else { "available" };
        let _ = writeln!(out, "- {t} [{flag}]");
    }

    let b = p.bias;
    out.push_str("\nPOSITION BIAS\n");
    let _ = writeln!(
        out,
        "iso week {} decile {}: {:+.4} from {} (bucket n={}, decile n={}, table n={})",
        b.iso_week,
        b.decile,
        b.value,
        match b.source {
            crate::memory::BiasSource::Bucket => "bucket",
            crate::memory::BiasSource::Decile => "decile",
            crate::memory::BiasSource::Empty => "no matching entries",
        },
        b.bucket_entries,
        b.decile_entries,
        b.total_entries
    );

    out.push_str("\nRULES\n");
    out.push_str("1. Run diagnostics (learn_bias, detect_phase, find_similar, validate_range) before apply_correction.\n");
    out.push_str("2. verify_correction runs automatically after apply_correction and adjust_correction.\n");
    out.push_str("3. evaluate_trajectory needs a correction; adjust_correction only after a contradiction, at most 2 times.\n");
    out.push_str("4. Reply with exactly two lines:\nREASON: <one sentence>\nTOOLS: <comma-separated tool names, or NONE>\n");

    if !p.directives.is_empty() {
        out.push_str("\nDIRECTIVES\n");
        for d in p.directives.entries() {
            let _ = writeln!(out, "- {}", d.text);
        }
    }
    out
}
