use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::Outcome;
use crate::agent::ReasonerPolicy;
use crate::toolkit::{Phase, ToolName};
use crate::Real;

/// First line of every reflection prompt.
pub const REFLECTION_HEADER: &str = "REFLECTION";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub text: String,
    /// Logical time: the number of archive commits when the directive was made.
    pub created: u64,
    /// SHA-256 of the summary the directive was derived from.
    pub source_hash: String,
}

/// Append-only list of strategy directives.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetaDirectives {
    entries: Vec<Directive>,
}

impl MetaDirectives {
    pub fn push(&mut self, d: Directive) {
        self.entries.push(d);
    }

    pub fn entries(&self) -> &[Directive] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn contains(&self, text: &str) -> bool {
        self.entries.iter().any(|d| d.text == text)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ToolImpact {
    /// Confirmed predictions where the tool ran and the value moved.
    pub uses: usize,
    pub worsened: usize,
    /// Most frequent phase among the worsened uses.
    pub phase: Option<Phase>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ReflectionSummary {
    pub outcomes: usize,
    pub mae_raw: Real,
    pub mae_corrected: Real,
    pub tools: BTreeMap<ToolName, ToolImpact>,
}

pub fn summarize(outcomes: &[Outcome]) -> ReflectionSummary {
    let confirmed: Vec<(&Outcome, Real)> = outcomes.iter().filter_map(|o| Some((o, o.actual?))).collect();
    let n = confirmed.len();
    let mut summary = ReflectionSummary { outcomes: n, ..Default::default() };
    if n == 0 {
        return summary;
    }
    summary.mae_raw = confirmed.iter().map(|(o, a)| (o.y_raw - a).abs()).sum::<Real>() / n as Real;
    summary.mae_corrected = confirmed.iter().map(|(o, a)| (o.y_final - a).abs()).sum::<Real>() / n as Real;
    let mut phases: BTreeMap<ToolName, BTreeMap<Phase, usize>> = BTreeMap::new();
    for (o, _) in &confirmed {
        if o.y_final == o.y_raw {
            continue;
        }
        let worse = o.worsened().unwrap_or(false);
        for &t in &o.tools {
            let entry = summary.tools.entry(t).or_default();
            entry.uses += 1;
            if worse {
                entry.worsened += 1;
                if let Some(p) = o.phase {
                    *phases.entry(t).or_default().entry(p).or_default() += 1;
                }
            }
        }
    }
    for (t, counts) in phases {
        // Highest count wins; ties go to the earlier phase.
        let best = counts.iter().fold(None::<(Phase, usize)>, |acc, (&p, &c)| match acc {
            Some((_, bc)) if bc >= c => acc,
            _ => Some((p, c)),
        });
        if let Some(entry) = summary.tools.get_mut(&t) {
            entry.phase = best.map(|b| b.0);
        }
    }
    summary
}

pub fn render_reflection(summary: &ReflectionSummary) -> String {
    let mut out = format!("{REFLECTION_HEADER}\n");
    let _ = writeln!(out, "OUTCOMES {}", summary.outcomes);
    let _ = writeln!(out, "MAE raw={:.6} corrected={:.6}", summary.mae_raw, summary.mae_corrected);
    for t in ToolName::ALL {
        if let Some(i) = summary.tools.get(&t) {
            let phase = i.phase.map_or("any", Phase::as_str);
            let _ = writeln!(out, "TOOL {} uses={} worsened={} phase={}", t, i.uses, i.worsened, phase);
        }
    }
    out.push_str("Reply with one line per strategic directive: DIRECTIVE: <text>, or DIRECTIVE: NONE\n");
    out
}

/// Directive texts from a reply; `None` when no `DIRECTIVE:` line exists.
pub fn parse_directives(reply: &str) -> Option<Vec<String>> {
    let mut found = false;
    let mut out = Vec::new();
    for line in reply.lines() {
        let Some((key, value)) = line.trim().split_once(':') else {
            continue;
        };
        if !key.trim().eq_ignore_ascii_case("directive") {
            continue;
        }
        found = true;
        let value = value.trim();
        if !value.is_empty() && !value.eq_ignore_ascii_case("none") {
            out.push(value.to_string());
        }
    }
    found.then_some(out)
}

/// Summarizes `outcomes`, asks the policy for directives and appends new
/// ones. Returns the directives added.
pub fn reflect(
    outcomes: &[Outcome],
    policy: &mut dyn ReasonerPolicy,
    directives: &mut MetaDirectives,
    logical_time: u64,
) -> Vec<Directive> {
    let prompt = render_reflection(&summarize(outcomes));
    let source_hash = hex::encode(Sha256::digest(prompt.as_bytes()));
    let reply = match policy.decide(&prompt) {
        Ok(r) => r,
        Err(e) => {
            tracing::warn!("reflection request failed: {e}");
            return Vec::new();
        }
    };
    let Some(texts) = parse_directives(&reply) else {
        tracing::warn!("unparseable reflection reply; no directive added");
        return Vec::new();
    };
    let mut added = Vec::new();
    for text in texts {
        if directives.contains(&text) {
            continue;
        }
        let d = Directive { text, created: logical_time, source_hash: source_hash.clone() };
        directives.push(d.clone());
        added.push(d);
    }
    added
}
