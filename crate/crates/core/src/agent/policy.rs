use std::collections::BTreeMap;

use crate::error::Result;
use crate::memory::REFLECTION_HEADER;
use crate::toolkit::ToolName;

/// Share of worsened uses that earns a tool a de-prioritize directive.
const WORSENED_SHARE: f64 = 0.6;
/// Uses needed before a tool is judged.
const MIN_USES: usize = 5;

/// Something that answers prompts: a language model or the rule policy.
pub trait ReasonerPolicy {
    fn name(&self) -> &str;

    fn decide(&mut self, prompt: &str) -> Result<String>;

    /// Whether replies come from a language model; the rule policy says no.
    fn is_language_model(&self) -> bool {
        false
    }
}

impl<P: ReasonerPolicy + ?Sized> ReasonerPolicy for Box<P> {
    fn name(&self) -> &str {
        (**self).name()
    }

    fn decide(&mut self, prompt: &str) -> Result<String> {
        (**self).decide(prompt)
    }

    fn is_language_model(&self) -> bool {
        (**self).is_language_model()
    }
}

/// Deterministic stand-in for a language model. It reads the loop state
/// back out of the prompt and follows a fixed schedule.
#[derive(Clone, Copy, Debug, Default)]
pub struct RulePolicy;

impl ReasonerPolicy for RulePolicy {
    fn name(&self) -> &str {
        "rule"
    }

    fn decide(&mut self, prompt: &str) -> Result<String> {
        Ok(rule_policy_decide(prompt))
    }
}

struct Digest {
    tools: BTreeMap<ToolName, bool>,
    corrected: bool,
    contradiction: bool,
    remaining: u8,
}

fn digest(prompt: &str) -> Digest {
    let mut d = Digest { tools: BTreeMap::new(), corrected: false, contradiction: false, remaining: 0 };
    let mut in_tools = false;
    for line in prompt.lines() {
        let line = line.trim();
        if line == "TOOLS" {
            in_tools = true;
            continue;
        }
        if line.is_empty() {
            in_tools = false;
            continue;
        }
        if in_tools {
            if let Some((name, flag)) = line.trim_start_matches("- ").split_once(" [") {
                if let Ok(t) = name.parse::<ToolName>() {
                    d.tools.insert(t, flag.starts_with("already"));
                }
            }
            continue;
        }
        if let Some(v) = line.strip_prefix("correction:") {
            d.corrected = v.trim() != "none";
        } else if let Some(v) = line.strip_prefix("trajectory:") {
            d.contradiction = v.trim().ends_with("contradiction");
        } else if let Some(v) = line.strip_prefix("adjustments:") {
            d.remaining = v
                .split_whitespace()
                .find_map(|kv| kv.strip_prefix("remaining="))
                .and_then(|n| n.parse().ok())
                .unwrap_or(0);
        }
    }
    d
}

fn reply(reason: &str, tools: &[ToolName]) -> String {
    let list = if tools.is_empty() {
        "NONE".to_string()
    } else {
        tools.iter().map(|t| t.as_str()).collect::<Vec<_>>().join(", ")
    };
    format!("REASON: {reason}\nTOOLS: {list}")
}

/// Flags every tool whose corrections worsened the error in at least 60% of
/// five or more uses.
fn reflect_reply(prompt: &str) -> String {
    let mut lines = Vec::new();
    for line in prompt.lines() {
        let Some(rest) = line.strip_prefix("TOOL ") else {
            continue;
        };
        let mut parts = rest.split_whitespace();
        let Some(name) = parts.next() else {
            continue;
        };
        let kv: BTreeMap<&str, &str> = parts.filter_map(|p| p.split_once('=')).collect();
        let num = |k: &str| kv.get(k).and_then(|v| v.parse::<usize>().ok()).unwrap_or(0);
        let (uses, worsened) = (num("uses"), num("worsened"));
        if uses >= MIN_USES && worsened as f64 >= WORSENED_SHARE * uses as f64 {
            let phase = kv.get("phase").copied().unwrap_or("any");
            lines.push(format!("DIRECTIVE: de-prioritize {name} during {phase}"));
        }
    }
    if lines.is_empty() {
        "DIRECTIVE: NONE".into()
    } else {
        lines.join("\n")
    }
}

/// The rule schedule: all enabled diagnostics first, then apply_correction
/// with a trajectory check, then adjust_correction while the trajectory
/// contradicts and attempts remain, then stop.
pub fn rule_policy_decide(prompt: &str) -> String {
    if prompt.starts_with(REFLECTION_HEADER) {
        return reflect_reply(prompt);
    }
    let d = digest(prompt);
    let available = |t: ToolName| d.tools.contains_key(&t);
    let uncalled = |t: ToolName| d.tools.get(&t) == Some(&false);
    if !d.corrected {
        let diagnostics: Vec<ToolName> = ToolName::ALL
            .into_iter()
            .filter(|t| t.is_diagnostic() && uncalled(*t))
            .collect();
        if !diagnostics.is_empty() {
            return reply("Gather diagnostics before correcting.", &diagnostics);
        }
        if available(ToolName::ApplyCorrection) {
            let mut tools = vec![ToolName::ApplyCorrection];
            if available(ToolName::EvaluateTrajectory) {
                tools.push(ToolName::EvaluateTrajectory);
            }
            return reply("Diagnostics are in; apply the correction.", &tools);
        }
        return reply("No correction tool is available.", &[]);
    }
    if d.contradiction && d.remaining > 0 && available(ToolName::AdjustCorrection) {
        let mut tools = vec![ToolName::AdjustCorrection];
        if available(ToolName::EvaluateTrajectory) {
            tools.push(ToolName::EvaluateTrajectory);
        }
        return reply("The trajectory contradicts the correction; revise the blend.", &tools);
    }
    reply("The correction stands.", &[])
}
