use serde::{Deserialize, Serialize};

use crate::toolkit::ToolName;
use crate::Real;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ParsedReply {
    pub reason: String,
    /// Requested tools in order, deduplicated. Empty means stop.
    pub tools: Vec<ToolName>,
    /// Optional blend weight for adjust_correction.
    pub weight: Option<Real>,
    pub warnings: Vec<String>,
}

fn field<'a>(line: &'a str, key: &str) -> Option<&'a str> {
    let (k, v) = line.split_once(':')?;
    let k = k.trim().trim_matches(|c| c == '*' || c == '#' || c == '-').trim();
    k.eq_ignore_ascii_case(key).then(|| v.trim_start_matches('*').trim())
}

/// Parses a `REASON: ...` / `TOOLS: a, b` reply. Only the first line of each
/// kind counts. Unknown tool names are dropped with a warning, and a reply
/// without a TOOLS line yields no tools.
pub fn parse_reply(text: &str) -> ParsedReply {
    let mut out = ParsedReply::default();
    let mut reason = None;
    let mut tools = None;
    let mut weight = None;
    for line in text.lines() {
        if reason.is_none() {
            reason = field(line, "reason");
        }
        if tools.is_none() {
            tools = field(line, "tools");
        }
        if weight.is_none() {
            weight = field(line, "weight");
        }
    }
    out.reason = reason.unwrap_or_default().to_string();
    match tools {
        None => out.warnings.push("reply has no TOOLS line".into()),
        Some(list) if list.trim_end_matches('.').eq_ignore_ascii_case("none") || list.is_empty() => {}
        Some(list) => {
            for name in list.split(',').map(|s| s.trim().trim_matches('`').trim_end_matches('.')) {
                if name.is_empty() {
                    continue;
                }
                match name.parse::<ToolName>() {
                    Ok(t) if !out.tools.contains(&t) => out.tools.push(t),
                    Ok(_) => {}
                    Err(e) => out.warnings.push(e),
                }
            }
        }
    }
    if let Some(w) = weight {
        match w.parse::<Real>() {
            Ok(x) if (0.0..=1.0).contains(&x) => out.weight = Some(x),
            _ => out.warnings.push(format!("ignoring WEIGHT '{w}'")),
        }
    }
    for w in &out.warnings {
        tracing::warn!("reply: {w}");
    }
    out
}
