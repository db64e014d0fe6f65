use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::policy::{ReasonerPolicy, RulePolicy};
use super::prompt::{render_prompt, LoopStatus, PromptInputs};
use super::reply::parse_reply;
use super::AgentState;
use crate::features::KnowledgeGraph;
use crate::memory::{BiasDigest, MemoryStore};
use crate::toolkit::{
    adjust_correction, apply_correction, detect_phase, evaluate_trajectory, find_similar, learn_bias,
    rule_adjust_weight, shape_vector, trailing_zeros, validate_range, verify_correction, Adjustment,
    AppliedRule, BiasEstimate, Correction, CorrectionInputs, Phase, PhaseEstimate, PhaseInputs, RangeVerdict,
    SafetyVerdict, SimilarPlot, ToolName, TrajectoryVerdict, Verdict, MAX_ADJUSTMENTS,
};
use crate::Real;

/// Policy calls allowed per prediction.
pub const MAX_ITERATIONS: usize = 10;

/// Read-only context shared by every tool call of one prediction.
pub struct ToolEnv<'a> {
    pub kg: &'a KnowledgeGraph<Real>,
    pub memory: &'a MemoryStore,
    /// Historical fractional changes over the horizon, keyed by ISO week.
    pub range_samples: &'a BTreeMap<u32, Vec<Real>>,
    pub enabled: &'a BTreeSet<ToolName>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearnBiasOutput {
    pub estimate: BiasEstimate<Real>,
    pub position_bias: BiasDigest,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToolOutput {
    FindSimilar { matches: Vec<SimilarPlot<Real>>, corpus: usize },
    LearnBias(LearnBiasOutput),
    DetectPhase(PhaseEstimate<Real>),
    ValidateRange(RangeVerdict<Real>),
    ApplyCorrection(Correction<Real>),
    EvaluateTrajectory(TrajectoryVerdict<Real>),
    AdjustCorrection(Adjustment<Real>),
    VerifyCorrection(SafetyVerdict<Real>),
    /// The tool was requested in a state where it cannot run.
    Skipped { reason: String },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToolEvent {
    pub tool: ToolName,
    pub output: ToolOutput,
}

impl ToolEvent {
    /// One-line digest used in the next prompt.
    pub fn summary(&self) -> String {
        let body = match &self.output {
            ToolOutput::FindSimilar { matches, corpus } => {
                let m: Vec<String> = matches
                    .iter()
                    .map(|s| format!("{} d={:.4}{}", s.entity_id, s.distance, if s.archived { " archived" } else { "" }))
                    .collect();
                format!("{} of {corpus}: {}", m.len(), m.join("; "))
            }
            ToolOutput::LearnBias(b) => format!(
                "directional={} gamma={:.4} gamma_decayed={:.4} position_bias={:+.4}",
                b.estimate.directional, b.estimate.gamma, b.estimate.gamma_decayed, b.position_bias.value
            ),
            ToolOutput::DetectPhase(p) => format!(
                "phase={} y_phase={:.6} confidence={:.2} ({})",
                p.phase.as_str(),
                p.y_phase,
                p.confidence,
                p.rule
            ),
            ToolOutput::ValidateRange(r) => match r.clamped_value {
                Some(c) => format!("out of range (p10={:+.4} p90={:+.4} n={}), clamp to {c:.6}", r.p10, r.p90, r.samples),
                None => format!("in range (n={})", r.samples),
            },
            ToolOutput::ApplyCorrection(c) => format!("value={:.6} rule={} weight={:.4}", c.value, c.rule.as_str(), c.weight),
            ToolOutput::EvaluateTrajectory(t) => format!(
                "{} band=[{:.6}, {:.6}] slope={:+.4} attempts_remaining={}",
                t.verdict.as_str(),
                t.lo,
                t.hi,
                t.slope,
                t.attempts_remaining
            ),
            ToolOutput::AdjustCorrection(a) => format!(
                "value={:.6} weight={:.4} attempts_remaining={}",
                a.value, a.weight, a.attempts_remaining
            ),
            ToolOutput::VerifyCorrection(v) => format!(
                "{} ratio={:.4} final={:.6} ({})",
                v.status.as_str(),
                v.ratio,
                v.final_value,
                v.reason
            ),
            ToolOutput::Skipped { reason } => format!("skipped: {reason}"),
        };
        format!("{}: {body}", self.tool)
    }

    fn ran(&self) -> bool {
        !matches!(self.output, ToolOutput::Skipped { .. })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Iteration {
    pub policy: String,
    pub reason: String,
    pub requested: Vec<ToolName>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
    pub events: Vec<ToolEvent>,
}

/// Week indices each input of a prediction was drawn from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Baseline context window.
    pub context_weeks: Vec<u32>,
    /// Latest actual in the agent state.
    pub actuals_through: Option<u32>,
    /// Latest source week in the position-bias table.
    pub bias_through: Option<u32>,
    /// Latest week of any archived curve.
    pub archive_through: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrectionRecord {
    pub entity_id: String,
    pub target_week: u32,
    pub iso_week: u32,
    pub horizon: u32,
    pub y_raw: Real,
    pub lookahead: Real,
    /// Whether the prediction was eligible for correction.
    pub eligible: bool,
    pub iterations: Vec<Iteration>,
    pub applied_rule: AppliedRule,
    pub phase: Option<Phase>,
    pub safety: Vec<SafetyVerdict<Real>>,
    pub trajectory: Vec<TrajectoryVerdict<Real>>,
    pub adjustments: u8,
    pub y_final: Real,
    /// Set when the configured policy failed and the rule policy took over.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fallback: Option<String>,
    pub provenance: Provenance,
    /// Observed value, attached after the run for scoring.
    pub actual: Option<Real>,
}

impl CorrectionRecord {
    pub fn passthrough(state: &AgentState) -> Self {
        CorrectionRecord {
            entity_id: state.entity_id.clone(),
            target_week: state.target_week,
            iso_week: state.iso_week,
            horizon: state.horizon,
            y_raw: state.raw.q50,
            lookahead: state.raw.lookahead_q50,
            eligible: false,
            iterations: Vec::new(),
            applied_rule: AppliedRule::None,
            phase: None,
            safety: Vec::new(),
            trajectory: Vec::new(),
            adjustments: 0,
            y_final: state.raw.q50,
            fallback: None,
            provenance: Provenance {
                actuals_through: state.recent_weeks.last().copied(),
                ..Default::default()
            },
            actual: None,
        }
    }

    pub fn events(&self) -> impl Iterator<Item = &ToolEvent> {
        self.iterations.iter().flat_map(|i| i.events.iter())
    }

    /// Tools that actually executed at least once.
    pub fn tools_run(&self) -> BTreeSet<ToolName> {
        self.events().filter(|e| e.ran()).map(|e| e.tool).collect()
    }

    /// Whether the agent loop ran (as opposed to an ineligible passthrough).
    pub fn is_nontrivial(&self) -> bool {
        self.eligible
    }
}

#[derive(Default)]
struct Scratch {
    bias: Option<LearnBiasOutput>,
    phase: Option<PhaseEstimate<Real>>,
    range: Option<RangeVerdict<Real>>,
    value: Option<Real>,
    rule: Option<AppliedRule>,
    y_phase: Real,
    weight: Real,
    trajectory: Option<TrajectoryVerdict<Real>>,
    adjustments: u8,
}

struct Runner<'a, 'b> {
    state: &'a AgentState,
    env: &'a ToolEnv<'b>,
    s: Scratch,
    record: CorrectionRecord,
}

impl Runner<'_, '_> {
    fn verify(&mut self, events: &mut Vec<ToolEvent>) {
        if !self.env.enabled.contains(&ToolName::VerifyCorrection) {
            return;
        }
        let Some(value) = self.s.value else {
            events.push(skipped(ToolName::VerifyCorrection, "no correction to verify"));
            return;
        };
        let v = verify_correction(
            value,
            self.state.raw.q50,
            &self.env.memory.jumps,
            self.s.phase.as_ref(),
            self.state.season.profile,
            self.state.season.hist_max,
        );
        self.s.value = Some(v.final_value);
        self.record.safety.push(v.clone());
        events.push(ToolEvent { tool: ToolName::VerifyCorrection, output: ToolOutput::VerifyCorrection(v) });
    }

    fn run(&mut self, tool: ToolName, weight_hint: Option<Real>, events: &mut Vec<ToolEvent>) {
        let st = self.state;
        let y_raw = st.raw.q50;
        let output = match tool {
            ToolName::FindSimilar => {
                let target = shape_vector(&st.history);
                let kg = self.env.kg.nodes.iter().map(|(id, n)| (id.as_str(), &n.shape, false));
                let archived = self.env.memory.archive.corpus(&st.entity_id).map(|(id, v)| (id, v, true));
                let corpus: Vec<_> = kg.chain(archived).collect();
                let n = corpus.len();
                ToolOutput::FindSimilar { matches: find_similar(&target, corpus), corpus: n }
            }
            ToolName::LearnBias => {
                let (preds, acts): (Vec<Real>, Vec<Real>) = st
                    .recent_predictions
                    .iter()
                    .zip(&st.recent_actuals)
                    .filter_map(|(p, a)| Some(((*p)?, *a)))
                    .unzip();
                let estimate = learn_bias(&preds, &acts, trailing_zeros(&st.history)).unwrap_or_else(|_| BiasEstimate::neutral());
                let out = LearnBiasOutput {
                    estimate,
                    position_bias: self.env.memory.bias_digest(&st.entity_id, st.iso_week, st.progress),
                };
                self.s.bias = Some(out.clone());
                ToolOutput::LearnBias(out)
            }
            ToolName::DetectPhase => {
                let p = detect_phase(&PhaseInputs {
                    recent: &st.recent_actuals,
                    y_hat: y_raw,
                    horizon: st.horizon,
                    lookahead: st.raw.lookahead_q50,
                    history: &st.history,
                    profile: st.season.profile,
                    zero_floor: st.season.zero_floor,
                    near_zero: st.season.near_zero,
                });
                self.s.phase = Some(p.clone());
                self.record.phase = Some(p.phase);
                ToolOutput::DetectPhase(p)
            }
            ToolName::ValidateRange => {
                let y_prev = st.recent_actuals.last().copied().unwrap_or(0.0);
                let samples = self.env.range_samples.get(&st.iso_week).map_or(&[][..], |v| v.as_slice());
                let r = validate_range(y_raw, y_prev, samples);
                self.s.range = Some(r);
                ToolOutput::ValidateRange(r)
            }
            ToolName::ApplyCorrection => {
                let c = apply_correction(&CorrectionInputs {
                    y_raw,
                    phase: self.s.phase.as_ref(),
                    bias: self.s.bias.as_ref().map(|b| &b.estimate),
                    range: self.s.range.as_ref(),
                    position_bias: self.s.bias.as_ref().map_or(0.0, |b| b.position_bias.value),
                });
                self.s.value = Some(c.value);
                self.s.rule = Some(c.rule);
                self.s.y_phase = c.y_phase;
                self.s.weight = c.weight;
                self.s.trajectory = None;
                self.record.applied_rule = c.rule;
                events.push(ToolEvent { tool, output: ToolOutput::ApplyCorrection(c) });
                self.verify(events);
                return;
            }
            ToolName::EvaluateTrajectory => match self.s.value {
                None => ToolOutput::Skipped { reason: "no correction to evaluate".into() },
                Some(v) => {
                    let t = evaluate_trajectory(
                        v,
                        y_raw,
                        &st.recent_actuals,
                        self.s.phase.as_ref().map(|p| p.phase),
                        MAX_ADJUSTMENTS - self.s.adjustments,
                    );
                    self.s.trajectory = Some(t);
                    self.record.trajectory.push(t);
                    ToolOutput::EvaluateTrajectory(t)
                }
            },
            ToolName::AdjustCorrection => {
                let (Some(prior), Some(t)) = (self.s.value, self.s.trajectory) else {
                    events.push(skipped(tool, "no evaluated correction"));
                    return;
                };
                if t.verdict == Verdict::Consistent {
                    events.push(skipped(tool, "trajectory is consistent"));
                    return;
                }
                if self.s.adjustments >= MAX_ADJUSTMENTS {
                    events.push(skipped(tool, "no adjustment attempts left"));
                    return;
                }
                let w = weight_hint.unwrap_or_else(|| rule_adjust_weight(t.verdict, self.s.weight));
                let a = match adjust_correction(prior, &t, self.s.y_phase, y_raw, w) {
                    Ok(a) => a,
                    Err(e) => {
                        events.push(skipped(tool, &e.to_string()));
                        return;
                    }
                };
                self.s.adjustments += 1;
                self.s.value = Some(a.value);
                self.s.weight = a.weight;
                self.s.trajectory = None;
                self.record.adjustments = self.s.adjustments;
                events.push(ToolEvent { tool, output: ToolOutput::AdjustCorrection(a) });
                self.verify(events);
                return;
            }
            ToolName::VerifyCorrection => {
                self.verify(events);
                return;
            }
        };
        events.push(ToolEvent { tool, output });
    }

    fn status(&self) -> LoopStatus {
        LoopStatus {
            correction: self.s.value.map(|v| (v, self.s.rule.unwrap_or(AppliedRule::None), self.s.weight)),
            trajectory: self.s.trajectory.map(|t| t.verdict),
            adjustments_used: self.s.adjustments,
        }
    }
}

fn skipped(tool: ToolName, reason: &str) -> ToolEvent {
    ToolEvent { tool, output: ToolOutput::Skipped { reason: reason.to_string() } }
}

/// Drives the reason-act loop for one prediction.
///
/// Each iteration is one policy call followed by the requested tools in
/// order. verify_correction runs right after every apply or adjust, an
/// empty tool list ends the loop, and after ten iterations the latest value
/// stands. If the policy errors, the rule policy answers for the rest of
/// this prediction. Without any correction the raw prediction passes through.
pub fn run_react(state: &AgentState, policy: &mut dyn ReasonerPolicy, env: &ToolEnv<'_>) -> CorrectionRecord {
    let mut record = CorrectionRecord::passthrough(state);
    record.eligible = true;
    record.provenance.bias_through = env.memory.bias_through();
    record.provenance.archive_through = env.memory.archive.through_week();
    let mut r = Runner { state, env, s: Scratch::default(), record };
    let mut called: BTreeSet<ToolName> = BTreeSet::new();
    let mut results: Vec<String> = Vec::new();
    let mut fallback = RulePolicy;
    let mut failed = false;
    let bias = env.memory.bias_digest(&state.entity_id, state.iso_week, state.progress);

    for _ in 0..MAX_ITERATIONS {
        let status = r.status();
        let prompt = render_prompt(&PromptInputs {
            state,
            called: &called,
            enabled: env.enabled,
            results: &results,
            bias: &bias,
            directives: &env.memory.directives,
            status: &status,
        });
        let (reply, name) = if failed {
            (fallback.decide(&prompt).unwrap_or_default(), fallback.name().to_string())
        } else {
            match policy.decide(&prompt) {
                Ok(text) => (text, policy.name().to_string()),
                Err(e) => {
                    tracing::warn!(entity = %state.entity_id, week = state.target_week, "policy failed, using rule policy: {e}");
                    failed = true;
                    r.record.fallback = Some(e.to_string());
                    (fallback.decide(&prompt).unwrap_or_default(), format!("{} (fallback)", fallback.name()))
                }
            }
        };
        let parsed = parse_reply(&reply);
        let mut it = Iteration {
            policy: name,
            reason: parsed.reason.clone(),
            requested: parsed.tools.clone(),
            warnings: parsed.warnings.clone(),
            events: Vec::new(),
        };
        if parsed.tools.is_empty() {
            r.record.iterations.push(it);
            break;
        }
        for &tool in &parsed.tools {
            if !env.enabled.contains(&tool) {
                it.warnings.push(format!("{tool} is disabled; ignored"));
                continue;
            }
            let start = it.events.len();
            r.run(tool, parsed.weight, &mut it.events);
            for e in &it.events[start..] {
                called.insert(e.tool);
                results.push(e.summary());
            }
        }
        r.record.iterations.push(it);
    }

    if let Some(v) = r.s.value {
        r.record.y_final = v;
    }
    r.record
}
