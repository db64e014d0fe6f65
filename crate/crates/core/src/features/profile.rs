use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::KnowledgeGraph;
use crate::agent::ReasonerPolicy;
use crate::scalar::median;
use crate::Real;

/// Entities sampled for profiling.
const SAMPLE_SIZE: usize = 3;
/// Median per-year zero fraction above which a dataset is a zero valley.
const ZERO_VALLEY_THRESHOLD: Real = 0.15;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// Series return to zero during an extended off-season.
    ZeroValley,
    /// Yields stay above zero year-round.
    PositiveFloor,
}

impl ProfileKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProfileKind::ZeroValley => "zero_valley",
            ProfileKind::PositiveFloor => "positive_floor",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileSource {
    Heuristic,
    Policy,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProfileEvidence {
    pub entity_id: String,
    pub zero_fraction_by_year: BTreeMap<i32, Real>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetProfile {
    pub kind: ProfileKind,
    pub source: ProfileSource,
    pub evidence: Vec<ProfileEvidence>,
    /// Median over every sampled (entity, year) pair; drives the heuristic.
    pub median_zero_fraction: Real,
    /// Median of the per-entity medians, logged for comparison.
    pub median_entity_zero_fraction: Real,
}

pub fn heuristic_profile(zero_fractions: &[Real]) -> ProfileKind {
    match median(zero_fractions) {
        Some(m) if m > ZERO_VALLEY_THRESHOLD => ProfileKind::ZeroValley,
        _ => ProfileKind::PositiveFloor,
    }
}

/// Reads a `PROFILE: <kind>` line; anything else yields `None`.
pub fn parse_profile_reply(text: &str) -> Option<ProfileKind> {
    text.lines().find_map(|line| {
        let (key, value) = line.trim().split_once(':')?;
        if !key.trim().eq_ignore_ascii_case("profile") {
            return None;
        }
        match value.trim().trim_end_matches('.').to_ascii_lowercase().as_str() {
            "zero_valley" => Some(ProfileKind::ZeroValley),
            "positive_floor" => Some(ProfileKind::PositiveFloor),
            _ => None,
        }
    })
}

fn render_prompt(kg: &KnowledgeGraph<Real>, ids: &[&String]) -> String {
    let mut out = String::from("DATASET PROFILE\n");
    out.push_str("Classify the dataset from the sampled training entities below.\n");
    out.push_str("zero_valley: the series returns to zero during an extended off-season.\n");
    out.push_str("positive_floor: yields stay above zero year-round.\n");
    for id in ids {
        let node = &kg.nodes[*id];
        let _ = writeln!(out, "\nENTITY {id}");
        let years: Vec<String> = node.zero_fraction_by_year.iter().map(|(y, z)| format!("{y}={z:.4}")).collect();
        let _ = writeln!(out, "zero fraction by year: {}", years.join(", "));
        let weeks: Vec<String> = node.week_profile.iter().map(|(w, v)| format!("{w}:{v:.4}")).collect();
        let _ = writeln!(out, "week profile: {}", weeks.join(" "));
    }
    out.push_str("\nReply with exactly one line: PROFILE: zero_valley or PROFILE: positive_floor\n");
    out
}

/// Classifies the dataset from three seeded sample entities. A language
/// model policy is asked first; the zero-fraction heuristic covers every
/// other case, including unusable replies.
pub fn profile_dataset(kg: &KnowledgeGraph<Real>, policy: &mut dyn ReasonerPolicy, sample_seed: u64) -> DatasetProfile {
    let ids: Vec<&String> = kg.nodes.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
    let mut picks: Vec<usize> = if ids.len() <= SAMPLE_SIZE {
        (0..ids.len()).collect()
    } else {
        sample(&mut rng, ids.len(), SAMPLE_SIZE).into_vec()
    };
    picks.sort_unstable();
    let chosen: Vec<&String> = picks.iter().map(|&i| ids[i]).collect();

    let evidence: Vec<ProfileEvidence> = chosen
        .iter()
        .map(|id| ProfileEvidence {
            entity_id: (*id).clone(),
            zero_fraction_by_year: kg.nodes[*id].zero_fraction_by_year.clone(),
        })
        .collect();
    let pairs: Vec<Real> = evidence.iter().flat_map(|e| e.zero_fraction_by_year.values().copied()).collect();
    let per_entity: Vec<Real> = evidence
        .iter()
        .filter_map(|e| median(&e.zero_fraction_by_year.values().copied().collect::<Vec<_>>()))
        .collect();
    let median_zero_fraction = median(&pairs).unwrap_or(0.0);
    let median_entity_zero_fraction = median(&per_entity).unwrap_or(0.0);
    tracing::info!(median_zero_fraction, median_entity_zero_fraction, "profiling sample");

    let mut kind = heuristic_profile(&pairs);
    let mut source = ProfileSource::Heuristic;
    if policy.is_language_model() && !chosen.is_empty() {
        match policy.decide(&render_prompt(kg, &chosen)) {
            Ok(reply) => match parse_profile_reply(&reply) {
                Some(k) => {
                    kind = k;
                    source = ProfileSource::Policy;
                }
                None => tracing::warn!("unparseable profile reply; using heuristic"),
            },
            Err(e) => tracing::warn!("profile request failed ({e}); using heuristic"),
        }
    }
    DatasetProfile { kind, source, evidence, median_zero_fraction, median_entity_zero_fraction }
}
