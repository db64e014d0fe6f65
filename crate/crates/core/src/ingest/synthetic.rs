//! Deterministic synthetic yield data.
//!
//! Uses `ChaCha8Rng::seed_from_u64`, so a seed reproduces the same collection
//! on every platform. Seasonal series are squared-cosine bells over an ISO
//! calendar of 52 weeks with zero off-season; continuous series oscillate
//! around a positive level. Artifacts are resolved per test entity and are
//! applied by the built-in baseline, never to the observed truth.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Entity, EntityCollection, Observation, Split};
use crate::Real;

const WEEKS_PER_YEAR: u32 = 52;
/// First target week index whose prediction can be corrected: the context
/// window needs weeks t-5..t-2 and one lagged actual must have been seen.
const FIRST_CORRECTABLE_WEEK: u32 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesProfile {
    Seasonal,
    Continuous,
}

/// Baseline-side anomaly requested from the generator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactSpec {
    /// `count` isolated spikes before the season starts, `magnitude` times
    /// the entity's peak amplitude.
    PreSeasonSpike { magnitude: Real, count: usize },
    /// `count` spikes after the season has ended.
    PostSeasonSpike { magnitude: Real, count: usize },
    /// Every prediction multiplied by `factor`.
    ConstantBias { factor: Real },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ArtifactEffect {
    /// Added to q50 (in yield units).
    Spike { amount: Real },
    Scale { factor: Real },
}

/// An artifact resolved to one entity; `week_index = None` applies to all weeks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    pub entity_id: String,
    pub week_index: Option<u32>,
    pub effect: ArtifactEffect,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub seed: u64,
    pub n_train: usize,
    pub n_test: usize,
    pub profile: SeriesProfile,
    pub artifacts: Vec<ArtifactSpec>,
    pub train_years: Vec<i32>,
    pub test_year: i32,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            seed: 7,
            n_train: 30,
            n_test: 10,
            profile: SeriesProfile::Seasonal,
            artifacts: Vec::new(),
            train_years: vec![2021, 2022],
            test_year: 2023,
        }
    }
}

struct Shape {
    peak_week: f64,
    half_width: f64,
    amplitude: f64,
    phase: f64,
}

const VARIETIES: [&str; 4] = ["Malling Centenary", "Favori", "Sonata", "Elsanta"];
const TUNNELS: [&str; 2] = ["Spanish", "Haygrove"];

pub fn generate_synthetic(spec: &SyntheticSpec) -> EntityCollection {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut entities = Vec::with_capacity(spec.n_train + spec.n_test);
    let mut artifacts = Vec::new();

    let plan = (0..spec.n_train)
        .map(|i| (format!("train-{i:03}"), Split::Train, spec.train_years.clone()))
        .chain((0..spec.n_test).map(|i| (format!("test-{i:03}"), Split::Test, vec![spec.test_year])));

    for (entity_id, split, years) in plan {
        let shape = Shape {
            peak_week: rng.gen_range(22.0..30.0),
            half_width: rng.gen_range(7.0..11.0),
            amplitude: rng.gen_range(60.0..140.0),
            phase: rng.gen_range(0.0..WEEKS_PER_YEAR as f64),
        };
        let mut metadata = BTreeMap::new();
        metadata.insert("farm".to_string(), format!("F{}", rng.gen_range(1..=4)));
        metadata.insert("variety".to_string(), VARIETIES[rng.gen_range(0..VARIETIES.len())].to_string());
        metadata.insert("tunnel".to_string(), TUNNELS[rng.gen_range(0..TUNNELS.len())].to_string());
        metadata.insert("plot_size".to_string(), format!("{:.1}", rng.gen_range(1.0..6.0)));

        let mut observations = Vec::new();
        for year in years {
            let peak = shape.peak_week + rng.gen_range(-2.0..2.0);
            let amplitude = shape.amplitude * rng.gen_range(0.85..1.15);
            for week in 1..=WEEKS_PER_YEAR {
                let w = week as f64;
                let value = match spec.profile {
                    SeriesProfile::Seasonal => {
                        let d = (w - peak) / shape.half_width;
                        let noise = 1.0 + 0.1 * rng.gen_range(-1.0..1.0);
                        if d.abs() < 1.0 {
                            amplitude * (0.5 * PI * d).cos().powi(2) * noise
                        } else {
                            0.0
                        }
                    }
                    SeriesProfile::Continuous => {
                        let noise = 1.0 + 0.05 * rng.gen_range(-1.0..1.0);
                        let wave = (2.0 * PI * (w + shape.phase) / WEEKS_PER_YEAR as f64).sin();
                        amplitude * (1.0 + 0.4 * wave) * noise
                    }
                };
                observations.push(Observation {
                    week_index: observations.len() as u32,
                    iso_week: week,
                    year,
                    yield_value: value,
                    filled: false,
                });
            }
        }

        if split == Split::Test {
            artifacts.extend(resolve_artifacts(&mut rng, spec, &entity_id, &observations, shape.amplitude));
        }
        entities.push(Entity {
            entity_id,
            metadata,
            observations,
            split,
        });
    }

    EntityCollection {
        entities,
        dataset_name: format!("synthetic-{:?}-seed{}", spec.profile, spec.seed).to_lowercase(),
        normalization_scale: 1.0,
        artifacts,
    }
}

fn resolve_artifacts(
    rng: &mut ChaCha8Rng,
    spec: &SyntheticSpec,
    entity_id: &str,
    observations: &[Observation],
    amplitude: f64,
) -> Vec<Artifact> {
    let last = observations.len() as u32 - 1;
    let onset = observations.iter().position(|o| o.yield_value > 0.0).map(|i| i as u32);
    let end = observations.iter().rposition(|o| o.yield_value > 0.0).map(|i| i as u32);
    let mut out = Vec::new();
    for artifact in &spec.artifacts {
        let (range, magnitude, count) = match *artifact {
            ArtifactSpec::ConstantBias { factor } => {
                out.push(Artifact {
                    entity_id: entity_id.to_string(),
                    week_index: None,
                    effect: ArtifactEffect::Scale { factor },
                });
                continue;
            }
            ArtifactSpec::PreSeasonSpike { magnitude, count } => {
                let hi = onset.map(|o| o.saturating_sub(2)).unwrap_or(last);
                (FIRST_CORRECTABLE_WEEK..=hi, magnitude, count)
            }
            ArtifactSpec::PostSeasonSpike { magnitude, count } => {
                let lo = end.map(|e| e + 3).unwrap_or(FIRST_CORRECTABLE_WEEK);
                (lo.max(FIRST_CORRECTABLE_WEEK)..=last, magnitude, count)
            }
        };
        let mut weeks: Vec<u32> = range.collect();
        weeks.shuffle(rng);
        weeks.truncate(count);
        weeks.sort_unstable();
        for week_index in weeks {
            out.push(Artifact {
                entity_id: entity_id.to_string(),
                week_index: Some(week_index),
                effect: ArtifactEffect::Spike {
                    amount: magnitude * amplitude,
                },
            });
        }
    }
    out
}
