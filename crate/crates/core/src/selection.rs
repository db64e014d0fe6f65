//! DTW ranking of training entities against the test cohort.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::ingest::Entity;
use crate::scalar::Scalar;
use crate::Real;

/// Dynamic time warping with squared local cost and unit steps, returning
/// the square root of the accumulated cost. No warping window.
pub fn dtw_distance<T: Scalar>(a: &[T], b: &[T]) -> Result<T> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("dtw_distance needs two non-empty series".into()));
    }
    let m = b.len();
    let inf = T::infinity();
    let mut prev = vec![inf; m + 1];
    let mut cur = vec![inf; m + 1];
    prev[0] = T::zero();
    for &x in a {
        cur[0] = inf;
        for j in 1..=m {
            let d = x - b[j - 1];
            cur[j] = d * d + prev[j].min(cur[j - 1]).min(prev[j - 1]);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[m].sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RankedEntity {
    pub entity_id: String,
    pub mean_dtw_distance: Real,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRanking {
    pub k: usize,
    pub ranking: Vec<RankedEntity>,
}

#[derive(Serialize, Deserialize)]
struct CacheFile {
    fingerprint: String,
    ranking: SimilarityRanking,
}

/// Hash of the entity ids, series lengths and normalization scale.
pub fn fingerprint(train: &[&Entity], test: &[&Entity], k: usize, scale: Real) -> String {
    let mut h = Sha256::new();
    for (tag, group) in [("train", train), ("test", test)] {
        let mut rows: Vec<(&str, usize)> = group.iter().map(|e| (e.entity_id.as_str(), e.observations.len())).collect();
        rows.sort_unstable();
        for (id, n) in rows {
            h.update(format!("{tag}\t{id}\t{n}\n").as_bytes());
        }
    }
    h.update(format!("k={k}\nscale={scale:e}\n").as_bytes());
    hex::encode(h.finalize())
}

fn compute(train: &[&Entity], test: &[&Entity], k: usize) -> Result<SimilarityRanking> {
    let test_values: Vec<Vec<Real>> = test.iter().map(|e| e.values()).collect();
    let mut ranking = Vec::with_capacity(train.len());
    for e in train {
        let v = e.values();
        let mut total = 0.0;
        for t in &test_values {
            total += dtw_distance(&v, t)?;
        }
        let mean = if test_values.is_empty() { 0.0 } else { total / test_values.len() as Real };
        ranking.push(RankedEntity { entity_id: e.entity_id.clone(), mean_dtw_distance: mean });
    }
    ranking.sort_by(|a, b| {
        a.mean_dtw_distance
            .partial_cmp(&b.mean_dtw_distance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    ranking.truncate(k.min(train.len()));
    Ok(SimilarityRanking { k, ranking })
}

/// Ranks training entities by mean DTW distance to all test entities and
/// keeps the best `k`. With `cache_path`, a ranking stored under the same
/// dataset fingerprint is reused; otherwise it is recomputed and written.
pub fn rank_training_plots(
    train: &[&Entity],
    test: &[&Entity],
    k: usize,
    normalization_scale: Real,
    cache_path: Option<&Path>,
) -> Result<SimilarityRanking> {
    if k == 0 {
        return Err(Error::config("k must be at least 1"));
    }
    let fp = fingerprint(train, test, k, normalization_scale);
    if let Some(path) = cache_path.filter(|p| p.exists()) {
        let text = std::fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        match serde_json::from_str::<CacheFile>(&text) {
            Ok(c) if c.fingerprint == fp => return Ok(c.ranking),
            Ok(_) => tracing::info!("stale selection cache at {}; recomputing", path.display()),
            Err(e) => tracing::warn!("unreadable selection cache at {}: {e}; recomputing", path.display()),
        }
    }
    let ranking = compute(train, test, k)?;
    if let Some(path) = cache_path {
        let body = serde_json::to_string_pretty(&CacheFile { fingerprint: fp, ranking: ranking.clone() })?;
        std::fs::write(path, body).map_err(|e| Error::file(path, e))?;
    }
    Ok(ranking)
}
