use serde::{Deserialize, Serialize};

use crate::scalar::{count, mean, std_dev, Scalar};

/// Curve geometry used for similarity retrieval.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ShapeVector<T> {
    pub cv: T,
    pub t_peak: T,
    pub t_trough: T,
    /// `min(n_peaks, 5) / 5`.
    pub peaks_capped: T,
    /// Peak over mean; 0 when the mean is 0.
    pub spikiness: T,
    /// Mean over peak; 0 when the peak is 0.
    pub inverse_spikiness: T,
}

impl<T: Scalar> ShapeVector<T> {
    pub fn components(&self) -> [T; 6] {
        [
            self.cv,
            self.t_peak,
            self.t_trough,
            self.peaks_capped,
            self.spikiness,
            self.inverse_spikiness,
        ]
    }

    /// Euclidean distance between two shape vectors.
    pub fn distance(&self, other: &Self) -> T {
        self.components()
            .iter()
            .zip(other.components())
            .fold(T::zero(), |acc, (&a, b)| acc + (a - b) * (a - b))
            .sqrt()
    }
}

fn arg_extreme<T: Scalar>(values: &[T], better: impl Fn(T, T) -> bool) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if better(v, values[best]) {
            best = i;
        }
    }
    best
}

/// Builds the shape vector of a (possibly partial) curve. Ties in the
/// argmax/argmin resolve to the earliest week.
pub fn shape_vector<T: Scalar>(values: &[T]) -> ShapeVector<T> {
    let zero = T::zero();
    let Some(m) = mean(values) else {
        return ShapeVector {
            cv: zero,
            t_peak: zero,
            t_trough: zero,
            peaks_capped: zero,
            spikiness: zero,
            inverse_spikiness: zero,
        };
    };
    let n: T = count(values.len());
    let sd = std_dev(values).unwrap_or(zero);
    let i_peak = arg_extreme(values, |a, b| a > b);
    let i_trough = arg_extreme(values, |a, b| a < b);
    let y_peak = values[i_peak];
    let n_peaks = values
        .windows(3)
        .filter(|w| w[0] < w[1] && w[1] >= w[2])
        .count();
    let guarded = |num: T, den: T| if den == zero { zero } else { num / den };
    ShapeVector {
        cv: guarded(sd, m),
        t_peak: count::<T>(i_peak) / n,
        t_trough: count::<T>(i_trough) / n,
        peaks_capped: count::<T>(n_peaks.min(5)) / count(5),
        spikiness: guarded(y_peak, m),
        inverse_spikiness: guarded(m, y_peak),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarPlot<T> {
    pub entity_id: String,
    pub distance: T,
    /// Whether the match came from an archived test plot rather than the knowledge graph.
    pub archived: bool,
}

/// Returns up to three corpus entries closest to `target`, ascending by
/// distance with ties broken by id.
pub fn find_similar<'a, T: Scalar>(
    target: &ShapeVector<T>,
    corpus: impl IntoIterator<Item = (&'a str, &'a ShapeVector<T>, bool)>,
) -> Vec<SimilarPlot<T>> {
    let mut scored: Vec<SimilarPlot<T>> = corpus
        .into_iter()
        .map(|(id, v, archived)| SimilarPlot {
            entity_id: id.to_string(),
            distance: target.distance(v),
            archived,
        })
        .collect();
    scored.sort_by(|a, b| {
        a.distance
            .partial_cmp(&b.distance)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| a.entity_id.cmp(&b.entity_id))
    });
    scored.truncate(3);
    scored
}
