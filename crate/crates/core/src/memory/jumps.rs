use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{lit, percentile_of_sorted, Scalar};

/// Percentiles of week-on-week ratios `y_t / y_{t-1}` over training series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct JumpDistribution<T> {
    pub p01: T,
    pub p05: T,
    pub p10: T,
    pub p90: T,
    pub p95: T,
    pub p99: T,
    pub samples: usize,
}

/// Pools consecutive ratios from every series, skipping pairs whose earlier
/// value is zero, and summarizes them with linear-interpolation percentiles.
pub fn jump_distribution<'a, T: Scalar>(series: impl IntoIterator<Item = &'a [T]>) -> Result<JumpDistribution<T>> {
    let mut ratios: Vec<T> = series
        .into_iter()
        .flat_map(|s| s.windows(2))
        .filter(|w| w[0] > T::zero())
        .map(|w| w[1] / w[0])
        .collect();
    if ratios.is_empty() {
        return Err(Error::config("no consecutive pair with a positive earlier value for the jump distribution"));
    }
    ratios.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let p = |pct: f64| percentile_of_sorted(&ratios, lit(pct));
    Ok(JumpDistribution {
        p01: p(1.0),
        p05: p(5.0),
        p10: p(10.0),
        p90: p(90.0),
        p95: p(95.0),
        p99: p(99.0),
        samples: ratios.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degenerate_distribution() {
        let s = [1.0, 2.0, 4.0];
        let j = jump_distribution([&s[..]]).unwrap();
        for p in [j.p01, j.p05, j.p10, j.p90, j.p95, j.p99] {
            assert_eq!(p, 2.0);
        }
    }

    #[test]
    fn zero_predecessors_are_excluded() {
        let s = [0.0f64, 3.0, 0.0, 0.0, 5.0, 10.0];
        let j = jump_distribution([&s[..]]).unwrap();
        assert_eq!(j.samples, 2);
        assert!((j.p01 - 0.02).abs() < 1e-12);
        assert!((j.p99 - 1.98).abs() < 1e-12);
    }

    #[test]
    fn no_pairs_is_configuration_error() {
        let s = [0.0, 0.0, 1.0];
        assert!(matches!(jump_distribution([&s[..]]), Err(Error::Config(_))));
    }

    proptest! {
        #[test]
        fn percentiles_are_monotone(series in prop::collection::vec(prop::collection::vec(0.0f64..10.0, 2..20), 1..5)) {
            let slices: Vec<&[f64]> = series.iter().map(|s| s.as_slice()).collect();
            if let Ok(j) = jump_distribution(slices) {
                prop_assert!(j.p01 <= j.p05 && j.p05 <= j.p10 && j.p10 <= j.p90 && j.p90 <= j.p95 && j.p95 <= j.p99);
            }
        }
    }
}
