use serde::{Deserialize, Serialize};

use crate::scalar::{lit, percentile, Scalar};

/// Fewer historical comparisons than this and the check defers.
const MIN_SAMPLES: usize = 3;
/// Additive buffer on fractional change outside [P10, P90].
const BUFFER: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RangeVerdict<T> {
    pub in_range: bool,
    pub clamped_value: Option<T>,
    pub p10: T,
    pub p90: T,
    pub samples: usize,
    /// Fractional change of the prediction over the last observation, when defined.
    pub change: Option<T>,
}

impl<T: Scalar> RangeVerdict<T> {
    pub fn deferred(samples: usize) -> Self {
        RangeVerdict {
            in_range: true,
            clamped_value: None,
            p10: T::zero(),
            p90: T::zero(),
            samples,
            change: None,
        }
    }
}

/// Checks the fractional change `(y_hat - y_prev) / y_prev` against the
/// historical changes at the same seasonal position, widened by 0.5 on each
/// side. Breaches clamp to `y_prev * (1 + P90)` or `y_prev * (1 + P10)`.
pub fn validate_range<T: Scalar>(y_hat: T, y_prev: T, position_samples: &[T]) -> RangeVerdict<T> {
    let samples = position_samples.len();
    if samples < MIN_SAMPLES {
        return RangeVerdict::deferred(samples);
    }
    let p10 = percentile(position_samples, lit(10.0)).expect("non-empty");
    let p90 = percentile(position_samples, lit(90.0)).expect("non-empty");
    if y_prev == T::zero() {
        return RangeVerdict {
            p10,
            p90,
            ..RangeVerdict::deferred(samples)
        };
    }
    let change = (y_hat - y_prev) / y_prev;
    let buffer: T = lit(BUFFER);
    let clamped_value = if change > p90 + buffer {
        Some(y_prev * (T::one() + p90))
    } else if change < p10 - buffer {
        Some(y_prev * (T::one() + p10))
    } else {
        None
    };
    RangeVerdict {
        in_range: clamped_value.is_none(),
        clamped_value,
        p10,
        p90,
        samples,
        change: Some(change),
    }
}

/// Historical fractional changes over `horizon` weeks that land on
/// `iso_week`, pooled over one series. Pairs whose earlier value is zero are
/// skipped since the change is undefined.
pub fn horizon_changes<T: Scalar>(values: &[T], iso_weeks: &[u32], iso_week: u32, horizon: usize) -> Vec<T> {
    debug_assert_eq!(values.len(), iso_weeks.len());
    (horizon..values.len())
        .filter(|&i| iso_weeks[i] == iso_week && values[i - horizon] > T::zero())
        .map(|i| (values[i] - values[i - horizon]) / values[i - horizon])
        .collect()
}
