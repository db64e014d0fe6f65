use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::{count, lit, median, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasEstimate<T> {
    /// `|mean error| > 0.3 * mean absolute error`.
    pub directional: bool,
    /// Median of actual / predicted over strictly positive pairs.
    pub gamma: T,
    /// Multiplier handed to the statistical tier after trailing-zero decay.
    pub gamma_decayed: T,
    pub mean_error: T,
    pub mean_abs_error: T,
    pub positive_pairs: usize,
}

impl<T: Scalar> BiasEstimate<T> {
    pub fn neutral() -> Self {
        BiasEstimate {
            directional: false,
            gamma: T::one(),
            gamma_decayed: T::one(),
            mean_error: T::zero(),
            mean_abs_error: T::zero(),
            positive_pairs: 0,
        }
    }
}

/// Number of consecutive zero values at the end of `values`.
pub fn trailing_zeros<T: Scalar>(values: &[T]) -> u32 {
    values.iter().rev().take_while(|v| **v <= T::zero()).count() as u32
}

/// Learns a multiplicative bias from paired recent predictions and actuals.
///
/// The bias only counts as directional when `|mu_e| > 0.3 * mu_|e|`. The
/// multiplier decays towards 1 as `1 + (gamma - 1) * 0.5^k` when there are
/// `k > 0` trailing zero weeks and `gamma > 1`.
pub fn learn_bias<T: Scalar>(predictions: &[T], actuals: &[T], trailing_zeros: u32) -> Result<BiasEstimate<T>> {
    if predictions.len() != actuals.len() {
        return Err(Error::Argument(format!(
            "learn_bias: {} predictions but {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Ok(BiasEstimate::neutral());
    }
    let n: T = count(predictions.len());
    let (sum_e, sum_abs) = predictions
        .iter()
        .zip(actuals)
        .fold((T::zero(), T::zero()), |(s, a), (&p, &y)| (s + (y - p), a + (y - p).abs()));
    let mean_error = sum_e / n;
    let mean_abs_error = sum_abs / n;

    let ratios: Vec<T> = predictions
        .iter()
        .zip(actuals)
        .filter(|(p, y)| **p > T::zero() && **y > T::zero())
        .map(|(&p, &y)| y / p)
        .collect();
    let Some(gamma) = median(&ratios) else {
        return Ok(BiasEstimate {
            mean_error,
            mean_abs_error,
            ..BiasEstimate::neutral()
        });
    };

    let directional = mean_error.abs() > lit::<T>(0.3) * mean_abs_error;
    let gamma_decayed = if !directional {
        T::one()
    } else if trailing_zeros > 0 && gamma > T::one() {
        T::one() + (gamma - T::one()) * lit::<T>(0.5).powi(trailing_zeros as i32)
    } else {
        gamma
    };
    Ok(BiasEstimate {
        directional,
        gamma,
        gamma_decayed,
        mean_error,
        mean_abs_error,
        positive_pairs: ratios.len(),
    })
}
