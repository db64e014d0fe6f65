//! Scalar abstraction shared by the numeric kernels.
//!
//! The tools, curve features, DTW and metrics are written against [`Scalar`]
//! so they run on `f32` as well as `f64`. The week-by-week pipeline fixes the
//! scalar to [`crate::Real`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + Debug + Display + Default + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Scalar>(x: f64) -> T {
    T::from_f64(x).expect("f64 literal representable in scalar type")
}

/// Converts a count into `T`.
#[inline]
pub fn count<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("count representable in scalar type")
}

pub fn mean<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let sum = values.iter().fold(T::zero(), |acc, &v| acc + v);
    Some(sum / count(values.len()))
}

/// Population standard deviation (divides by N).
pub fn std_dev<T: Scalar>(values: &[T]) -> Option<T> {
    let m = mean(values)?;
    let ss = values
        .iter()
        .fold(T::zero(), |acc, &v| acc + (v - m) * (v - m));
    Some((ss / count(values.len())).sqrt())
}

fn sorted<T: Scalar>(values: &[T]) -> Vec<T> {
    let mut v: Vec<T> = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v
}

/// Median; even-length samples average the two middle values.
pub fn median<T: Scalar>(values: &[T]) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    let v = sorted(values);
    let n = v.len();
    if n % 2 == 1 {
        Some(v[n / 2])
    } else {
        Some((v[n / 2 - 1] + v[n / 2]) / lit(2.0))
    }
}

/// Linear-interpolation percentile of an already sorted sample, `pct` in [0, 100].
pub fn percentile_of_sorted<T: Scalar>(sorted: &[T], pct: T) -> T {
    assert!(!sorted.is_empty());
    if sorted.len() == 1 {
        return sorted[0];
    }
    let hundred: T = lit(100.0);
    let pct = pct.max(T::zero()).min(hundred);
    let rank = pct / hundred * count(sorted.len() - 1);
    let lower = rank.floor();
    let idx = lower.to_usize().unwrap_or(0);
    if idx + 1 >= sorted.len() {
        return sorted[sorted.len() - 1];
    }
    let frac = rank - lower;
    sorted[idx] + (sorted[idx + 1] - sorted[idx]) * frac
}

/// Linear-interpolation percentile of an unsorted sample.
pub fn percentile<T: Scalar>(values: &[T], pct: T) -> Option<T> {
    if values.is_empty() {
        return None;
    }
    Some(percentile_of_sorted(&sorted(values), pct))
}
