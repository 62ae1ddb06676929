//! Numeric traits shared by the learners and the metrics.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, Num, NumAssign};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the sequence learners are written against: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    fn from_f64_lossy(v: f64) -> Self {
        Self::from_f64(v).expect("finite f64 converts")
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count converts")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Value type for contingency-table metrics.
///
/// Only field operations are needed to compute F1 and kappa, so exact
/// rationals (`num_rational::Ratio<i128>`) work as well as floats.
pub trait MetricValue: Num + Copy + PartialOrd + FromPrimitive + Debug {
    fn from_count(n: u64) -> Self {
        Self::from_u64(n).expect("count converts")
    }
}

impl<T: Num + Copy + PartialOrd + FromPrimitive + Debug> MetricValue for T {}
