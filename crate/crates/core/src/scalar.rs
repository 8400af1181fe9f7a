//! Numeric traits the formula code is written against.
//!
//! Prefix sizing and the objective ratios only need field arithmetic, so they
//! are generic over [`Scalar`] and can be evaluated exactly with rationals.
//! The popularity law needs real powers and is generic over [`Real`].

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Field-like number: f32, f64, or an exact rational such as `Ratio<i64>`.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + Debug {
    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + Debug {}

/// Floating point: f32 or f64.
pub trait Real: Scalar + Float + ToPrimitive + std::iter::Sum {}

impl Real for f32 {}
impl Real for f64 {}
