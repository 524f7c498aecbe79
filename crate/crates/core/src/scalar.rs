use std::fmt::Debug;
use std::ops::{Add, Mul};

/// Element type stored in tensor value rows.
///
/// Integer scalars are used for adjacency and distance annotations and must
/// stay exact; float scalars carry hidden features.
pub trait Scalar:
    Copy + Debug + PartialOrd + PartialEq + Send + Sync + Add<Output = Self> + Mul<Output = Self> + 'static
{
    const IS_FLOAT: bool;

    fn zero() -> Self;
    fn one() -> Self;
    fn to_f64(self) -> f64;
    /// Lossy for integers (truncation toward zero).
    fn from_f64(v: f64) -> Self;
    /// `self / count`, used for mean aggregation.
    fn div_count(self, count: usize) -> Self;

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }

    fn min_of(self, other: Self) -> Self {
        if other < self {
            other
        } else {
            self
        }
    }
}

macro_rules! float_scalar {
    ($t:ty) => {
        impl Scalar for $t {
            const IS_FLOAT: bool = true;
            fn zero() -> Self {
                0.0
            }
            fn one() -> Self {
                1.0
            }
            fn to_f64(self) -> f64 {
                self as f64
            }
            fn from_f64(v: f64) -> Self {
                v as $t
            }
            fn div_count(self, count: usize) -> Self {
                self / count as $t
            }
        }
    };
}

float_scalar!(f32);
float_scalar!(f64);

impl Scalar for i64 {
    const IS_FLOAT: bool = false;
    fn zero() -> Self {
        0
    }
    fn one() -> Self {
        1
    }
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as i64
    }
    fn div_count(self, count: usize) -> Self {
        self / count as i64
    }
}
