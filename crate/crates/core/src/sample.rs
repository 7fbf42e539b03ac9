//! Scalar abstraction for the DSP core.
//!
//! Every numeric routine in this crate is generic over [`Sample`], which is
//! implemented for `f32` and `f64`. The concrete pipeline (config, file
//! formats, CLI) runs in `f64`; the generic bound exists so the filter and
//! stage math can be reused at single precision where memory matters.

use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

/// Floating-point sample type (`f32` or `f64`).
pub trait Sample:
    Float + FromPrimitive + ToPrimitive + NumAssign + Sum<Self> + Send + Sync + Debug + 'static
{
    /// Convert a parameter or constant given as `f64` into this sample type.
    #[inline]
    fn of(v: f64) -> Self {
        Self::from_f64(v).expect("f64 value representable as Sample")
    }

    /// Widen to `f64` for reporting and serialization.
    #[inline]
    fn to64(self) -> f64 {
        self.to_f64().expect("Sample value representable as f64")
    }
}

impl Sample for f32 {}
impl Sample for f64 {}
