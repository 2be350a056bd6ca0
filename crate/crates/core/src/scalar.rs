//! Scalar abstraction shared by every numerical routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Floating point scalar the solvers and simulators are generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from an `f64` constant.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 constant representable in scalar type")
    }

    #[inline]
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    /// Widening conversion used for reports and serialization.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `n + 1` equally spaced points from `lo` to `hi`, with the last point pinned to `hi`.
pub fn linspace<S: Real>(lo: S, hi: S, n: usize) -> Vec<S> {
    let step = (hi - lo) / S::from_usize_lossy(n);
    let mut out: Vec<S> = (0..=n)
        .map(|i| lo + step * S::from_usize_lossy(i))
        .collect();
    if let Some(last) = out.last_mut() {
        *last = hi;
    }
    out
}
