use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssignOps};

/// Floating point type the model and solvers are written over: `f32` or `f64`.
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + NumAssignOps
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal. Every value used this way is finite, so the
    /// conversion cannot fail for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("finite literal")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }

    #[inline]
    fn two() -> Self {
        Self::lit(2.0)
    }

    /// `[self]⁺`
    #[inline]
    fn pos(self) -> Self {
        self.max(Self::zero())
    }

    #[inline]
    fn clamp01(self) -> Self {
        self.max(Self::zero()).min(Self::one())
    }
}

impl<T> Scalar for T where
    T: Float
        + FloatConst
        + FromPrimitive
        + NumAssignOps
        + Default
        + Debug
        + Display
        + Send
        + Sync
        + 'static
{
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn helpers() {
        assert_eq!(f64::lit(0.25), 0.25);
        assert_eq!((-3.0f32).pos(), 0.0);
        assert_eq!(1.5f64.clamp01(), 1.0);
        assert_eq!((-0.5f64).clamp01(), 0.0);
        assert_eq!(f32::half() * f32::two(), 1.0);
    }
}
