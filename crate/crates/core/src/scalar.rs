//! Scalar abstraction for the numerical core.
//!
//! All physics in this crate is written against [`Scalar`], so the same code
//! runs in `f32` or `f64`. Production entry points (config, CLI, sweeps)
//! instantiate everything with [`crate::Float`] = `f64`.

/// Real scalar type usable by every numerical routine in this crate.
///
/// Blanket-implemented for anything that is a nalgebra real field and can be
/// built from `f64` literals, i.e. `f32` and `f64`.
pub trait Scalar:
    nalgebra::RealField + num_traits::FromPrimitive + num_traits::ToPrimitive + Copy
{
    /// Lift an `f64` constant into the scalar type.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("constant not representable in scalar type")
    }

    /// Back-conversion used by samplers and report writers.
    #[inline]
    fn as_f64(self) -> f64 {
        num_traits::ToPrimitive::to_f64(&self).expect("scalar convertible to f64")
    }
}

impl<T> Scalar for T where
    T: nalgebra::RealField + num_traits::FromPrimitive + num_traits::ToPrimitive + Copy
{
}

#[cfg(test)]
mod tests {
    use super::*;

    fn generic_midpoint<T: Scalar>(a: T, b: T) -> T {
        (a + b) / T::lit(2.0)
    }

    #[test]
    fn works_for_both_float_widths() {
        assert_eq!(generic_midpoint(1.0f64, 3.0f64), 2.0);
        assert_eq!(generic_midpoint(1.0f32, 3.0f32), 2.0);
    }
}
