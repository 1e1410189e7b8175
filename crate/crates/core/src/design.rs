//! Closed-form opening/closing transient formulas for enhanced-blowdown
//! valves, parameterized by the dimensionless tuple (delta, eta, k, Delta_bd).
//!
//! `eta` and `k_geom` are opaque design parameters of the blowdown-curve
//! family; this module evaluates the published force expressions, it does not
//! derive the parameters from geometry.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Dimensionless blowdown-design parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlowdownDesign<T> {
    /// Pressure ratio p_set / p_b.
    pub delta: T,
    /// Design parameter of the blowdown-curve family.
    pub eta: T,
    /// Geometric design parameter (distinct from the spring rate).
    pub k_geom: T,
    /// Blowdown fraction in (0, 1).
    pub delta_bd: T,
}

impl<T: Scalar> BlowdownDesign<T> {
    pub fn new(delta: T, eta: T, k_geom: T, delta_bd: T) -> Result<Self> {
        if !(delta > T::one()) {
            return Err(Error::domain("BlowdownDesign", "delta = p_set/p_b must exceed 1"));
        }
        if !(delta_bd > T::zero() && delta_bd < T::one()) {
            return Err(Error::domain("BlowdownDesign", "Delta_bd must lie in (0, 1)"));
        }
        if !(k_geom > T::one()) {
            return Err(Error::domain("BlowdownDesign", "k_geom must exceed 1"));
        }
        Ok(Self { delta, eta, k_geom, delta_bd })
    }

    fn guard(&self) -> Result<()> {
        if (self.k_geom - T::one()).abs() < T::lit(1e-12) || (self.delta_bd - T::one()).abs() < T::lit(1e-12)
        {
            return Err(Error::domain("BlowdownDesign", "singular denominator: k = 1 or Delta_bd = 1"));
        }
        Ok(())
    }

    /// Quadratic and linear coefficients (A, B) of the dimensionless opening
    /// force F_op(y) = A y^2 - B y.
    pub fn opening_coefficients(&self) -> Result<(T, T)> {
        self.guard()?;
        let (d, e, k, bd) = (self.delta, self.eta, self.k_geom, self.delta_bd);
        let denom = d * k * (bd - T::one()) * (k - T::one());
        let a = (((k - T::one()) * d + e * k) * bd + d) / denom;
        let b = (((k * k - T::one()) * d + e * k * k) * bd + d) / denom;
        Ok((a, b))
    }

    /// Dimensionless lifting force during opening at lift fraction `y`.
    pub fn opening_force(&self, y: T) -> Result<T> {
        let (a, b) = self.opening_coefficients()?;
        Ok(a * y * y - b * y)
    }

    /// Dimensionless driving force during closing at lift fraction `y`.
    pub fn closing_force(&self, y: T) -> Result<T> {
        self.guard()?;
        let (d, e, k, bd) = (self.delta, self.eta, self.k_geom, self.delta_bd);
        let denom = d * k * (k - T::one());
        let a = (((k - T::one()) * bd + T::one()) * d + e * k * bd) / denom;
        let b = (((k * k - T::one()) * bd + T::one()) * d + e * k * bd) / denom;
        Ok(a * y * y - b * y + bd)
    }

    /// Closed-form lifting force at maximum lift, Delta_bd (delta + eta) /
    /// ((1 - Delta_bd) delta).
    pub fn opening_force_at_full_lift(&self) -> Result<T> {
        self.guard()?;
        Ok(self.delta_bd * (self.delta + self.eta) / ((T::one() - self.delta_bd) * self.delta))
    }

    /// Dimensionless opening work: the closed-form integral of F_op over
    /// y in [0, 1], A/3 - B/2.
    pub fn opening_energy(&self) -> Result<T> {
        let (a, b) = self.opening_coefficients()?;
        Ok(a / T::lit(3.0) - b / T::lit(2.0))
    }

    /// Slope of the opening force at zero lift as printed in the design
    /// formulas: 1/((k-1)k) + k Delta_bd (eta + 1)/((1 - Delta_bd)(k - 1)).
    ///
    /// Note this is not algebraically identical to [`Self::opening_force_slope`];
    /// both are reported, neither is asserted against the other.
    pub fn small_lift_slope(&self) -> Result<T> {
        self.guard()?;
        let (e, k, bd) = (self.eta, self.k_geom, self.delta_bd);
        Ok(T::one() / ((k - T::one()) * k) + k * bd * (e + T::one()) / ((T::one() - bd) * (k - T::one())))
    }

    /// Direct derivative dF_op/dy at y = 0, i.e. minus the linear coefficient.
    pub fn opening_force_slope(&self) -> Result<T> {
        let (_, b) = self.opening_coefficients()?;
        Ok(-b)
    }
}

/// Dimensional opening work for a specific valve:
/// `P = p_set p0 A_seat [(a1_hat - s D/(4 p_set p0 A_seat))/2 + a2_hat/3]`
/// where (a1_hat, a2_hat) are the linear/quadratic coefficients of the
/// effective-area polynomial, `s` the spring rate and `p0` the caller's
/// reference pressure for the dimensionless force.
#[allow(clippy::too_many_arguments)]
pub fn opening_energy_physical<T: Scalar>(
    a1_hat: T,
    a2_hat: T,
    spring_k: T,
    seat_diameter: T,
    p_set: T,
    p0: T,
    a_seat: T,
) -> T {
    let scale = p_set * p0 * a_seat;
    scale * ((a1_hat - spring_k * seat_diameter / (T::lit(4.0) * scale)) / T::lit(2.0)
        + a2_hat / T::lit(3.0))
}
