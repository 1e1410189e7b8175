//! Steady-flow dynamic equilibria of the valve-pipe-tank system: the
//! characteristic curve `p_r = P(x_e)`, effective stiffness, fold location
//! and blowdown.
//!
//! The curve is parameterized by the equilibrium lift `x_e` (never by
//! pressure, which is multivalued at folds). Gas service uses by default the
//! same `p* = p_v - p_b` approximation as the liquid case; the exact gas
//! branch (`p* = p_v`) is available through [`SteadyOptions::gas_exact`].

use crate::error::{Error, Result};
use crate::fluid::{Ambient, FluidKind, FluidModel};
use crate::geom::{EffectiveAreaModel, ValveGeometry};
use crate::scalar::Scalar;

/// Convention flags for the steady-flow relations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SteadyOptions {
    /// Include the pipe inlet pressure loss chi (tank-to-pipe drop).
    pub inlet_loss: bool,
    /// Gas service only: use the exact choked form `p* = p_v` instead of the
    /// liquid-style approximation `p* = p_v - p_b`.
    pub gas_exact: bool,
}

impl Default for SteadyOptions {
    fn default() -> Self {
        Self { inlet_loss: true, gas_exact: false }
    }
}

/// One point of the equilibrium characteristic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint<T> {
    /// Equilibrium lift, m.
    pub x_e: T,
    /// Pressure at the valve end of the pipe, Pa.
    pub p_v: T,
    /// Tank pressure, Pa.
    pub p_r: T,
    /// Mass flow through the valve, kg/s.
    pub mdot: T,
    /// Pipe flow velocity (uniform in steady state), m/s.
    pub v_l: T,
}

/// Fold (saddle-node) of the characteristic curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldPoint<T> {
    pub x_fold: T,
    pub p_fold: T,
}

/// Sampled characteristic curve with located folds.
#[derive(Debug, Clone, PartialEq)]
pub struct CharacteristicCurve<T> {
    pub samples: Vec<EquilibriumPoint<T>>,
    pub folds: Vec<FoldPoint<T>>,
}

/// Bundle of everything needed to evaluate steady-flow relations.
#[derive(Debug, Clone)]
pub struct SteadyModel<'a, T> {
    pub fluid: &'a FluidModel<T>,
    pub geom: &'a ValveGeometry<T>,
    pub aeff: &'a EffectiveAreaModel<T>,
    pub ambient: &'a Ambient<T>,
    pub options: SteadyOptions,
}

impl<'a, T: Scalar> SteadyModel<'a, T> {
    pub fn new(
        fluid: &'a FluidModel<T>,
        geom: &'a ValveGeometry<T>,
        aeff: &'a EffectiveAreaModel<T>,
        ambient: &'a Ambient<T>,
        options: SteadyOptions,
    ) -> Self {
        Self { fluid, geom, aeff, ambient, options }
    }

    /// Driving pressure entering the discharge velocity, per the active
    /// convention.
    fn p_star(&self, p_v: T) -> T {
        match self.fluid.kind {
            FluidKind::Gas if self.options.gas_exact => p_v,
            _ => p_v - self.ambient.p_b,
        }
    }

    /// Inlet loss at (p_r, v); zero when disabled by the options.
    pub fn chi(&self, p_r: T, v: T) -> Result<T> {
        if !self.options.inlet_loss {
            return Ok(T::zero());
        }
        self.fluid.inlet_loss_chi(p_r, v)
    }

    /// Discharge velocity v_L(x, p_v) at the valve end of the pipe.
    pub fn discharge_velocity(&self, x: T, p_v: T) -> Result<T> {
        let p_star = self.p_star(p_v);
        if p_star < T::zero() {
            return Ok(T::zero());
        }
        let a_ft = self.geom.flow_through_area(x)?;
        let ck = self.fluid.choking_factor()?;
        Ok(self.geom.cd_at(x) * ck * a_ft / self.geom.seat_area() * (p_star / self.fluid.rho).sqrt())
    }

    /// Mass flow through the valve at (x, p_v).
    pub fn mass_flow(&self, x: T, p_v: T) -> Result<T> {
        Ok(self.fluid.rho * self.geom.seat_area() * self.discharge_velocity(x, p_v)?)
    }

    /// Equilibrium at a prescribed lift: force balance fixes `p_v`, the
    /// discharge relation fixes the mass flow, and the inlet-loss relation
    /// `p_r (1 - chi) = p_v` is solved to relative 1e-12 by damped fixed-point
    /// iteration.
    pub fn equilibrium_for_lift(&self, x_e: T) -> Result<EquilibriumPoint<T>> {
        if !(x_e > T::zero() && x_e <= self.geom.x_stop * (T::one() + T::lit(1e-12))) {
            return Err(Error::Precondition {
                context: "equilibrium_for_lift",
                message: format!("lift {} outside (0, x_stop]", x_e.as_f64()),
            });
        }
        let a_eff = self.aeff.area(self.geom, x_e)?;
        if a_eff <= T::zero() {
            return Err(Error::domain("equilibrium_for_lift", "degenerate geometry: A_eff <= 0"));
        }
        let p_v = self.ambient.p_b + self.geom.spring_k * (self.geom.x_pre + x_e) / a_eff;
        let v_l = self.discharge_velocity(x_e, p_v)?;
        let mdot = self.fluid.rho * self.geom.seat_area() * v_l;
        let p_r = self.solve_reservoir_pressure(p_v, v_l)?;
        Ok(EquilibriumPoint { x_e, p_v, p_r, mdot, v_l })
    }

    /// Fixed point of p_r = p_v / (1 - chi(p_r, v_l)).
    fn solve_reservoir_pressure(&self, p_v: T, v_l: T) -> Result<T> {
        if !self.options.inlet_loss {
            return Ok(p_v);
        }
        let tol = T::lit(1e-12);
        let damping = T::lit(0.8);
        let mut p_r = p_v;
        for _ in 0..200 {
            let chi = self.fluid.inlet_loss_chi(p_r, v_l)?;
            if chi >= T::one() {
                return Err(Error::SolverFailure {
                    context: "solve_reservoir_pressure",
                    message: "inlet loss reached 100%".into(),
                });
            }
            let next = p_v / (T::one() - chi);
            let step = next - p_r;
            p_r += damping * step;
            if step.abs() <= tol * p_r.abs() {
                return Ok(p_r);
            }
        }
        Err(Error::SolverFailure {
            context: "solve_reservoir_pressure",
            message: "fixed point did not converge".into(),
        })
    }

    /// Relative residuals of the three defining relations at a point:
    /// discharge-flow balance, valve force balance, inlet-loss closure.
    pub fn residuals(&self, pt: &EquilibriumPoint<T>) -> Result<[T; 3]> {
        let scale_p = self.ambient.p_set;
        let a_ft = self.geom.flow_through_area(pt.x_e)?;
        let ck = self.fluid.choking_factor()?;
        let cd = self.geom.cd_at(pt.x_e);
        let denom = self.fluid.rho * (ck * cd * a_ft) * (ck * cd * a_ft);
        let p_star_flow = pt.mdot * pt.mdot / denom;
        let r1 = (self.p_star(pt.p_v) - p_star_flow) / scale_p;

        let a_eff = self.aeff.area(self.geom, pt.x_e)?;
        let r2 = (pt.p_v - self.ambient.p_b
            - self.geom.spring_k * (self.geom.x_pre + pt.x_e) / a_eff)
            / scale_p;

        let chi = self.chi(pt.p_r, pt.v_l)?;
        let r3 = (pt.p_r * (T::one() - chi) - pt.p_v) / scale_p;
        Ok([r1, r2, r3])
    }

    /// Reservoir pressure along the characteristic, P(x_e).
    pub fn characteristic_pressure(&self, x_e: T) -> Result<T> {
        Ok(self.equilibrium_for_lift(x_e)?.p_r)
    }

    /// dP/dx_e by centered differences (one-sided at the ends of the range).
    fn curve_slope(&self, x_e: T) -> Result<T> {
        let h = T::lit(1e-6) * self.geom.x_stop;
        let lo = (x_e - h).max(h * T::lit(0.5));
        let hi = (x_e + h).min(self.geom.x_stop);
        let p_lo = self.characteristic_pressure(lo)?;
        let p_hi = self.characteristic_pressure(hi)?;
        Ok((p_hi - p_lo) / (hi - lo))
    }

    /// Valve-end pressure at fixed tank pressure: solves
    /// p_v = p_r (1 - chi(p_r, v_L(x, p_v))) for p_v at prescribed (x, p_r).
    fn valve_pressure_at_fixed_reservoir(&self, x: T, p_r: T) -> Result<T> {
        let mut p_v = p_r;
        let tol = T::lit(1e-13);
        for _ in 0..200 {
            let v_l = self.discharge_velocity(x, p_v)?;
            let chi = self.chi(p_r, v_l)?;
            let next = p_r * (T::one() - chi);
            let step = next - p_v;
            p_v += T::lit(0.8) * step;
            if step.abs() <= tol * p_r.abs() {
                return Ok(p_v);
            }
        }
        Err(Error::SolverFailure {
            context: "valve_pressure_at_fixed_reservoir",
            message: "fixed point did not converge".into(),
        })
    }

    /// Effective stiffness of the valve at an equilibrium lift:
    ///
    /// `k_eff = k - (p_v - p_b) A'_eff - A_eff (dp_v/dx)|_{p_r}`
    ///
    /// where the last derivative is taken at frozen tank pressure, i.e. the
    /// flow relation responds to the lift perturbation but the reservoir does
    /// not. Its root coincides with the fold of the characteristic curve
    /// (`k_eff` is `A_eff (dp_v/dp_r) P'(x_e)` up to a positive factor), and
    /// it reduces to the bare spring stiffness `k` for a constant effective
    /// area without inlet loss.
    pub fn effective_stiffness(&self, x_e: T) -> Result<T> {
        let pt = self.equilibrium_for_lift(x_e)?;
        let a_eff = self.aeff.area(self.geom, x_e)?;
        let da_eff = self.aeff.area_deriv(self.geom, x_e)?;
        let h = T::lit(1e-6) * self.geom.x_stop;
        let lo = (x_e - h).max(h * T::lit(0.5));
        let hi = (x_e + h).min(self.geom.x_stop);
        let pv_lo = self.valve_pressure_at_fixed_reservoir(lo, pt.p_r)?;
        let pv_hi = self.valve_pressure_at_fixed_reservoir(hi, pt.p_r)?;
        let dpv_dx = (pv_hi - pv_lo) / (hi - lo);
        Ok(self.geom.spring_k - (pt.p_v - self.ambient.p_b) * da_eff - a_eff * dpv_dx)
    }

    /// Sample the characteristic over (0, x_stop] and locate every fold
    /// (sign change of dP/dx_e) by bisection to |dx| < 1e-8 x_stop.
    pub fn characteristic_curve(&self, n_samples: usize) -> Result<CharacteristicCurve<T>> {
        if n_samples < 32 {
            return Err(Error::Precondition {
                context: "characteristic_curve",
                message: "need at least 32 samples".into(),
            });
        }
        let n = T::from_usize(n_samples).unwrap();
        let mut samples = Vec::with_capacity(n_samples);
        for i in 1..=n_samples {
            let x = self.geom.x_stop * T::from_usize(i).unwrap() / n;
            samples.push(self.equilibrium_for_lift(x)?);
        }

        let mut folds = Vec::new();
        let mut prev_x = samples[0].x_e;
        let mut prev_slope = self.curve_slope(prev_x)?;
        for pt in samples.iter().skip(1) {
            let slope = self.curve_slope(pt.x_e)?;
            if (prev_slope <= T::zero()) != (slope <= T::zero()) {
                let x_fold = self.bisect_fold(prev_x, pt.x_e)?;
                folds.push(FoldPoint { x_fold, p_fold: self.characteristic_pressure(x_fold)? });
            }
            prev_x = pt.x_e;
            prev_slope = slope;
        }
        Ok(CharacteristicCurve { samples, folds })
    }

    fn bisect_fold(&self, mut lo: T, mut hi: T) -> Result<T> {
        let tol = T::lit(1e-8) * self.geom.x_stop;
        let mut f_lo = self.curve_slope(lo)?;
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if hi - lo <= tol {
                return Ok(mid);
            }
            let f_mid = self.curve_slope(mid)?;
            if (f_lo <= T::zero()) == (f_mid <= T::zero()) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) / T::lit(2.0))
    }

    /// Signed blowdown fraction (P(x_ref) - p_set)/p_set.
    pub fn blowdown(&self, x_ref: T) -> Result<T> {
        if x_ref > self.geom.x_stop {
            return Err(Error::Precondition {
                context: "blowdown",
                message: "x_ref beyond the upper stop".into(),
            });
        }
        let p = self.characteristic_pressure(x_ref)?;
        Ok((p - self.ambient.p_set) / self.ambient.p_set)
    }

    /// Mass-flow capacity: discharge at the stop with 10% overpressure at the
    /// valve, using the active p* convention.
    pub fn capacity(&self) -> Result<T> {
        let p_v = T::lit(1.1) * self.ambient.p_set;
        self.mass_flow(self.geom.x_stop, p_v)
    }

    /// Invert mdot(x_e) = mdot_in for the equilibrium lift: scans for a
    /// bracket from small lift upward, then bisects to relative 1e-12.
    pub fn lift_for_mass_flow(&self, mdot_in: T) -> Result<T> {
        let f = |x: T| -> Result<T> {
            let pt = self.equilibrium_for_lift(x)?;
            Ok(pt.mdot - mdot_in)
        };
        let n = 512;
        let x_stop = self.geom.x_stop;
        let mut lo = x_stop * T::lit(1e-9);
        let mut f_lo = f(lo)?;
        let mut found = false;
        let mut hi = lo;
        for i in 1..=n {
            let x = x_stop * T::from_usize(i).unwrap() / T::from_usize(n).unwrap();
            let fx = f(x)?;
            if (f_lo <= T::zero()) != (fx <= T::zero()) {
                hi = x;
                found = true;
                break;
            }
            lo = x;
            f_lo = fx;
        }
        if !found {
            return Err(Error::SolverFailure {
                context: "lift_for_mass_flow",
                message: format!("no equilibrium lift carries mdot = {}", mdot_in.as_f64()),
            });
        }
        for _ in 0..200 {
            let mid = (lo + hi) / T::lit(2.0);
            if (hi - lo).abs() <= T::lit(1e-12) * x_stop {
                return Ok(mid);
            }
            let f_mid = f(mid)?;
            if (f_lo <= T::zero()) == (f_mid <= T::zero()) {
                lo = mid;
                f_lo = f_mid;
            } else {
                hi = mid;
            }
        }
        Ok((lo + hi) / T::lit(2.0))
    }
}
