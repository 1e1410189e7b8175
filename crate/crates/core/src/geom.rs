//! Valve geometry: seat area, flow-through area, discharge-coefficient
//! models and the effective-area-versus-lift characteristic.
//!
//! The effective area is not a physical area: it is the force-equivalent
//! curve defined by `F_fluid = (p_v - p_b) A_eff(x)`. For conical/disk
//! geometries it admits an exact quartic form in the dimensionless lift
//! `y = 4x/D`, whose coefficients are produced by [`quartic_coefficients`].

use crate::error::{Error, Result};
use crate::fluid::Ambient;
use crate::scalar::Scalar;

/// Monotone piecewise-linear table on strictly increasing abscissae.
#[derive(Debug, Clone, PartialEq)]
pub struct LiftTable<T> {
    points: Vec<(T, T)>,
}

impl<T: Scalar> LiftTable<T> {
    pub fn new(points: Vec<(T, T)>) -> Result<Self> {
        if points.len() < 2 {
            return Err(Error::domain("LiftTable", "need at least two points"));
        }
        for w in points.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::domain("LiftTable", "abscissae must be strictly increasing"));
            }
        }
        Ok(Self { points })
    }

    pub fn points(&self) -> &[(T, T)] {
        &self.points
    }

    pub fn x_min(&self) -> T {
        self.points[0].0
    }

    pub fn x_max(&self) -> T {
        self.points[self.points.len() - 1].0
    }

    fn segment(&self, x: T) -> usize {
        // Last segment whose left abscissa is <= x.
        let mut i = 0;
        while i + 2 < self.points.len() && self.points[i + 1].0 <= x {
            i += 1;
        }
        i
    }

    /// Linear interpolation; `Err` outside the covered range.
    pub fn interpolate(&self, x: T) -> Result<T> {
        if x < self.x_min() || x > self.x_max() {
            return Err(Error::domain("LiftTable", "abscissa outside table range"));
        }
        Ok(self.interpolate_clamped(x))
    }

    /// Linear interpolation with end-value clamping outside the range.
    pub fn interpolate_clamped(&self, x: T) -> T {
        if x <= self.x_min() {
            return self.points[0].1;
        }
        if x >= self.x_max() {
            return self.points[self.points.len() - 1].1;
        }
        let i = self.segment(x);
        let (x0, y0) = self.points[i];
        let (x1, y1) = self.points[i + 1];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Slope of the segment containing `x` (right-sided at knots).
    pub fn slope(&self, x: T) -> T {
        let i = self.segment(x.max(self.x_min()).min(self.x_max()));
        let (x0, y0) = self.points[i];
        let (x1, y1) = self.points[i + 1];
        (y1 - y0) / (x1 - x0)
    }
}

/// Discharge coefficient: constant, or interpolated against relative lift x/x_max.
#[derive(Debug, Clone, PartialEq)]
pub enum DischargeCoefficient<T> {
    Constant(T),
    /// Table of (x/x_max, Cd); values outside the tabulated range clamp to
    /// the end values.
    Table(LiftTable<T>),
}

impl<T: Scalar> DischargeCoefficient<T> {
    fn validate(&self) -> Result<()> {
        let check = |cd: T| -> Result<()> {
            if cd <= T::zero() || cd > T::lit(1.2) {
                return Err(Error::domain("DischargeCoefficient", "Cd must lie in (0, 1.2]"));
            }
            Ok(())
        };
        match self {
            DischargeCoefficient::Constant(cd) => check(*cd),
            DischargeCoefficient::Table(t) => t.points().iter().try_for_each(|&(_, cd)| check(cd)),
        }
    }

    /// Cd at relative lift u = x/x_max.
    pub fn at(&self, relative_lift: T) -> T {
        match self {
            DischargeCoefficient::Constant(cd) => *cd,
            DischargeCoefficient::Table(t) => t.interpolate_clamped(relative_lift),
        }
    }

    /// d(Cd)/du at relative lift u; zero for the constant model.
    fn slope(&self, relative_lift: T) -> T {
        match self {
            DischargeCoefficient::Constant(_) => T::zero(),
            DischargeCoefficient::Table(t) => {
                if relative_lift < t.x_min() || relative_lift > t.x_max() {
                    T::zero()
                } else {
                    t.slope(relative_lift)
                }
            }
        }
    }
}

/// Mechanical and geometric description of the valve.
#[derive(Debug, Clone, PartialEq)]
pub struct ValveGeometry<T> {
    /// Seat/pipe diameter, m.
    pub seat_diameter: T,
    /// Discharge angle, rad, in (0, pi). The half-cone angle is `pi - phi`.
    pub phi: T,
    pub cd: DischargeCoefficient<T>,
    /// Full lift, m.
    pub x_max: T,
    /// Upper-stop lift, m; 0 < x_stop <= x_max.
    pub x_stop: T,
    /// Spring stiffness, N/m.
    pub spring_k: T,
    /// Viscous damping, N s/m.
    pub damping_c: T,
    /// Moving mass, kg.
    pub mass: T,
    /// Restitution at the seat.
    pub e_seat: T,
    /// Restitution at the upper stop.
    pub e_stop: T,
    /// Spring pre-compression, m.
    pub x_pre: T,
}

impl<T: Scalar> ValveGeometry<T> {
    pub fn validate(&self) -> Result<()> {
        let ctx = "ValveGeometry";
        if !(self.seat_diameter > T::zero()) {
            return Err(Error::domain(ctx, "seat diameter must be positive"));
        }
        if !(self.phi > T::zero() && self.phi < T::pi()) {
            return Err(Error::domain(ctx, "phi must lie in (0, pi)"));
        }
        if !(self.x_stop > T::zero() && self.x_stop <= self.x_max) {
            return Err(Error::domain(ctx, "require 0 < x_stop <= x_max"));
        }
        if !(self.spring_k > T::zero() && self.mass > T::zero()) {
            return Err(Error::domain(ctx, "spring stiffness and mass must be positive"));
        }
        if self.damping_c < T::zero() {
            return Err(Error::domain(ctx, "damping must be non-negative"));
        }
        for e in [self.e_seat, self.e_stop] {
            if e < T::zero() || e > T::one() {
                return Err(Error::domain(ctx, "restitution coefficients must lie in [0, 1]"));
            }
        }
        if self.x_pre < T::zero() {
            return Err(Error::domain(ctx, "pre-compression must be non-negative"));
        }
        self.cd.validate()?;
        // Flow-through area must stay non-negative over the admissible lift range.
        let n = 200;
        for i in 0..=n {
            let x = self.x_stop * T::from_usize(i).unwrap() / T::from_usize(n).unwrap();
            if self.flow_through_area(x)? < T::zero() {
                return Err(Error::domain(ctx, "A_ft negative inside [0, x_stop]"));
            }
        }
        Ok(())
    }

    /// Seat bore area A_0 = pi D^2 / 4.
    pub fn seat_area(&self) -> T {
        T::pi() * self.seat_diameter * self.seat_diameter / T::lit(4.0)
    }

    /// Flow-through area A_ft(x) = pi x sin(phi) (D - x cos(phi) sin(phi)).
    pub fn flow_through_area(&self, x: T) -> Result<T> {
        if x < T::zero() {
            return Err(Error::domain("flow_through_area", "negative lift"));
        }
        let (s, c) = (self.phi.sin(), self.phi.cos());
        Ok(T::pi() * x * s * (self.seat_diameter - x * c * s))
    }

    /// d(A_ft)/dx.
    pub fn flow_through_area_deriv(&self, x: T) -> T {
        let (s, c) = (self.phi.sin(), self.phi.cos());
        T::pi() * s * (self.seat_diameter - T::lit(2.0) * x * c * s)
    }

    /// Dimensionless lift y = 4x/D.
    pub fn dimensionless_lift(&self, x: T) -> T {
        T::lit(4.0) * x / self.seat_diameter
    }

    /// Cd evaluated at lift x (by relative lift x/x_max).
    pub fn cd_at(&self, x: T) -> T {
        self.cd.at(x / self.x_max)
    }

    /// Gauge-pressure pre-compression (p_set - p_b) A_0 / k matching the
    /// set-pressure balance of the closed valve.
    pub fn gauge_precompression(ambient: &Ambient<T>, seat_diameter: T, spring_k: T) -> T {
        let a0 = T::pi() * seat_diameter * seat_diameter / T::lit(4.0);
        (ambient.p_set - ambient.p_b) * a0 / spring_k
    }
}

/// Coefficients (a1..a4) of the quartic effective-area polynomial
/// `A_hat(y) = 1 + a1 y + a2 y^2 + a3 y^3 + a4 y^4` obtained by expanding the
/// momentum-corrected discharge relation with the conical flow-through area.
pub fn quartic_coefficients<T: Scalar>(phi: T, cd: T, c_kappa: T) -> Result<[T; 4]> {
    if !(phi > T::zero() && phi < T::pi()) {
        return Err(Error::domain("quartic_coefficients", "phi must lie in (0, pi)"));
    }
    if !(cd > T::zero() && c_kappa > T::zero()) {
        return Err(Error::domain("quartic_coefficients", "Cd and C_kappa must be positive"));
    }
    let (s, c) = (phi.sin(), phi.cos());
    let k2 = c_kappa * c_kappa * cd * cd;
    let two = T::lit(2.0);
    let four = T::lit(4.0);
    Ok([
        k2 * (two * phi).sin() / two,
        k2 * s * s * (four - c * c) / four,
        -k2 * s * s * s * c / two,
        k2 * s * s * s * s * c * c / T::lit(16.0),
    ])
}

/// Which effective-area curve the model uses.
#[derive(Debug, Clone, PartialEq)]
pub enum EffectiveAreaVariant<T> {
    /// A_hat = 1 (the classic constant-area idealization).
    Constant,
    /// Quartic built from the geometry's discharge angle and Cd model.
    AnalyticQuartic,
    /// User-supplied polynomial coefficients a1..a4 in y.
    Polynomial([T; 4]),
    /// Tabulated A_hat against relative lift x/x_max; no extrapolation.
    Tabulated(LiftTable<T>),
}

/// Effective-area model, validated against a specific geometry and fluid
/// (through the choking factor) at construction.
#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveAreaModel<T> {
    variant: EffectiveAreaVariant<T>,
    c_kappa: T,
}

impl<T: Scalar> EffectiveAreaModel<T> {
    pub fn new(variant: EffectiveAreaVariant<T>, geom: &ValveGeometry<T>, c_kappa: T) -> Result<Self> {
        let model = Self { variant, c_kappa };
        // A_hat(0) = 1 exactly.
        let at_zero = model.a_hat(geom, T::zero())?;
        if (at_zero - T::one()).abs() > T::lit(1e-9) {
            return Err(Error::domain("EffectiveAreaModel", "A_hat(0) must equal 1"));
        }
        // Positivity floor over the admissible lift range.
        let n = 512;
        for i in 0..=n {
            let x = geom.x_stop * T::from_usize(i).unwrap() / T::from_usize(n).unwrap();
            if model.a_hat(geom, x)? <= T::lit(1e-6) {
                return Err(Error::domain("EffectiveAreaModel", "A_hat not positive on [0, x_stop]"));
            }
        }
        Ok(model)
    }

    pub fn variant(&self) -> &EffectiveAreaVariant<T> {
        &self.variant
    }

    pub fn c_kappa(&self) -> T {
        self.c_kappa
    }

    fn check_range(&self, geom: &ValveGeometry<T>, x: T) -> Result<()> {
        if x < T::zero() || x > geom.x_stop * (T::one() + T::lit(1e-12)) {
            return Err(Error::domain("effective_area", "lift outside [0, x_stop]"));
        }
        Ok(())
    }

    /// Dimensionless effective area A_hat(y) with y = 4x/D.
    pub fn a_hat(&self, geom: &ValveGeometry<T>, x: T) -> Result<T> {
        self.check_range(geom, x)?;
        let y = geom.dimensionless_lift(x);
        match &self.variant {
            EffectiveAreaVariant::Constant => Ok(T::one()),
            EffectiveAreaVariant::AnalyticQuartic => {
                let a = quartic_coefficients(geom.phi, geom.cd_at(x), self.c_kappa)?;
                Ok(T::one() + y * (a[0] + y * (a[1] + y * (a[2] + y * a[3]))))
            }
            EffectiveAreaVariant::Polynomial(a) => {
                Ok(T::one() + y * (a[0] + y * (a[1] + y * (a[2] + y * a[3]))))
            }
            EffectiveAreaVariant::Tabulated(t) => t.interpolate(x / geom.x_max),
        }
    }

    /// Effective area A_eff(x) in m^2; exactly A_0 at x = 0.
    pub fn area(&self, geom: &ValveGeometry<T>, x: T) -> Result<T> {
        if x == T::zero() {
            return Ok(geom.seat_area());
        }
        Ok(geom.seat_area() * self.a_hat(geom, x)?)
    }

    /// d(A_eff)/dx in m^2/m; right-sided derivative at x = 0 and at table knots.
    pub fn area_deriv(&self, geom: &ValveGeometry<T>, x: T) -> Result<T> {
        self.check_range(geom, x)?;
        let a0 = geom.seat_area();
        let y = geom.dimensionless_lift(x);
        let dy_dx = T::lit(4.0) / geom.seat_diameter;
        match &self.variant {
            EffectiveAreaVariant::Constant => Ok(T::zero()),
            EffectiveAreaVariant::Polynomial(a) => {
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                let four = T::lit(4.0);
                let dp = a[0] + y * (two * a[1] + y * (three * a[2] + y * four * a[3]));
                Ok(a0 * dp * dy_dx)
            }
            EffectiveAreaVariant::AnalyticQuartic => {
                let cd = geom.cd_at(x);
                let a = quartic_coefficients(geom.phi, cd, self.c_kappa)?;
                let two = T::lit(2.0);
                let three = T::lit(3.0);
                let four = T::lit(4.0);
                let dp = a[0] + y * (two * a[1] + y * (three * a[2] + y * four * a[3]));
                // Lift-dependent Cd contributes through d(Cd^2)/dx: the whole
                // polynomial part scales with Cd^2.
                let dcd_dx = geom.cd.slope(x / geom.x_max) / geom.x_max;
                let poly = y * (a[0] + y * (a[1] + y * (a[2] + y * a[3])));
                let cd_term = if cd > T::zero() { two * dcd_dx / cd * poly } else { T::zero() };
                Ok(a0 * (dp * dy_dx + cd_term))
            }
            EffectiveAreaVariant::Tabulated(t) => {
                let u = x / geom.x_max;
                t.interpolate(u)?;
                Ok(a0 * t.slope(u) / geom.x_max)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    pub(crate) fn valve_2j3(phi: f64) -> ValveGeometry<f64> {
        let d = 0.03205;
        ValveGeometry {
            seat_diameter: d,
            phi,
            cd: DischargeCoefficient::Constant(0.93),
            x_max: d / 4.0,
            x_stop: d / 4.0,
            spring_k: 5000.0,
            damping_c: 20.0,
            mass: 0.45,
            e_seat: 0.2,
            e_stop: 0.2,
            x_pre: 0.06454103655498139,
        }
    }

    const GAS_CK: f64 = 0.6847314563772704;

    #[test]
    fn seat_area_direct_arithmetic() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_2);
        assert_relative_eq!(g.seat_area(), 8.067629569372674e-4, max_relative = 1e-12);
        let unit = ValveGeometry { seat_diameter: 2.0 / std::f64::consts::PI.sqrt(), ..g };
        assert_relative_eq!(unit.seat_area(), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn seat_diameter_zero_rejected() {
        let g = ValveGeometry { seat_diameter: 0.0, ..valve_2j3(1.0) };
        assert!(g.validate().is_err());
    }

    #[test]
    fn flow_through_area_closed_and_full_lift() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_2);
        assert_eq!(g.flow_through_area(0.0).unwrap(), 0.0);
        // phi = pi/2: A_ft(D/4) = pi (D/4) D = A_0.
        assert_relative_eq!(g.flow_through_area(g.x_max).unwrap(), g.seat_area(), max_relative = 1e-12);
        assert!(g.flow_through_area(-1e-9).is_err());
    }

    #[test]
    fn flow_through_area_small_lift_slope() {
        // A_ft(x)/x -> pi D sin(phi) as x -> 0.
        for phi in [0.6, std::f64::consts::FRAC_PI_2, 2.2] {
            let g = valve_2j3(phi);
            let x = 1e-9;
            let ratio = g.flow_through_area(x).unwrap() / x;
            assert_relative_eq!(ratio, std::f64::consts::PI * g.seat_diameter * phi.sin(), max_relative = 1e-6);
        }
    }

    #[test]
    fn quartic_coefficients_match_reference_table() {
        // Cd = 0.93, gas C_kappa(kappa = 1.4); angles pi/2, pi/3, pi/4.
        let cases = [
            (std::f64::consts::FRAC_PI_2, [0.0, 0.4055, 0.0, 0.0]),
            (std::f64::consts::FRAC_PI_3, [0.1756, 0.2851, -0.0658, 0.0036]),
            (std::f64::consts::FRAC_PI_4, [0.2028, 0.1774, -0.0507, 0.0032]),
        ];
        for (phi, want) in cases {
            let got = quartic_coefficients(phi, 0.93, GAS_CK).unwrap();
            for i in 0..4 {
                assert!(
                    (got[i] - want[i]).abs() <= 2e-4,
                    "phi={phi}: coefficient {i} = {} vs table {}",
                    got[i],
                    want[i]
                );
            }
        }
    }

    #[test]
    fn quartic_coefficients_parity_in_cos_phi() {
        for phi in [0.3, 0.9, 1.4, 2.0] {
            let a = quartic_coefficients(phi, 0.8, 1.1).unwrap();
            let b = quartic_coefficients(std::f64::consts::PI - phi, 0.8, 1.1).unwrap();
            assert_relative_eq!(a[0], -b[0], epsilon = 1e-15, max_relative = 1e-12);
            assert_relative_eq!(a[1], b[1], max_relative = 1e-12);
            assert_relative_eq!(a[2], -b[2], epsilon = 1e-15, max_relative = 1e-12);
            assert_relative_eq!(a[3], b[3], max_relative = 1e-12);
        }
    }

    #[test]
    fn effective_area_at_zero_is_seat_area_for_all_variants() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_3);
        let variants = [
            EffectiveAreaVariant::Constant,
            EffectiveAreaVariant::AnalyticQuartic,
            EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]),
            EffectiveAreaVariant::Tabulated(
                LiftTable::new(vec![(0.0, 1.0), (0.5, 1.3), (1.0, 2.0)]).unwrap(),
            ),
        ];
        for v in variants {
            let m = EffectiveAreaModel::new(v, &g, GAS_CK).unwrap();
            assert_eq!(m.area(&g, 0.0).unwrap(), g.seat_area());
        }
    }

    #[test]
    fn custom_quadratic_curve_doubles_at_full_lift() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_2);
        let m = EffectiveAreaModel::new(EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]), &g, GAS_CK)
            .unwrap();
        // A_hat = 1 + y^2 at y = 1.
        assert_relative_eq!(m.area(&g, g.x_max).unwrap(), 2.0 * g.seat_area(), max_relative = 1e-12);
    }

    #[test]
    fn analytic_disk_curve_value() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_2);
        let m = EffectiveAreaModel::new(EffectiveAreaVariant::AnalyticQuartic, &g, GAS_CK).unwrap();
        let a2 = quartic_coefficients(g.phi, 0.93, GAS_CK).unwrap()[1];
        assert_relative_eq!(m.area(&g, g.x_max).unwrap(), (1.0 + a2) * g.seat_area(), max_relative = 1e-12);
    }

    #[test]
    fn effective_area_continuous_at_zero_for_analytic_model() {
        let g = valve_2j3(1.1);
        let m = EffectiveAreaModel::new(EffectiveAreaVariant::AnalyticQuartic, &g, GAS_CK).unwrap();
        let eps = 1e-12;
        assert_relative_eq!(m.area(&g, eps).unwrap(), g.seat_area(), max_relative = 1e-9);
    }

    #[test]
    fn derivative_constant_and_quadratic() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_2);
        let c = EffectiveAreaModel::new(EffectiveAreaVariant::Constant, &g, GAS_CK).unwrap();
        assert_eq!(c.area_deriv(&g, 0.003).unwrap(), 0.0);

        let m = EffectiveAreaModel::new(EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]), &g, GAS_CK)
            .unwrap();
        // A_hat = 1 + y^2 at x = D/8 (y = 0.5): dA/dx = A0 * 2y * 4/D.
        let x = g.seat_diameter / 8.0;
        assert_relative_eq!(
            m.area_deriv(&g, x).unwrap(),
            g.seat_area() * 1.0 * 4.0 / g.seat_diameter,
            max_relative = 1e-12
        );
    }

    #[test]
    fn derivative_at_zero_equals_linear_coefficient() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_3);
        let m = EffectiveAreaModel::new(EffectiveAreaVariant::AnalyticQuartic, &g, GAS_CK).unwrap();
        let a1 = quartic_coefficients(g.phi, 0.93, GAS_CK).unwrap()[0];
        assert_relative_eq!(
            m.area_deriv(&g, 0.0).unwrap(),
            g.seat_area() * a1 * 4.0 / g.seat_diameter,
            max_relative = 1e-12
        );
    }

    #[test]
    fn tabulated_extrapolation_is_an_error() {
        let g = ValveGeometry { x_stop: 0.03205 / 4.0, ..valve_2j3(std::f64::consts::FRAC_PI_2) };
        let t = LiftTable::new(vec![(0.0, 1.0), (0.5, 1.5)]).unwrap();
        // Table covers only x/x_max in [0, 0.5]; construction must fail the
        // positivity sweep over [0, x_stop] because evaluation errors out.
        assert!(EffectiveAreaModel::new(EffectiveAreaVariant::Tabulated(t), &g, GAS_CK).is_err());
    }

    proptest::proptest! {
        /// Expanding the momentum-corrected discharge relation with the
        /// conical flow-through area must reproduce the quartic coefficients
        /// to machine precision for any admissible (phi, Cd, C_kappa).
        #[test]
        fn quartic_reconstructs_discharge_relation(
            phi in 0.05f64..3.09,
            cd in 0.05f64..1.2,
            ck in 0.2f64..1.5,
            y in 0.0f64..1.0,
        ) {
            let g = ValveGeometry { phi, ..valve_2j3(phi) };
            let a = quartic_coefficients(phi, cd, ck).unwrap();
            let quartic = 1.0 + y * (a[0] + y * (a[1] + y * (a[2] + y * a[3])));

            // Independent route: A_hat = 1 + Cd^2 Ck^2 (Aft/A0)^2 (1 + (A0/Aft) cos phi)
            // with the conical area A_ft evaluated geometrically.
            let x = y * g.seat_diameter / 4.0;
            let aft = g.flow_through_area(x).unwrap();
            let ratio = aft / g.seat_area();
            let direct = if ratio == 0.0 {
                1.0
            } else {
                1.0 + cd * cd * ck * ck * ratio * ratio * (1.0 + phi.cos() / ratio)
            };
            proptest::prop_assert!(
                (quartic - direct).abs() <= 1e-12 * direct.abs().max(1.0),
                "phi={phi} cd={cd} ck={ck} y={y}: {quartic} vs {direct}"
            );
        }
    }

    #[test]
    fn cd_table_interpolates_by_relative_lift() {
        let table = LiftTable::new(vec![(0.2, 0.9032), (0.4, 0.6989), (0.6, 0.6234)]).unwrap();
        let g = ValveGeometry { cd: DischargeCoefficient::Table(table), ..valve_2j3(std::f64::consts::FRAC_PI_2) };
        assert_relative_eq!(g.cd_at(0.3 * g.x_max), (0.9032 + 0.6989) / 2.0, max_relative = 1e-12);
        // Below the tabulated range: clamps.
        assert_relative_eq!(g.cd_at(0.0), 0.9032, max_relative = 1e-12);
    }

    #[test]
    fn tabulated_area_derivative_is_segment_slope() {
        let g = valve_2j3(std::f64::consts::FRAC_PI_2);
        let t = LiftTable::new(vec![(0.0, 1.0), (0.5, 1.4), (1.0, 2.0)]).unwrap();
        let m = EffectiveAreaModel::new(EffectiveAreaVariant::Tabulated(t), &g, GAS_CK).unwrap();
        // First segment: slope 0.8 per unit relative lift.
        let d = m.area_deriv(&g, 0.25 * g.x_max).unwrap();
        assert_relative_eq!(d, g.seat_area() * 0.8 / g.x_max, max_relative = 1e-12);
        // Second segment: slope 1.2.
        let d2 = m.area_deriv(&g, 0.75 * g.x_max).unwrap();
        assert_relative_eq!(d2, g.seat_area() * 1.2 / g.x_max, max_relative = 1e-12);
    }

    #[test]
    fn analytic_derivative_with_lift_dependent_cd_matches_finite_differences() {
        let table = LiftTable::new(vec![(0.0, 0.95), (0.5, 0.80), (1.0, 0.65)]).unwrap();
        let g = ValveGeometry {
            cd: DischargeCoefficient::Table(table),
            ..valve_2j3(std::f64::consts::FRAC_PI_3)
        };
        let m = EffectiveAreaModel::new(EffectiveAreaVariant::AnalyticQuartic, &g, GAS_CK).unwrap();
        for frac in [0.1, 0.3, 0.7, 0.9] {
            let x = frac * g.x_max;
            let h = 1e-8 * g.x_max;
            let fd = (m.area(&g, x + h).unwrap() - m.area(&g, x - h).unwrap()) / (2.0 * h);
            assert_relative_eq!(m.area_deriv(&g, x).unwrap(), fd, max_relative = 1e-5);
        }
    }
}
