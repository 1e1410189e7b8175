//! Quarter-wave reduced-order model (QWM): the five-ODE truncation of the
//! pipe dynamics onto the fundamental quarter-wavelength acoustic mode,
//! coupled to the valve and reservoir.
//!
//! State ordering is fixed as (x, xdot, p_r, B, C) where B is the modal
//! pressure amplitude and C the modal velocity amplitude of the trial
//! solution p = p0 + B sin(pi xi / 2L), v = v_L + C cos(pi xi / 2L).
//!
//! The time derivatives are implicitly coupled through p0(t) and v_L(t); the
//! system is assembled as M(z) zdot = F(z) and solved by a direct 5x5 linear
//! solve, with the chain-rule closure of dp0/dt and dv_L/dt.

mod stability;

pub use stability::{
    eigenvalues5, hopf_boundary, oscillatory_growth_rate, pseudo_equilibrium_stability,
    sliding_jacobian, HopfBoundary, HopfBoundarySample, PseudoEquilibriumReport,
    PseudoEquilibriumStatus, QwmJacobian, SpectrumClass,
};

use nalgebra::{Matrix5, Vector5};

use crate::equilibrium::{SteadyModel, SteadyOptions};
use crate::error::{Error, Result};
use crate::fluid::{Ambient, FluidKind, FluidModel};
use crate::geom::{EffectiveAreaModel, ValveGeometry};
use crate::scalar::Scalar;

/// Five-component reduced state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QwmState<T> {
    pub x: T,
    pub xdot: T,
    pub p_r: T,
    /// Quarter-wave pressure modal amplitude, Pa.
    pub b: T,
    /// Quarter-wave velocity modal amplitude, m/s.
    pub c: T,
}

impl<T: Scalar> QwmState<T> {
    pub fn to_vector(self) -> Vector5<T> {
        Vector5::new(self.x, self.xdot, self.p_r, self.b, self.c)
    }

    pub fn from_vector(v: &Vector5<T>) -> Self {
        Self { x: v[0], xdot: v[1], p_r: v[2], b: v[3], c: v[4] }
    }
}

/// Term toggles for sensitivity studies of the reduced model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QwmOptions {
    /// Include the nonlinear convection terms of the modal equations.
    pub convection: bool,
    /// Include the pipe inlet pressure loss chi.
    pub inlet_loss: bool,
    /// Gas service: use the exact choked discharge (p* = p0 + B) instead of
    /// the gauge approximation.
    pub gas_exact: bool,
    /// Freeze the valve degree of freedom (modal dynamics only).
    pub frozen_valve: bool,
}

impl Default for QwmOptions {
    fn default() -> Self {
        Self { convection: true, inlet_loss: true, gas_exact: true, frozen_valve: false }
    }
}

/// The quarter-wave model over a specific system configuration.
#[derive(Debug, Clone)]
pub struct QwmModel<'a, T> {
    pub fluid: &'a FluidModel<T>,
    pub geom: &'a ValveGeometry<T>,
    pub aeff: &'a EffectiveAreaModel<T>,
    pub ambient: &'a Ambient<T>,
    pub pipe_length: T,
    pub tank_volume: T,
    pub lambda: T,
    pub mdot_in: T,
    pub options: QwmOptions,
}

impl<'a, T: Scalar> QwmModel<'a, T> {
    /// Steady-model flags consistent with this QWM configuration.
    pub fn steady_options(&self) -> SteadyOptions {
        SteadyOptions { inlet_loss: self.options.inlet_loss, gas_exact: self.options.gas_exact }
    }

    fn steady(&self) -> SteadyModel<'_, T> {
        SteadyModel::new(self.fluid, self.geom, self.aeff, self.ambient, self.steady_options())
    }

    /// Driving pressure for the discharge law at modal state (p0, B).
    fn p_star(&self, p0: T, b: T) -> T {
        match self.fluid.kind {
            FluidKind::Gas if self.options.gas_exact => p0 + b,
            _ => p0 + b - self.ambient.p_b,
        }
    }

    /// K(x) with v_L = K(x) sqrt(p*). Lift clamps at the seat so that
    /// roundoff-negative excursions mean a closed valve, not a domain error.
    fn discharge_gain(&self, x: T) -> Result<T> {
        let x = x.max(T::zero());
        let a_ft = self.geom.flow_through_area(x)?;
        let ck = self.fluid.choking_factor()?;
        Ok(self.geom.cd_at(x) * ck * a_ft
            / (self.geom.seat_area() * self.fluid.rho.sqrt()))
    }

    fn discharge_gain_deriv(&self, x: T) -> Result<T> {
        let h = T::lit(1e-8) * self.geom.x_stop;
        let lo = (x - h).max(T::zero());
        let hi = x + h;
        Ok((self.discharge_gain(hi)? - self.discharge_gain(lo)?) / (hi - lo))
    }

    /// Solve the implicit tank-end pressure p0 = p_r (1 - chi(p_r, v_L + C)).
    fn solve_p0(&self, x: T, p_r: T, b: T, c: T) -> Result<(T, T)> {
        let k_gain = self.discharge_gain(x)?;
        let mut p0 = p_r;
        if !self.options.inlet_loss {
            let v_l = k_gain * self.p_star(p0, b).max(T::zero()).sqrt();
            return Ok((p0, v_l));
        }
        for _ in 0..200 {
            let v_l = k_gain * self.p_star(p0, b).max(T::zero()).sqrt();
            let chi = self.fluid.inlet_loss_chi(p_r, v_l + c)?;
            let next = p_r * (T::one() - chi);
            let step = next - p0;
            p0 += T::lit(0.8) * step;
            if step.abs() <= T::lit(1e-13) * p_r.abs() {
                return Ok((p0, k_gain * self.p_star(p0, b).max(T::zero()).sqrt()));
            }
        }
        Err(Error::SolverFailure { context: "qwm::solve_p0", message: "p0 fixed point stalled".into() })
    }

    /// Validity of the modal truncation: reconstructed pressure positive at
    /// both ends and the midpoint.
    fn check_validity(&self, p0: T, b: T) -> Result<()> {
        let half = T::lit(std::f64::consts::FRAC_1_SQRT_2);
        for p in [p0, p0 + b * half, p0 + b] {
            if p <= T::zero() {
                return Err(Error::domain("qwm", "reconstructed pipe pressure non-positive"));
            }
        }
        Ok(())
    }

    /// Assemble M(z) zdot = F(z) and solve for the five time derivatives.
    pub fn rhs(&self, state: &QwmState<T>) -> Result<Vector5<T>> {
        let g = self.geom;
        let two = T::lit(2.0);
        let sqrt2 = two.sqrt();
        let pi = T::pi();
        let l = self.pipe_length;
        let rho = self.fluid.rho;
        let a = self.fluid.sonic_speed();

        let (p0, v_l) = self.solve_p0(state.x, state.p_r, state.b, state.c)?;
        self.check_validity(p0, state.b)?;
        let p_star = self.p_star(p0, state.b).max(T::lit(1e-30));
        let sqrt_ps = p_star.sqrt();
        let k_gain = self.discharge_gain(state.x)?;
        let dk_dx = self.discharge_gain_deriv(state.x)?;
        let v0 = v_l + state.c;

        // Aux linear forms: vdot_L = Lv . zdot, p0dot = Lp . zdot.
        let (alpha_r, beta_v) = if self.options.inlet_loss {
            let chi = self.fluid.inlet_loss_chi(state.p_r, v0)?;
            let chi_pr = self.fluid.inlet_loss_chi_dpr(state.p_r, v0);
            let chi_v = self.fluid.inlet_loss_chi_dv(state.p_r, v0)?;
            (T::one() - chi - state.p_r * chi_pr, state.p_r * chi_v)
        } else {
            (T::one(), T::zero())
        };
        let g_x = dk_dx * sqrt_ps;
        let g_s = k_gain / (two * sqrt_ps);
        let denom = T::one() + g_s * beta_v;
        if denom.abs() < T::lit(1e-14) {
            return Err(Error::SingularAssembly { context: "qwm aux elimination" });
        }
        let mut l_v = Vector5::zeros();
        l_v[0] = g_x / denom;
        l_v[2] = g_s * alpha_r / denom;
        l_v[3] = g_s / denom;
        l_v[4] = -g_s * beta_v / denom;
        let mut l_p = -l_v * beta_v;
        l_p[2] += alpha_r;
        l_p[4] -= beta_v;

        let conv = if self.options.convection { T::one() } else { T::zero() };
        let swirl = sqrt2 * v_l + state.c;

        let mut m = Matrix5::identity();
        let mut f = Vector5::zeros();

        if self.options.frozen_valve {
            // rows 0 and 1 stay identity with zero forcing
        } else {
            f[0] = state.xdot;
            let a_eff = self.aeff.area(g, state.x.max(T::zero()).min(g.x_stop))?;
            f[1] = ((p0 + state.b - self.ambient.p_b) * a_eff
                - g.damping_c * state.xdot
                - g.spring_k * (g.x_pre + state.x))
                / g.mass;
        }

        f[2] = a * a / self.tank_volume
            * (self.mdot_in - g.seat_area() * rho * (v_l + state.c));

        // Row 3: Bdot + sqrt2 p0dot = a^2 rho (pi/2L) C - conv swirl (pi/(2 sqrt2 L)) B
        for i in 0..5 {
            m[(3, i)] += sqrt2 * l_p[i];
        }
        f[3] = a * a * rho * pi / (two * l) * state.c
            - conv * swirl * pi / (two * sqrt2 * l) * state.b;

        // Row 4: Cdot + sqrt2 vdot_L = conv swirl (pi/(2 sqrt2 L)) C - (1/rho)(pi/2L) B - friction.
        // The friction coefficient lambda/(2 sqrt2 D) comes from collocating
        // (lambda/2D) v|v| at the midpoint and scaling by sqrt2 like the
        // other terms.
        for i in 0..5 {
            m[(4, i)] += sqrt2 * l_v[i];
        }
        f[4] = conv * swirl * pi / (two * sqrt2 * l) * state.c
            - pi / (two * l * rho) * state.b
            - self.lambda / (two * sqrt2 * g.seat_diameter) * swirl * swirl.abs();

        match m.lu().solve(&f) {
            Some(zdot) => Ok(zdot),
            None => Err(Error::SingularAssembly { context: "qwm mass matrix" }),
        }
    }

    /// Tank-end pressure and discharge velocity at a state (diagnostics).
    pub fn flow_closure(&self, state: &QwmState<T>) -> Result<(T, T)> {
        self.solve_p0(state.x, state.p_r, state.b, state.c)
    }

    /// Smooth equilibrium (B = C = 0) matching this model's conventions,
    /// parameterized by the equilibrium lift.
    pub fn equilibrium_at_lift(&self, x_e: T) -> Result<QwmState<T>> {
        let pt = self.steady().equilibrium_for_lift(x_e)?;
        Ok(QwmState { x: pt.x_e, xdot: T::zero(), p_r: pt.p_r, b: T::zero(), c: T::zero() })
    }

    /// Smooth equilibrium carrying the model's prescribed inflow.
    pub fn equilibrium(&self) -> Result<QwmState<T>> {
        let x_e = self.steady().lift_for_mass_flow(self.mdot_in)?;
        self.equilibrium_at_lift(x_e)
    }

    /// Boundary (pseudo-)equilibrium at the upper stop: the flow subsystem is
    /// steady at x = x_stop while the valve is held by the constraint force.
    /// Returns the state and the unconstrained valve acceleration there.
    pub fn boundary_equilibrium(&self) -> Result<(QwmState<T>, T)> {
        let g = self.geom;
        let x = g.x_stop;
        let k_gain = self.discharge_gain(x)?;
        let v_l = self.mdot_in / (g.seat_area() * self.fluid.rho);
        let p_star = (v_l / k_gain) * (v_l / k_gain);
        let p0 = match self.fluid.kind {
            FluidKind::Gas if self.options.gas_exact => p_star,
            _ => p_star + self.ambient.p_b,
        };
        // Invert p0 = p_r (1 - chi(p_r, v_l)).
        let mut p_r = p0;
        if self.options.inlet_loss {
            for _ in 0..200 {
                let chi = self.fluid.inlet_loss_chi(p_r, v_l)?;
                let next = p0 / (T::one() - chi);
                let step = next - p_r;
                p_r += T::lit(0.8) * step;
                if step.abs() <= T::lit(1e-13) * p_r.abs() {
                    break;
                }
            }
        }
        let state = QwmState { x, xdot: T::zero(), p_r, b: T::zero(), c: T::zero() };
        let a_eff = self.aeff.area(g, x)?;
        let accel = ((p0 - self.ambient.p_b) * a_eff - g.spring_k * (g.x_pre + x)) / g.mass;
        Ok((state, accel))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{DischargeCoefficient, EffectiveAreaVariant};
    use approx::assert_relative_eq;

    pub(crate) fn fixture(
        a_hat: EffectiveAreaVariant<f64>,
    ) -> (FluidModel<f64>, ValveGeometry<f64>, EffectiveAreaModel<f64>, Ambient<f64>) {
        let ambient = Ambient::new(1.0e5, 5.0e5).unwrap();
        let fluid = FluidModel::gas(1.4, 288.0, 293.0, ambient.p_set).unwrap();
        let d = 0.03205;
        let mut geom = ValveGeometry {
            seat_diameter: d,
            phi: std::f64::consts::FRAC_PI_2,
            cd: DischargeCoefficient::Constant(0.93),
            x_max: d / 4.0,
            x_stop: d / 4.0,
            spring_k: 5000.0,
            damping_c: 20.0,
            mass: 0.45,
            e_seat: 0.2,
            e_stop: 0.2,
            x_pre: 0.0,
        };
        geom.x_pre = ValveGeometry::gauge_precompression(&ambient, d, geom.spring_k);
        let aeff = EffectiveAreaModel::new(a_hat, &geom, fluid.choking_factor().unwrap()).unwrap();
        (fluid, geom, aeff, ambient)
    }

    #[test]
    fn equilibrium_residual_is_tiny() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 0.5,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.0,
            options: QwmOptions::default(),
        };
        let x_e = 0.4 * geom.x_stop;
        let eq = model.equilibrium_at_lift(x_e).unwrap();
        let steady = model.steady();
        let mdot = steady.equilibrium_for_lift(x_e).unwrap().mdot;
        let model = QwmModel { mdot_in: mdot, ..model };
        let rhs = model.rhs(&eq).unwrap();
        let scales = [geom.x_stop, 1.0, ambient.p_set, ambient.p_set, 100.0];
        for i in 0..5 {
            assert!(
                (rhs[i] / scales[i]).abs() < 1e-8,
                "component {i} not at equilibrium: {}",
                rhs[i]
            );
        }
    }

    #[test]
    fn frozen_valve_modal_pair_rings_at_quarter_wave_frequency() {
        // Closed valve, chi off, lambda = 0: B/C reduce to the undamped
        // quarter-wave oscillator at f = a/(4L).
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let l = 1.7;
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: l,
            tank_volume: 1.0e9,
            lambda: 0.0,
            mdot_in: 0.0,
            options: QwmOptions {
                convection: true,
                inlet_loss: false,
                gas_exact: true,
                frozen_valve: true,
            },
        };
        let mut z = QwmState { x: 0.0, xdot: 0.0, p_r: 5.0e5, b: 50.0, c: 0.0 };
        let a = fluid.sonic_speed();
        let period = 4.0 * l / a;
        let dt = period / 2000.0;
        let mut t = 0.0;
        let mut crossings = Vec::new();
        let mut prev = z.b;
        // Plain RK4 march.
        while t < 6.0 * period {
            let f = |s: &QwmState<f64>| model.rhs(s).unwrap();
            let k1 = f(&z);
            let zv = z.to_vector();
            let k2 = f(&QwmState::from_vector(&(zv + k1 * (dt / 2.0))));
            let k3 = f(&QwmState::from_vector(&(zv + k2 * (dt / 2.0))));
            let k4 = f(&QwmState::from_vector(&(zv + k3 * dt)));
            z = QwmState::from_vector(&(zv + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)));
            t += dt;
            if prev > 0.0 && z.b <= 0.0 {
                crossings.push(t);
            }
            prev = z.b;
        }
        assert!(crossings.len() >= 5);
        let measured = (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        let f_measured = 1.0 / measured;
        let f_expected = a / (4.0 * l);
        assert!(
            (f_measured - f_expected).abs() / f_expected < 0.005,
            "modal frequency {f_measured} vs {f_expected}"
        );
    }

    #[test]
    fn friction_term_vanishes_at_no_flow() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 1.0,
            tank_volume: 1.0,
            lambda: 0.3,
            mdot_in: 0.0,
            options: QwmOptions { frozen_valve: true, inlet_loss: false, ..Default::default() },
        };
        // Closed valve (v_L = 0), B = C = 0: modal derivatives must vanish
        // despite lambda > 0.
        let z = QwmState { x: 0.0, xdot: 0.0, p_r: 4.0e5, b: 0.0, c: 0.0 };
        let rhs = model.rhs(&z).unwrap();
        assert_relative_eq!(rhs[3], 0.0, epsilon = 1e-10);
        assert_relative_eq!(rhs[4], 0.0, epsilon = 1e-10);
    }

    #[test]
    fn qwm_equilibrium_matches_steady_module() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let model = QwmModel {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            pipe_length: 0.5,
            tank_volume: 1.0,
            lambda: 0.0,
            mdot_in: 0.4,
            options: QwmOptions::default(),
        };
        let eq = model.equilibrium().unwrap();
        let x_full = model.steady().lift_for_mass_flow(0.4).unwrap();
        assert!((eq.x - x_full).abs() < 1e-8 * geom.x_stop);
    }
}
