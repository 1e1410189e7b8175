//! The full valve-and-pipeline dynamics model (PDM): coupled ODE/PDE time
//! integration with impact events, chattering coalescence and sustained
//! contact at the seat or the upper stop.

mod ode;
mod pipe;
mod simulate;

pub use ode::AdaptiveRk4;
pub use pipe::{acoustic_energy, pipe_step_lw, pipe_step_moc, PipeBoundary, TankEnd, ValveEnd};
pub use simulate::{
    simulate, InflowSchedule, RunStatus, Sample, Scheme, SimParams, SimResult, SimSummary,
};

use crate::error::{Error, Result};
use crate::fluid::{Ambient, FluidKind, FluidModel};
use crate::geom::{EffectiveAreaModel, ValveGeometry};
use crate::scalar::Scalar;

/// Contact status of the valve body.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Contact {
    Free,
    Seat,
    Stop,
}

impl Contact {
    pub fn label(self) -> &'static str {
        match self {
            Contact::Free => "free",
            Contact::Seat => "seat",
            Contact::Stop => "stop",
        }
    }
}

/// Valve body state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValveState<T> {
    pub x: T,
    pub xdot: T,
    pub contact: Contact,
}

impl<T: Scalar> ValveState<T> {
    pub fn closed() -> Self {
        Self { x: T::zero(), xdot: T::zero(), contact: Contact::Seat }
    }
}

/// Reservoir state; the prescribed inflow lives in the schedule, not here.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TankState<T> {
    pub p_r: T,
}

/// 1D pipe grid; node 0 sits at the tank, the last node at the valve.
#[derive(Debug, Clone, PartialEq)]
pub struct PipeGrid<T> {
    pub length: T,
    pub lambda: T,
    pub p: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> PipeGrid<T> {
    pub fn uniform(length: T, n_nodes: usize, lambda: T, p0: T) -> Result<Self> {
        if n_nodes < 8 {
            return Err(Error::domain("PipeGrid", "need at least 8 nodes"));
        }
        if !(length > T::zero()) {
            return Err(Error::domain("PipeGrid", "pipe length must be positive"));
        }
        Ok(Self { length, lambda, p: vec![p0; n_nodes], v: vec![T::zero(); n_nodes] })
    }

    pub fn n_nodes(&self) -> usize {
        self.p.len()
    }

    /// Node spacing L/(n-1).
    pub fn dxi(&self) -> T {
        self.length / T::from_usize(self.p.len() - 1).unwrap()
    }

    pub fn max_abs_velocity(&self) -> T {
        self.v.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    /// Index of the first node with non-positive pressure, if any.
    pub fn first_nonpositive_pressure(&self) -> Option<usize> {
        self.p.iter().position(|&p| p <= T::zero())
    }
}

/// Full hybrid state advanced by the integrator.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T> {
    pub t: T,
    pub valve: ValveState<T>,
    pub tank: TankState<T>,
    pub pipe: PipeGrid<T>,
}

/// Logged simulation event.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimEvent<T> {
    pub t: T,
    pub kind: EventKind,
    pub impact_speed: Option<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    SeatImpact,
    StopImpact,
    StickSeat,
    StickStop,
    Release,
    ValveOpen,
    BlowdownClose,
    FlowReversal,
}

impl EventKind {
    pub fn label(self) -> &'static str {
        match self {
            EventKind::SeatImpact => "seat-impact",
            EventKind::StopImpact => "stop-impact",
            EventKind::StickSeat => "stick-seat",
            EventKind::StickStop => "stick-stop",
            EventKind::Release => "release",
            EventKind::ValveOpen => "valve-open",
            EventKind::BlowdownClose => "blowdown-close",
            EventKind::FlowReversal => "flow-reversal",
        }
    }
}

/// Which boundary an impact happened at.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImpactBoundary {
    Seat,
    Stop,
}

/// Model bundle used by the PDM physics.
#[derive(Debug, Clone)]
pub struct PdmModel<'a, T> {
    pub fluid: &'a FluidModel<T>,
    pub geom: &'a ValveGeometry<T>,
    pub aeff: &'a EffectiveAreaModel<T>,
    pub ambient: &'a Ambient<T>,
}

impl<'a, T: Scalar> PdmModel<'a, T> {
    /// Valve acceleration (p_v - p_b) A_eff(x)/m - c xdot/m - k (x_pre + x)/m
    /// with p_v read from the last pipe node.
    pub fn valve_accel(&self, x: T, xdot: T, p_v: T) -> Result<T> {
        let x_clamped = x.max(T::zero()).min(self.geom.x_stop);
        let a_eff = self.aeff.area(self.geom, x_clamped)?;
        let g = self.geom;
        Ok(((p_v - self.ambient.p_b) * a_eff
            - g.damping_c * xdot
            - g.spring_k * (g.x_pre + x_clamped))
            / g.mass)
    }

    /// Pipe velocity at the valve end from conservation of mass through the
    /// valve: v_L = Cd C_kappa (A_ft/A_0) sqrt(p*/rho). Gas uses the choked
    /// form p* = p_v; liquid uses p* = p_v - p_b and clamps to zero when the
    /// driving pressure reverses (second return value reports the clamp).
    pub fn valve_end_velocity(&self, x: T, p_v: T) -> Result<(T, bool)> {
        if x == T::zero() {
            return Ok((T::zero(), false));
        }
        let p_star = match self.fluid.kind {
            FluidKind::Gas => p_v,
            FluidKind::Liquid => p_v - self.ambient.p_b,
        };
        if p_star < T::zero() {
            return match self.fluid.kind {
                FluidKind::Liquid => Ok((T::zero(), true)),
                FluidKind::Gas => Err(Error::domain("valve_end_velocity", "negative gas pressure")),
            };
        }
        let a_ft = self.geom.flow_through_area(x)?;
        let ck = self.fluid.choking_factor()?;
        let v = self.geom.cd_at(x) * ck * a_ft / self.geom.seat_area()
            * (p_star / self.fluid.rho).sqrt();
        Ok((v, false))
    }

    /// d p_r/dt = a^2/V (mdot_in - A_0 rho v(0,t)).
    pub fn tank_rhs(&self, tank_volume: T, mdot_in: T, v0: T) -> T {
        let a = self.fluid.sonic_speed();
        a * a / tank_volume * (mdot_in - self.geom.seat_area() * self.fluid.rho * v0)
    }
}

/// Instantaneous Newtonian restitution at a boundary; the position is left
/// unchanged and the velocity reverses scaled by the boundary's coefficient.
pub fn handle_impact<T: Scalar>(
    valve: &ValveState<T>,
    boundary: ImpactBoundary,
    geom: &ValveGeometry<T>,
) -> Result<ValveState<T>> {
    match boundary {
        ImpactBoundary::Seat => {
            if valve.xdot >= T::zero() {
                return Err(Error::Precondition {
                    context: "handle_impact",
                    message: "seat impact requires xdot < 0".into(),
                });
            }
            Ok(ValveState { x: valve.x, xdot: -geom.e_seat * valve.xdot, contact: Contact::Free })
        }
        ImpactBoundary::Stop => {
            if valve.xdot <= T::zero() {
                return Err(Error::Precondition {
                    context: "handle_impact",
                    message: "stop impact requires xdot > 0".into(),
                });
            }
            Ok(ValveState { x: valve.x, xdot: -geom.e_stop * valve.xdot, contact: Contact::Free })
        }
    }
}

/// Jump to the convergence point of the chattering sequence: once the impact
/// speed falls below the threshold the valve is pinned at the boundary.
pub fn coalesce_chatter<T: Scalar>(
    _valve: &ValveState<T>,
    boundary: ImpactBoundary,
    geom: &ValveGeometry<T>,
) -> ValveState<T> {
    match boundary {
        ImpactBoundary::Seat => ValveState { x: T::zero(), xdot: T::zero(), contact: Contact::Seat },
        ImpactBoundary::Stop => {
            ValveState { x: geom.x_stop, xdot: T::zero(), contact: Contact::Stop }
        }
    }
}

/// Sustained contact is retained until the unconstrained acceleration points
/// away from the boundary (strict sign change required).
pub fn contact_release_check<T: Scalar>(contact: Contact, accel_unconstrained: T) -> bool {
    match contact {
        Contact::Free => false,
        Contact::Seat => accel_unconstrained > T::zero(),
        Contact::Stop => accel_unconstrained < T::zero(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{DischargeCoefficient, EffectiveAreaVariant};
    use approx::assert_relative_eq;

    fn fixture(
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
    fn closed_valve_balances_at_set_pressure() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let m = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let acc = m.valve_accel(0.0, 0.0, ambient.p_set).unwrap();
        assert!(acc.abs() < 1e-9, "set-pressure balance broken: {acc}");
    }

    #[test]
    fn ambient_pressure_holds_valve_shut() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let m = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let acc = m.valve_accel(0.0, 0.0, ambient.p_b).unwrap();
        assert_relative_eq!(acc, -geom.spring_k * geom.x_pre / geom.mass, max_relative = 1e-12);
        assert!(acc < 0.0);
    }

    #[test]
    fn overpressure_presses_valve_onto_stop() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]));
        let m = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let acc = m.valve_accel(geom.x_stop, 0.0, 1.1 * ambient.p_set).unwrap();
        assert!(acc > 0.0, "valve should be pressed onto the stop, got {acc}");
    }

    #[test]
    fn valve_end_velocity_cases() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let m = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        assert_eq!(m.valve_end_velocity(0.0, 5.0e5).unwrap(), (0.0, false));
        // Gas 2J3 at full lift, p_v = 5.5 bar: direct arithmetic on the
        // choked discharge relation gives 194.0 m/s.
        let (v, _) = m.valve_end_velocity(geom.x_max, 5.5e5).unwrap();
        assert_relative_eq!(v, 194.01246111898185, max_relative = 1e-10);
    }

    #[test]
    fn liquid_backflow_clamps_to_zero() {
        let ambient = Ambient::new(1.0e5, 5.0e5).unwrap();
        let fluid = FluidModel::liquid(1000.0, 2.1e9).unwrap();
        let (_, geom, aeff, _) = fixture(EffectiveAreaVariant::Constant);
        let m = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        assert_eq!(m.valve_end_velocity(0.001, ambient.p_b).unwrap(), (0.0, false));
        assert_eq!(m.valve_end_velocity(0.001, 0.5 * ambient.p_b).unwrap(), (0.0, true));
    }

    #[test]
    fn tank_rhs_signs() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let m = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        assert!(m.tank_rhs(1.0, 0.5, 0.0) > 0.0);
        assert!(m.tank_rhs(1.0, 0.0, 10.0) < 0.0);
        // Balance: inflow matching the pipe outflow.
        let v0 = 12.3;
        let mdot = geom.seat_area() * fluid.rho * v0;
        assert!(m.tank_rhs(1.0, mdot, v0).abs() < 1e-12);
    }

    #[test]
    fn restitution_law() {
        let (_, geom, _, _) = fixture(EffectiveAreaVariant::Constant);
        let v = ValveState { x: 0.0, xdot: -1.0, contact: Contact::Free };
        let after = handle_impact(&v, ImpactBoundary::Seat, &geom).unwrap();
        assert_relative_eq!(after.xdot, 0.2, max_relative = 1e-15);

        let mut g = geom.clone();
        g.e_stop = 0.0;
        let v = ValveState { x: g.x_stop, xdot: 0.5, contact: Contact::Free };
        assert_eq!(handle_impact(&v, ImpactBoundary::Stop, &g).unwrap().xdot, 0.0);
        g.e_stop = 1.0;
        assert_relative_eq!(
            handle_impact(&v, ImpactBoundary::Stop, &g).unwrap().xdot,
            -0.5,
            max_relative = 1e-15
        );
    }

    #[test]
    fn impact_without_contact_condition_is_a_logic_error() {
        let (_, geom, _, _) = fixture(EffectiveAreaVariant::Constant);
        let v = ValveState { x: 0.0, xdot: 1.0, contact: Contact::Free };
        assert!(handle_impact(&v, ImpactBoundary::Seat, &geom).is_err());
    }

    #[test]
    fn impact_energy_scales_with_e_squared() {
        let (_, geom, _, _) = fixture(EffectiveAreaVariant::Constant);
        for e in [0.0, 0.2, 0.55, 1.0] {
            let mut g = geom.clone();
            g.e_stop = e;
            let pre = ValveState { x: g.x_stop, xdot: 0.73, contact: Contact::Free };
            let post = handle_impact(&pre, ImpactBoundary::Stop, &g).unwrap();
            // The restitution law itself is exact.
            assert_eq!(post.xdot, -e * pre.xdot);
            let energy_ratio = (post.xdot * post.xdot) / (pre.xdot * pre.xdot);
            assert_relative_eq!(energy_ratio, e * e, max_relative = 1e-15, epsilon = 1e-300);
        }
    }

    #[test]
    fn release_requires_strict_sign() {
        assert!(!contact_release_check(Contact::Seat, 0.0));
        assert!(contact_release_check(Contact::Seat, 1e-12));
        assert!(!contact_release_check(Contact::Stop, 0.0));
        assert!(contact_release_check(Contact::Stop, -1e-12));
        assert!(!contact_release_check::<f64>(Contact::Free, -1.0));
    }
}
