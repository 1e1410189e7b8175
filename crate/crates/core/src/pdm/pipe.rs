//! Pipe PDE kernels: method of characteristics (liquid service) and the
//! two-step Lax-Wendroff scheme (gas service), with characteristic boundary
//! closures at the tank and valve ends.

use crate::error::{Error, Result};
use crate::fluid::FluidModel;
use crate::scalar::Scalar;

use super::{PdmModel, PipeGrid};

/// Tank-end boundary condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TankEnd<T> {
    /// Physical reservoir: p(0,t) = p_r (1 - chi(p_r, v(0,t))).
    /// `inlet_loss: false` drops chi (p(0,t) = p_r), mirroring the toggle on
    /// the reduced model for cross-validation runs.
    Reservoir { p_r: T, inlet_loss: bool },
    /// Fixed pressure (no inlet loss); used by the acoustic tests.
    FixedPressure(T),
}

/// Valve-end boundary condition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ValveEnd<T> {
    /// Physical valve at the given lift: v(L,t) = v_L(x, p(L,t)).
    Valve { lift: T },
    /// Rigid closed end, v = 0.
    Closed,
    /// Prescribed velocity (testing).
    FixedVelocity(T),
}

/// Boundary data for one pipe step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipeBoundary<T> {
    pub tank: TankEnd<T>,
    pub valve: ValveEnd<T>,
}

/// Outcome flags of a pipe step.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct PipeStepFlags {
    /// The liquid valve boundary clamped to zero outflow (p_v < p_b).
    pub backflow_clamped: bool,
}

fn friction<T: Scalar>(lambda_over_2d: T, v: T) -> T {
    lambda_over_2d * v * v.abs()
}

/// Solve the tank-node closure: C- invariant `p - rho a v = k_minus` together
/// with the inlet boundary condition. Newton iteration on v.
fn solve_tank_node<T: Scalar>(
    fluid: &FluidModel<T>,
    tank: TankEnd<T>,
    rho_a: T,
    k_minus: T,
) -> Result<(T, T)> {
    match tank {
        TankEnd::FixedPressure(p) => Ok((p, (p - k_minus) / rho_a)),
        TankEnd::Reservoir { p_r, inlet_loss: false } => Ok((p_r, (p_r - k_minus) / rho_a)),
        TankEnd::Reservoir { p_r, inlet_loss: true } => {
            let mut v = (p_r - k_minus) / rho_a;
            for _ in 0..100 {
                let chi = fluid.inlet_loss_chi(p_r, v)?;
                let g = p_r * (T::one() - chi) - rho_a * v - k_minus;
                let dchi = fluid.inlet_loss_chi_dv(p_r, v)?;
                let dg = -p_r * dchi - rho_a;
                let step = g / dg;
                v -= step;
                if step.abs() <= T::lit(1e-14) * (v.abs() + T::one()) {
                    break;
                }
            }
            let p = p_r * (T::one() - fluid.inlet_loss_chi(p_r, v)?);
            Ok((p, v))
        }
    }
}

/// Solve the valve-node closure: C+ invariant `p + rho a v = k_plus` together
/// with the discharge relation. Safeguarded Newton on p.
fn solve_valve_node<T: Scalar>(
    model: &PdmModel<'_, T>,
    valve: ValveEnd<T>,
    rho_a: T,
    k_plus: T,
) -> Result<(T, T, bool)> {
    match valve {
        ValveEnd::Closed => Ok((k_plus, T::zero(), false)),
        ValveEnd::FixedVelocity(v) => Ok((k_plus - rho_a * v, v, false)),
        ValveEnd::Valve { lift } => {
            if lift <= T::zero() {
                return Ok((k_plus, T::zero(), false));
            }
            if k_plus <= T::zero() {
                // Incoming characteristic already carries non-positive
                // pressure; leave it for the flow-reversal diagnostic.
                return Ok((k_plus, T::zero(), true));
            }
            let mut clamped = false;
            let mut p = k_plus;
            let mut lo = T::zero();
            let mut hi = k_plus;
            for _ in 0..200 {
                let (v, was_clamped) = model.valve_end_velocity(lift, p)?;
                clamped = was_clamped;
                let g = p + rho_a * v - k_plus;
                if g > T::zero() {
                    hi = p;
                } else {
                    lo = p;
                }
                // Numerical derivative of v_L wrt p (analytic: v/(2 p*)).
                let h = T::lit(1e-7) * (p.abs() + T::one());
                let (v_hi, _) = model.valve_end_velocity(lift, p + h)?;
                let dg = T::one() + rho_a * (v_hi - v) / h;
                let mut next = p - g / dg;
                if !(next > lo && next < hi) {
                    next = (lo + hi) / T::lit(2.0);
                }
                if (next - p).abs() <= T::lit(1e-13) * (p.abs() + T::one()) {
                    p = next;
                    break;
                }
                p = next;
            }
            let (v, was_clamped) = model.valve_end_velocity(lift, p)?;
            Ok((p, v, clamped || was_clamped))
        }
    }
}

/// One synchronous MOC step (dt = dxi / a). Interior nodes follow the C+/C-
/// compatibility relations with the friction source integrated along the
/// characteristics; boundary nodes are closed by the physical conditions.
pub fn pipe_step_moc<T: Scalar>(
    model: &PdmModel<'_, T>,
    grid: &mut PipeGrid<T>,
    bc: &PipeBoundary<T>,
    dt: T,
) -> Result<PipeStepFlags> {
    let a = model.fluid.sonic_speed();
    let dxi = grid.dxi();
    if ((dt * a - dxi) / dxi).abs() > T::lit(1e-9) {
        return Err(Error::Precondition {
            context: "pipe_step_moc",
            message: "MOC requires dt = dxi / a".into(),
        });
    }
    let rho = model.fluid.rho;
    let rho_a = rho * a;
    let lam2d = grid.lambda / (T::lit(2.0) * model.geom.seat_diameter);
    let n = grid.n_nodes();
    let half = T::lit(0.5);

    let mut p_new = grid.p.clone();
    let mut v_new = grid.v.clone();

    for i in 1..n - 1 {
        let (pl, vl) = (grid.p[i - 1], grid.v[i - 1]);
        let (pr, vr) = (grid.p[i + 1], grid.v[i + 1]);
        let fl = friction(lam2d, vl);
        let fr = friction(lam2d, vr);
        p_new[i] = half * ((pl + pr) + rho_a * (vl - vr) - rho_a * dt * (fl - fr));
        v_new[i] = half * ((vl + vr) + (pl - pr) / rho_a - dt * (fl + fr));
    }

    // Tank node: C- comes from node 1.
    let k_minus =
        grid.p[1] - rho_a * grid.v[1] + rho_a * dt * friction(lam2d, grid.v[1]);
    let (p0, v0) = solve_tank_node(model.fluid, bc.tank, rho_a, k_minus)?;
    p_new[0] = p0;
    v_new[0] = v0;

    // Valve node: C+ comes from node n-2.
    let k_plus =
        grid.p[n - 2] + rho_a * grid.v[n - 2] - rho_a * dt * friction(lam2d, grid.v[n - 2]);
    let (pl, vl, clamped) = solve_valve_node(model, bc.valve, rho_a, k_plus)?;
    p_new[n - 1] = pl;
    v_new[n - 1] = vl;

    grid.p = p_new;
    grid.v = v_new;
    Ok(PipeStepFlags { backflow_clamped: clamped })
}

/// One two-step (Richtmyer) Lax-Wendroff step of the quasi-linear system
/// with the friction source; boundary nodes use characteristic feet
/// interpolated inside the end cells.
pub fn pipe_step_lw<T: Scalar>(
    model: &PdmModel<'_, T>,
    grid: &mut PipeGrid<T>,
    bc: &PipeBoundary<T>,
    dt: T,
    cfl_max: T,
) -> Result<PipeStepFlags> {
    let a = model.fluid.sonic_speed();
    let dxi = grid.dxi();
    let dt_limit = cfl_max * dxi / (a + grid.max_abs_velocity());
    if dt > dt_limit * (T::one() + T::lit(1e-12)) {
        return Err(Error::CflViolation { dt: dt.as_f64(), dt_limit: dt_limit.as_f64() });
    }
    let rho = model.fluid.rho;
    let a2rho = a * a * rho;
    let lam2d = grid.lambda / (T::lit(2.0) * model.geom.seat_diameter);
    let n = grid.n_nodes();
    let half = T::lit(0.5);

    // Predictor: midpoint states at i+1/2.
    let mut ph = vec![T::zero(); n - 1];
    let mut vh = vec![T::zero(); n - 1];
    let r = dt / (T::lit(2.0) * dxi);
    for i in 0..n - 1 {
        let pm = half * (grid.p[i] + grid.p[i + 1]);
        let vm = half * (grid.v[i] + grid.v[i + 1]);
        let dp = grid.p[i + 1] - grid.p[i];
        let dv = grid.v[i + 1] - grid.v[i];
        ph[i] = pm - r * (vm * dp + a2rho * dv);
        vh[i] = vm - r * (vm * dv + dp / rho) - half * dt * friction(lam2d, vm);
    }

    let mut p_new = grid.p.clone();
    let mut v_new = grid.v.clone();

    // Corrector on interior nodes.
    let s = dt / dxi;
    for i in 1..n - 1 {
        let vm = half * (vh[i] + vh[i - 1]);
        let dp = ph[i] - ph[i - 1];
        let dv = vh[i] - vh[i - 1];
        p_new[i] = grid.p[i] - s * (vm * dp + a2rho * dv);
        v_new[i] = grid.v[i] - s * (vm * dv + dp / rho) - dt * friction(lam2d, vm);
    }

    let rho_a = rho * a;
    let interp = |xi: T| -> (T, T) {
        // Linear interpolation of (p, v) at distance xi from a boundary node,
        // measured into the domain along the end cell.
        let w = (xi / dxi).min(T::one()).max(T::zero());
        (w, T::one() - w)
    };

    // Tank node: C- foot at xi = (a - v0) dt from the boundary.
    {
        let v_here = grid.v[0];
        let (w, wc) = interp((a - v_here) * dt);
        let pf = wc * grid.p[0] + w * grid.p[1];
        let vf = wc * grid.v[0] + w * grid.v[1];
        let k_minus = pf - rho_a * vf + rho_a * dt * friction(lam2d, vf);
        let (p0, v0) = solve_tank_node(model.fluid, bc.tank, rho_a, k_minus)?;
        p_new[0] = p0;
        v_new[0] = v0;
    }

    // Valve node: C+ foot at xi = (a + v) dt from the boundary.
    let flags = {
        let v_here = grid.v[n - 1];
        let (w, wc) = interp((a + v_here) * dt);
        let pf = wc * grid.p[n - 1] + w * grid.p[n - 2];
        let vf = wc * grid.v[n - 1] + w * grid.v[n - 2];
        let k_plus = pf + rho_a * vf - rho_a * dt * friction(lam2d, vf);
        let (pl, vl, clamped) = solve_valve_node(model, bc.valve, rho_a, k_plus)?;
        p_new[n - 1] = pl;
        v_new[n - 1] = vl;
        PipeStepFlags { backflow_clamped: clamped }
    };

    grid.p = p_new;
    grid.v = v_new;
    Ok(flags)
}

/// Total acoustic energy of the pipe relative to a reference pressure:
/// trapezoid rule over (p - p_ref)^2/(2 rho a^2) + rho v^2/2.
pub fn acoustic_energy<T: Scalar>(grid: &PipeGrid<T>, fluid: &FluidModel<T>, p_ref: T) -> T {
    let a = fluid.sonic_speed();
    let rho = fluid.rho;
    let two = T::lit(2.0);
    let dxi = grid.dxi();
    let n = grid.n_nodes();
    let mut total = T::zero();
    for i in 0..n {
        let dp = grid.p[i] - p_ref;
        let e = dp * dp / (two * rho * a * a) + rho * grid.v[i] * grid.v[i] / two;
        let w = if i == 0 || i == n - 1 { T::lit(0.5) } else { T::one() };
        total += w * e * dxi;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fluid::{Ambient, FluidModel};
    use crate::geom::{DischargeCoefficient, EffectiveAreaModel, EffectiveAreaVariant, ValveGeometry};

    fn liquid_fixture() -> (FluidModel<f64>, ValveGeometry<f64>, EffectiveAreaModel<f64>, Ambient<f64>) {
        let ambient = Ambient::new(1.0e5, 5.0e5).unwrap();
        let fluid = FluidModel::liquid(1000.0, 2.1e9).unwrap();
        let d = 0.03205;
        let geom = ValveGeometry {
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
            x_pre: 0.0645410365549814,
        };
        let aeff = EffectiveAreaModel::new(EffectiveAreaVariant::Constant, &geom, 2f64.sqrt()).unwrap();
        (fluid, geom, aeff, ambient)
    }

    #[test]
    fn uniform_no_flow_state_is_steady_moc() {
        let (fluid, geom, aeff, ambient) = liquid_fixture();
        let model = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let mut grid = PipeGrid::uniform(2.0, 101, 0.0, 4.0e5).unwrap();
        let bc = PipeBoundary { tank: TankEnd::FixedPressure(4.0e5), valve: ValveEnd::Closed };
        let dt = grid.dxi() / fluid.sonic_speed();
        for _ in 0..50 {
            pipe_step_moc(&model, &mut grid, &bc, dt).unwrap();
        }
        for (&p, &v) in grid.p.iter().zip(&grid.v) {
            assert!((p - 4.0e5).abs() < 1e-8, "pressure drifted: {p}");
            assert!(v.abs() < 1e-12, "velocity drifted: {v}");
        }
    }

    #[test]
    fn uniform_no_flow_state_is_steady_lw() {
        let (fluid, geom, aeff, ambient) = liquid_fixture();
        let model = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let mut grid = PipeGrid::uniform(2.0, 101, 0.0, 4.0e5).unwrap();
        let bc = PipeBoundary { tank: TankEnd::FixedPressure(4.0e5), valve: ValveEnd::Closed };
        let dt = 0.9 * grid.dxi() / fluid.sonic_speed();
        for _ in 0..50 {
            pipe_step_lw(&model, &mut grid, &bc, dt, 0.9).unwrap();
        }
        for (&p, &v) in grid.p.iter().zip(&grid.v) {
            assert!((p - 4.0e5).abs() < 1e-7, "pressure drifted: {p}");
            assert!(v.abs() < 1e-10, "velocity drifted: {v}");
        }
    }

    #[test]
    fn moc_preserves_steady_friction_balance() {
        // v uniform, p linear with slope -rho (lambda/2D) v |v| is an exact
        // steady solution; one step must preserve it to roundoff.
        let (fluid, geom, aeff, ambient) = liquid_fixture();
        let model = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let mut grid = PipeGrid::uniform(2.0, 101, 0.02, 4.0e5).unwrap();
        let v_s = 3.0;
        let lam2d = grid.lambda / (2.0 * geom.seat_diameter);
        let slope = -fluid.rho * lam2d * v_s * v_s;
        let dxi = grid.dxi();
        for i in 0..grid.n_nodes() {
            grid.p[i] = 4.0e5 + slope * (i as f64) * dxi;
            grid.v[i] = v_s;
        }
        let p_end = *grid.p.last().unwrap();
        let bc = PipeBoundary {
            tank: TankEnd::FixedPressure(4.0e5),
            valve: ValveEnd::FixedVelocity(v_s),
        };
        let dt = dxi / fluid.sonic_speed();
        let before_p = grid.p.clone();
        pipe_step_moc(&model, &mut grid, &bc, dt).unwrap();
        for i in 0..grid.n_nodes() {
            let rel = (grid.p[i] - before_p[i]).abs() / p_end.abs();
            assert!(rel < 1e-8, "steady friction balance violated at node {i}: {rel}");
            assert!((grid.v[i] - v_s).abs() / v_s < 1e-8);
        }
    }

    #[test]
    fn lw_rejects_cfl_violation() {
        let (fluid, geom, aeff, ambient) = liquid_fixture();
        let model = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let mut grid = PipeGrid::uniform(2.0, 101, 0.0, 4.0e5).unwrap();
        let bc = PipeBoundary { tank: TankEnd::FixedPressure(4.0e5), valve: ValveEnd::Closed };
        let dt = 1.5 * grid.dxi() / fluid.sonic_speed();
        assert!(matches!(
            pipe_step_lw(&model, &mut grid, &bc, dt, 0.9),
            Err(Error::CflViolation { .. })
        ));
    }

    /// Shared standing-wave oracle: quarter-wave mode between an open tank
    /// end (pressure node) and a closed valve end (velocity node) must ring
    /// at f = a/(4L) with < 1% frequency error and < 1% energy drift over
    /// ten periods.
    fn standing_wave_check(use_lw: bool) {
        let (fluid, geom, aeff, ambient) = liquid_fixture();
        let model = PdmModel { fluid: &fluid, geom: &geom, aeff: &aeff, ambient: &ambient };
        let length = 2.0;
        let n = 101;
        let p0 = 4.0e5;
        let mut grid = PipeGrid::uniform(length, n, 0.0, p0).unwrap();
        let eps = 50.0; // Pa, small amplitude
        let dxi = grid.dxi();
        for i in 0..n {
            let xi = i as f64 * dxi;
            grid.p[i] = p0 + eps * (std::f64::consts::PI * xi / (2.0 * length)).sin();
        }
        let bc = PipeBoundary { tank: TankEnd::FixedPressure(p0), valve: ValveEnd::Closed };
        let a = fluid.sonic_speed();
        let period = 4.0 * length / a;
        // Leave CFL headroom for the O(1e-4 m/s) acoustic velocities.
        let dt = if use_lw { 0.9 * dxi / (a + 1.0) } else { dxi / a };
        let n_steps = (10.0 * period / dt).ceil() as usize;

        let e0 = acoustic_energy(&grid, &fluid, p0);
        let mut t = 0.0;
        let mut crossings: Vec<f64> = Vec::new();
        let mut prev = grid.p[n - 1] - p0;
        for _ in 0..n_steps {
            if use_lw {
                pipe_step_lw(&model, &mut grid, &bc, dt, 0.9).unwrap();
            } else {
                pipe_step_moc(&model, &mut grid, &bc, dt).unwrap();
            }
            t += dt;
            let cur = grid.p[n - 1] - p0;
            if prev > 0.0 && cur <= 0.0 {
                // Linear interpolation of the downward zero crossing.
                crossings.push(t - dt + dt * prev / (prev - cur));
            }
            prev = cur;
        }
        assert!(crossings.len() >= 9, "too few crossings: {}", crossings.len());
        let measured_period =
            (crossings.last().unwrap() - crossings[0]) / (crossings.len() - 1) as f64;
        let f_measured = 1.0 / measured_period;
        let f_expected = a / (4.0 * length);
        let rel = (f_measured - f_expected).abs() / f_expected;
        assert!(rel < 0.01, "standing-wave frequency off by {rel}: {f_measured} vs {f_expected}");

        let e1 = acoustic_energy(&grid, &fluid, p0);
        let drift = (e1 - e0).abs() / e0;
        assert!(drift < 0.01, "energy drift {drift} over 10 periods");
    }

    #[test]
    fn standing_wave_frequency_moc() {
        standing_wave_check(false);
    }

    #[test]
    fn standing_wave_frequency_lw() {
        standing_wave_check(true);
    }
}
