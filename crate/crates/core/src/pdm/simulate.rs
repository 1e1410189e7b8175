//! Time integration of the coupled hybrid system. The pipe PDE sets the
//! master step (MOC synchronous for liquid, CFL-limited Lax-Wendroff for
//! gas); the valve/tank ODEs are sub-integrated inside each PDE step by
//! adaptive RK4 with impact events located on the dense output, after which
//! the step is retreated and restarted from the event time.

use crate::error::{Error, Result};
use crate::fluid::FluidKind;
use crate::scalar::Scalar;

use super::ode::AdaptiveRk4;
use super::pipe::{pipe_step_lw, pipe_step_moc, PipeBoundary, TankEnd, ValveEnd};
use super::{
    coalesce_chatter, contact_release_check, handle_impact, Contact, EventKind, ImpactBoundary,
    PdmModel, PipeGrid, SimEvent, SystemState, TankState, ValveState,
};

/// Pipe advection scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Method of characteristics, synchronous step dt = dxi/a (liquid default).
    Moc,
    /// Two-step Lax-Wendroff, CFL-limited (gas default).
    LaxWendroff,
}

impl Scheme {
    pub fn default_for(kind: FluidKind) -> Self {
        match kind {
            FluidKind::Liquid => Scheme::Moc,
            FluidKind::Gas => Scheme::LaxWendroff,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Moc => "moc",
            Scheme::LaxWendroff => "lax-wendroff",
        }
    }
}

/// Prescribed reservoir inflow schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InflowSchedule<T> {
    Constant { mdot: T },
    /// Linear ramp from zero to `mdot_peak` over `t_ramp`, then hold.
    RampHold { t_ramp: T, mdot_peak: T },
    /// Ramp up over `t_up`, hold for `t_hold`, ramp back to zero over `t_down`.
    RampUpDown { t_up: T, t_hold: T, t_down: T, mdot_peak: T },
}

impl<T: Scalar> InflowSchedule<T> {
    /// Largest rate the schedule reaches.
    pub fn peak(&self) -> T {
        match *self {
            InflowSchedule::Constant { mdot } => mdot,
            InflowSchedule::RampHold { mdot_peak, .. }
            | InflowSchedule::RampUpDown { mdot_peak, .. } => mdot_peak,
        }
    }

    pub fn mdot_at(&self, t: T) -> T {
        match *self {
            InflowSchedule::Constant { mdot } => mdot,
            InflowSchedule::RampHold { t_ramp, mdot_peak } => {
                if t >= t_ramp {
                    mdot_peak
                } else {
                    mdot_peak * (t / t_ramp).max(T::zero())
                }
            }
            InflowSchedule::RampUpDown { t_up, t_hold, t_down, mdot_peak } => {
                if t < t_up {
                    mdot_peak * (t / t_up).max(T::zero())
                } else if t < t_up + t_hold {
                    mdot_peak
                } else {
                    let s = (t - t_up - t_hold) / t_down;
                    if s >= T::one() {
                        T::zero()
                    } else {
                        mdot_peak * (T::one() - s)
                    }
                }
            }
        }
    }
}

/// Run parameters beyond the physical model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimParams<T> {
    pub tank_volume: T,
    pub inflow: InflowSchedule<T>,
    pub pipe_length: T,
    pub n_nodes: usize,
    pub lambda: T,
    pub scheme: Scheme,
    pub horizon: T,
    pub sample_dt: T,
    /// Initial tank pressure (absolute); the pipe starts uniform at this value.
    pub initial_tank_pressure: T,
    pub ode_rel_tol: T,
    /// Impact location tolerance relative to x_stop.
    pub event_tol: T,
    /// Chatter-coalescence velocity threshold; `None` selects the scaled
    /// default max(1e-4 a x_stop / L, 1e-4) m/s.
    pub stick_velocity: Option<T>,
    pub cfl_max: T,
    /// Record (t, x) at every zero crossing of xdot (Poincare section).
    pub record_section: bool,
    pub max_impacts: usize,
    /// Apply the pipe inlet pressure loss chi at the tank end (physical
    /// default); disabled only for reduced-model cross-validation.
    pub inlet_loss: bool,
}

impl<T: Scalar> SimParams<T> {
    pub fn new(pipe_length: T, inflow: InflowSchedule<T>, horizon: T, kind: FluidKind) -> Self {
        Self {
            tank_volume: T::one(),
            inflow,
            pipe_length,
            n_nodes: 101,
            lambda: T::zero(),
            scheme: Scheme::default_for(kind),
            horizon,
            sample_dt: T::lit(2e-4),
            initial_tank_pressure: T::zero(), // resolved to 0.98 p_set in simulate
            ode_rel_tol: T::lit(1e-8),
            event_tol: T::lit(1e-10),
            stick_velocity: None,
            cfl_max: T::lit(0.9),
            record_section: false,
            max_impacts: 2_000_000,
            inlet_loss: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample<T> {
    pub t: T,
    pub x: T,
    pub xdot: T,
    pub p_r: T,
    pub p_v: T,
    pub v0: T,
    pub v_l: T,
    pub contact: Contact,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    FlowReversal,
}

impl RunStatus {
    pub fn label(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::FlowReversal => "flow-reversal",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSummary<T> {
    pub status: RunStatus,
    pub final_time: T,
    pub min_lift: T,
    pub max_lift: T,
    pub impact_count: usize,
    pub final_contact: Contact,
    pub blowdown_close_pressure: Option<T>,
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult<T> {
    pub trajectory: Vec<Sample<T>>,
    pub events: Vec<SimEvent<T>>,
    pub section: Vec<(T, T)>,
    pub summary: SimSummary<T>,
    pub final_state: SystemState<T>,
}

struct Tracker<T> {
    min_lift: T,
    max_lift: T,
    impacts: usize,
    blowdown_close_pressure: Option<T>,
}

/// Run the PDM from the given state (or the closed-valve cold start).
pub fn simulate<T: Scalar>(
    model: &PdmModel<'_, T>,
    params: &SimParams<T>,
    initial: Option<SystemState<T>>,
) -> Result<SimResult<T>> {
    let a = model.fluid.sonic_speed();
    let p_start = if params.initial_tank_pressure > T::zero() {
        params.initial_tank_pressure
    } else {
        T::lit(0.98) * model.ambient.p_set
    };
    let mut state = match initial {
        Some(s) => s,
        None => SystemState {
            t: T::zero(),
            valve: ValveState::closed(),
            tank: TankState { p_r: p_start },
            pipe: PipeGrid::uniform(params.pipe_length, params.n_nodes, params.lambda, p_start)?,
        },
    };
    let stick_v = params.stick_velocity.unwrap_or_else(|| {
        (T::lit(1e-4) * a * model.geom.x_stop / params.pipe_length).max(T::lit(1e-4))
    });
    let event_tol_abs = params.event_tol * model.geom.x_stop;

    let mut events: Vec<SimEvent<T>> = Vec::new();
    let mut section: Vec<(T, T)> = Vec::new();
    let mut trajectory: Vec<Sample<T>> = Vec::new();
    let mut tracker = Tracker {
        min_lift: state.valve.x,
        max_lift: state.valve.x,
        impacts: 0,
        blowdown_close_pressure: None,
    };
    let mut rk = AdaptiveRk4::new(params.ode_rel_tol, T::lit(1e-6));
    let mut next_sample = state.t;
    let mut status = RunStatus::Completed;
    let mut backflow_active = false;

    let record = |traj: &mut Vec<Sample<T>>, st: &SystemState<T>| {
        let n = st.pipe.n_nodes();
        traj.push(Sample {
            t: st.t,
            x: st.valve.x,
            xdot: st.valve.xdot,
            p_r: st.tank.p_r,
            p_v: st.pipe.p[n - 1],
            v0: st.pipe.v[0],
            v_l: st.pipe.v[n - 1],
            contact: st.valve.contact,
        });
    };
    record(&mut trajectory, &state);
    next_sample += params.sample_dt;

    while state.t < params.horizon {
        let dxi = state.pipe.dxi();
        let dt = match params.scheme {
            Scheme::Moc => dxi / a,
            Scheme::LaxWendroff => {
                let lim = params.cfl_max * dxi / (a + state.pipe.max_abs_velocity());
                lim.min(params.horizon - state.t).max(T::lit(1e-12))
            }
        };

        advance_valve_and_tank(
            model, params, &mut state, dt, stick_v, event_tol_abs, &mut rk, &mut events,
            &mut section, &mut tracker,
        )?;

        let bc = PipeBoundary {
            tank: TankEnd::Reservoir { p_r: state.tank.p_r, inlet_loss: params.inlet_loss },
            valve: ValveEnd::Valve { lift: state.valve.x },
        };
        let flags = match params.scheme {
            Scheme::Moc => pipe_step_moc(model, &mut state.pipe, &bc, dxi / a)?,
            Scheme::LaxWendroff => pipe_step_lw(model, &mut state.pipe, &bc, dt, params.cfl_max)?,
        };
        state.t += dt;

        if flags.backflow_clamped && !backflow_active {
            events.push(SimEvent { t: state.t, kind: EventKind::FlowReversal, impact_speed: None });
        }
        backflow_active = flags.backflow_clamped;

        if state.pipe.first_nonpositive_pressure().is_some() {
            events.push(SimEvent { t: state.t, kind: EventKind::FlowReversal, impact_speed: None });
            status = RunStatus::FlowReversal;
            record(&mut trajectory, &state);
            break;
        }

        if state.t >= next_sample {
            record(&mut trajectory, &state);
            while next_sample <= state.t {
                next_sample += params.sample_dt;
            }
        }

        debug_assert!(
            {
                let n = state.pipe.n_nodes();
                let (v_expect, _) =
                    model.valve_end_velocity(state.valve.x, state.pipe.p[n - 1])?;
                (state.pipe.v[n - 1] - v_expect).abs()
                    <= T::lit(1e-8) * (v_expect.abs() + T::one())
            },
            "boundary consistency violated at t = {:?}",
            state.t.as_f64()
        );
    }

    if trajectory.last().map(|s| s.t) != Some(state.t) {
        record(&mut trajectory, &state);
    }

    let settled = is_settled(&trajectory, &events, model.geom.x_stop, params.horizon);
    let summary = SimSummary {
        status,
        final_time: state.t,
        min_lift: tracker.min_lift,
        max_lift: tracker.max_lift,
        impact_count: tracker.impacts,
        final_contact: state.valve.contact,
        blowdown_close_pressure: tracker.blowdown_close_pressure,
        settled,
    };
    Ok(SimResult { trajectory, events, section, summary, final_state: state })
}

/// Lift is settled when the final 10% of the run shows < 1% of x_stop
/// variation and no events.
fn is_settled<T: Scalar>(
    trajectory: &[Sample<T>],
    events: &[SimEvent<T>],
    x_stop: T,
    horizon: T,
) -> bool {
    let t_win = horizon * T::lit(0.9);
    let window: Vec<&Sample<T>> = trajectory.iter().filter(|s| s.t >= t_win).collect();
    if window.len() < 2 {
        return false;
    }
    let mut lo = window[0].x;
    let mut hi = window[0].x;
    for s in &window {
        lo = lo.min(s.x);
        hi = hi.max(s.x);
    }
    let quiet = events.iter().all(|e| e.t < t_win);
    quiet && (hi - lo) < T::lit(0.01) * x_stop
}

#[allow(clippy::too_many_arguments)]
fn advance_valve_and_tank<T: Scalar>(
    model: &PdmModel<'_, T>,
    params: &SimParams<T>,
    state: &mut SystemState<T>,
    dt: T,
    stick_v: T,
    event_tol_abs: T,
    rk: &mut AdaptiveRk4<T>,
    events: &mut Vec<SimEvent<T>>,
    section: &mut Vec<(T, T)>,
    tracker: &mut Tracker<T>,
) -> Result<()> {
    let n = state.pipe.n_nodes();
    let p_v = state.pipe.p[n - 1];
    let v0 = state.pipe.v[0];
    let t_end = state.t + dt;
    let mut t = state.t;
    let geom = model.geom;
    let scale = [
        geom.x_stop,
        geom.x_stop * (geom.spring_k / geom.mass).sqrt(),
        model.ambient.p_set,
    ];

    while t < t_end {
        match state.valve.contact {
            Contact::Seat | Contact::Stop => {
                let acc = model.valve_accel(state.valve.x, T::zero(), p_v)?;
                if contact_release_check(state.valve.contact, acc) {
                    let from_stop = state.valve.contact == Contact::Stop;
                    state.valve.contact = Contact::Free;
                    state.valve.xdot = T::zero();
                    if from_stop {
                        // Release is reserved for leaving the upper stop; a
                        // sub-set-pressure release is the nonsmooth-fold
                        // blowdown closure.
                        events.push(SimEvent { t, kind: EventKind::Release, impact_speed: None });
                        if state.tank.p_r < model.ambient.p_set {
                            events.push(SimEvent {
                                t,
                                kind: EventKind::BlowdownClose,
                                impact_speed: None,
                            });
                            tracker.blowdown_close_pressure = Some(state.tank.p_r);
                        }
                    } else {
                        events.push(SimEvent { t, kind: EventKind::ValveOpen, impact_speed: None });
                    }
                    continue;
                }
                // Valve pinned; only the tank pressure evolves.
                let mut f = |tt: T, _y: &[T; 1]| {
                    [model.tank_rhs(params.tank_volume, params.inflow.mdot_at(tt), v0)]
                };
                let mut y = [state.tank.p_r];
                let mut tc = t;
                while tc < t_end {
                    let step = rk.step(&mut f, tc, &y, t_end, &[model.ambient.p_set]);
                    tc = step.t1;
                    y = step.y1;
                }
                state.tank.p_r = y[0];
                t = t_end;
            }
            Contact::Free => {
                let mut f = |tt: T, y: &[T; 3]| -> [T; 3] {
                    // valve_accel clamps the lift internally, so it cannot fail
                    // on the excursions the integrator probes past a boundary.
                    let acc = model
                        .valve_accel(y[0], y[1], p_v)
                        .expect("valve_accel is total on clamped lift");
                    let pr_dot = model.tank_rhs(params.tank_volume, params.inflow.mdot_at(tt), v0);
                    [y[1], acc, pr_dot]
                };
                let y = [state.valve.x, state.valve.xdot, state.tank.p_r];
                let step = rk.step(&mut f, t, &y, t_end, &scale);

                // Earliest boundary crossing on the dense output, including
                // interior excursions that would recross before the endpoint.
                let hit_seat =
                    step.locate_first_crossing(0, T::zero(), false, event_tol_abs);
                let hit_stop =
                    step.locate_first_crossing(0, geom.x_stop, true, event_tol_abs);
                let crossed = match (hit_seat, hit_stop) {
                    (Some(a), Some(b)) if a <= b => Some((ImpactBoundary::Seat, T::zero(), a)),
                    (Some(_), Some(b)) => Some((ImpactBoundary::Stop, geom.x_stop, b)),
                    (Some(a), None) => Some((ImpactBoundary::Seat, T::zero(), a)),
                    (None, Some(b)) => Some((ImpactBoundary::Stop, geom.x_stop, b)),
                    (None, None) => None,
                };
                if let Some((boundary, b_pos, t_hit)) = crossed {
                    let (x_hit, xdot_hit, pr_hit) = (
                        b_pos,
                        step.interpolate(1, t_hit),
                        step.interpolate(2, t_hit),
                    );
                    state.valve = ValveState { x: x_hit, xdot: xdot_hit, contact: Contact::Free };
                    state.tank.p_r = pr_hit;
                    t = t_hit;
                    tracker.min_lift = tracker.min_lift.min(x_hit);
                    tracker.max_lift = tracker.max_lift.max(x_hit);

                    let inward = match boundary {
                        ImpactBoundary::Seat => xdot_hit < T::zero(),
                        ImpactBoundary::Stop => xdot_hit > T::zero(),
                    };
                    if !inward {
                        // Grazing contact located to tolerance; keep integrating.
                        continue;
                    }
                    if xdot_hit.abs() < stick_v {
                        state.valve = coalesce_chatter(&state.valve, boundary, geom);
                        let kind = match boundary {
                            ImpactBoundary::Seat => EventKind::StickSeat,
                            ImpactBoundary::Stop => EventKind::StickStop,
                        };
                        events.push(SimEvent { t, kind, impact_speed: Some(xdot_hit.abs()) });
                        if params.record_section {
                            section.push((t, state.valve.x));
                        }
                    } else {
                        state.valve = handle_impact(&state.valve, boundary, geom)?;
                        let kind = match boundary {
                            ImpactBoundary::Seat => EventKind::SeatImpact,
                            ImpactBoundary::Stop => EventKind::StopImpact,
                        };
                        events.push(SimEvent { t, kind, impact_speed: Some(xdot_hit.abs()) });
                        tracker.impacts += 1;
                        if tracker.impacts > params.max_impacts {
                            return Err(Error::SolverFailure {
                                context: "simulate",
                                message: "impact budget exhausted".into(),
                            });
                        }
                    }
                    continue;
                }

                // Poincare section: zero crossing of xdot inside the substep.
                if params.record_section
                    && (step.y0[1] > T::zero()) != (step.y1[1] > T::zero())
                    && step.y0[1] != T::zero()
                {
                    let t_sec = step.locate_crossing(1, T::zero(), T::lit(1e-14) + stick_v * T::lit(1e-6));
                    section.push((t_sec, step.interpolate(0, t_sec)));
                }

                t = step.t1;
                state.valve.x = step.y1[0];
                state.valve.xdot = step.y1[1];
                state.tank.p_r = step.y1[2];
                tracker.min_lift = tracker.min_lift.min(state.valve.x);
                tracker.max_lift = tracker.max_lift.max(state.valve.x);
            }
        }
    }
    Ok(())
}
