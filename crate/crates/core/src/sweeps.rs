//! Batch experiments over the PDM: opening/closing stability classification,
//! (L, q) stability charts with a QWM Hopf overlay, restitution sweeps with a
//! Poincare section and the four-stage hysteresis scenario.
//!
//! Everything here is an embarrassingly parallel map over independent
//! simulations; results are assembled in deterministic row-major order.

use rayon::prelude::*;
use serde::Serialize;

use crate::config::ClassifyThresholds;
use crate::equilibrium::{SteadyModel, SteadyOptions};
use crate::error::Result;
use crate::fluid::{Ambient, FluidModel};
use crate::geom::{EffectiveAreaModel, EffectiveAreaVariant, ValveGeometry};
use crate::pdm::{
    simulate, EventKind, InflowSchedule, PdmModel, RunStatus, Sample, SimEvent, SimParams,
    SimResult, Contact,
};
use crate::qwm::{hopf_boundary, HopfBoundary, QwmModel, QwmOptions};
use crate::Float;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Stability {
    Stable,
    Unstable,
}

/// Classification of one relief event, SoSc/SoUc/UoSc/UoUc.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunClassification {
    pub opening: Stability,
    pub closing: Stability,
    pub label: &'static str,
    pub max_overshoot: Float,
    pub impact_count: usize,
    pub dominant_frequency_hz: Float,
    pub settled: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum RunOutcome {
    Classified(RunClassification),
    /// Trajectory too short or the run failed; never silently stable.
    Indeterminate { reason: String },
}

impl RunOutcome {
    pub fn label(&self) -> &str {
        match self {
            RunOutcome::Classified(c) => c.label,
            RunOutcome::Indeterminate { .. } => "indeterminate",
        }
    }
}

fn label_for(opening: Stability, closing: Stability) -> &'static str {
    match (opening, closing) {
        (Stability::Stable, Stability::Stable) => "SoSc",
        (Stability::Stable, Stability::Unstable) => "SoUc",
        (Stability::Unstable, Stability::Stable) => "UoSc",
        (Stability::Unstable, Stability::Unstable) => "UoUc",
    }
}

fn max_dev(traj: &[Sample<Float>], t0: Float, t1: Float, x_ref: Float) -> Float {
    traj.iter()
        .filter(|s| s.t >= t0 && s.t <= t1)
        .map(|s| (s.x - x_ref).abs())
        .fold(0.0, Float::max)
}

/// Classify a completed run into opening/closing stability per the
/// threshold set. The trajectory must cover the opening transient; runs that
/// never open or end too early come back indeterminate.
pub fn classify_run(
    result: &SimResult<Float>,
    x_stop: Float,
    thresholds: &ClassifyThresholds,
) -> RunOutcome {
    let traj = &result.trajectory;
    let events = &result.events;
    if traj.len() < 8 {
        return RunOutcome::Indeterminate { reason: "trajectory too short".into() };
    }

    let t_open = match events.iter().find(|e| e.kind == EventKind::ValveOpen) {
        Some(e) => e.t,
        None => {
            return RunOutcome::Indeterminate { reason: "valve never opened".into() };
        }
    };

    let impacts: Vec<&SimEvent<Float>> = events
        .iter()
        .filter(|e| matches!(e.kind, EventKind::SeatImpact | EventKind::StopImpact))
        .collect();

    let metrics_freq = dominant_frequency(traj, t_open, traj.last().unwrap().t);
    let base = |opening: Stability, closing: Stability| RunClassification {
        opening,
        closing,
        label: label_for(opening, closing),
        max_overshoot: result.summary.max_lift / x_stop,
        impact_count: result.summary.impact_count,
        dominant_frequency_hz: metrics_freq,
        settled: result.summary.settled,
    };

    // A run terminated by flow reversal diverged during the transient.
    if result.summary.status == RunStatus::FlowReversal {
        return RunOutcome::Classified(base(Stability::Unstable, Stability::Unstable));
    }

    // First lift peak after opening.
    let mut t_peak = None;
    let mut last_x = 0.0;
    let mut rising = false;
    for s in traj.iter().filter(|s| s.t >= t_open) {
        if s.x > last_x {
            rising = true;
        } else if rising && s.x < last_x {
            t_peak = Some(s.t);
            break;
        }
        last_x = s.x;
    }
    // A valve pinned on the stop counts as its own peak.
    let t_peak = t_peak.unwrap_or_else(|| {
        traj.iter().find(|s| s.contact == Contact::Stop).map(|s| s.t).unwrap_or(t_open)
    });

    let t_end = traj.last().unwrap().t;
    let window = thresholds.decay_window.min(t_end - t_peak);
    if window < 0.5 * thresholds.decay_window {
        return RunOutcome::Indeterminate {
            reason: "opening window extends past the simulated horizon".into(),
        };
    }

    // Reference lift for the envelope: stop position when pinned, otherwise
    // the mean over the window tail.
    let tail: Vec<&Sample<Float>> =
        traj.iter().filter(|s| s.t >= t_peak + 0.8 * window && s.t <= t_peak + window).collect();
    if tail.is_empty() {
        return RunOutcome::Indeterminate { reason: "no samples in the decay window".into() };
    }
    let x_ref = if tail.iter().all(|s| s.contact == Contact::Stop) {
        x_stop
    } else {
        tail.iter().map(|s| s.x).sum::<Float>() / tail.len() as Float
    };

    let a0 = max_dev(traj, t_peak, t_peak + 0.2 * window, x_ref);
    let a1 = max_dev(traj, t_peak + 0.8 * window, t_peak + window, x_ref);
    let envelope_ok = a1 <= a0 / thresholds.decay_factor
        || a1 <= thresholds.amp_epsilon * x_stop;
    let late_impacts = impacts
        .iter()
        .any(|e| e.t > t_peak + thresholds.settle_window && e.t <= t_peak + window);
    let opening = if envelope_ok && !late_impacts { Stability::Stable } else { Stability::Unstable };

    // Closing phase: from the last excursion above x_stop/2 down to the
    // final seat contact. Without a completed closure there is no chattering
    // evidence, so closing classifies stable.
    let closing = match events
        .iter()
        .rev()
        .find(|e| e.kind == EventKind::StickSeat && e.t > t_peak + thresholds.settle_window)
    {
        None => Stability::Stable,
        Some(seat_stick) => {
            let t_seat = seat_stick.t;
            let t_desc = traj
                .iter()
                .filter(|s| s.t < t_seat && s.x >= 0.5 * x_stop)
                .map(|s| s.t)
                .fold(t_open, Float::max);
            let in_phase: Vec<Float> = impacts
                .iter()
                .filter(|e| e.t >= t_desc && e.t <= t_seat + 0.2)
                .map(|e| e.t)
                .collect();
            let mut unstable = false;
            for (i, &t0) in in_phase.iter().enumerate() {
                let in_window =
                    in_phase[i..].iter().take_while(|&&tt| tt <= t0 + thresholds.chatter_window).count();
                if in_window > thresholds.chatter_impacts {
                    unstable = true;
                    break;
                }
            }
            if unstable {
                Stability::Unstable
            } else {
                Stability::Stable
            }
        }
    };

    RunOutcome::Classified(base(opening, closing))
}

/// Crude dominant-frequency estimate: zero crossings of the detrended lift.
fn dominant_frequency(traj: &[Sample<Float>], t0: Float, t1: Float) -> Float {
    let window: Vec<&Sample<Float>> = traj.iter().filter(|s| s.t >= t0 && s.t <= t1).collect();
    if window.len() < 4 || t1 <= t0 {
        return 0.0;
    }
    let mean = window.iter().map(|s| s.x).sum::<Float>() / window.len() as Float;
    let mut crossings = 0usize;
    for w in window.windows(2) {
        if (w[0].x - mean > 0.0) != (w[1].x - mean > 0.0) {
            crossings += 1;
        }
    }
    crossings as Float / (2.0 * (t1 - t0))
}

/// Base system description shared by all sweep entry points.
#[derive(Debug, Clone)]
pub struct SweepContext<'a> {
    pub fluid: &'a FluidModel<Float>,
    pub geom: &'a ValveGeometry<Float>,
    pub aeff: &'a EffectiveAreaModel<Float>,
    pub ambient: &'a Ambient<Float>,
    pub params: SimParams<Float>,
    pub thresholds: ClassifyThresholds,
}

impl<'a> SweepContext<'a> {
    fn model(&self) -> PdmModel<'_, Float> {
        PdmModel { fluid: self.fluid, geom: self.geom, aeff: self.aeff, ambient: self.ambient }
    }

    /// Capacity used to convert relative flow rates, exact-gas convention.
    pub fn capacity(&self) -> Result<Float> {
        SteadyModel::new(
            self.fluid,
            self.geom,
            self.aeff,
            self.ambient,
            SteadyOptions { inlet_loss: true, gas_exact: true },
        )
        .capacity()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ChartCell {
    pub q: Float,
    pub length: Float,
    pub outcome: RunOutcome,
}

#[derive(Debug, Clone)]
pub struct StabilityChart {
    /// Row-major over q (outer) then L (inner).
    pub cells: Vec<ChartCell>,
    /// QWM Hopf boundary of the unmodified (constant-area) valve.
    pub overlay: HopfBoundary<Float>,
}

/// Run one PDM simulation per (q, L) cell and classify it. Cell failures are
/// recorded as indeterminate outcomes, never aborting the sweep.
pub fn stability_chart(
    ctx: &SweepContext<'_>,
    q_grid: &[Float],
    l_grid: &[Float],
) -> Result<StabilityChart> {
    let cap = ctx.capacity()?;
    // Row-major job list: q outer, L inner. Indexed parallel collect keeps
    // the output order independent of scheduling.
    let jobs: Vec<(Float, Float)> = q_grid
        .iter()
        .flat_map(|&q| l_grid.iter().map(move |&l| (q, l)))
        .collect();

    let cells: Vec<ChartCell> = jobs
        .par_iter()
        .map(|&(q, l)| {
            let mut params = ctx.params;
            params.pipe_length = l;
            params.inflow = InflowSchedule::Constant { mdot: q * cap };
            let outcome = match simulate(&ctx.model(), &params, None) {
                Ok(result) => classify_run(&result, ctx.geom.x_stop, &ctx.thresholds),
                Err(e) => RunOutcome::Indeterminate { reason: e.to_string() },
            };
            ChartCell { q, length: l, outcome }
        })
        .collect();

    // Hopf overlay for the unmodified valve (A_hat = 1).
    let aeff_const = EffectiveAreaModel::new(
        EffectiveAreaVariant::Constant,
        ctx.geom,
        ctx.fluid.choking_factor()?,
    )?;
    let qwm = QwmModel {
        fluid: ctx.fluid,
        geom: ctx.geom,
        aeff: &aeff_const,
        ambient: ctx.ambient,
        pipe_length: 1.0,
        tank_volume: ctx.params.tank_volume,
        lambda: 0.0,
        mdot_in: 0.0,
        options: QwmOptions::default(),
    };
    let cap_const = SteadyModel::new(
        ctx.fluid,
        ctx.geom,
        &aeff_const,
        ctx.ambient,
        SteadyOptions { inlet_loss: true, gas_exact: true },
    )
    .capacity()?;
    let l_min = l_grid.iter().cloned().fold(Float::INFINITY, Float::min).min(0.05);
    let l_max = l_grid.iter().cloned().fold(0.0, Float::max).max(1.0) * 2.0;
    // Overlay points that have no reachable equilibrium (q at the capacity
    // edge) or no bracketing are reported as absent, never as sweep failures.
    let overlay_samples: Vec<crate::qwm::HopfBoundarySample<Float>> = q_grid
        .iter()
        .map(|&q| crate::qwm::HopfBoundarySample {
            q,
            l_c: hopf_boundary(&qwm, cap_const, &[q], (l_min, l_max), 1e-4)
                .ok()
                .and_then(|b| b.samples.first().and_then(|s| s.l_c)),
        })
        .collect();
    let overlay =
        HopfBoundary { samples: overlay_samples, convection: true, inlet_loss: true };

    Ok(StabilityChart { cells, overlay })
}

/// Poincare section (lift at xdot = 0 crossings) for one restitution value.
#[derive(Debug, Clone, Serialize)]
pub struct PoincareSection {
    pub restitution: Float,
    /// Post-transient section samples, within [0, x_stop].
    pub samples: Vec<Float>,
    pub impact_count: usize,
    pub final_contact: &'static str,
}

/// Sweep the restitution coefficient at fixed (L, q); both boundary
/// coefficients are set to r. The first `discard` fraction of the horizon is
/// dropped as transient.
pub fn restitution_sweep(
    ctx: &SweepContext<'_>,
    r_grid: &[Float],
    discard: Float,
) -> Result<Vec<PoincareSection>> {
    let sections: Vec<Result<PoincareSection>> = r_grid
        .par_iter()
        .map(|&r| {
            let mut geom = ctx.geom.clone();
            geom.e_seat = r;
            geom.e_stop = r;
            geom.validate()?;
            let model =
                PdmModel { fluid: ctx.fluid, geom: &geom, aeff: ctx.aeff, ambient: ctx.ambient };
            let mut params = ctx.params;
            params.record_section = true;
            let result = simulate(&model, &params, None)?;
            let t_cut = discard * params.horizon;
            let mut samples: Vec<Float> = result
                .section
                .iter()
                .filter(|(t, _)| *t >= t_cut)
                .map(|(_, x)| x.max(0.0).min(geom.x_stop))
                .collect();
            if samples.is_empty() {
                // Settled into sustained contact before any crossing: the
                // attractor is the contact state itself.
                match result.summary.final_contact {
                    Contact::Stop => samples.push(geom.x_stop),
                    Contact::Seat => samples.push(0.0),
                    Contact::Free => {}
                }
            }
            Ok(PoincareSection {
                restitution: r,
                samples,
                impact_count: result.summary.impact_count,
                final_contact: result.summary.final_contact.label(),
            })
        })
        .collect();
    sections.into_iter().collect()
}

/// Stage timestamps of the four-phase relief event.
#[derive(Debug, Clone, Serialize)]
pub struct StageMark {
    pub name: &'static str,
    pub t_start: Float,
    pub t_end: Float,
}

#[derive(Debug, Clone, Serialize)]
pub struct HysteresisReport {
    pub stages: Vec<StageMark>,
    pub missing_stages: Vec<&'static str>,
    /// Opening-to-opening cycling frequency, when at least two cycles ran.
    pub cycling_frequency_hz: Option<Float>,
    /// Median stop-impact rate during the settling chatter.
    pub chatter_frequency_hz: Option<Float>,
    /// Tank pressure at each blowdown closure.
    pub close_pressures: Vec<Float>,
}

fn pressure_at(result: &SimResult<Float>, t: Float) -> Option<Float> {
    let idx = result.trajectory.partition_point(|s| s.t < t);
    result.trajectory.get(idx.min(result.trajectory.len().saturating_sub(1))).map(|s| s.p_r)
}

/// Detect and timestamp the four stages of the relief event on a finished
/// run: pressure build, pop-open and settle, pseudo-equilibrium tracking,
/// blowdown closure.
///
/// A "deep" closure is a blowdown-close whose tank pressure lies within 5%
/// of the lowest observed close pressure: the acoustic ring after a slam can
/// briefly lift the valve off the stop near set pressure, and those shallow
/// re-releases are not relief-cycle boundaries.
pub fn hysteresis_stages(result: &SimResult<Float>, x_stop: Float) -> HysteresisReport {
    let ev = &result.events;
    let t_final = result.summary.final_time;
    let mut stages = Vec::new();
    let mut missing = Vec::new();

    // Pop opens: seat releases that carry the valve to at least 90% of the
    // stop within 0.3 s, after a closed dwell of at least 50 ms (excludes
    // the sub-period reopenings of a bouncing regime).
    let seat_sticks: Vec<Float> =
        ev.iter().filter(|e| e.kind == EventKind::StickSeat).map(|e| e.t).collect();
    let pops: Vec<Float> = ev
        .iter()
        .filter(|e| e.kind == EventKind::ValveOpen)
        .map(|e| e.t)
        .filter(|&t| {
            let dwell_ok = match seat_sticks.iter().rev().find(|&&ts| ts < t) {
                Some(&ts) => t - ts >= 0.05,
                None => true, // initial opening
            };
            let reaches_stop = result
                .trajectory
                .iter()
                .filter(|s| s.t >= t && s.t <= t + 0.3)
                .any(|s| s.x >= 0.9 * x_stop);
            dwell_ok && reaches_stop
        })
        .collect();

    // Stage 1 always exists: it runs until the first pop, or the horizon if
    // the inflow never brings the tank to set pressure.
    let open = pops.first().copied();
    stages.push(StageMark { name: "pressure-build", t_start: 0.0, t_end: open.unwrap_or(t_final) });
    let stick = open.and_then(|t0| {
        ev.iter().find(|e| e.kind == EventKind::StickStop && e.t >= t0).map(|e| e.t)
    });
    match (open, stick) {
        (Some(a), Some(b)) => stages.push(StageMark { name: "pop-open", t_start: a, t_end: b }),
        _ => missing.push("pop-open"),
    }

    // All blowdown closes with their pressures; deep = within 5% of the min.
    let closes: Vec<(Float, Float)> = ev
        .iter()
        .filter(|e| e.kind == EventKind::BlowdownClose)
        .filter_map(|e| pressure_at(result, e.t).map(|p| (e.t, p)))
        .collect();
    let min_close = closes.iter().map(|&(_, p)| p).fold(Float::INFINITY, Float::min);
    let deep_closes: Vec<(Float, Float)> =
        closes.iter().copied().filter(|&(_, p)| p <= 1.05 * min_close).collect();

    let close = stick.and_then(|t0| deep_closes.iter().find(|&&(t, _)| t > t0).copied());
    match (stick, close) {
        (Some(a), Some((b, _))) => {
            stages.push(StageMark { name: "pseudo-equilibrium", t_start: a, t_end: b })
        }
        (Some(a), None) => {
            // Still tracking the branch when the horizon ended.
            stages.push(StageMark { name: "pseudo-equilibrium", t_start: a, t_end: t_final });
            missing.push("blowdown-close");
        }
        _ => missing.push("pseudo-equilibrium"),
    }
    if let Some((rel, _)) = close {
        let reseat = ev
            .iter()
            .find(|e| e.kind == EventKind::StickSeat && e.t >= rel)
            .map(|e| e.t)
            .unwrap_or(t_final);
        stages.push(StageMark { name: "blowdown-close", t_start: rel, t_end: reseat });
    }

    // Cycling frequency. The first relief cycle is deterministic, so prefer
    // the half-cycle estimate 1/(2 (t_close - t_open)) from the pop and its
    // deep closure; fall back to pop-open intervals when no deep close
    // happened but the valve reopened anyway.
    let cycling = match (open, close) {
        (Some(t_open), Some((t_close, _))) if t_close > t_open => {
            Some(1.0 / (2.0 * (t_close - t_open)))
        }
        _ if pops.len() >= 2 => {
            let span = pops.last().unwrap() - pops[0];
            Some((pops.len() - 1) as Float / span)
        }
        _ => None,
    };

    // Chatter frequency: median inter-impact gap at the stop during settle.
    let chatter = {
        let window_end = close.map(|(t, _)| t).unwrap_or(t_final);
        let mut times: Vec<Float> = ev
            .iter()
            .filter(|e| e.kind == EventKind::StopImpact && e.t <= window_end)
            .map(|e| e.t)
            .collect();
        times.sort_by(|a, b| a.partial_cmp(b).unwrap());
        if times.len() >= 3 {
            let mut gaps: Vec<Float> = times.windows(2).map(|w| w[1] - w[0]).collect();
            gaps.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let median = gaps[gaps.len() / 2];
            (median > 0.0).then(|| 1.0 / median)
        } else {
            None
        }
    };

    HysteresisReport {
        stages,
        missing_stages: missing,
        cycling_frequency_hz: cycling,
        chatter_frequency_hz: chatter,
        close_pressures: deep_closes.iter().map(|&(_, p)| p).collect(),
    }
}

/// Convenience wrapper: run the scenario then annotate it.
pub fn hysteresis_scenario(ctx: &SweepContext<'_>) -> Result<(SimResult<Float>, HysteresisReport)> {
    let result = simulate(&ctx.model(), &ctx.params, None)?;
    let report = hysteresis_stages(&result, ctx.geom.x_stop);
    Ok((result, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::DischargeCoefficient;

    fn fixture(
        a_hat: EffectiveAreaVariant<Float>,
    ) -> (FluidModel<Float>, ValveGeometry<Float>, EffectiveAreaModel<Float>, Ambient<Float>) {
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
    fn synthetic_settled_trajectory_classifies_sosc() {
        // A constant pinned-at-stop trajectory with only an opening event.
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let _ = (&fluid, &aeff, &ambient);
        let x_stop = geom.x_stop;
        let trajectory: Vec<Sample<Float>> = (0..2000)
            .map(|i| {
                let t = i as Float * 1e-3;
                Sample {
                    t,
                    x: if t < 0.1 { 0.0 } else { x_stop },
                    xdot: 0.0,
                    p_r: 5.0e5,
                    p_v: 5.0e5,
                    v0: 0.0,
                    v_l: 0.0,
                    contact: if t < 0.1 { Contact::Seat } else { Contact::Stop },
                }
            })
            .collect();
        let events = vec![SimEvent { t: 0.1, kind: EventKind::ValveOpen, impact_speed: None }];
        let summary = crate::pdm::SimSummary {
            status: RunStatus::Completed,
            final_time: 2.0,
            min_lift: 0.0,
            max_lift: x_stop,
            impact_count: 0,
            final_contact: Contact::Stop,
            blowdown_close_pressure: None,
            settled: true,
        };
        let result = SimResult {
            trajectory,
            events,
            section: vec![],
            summary,
            final_state: crate::pdm::SystemState {
                t: 2.0,
                valve: crate::pdm::ValveState { x: x_stop, xdot: 0.0, contact: Contact::Stop },
                tank: crate::pdm::TankState { p_r: 5.0e5 },
                pipe: crate::pdm::PipeGrid::uniform(1.0, 8, 0.0, 5.0e5).unwrap(),
            },
        };
        match classify_run(&result, x_stop, &ClassifyThresholds::default()) {
            RunOutcome::Classified(c) => {
                assert_eq!(c.label, "SoSc");
                assert_eq!(c.impact_count, 0);
            }
            other => panic!("expected classification, got {other:?}"),
        }
    }

    #[test]
    fn too_short_trajectory_is_indeterminate() {
        let (_, geom, _, _) = fixture(EffectiveAreaVariant::Constant);
        let result = SimResult {
            trajectory: vec![],
            events: vec![],
            section: vec![],
            summary: crate::pdm::SimSummary {
                status: RunStatus::Completed,
                final_time: 0.0,
                min_lift: 0.0,
                max_lift: 0.0,
                impact_count: 0,
                final_contact: Contact::Seat,
                blowdown_close_pressure: None,
                settled: false,
            },
            final_state: crate::pdm::SystemState {
                t: 0.0,
                valve: crate::pdm::ValveState::closed(),
                tank: crate::pdm::TankState { p_r: 4.9e5 },
                pipe: crate::pdm::PipeGrid::uniform(1.0, 8, 0.0, 4.9e5).unwrap(),
            },
        };
        assert!(matches!(
            classify_run(&result, geom.x_stop, &ClassifyThresholds::default()),
            RunOutcome::Indeterminate { .. }
        ));
    }

    #[test]
    fn ramp_below_set_pressure_flags_missing_stages() {
        // Inflow too weak to reach set pressure: only stage 1 material
        // exists; the later stages come back flagged as missing.
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Polynomial([0.0, 1.0, 0.0, 0.0]));
        let params = SimParams::new(
            0.5,
            InflowSchedule::RampHold { t_ramp: 0.2, mdot_peak: 0.01 },
            0.5,
            fluid.kind,
        );
        let ctx = SweepContext {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            params,
            thresholds: ClassifyThresholds::default(),
        };
        let (_, report) = hysteresis_scenario(&ctx).unwrap();
        assert_eq!(report.stages.len(), 1, "only the pressure-build stage exists");
        assert_eq!(report.stages[0].name, "pressure-build");
        assert!(report.missing_stages.contains(&"pop-open"));
        assert!(report.missing_stages.contains(&"pseudo-equilibrium"));
        assert!(report.close_pressures.is_empty());
    }

    #[test]
    fn empty_grid_gives_empty_chart() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let params = SimParams::new(
            0.5,
            InflowSchedule::Constant { mdot: 0.4 },
            0.5,
            fluid.kind,
        );
        let ctx = SweepContext {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            params,
            thresholds: ClassifyThresholds::default(),
        };
        let chart = stability_chart(&ctx, &[], &[0.5]).unwrap();
        assert!(chart.cells.is_empty());
    }

    #[test]
    fn sweep_determinism_under_parallelism() {
        let (fluid, geom, aeff, ambient) = fixture(EffectiveAreaVariant::Constant);
        let params = SimParams::new(
            0.4,
            InflowSchedule::Constant { mdot: 0.4 },
            0.6,
            fluid.kind,
        );
        let ctx = SweepContext {
            fluid: &fluid,
            geom: &geom,
            aeff: &aeff,
            ambient: &ambient,
            params,
            thresholds: ClassifyThresholds::default(),
        };
        let a = stability_chart(&ctx, &[0.4, 0.6], &[0.3, 0.5]).unwrap();
        let b = stability_chart(&ctx, &[0.4, 0.6], &[0.3, 0.5]).unwrap();
        let text_a = format!("{:?}", a.cells);
        let text_b = format!("{:?}", b.cells);
        assert_eq!(text_a, text_b);
    }
}
