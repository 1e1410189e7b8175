//! Fixed-format CSV and JSON serialization for every analysis output.
//!
//! Every file begins with a comment line carrying the tool version and the
//! resolved-config hash. CSV bodies are RFC-4180 with LF line endings and
//! 17-significant-digit floats.

use crate::equilibrium::CharacteristicCurve;
use crate::pdm::{Sample, SimEvent, SimSummary};
use crate::qwm::HopfBoundary;
use crate::sweeps::{ChartCell, HysteresisReport, PoincareSection, RunOutcome};
use crate::Float;

pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

/// Full-precision float formatting: 17 significant digits, '.' separator.
pub fn fmt_f64(x: Float) -> String {
    format!("{x:.16e}")
}

fn header(config_hash: &str) -> String {
    format!("# prvdyn {TOOL_VERSION} config={config_hash}\n")
}

/// Trajectory CSV: `t,x,xdot,p_r,p_v,v0,vL,contact`.
pub fn trajectory_csv(samples: &[Sample<Float>], config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("t,x,xdot,p_r,p_v,v0,vL,contact\n");
    for s in samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            fmt_f64(s.t),
            fmt_f64(s.x),
            fmt_f64(s.xdot),
            fmt_f64(s.p_r),
            fmt_f64(s.p_v),
            fmt_f64(s.v0),
            fmt_f64(s.v_l),
            s.contact.label()
        ));
    }
    out
}

/// Event CSV: `t,kind,impact_speed` (speed empty where not applicable).
pub fn events_csv(events: &[SimEvent<Float>], config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("t,kind,impact_speed\n");
    for e in events {
        let speed = e.impact_speed.map(fmt_f64).unwrap_or_default();
        out.push_str(&format!("{},{},{}\n", fmt_f64(e.t), e.kind.label(), speed));
    }
    out
}

/// Run summary as JSON.
pub fn summary_json(summary: &SimSummary<Float>, config_hash: &str) -> String {
    let value = serde_json::json!({
        "tool_version": TOOL_VERSION,
        "config_hash": config_hash,
        "status": summary.status.label(),
        "final_time": summary.final_time,
        "min_lift": summary.min_lift,
        "max_lift": summary.max_lift,
        "impact_count": summary.impact_count,
        "final_contact": summary.final_contact.label(),
        "blowdown_close_pressure": summary.blowdown_close_pressure,
        "settled": summary.settled,
    });
    serde_json::to_string_pretty(&value).expect("summary serializes")
}

/// Characteristic-curve CSV: `x_e,p_v,p_r,mdot,k_eff` with folds appended as
/// commented footer rows.
pub fn curve_csv(curve: &CharacteristicCurve<Float>, k_eff: &[Float], config_hash: &str) -> String {
    assert_eq!(curve.samples.len(), k_eff.len());
    let mut out = header(config_hash);
    out.push_str("x_e,p_v,p_r,mdot,k_eff\n");
    for (pt, k) in curve.samples.iter().zip(k_eff) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(pt.x_e),
            fmt_f64(pt.p_v),
            fmt_f64(pt.p_r),
            fmt_f64(pt.mdot),
            fmt_f64(*k)
        ));
    }
    for fold in &curve.folds {
        out.push_str(&format!("# fold,{},{}\n", fmt_f64(fold.x_fold), fmt_f64(fold.p_fold)));
    }
    out
}

/// Hopf-boundary CSV: `q,L_c,flags`.
pub fn hopf_csv(boundary: &HopfBoundary<Float>, config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("q,L_c,flags\n");
    let flags = format!(
        "convection={};inlet_loss={}",
        boundary.convection as u8, boundary.inlet_loss as u8
    );
    for s in &boundary.samples {
        let l = s.l_c.map(fmt_f64).unwrap_or_else(|| "outside-bracket".into());
        out.push_str(&format!("{},{},{}\n", fmt_f64(s.q), l, flags));
    }
    out
}

/// Stability-chart CSV: `q,L,label,opening,closing,max_overshoot,impacts`.
pub fn chart_csv(cells: &[ChartCell], config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("q,L,label,opening,closing,max_overshoot,impacts\n");
    for cell in cells {
        match &cell.outcome {
            RunOutcome::Classified(c) => out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                fmt_f64(cell.q),
                fmt_f64(cell.length),
                c.label,
                stability_label(c.opening),
                stability_label(c.closing),
                fmt_f64(c.max_overshoot),
                c.impact_count
            )),
            RunOutcome::Indeterminate { reason } => out.push_str(&format!(
                "{},{},indeterminate,indeterminate,indeterminate,,{}\n",
                fmt_f64(cell.q),
                fmt_f64(cell.length),
                escape(reason)
            )),
        }
    }
    out
}

fn stability_label(s: crate::sweeps::Stability) -> &'static str {
    match s {
        crate::sweeps::Stability::Stable => "stable",
        crate::sweeps::Stability::Unstable => "unstable",
    }
}

fn escape(field: &str) -> String {
    if field.contains(',') || field.contains('"') || field.contains('\n') {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Poincare CSV: `r,section_lift`, one row per section sample.
pub fn poincare_csv(sections: &[PoincareSection], config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("r,section_lift\n");
    for sec in sections {
        for &x in &sec.samples {
            out.push_str(&format!("{},{}\n", fmt_f64(sec.restitution), fmt_f64(x)));
        }
    }
    out
}

/// Design-force CSV: `y,F_op,F_cl`.
pub fn design_csv(rows: &[(Float, Float, Float)], config_hash: &str) -> String {
    let mut out = header(config_hash);
    out.push_str("y,F_op,F_cl\n");
    for (y, fop, fcl) in rows {
        out.push_str(&format!("{},{},{}\n", fmt_f64(*y), fmt_f64(*fop), fmt_f64(*fcl)));
    }
    out
}

/// Stage annotations JSON for the hysteresis scenario.
pub fn stages_json(report: &HysteresisReport, config_hash: &str) -> String {
    let value = serde_json::json!({
        "tool_version": TOOL_VERSION,
        "config_hash": config_hash,
        "stages": report.stages,
        "missing_stages": report.missing_stages,
        "cycling_frequency_hz": report.cycling_frequency_hz,
        "chatter_frequency_hz": report.chatter_frequency_hz,
        "close_pressures": report.close_pressures,
    });
    serde_json::to_string_pretty(&value).expect("stages serialize")
}
