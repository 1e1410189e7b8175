//! prvdyn: simulation and stability analysis of spring-operated
//! pressure-relief valves coupled to inlet piping.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use prvdyn_core::config::{apply_override, ResolvedConfig, SimConfig};
use prvdyn_core::csvio;
use prvdyn_core::design::BlowdownDesign;
use prvdyn_core::equilibrium::{SteadyModel, SteadyOptions};
use prvdyn_core::pdm::{simulate, RunStatus};
use prvdyn_core::qwm::{
    hopf_boundary, pseudo_equilibrium_stability, QwmModel, QwmOptions,
};
use prvdyn_core::sweeps::{
    hysteresis_scenario, restitution_sweep, stability_chart, SweepContext,
};
use prvdyn_core::Float;

/// Exit codes: 0 success, 2 config error, 3 flow-reversal termination,
/// 1 anything else.
const EXIT_CONFIG: i32 = 2;
const EXIT_FLOW_REVERSAL: i32 = 3;

#[derive(Parser)]
#[command(name = "prvdyn", version, about)]
struct Cli {
    /// Worker threads for sweeps (default: env PRVDYN_JOBS, then all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Run configuration (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Dotted-path config overrides, e.g. `pipe.length=2.5` (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full valve-and-pipeline model and write the trajectory,
    /// event log and summary.
    Simulate(ConfigArgs),
    /// Sample the equilibrium characteristic curve and locate folds.
    Equilibrium {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Number of curve samples.
        #[arg(long, default_value_t = 128)]
        samples: usize,
        /// Drop the pipe inlet pressure loss.
        #[arg(long)]
        no_inlet_loss: bool,
        /// Use the exact choked gas branch instead of p* = p_v - p_b.
        #[arg(long)]
        gas_exact: bool,
    },
    /// Quarter-wave-model Jacobian and eigenvalues at the equilibrium
    /// carrying the configured inflow; optionally the sliding analysis at
    /// the upper stop.
    QwmEig {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Analyze the pseudo-equilibrium at the upper stop instead.
        #[arg(long)]
        pseudo: bool,
    },
    /// Trace the quarter-wave Hopf boundary over a range of flow rates.
    Hopf {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Flow-rate grid start:step:end (relative to capacity).
        #[arg(long, default_value = "0.1:0.1:0.9")]
        q: String,
        /// Pipe-length bracket, m.
        #[arg(long, default_value_t = 0.02)]
        l_min: Float,
        #[arg(long, default_value_t = 12.0)]
        l_max: Float,
        /// Drop the nonlinear convection terms.
        #[arg(long)]
        no_convection: bool,
        /// Drop the pipe inlet pressure loss.
        #[arg(long)]
        no_inlet_loss: bool,
    },
    /// Classify PDM runs over an (L, q) grid.
    Chart {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Flow-rate grid start:step:end.
        #[arg(long, default_value = "0.3:0.1:1.0")]
        q: String,
        /// Pipe-length grid start:step:end, m.
        #[arg(long, default_value = "1.0:1.0:6.0")]
        l: String,
    },
    /// Sweep the restitution coefficient and record the Poincare section.
    SweepR {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Restitution grid start:step:end.
        #[arg(long, default_value = "0.2:0.1:0.9")]
        r: String,
        /// Fraction of the horizon discarded as transient.
        #[arg(long, default_value_t = 0.5)]
        discard: Float,
    },
    /// Run the ramped relief scenario and annotate its four stages.
    Hysteresis(ConfigArgs),
    /// Evaluate the dimensionless opening/closing design forces.
    Design {
        /// Pressure ratio p_set/p_b.
        #[arg(long)]
        delta: Float,
        /// Blowdown-curve design parameter.
        #[arg(long)]
        eta: Float,
        /// Geometric design parameter (> 1).
        #[arg(long)]
        k: Float,
        /// Blowdown fraction in (0, 1).
        #[arg(long)]
        bd: Float,
        /// Number of lift samples in [0, 1].
        #[arg(long, default_value_t = 101)]
        samples: usize,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let jobs = cli
        .jobs
        .or_else(|| std::env::var("PRVDYN_JOBS").ok().and_then(|s| s.parse().ok()));
    if let Some(n) = jobs {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(cli.command) {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = if e.downcast_ref::<prvdyn_core::Error>().is_some_and(|ce| {
                matches!(ce, prvdyn_core::Error::InvalidField { .. } | prvdyn_core::Error::Domain { .. })
            }) {
                EXIT_CONFIG
            } else {
                1
            };
            std::process::exit(code);
        }
    }
}

fn load_config(args: &ConfigArgs) -> Result<(ResolvedConfig, PathBuf)> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut doc: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| prvdyn_core::Error::InvalidField {
            field: "<config>".into(),
            message: e.to_string(),
        })?;
    for spec in &args.overrides {
        apply_override(&mut doc, spec)?;
    }
    let cfg: SimConfig = serde_json::from_value(doc).map_err(|e| {
        prvdyn_core::Error::InvalidField { field: "<config>".into(), message: e.to_string() }
    })?;
    let base = args.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let resolved = cfg.resolve(Some(&base))?;
    for w in &resolved.warnings {
        eprintln!("warning: {w}");
    }
    std::fs::create_dir_all(&args.out)?;
    Ok((resolved, args.out.clone()))
}

fn write(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn parse_grid(spec: &str) -> Result<Vec<Float>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        bail!("grid must be start:step:end, got `{spec}`");
    }
    let (start, step, end): (Float, Float, Float) =
        (parts[0].parse()?, parts[1].parse()?, parts[2].parse()?);
    if step <= 0.0 || end < start {
        bail!("grid must be increasing, got `{spec}`");
    }
    let mut out = Vec::new();
    let mut v = start;
    while v <= end + 1e-12 {
        out.push(v);
        v += step;
    }
    Ok(out)
}

struct Models {
    fluid: prvdyn_core::FluidModel64,
    geom: prvdyn_core::ValveGeometry64,
    aeff: prvdyn_core::EffectiveAreaModel64,
    ambient: prvdyn_core::Ambient64,
}

fn build_models(resolved: &ResolvedConfig) -> Models {
    let fluid = resolved.fluid();
    let geom = resolved.geometry();
    let aeff = resolved.effective_area(&geom);
    let ambient = resolved.ambient();
    Models { fluid, geom, aeff, ambient }
}

fn run(cmd: Command) -> Result<i32> {
    match cmd {
        Command::Simulate(args) => {
            let (resolved, out) = load_config(&args)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let model = prvdyn_core::pdm::PdmModel {
                fluid: &m.fluid,
                geom: &m.geom,
                aeff: &m.aeff,
                ambient: &m.ambient,
            };
            let params = resolved.sim_params()?;
            let result = simulate(&model, &params, None)?;
            write(&out.join("resolved_config.json"), &serde_json::to_string_pretty(&resolved)?)?;
            write(&out.join("trajectory.csv"), &csvio::trajectory_csv(&result.trajectory, &hash))?;
            write(&out.join("events.csv"), &csvio::events_csv(&result.events, &hash))?;
            write(&out.join("summary.json"), &csvio::summary_json(&result.summary, &hash))?;
            if result.summary.status == RunStatus::FlowReversal {
                eprintln!("run terminated by flow reversal at t = {:.6}", result.summary.final_time);
                return Ok(EXIT_FLOW_REVERSAL);
            }
            Ok(0)
        }
        Command::Equilibrium { cfg, samples, no_inlet_loss, gas_exact } => {
            let (resolved, out) = load_config(&cfg)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let steady = SteadyModel::new(
                &m.fluid,
                &m.geom,
                &m.aeff,
                &m.ambient,
                SteadyOptions { inlet_loss: !no_inlet_loss, gas_exact },
            );
            let curve = steady.characteristic_curve(samples)?;
            let k_eff: Vec<Float> = curve
                .samples
                .iter()
                .map(|pt| steady.effective_stiffness(pt.x_e))
                .collect::<prvdyn_core::Result<_>>()?;
            write(&out.join("resolved_config.json"), &serde_json::to_string_pretty(&resolved)?)?;
            write(&out.join("curve.csv"), &csvio::curve_csv(&curve, &k_eff, &hash))?;
            Ok(0)
        }
        Command::QwmEig { cfg, pseudo } => {
            let (resolved, out) = load_config(&cfg)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let params = resolved.sim_params()?;
            let mdot_in = params.inflow.peak();
            let qwm = QwmModel {
                fluid: &m.fluid,
                geom: &m.geom,
                aeff: &m.aeff,
                ambient: &m.ambient,
                pipe_length: resolved.config.pipe.length,
                tank_volume: resolved.config.tank.volume,
                lambda: resolved.config.pipe.lambda,
                mdot_in,
                options: QwmOptions::default(),
            };
            let mut report = String::new();
            report.push_str(&format!("# prvdyn {} config={hash}\n", csvio::TOOL_VERSION));
            if pseudo {
                let res = pseudo_equilibrium_stability(&qwm)?;
                report.push_str(&format!("pseudo-equilibrium status: {}\n", res.status.label()));
                report.push_str(&format!("constraint acceleration: {:.6e} m/s^2\n", res.constraint_accel));
                if let Some(j0) = &res.unconstrained {
                    report.push_str("\nunconstrained Jacobian J0:\n");
                    report.push_str(&matrix_block(&j0.matrix));
                    report.push_str(&eigen_block(&j0.eigenvalues, j0.classification.label()));
                }
                if let Some(a_s) = &res.sliding {
                    report.push_str("\nsliding Jacobian A_s:\n");
                    report.push_str(&matrix_block(&a_s.matrix));
                    report.push_str(&eigen_block(&a_s.eigenvalues, a_s.classification.label()));
                }
            } else {
                let eq = qwm.equilibrium()?;
                let jac = qwm.jacobian(&eq)?;
                report.push_str(&format!(
                    "equilibrium: x = {:.9e} m, p_r = {:.9e} Pa (mdot = {:.6e} kg/s)\n",
                    eq.x, eq.p_r, mdot_in
                ));
                report.push_str("\nJacobian:\n");
                report.push_str(&matrix_block(&jac.matrix));
                report.push_str(&eigen_block(&jac.eigenvalues, jac.classification.label()));
            }
            write(&out.join("qwm_eig.txt"), &report)?;
            Ok(0)
        }
        Command::Hopf { cfg, q, l_min, l_max, no_convection, no_inlet_loss } => {
            let (resolved, out) = load_config(&cfg)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let q_grid = parse_grid(&q)?;
            let options = QwmOptions {
                convection: !no_convection,
                inlet_loss: !no_inlet_loss,
                ..Default::default()
            };
            let qwm = QwmModel {
                fluid: &m.fluid,
                geom: &m.geom,
                aeff: &m.aeff,
                ambient: &m.ambient,
                pipe_length: 1.0,
                tank_volume: resolved.config.tank.volume,
                lambda: 0.0,
                mdot_in: 0.0,
                options,
            };
            let steady = SteadyModel::new(
                &m.fluid,
                &m.geom,
                &m.aeff,
                &m.ambient,
                qwm.steady_options(),
            );
            let cap = steady.capacity()?;
            let boundary = hopf_boundary(&qwm, cap, &q_grid, (l_min, l_max), 1e-4)?;
            write(&out.join("hopf.csv"), &csvio::hopf_csv(&boundary, &hash))?;
            Ok(0)
        }
        Command::Chart { cfg, q, l } => {
            let (resolved, out) = load_config(&cfg)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let q_grid = parse_grid(&q)?;
            let l_grid = parse_grid(&l)?;
            let ctx = SweepContext {
                fluid: &m.fluid,
                geom: &m.geom,
                aeff: &m.aeff,
                ambient: &m.ambient,
                params: resolved.sim_params()?,
                thresholds: resolved.config.run.thresholds,
            };
            let chart = stability_chart(&ctx, &q_grid, &l_grid)?;
            write(&out.join("chart.csv"), &csvio::chart_csv(&chart.cells, &hash))?;
            write(&out.join("hopf_overlay.csv"), &csvio::hopf_csv(&chart.overlay, &hash))?;
            Ok(0)
        }
        Command::SweepR { cfg, r, discard } => {
            let (resolved, out) = load_config(&cfg)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let r_grid = parse_grid(&r)?;
            let ctx = SweepContext {
                fluid: &m.fluid,
                geom: &m.geom,
                aeff: &m.aeff,
                ambient: &m.ambient,
                params: resolved.sim_params()?,
                thresholds: resolved.config.run.thresholds,
            };
            let sections = restitution_sweep(&ctx, &r_grid, discard)?;
            write(&out.join("poincare.csv"), &csvio::poincare_csv(&sections, &hash))?;
            Ok(0)
        }
        Command::Hysteresis(args) => {
            let (resolved, out) = load_config(&args)?;
            let hash = resolved.hash();
            let m = build_models(&resolved);
            let ctx = SweepContext {
                fluid: &m.fluid,
                geom: &m.geom,
                aeff: &m.aeff,
                ambient: &m.ambient,
                params: resolved.sim_params()?,
                thresholds: resolved.config.run.thresholds,
            };
            let (result, report) = hysteresis_scenario(&ctx)?;
            write(&out.join("resolved_config.json"), &serde_json::to_string_pretty(&resolved)?)?;
            write(&out.join("trajectory.csv"), &csvio::trajectory_csv(&result.trajectory, &hash))?;
            write(&out.join("events.csv"), &csvio::events_csv(&result.events, &hash))?;
            write(&out.join("summary.json"), &csvio::summary_json(&result.summary, &hash))?;
            write(&out.join("stages.json"), &csvio::stages_json(&report, &hash))?;
            Ok(0)
        }
        Command::Design { delta, eta, k, bd, samples, out } => {
            let design = BlowdownDesign::new(delta, eta, k, bd)?;
            let mut rows = Vec::with_capacity(samples);
            for i in 0..samples {
                let y = i as Float / (samples.max(2) - 1) as Float;
                rows.push((y, design.opening_force(y)?, design.closing_force(y)?));
            }
            std::fs::create_dir_all(&out)?;
            // No config file: hash the parameter tuple for the header stamp.
            let hash = format!("design-{delta}-{eta}-{k}-{bd}");
            write(&out.join("design.csv"), &csvio::design_csv(&rows, &hash))?;
            println!(
                "F_op(1) = {:.6e}, c1 = {:.6e}, dF_op/dy(0) = {:.6e}, energy = {:.6e}",
                design.opening_force_at_full_lift()?,
                design.small_lift_slope()?,
                design.opening_force_slope()?,
                design.opening_energy()?
            );
            Ok(0)
        }
    }
}

fn matrix_block(m: &nalgebra::Matrix5<Float>) -> String {
    let mut out = String::new();
    for i in 0..5 {
        let row: Vec<String> = (0..5).map(|j| format!("{:+.6e}", m[(i, j)])).collect();
        out.push_str(&format!("  [{}]\n", row.join(", ")));
    }
    out
}

fn eigen_block(eigs: &[nalgebra::Complex<Float>; 5], class: &str) -> String {
    let mut out = String::from("eigenvalues:\n");
    for e in eigs {
        out.push_str(&format!("  {:+.6e} {:+.6e}i\n", e.re, e.im));
    }
    out.push_str(&format!("classification: {class}\n"));
    out
}
