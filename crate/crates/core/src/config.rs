//! Run configuration: a single JSON document with fixed SI units per field.
//! Unknown keys are hard errors; every omitted field is resolved to its
//! default and echoed back so a run can be reproduced bit-exactly from its
//! own metadata.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::fluid::{Ambient, FluidKind, FluidModel, DEFAULT_LIQUID_BULK_MODULUS, DEFAULT_LIQUID_DENSITY};
use crate::geom::{
    DischargeCoefficient, EffectiveAreaModel, EffectiveAreaVariant, LiftTable, ValveGeometry,
};
use crate::pdm::{InflowSchedule, Scheme, SimParams};
use crate::Float;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfig {
    pub fluid: FluidBlock,
    #[serde(default)]
    pub ambient: AmbientBlock,
    #[serde(default)]
    pub valve: ValveBlock,
    #[serde(default)]
    pub effective_area: EffectiveAreaBlock,
    pub pipe: PipeBlock,
    #[serde(default)]
    pub tank: TankBlock,
    pub run: RunBlock,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluidBlock {
    pub kind: FluidKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<Float>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gas_constant: Option<Float>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub temperature: Option<Float>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub density: Option<Float>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bulk_modulus: Option<Float>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AmbientBlock {
    #[serde(default = "default_p_b")]
    pub p_b: Float,
    #[serde(default = "default_p_set")]
    pub p_set: Float,
}

fn default_p_b() -> Float {
    1.0e5
}
fn default_p_set() -> Float {
    5.0e5
}

impl Default for AmbientBlock {
    fn default() -> Self {
        Self { p_b: 1.0e5, p_set: 5.0e5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValveBlock {
    #[serde(default = "default_seat_diameter")]
    pub seat_diameter: Float,
    /// Discharge angle, rad. Exactly one of `phi`/`alpha` may be given;
    /// `alpha` is the half-cone angle with phi = pi - alpha.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phi: Option<Float>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Float>,
    #[serde(default = "default_cd")]
    pub cd: CdSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<Float>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_stop: Option<Float>,
    #[serde(default = "default_spring_k")]
    pub spring_k: Float,
    #[serde(default = "default_damping_c")]
    pub damping_c: Float,
    #[serde(default = "default_mass")]
    pub mass: Float,
    #[serde(default = "default_restitution")]
    pub e_seat: Float,
    #[serde(default = "default_restitution")]
    pub e_stop: Float,
    /// Spring pre-compression, m; defaults to the gauge balance
    /// (p_set - p_b) A_0 / k.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_pre: Option<Float>,
}

fn default_seat_diameter() -> Float {
    0.03205
}
fn default_cd() -> CdSpec {
    CdSpec::Constant(0.93)
}
fn default_spring_k() -> Float {
    5000.0
}
fn default_damping_c() -> Float {
    20.0
}
fn default_mass() -> Float {
    0.45
}
fn default_restitution() -> Float {
    0.2
}

impl Default for ValveBlock {
    fn default() -> Self {
        Self {
            seat_diameter: 0.03205,
            phi: None,
            alpha: None,
            cd: CdSpec::Constant(0.93),
            x_max: None,
            x_stop: None,
            spring_k: 5000.0,
            damping_c: 20.0,
            mass: 0.45,
            e_seat: 0.2,
            e_stop: 0.2,
            x_pre: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CdSpec {
    Constant(Float),
    /// Inline table of (x/x_max, Cd) pairs.
    Table { table: Vec<(Float, Float)> },
    /// Two-column CSV of (lift_fraction, Cd).
    Csv { csv: String },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "kebab-case", deny_unknown_fields)]
pub enum EffectiveAreaBlock {
    /// A_hat = 1.
    #[default]
    Constant,
    /// Quartic from the discharge angle, Cd and the fluid's choking factor.
    Analytic,
    /// User polynomial 1 + a1 y + a2 y^2 + a3 y^3 + a4 y^4.
    Polynomial { a1: Float, a2: Float, a3: Float, a4: Float },
    /// Tabulated A_hat against relative lift x/x_max.
    Table {
        #[serde(skip_serializing_if = "Option::is_none")]
        points: Option<Vec<(Float, Float)>>,
        #[serde(skip_serializing_if = "Option::is_none")]
        csv: Option<String>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipeBlock {
    pub length: Float,
    #[serde(default = "default_n_nodes")]
    pub n_nodes: usize,
    #[serde(default)]
    pub lambda: Float,
    /// Scheme override; default follows the fluid kind.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scheme: Option<SchemeName>,
}

fn default_n_nodes() -> usize {
    101
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeName {
    Moc,
    LaxWendroff,
}

impl From<SchemeName> for Scheme {
    fn from(s: SchemeName) -> Scheme {
        match s {
            SchemeName::Moc => Scheme::Moc,
            SchemeName::LaxWendroff => Scheme::LaxWendroff,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TankBlock {
    #[serde(default = "default_tank_volume")]
    pub volume: Float,
    #[serde(default)]
    pub inflow: InflowBlock,
}

fn default_tank_volume() -> Float {
    1.0
}

impl Default for TankBlock {
    fn default() -> Self {
        Self { volume: 1.0, inflow: InflowBlock::default() }
    }
}

/// Prescribed inflow; rates are given either absolutely (`mdot`, kg/s) or as
/// a fraction `q` of the valve capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InflowBlock {
    Constant {
        #[serde(skip_serializing_if = "Option::is_none")]
        mdot: Option<Float>,
        #[serde(skip_serializing_if = "Option::is_none")]
        q: Option<Float>,
    },
    RampHold {
        t_ramp: Float,
        #[serde(skip_serializing_if = "Option::is_none")]
        mdot_peak: Option<Float>,
        #[serde(skip_serializing_if = "Option::is_none")]
        q_peak: Option<Float>,
    },
    RampUpDown {
        t_up: Float,
        t_hold: Float,
        t_down: Float,
        #[serde(skip_serializing_if = "Option::is_none")]
        mdot_peak: Option<Float>,
        #[serde(skip_serializing_if = "Option::is_none")]
        q_peak: Option<Float>,
    },
}

impl Default for InflowBlock {
    fn default() -> Self {
        InflowBlock::Constant { mdot: None, q: Some(0.5) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBlock {
    pub horizon: Float,
    #[serde(default = "default_sample_dt")]
    pub sample_dt: Float,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_tank_pressure: Option<Float>,
    #[serde(default = "default_ode_rel_tol")]
    pub ode_rel_tol: Float,
    #[serde(default = "default_event_tol")]
    pub event_tol: Float,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stick_velocity: Option<Float>,
    #[serde(default = "default_cfl_max")]
    pub cfl_max: Float,
    #[serde(default)]
    pub record_section: bool,
    #[serde(default)]
    pub thresholds: ClassifyThresholds,
}

fn default_sample_dt() -> Float {
    2e-4
}
fn default_ode_rel_tol() -> Float {
    1e-8
}
fn default_event_tol() -> Float {
    1e-10
}
fn default_cfl_max() -> Float {
    0.9
}

/// Stability-classification thresholds (the reference classifies visually;
/// these defaults are recorded in every output).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClassifyThresholds {
    /// Opening stable iff the lift envelope decays by this factor ...
    pub decay_factor: Float,
    /// ... within this many seconds after the first peak ...
    pub decay_window: Float,
    /// ... with no impacts after this settle window past the first peak.
    pub settle_window: Float,
    /// Closing unstable iff more than this many impacts ...
    pub chatter_impacts: usize,
    /// ... fall inside any window of this many seconds during closure.
    pub chatter_window: Float,
    /// Amplitude floor as a fraction of x_stop below which motion counts as
    /// settled.
    pub amp_epsilon: Float,
}

impl Default for ClassifyThresholds {
    fn default() -> Self {
        Self {
            decay_factor: 10.0,
            decay_window: 0.5,
            settle_window: 0.2,
            chatter_impacts: 20,
            chatter_window: 0.1,
            amp_epsilon: 0.01,
        }
    }
}

/// Fully resolved configuration: every optional field populated, derived
/// quantities computed, ready to build model objects. Serializing this back
/// out is the reproducibility contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub config: SimConfig,
    /// Derived quantities echoed for the record.
    pub derived: DerivedValues,
    /// Non-fatal validation notices (ignored cross-kind fields etc).
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DerivedValues {
    pub rho: Float,
    pub sonic_speed: Float,
    pub choking_factor: Float,
    pub seat_area: Float,
    pub x_pre: Float,
    pub phi: Float,
    pub mdot_capacity: Float,
    pub scheme: String,
    pub stick_velocity: Float,
}

impl SimConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::field("<config>", e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Resolve defaults, validate invariants and compute derived values.
    /// `base` anchors relative CSV paths.
    pub fn resolve(&self, base: Option<&Path>) -> Result<ResolvedConfig> {
        let mut cfg = self.clone();
        let mut warnings = Vec::new();

        // --- fluid ---
        match cfg.fluid.kind {
            FluidKind::Gas => {
                if cfg.fluid.bulk_modulus.is_some() {
                    warnings.push("fluid.bulk_modulus is ignored for gas service".into());
                    cfg.fluid.bulk_modulus = None;
                }
                if cfg.fluid.density.is_some() {
                    warnings.push(
                        "fluid.density is ignored for gas service (anchored at p_set/(R T))".into(),
                    );
                    cfg.fluid.density = None;
                }
                cfg.fluid.kappa.get_or_insert(1.4);
                cfg.fluid.gas_constant.get_or_insert(288.0);
                cfg.fluid.temperature.get_or_insert(293.0);
            }
            FluidKind::Liquid => {
                for (name, field) in [
                    ("kappa", &mut cfg.fluid.kappa),
                    ("gas_constant", &mut cfg.fluid.gas_constant),
                    ("temperature", &mut cfg.fluid.temperature),
                ] {
                    if field.is_some() {
                        warnings.push(format!("fluid.{name} is ignored for liquid service"));
                        *field = None;
                    }
                }
                cfg.fluid.density.get_or_insert(DEFAULT_LIQUID_DENSITY);
                cfg.fluid.bulk_modulus.get_or_insert(DEFAULT_LIQUID_BULK_MODULUS);
            }
        }

        // --- ambient ---
        if !(cfg.ambient.p_b > 0.0) {
            return Err(Error::field("ambient.p_b", "must be positive"));
        }
        if !(cfg.ambient.p_set > cfg.ambient.p_b) {
            return Err(Error::field("ambient.p_set", "must exceed ambient.p_b"));
        }

        // --- valve ---
        let v = &mut cfg.valve;
        if !(v.seat_diameter > 0.0) {
            return Err(Error::field("valve.seat_diameter", "must be positive"));
        }
        let phi = match (v.phi, v.alpha) {
            (Some(_), Some(_)) => {
                return Err(Error::field("valve.alpha", "give either phi or alpha, not both"))
            }
            (Some(p), None) => p,
            (None, Some(a)) => std::f64::consts::PI - a,
            (None, None) => std::f64::consts::FRAC_PI_2,
        };
        v.phi = Some(phi);
        if !(phi > 0.0 && phi < std::f64::consts::PI) {
            return Err(Error::field("valve.phi", "discharge angle must lie in (0, pi)"));
        }
        let x_max = *v.x_max.get_or_insert(v.seat_diameter / 4.0);
        let x_stop = *v.x_stop.get_or_insert(x_max);
        if !(x_stop > 0.0 && x_stop <= x_max) {
            return Err(Error::field("valve.x_stop", "require 0 < x_stop <= x_max"));
        }
        for (name, val) in [("e_seat", v.e_seat), ("e_stop", v.e_stop)] {
            if !(0.0..=1.0).contains(&val) {
                return Err(Error::field(format!("valve.{name}"), "restitution must lie in [0, 1]"));
            }
        }
        if !(v.spring_k > 0.0 && v.mass > 0.0) {
            return Err(Error::field("valve.spring_k", "spring rate and mass must be positive"));
        }
        if v.damping_c < 0.0 {
            return Err(Error::field("valve.damping_c", "damping must be non-negative"));
        }
        let a0 = std::f64::consts::PI * v.seat_diameter * v.seat_diameter / 4.0;
        let x_pre =
            *v.x_pre.get_or_insert((cfg.ambient.p_set - cfg.ambient.p_b) * a0 / v.spring_k);
        if x_pre < 0.0 {
            return Err(Error::field("valve.x_pre", "pre-compression must be non-negative"));
        }

        // --- pipe ---
        if cfg.pipe.n_nodes < 8 {
            return Err(Error::field("pipe.n_nodes", "need at least 8 nodes"));
        }
        if !(cfg.pipe.length > 0.0) {
            return Err(Error::field("pipe.length", "must be positive"));
        }
        if cfg.pipe.lambda < 0.0 {
            return Err(Error::field("pipe.lambda", "must be non-negative"));
        }

        // --- tank / run ---
        if !(cfg.tank.volume > 0.0) {
            return Err(Error::field("tank.volume", "must be positive"));
        }
        if !(cfg.run.horizon > 0.0) {
            return Err(Error::field("run.horizon", "must be positive"));
        }
        if !(cfg.run.sample_dt > 0.0) {
            return Err(Error::field("run.sample_dt", "must be positive"));
        }
        if !(cfg.run.cfl_max > 0.0 && cfg.run.cfl_max <= 1.0) {
            return Err(Error::field("run.cfl_max", "must lie in (0, 1]"));
        }

        // Build model objects once to validate them as a whole.
        let fluid = build_fluid(&cfg)?;
        let geom = build_geometry(&cfg, base)?;
        geom.validate()?;
        let c_kappa = fluid.choking_factor()?;
        let aeff = build_effective_area(&cfg, &geom, c_kappa, base)?;
        let ambient = Ambient::new(cfg.ambient.p_b, cfg.ambient.p_set)?;

        let steady = crate::equilibrium::SteadyModel::new(
            &fluid,
            &geom,
            &aeff,
            &ambient,
            crate::equilibrium::SteadyOptions { inlet_loss: true, gas_exact: true },
        );
        let mdot_cap = steady.capacity()?;

        let scheme: Scheme =
            cfg.pipe.scheme.map(Into::into).unwrap_or_else(|| Scheme::default_for(cfg.fluid.kind));
        cfg.pipe.scheme = Some(match scheme {
            Scheme::Moc => SchemeName::Moc,
            Scheme::LaxWendroff => SchemeName::LaxWendroff,
        });
        cfg.run
            .initial_tank_pressure
            .get_or_insert(0.98 * cfg.ambient.p_set);
        let a = fluid.sonic_speed();
        let stick = *cfg.run.stick_velocity.get_or_insert(
            (1e-4 * a * x_stop / cfg.pipe.length).max(1e-4),
        );

        let derived = DerivedValues {
            rho: fluid.rho,
            sonic_speed: a,
            choking_factor: c_kappa,
            seat_area: a0,
            x_pre,
            phi,
            mdot_capacity: mdot_cap,
            scheme: scheme.label().to_string(),
            stick_velocity: stick,
        };
        Ok(ResolvedConfig { config: cfg, derived, warnings })
    }
}

fn load_two_column_csv(path: &Path) -> Result<Vec<(Float, Float)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split(',');
        let parse = |s: Option<&str>| -> Result<Float> {
            s.map(str::trim)
                .filter(|s| !s.is_empty())
                .ok_or_else(|| Error::Io(format!("{}:{}: need two columns", path.display(), lineno + 1)))?
                .parse::<Float>()
                .map_err(|e| Error::Io(format!("{}:{}: {e}", path.display(), lineno + 1)))
        };
        let x = parse(parts.next())?;
        let y = parse(parts.next())?;
        out.push((x, y));
    }
    Ok(out)
}

fn resolve_path(base: Option<&Path>, rel: &str) -> std::path::PathBuf {
    match base {
        Some(b) => b.join(rel),
        None => std::path::PathBuf::from(rel),
    }
}

pub fn build_fluid(cfg: &SimConfig) -> Result<FluidModel<Float>> {
    match cfg.fluid.kind {
        FluidKind::Gas => FluidModel::gas(
            cfg.fluid.kappa.unwrap_or(1.4),
            cfg.fluid.gas_constant.unwrap_or(288.0),
            cfg.fluid.temperature.unwrap_or(293.0),
            cfg.ambient.p_set,
        ),
        FluidKind::Liquid => FluidModel::liquid(
            cfg.fluid.density.unwrap_or(DEFAULT_LIQUID_DENSITY),
            cfg.fluid.bulk_modulus.unwrap_or(DEFAULT_LIQUID_BULK_MODULUS),
        ),
    }
}

pub fn build_geometry(cfg: &SimConfig, base: Option<&Path>) -> Result<ValveGeometry<Float>> {
    let v = &cfg.valve;
    let phi = v.phi.unwrap_or(std::f64::consts::FRAC_PI_2);
    let x_max = v.x_max.unwrap_or(v.seat_diameter / 4.0);
    let a0 = std::f64::consts::PI * v.seat_diameter * v.seat_diameter / 4.0;
    let cd = match &v.cd {
        CdSpec::Constant(c) => DischargeCoefficient::Constant(*c),
        CdSpec::Table { table } => DischargeCoefficient::Table(LiftTable::new(table.clone())?),
        CdSpec::Csv { csv } => {
            DischargeCoefficient::Table(LiftTable::new(load_two_column_csv(&resolve_path(base, csv))?)?)
        }
    };
    Ok(ValveGeometry {
        seat_diameter: v.seat_diameter,
        phi,
        cd,
        x_max,
        x_stop: v.x_stop.unwrap_or(x_max),
        spring_k: v.spring_k,
        damping_c: v.damping_c,
        mass: v.mass,
        e_seat: v.e_seat,
        e_stop: v.e_stop,
        x_pre: v
            .x_pre
            .unwrap_or((cfg.ambient.p_set - cfg.ambient.p_b) * a0 / v.spring_k),
    })
}

pub fn build_effective_area(
    cfg: &SimConfig,
    geom: &ValveGeometry<Float>,
    c_kappa: Float,
    base: Option<&Path>,
) -> Result<EffectiveAreaModel<Float>> {
    let variant = match &cfg.effective_area {
        EffectiveAreaBlock::Constant => EffectiveAreaVariant::Constant,
        EffectiveAreaBlock::Analytic => EffectiveAreaVariant::AnalyticQuartic,
        EffectiveAreaBlock::Polynomial { a1, a2, a3, a4 } => {
            EffectiveAreaVariant::Polynomial([*a1, *a2, *a3, *a4])
        }
        EffectiveAreaBlock::Table { points, csv } => {
            let pts = match (points, csv) {
                (Some(p), None) => p.clone(),
                (None, Some(path)) => load_two_column_csv(&resolve_path(base, path))?,
                _ => {
                    return Err(Error::field(
                        "effective_area",
                        "table variant needs exactly one of points/csv",
                    ))
                }
            };
            EffectiveAreaVariant::Tabulated(LiftTable::new(pts)?)
        }
    };
    EffectiveAreaModel::new(variant, geom, c_kappa)
}

impl ResolvedConfig {
    pub fn fluid(&self) -> FluidModel<Float> {
        build_fluid(&self.config).expect("resolved config builds")
    }

    pub fn geometry(&self) -> ValveGeometry<Float> {
        build_geometry(&self.config, None).expect("resolved config builds")
    }

    pub fn effective_area(&self, geom: &ValveGeometry<Float>) -> EffectiveAreaModel<Float> {
        build_effective_area(&self.config, geom, self.derived.choking_factor, None)
            .expect("resolved config builds")
    }

    pub fn ambient(&self) -> Ambient<Float> {
        Ambient::new(self.config.ambient.p_b, self.config.ambient.p_set).expect("validated")
    }

    /// Inflow schedule with q-fractions converted through the capacity.
    pub fn inflow(&self) -> Result<InflowSchedule<Float>> {
        let cap = self.derived.mdot_capacity;
        let rate = |mdot: &Option<Float>, q: &Option<Float>, field: &str| -> Result<Float> {
            match (mdot, q) {
                (Some(m), None) => Ok(*m),
                (None, Some(q)) => Ok(q * cap),
                _ => Err(Error::field(field, "give exactly one of mdot/q")),
            }
        };
        Ok(match &self.config.tank.inflow {
            InflowBlock::Constant { mdot, q } => {
                InflowSchedule::Constant { mdot: rate(mdot, q, "tank.inflow")? }
            }
            InflowBlock::RampHold { t_ramp, mdot_peak, q_peak } => InflowSchedule::RampHold {
                t_ramp: *t_ramp,
                mdot_peak: rate(mdot_peak, q_peak, "tank.inflow")?,
            },
            InflowBlock::RampUpDown { t_up, t_hold, t_down, mdot_peak, q_peak } => {
                InflowSchedule::RampUpDown {
                    t_up: *t_up,
                    t_hold: *t_hold,
                    t_down: *t_down,
                    mdot_peak: rate(mdot_peak, q_peak, "tank.inflow")?,
                }
            }
        })
    }

    pub fn sim_params(&self) -> Result<SimParams<Float>> {
        let c = &self.config;
        Ok(SimParams {
            tank_volume: c.tank.volume,
            inflow: self.inflow()?,
            pipe_length: c.pipe.length,
            n_nodes: c.pipe.n_nodes,
            lambda: c.pipe.lambda,
            scheme: c.pipe.scheme.map(Into::into).unwrap_or(Scheme::LaxWendroff),
            horizon: c.run.horizon,
            sample_dt: c.run.sample_dt,
            initial_tank_pressure: c.run.initial_tank_pressure.unwrap_or(0.98 * c.ambient.p_set),
            ode_rel_tol: c.run.ode_rel_tol,
            event_tol: c.run.event_tol,
            stick_velocity: Some(self.derived.stick_velocity),
            cfl_max: c.run.cfl_max,
            record_section: c.run.record_section,
            max_impacts: 2_000_000,
            inlet_loss: true,
        })
    }

    /// SHA-256 of the canonical serialized form; stamped into every output.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("resolved config serializes");
        let mut hasher = Sha256::new();
        hasher.update(text.as_bytes());
        let digest = hasher.finalize();
        let mut out = String::with_capacity(16);
        for byte in digest.iter().take(8) {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}

/// Apply a dotted-path override like `pipe.length=2.5` onto raw JSON.
pub fn apply_override(doc: &mut serde_json::Value, spec: &str) -> Result<()> {
    let (path, raw) = spec
        .split_once('=')
        .ok_or_else(|| Error::field(spec.to_string(), "override must be key.path=value"))?;
    let value: serde_json::Value = match serde_json::from_str(raw) {
        Ok(v) => v,
        Err(_) => serde_json::Value::String(raw.to_string()),
    };
    let mut cursor = doc;
    let parts: Vec<&str> = path.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        if i + 1 == parts.len() {
            match cursor {
                serde_json::Value::Object(map) => {
                    map.insert(part.to_string(), value);
                    return Ok(());
                }
                _ => return Err(Error::field(path.to_string(), "path does not address an object")),
            }
        }
        cursor = match cursor {
            serde_json::Value::Object(map) => map
                .entry(part.to_string())
                .or_insert_with(|| serde_json::Value::Object(Default::default())),
            _ => return Err(Error::field(path.to_string(), "path does not address an object")),
        };
    }
    Ok(())
}
