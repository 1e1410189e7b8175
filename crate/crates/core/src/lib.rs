//! Simulation and stability analysis of direct spring-operated
//! pressure-relief valves coupled to an inlet pipe and reservoir.
//!
//! The crate provides:
//! * the full valve-and-pipeline dynamics model (PDM) with impact events,
//!   chattering coalescence and sustained-contact handling ([`pdm`]),
//! * steady-flow equilibrium characteristics, effective stiffness, folds and
//!   blowdown ([`equilibrium`]),
//! * the five-ODE quarter-wave reduced model, its Jacobian/eigenvalue
//!   analysis, Hopf-boundary tracing and the sliding (pseudo-equilibrium)
//!   stability test ([`qwm`]),
//! * closed-form opening/closing transient design formulas ([`design`]),
//! * batch sweeps: stability charts, restitution sweeps with a Poincare
//!   section and the hysteresis-loop scenario ([`sweeps`]).
//!
//! All numerics are generic over the scalar type via [`scalar::Scalar`];
//! the plumbing layers (config, sweeps, CSV) fix [`Float`] = `f64`.

pub mod config;
pub mod csvio;
pub mod design;
pub mod equilibrium;
pub mod error;
pub mod fluid;
pub mod geom;
pub mod pdm;
pub mod qwm;
pub mod scalar;
pub mod sweeps;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Scalar used by the production plumbing (config, sweeps, CSV output).
pub type Float = f64;

/// Concrete aliases for the main model types at the default precision.
pub type FluidModel64 = fluid::FluidModel<Float>;
pub type Ambient64 = fluid::Ambient<Float>;
pub type ValveGeometry64 = geom::ValveGeometry<Float>;
pub type EffectiveAreaModel64 = geom::EffectiveAreaModel<Float>;
pub type SystemState64 = pdm::SystemState<Float>;
pub type QwmState64 = qwm::QwmState<Float>;
pub type EquilibriumPoint64 = equilibrium::EquilibriumPoint<Float>;
