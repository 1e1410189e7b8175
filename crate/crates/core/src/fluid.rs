//! Fluid models and the thermodynamic closure relations shared by the
//! pipe, tank and valve dynamics.
//!
//! Two service kinds are supported: an ideal gas characterised by
//! `(kappa, R, T)` and a (nearly incompressible) liquid characterised by
//! `(rho, E)`. The gas reference density is anchored at set pressure,
//! `rho = p_set / (R T)`, consistent with the near-constant-density pipe
//! equations; `cp` is always derived as `kappa R / (kappa - 1)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which service the valve runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FluidKind {
    Gas,
    Liquid,
}

/// Ambient and set-point pressures (absolute, Pa).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ambient<T> {
    /// Back-pressure the valve discharges into.
    pub p_b: T,
    /// Set pressure: tank pressure at which the closed valve first opens.
    pub p_set: T,
}

impl<T: Scalar> Ambient<T> {
    pub fn new(p_b: T, p_set: T) -> Result<Self> {
        if !(p_b > T::zero()) {
            return Err(Error::domain("Ambient", "p_b must be positive"));
        }
        if !(p_set > p_b) {
            return Err(Error::domain("Ambient", "p_set must exceed p_b"));
        }
        Ok(Self { p_b, p_set })
    }
}

/// Thermodynamic description of the serviced fluid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluidModel<T> {
    pub kind: FluidKind,
    /// Ratio of specific heats (gas).
    pub kappa: T,
    /// Specific gas constant, J/(kg K) (gas).
    pub gas_constant: T,
    /// Temperature, K (gas; assumed constant).
    pub temperature: T,
    /// Reference density, kg/m^3. For gas this is p_set/(R T).
    pub rho: T,
    /// Bulk modulus, Pa (liquid).
    pub bulk_modulus: T,
}

/// Water-like liquid defaults used when the config omits them.
pub const DEFAULT_LIQUID_DENSITY: f64 = 1000.0;
pub const DEFAULT_LIQUID_BULK_MODULUS: f64 = 2.1e9;

impl<T: Scalar> FluidModel<T> {
    /// Ideal-gas model; the reference density is anchored at `p_set`.
    pub fn gas(kappa: T, gas_constant: T, temperature: T, p_set: T) -> Result<Self> {
        if !(kappa > T::one()) {
            return Err(Error::domain("FluidModel", "gas requires kappa > 1"));
        }
        if !(gas_constant > T::zero() && temperature > T::zero()) {
            return Err(Error::domain("FluidModel", "gas requires R > 0 and T > 0"));
        }
        if !(p_set > T::zero()) {
            return Err(Error::domain("FluidModel", "reference pressure must be positive"));
        }
        Ok(Self {
            kind: FluidKind::Gas,
            kappa,
            gas_constant,
            temperature,
            rho: p_set / (gas_constant * temperature),
            bulk_modulus: T::zero(),
        })
    }

    /// Liquid model from density and bulk modulus.
    pub fn liquid(rho: T, bulk_modulus: T) -> Result<Self> {
        if !(rho > T::zero()) {
            return Err(Error::domain("FluidModel", "liquid requires rho > 0"));
        }
        if !(bulk_modulus > T::zero()) {
            return Err(Error::domain("FluidModel", "liquid requires E > 0"));
        }
        Ok(Self {
            kind: FluidKind::Liquid,
            kappa: T::zero(),
            gas_constant: T::zero(),
            temperature: T::zero(),
            rho,
            bulk_modulus,
        })
    }

    /// Derived specific heat at constant pressure, cp = kappa R / (kappa - 1).
    pub fn cp(&self) -> T {
        debug_assert_eq!(self.kind, FluidKind::Gas);
        self.kappa * self.gas_constant / (self.kappa - T::one())
    }

    /// Sonic speed: sqrt(kappa R T) for gas, sqrt(E/rho) for liquid.
    pub fn sonic_speed(&self) -> T {
        match self.kind {
            FluidKind::Gas => (self.kappa * self.gas_constant * self.temperature).sqrt(),
            FluidKind::Liquid => (self.bulk_modulus / self.rho).sqrt(),
        }
    }

    /// Choking factor C_kappa: sqrt(2) for liquid, the choked-nozzle factor
    /// sqrt(kappa (2/(1+kappa))^((kappa+1)/(kappa-1))) for gas.
    pub fn choking_factor(&self) -> Result<T> {
        match self.kind {
            FluidKind::Liquid => Ok(T::lit(2.0).sqrt()),
            FluidKind::Gas => {
                let one = T::one();
                if self.kappa - one < T::lit(1e-9) {
                    return Err(Error::domain(
                        "choking_factor",
                        "kappa too close to 1: exponent (kappa+1)/(kappa-1) is singular",
                    ));
                }
                let base = T::lit(2.0) / (one + self.kappa);
                let expo = (self.kappa + one) / (self.kappa - one);
                Ok((self.kappa * base.powf(expo)).sqrt())
            }
        }
    }

    /// Pipe inlet pressure-loss fraction chi, defined by p(0,t) = p_r (1 - chi).
    ///
    /// Liquid (Bernoulli): chi = rho v0^2 / (2 p_r).
    /// Gas (isentropic):   chi = 1 - [1 - v0^2/(2 cp T)]^(kappa/(kappa-1)).
    pub fn inlet_loss_chi(&self, p_r: T, v0: T) -> Result<T> {
        if !(p_r > T::zero()) {
            return Err(Error::domain("inlet_loss_chi", "p_r must be positive"));
        }
        match self.kind {
            FluidKind::Liquid => Ok(self.rho * v0 * v0 / (T::lit(2.0) * p_r)),
            FluidKind::Gas => {
                let two_cp_t = T::lit(2.0) * self.cp() * self.temperature;
                let ratio = v0 * v0 / two_cp_t;
                if ratio >= T::one() {
                    return Err(Error::StagnationViolation {
                        v0: v0.as_f64(),
                        v_max: two_cp_t.sqrt().as_f64(),
                    });
                }
                let expo = self.kappa / (self.kappa - T::one());
                Ok(T::one() - (T::one() - ratio).powf(expo))
            }
        }
    }

    /// d(chi)/d(v0) at fixed p_r; used by the quarter-wave assembly.
    pub fn inlet_loss_chi_dv(&self, p_r: T, v0: T) -> Result<T> {
        match self.kind {
            FluidKind::Liquid => Ok(self.rho * v0 / p_r),
            FluidKind::Gas => {
                let two_cp_t = T::lit(2.0) * self.cp() * self.temperature;
                let ratio = v0 * v0 / two_cp_t;
                if ratio >= T::one() {
                    return Err(Error::StagnationViolation {
                        v0: v0.as_f64(),
                        v_max: two_cp_t.sqrt().as_f64(),
                    });
                }
                let expo = self.kappa / (self.kappa - T::one());
                let inner = T::one() - ratio;
                Ok(expo * inner.powf(expo - T::one()) * (T::lit(2.0) * v0 / two_cp_t))
            }
        }
    }

    /// d(chi)/d(p_r) at fixed v0. Zero for gas; -rho v0^2/(2 p_r^2) for liquid.
    pub fn inlet_loss_chi_dpr(&self, p_r: T, v0: T) -> T {
        match self.kind {
            FluidKind::Gas => T::zero(),
            FluidKind::Liquid => -self.rho * v0 * v0 / (T::lit(2.0) * p_r * p_r),
        }
    }
}
