//! Thermal diffusion coefficients and derived scales in CGS units, plus
//! conversion to the solver's internal units (`ħ = a = b = 1`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::ModelParams;

/// Boltzmann constant, erg/K.
pub const BOLTZMANN: f64 = 1.380649e-16;
/// Reduced Planck constant, erg·s.
pub const HBAR: f64 = 1.054571817e-27;
/// Speed of light, cm/s.
pub const SPEED_OF_LIGHT: f64 = 2.99792458e10;
/// Electron mass, g.
pub const ELECTRON_MASS: f64 = 9.1093837015e-28;
/// Ratio `a/b` (s/g) estimated from the Lamb shift of hydrogen.
pub const LAMB_A_OVER_B: f64 = 3.41e4;

fn positive(v: f64, what: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("{what} must be positive and finite, got {v}")))
    }
}

/// Temperature, friction and mass of a particle in a thermal medium.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalEnvironment {
    /// K.
    pub temperature: f64,
    /// Friction per unit mass, 1/s.
    pub gamma: f64,
    /// g.
    pub mass: f64,
    #[serde(default = "default_k")]
    pub k: f64,
    #[serde(default = "default_hbar")]
    pub hbar: f64,
    #[serde(default = "default_c")]
    pub c: f64,
}

fn default_k() -> f64 {
    BOLTZMANN
}
fn default_hbar() -> f64 {
    HBAR
}
fn default_c() -> f64 {
    SPEED_OF_LIGHT
}

impl PhysicalEnvironment {
    /// Environment with CODATA constants.
    pub fn new(temperature: f64, gamma: f64, mass: f64) -> Result<Self> {
        let env = Self {
            temperature,
            gamma,
            mass,
            k: BOLTZMANN,
            hbar: HBAR,
            c: SPEED_OF_LIGHT,
        };
        env.validate()?;
        Ok(env)
    }

    /// An electron whose friction reproduces the Lamb-shift ratio `a/b`.
    pub fn lamb_electron(temperature: f64) -> Result<Self> {
        Self::new(temperature, friction_from_ratio(LAMB_A_OVER_B, ELECTRON_MASS)?, ELECTRON_MASS)
    }

    pub fn validate(&self) -> Result<()> {
        positive(self.temperature, "temperature")?;
        positive(self.gamma, "gamma")?;
        positive(self.mass, "mass")?;
        positive(self.k, "k")?;
        positive(self.hbar, "hbar")?;
        positive(self.c, "c")
    }
}

/// `a = √(kT/(mγ))`, `b = √(γkTm)`.
pub fn coefficients_from_temperature(env: &PhysicalEnvironment) -> Result<(f64, f64)> {
    env.validate()?;
    let kt = env.k * env.temperature;
    Ok(((kt / (env.mass * env.gamma)).sqrt(), (env.gamma * kt * env.mass).sqrt()))
}

/// Friction `γ = 1/((a/b)·m)` that yields the ratio `a/b` for mass `m`.
pub fn friction_from_ratio(a_over_b: f64, mass: f64) -> Result<f64> {
    positive(a_over_b, "a/b")?;
    positive(mass, "mass")?;
    Ok(1.0 / (a_over_b * mass))
}

/// `ħ/(kT)` in seconds.
pub fn relaxation_time(temperature: f64) -> Result<f64> {
    positive(temperature, "temperature")?;
    Ok(HBAR / (BOLTZMANN * temperature))
}

/// Standard deviation `√(aħ/(2b))` of the smoothing kernel, in cm.
pub fn smoothing_length(a_over_b: f64, hbar: f64) -> Result<f64> {
    positive(a_over_b, "a/b")?;
    positive(hbar, "hbar")?;
    Ok((a_over_b * hbar / 2.0).sqrt())
}

/// Reduced Compton length `ħ/(mc)`, in cm.
pub fn compton_length(mass: f64, hbar: f64, c: f64) -> Result<f64> {
    positive(mass, "mass")?;
    positive(hbar, "hbar")?;
    positive(c, "c")?;
    Ok(hbar / (mass * c))
}

/// Time, length and mass units in which `ħ = a = b = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InternalUnits {
    /// `ħ/(ab)`, s.
    pub time: f64,
    /// `√(aħ/b)`, cm.
    pub length: f64,
    /// `ħ/a²`, g.
    pub mass: f64,
}

impl InternalUnits {
    pub fn new(a: f64, b: f64, hbar: f64) -> Result<Self> {
        positive(a, "a")?;
        positive(b, "b")?;
        positive(hbar, "hbar")?;
        Ok(Self {
            time: hbar / (a * b),
            length: (a * hbar / b).sqrt(),
            mass: hbar / (a * a),
        })
    }

    pub fn from_environment(env: &PhysicalEnvironment) -> Result<Self> {
        let (a, b) = coefficients_from_temperature(env)?;
        Self::new(a, b, env.hbar)
    }

    pub fn momentum(&self) -> f64 {
        self.mass * self.length / self.time
    }

    pub fn energy(&self) -> f64 {
        self.mass * self.length * self.length / (self.time * self.time)
    }

    /// Solver parameters for a particle of mass `mass` (g).
    pub fn model_params(&self, mass: f64) -> Result<ModelParams> {
        ModelParams::new(1.0, mass / self.mass, 1.0, 1.0, 1)
    }

    /// Convert CGS coefficients `(a, b, ħ)` to internal units.
    pub fn coefficients_to_internal(&self, a: f64, b: f64, hbar: f64) -> (f64, f64, f64) {
        let a2 = self.length * self.length / self.time;
        let b2 = self.momentum() * self.momentum() / self.time;
        (a / a2.sqrt(), b / b2.sqrt(), hbar / (self.energy() * self.time))
    }
}

/// All derived quantities for one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhysicalReport {
    pub environment: PhysicalEnvironment,
    pub a: f64,
    pub b: f64,
    pub ab: f64,
    pub kt: f64,
    pub a_over_b: f64,
    pub relaxation_time: f64,
    pub smoothing_length: f64,
    pub compton_length: f64,
    pub units: InternalUnits,
    pub internal_mass: f64,
}

pub fn physical_report(env: &PhysicalEnvironment) -> Result<PhysicalReport> {
    let (a, b) = coefficients_from_temperature(env)?;
    let units = InternalUnits::new(a, b, env.hbar)?;
    Ok(PhysicalReport {
        environment: *env,
        a,
        b,
        ab: a * b,
        kt: env.k * env.temperature,
        a_over_b: a / b,
        relaxation_time: env.hbar / (a * b),
        smoothing_length: smoothing_length(a / b, env.hbar)?,
        compton_length: compton_length(env.mass, env.hbar, env.c)?,
        internal_mass: env.mass / units.mass,
        units,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn unit_environment() {
        let env = PhysicalEnvironment {
            temperature: 1.0,
            gamma: 1.0,
            mass: 1.0,
            k: 1.0,
            hbar: 1.0,
            c: 1.0,
        };
        assert_eq!(coefficients_from_temperature(&env).unwrap(), (1.0, 1.0));
    }

    #[test]
    fn relaxation_time_values() {
        assert!(rel(relaxation_time(1.0).unwrap(), 7.638e-12) < 1e-3);
        assert!(rel(relaxation_time(300.0).unwrap(), 7.638e-12 / 300.0) < 1e-3);
        assert_eq!(relaxation_time(2.0).unwrap(), relaxation_time(1.0).unwrap() / 2.0);
        assert!(relaxation_time(0.0).is_err());
    }

    #[test]
    fn lengths() {
        assert!(rel(smoothing_length(LAMB_A_OVER_B, HBAR).unwrap(), 4.24e-12) < 1e-2);
        assert!(rel(compton_length(ELECTRON_MASS, HBAR, SPEED_OF_LIGHT).unwrap(), 3.86e-11) < 1e-2);
        let l = smoothing_length(2.5, 1.3).unwrap();
        assert!(rel(smoothing_length(10.0, 1.3).unwrap(), 2.0 * l) < 1e-15);
    }

    #[test]
    fn lamb_friction() {
        let g = friction_from_ratio(LAMB_A_OVER_B, ELECTRON_MASS).unwrap();
        assert!(rel(g, 3.22e22) < 1e-2, "{g:e}");
        let env = PhysicalEnvironment::lamb_electron(1.0).unwrap();
        let (a, b) = coefficients_from_temperature(&env).unwrap();
        assert!(rel(a / b, LAMB_A_OVER_B) < 1e-12);
    }

    #[test]
    fn internal_units_round_trip() {
        let env = PhysicalEnvironment::lamb_electron(4.0).unwrap();
        let (a, b) = coefficients_from_temperature(&env).unwrap();
        let u = InternalUnits::from_environment(&env).unwrap();
        let (ai, bi, hi) = u.coefficients_to_internal(a, b, env.hbar);
        assert!((ai - 1.0).abs() < 1e-12 && (bi - 1.0).abs() < 1e-12 && (hi - 1.0).abs() < 1e-12);
        let p = u.model_params(env.mass).unwrap();
        assert!(rel(p.mass * u.mass, env.mass) < 1e-14);
        // relaxation time is one internal time unit
        assert!(rel(u.time, relaxation_time(4.0).unwrap()) < 1e-12);
    }

    #[test]
    fn report_serializes() {
        let r = physical_report(&PhysicalEnvironment::lamb_electron(1.0).unwrap()).unwrap();
        let s = serde_json::to_string(&r).unwrap();
        let back: PhysicalReport = serde_json::from_str(&s).unwrap();
        assert_eq!(back, r);
    }

    proptest! {
        #[test]
        fn identities(t in 1e-3f64..1e4, g in 1e-3f64..1e25, m in 1e-30f64..1e3) {
            let env = PhysicalEnvironment::new(t, g, m).unwrap();
            let (a, b) = coefficients_from_temperature(&env).unwrap();
            let kt = BOLTZMANN * t;
            prop_assert!(rel(a * b, kt) < 1e-12);
            prop_assert!(rel(a / b, 1.0 / (g * m)) < 1e-12);
            prop_assert!(rel((a / b) * (a * b), kt / (m * g)) < 1e-12);
            prop_assert!(rel((b / a) * (a * b), g * kt * m) < 1e-12);
        }

        #[test]
        fn ratio_independent_of_temperature(t1 in 1e-3f64..1e4, t2 in 1e-3f64..1e4, g in 1e-3f64..1e25, m in 1e-30f64..1e3) {
            let (a1, b1) = coefficients_from_temperature(&PhysicalEnvironment::new(t1, g, m).unwrap()).unwrap();
            let (a2, b2) = coefficients_from_temperature(&PhysicalEnvironment::new(t2, g, m).unwrap()).unwrap();
            prop_assert!(rel(a1 / b1, a2 / b2) < 1e-12);
        }
    }
}
