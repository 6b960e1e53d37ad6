//! Physical parameters, constants and elementary derived quantities.
//!
//! Everything is stored in SI units with angular frequencies in rad/s.
//! Conversions to display units (GHz, kHz/nm, aF/um, pW) live in
//! [`crate::units`] and are only applied at the CLI boundary.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::{ensure, Error, Result};

/// Reduced Planck constant, J s (CODATA 2018, exact).
pub const HBAR: f64 = 1.054_571_817e-34;
/// Boltzmann constant, J/K (CODATA 2018, exact).
pub const K_B: f64 = 1.380_649e-23;

/// The constants every formula in the crate is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub k_b: f64,
}

impl PhysicalConstants {
    pub const CODATA_2018: PhysicalConstants = PhysicalConstants { hbar: HBAR, k_b: K_B };
}

/// Internal quality factor of the resonator.
///
/// `Lossless` is the explicit `Q_int -> infinity` limit used by the ideal
/// single-port projection. In configuration files it is written as the
/// string `"lossless"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InternalQ {
    Finite(f64),
    Lossless,
}

impl Serialize for InternalQ {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            InternalQ::Finite(q) => s.serialize_f64(*q),
            InternalQ::Lossless => s.serialize_str("lossless"),
        }
    }
}

impl<'de> Deserialize<'de> for InternalQ {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Tag(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(q) => Ok(InternalQ::Finite(q)),
            Raw::Tag(t) if t == "lossless" => Ok(InternalQ::Lossless),
            Raw::Tag(t) => Err(serde::de::Error::custom(format!("expected a number or \"lossless\", got {t:?}"))),
        }
    }
}

impl InternalQ {
    pub fn is_lossless(&self) -> bool {
        match self {
            InternalQ::Lossless => true,
            InternalQ::Finite(q) => q.is_infinite(),
        }
    }

    /// Inverse quality factor (internal loss rate in units of omega_c).
    pub fn inverse(&self) -> f64 {
        match self {
            InternalQ::Lossless => 0.0,
            InternalQ::Finite(q) => 1.0 / q,
        }
    }
}

/// Harmonic combination `(1/Q_int + 1/Q_ext)^-1`.
pub fn total_quality_factor(q_int: InternalQ, q_ext: f64) -> Result<f64> {
    if let InternalQ::Finite(q) = q_int {
        ensure(q > 0.0, || format!("q_int must be positive, got {q}"))?;
    }
    ensure(q_ext > 0.0, || format!("q_ext must be positive, got {q_ext}"))?;
    Ok(1.0 / (q_int.inverse() + 1.0 / q_ext))
}

/// Notch-coupled microwave resonator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CavityParams {
    /// Resonance, rad/s.
    pub omega_c: f64,
    pub q_int: InternalQ,
    pub q_ext: f64,
    /// Line impedance of the resonator, ohm.
    pub z_line: f64,
    /// Probe power at the device, W.
    pub power_incident: f64,
}

impl CavityParams {
    pub fn new(omega_c: f64, q_int: InternalQ, q_ext: f64, z_line: f64, power_incident: f64) -> Result<Self> {
        let cavity = CavityParams { omega_c, q_int, q_ext, z_line, power_incident };
        cavity.validate()?;
        Ok(cavity)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.omega_c > 0.0 && self.omega_c.is_finite(), || {
            format!("omega_c must be positive, got {}", self.omega_c)
        })?;
        if let InternalQ::Finite(q) = self.q_int {
            ensure(q > 0.0, || format!("q_int must be positive, got {q}"))?;
        }
        ensure(self.q_ext > 0.0, || format!("q_ext must be positive, got {}", self.q_ext))?;
        ensure(self.z_line > 0.0, || format!("z_line must be positive, got {}", self.z_line))?;
        ensure(self.power_incident >= 0.0, || format!("power must be non-negative, got {}", self.power_incident))
    }

    pub fn with_power(&self, power: f64) -> Self {
        CavityParams { power_incident: power, ..*self }
    }

    pub fn total_q(&self) -> f64 {
        1.0 / (self.q_int.inverse() + 1.0 / self.q_ext)
    }

    pub fn linewidth(&self) -> f64 {
        cavity_linewidth(self)
    }
}

/// Cavity energy decay rate `gamma_c = omega_c / Q`, rad/s.
pub fn cavity_linewidth(cavity: &CavityParams) -> f64 {
    cavity.omega_c / cavity.total_q()
}

/// Single mechanical mode treated as a damped harmonic oscillator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MechanicalMode {
    /// rad/s
    pub omega_m: f64,
    /// Effective mass, kg.
    pub mass: f64,
    pub q_m: f64,
    /// Bath temperature, K. Zero is accepted as the noiseless limit.
    pub temperature_bath: f64,
}

impl MechanicalMode {
    pub fn new(omega_m: f64, mass: f64, q_m: f64, temperature_bath: f64) -> Result<Self> {
        let mode = MechanicalMode { omega_m, mass, q_m, temperature_bath };
        mode.validate()?;
        Ok(mode)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.omega_m > 0.0 && self.omega_m.is_finite(), || {
            format!("omega_m must be positive, got {}", self.omega_m)
        })?;
        ensure(self.mass > 0.0, || format!("mass must be positive, got {}", self.mass))?;
        ensure(self.q_m > 0.0, || format!("q_m must be positive, got {}", self.q_m))?;
        ensure(self.temperature_bath >= 0.0, || {
            format!("temperature must be non-negative, got {}", self.temperature_bath)
        })
    }

    pub fn with_temperature(&self, temperature: f64) -> Self {
        MechanicalMode { temperature_bath: temperature, ..*self }
    }

    /// Energy damping rate `omega_m / Q_m`, rad/s.
    pub fn gamma_m(&self) -> f64 {
        self.omega_m / self.q_m
    }

    pub fn spring_constant(&self) -> f64 {
        spring_constant(self)
    }

    /// `sqrt(hbar / (2 m omega_m))`, m.
    pub fn zero_point_scale(&self) -> f64 {
        (HBAR / (2.0 * self.mass * self.omega_m)).sqrt()
    }

    /// `m omega_m gamma_m`, the scale converting force to on-resonance displacement.
    pub fn mechanical_impedance(&self) -> f64 {
        self.mass * self.omega_m * self.gamma_m()
    }

    /// Equipartition variance `k_b T / (m omega_m^2)`, m^2.
    pub fn thermal_variance(&self) -> f64 {
        K_B * self.temperature_bath / self.spring_constant()
    }
}

/// `k = m omega_m^2`, N/m.
pub fn spring_constant(mode: &MechanicalMode) -> f64 {
    mode.mass * mode.omega_m * mode.omega_m
}

/// Geometry-to-frequency transduction of the beam.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CouplingModel {
    /// Beam-to-cavity capacitance gradient, F/m.
    pub dcb_dx: f64,
    /// Beam-to-feedline (drive) capacitance gradient, F/m.
    pub dcd_dx: f64,
    /// Cavity pull magnitude `|d omega_c / dx|`, rad/s per m.
    pub g: f64,
}

impl CouplingModel {
    /// Derives `g` from `dC_b/dx` for a quarter-wave resonator.
    pub fn from_geometry(dcb_dx: f64, dcd_dx: f64, cavity: &CavityParams) -> Result<Self> {
        let g = coupling_from_geometry(dcb_dx, cavity)?;
        Self::new(dcb_dx, dcd_dx, g)
    }

    pub fn new(dcb_dx: f64, dcd_dx: f64, g: f64) -> Result<Self> {
        ensure(dcb_dx.is_finite() && dcd_dx.is_finite() && g.is_finite(), || "coupling values must be finite".into())?;
        ensure(g >= 0.0, || format!("g is stored as a magnitude, got {g}"))?;
        Ok(CouplingModel { dcb_dx, dcd_dx, g })
    }
}

/// Cavity pull of a beam at the voltage antinode of a lambda/4 resonator:
/// `|d omega_c/dx| = omega_c * (dC_b/dx) * 4 Z_1 omega_c / 2 pi`.
///
/// The physical shift is a red shift (omega_c decreases as the capacitance
/// grows); only the magnitude is returned since every downstream formula
/// uses `g^2`.
pub fn coupling_from_geometry(dcb_dx: f64, cavity: &CavityParams) -> Result<f64> {
    if dcb_dx < 0.0 || !dcb_dx.is_finite() {
        return Err(Error::Domain(format!("dC_b/dx must be a non-negative number, got {dcb_dx}")));
    }
    Ok(cavity.omega_c * dcb_dx * 4.0 * cavity.z_line * cavity.omega_c / (2.0 * PI))
}
