//! Display-unit conversions. Values with a frequency unit (Hz, kHz, ...)
//! map to angular frequency by an exact factor of 2 pi.

use std::f64::consts::TAU;

/// Hz -> rad/s
pub fn hz(f: f64) -> f64 {
    TAU * f
}

pub fn khz(f: f64) -> f64 {
    hz(f * 1e3)
}

pub fn mhz(f: f64) -> f64 {
    hz(f * 1e6)
}

pub fn ghz(f: f64) -> f64 {
    hz(f * 1e9)
}

/// rad/s -> Hz
pub fn to_hz(omega: f64) -> f64 {
    omega / TAU
}

/// Cavity pull quoted as `2 pi x (kHz/nm)` -> rad/s per m.
pub fn khz_per_nm(g: f64) -> f64 {
    hz(g * 1e3) / 1e-9
}

pub fn to_khz_per_nm(g: f64) -> f64 {
    to_hz(g) * 1e-9 / 1e3
}

/// aF/um -> F/m
pub fn af_per_um(c: f64) -> f64 {
    c * 1e-18 / 1e-6
}

pub fn to_af_per_um(c: f64) -> f64 {
    c / (1e-18 / 1e-6)
}

/// pg -> kg
pub fn pg(m: f64) -> f64 {
    m * 1e-15
}

pub fn pw(p: f64) -> f64 {
    p * 1e-12
}

pub fn mk(t: f64) -> f64 {
    t * 1e-3
}
