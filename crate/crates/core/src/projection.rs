//! Quantum-limit projections for an ideal lossless single-port cavity probed
//! in reflection on resonance.
//!
//! Shot-noise imprecision
//!
//! `S_x^sn = hbar w_c (1 + 4 (w_m/gamma_c)^2) / (2 (g/w_c)^2 P (4Q)^2)`
//!
//! with `Q = Q_ext`, and quantum backaction `S_F^ba = hbar^2 / S_x^sn`. The
//! imprecision of a phase-insensitive amplifier is `N_amp S_x^sn` with
//! `N_amp = 2 k_b T_N / (hbar w_c)`. This amplifier-quanta convention is
//! fixed by requiring `N_amp = 2` (twice shot noise) for a quantum-limited
//! two-quadrature amplifier; it is a convention, not a derivation.

use crate::cavity::sideband_filter_factor;
use crate::error::{ensure, Error, Result};
use crate::model::{CavityParams, MechanicalMode, HBAR, K_B};
use crate::spectral::imprecision_temperature;

#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionScenario {
    /// Must be lossless (`Q_int -> infinity`).
    pub cavity: CavityParams,
    pub mode: MechanicalMode,
    /// rad/s per m
    pub g: f64,
    /// Amplifier noise temperature, K.
    pub t_n: f64,
    /// W, positive and ascending.
    pub power_grid: Vec<f64>,
}

impl ProjectionScenario {
    pub fn new(cavity: CavityParams, mode: MechanicalMode, g: f64, t_n: f64, power_grid: Vec<f64>) -> Result<Self> {
        cavity.validate()?;
        mode.validate()?;
        ensure(cavity.q_int.is_lossless(), || "projection assumes a lossless cavity (q_int = \"lossless\")".into())?;
        ensure(g > 0.0, || format!("g must be positive, got {g}"))?;
        ensure(t_n >= 0.0, || format!("t_n must be non-negative, got {t_n}"))?;
        ensure(power_grid.iter().all(|p| *p > 0.0), || "power grid must be positive".into())?;
        ensure(power_grid.windows(2).all(|w| w[1] > w[0]), || "power grid must be ascending".into())?;
        Ok(ProjectionScenario { cavity, mode, g, t_n, power_grid })
    }

    /// `S_x^sn * P`, independent of power, m^2 W/Hz.
    fn shot_noise_coefficient(&self) -> f64 {
        let q = self.cavity.total_q();
        let omega_c = self.cavity.omega_c;
        let filter = sideband_filter_factor(self.mode.omega_m, self.cavity.linewidth());
        let pull = self.g / omega_c;
        HBAR * omega_c * filter / (2.0 * pull * pull * (4.0 * q).powi(2))
    }

    pub fn amplifier_quanta(&self) -> f64 {
        amplifier_noise_quanta(self.t_n, self.cavity.omega_c)
    }
}

/// `2 k_b T_N / (hbar omega_c)`
pub fn amplifier_noise_quanta(t_n: f64, omega_c: f64) -> f64 {
    2.0 * K_B * t_n / (HBAR * omega_c)
}

fn check_power(power: f64) -> Result<()> {
    if power > 0.0 && power.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("probe power must be positive, got {power}")))
    }
}

/// m^2/Hz
pub fn shot_noise_imprecision(scenario: &ProjectionScenario, power: f64) -> Result<f64> {
    check_power(power)?;
    Ok(scenario.shot_noise_coefficient() / power)
}

/// `hbar^2 / S_x^sn`, N^2/Hz.
pub fn quantum_backaction_force(scenario: &ProjectionScenario, power: f64) -> Result<f64> {
    Ok(HBAR * HBAR / shot_noise_imprecision(scenario, power)?)
}

/// Backaction referred to on-resonance displacement, `S_F^ba / (m w_m gamma_m)^2`.
pub fn backaction_displacement(scenario: &ProjectionScenario, power: f64) -> Result<f64> {
    let z = scenario.mode.mechanical_impedance();
    Ok(quantum_backaction_force(scenario, power)? / (z * z))
}

/// `N_amp * S_x^sn`, m^2/Hz.
pub fn amplifier_imprecision(scenario: &ProjectionScenario, power: f64) -> Result<f64> {
    Ok(scenario.amplifier_quanta() * shot_noise_imprecision(scenario, power)?)
}

/// Power at which shot-noise imprecision equals backaction displacement:
/// `a/P = hbar^2 P / (a Z^2)` gives `P* = a Z / hbar` with `a = S_x^sn P`
/// and `Z = m w_m gamma_m`.
pub fn intersection_power(scenario: &ProjectionScenario) -> f64 {
    scenario.shot_noise_coefficient() * scenario.mode.mechanical_impedance() / HBAR
}

/// Bisection for the crossing on `ln(S_x^sn / S_x^ba)`, bracketed by the
/// power grid and widened by decades when the grid does not contain it.
pub fn intersection_power_bisection(scenario: &ProjectionScenario) -> Result<f64> {
    let gap = |p: f64| -> Result<f64> {
        Ok((shot_noise_imprecision(scenario, p)? / backaction_displacement(scenario, p)?).ln())
    };
    let (mut lo, mut hi) = match (scenario.power_grid.first(), scenario.power_grid.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        _ => (1e-15, 1e-3),
    };
    for _ in 0..60 {
        if gap(lo)? > 0.0 {
            break;
        }
        lo /= 10.0;
    }
    for _ in 0..60 {
        if gap(hi)? < 0.0 {
            break;
        }
        hi *= 10.0;
    }
    if gap(lo)? <= 0.0 || gap(hi)? >= 0.0 {
        return Err(Error::Domain("could not bracket the shot-noise/backaction crossing".into()));
    }
    for _ in 0..200 {
        let mid = (lo * hi).sqrt();
        if gap(mid)? > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi / lo - 1.0 < 1e-14 {
            break;
        }
    }
    Ok((lo * hi).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimumUncertainty {
    /// W
    pub power: f64,
    /// `S_x^amp + S_x^ba` at the optimum, m^2/Hz.
    pub total: f64,
    /// `sqrt(total / (2 S_x(SQL)))`, equal to `N_amp^(1/4)`.
    pub linear_ratio_to_sql: f64,
}

/// Minimizes `S_x^amp(P) + S_x^ba(P)`.
///
/// The two terms balance at `P = sqrt(N_amp) P*`, where the sum is
/// `2 sqrt(N_amp) hbar / (m w_m gamma_m)`. The reference is the SQL total
/// `2 S_x(SQL)`, since imprecision and backaction each contribute `S_x(SQL)`
/// there.
pub fn minimum_total_uncertainty(scenario: &ProjectionScenario) -> MinimumUncertainty {
    let n_amp = scenario.amplifier_quanta();
    let z = scenario.mode.mechanical_impedance();
    let power = n_amp.sqrt() * intersection_power(scenario);
    let total = 2.0 * n_amp.sqrt() * HBAR / z;
    let sql_total = 2.0 * HBAR / z;
    MinimumUncertainty { power, total, linear_ratio_to_sql: (total / sql_total).sqrt() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProjectionRow {
    /// W
    pub power: f64,
    /// m^2/Hz
    pub sx_sn: f64,
    pub sx_ba: f64,
    pub sx_amp: f64,
    /// N^2/Hz
    pub sf_ba: f64,
    /// Equivalent temperatures, K.
    pub t_sn: f64,
    pub t_ba: f64,
    pub t_amp: f64,
}

pub fn projection_table(scenario: &ProjectionScenario) -> Result<Vec<ProjectionRow>> {
    if scenario.power_grid.is_empty() {
        return Err(Error::Domain("empty power grid".into()));
    }
    scenario
        .power_grid
        .iter()
        .map(|&power| {
            let sx_sn = shot_noise_imprecision(scenario, power)?;
            let sx_ba = backaction_displacement(scenario, power)?;
            let sx_amp = amplifier_imprecision(scenario, power)?;
            let mode = &scenario.mode;
            Ok(ProjectionRow {
                power,
                sx_sn,
                sx_ba,
                sx_amp,
                sf_ba: quantum_backaction_force(scenario, power)?,
                t_sn: imprecision_temperature(sx_sn, mode),
                t_ba: imprecision_temperature(sx_ba, mode),
                t_amp: imprecision_temperature(sx_amp, mode),
            })
        })
        .collect()
}

/// Log-spaced grid from `lo` to `hi` inclusive.
pub fn log_power_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect(),
    }
}
