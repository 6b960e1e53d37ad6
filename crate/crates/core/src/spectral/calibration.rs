//! Thermal calibration of the cavity pull and equivalent-temperature
//! conversions.
//!
//! For a mode in equilibrium at `T` the integrated cavity-frequency noise is
//! `d_omega_c^2 = g^2 k_b (T + T_ba) / (m omega_m^2)`; a straight line through
//! points above a threshold temperature gives `g` from its slope.

use crate::error::{Error, Result};
use crate::model::{MechanicalMode, K_B};

/// Threshold below which sweep points are excluded from the linear fit, K.
pub const DEFAULT_MIN_TEMP: f64 = 0.127;

/// One temperature-sweep measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    /// Refrigerator temperature, K.
    pub t_frig: f64,
    /// Integrated cavity-frequency noise, (rad/s)^2.
    pub delta_omega_c_sq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepResidual {
    pub t_frig: f64,
    pub measured: f64,
    pub predicted: f64,
    /// Whether the point fell inside the fit window.
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TemperatureSweepResult {
    /// rad/s per m
    pub g_fit: f64,
    /// Temperature-axis intercept `-T_ba` equivalent, K (intercept / slope).
    pub t_intercept: f64,
    pub fit_window_min_temp: f64,
    /// (rad/s)^2 per K
    pub slope: f64,
    /// (rad/s)^2
    pub intercept: f64,
    pub residuals: Vec<SweepResidual>,
}

impl TemperatureSweepResult {
    pub fn excluded(&self) -> usize {
        self.residuals.iter().filter(|r| !r.used).count()
    }
}

/// Unweighted straight-line fit of `delta_omega_c^2` against `T_frig` over
/// points with `T_frig >= min_temp`.
pub fn temperature_sweep_fit(
    points: &[SweepPoint],
    mode: &MechanicalMode,
    min_temp: f64,
) -> Result<TemperatureSweepResult> {
    let used: Vec<&SweepPoint> = points.iter().filter(|p| p.t_frig >= min_temp).collect();
    if used.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} points at or above {min_temp} K; need at least 3",
            used.len()
        )));
    }
    let n = used.len() as f64;
    let mean_t = used.iter().map(|p| p.t_frig).sum::<f64>() / n;
    let mean_y = used.iter().map(|p| p.delta_omega_c_sq).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.t_frig - mean_t).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.t_frig - mean_t) * (p.delta_omega_c_sq - mean_y)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all fit points share one temperature".into()));
    }
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_t;
    if !(slope > 0.0) {
        return Err(Error::Calibration(format!("non-positive slope {slope:e} (rad/s)^2/K: no physical coupling")));
    }
    let g_fit = (slope * mode.spring_constant() / K_B).sqrt();
    let residuals = points
        .iter()
        .map(|p| SweepResidual {
            t_frig: p.t_frig,
            measured: p.delta_omega_c_sq,
            predicted: intercept + slope * p.t_frig,
            used: p.t_frig >= min_temp,
        })
        .collect();
    Ok(TemperatureSweepResult {
        g_fit,
        t_intercept: intercept / slope,
        fit_window_min_temp: min_temp,
        slope,
        intercept,
        residuals,
    })
}

/// `T_im = S_x^im m omega_m^2 gamma_m / (4 k_b)`, K.
pub fn imprecision_temperature(s_x_im: f64, mode: &MechanicalMode) -> f64 {
    s_x_im * mode.spring_constant() * mode.gamma_m() / (4.0 * K_B)
}

/// Inverse of [`imprecision_temperature`], m^2/Hz.
pub fn imprecision_psd(temperature: f64, mode: &MechanicalMode) -> f64 {
    4.0 * K_B * temperature / (mode.spring_constant() * mode.gamma_m())
}

/// `T_ba = S_F^ba / (4 k_b m gamma_m)`, K.
pub fn backaction_temperature(s_f_ba: f64, mode: &MechanicalMode) -> f64 {
    s_f_ba / (4.0 * K_B * mode.mass * mode.gamma_m())
}

/// Equivalent beam temperature at the base (lowest) refrigerator
/// temperature, `d_omega_c^2 m omega_m^2 / (g^2 k_b)`, using the calibrated
/// `g`. Several points at the base temperature are averaged.
///
/// This is an upper bound on the backaction temperature, not a measurement
/// of it.
pub fn saturation_temperature(low_t_points: &[SweepPoint], g: f64, mode: &MechanicalMode) -> Result<f64> {
    if !(g > 0.0) {
        return Err(Error::Calibration("saturation temperature needs a calibrated g > 0".into()));
    }
    let base = low_t_points
        .iter()
        .map(|p| p.t_frig)
        .min_by(f64::total_cmp)
        .ok_or_else(|| Error::InsufficientData("no base-temperature measurement".into()))?;
    let at_base: Vec<f64> = low_t_points.iter().filter(|p| p.t_frig == base).map(|p| p.delta_omega_c_sq).collect();
    let mean = at_base.iter().sum::<f64>() / at_base.len() as f64;
    Ok(mean * mode.spring_constant() / (g * g * K_B))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn beam() -> MechanicalMode {
        MechanicalMode::new(khz(240.0), pg(2.0), 2300.0, 0.1).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    fn line(g: f64, t: f64, mode: &MechanicalMode) -> f64 {
        g * g * K_B * t / mode.spring_constant()
    }

    fn sweep_temps() -> Vec<f64> {
        (0..6).map(|i| 0.130 + 0.034 * i as f64).collect()
    }

    #[test]
    fn noiseless_inversion() {
        let mode = beam();
        let g = khz_per_nm(1.16);
        let pts: Vec<SweepPoint> =
            sweep_temps().into_iter().map(|t| SweepPoint { t_frig: t, delta_omega_c_sq: line(g, t, &mode) }).collect();
        let fit = temperature_sweep_fit(&pts, &mode, DEFAULT_MIN_TEMP).unwrap();
        assert!(rel(fit.g_fit, g) < 1e-6);
        assert!(fit.t_intercept.abs() < 1e-9);
        assert_eq!(fit.excluded(), 0);
    }

    #[test]
    fn noisy_sweeps_monte_carlo() {
        let mode = beam();
        let g = khz_per_nm(1.16);
        let mut g_ok = 0;
        let mut sum_sq_t = 0.0;
        for seed in 0..100u64 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pts: Vec<SweepPoint> = sweep_temps()
                .into_iter()
                .map(|t| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    SweepPoint { t_frig: t, delta_omega_c_sq: line(g, t, &mode) * (1.0 + 0.03 * z) }
                })
                .collect();
            let fit = temperature_sweep_fit(&pts, &mode, DEFAULT_MIN_TEMP).unwrap();
            if rel(fit.g_fit, g) < 0.05 {
                g_ok += 1;
            }
            sum_sq_t += fit.t_intercept.powi(2);
        }
        let rms_t = (sum_sq_t / 100.0).sqrt();
        assert!(g_ok >= 90, "{g_ok} of 100 seeds within 5%");
        assert!(rms_t < 0.015, "rms intercept {rms_t}");
    }

    #[test]
    fn window_rejects_saturated_points() {
        let mode = beam();
        let g = khz_per_nm(1.16);
        let temps = [0.017, 0.04, 0.06, 0.08, 0.1, 0.13, 0.16, 0.2, 0.25, 0.3];
        let pts: Vec<SweepPoint> =
            temps.iter().map(|&t| SweepPoint { t_frig: t, delta_omega_c_sq: line(g, t.max(0.08), &mode) }).collect();
        let windowed = temperature_sweep_fit(&pts, &mode, DEFAULT_MIN_TEMP).unwrap();
        assert!(rel(windowed.g_fit, g) < 0.05);
        assert_eq!(windowed.excluded(), 5);
        let full = temperature_sweep_fit(&pts, &mode, 0.0).unwrap();
        assert!(rel(full.g_fit, g) > 0.05, "full-range fit should be biased: {}", full.g_fit / g);

        let t_sat = saturation_temperature(&pts, windowed.g_fit, &mode).unwrap();
        assert!(rel(t_sat, 0.08) < 1e-6);
    }

    #[test]
    fn backaction_offset_moves_only_intercept() {
        let mode = beam();
        let g = khz_per_nm(1.16);
        let jitter = 0.01 * line(g, 0.2, &mode);
        let make = |t_ba: f64| -> Vec<SweepPoint> {
            sweep_temps()
                .into_iter()
                .enumerate()
                .map(|(i, t)| SweepPoint {
                    t_frig: t,
                    delta_omega_c_sq: line(g, t + t_ba, &mode) + jitter * (i as f64 - 2.5).powi(3),
                })
                .collect()
        };
        let a = temperature_sweep_fit(&make(0.0), &mode, DEFAULT_MIN_TEMP).unwrap();
        let b = temperature_sweep_fit(&make(0.02), &mode, DEFAULT_MIN_TEMP).unwrap();
        assert!(rel(a.slope, b.slope) < 1e-9);
        assert!(rel(b.intercept - a.intercept, line(g, 0.02, &mode)) < 1e-9);
    }

    #[test]
    fn sweep_errors() {
        let mode = beam();
        let few =
            [SweepPoint { t_frig: 0.2, delta_omega_c_sq: 1.0 }, SweepPoint { t_frig: 0.3, delta_omega_c_sq: 2.0 }];
        assert!(matches!(temperature_sweep_fit(&few, &mode, 0.127), Err(Error::InsufficientData(_))));
        let falling: Vec<SweepPoint> =
            [0.15, 0.2, 0.3].iter().map(|&t| SweepPoint { t_frig: t, delta_omega_c_sq: 1.0 - t }).collect();
        assert!(matches!(temperature_sweep_fit(&falling, &mode, 0.127), Err(Error::Calibration(_))));
        assert!(saturation_temperature(&few, 0.0, &mode).is_err());
        assert!(saturation_temperature(&[], 1.0, &mode).is_err());
    }

    #[test]
    fn on_line_point_gives_fridge_temperature() {
        let mode = beam();
        let g = khz_per_nm(1.16);
        let p = [SweepPoint { t_frig: 0.017, delta_omega_c_sq: line(g, 0.017, &mode) }];
        assert!(rel(saturation_temperature(&p, g, &mode).unwrap(), 0.017) < 1e-12);
    }

    #[test]
    fn temperature_conversions() {
        let mode = beam();
        assert_eq!(imprecision_temperature(0.0, &mode), 0.0);
        let s = (200e-15f64).powi(2);
        assert!(rel(imprecision_temperature(s, &mode), 2.159_694e-3) < 1e-6);
        let t = imprecision_temperature(s, &mode);
        assert!(rel(imprecision_psd(t, &mode), s) < 1e-15);
        assert!(rel(backaction_temperature(1e-36, &mode), 13.809_04e-3) < 1e-6);
    }
}
