//! Motion of the nanomechanical beam: thermal spectra, electrostatic drive
//! response and time-domain Langevin realizations.
//!
//! All spectral densities are single-sided and per Hz, with Lorentzians
//! written in angular detuning. With this convention the area under a
//! Lorentzian of height `S0` and width `gamma` is `S0 * gamma / 4`.

use std::f64::consts::TAU;

use nalgebra::{Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{ensure, Error, Result};
use crate::model::{MechanicalMode, K_B};

/// Electrostatic drive applied through the feedline bias tee.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    /// V
    pub v_dc: f64,
    /// AC amplitude, V
    pub v_ac: f64,
    /// rad/s
    pub omega_drive: f64,
}

impl DriveSpec {
    pub fn new(v_dc: f64, v_ac: f64, omega_drive: f64) -> Result<Self> {
        ensure(v_ac >= 0.0, || format!("v_ac must be non-negative, got {v_ac}"))?;
        ensure(omega_drive > 0.0, || format!("drive frequency must be positive, got {omega_drive}"))?;
        Ok(DriveSpec { v_dc, v_ac, omega_drive })
    }
}

/// Sampled displacement record.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    /// Sample interval, s.
    pub dt: f64,
    /// Displacement, m.
    pub samples: Vec<f64>,
    pub seed: u64,
}

impl Trajectory {
    pub fn sample_rate(&self) -> f64 {
        1.0 / self.dt
    }

    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    pub fn variance(&self) -> f64 {
        let n = self.samples.len() as f64;
        let mean = self.samples.iter().sum::<f64>() / n;
        self.samples.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n
    }
}

/// Thermally driven displacement PSD at angular detuning `delta_omega = omega - omega_m`:
///
/// `S_x = 4 m gamma_m k_b T / (m omega_m gamma_m)^2 / (1 + 4 delta^2 / gamma_m^2)`, m^2/Hz.
pub fn thermal_displacement_psd(mode: &MechanicalMode, delta_omega: f64) -> f64 {
    let gamma = mode.gamma_m();
    let impedance = mode.mechanical_impedance();
    let peak = 4.0 * mode.mass * gamma * K_B * mode.temperature_bath / (impedance * impedance);
    peak / (1.0 + 4.0 * delta_omega * delta_omega / (gamma * gamma))
}

/// On-resonance height of [`thermal_displacement_psd`].
pub fn thermal_peak(mode: &MechanicalMode) -> f64 {
    thermal_displacement_psd(mode, 0.0)
}

/// Thermal force PSD `4 k_b T m gamma_m`, N^2/Hz.
pub fn thermal_force_psd(mode: &MechanicalMode) -> f64 {
    4.0 * K_B * mode.temperature_bath * mode.mass * mode.gamma_m()
}

/// `F = V_dc V_ac dC_d/dx`, N.
pub fn electrostatic_force(drive: &DriveSpec, dcd_dx: f64) -> f64 {
    drive.v_dc * drive.v_ac * dcd_dx
}

/// Steady-state response of the damped oscillator to a force of amplitude
/// `force` at `omega_drive`. Returns `(amplitude in m, phase in rad)`; the
/// phase runs from 0 (static) through `-pi/2` (resonance) to `-pi`.
pub fn driven_response(mode: &MechanicalMode, force: f64, omega_drive: f64) -> (f64, f64) {
    let detune = mode.omega_m * mode.omega_m - omega_drive * omega_drive;
    let damping = mode.gamma_m() * omega_drive;
    let amplitude = (force / mode.mass) / (detune * detune + damping * damping).sqrt();
    (amplitude, -damping.atan2(detune))
}

/// Integration controls for [`simulate_langevin`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LangevinSettings {
    /// Total simulated time including the burn-in, s.
    pub duration: f64,
    /// Integration step, s. Must not exceed `T_m / 50`.
    pub dt: f64,
    /// Keep every n-th step in the returned record.
    pub record_every: usize,
}

impl LangevinSettings {
    /// Step at the cap `T_m/50`, keeping every sample.
    pub fn at_cap(mode: &MechanicalMode, duration: f64) -> Self {
        LangevinSettings { duration, dt: max_step(mode), record_every: 1 }
    }
}

/// Largest accepted integration step, `2 pi / (50 omega_m)`.
pub fn max_step(mode: &MechanicalMode) -> f64 {
    TAU / (50.0 * mode.omega_m)
}

/// Transient discarded before recording, `5 / gamma_m`.
pub fn burn_in(mode: &MechanicalMode) -> f64 {
    5.0 / mode.gamma_m()
}

/// Realizes `m x'' + m gamma_m x' + m omega_m^2 x = F_th(t) + F_el(t)`
/// from rest, with white thermal force of single-sided PSD `4 k_b T m gamma_m`.
///
/// Each step applies the exact transition matrix `exp(A dt)` of the linear
/// system. The thermal increment is drawn from its exact covariance
/// `Sigma - Phi Sigma Phi^T` (`Sigma` the equipartition covariance), so the
/// stationary statistics carry no step-size bias. The drive force is held
/// constant over each step at its midpoint value.
///
/// The first `5/gamma_m` of motion is dropped. The result is deterministic
/// for a given `seed`.
pub fn simulate_langevin(
    mode: &MechanicalMode,
    drive: Option<(DriveSpec, f64)>,
    settings: &LangevinSettings,
    seed: u64,
) -> Result<Trajectory> {
    mode.validate()?;
    let LangevinSettings { duration, dt, record_every } = *settings;
    ensure(dt > 0.0 && dt.is_finite(), || format!("dt must be positive, got {dt}"))?;
    ensure(record_every >= 1, || "record_every must be at least 1".into())?;
    let cap = max_step(mode);
    if dt > cap * (1.0 + 1e-12) {
        return Err(Error::Stability { dt, cap });
    }
    let burn = burn_in(mode);
    if !(duration > burn) {
        return Err(Error::TooShort { duration, burn_in: burn });
    }
    let total_steps = (duration / dt).round() as usize;
    let burn_steps = (burn / dt).ceil() as usize;
    let recorded = (total_steps - burn_steps.min(total_steps)) / record_every;
    if recorded < 2 {
        return Err(Error::TooShort { duration, burn_in: burn });
    }

    let w2 = mode.omega_m * mode.omega_m;
    let gamma = mode.gamma_m();
    let a = Matrix2::new(0.0, 1.0, -w2, -gamma);
    let phi = (a * dt).exp();

    let var_x = K_B * mode.temperature_bath / (mode.mass * w2);
    let var_v = K_B * mode.temperature_bath / mode.mass;
    let sigma = Matrix2::new(var_x, 0.0, 0.0, var_v);
    let noise_cov = sigma - phi * sigma * phi.transpose();
    let chol = cholesky_2x2(&noise_cov);

    // response of (x, v) to a unit force held over one step
    let a_inv = Matrix2::new(-gamma / w2, -1.0 / w2, 1.0, 0.0);
    let force_gain = a_inv * (phi - Matrix2::identity()) * Vector2::new(0.0, 1.0 / mode.mass);

    let (force_amp, omega_d) = match drive {
        Some((spec, dcd_dx)) => (electrostatic_force(&spec, dcd_dx), spec.omega_drive),
        None => (0.0, 0.0),
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = Vector2::new(0.0, 0.0);
    let mut samples = Vec::with_capacity(recorded);
    let noisy = mode.temperature_bath > 0.0;

    for step in 0..burn_steps + recorded * record_every {
        let mut next = phi * state;
        if noisy {
            let z0: f64 = StandardNormal.sample(&mut rng);
            let z1: f64 = StandardNormal.sample(&mut rng);
            next += chol * Vector2::new(z0, z1);
        }
        if force_amp != 0.0 {
            let t_mid = (step as f64 + 0.5) * dt;
            next += force_gain * (force_amp * (omega_d * t_mid).cos());
        }
        state = next;
        if step >= burn_steps && (step + 1 - burn_steps).is_multiple_of(record_every) {
            samples.push(state[0]);
        }
    }

    Ok(Trajectory { dt: dt * record_every as f64, samples, seed })
}

/// Lower-triangular factor of a symmetric positive semi-definite 2x2 matrix.
/// Round-off negatives on the diagonal are clamped to zero.
fn cholesky_2x2(m: &Matrix2<f64>) -> Matrix2<f64> {
    let l00 = m[(0, 0)].max(0.0).sqrt();
    let l10 = if l00 > 0.0 { m[(1, 0)] / l00 } else { 0.0 };
    let l11 = (m[(1, 1)] - l10 * l10).max(0.0).sqrt();
    Matrix2::new(l00, 0.0, l10, l11)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::*;
    use std::f64::consts::PI;

    fn beam(t: f64) -> MechanicalMode {
        MechanicalMode::new(khz(240.0), pg(2.0), 2300.0, t).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn thermal_psd_values() {
        let mode = beam(0.1);
        assert!(rel(thermal_peak(&mode), 1.852_114e-24) < 1e-6);
        let g = mode.gamma_m();
        assert!(rel(thermal_displacement_psd(&mode, g / 2.0), thermal_peak(&mode) / 2.0) < 1e-14);
        assert_eq!(thermal_displacement_psd(&beam(0.0), 0.0), 0.0);
        assert_eq!(thermal_displacement_psd(&beam(0.0), 1e3), 0.0);
    }

    #[test]
    fn thermal_psd_area_is_equipartition() {
        // trapezoid over +-5000 linewidths plus analytic Lorentzian tails
        let mode = beam(0.1);
        let g = mode.gamma_m();
        let f0 = to_hz(mode.omega_m);
        let half_span = 5000.0 * to_hz(g);
        let n = 2_000_001;
        let df = 2.0 * half_span / (n - 1) as f64;
        let mut area = 0.0;
        for i in 0..n {
            let f = f0 - half_span + df * i as f64;
            let w = if i == 0 || i == n - 1 { 0.5 } else { 1.0 };
            area += w * thermal_displacement_psd(&mode, hz(f) - mode.omega_m);
        }
        area *= df;
        // tails beyond +-5000 gamma: S0 * gamma^2 / (4 * 2pi) * 2 / D
        let d = hz(half_span);
        area += 2.0 * thermal_peak(&mode) * g * g / (4.0 * TAU * d);
        assert!(rel(area, mode.thermal_variance()) < 1e-3, "{area} vs {}", mode.thermal_variance());
        assert!(rel(mode.thermal_variance(), 3.035_785e-22) < 1e-6);
    }

    #[test]
    fn force_values() {
        let d = DriveSpec::new(1.0, 10e-6, khz(240.0)).unwrap();
        assert!(rel(electrostatic_force(&d, af_per_um(0.2)), 2e-18) < 1e-12);
        let off = DriveSpec { v_dc: 0.0, ..d };
        assert_eq!(electrostatic_force(&off, af_per_um(0.2)), 0.0);
        let d2 = DriveSpec { v_ac: 20e-6, ..d };
        assert!(rel(electrostatic_force(&d2, 1.0), 2.0 * electrostatic_force(&d, 1.0)) < 1e-15);
        let d3 = DriveSpec { v_dc: 2.0, ..d };
        assert!(rel(electrostatic_force(&d3, 1.0), 2.0 * electrostatic_force(&d, 1.0)) < 1e-15);
        assert!(DriveSpec::new(1.0, -1.0, 1.0).is_err());
    }

    #[test]
    fn driven_response_limits() {
        let mode = beam(0.0);
        let (amp, phase) = driven_response(&mode, 2e-15, mode.omega_m);
        assert!(rel(amp, 1.011_452_8e-9) < 1e-6);
        assert!(rel(amp, mode.q_m * 2e-15 / mode.spring_constant()) < 1e-12);
        assert!((phase + PI / 2.0).abs() < 1e-12);

        let (amp, phase) = driven_response(&mode, 2e-15, mode.omega_m * 1e-6);
        assert!(rel(amp, 2e-15 / mode.spring_constant()) < 1e-9);
        assert!(phase.abs() < 1e-6);

        let (_, phase) = driven_response(&mode, 2e-15, mode.omega_m * 1e3);
        assert!((phase + PI).abs() < 1e-3);
    }

    fn max_lorentzian_deviation(q: f64) -> f64 {
        let mode = MechanicalMode { q_m: q, ..beam(0.0) };
        let g = mode.gamma_m();
        let (peak, _) = driven_response(&mode, 1e-15, mode.omega_m);
        (-50..=50)
            .map(|i| {
                let delta = g * i as f64 / 10.0;
                let (amp, _) = driven_response(&mode, 1e-15, mode.omega_m + delta);
                let lorentz = peak * peak / (1.0 + 4.0 * delta * delta / (g * g));
                rel(amp * amp, lorentz)
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn driven_response_is_lorentzian_near_resonance() {
        // The leading correction is ~delta/omega_m, i.e. 5/Q at +-5 gamma_m.
        for q in [1000.0, 2300.0, 120_000.0] {
            assert!(max_lorentzian_deviation(q) < 5.5 / q, "Q {q}");
        }
        assert!(max_lorentzian_deviation(5500.0) < 1e-3);
        assert!(max_lorentzian_deviation(120_000.0) < 1e-4);
    }

    #[test]
    fn phase_decreases_monotonically() {
        let mode = beam(0.0);
        let mut last = f64::INFINITY;
        for i in 1..2000 {
            let (_, phase) = driven_response(&mode, 1e-15, mode.omega_m * i as f64 / 1000.0);
            assert!(phase < last);
            last = phase;
        }
    }

    #[test]
    fn zero_temperature_is_silent() {
        let mode = beam(0.0);
        let settings = LangevinSettings::at_cap(&mode, 20.0 / mode.gamma_m());
        let traj = simulate_langevin(&mode, None, &settings, 7).unwrap();
        assert!(traj.samples.len() > 2);
        assert!(traj.samples.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn step_and_duration_checks() {
        let mode = beam(0.1);
        let too_big = LangevinSettings { duration: 1.0, dt: 1.01 * max_step(&mode), record_every: 1 };
        assert!(matches!(simulate_langevin(&mode, None, &too_big, 1), Err(Error::Stability { .. })));
        let short = LangevinSettings { duration: 4.0 / mode.gamma_m(), dt: max_step(&mode), record_every: 1 };
        assert!(matches!(simulate_langevin(&mode, None, &short, 1), Err(Error::TooShort { .. })));
    }

    #[test]
    fn seeds_are_deterministic_and_distinct() {
        let mode = beam(0.1);
        let settings = LangevinSettings::at_cap(&mode, 10.0 / mode.gamma_m());
        let a = simulate_langevin(&mode, None, &settings, 11).unwrap();
        let b = simulate_langevin(&mode, None, &settings, 11).unwrap();
        let c = simulate_langevin(&mode, None, &settings, 12).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.samples, c.samples);
    }

    #[test]
    fn driven_steady_state_matches_response() {
        let mode = beam(0.0);
        let drive = DriveSpec::new(1.0, 1e-3, mode.omega_m).unwrap();
        let dcd = af_per_um(0.2);
        let settings = LangevinSettings { duration: 30.0 / mode.gamma_m(), dt: max_step(&mode), record_every: 1 };
        let traj = simulate_langevin(&mode, Some((drive, dcd)), &settings, 0).unwrap();
        let (amp, _) = driven_response(&mode, electrostatic_force(&drive, dcd), drive.omega_drive);
        // last cycles: peak |x| approaches the steady-state amplitude
        let tail = &traj.samples[traj.samples.len() - 500..];
        let peak = tail.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        assert!(rel(peak, amp) < 0.01, "{peak} vs {amp}");
    }

    #[test]
    fn decimation_keeps_sample_interval_consistent() {
        let mode = beam(0.1);
        let settings = LangevinSettings { duration: 10.0 / mode.gamma_m(), dt: max_step(&mode), record_every: 4 };
        let traj = simulate_langevin(&mode, None, &settings, 3).unwrap();
        assert!(rel(traj.dt, 4.0 * max_step(&mode)) < 1e-15);
    }
}
