use cavimeter::config::{DriveSection, Scenario};
use cavimeter::export::body;
use cavimeter::runner::*;
use cavimeter::spectral::{fit_lorentzian, LorentzianFit};
use cavimeter::units::*;
use cavimeter::{Error, K_B};

fn config(name: &str) -> Scenario {
    let path = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name);
    Scenario::from_path(&path).unwrap()
}

fn short_beam() -> Scenario {
    let mut s = config("beam_240khz.toml");
    s.run.duration_s = Some(1.0);
    s.run.trajectory_rows = 1000;
    s
}

fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}

#[test]
fn simulate_is_deterministic() {
    let s = short_beam();
    let ctx = RunContext::default();
    let a = run_simulate(&s, &ctx).unwrap();
    let b = run_simulate(&s, &ctx).unwrap();
    for name in ["s21.csv", "trajectory.csv", "displacement_psd.csv", "detected_spectrum.csv"] {
        assert_eq!(a.artifact(name).unwrap(), b.artifact(name).unwrap(), "{name}");
    }
    let other = run_simulate(&s, &RunContext { seed: Some(99), ..ctx }).unwrap();
    assert_ne!(body(a.artifact("trajectory.csv").unwrap()), body(other.artifact("trajectory.csv").unwrap()));
}

#[test]
fn simulate_peak_sits_at_resonance() {
    let mut s = short_beam();
    s.run.duration_s = Some(5.0);
    let out = run_simulate(&s, &RunContext::default()).unwrap();
    let psd = cavimeter::export::read_spectrum_csv(
        out.artifact("displacement_psd.csv").unwrap(),
        cavimeter::SpectrumUnits::Arbitrary,
    )
    .unwrap();
    let df = psd.resolution().unwrap();
    let (lo, hi) = s.band_hz().unwrap();
    let fit: LorentzianFit = fit_lorentzian(&psd, (lo, hi)).unwrap();
    assert!(fit.converged);
    assert!((to_hz(fit.center) - 240e3).abs() <= df, "center {} Hz", to_hz(fit.center));
    assert_eq!(out.artifact("trajectory.csv").unwrap().lines().filter(|l| !l.starts_with('#')).count(), 1001);
}

#[test]
fn still_cold_beam_gives_flat_noise() {
    let mut s = short_beam();
    s.mechanics.temperature_mk = 0.0;
    let out = run_simulate(&s, &RunContext::default()).unwrap();
    let detected = cavimeter::export::read_spectrum_csv(
        out.artifact("detected_spectrum.csv").unwrap(),
        cavimeter::SpectrumUnits::Arbitrary,
    )
    .unwrap();
    let chain = s.chain_at(s.cavity_params().unwrap().power_incident).unwrap();
    let averages = out.manifest.scenario.run.averages.unwrap() as f64;
    for (nu, v) in detected.frequencies.iter().zip(&detected.values) {
        let floor = chain.noise_floor(*nu).unwrap();
        assert!(rel(*v, floor) < 6.0 / averages.sqrt(), "bin at {nu} Hz");
    }
    let mean = detected.values.iter().sum::<f64>() / detected.len() as f64;
    assert!(rel(mean, chain.noise_floor(240e3).unwrap()) < 0.02);
}

#[test]
fn noiseless_sweep_inverts_exactly() {
    let s = config("beam_240khz.toml");
    let mode = s.mode().unwrap();
    let cavity = s.cavity_params().unwrap();
    let g = s.coupling_model(&cavity).unwrap().g;
    let dummy = fit_lorentzian(
        &cavimeter::SpectrumSeries::new(
            vec![1.0, 2.0, 3.0, 4.0, 5.0],
            vec![0.0, 1.0, 2.0, 1.0, 0.0],
            cavimeter::SpectrumUnits::Arbitrary,
        )
        .unwrap(),
        (0.0, 6.0),
    )
    .unwrap();
    let points: Vec<CalibrationPoint> = [0.13, 0.16, 0.2, 0.25, 0.3]
        .iter()
        .map(|&t| CalibrationPoint {
            t_frig: t,
            t_beam: t,
            seed: 0,
            fit: dummy.clone(),
            delta_omega_c_sq: g * g * K_B * t / mode.spring_constant(),
        })
        .collect();
    let report = sweep_report(points, &mode, 0.127).unwrap();
    assert!(rel(report.sweep.g_fit, g) < 1e-6);
    assert!(report.sweep.t_intercept.abs() < 1e-9);
    assert!(report.excluded.is_empty());
    assert!(report.t_sat.is_none());
}

#[test]
fn injected_saturation_is_flagged() {
    let mut s = config("beam_240khz.toml");
    s.run.duration_s = Some(4.0);
    s.sweep.saturation_mk = Some(80.0);
    s.sweep.temperatures_mk = vec![20.0, 50.0, 80.0, 130.0, 200.0, 300.0];
    let (out, report) = run_calibrate(&s, &RunContext::default()).unwrap();
    assert_eq!(report.excluded, vec![0.02, 0.05, 0.08]);
    assert!(report.points[..3].iter().all(|p| p.t_beam == 0.08));
    let t_sat = report.t_sat.unwrap();
    assert!(rel(t_sat, 0.08) < 0.25, "T_sat = {t_sat}");
    let text = out.artifact("calibration_report.txt").unwrap();
    assert!(text.contains("excluded_mk = [2e1, 5e1, 8e1]"), "{text}");
    assert!(text.contains("t_sat_mk = "));
}

#[test]
fn calibrate_needs_three_window_points() {
    let mut s = short_beam();
    s.sweep.temperatures_mk = vec![20.0, 130.0, 200.0];
    assert!(run_calibrate(&s, &RunContext::default()).unwrap_err().is_config());
}

#[test]
fn calibrate_order_independent() {
    let mut s = config("beam_240khz.toml");
    s.run.duration_s = Some(0.5);
    s.sweep.temperatures_mk = vec![130.0, 200.0, 300.0];
    let serial = run_calibrate(&s, &RunContext { execution: Execution::Serial, ..Default::default() }).unwrap();
    let parallel = run_calibrate(&s, &RunContext::default()).unwrap();
    assert_eq!(serial.1, parallel.1);
    assert_eq!(serial.0.artifact("sweep.csv"), parallel.0.artifact("sweep.csv"));

    // a point's result depends only on its own index
    let chain = s.chain_at(s.cavity_params().unwrap().power_incident).unwrap();
    let alone = calibrate_point(&s, &chain, 0.2, point_seed(s.run.seed.unwrap(), 1), None).unwrap();
    assert_eq!(alone, serial.1.points[1]);
}

fn amplifier_only() -> Scenario {
    let mut s = config("beam_240khz.toml");
    s.noise.a_tls = 0.0;
    s
}

fn log_slope(rows: &[(f64, cavimeter::spectral::NoiseBudget)]) -> f64 {
    let (p0, b0) = &rows[0];
    let (p1, b1) = &rows[rows.len() - 1];
    (b1.t_im / b0.t_im).ln() / (p1 / p0).ln()
}

#[test]
fn imprecision_falls_as_inverse_power() {
    let (_, rows) = run_budget(&amplifier_only(), &RunContext::default()).unwrap();
    assert_eq!(rows.len(), 7);
    let slope = log_slope(&rows);
    assert!((slope + 1.0).abs() < 0.1, "slope {slope}");
    let mode = amplifier_only().mode().unwrap();
    for (_, b) in &rows {
        assert!(b.heisenberg_ratio(&mode) >= 1.0);
    }
}

#[test]
fn tls_noise_lifts_high_power_imprecision() {
    let mut plain = amplifier_only();
    plain.run.averages = Some(0);
    let mut tls = config("beam_240khz.toml");
    tls.noise.a_tls = 1e-10;
    tls.run.averages = Some(0);
    let (_, base) = run_budget(&plain, &RunContext::default()).unwrap();
    let (_, lifted) = run_budget(&tls, &RunContext::default()).unwrap();
    let last = base.len() - 1;
    assert!(lifted[last].1.t_im > 1.5 * base[last].1.t_im);
    assert!(rel(lifted[0].1.t_im, base[0].1.t_im) < 0.05);
}

#[test]
fn zero_noise_budget_has_no_imprecision() {
    let mut s = config("beam_240khz.toml");
    s.noise.t_n_k = 0.0;
    s.noise.a_tls = 0.0;
    s.run.averages = Some(0);
    let (out, rows) = run_budget(&s, &RunContext::default()).unwrap();
    for (_, b) in &rows {
        assert!(b.t_im <= 1e-9 * b.t_sat, "T_im {}", b.t_im);
        assert!(rel(b.t_sat, 0.04 * 1.16f64.powi(-2) * 1.19f64.powi(2)) < 0.01, "T_sat {}", b.t_sat);
    }
    assert!(out
        .artifact("budget.csv")
        .unwrap()
        .starts_with("power_w,t_im_k,t_sat_k,sx_ratio_linear,force_sens_n_rthz\n"));
}

#[test]
fn budget_requires_calibration() {
    let mut s = config("beam_240khz.toml");
    s.sweep.g_calibrated_khz_per_nm = None;
    assert!(run_budget(&s, &RunContext::default()).unwrap_err().is_config());
    let mut s = config("beam_240khz.toml");
    s.sweep.powers_pw.clear();
    assert!(run_budget(&s, &RunContext::default()).is_err());
}

#[test]
fn shipped_projection_reproduces_crossing_and_factor() {
    let (out, rows) = run_project(&config("projection_optimized.toml")).unwrap();
    assert_eq!(rows.len(), 17);
    let report = out.artifact("projection_report.txt").unwrap();
    let value = |key: &str| -> f64 {
        report.lines().find_map(|l| l.strip_prefix(&format!("{key} = "))).unwrap().parse().unwrap()
    };
    assert!(rel(value("intersection_power_w"), 600e-12) < 0.05);
    assert!(rel(value("minimum_ratio_to_sql_linear"), 2.04) < 0.01);
    assert!(rel(value("intersection_power_bisection_w"), value("intersection_power_w")) < 1e-6);
}

#[test]
fn projection_grid_edge_cases() {
    let mut s = config("projection_optimized.toml");
    s.sweep.powers_pw.clear();
    assert!(run_project(&s).unwrap_err().is_config());
    s.sweep.powers_pw = vec![600.0];
    let (out, rows) = run_project(&s).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(body(out.artifact("projection.csv").unwrap()).lines().count(), 2);
    let mut lossy = config("projection_optimized.toml");
    lossy.cavity.q_int = cavimeter::InternalQ::Finite(1e5);
    assert!(run_project(&lossy).unwrap_err().is_config());
}

#[test]
fn gain_calibration_recovers_injected_gain() {
    let s = config("gain_calibration.toml");
    let (_, est) = run_gaincal(&s, &RunContext::default()).unwrap();
    assert!(rel(est.gain_factor, 0.7) < 0.03, "{}", est.gain_factor);

    let mut unity = s.clone();
    unity.noise.gain_factor = 1.0;
    for seed in 0..5 {
        let (_, est) = run_gaincal(&unity, &RunContext { seed: Some(seed), ..Default::default() }).unwrap();
        assert!((est.gain_factor - 1.0).abs() < 0.02, "{}", est.gain_factor);
    }
}

#[test]
fn gain_calibration_needs_a_drive() {
    let mut s = config("gain_calibration.toml");
    s.drive = None;
    assert!(matches!(run_gaincal(&s, &RunContext::default()), Err(Error::Calibration(_))));
    s.drive = Some(DriveSection { v_dc_v: 1.0, v_ac_uv: 0.0, drive_khz: None });
    assert!(matches!(run_gaincal(&s, &RunContext::default()), Err(Error::Calibration(_))));
    // a drive buried in the noise is not silently accepted
    s.drive = Some(DriveSection { v_dc_v: 1.0, v_ac_uv: 1.0, drive_khz: Some(241.0) });
    assert!(matches!(run_gaincal(&s, &RunContext::default()), Err(Error::Calibration(_))));
}

#[test]
fn fit_workflow_reports_and_residuals() {
    let s = config("beam_240khz.toml");
    let mode = s.mode().unwrap();
    let freqs = cavimeter::spectrum::linear_grid(239e3, 241e3, 401);
    let values = freqs
        .iter()
        .map(|f| 1e-25 + cavimeter::mechanics::thermal_displacement_psd(&mode, hz(*f) - mode.omega_m))
        .collect();
    let spectrum = cavimeter::SpectrumSeries::new(freqs, values, cavimeter::SpectrumUnits::Displacement).unwrap();
    let (out, fit) = run_fit_output(&s, &spectrum).unwrap();
    assert!(fit.converged);
    assert!(rel(fit.fwhm_gamma, mode.gamma_m()) < 1e-6);
    let report = out.artifact("fit_report.txt").unwrap();
    assert!(report.contains("converged = true"));
    assert_eq!(body(out.artifact("fit_residuals.csv").unwrap()).lines().count(), 402);
}
