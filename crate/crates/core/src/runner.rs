//! Batch workflows behind the `cavimeter` binary.
//!
//! Each workflow returns its artifacts in memory together with a
//! [`RunManifest`]; [`write_outputs`] commits them to disk only after the
//! whole run has succeeded. Sweep points draw their seeds from
//! [`point_seed`], so results do not depend on execution order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::config::Scenario;
use crate::error::{Error, Result};
use crate::export;
use crate::mechanics::{
    driven_response, electrostatic_force, max_step, simulate_langevin, LangevinSettings, Trajectory,
};
use crate::model::{CavityParams, MechanicalMode};
use crate::projection::{
    intersection_power, intersection_power_bisection, minimum_total_uncertainty, projection_table, ProjectionRow,
    ProjectionScenario,
};
use crate::readout::{
    bin_width, forward_spectrum, nearest_bin, volts_to_cavity_freq_psd, DriveTone, ForwardOptions, MotionSource,
    ReadoutChain, SpectrumStatistics,
};
use crate::spectral::{
    budget, fit_lorentzian, imprecision_temperature, integrate_lorentzian, saturation_temperature,
    temperature_sweep_fit, welch_psd, LorentzianFit, NoiseBudget, SweepPoint, TemperatureSweepResult,
};
use crate::spectrum::{linear_grid, SpectrumSeries, SpectrumUnits};
use crate::units::{khz_per_nm, mk, to_hz, to_khz_per_nm};

/// Periodogram averages used when neither the config nor the command line
/// sets them and no Welch estimate fixes the count.
pub const DEFAULT_AVERAGES: u32 = 100;

/// SplitMix64 finalizer of `master` advanced by `index + 1` golden-ratio
/// increments.
pub fn point_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    // keep seeds inside the range a scenario file can hold
    (z ^ (z >> 31)) >> 1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Parallel,
    Serial,
}

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunContext {
    pub seed: Option<u64>,
    pub averages: Option<u32>,
    pub execution: Execution,
}

impl RunContext {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(usize, &T) -> R + Sync + Send,
    {
        match self.execution {
            Execution::Parallel => items.par_iter().enumerate().map(|(i, t)| f(i, t)).collect(),
            Execution::Serial => items.iter().enumerate().map(|(i, t)| f(i, t)).collect(),
        }
    }
}

/// Quantities computed from a scenario, recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Derived {
    pub q_total: f64,
    pub gamma_c_hz: f64,
    pub gamma_m_hz: f64,
    pub spring_constant_n_per_m: f64,
    pub g_khz_per_nm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputFile {
    pub file: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// Scenario with the effective seed and averages filled in; feeding it
    /// back through `--config` repeats the run.
    pub scenario: Scenario,
    pub derived: Derived,
    pub outputs: Vec<OutputFile>,
    pub wall_clock_s: f64,
}

#[derive(Debug, Clone)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub artifacts: Vec<Artifact>,
    pub manifest: RunManifest,
}

impl RunOutput {
    fn new(command: &str, scenario: Scenario, mut artifacts: Vec<Artifact>, started: Instant) -> Result<Self> {
        let snapshot = scenario.to_toml_string()?;
        artifacts.push(Artifact { name: "scenario.toml".into(), contents: snapshot });
        let derived = derived(&scenario)?;
        let outputs = artifacts.iter().map(|a| OutputFile { file: a.name.clone(), bytes: a.contents.len() }).collect();
        Ok(RunOutput {
            artifacts,
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME").into(),
                version: env!("CARGO_PKG_VERSION").into(),
                command: command.into(),
                scenario,
                derived,
                outputs,
                wall_clock_s: started.elapsed().as_secs_f64(),
            },
        })
    }

    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }
}

pub fn derived(scenario: &Scenario) -> Result<Derived> {
    let cavity = scenario.cavity_params()?;
    let mode = scenario.mode()?;
    Ok(Derived {
        q_total: cavity.total_q(),
        gamma_c_hz: to_hz(cavity.linewidth()),
        gamma_m_hz: to_hz(mode.gamma_m()),
        spring_constant_n_per_m: mode.spring_constant(),
        g_khz_per_nm: to_khz_per_nm(scenario.coupling_model(&cavity)?.g),
    })
}

fn io_err(path: &Path, e: std::io::Error) -> Error {
    Error::Io(format!("{}: {e}", path.display()))
}

/// Writes every artifact and `manifest.json` into `dir`.
///
/// Files are staged under temporary names and renamed once all of them
/// have been written, so a failed run leaves no partial outputs.
pub fn write_outputs(dir: &Path, output: &RunOutput) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let manifest = serde_json::to_string_pretty(&output.manifest).map_err(|e| Error::Io(e.to_string()))? + "\n";
    let mut files: Vec<(&str, &str)> =
        output.artifacts.iter().map(|a| (a.name.as_str(), a.contents.as_str())).collect();
    files.push(("manifest.json", &manifest));

    let mut staged = Vec::new();
    let cleanup = |staged: &[(PathBuf, PathBuf)]| {
        for (tmp, _) in staged {
            let _ = std::fs::remove_file(tmp);
        }
    };
    for (name, contents) in &files {
        let tmp = dir.join(format!(".{name}.tmp"));
        if let Err(e) = std::fs::write(&tmp, contents) {
            cleanup(&staged);
            return Err(io_err(&tmp, e));
        }
        staged.push((tmp, dir.join(name)));
    }
    for (tmp, dest) in &staged {
        std::fs::rename(tmp, dest).map_err(|e| io_err(dest, e))?;
    }
    Ok(staged.into_iter().map(|(_, d)| d).collect())
}

fn statistics(averages: u32) -> SpectrumStatistics {
    if averages == 0 {
        SpectrumStatistics::Expected
    } else {
        SpectrumStatistics::Periodogram { averages }
    }
}

fn langevin_settings(scenario: &Scenario, mode: &MechanicalMode) -> Result<LangevinSettings> {
    let duration = scenario
        .run
        .duration_s
        .ok_or_else(|| Error::Config("[run] duration_s is required for Langevin runs".into()))?;
    Ok(LangevinSettings {
        duration,
        dt: scenario.run.dt_s.unwrap_or_else(|| max_step(mode)),
        record_every: scenario.run.record_every,
    })
}

/// Langevin record of `mode` under the scenario's run settings and drive.
pub fn simulate_trajectory(scenario: &Scenario, mode: &MechanicalMode, seed: u64) -> Result<Trajectory> {
    let settings = langevin_settings(scenario, mode)?;
    let drive = match scenario.drive_spec()? {
        Some(d) => {
            let cavity = scenario.cavity_params()?;
            Some((d, scenario.coupling_model(&cavity)?.dcd_dx))
        }
        None => None,
    };
    simulate_langevin(mode, drive, &settings, seed)
}

/// Simulated motion at `mode`, Welch-estimated and cut to the analysis band.
fn simulated_motion(
    scenario: &Scenario,
    mode: &MechanicalMode,
    seed: u64,
) -> Result<(Trajectory, SpectrumSeries, u32)> {
    let trajectory = simulate_trajectory(scenario, mode, seed)?;
    let segment = (trajectory.sample_rate() / scenario.run.resolution_hz).round() as usize;
    let psd = welch_psd(&trajectory, segment, scenario.run.overlap)?;
    let segments = psd.metadata.get("segments").and_then(|s| s.parse().ok()).unwrap_or(1);
    let (lo, hi) = scenario.band_hz()?;
    let band = psd.window(lo, hi);
    if band.len() < 8 {
        return Err(Error::Grid(format!(
            "analysis band {lo:.1}-{hi:.1} Hz holds {} bins at {} Hz resolution",
            band.len(),
            scenario.run.resolution_hz
        )));
    }
    Ok((trajectory, band, segments))
}

/// Detected spectrum for an estimated motion PSD.
fn detect(
    chain: &ReadoutChain,
    mode: &MechanicalMode,
    motion: &SpectrumSeries,
    averages: u32,
    seed: u64,
) -> Result<crate::readout::DetectedSpectrum> {
    let options =
        ForwardOptions { motion: MotionSource::Estimated(motion), statistics: statistics(averages), seed, tone: None };
    forward_spectrum(chain, mode, &motion.frequencies, &options)
}

/// Cavity transmission sweep, Langevin trajectory, its Welch spectrum and
/// the detected quadrature spectrum at the configured probe power.
pub fn run_simulate(scenario: &Scenario, ctx: &RunContext) -> Result<RunOutput> {
    let started = Instant::now();
    let seed = scenario.seed(ctx.seed)?;
    let mode = scenario.mode()?;
    let cavity = scenario.cavity_params()?;
    let chain = scenario.chain_at(cavity.power_incident)?;
    let (trajectory, motion, segments) = simulated_motion(scenario, &mode, point_seed(seed, 0))?;
    let averages = ctx.averages.or(scenario.run.averages).unwrap_or(segments);
    let detected = detect(&chain, &mode, &motion, averages, point_seed(seed, 1))?;

    let meta = BTreeMap::from([
        ("master_seed".to_string(), seed.to_string()),
        ("temperature_k".to_string(), format!("{:e}", mode.temperature_bath)),
        ("omega_m_rad_s".to_string(), format!("{:e}", mode.omega_m)),
        ("mass_kg".to_string(), format!("{:e}", mode.mass)),
        ("q_m".to_string(), format!("{:e}", mode.q_m)),
    ]);
    let span = 5.0 * cavity.linewidth();
    let omegas = linear_grid(cavity.omega_c - span, cavity.omega_c + span, 401);
    let artifacts = vec![
        Artifact { name: "s21.csv".into(), contents: export::s21_csv(&crate::cavity::sweep(&cavity, &omegas)) },
        Artifact {
            name: "trajectory.csv".into(),
            contents: export::trajectory_csv(&trajectory, &meta, scenario.run.trajectory_rows),
        },
        Artifact { name: "displacement_psd.csv".into(), contents: export::spectrum_csv(&motion) },
        Artifact { name: "detected_spectrum.csv".into(), contents: export::detected_spectrum_csv(&detected, &meta) },
    ];
    let mut snapshot = scenario.clone();
    snapshot.run.seed = Some(seed);
    snapshot.run.averages = Some(averages);
    RunOutput::new("simulate", snapshot, artifacts, started)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationPoint {
    pub t_frig: f64,
    /// Bath temperature the beam actually equilibrated to, K.
    pub t_beam: f64,
    pub seed: u64,
    pub fit: LorentzianFit,
    /// Integrated cavity-frequency fluctuations, (rad/s)^2.
    pub delta_omega_c_sq: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationReport {
    pub points: Vec<CalibrationPoint>,
    pub sweep: TemperatureSweepResult,
    /// Temperatures left out of the linear fit, K.
    pub excluded: Vec<f64>,
    /// Beam temperature at the lowest fridge temperature, when that point
    /// falls below the fit window.
    pub t_sat: Option<f64>,
}

/// One temperature of the sweep, end to end: Langevin, Welch, detection,
/// conversion to cavity-frequency noise, Lorentzian fit and integration.
pub fn calibrate_point(
    scenario: &Scenario,
    chain: &ReadoutChain,
    t_frig: f64,
    seed: u64,
    averages: Option<u32>,
) -> Result<CalibrationPoint> {
    let floor = scenario.sweep.saturation_mk.map_or(0.0, mk);
    let t_beam = t_frig.max(floor);
    let mode = scenario.mode()?.with_temperature(t_beam);
    let (_, motion, segments) = simulated_motion(scenario, &mode, seed)?;
    let detected = detect(chain, &mode, &motion, averages.unwrap_or(segments), point_seed(seed, 0))?;
    let wc = volts_to_cavity_freq_psd(&detected, &chain.cavity, &chain.geometry)?;
    let (lo, hi) = (motion.frequencies[0], motion.frequencies[motion.len() - 1]);
    let fit = fit_lorentzian(&wc, (lo, hi))?;
    let delta_omega_c_sq = integrate_lorentzian(&fit)?;
    Ok(CalibrationPoint { t_frig, t_beam, seed, fit, delta_omega_c_sq })
}

/// Temperature-sweep calibration of `g`.
pub fn run_calibrate(scenario: &Scenario, ctx: &RunContext) -> Result<(RunOutput, CalibrationReport)> {
    let started = Instant::now();
    let seed = scenario.seed(ctx.seed)?;
    let temps = scenario.temperatures();
    let min_temp = mk(scenario.sweep.min_temp_mk);
    let in_window = temps.iter().filter(|t| **t >= min_temp).count();
    if in_window < 3 {
        return Err(Error::Config(format!(
            "[sweep] {in_window} temperatures at or above min_temp_mk = {}; need at least 3",
            scenario.sweep.min_temp_mk
        )));
    }
    let mode = scenario.mode()?;
    let chain = scenario.chain_at(scenario.cavity_params()?.power_incident)?;
    let averages = ctx.averages.or(scenario.run.averages);

    let results = ctx.map(&temps, |i, &t| {
        calibrate_point(scenario, &chain, t, point_seed(seed, i as u64), averages)
            .map_err(|e| Error::Calibration(format!("T_frig = {:.1} mK: {e}", t * 1e3)))
    });
    let points: Vec<CalibrationPoint> = results.into_iter().collect::<Result<_>>()?;
    let report = sweep_report(points, &mode, min_temp)?;

    let mut text = String::new();
    let kv = |out: &mut String, k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv(&mut text, "g_fit_khz_per_nm", format!("{:e}", to_khz_per_nm(report.sweep.g_fit)));
    kv(&mut text, "g_fit_rad_s_per_m", format!("{:e}", report.sweep.g_fit));
    kv(&mut text, "t_intercept_mk", format!("{:e}", report.sweep.t_intercept * 1e3));
    kv(&mut text, "min_temp_mk", format!("{:e}", min_temp * 1e3));
    let excluded: Vec<String> = report.excluded.iter().map(|t| format!("{:e}", t * 1e3)).collect();
    kv(&mut text, "excluded_mk", format!("[{}]", excluded.join(", ")));
    if let Some(t) = report.t_sat {
        kv(&mut text, "t_sat_mk", format!("{:e}", t * 1e3));
    }
    for p in &report.points {
        let _ = writeln!(
            text,
            "point = {:e} mK, seed {}, center {:e} Hz, fwhm {:e} Hz, dwc2 {:e} (rad/s)^2, converged {}",
            p.t_frig * 1e3,
            p.seed,
            to_hz(p.fit.center),
            to_hz(p.fit.fwhm_gamma),
            p.delta_omega_c_sq,
            p.fit.converged
        );
    }

    let artifacts = vec![
        Artifact { name: "sweep.csv".into(), contents: export::sweep_csv(&report.sweep) },
        Artifact { name: "calibration_report.txt".into(), contents: text },
    ];
    let mut snapshot = scenario.clone();
    snapshot.run.seed = Some(seed);
    snapshot.run.averages = averages;
    Ok((RunOutput::new("calibrate", snapshot, artifacts, started)?, report))
}

/// Linear fit over the window plus the saturation check on the points
/// below it.
pub fn sweep_report(points: Vec<CalibrationPoint>, mode: &MechanicalMode, min_temp: f64) -> Result<CalibrationReport> {
    let sweep_points: Vec<SweepPoint> =
        points.iter().map(|p| SweepPoint { t_frig: p.t_frig, delta_omega_c_sq: p.delta_omega_c_sq }).collect();
    let sweep = temperature_sweep_fit(&sweep_points, mode, min_temp)?;
    let excluded: Vec<f64> = sweep.residuals.iter().filter(|r| !r.used).map(|r| r.t_frig).collect();
    let t_sat =
        if excluded.is_empty() { None } else { Some(saturation_temperature(&sweep_points, sweep.g_fit, mode)?) };
    Ok(CalibrationReport { points, sweep, excluded, t_sat })
}

/// Noise budget across the configured probe powers at the base temperature,
/// using the calibrated `g`.
pub fn run_budget(scenario: &Scenario, ctx: &RunContext) -> Result<(RunOutput, Vec<(f64, NoiseBudget)>)> {
    let started = Instant::now();
    let g_cal =
        scenario.sweep.g_calibrated_khz_per_nm.map(khz_per_nm).ok_or_else(|| {
            Error::Config("[sweep] g_calibrated_khz_per_nm is required: run `calibrate` first".into())
        })?;
    let powers = scenario.powers();
    if powers.is_empty() {
        return Err(Error::Config("[sweep] powers_pw is empty".into()));
    }
    let seed = scenario.seed(ctx.seed)?;
    let averages = ctx.averages.or(scenario.run.averages).unwrap_or(DEFAULT_AVERAGES);
    let mode = scenario.mode()?;
    let floor = scenario.sweep.saturation_mk.map_or(0.0, mk);
    let beam = mode.with_temperature(mode.temperature_bath.max(floor));
    let (lo, hi) = scenario.band_hz()?;
    let n = ((hi - lo) / scenario.run.resolution_hz).round() as usize + 1;
    let grid = linear_grid(lo, hi, n.max(8));

    let rows = ctx.map(&powers, |i, &p| -> Result<(f64, NoiseBudget)> {
        let chain = scenario.chain_at(p)?;
        let options = ForwardOptions {
            motion: MotionSource::Thermal,
            statistics: statistics(averages),
            seed: point_seed(seed, i as u64),
            tone: None,
        };
        let detected = forward_spectrum(&chain, &beam, &grid, &options)?;
        let wc = volts_to_cavity_freq_psd(&detected, &chain.cavity, &chain.geometry)?;
        let fit =
            fit_lorentzian(&wc, (lo, hi)).map_err(|e| Error::Calibration(format!("P = {:.1} pW: {e}", p * 1e12)))?;
        let area = integrate_lorentzian(&fit)?;
        let t_im = imprecision_temperature(fit.background / (g_cal * g_cal), &mode);
        let base = SweepPoint { t_frig: mode.temperature_bath, delta_omega_c_sq: area };
        let t_sat = saturation_temperature(&[base], g_cal, &mode)?;
        Ok((p, budget(t_im, t_sat, &mode)))
    });
    let rows: Vec<(f64, NoiseBudget)> = rows.into_iter().collect::<Result<_>>()?;

    let artifacts = vec![Artifact { name: "budget.csv".into(), contents: export::budget_csv(&rows) }];
    let mut snapshot = scenario.clone();
    snapshot.run.seed = Some(seed);
    snapshot.run.averages = Some(averages);
    Ok((RunOutput::new("budget", snapshot, artifacts, started)?, rows))
}

pub fn projection_scenario(scenario: &Scenario) -> Result<ProjectionScenario> {
    let powers = scenario.powers();
    if powers.is_empty() {
        return Err(Error::Config("[sweep] powers_pw is empty: nothing to project".into()));
    }
    let cavity: CavityParams = scenario.cavity_params()?;
    let g = scenario.coupling_model(&cavity)?.g;
    ProjectionScenario::new(cavity, scenario.mode()?, g, scenario.noise.t_n_k, powers)
        .map_err(|e| Error::Config(format!("projection: {e}")))
}

/// Quantum-limit projection table; deterministic, no seed needed.
pub fn run_project(scenario: &Scenario) -> Result<(RunOutput, Vec<ProjectionRow>)> {
    let started = Instant::now();
    let projection = projection_scenario(scenario)?;
    let rows = projection_table(&projection)?;
    let crossing = intersection_power(&projection);
    let bisected = intersection_power_bisection(&projection)?;
    let minimum = minimum_total_uncertainty(&projection);
    let mut text = String::new();
    let _ = writeln!(text, "intersection_power_w = {crossing:e}");
    let _ = writeln!(text, "intersection_power_bisection_w = {bisected:e}");
    let _ = writeln!(text, "amplifier_quanta = {:e}", projection.amplifier_quanta());
    let _ = writeln!(text, "minimum_power_w = {:e}", minimum.power);
    let _ = writeln!(text, "minimum_total_m2hz = {:e}", minimum.total);
    let _ = writeln!(text, "minimum_ratio_to_sql_linear = {:e}", minimum.linear_ratio_to_sql);
    let artifacts = vec![
        Artifact { name: "projection.csv".into(), contents: export::projection_csv(&rows) },
        Artifact { name: "projection_report.txt".into(), contents: text },
    ];
    Ok((RunOutput::new("project", scenario.clone(), artifacts, started)?, rows))
}

/// Fits a Lorentzian to a measured spectrum. `window` in Hz; the whole
/// spectrum when absent.
pub fn run_fit(
    scenario: Option<&Scenario>,
    spectrum: &SpectrumSeries,
    window: Option<(f64, f64)>,
) -> Result<(Vec<Artifact>, LorentzianFit)> {
    let window = match (window, scenario) {
        (Some(w), _) => w,
        (None, Some(s)) if s.run.band_khz.is_some() => s.band_hz()?,
        _ => match (spectrum.frequencies.first(), spectrum.frequencies.last()) {
            (Some(a), Some(b)) => (*a, *b),
            _ => return Err(Error::InsufficientData("empty spectrum".into())),
        },
    };
    let fit = fit_lorentzian(spectrum, window)?;
    let selected = spectrum.window(window.0, window.1);
    let extra = vec![
        ("window_lo_hz", format!("{:e}", window.0)),
        ("window_hi_hz", format!("{:e}", window.1)),
        ("area", integrate_lorentzian(&fit).map_or("unavailable".into(), |a| format!("{a:e}"))),
    ];
    let artifacts = vec![
        Artifact { name: "fit_report.txt".into(), contents: export::fit_report(&fit, &extra) },
        Artifact { name: "fit_residuals.csv".into(), contents: export::residuals_csv(&selected, &fit) },
    ];
    Ok((artifacts, fit))
}

/// Wraps [`run_fit`] artifacts in a manifest.
pub fn run_fit_output(scenario: &Scenario, spectrum: &SpectrumSeries) -> Result<(RunOutput, LorentzianFit)> {
    let started = Instant::now();
    let (artifacts, fit) = run_fit(Some(scenario), spectrum, None)?;
    Ok((RunOutput::new("fit", scenario.clone(), artifacts, started)?, fit))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainEstimate {
    pub gain_factor: f64,
    /// Driven-peak power above background at each probe power, V^2.
    pub peak_low: f64,
    pub peak_high: f64,
}

/// Power of the drive tone above the local background, V^2.
fn driven_peak(scenario: &Scenario, averages: u32, seed: u64) -> Result<f64> {
    let drive = scenario
        .drive_spec()?
        .ok_or_else(|| Error::Calibration("gain calibration needs an electrostatic drive".into()))?;
    if drive.v_ac == 0.0 || drive.v_dc == 0.0 {
        return Err(Error::Calibration("drive is off (zero v_dc or v_ac)".into()));
    }
    let cavity = scenario.cavity_params()?;
    let chain = scenario.chain_at(cavity.power_incident)?;
    let mode = scenario.mode()?;
    let force = electrostatic_force(&drive, chain.coupling.dcd_dx);
    let (amplitude, _) = driven_response(&mode, force, drive.omega_drive);
    let (lo, hi) = scenario.band_hz()?;
    let n = ((hi - lo) / scenario.run.resolution_hz).round() as usize + 1;
    let grid = linear_grid(lo, hi, n.max(32));
    let options = ForwardOptions {
        motion: MotionSource::Thermal,
        statistics: statistics(averages),
        seed,
        tone: Some(DriveTone { amplitude, omega: drive.omega_drive }),
    };
    let detected = forward_spectrum(&chain, &mode, &grid, &options)?;
    let idx = nearest_bin(&grid, to_hz(drive.omega_drive));
    let mut neighbours: Vec<f64> = (3..=12)
        .flat_map(|k| [idx.checked_sub(k), Some(idx + k)])
        .flatten()
        .filter_map(|j| detected.s_v_q.get(j).copied())
        .collect();
    if neighbours.len() < 4 {
        return Err(Error::Calibration("drive tone too close to the band edge".into()));
    }
    neighbours.sort_by(f64::total_cmp);
    let background = neighbours[neighbours.len() / 2];
    let excess = detected.s_v_q[idx] - background;
    // detection threshold: well above the scatter of an averaged bin
    let scatter = background * (3.0 + 10.0 / (averages.max(1) as f64).sqrt());
    if !(excess > scatter) {
        return Err(Error::Calibration(format!(
            "drive peak not detected at {:.1} Hz (excess {excess:e} vs background {background:e} V^2/Hz)",
            to_hz(drive.omega_drive)
        )));
    }
    Ok(excess * bin_width(&grid, idx))
}

/// Compares the driven peak at a trusted low power with the same drive at a
/// high power. After removing the linear `P` scaling of the detected signal,
/// the remaining ratio is the squared gain error of the high-power readout.
pub fn calibrate_gain_via_drive(low: &Scenario, high: &Scenario, averages: u32, seed: u64) -> Result<GainEstimate> {
    if low.drive != high.drive {
        return Err(Error::Calibration("both scenarios must apply the identical drive".into()));
    }
    let p_low = low.cavity_params()?.power_incident;
    let p_high = high.cavity_params()?.power_incident;
    let peak_low = driven_peak(low, averages, point_seed(seed, 0))?;
    let peak_high = driven_peak(high, averages, point_seed(seed, 1))?;
    Ok(GainEstimate { gain_factor: ((peak_high / peak_low) * (p_low / p_high)).sqrt(), peak_low, peak_high })
}

/// `gaincal` workflow: `sweep.powers_pw = [low, high]`; the low point uses a
/// unit gain factor, the high point the configured `noise.gain_factor`.
pub fn run_gaincal(scenario: &Scenario, ctx: &RunContext) -> Result<(RunOutput, GainEstimate)> {
    let started = Instant::now();
    let seed = scenario.seed(ctx.seed)?;
    let averages = ctx.averages.or(scenario.run.averages).unwrap_or(DEFAULT_AVERAGES);
    let [p_low, p_high] = scenario.sweep.powers_pw[..] else {
        return Err(Error::Config("[sweep] gaincal needs powers_pw = [low, high]".into()));
    };
    let mut low = scenario.clone();
    low.cavity.power_pw = p_low;
    low.noise.gain_factor = 1.0;
    let mut high = scenario.clone();
    high.cavity.power_pw = p_high;
    let estimate = calibrate_gain_via_drive(&low, &high, averages, seed)?;
    let text = format!(
        "gain_factor = {:e}\npower_low_pw = {p_low:e}\npower_high_pw = {p_high:e}\npeak_low_v2 = {:e}\npeak_high_v2 = {:e}\n",
        estimate.gain_factor, estimate.peak_low, estimate.peak_high
    );
    let artifacts = vec![Artifact { name: "gaincal_report.txt".into(), contents: text }];
    let mut snapshot = scenario.clone();
    snapshot.run.seed = Some(seed);
    snapshot.run.averages = Some(averages);
    Ok((RunOutput::new("gaincal", snapshot, artifacts, started)?, estimate))
}

/// Reads a two-column spectrum file for `fit`.
pub fn read_spectrum(path: &Path) -> Result<SpectrumSeries> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    export::read_spectrum_csv(&text, SpectrumUnits::Arbitrary)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}
