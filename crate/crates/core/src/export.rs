//! Plot-ready CSV and report text.
//!
//! Writers return strings so callers can stage every artifact before
//! touching the filesystem. Metadata goes on leading `#` lines; the body
//! that follows is a single header row and numeric rows. Floats use Rust's
//! shortest round-trip exponent form, so equal inputs give equal bytes.

use std::collections::BTreeMap;
use std::fmt::Write;

use crate::cavity::TransmissionPoint;
use crate::error::{Error, Result};
use crate::mechanics::Trajectory;
use crate::projection::ProjectionRow;
use crate::readout::DetectedSpectrum;
use crate::spectral::{LorentzianFit, NoiseBudget, TemperatureSweepResult};
use crate::spectrum::{SpectrumSeries, SpectrumUnits};
use crate::units::to_hz;

fn meta_lines(out: &mut String, meta: &BTreeMap<String, String>) {
    for (k, v) in meta {
        let _ = writeln!(out, "# {k} = {v}");
    }
}

fn row(out: &mut String, values: &[f64]) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(',');
        }
        first = false;
        let _ = write!(out, "{v:e}");
    }
    out.push('\n');
}

/// Lines of `text` that are not `#` comments.
pub fn body(text: &str) -> String {
    text.lines().filter(|l| !l.starts_with('#')).flat_map(|l| [l, "\n"]).collect()
}

pub fn s21_csv(points: &[TransmissionPoint]) -> String {
    let mut out = String::from("omega_hz,re_s21,im_s21,mag_db,phase_rad\n");
    for p in points {
        row(&mut out, &[to_hz(p.omega), p.s21.re, p.s21.im, p.power_db(), p.phase()]);
    }
    out
}

/// At most `max_rows` leading samples are written; the header records the
/// full length.
pub fn trajectory_csv(trajectory: &Trajectory, meta: &BTreeMap<String, String>, max_rows: usize) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# seed = {}", trajectory.seed);
    let _ = writeln!(out, "# dt_s = {:e}", trajectory.dt);
    let _ = writeln!(out, "# samples_total = {}", trajectory.samples.len());
    meta_lines(&mut out, meta);
    out.push_str("t_s,x_m\n");
    for (i, x) in trajectory.samples.iter().take(max_rows).enumerate() {
        row(&mut out, &[i as f64 * trajectory.dt, *x]);
    }
    out
}

pub fn detected_spectrum_csv(spectrum: &DetectedSpectrum, meta: &BTreeMap<String, String>) -> String {
    let mut out = String::new();
    meta_lines(&mut out, &spectrum.metadata);
    meta_lines(&mut out, meta);
    out.push_str("nu_hz,s_v_q_v2hz\n");
    for (f, s) in spectrum.frequencies.iter().zip(&spectrum.s_v_q) {
        row(&mut out, &[*f, *s]);
    }
    out
}

fn value_column(units: SpectrumUnits) -> &'static str {
    match units {
        SpectrumUnits::Displacement => "s_x_m2hz",
        SpectrumUnits::CavityFrequency => "s_wc_rad2s2hz",
        SpectrumUnits::Voltage => "s_v_q_v2hz",
        SpectrumUnits::Phase => "s_phi_rad2hz",
        SpectrumUnits::Amplitude => "amplitude",
        SpectrumUnits::Arbitrary => "value",
    }
}

pub fn spectrum_csv(series: &SpectrumSeries) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# units = {}", series.units);
    meta_lines(&mut out, &series.metadata);
    let _ = writeln!(out, "nu_hz,{}", value_column(series.units));
    for (f, v) in series.frequencies.iter().zip(&series.values) {
        row(&mut out, &[*f, *v]);
    }
    out
}

/// Reads a two-column spectrum (`nu_hz,<value>`); `#` lines and a header row
/// are skipped.
pub fn read_spectrum_csv(text: &str, units: SpectrumUnits) -> Result<SpectrumSeries> {
    let mut freqs = Vec::new();
    let mut values = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut cols = line.split(',').map(str::trim);
        let (a, b) = match (cols.next(), cols.next()) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::Config(format!("line {}: expected two comma-separated columns", n + 1))),
        };
        match (a.parse::<f64>(), b.parse::<f64>()) {
            (Ok(f), Ok(v)) => {
                freqs.push(f);
                values.push(v);
            }
            _ if !header_seen && freqs.is_empty() => header_seen = true,
            _ => return Err(Error::Config(format!("line {}: cannot parse {line:?} as numbers", n + 1))),
        }
    }
    SpectrumSeries::new(freqs, values, units)
}

/// `key = value` report of a Lorentzian fit. Frequencies in Hz.
pub fn fit_report(fit: &LorentzianFit, extra: &[(&str, String)]) -> String {
    let err = fit.std_errors();
    let mut out = String::new();
    let mut kv = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    kv("model", format!("{:?}", fit.model).to_lowercase());
    kv("converged", fit.converged.to_string());
    kv("flag", fit.flag.map_or("none".into(), |f| format!("{f:?}")));
    kv("iterations", fit.iterations.to_string());
    kv("center_hz", format!("{:e}", to_hz(fit.center)));
    kv("center_err_hz", format!("{:e}", to_hz(err[0])));
    kv("fwhm_hz", format!("{:e}", to_hz(fit.fwhm_gamma)));
    kv("fwhm_err_hz", format!("{:e}", to_hz(err[1])));
    kv("peak", format!("{:e}", fit.peak));
    kv("peak_err", format!("{:e}", err[2]));
    kv("background", format!("{:e}", fit.background));
    kv("background_err", format!("{:e}", err[3]));
    kv("residual_rms", format!("{:e}", fit.residual_rms));
    for (k, v) in extra {
        kv(k, v.clone());
    }
    out
}

pub fn residuals_csv(spectrum: &SpectrumSeries, fit: &LorentzianFit) -> String {
    let mut out = String::from("nu_hz,data,model,residual\n");
    for ((f, y), r) in spectrum.frequencies.iter().zip(&spectrum.values).zip(fit.residuals(spectrum)) {
        row(&mut out, &[*f, *y, y - r, r]);
    }
    out
}

pub fn sweep_csv(result: &TemperatureSweepResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# g_fit_rad_s_per_m = {:e}", result.g_fit);
    let _ = writeln!(out, "# t_intercept_k = {:e}", result.t_intercept);
    let _ = writeln!(out, "# min_temp_k = {:e}", result.fit_window_min_temp);
    let _ = writeln!(out, "# excluded_points = {}", result.excluded());
    out.push_str("t_frig_k,dwc2_measured,dwc2_predicted,used\n");
    for r in &result.residuals {
        let _ = writeln!(out, "{:e},{:e},{:e},{}", r.t_frig, r.measured, r.predicted, u8::from(r.used));
    }
    out
}

pub fn budget_csv(rows: &[(f64, NoiseBudget)]) -> String {
    let mut out = String::from("power_w,t_im_k,t_sat_k,sx_ratio_linear,force_sens_n_rthz\n");
    for (p, b) in rows {
        row(&mut out, &[*p, b.t_im, b.t_sat, b.sql_ratio_linear, b.force_sensitivity]);
    }
    out
}

pub fn projection_csv(rows: &[ProjectionRow]) -> String {
    let mut out = String::from("power_w,sx_sn,sx_ba,sx_amp,t_ba_k\n");
    for r in rows {
        row(&mut out, &[r.power, r.sx_sn, r.sx_ba, r.sx_amp, r.t_ba]);
    }
    out
}
