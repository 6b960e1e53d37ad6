//! Damped Gauss-Newton (Levenberg-Marquardt) fits of
//! `B + S0 / (1 + 4 (w - w_m)^2 / gamma^2)` to a spectral peak, or of its
//! square root to a driven amplitude sweep.
//!
//! Fits are unweighted. Parameters are kept physical by projection
//! (`gamma > 0`, `S0 >= 0`, `B >= 0`). A fit that stops before the relative
//! step falls below `1e-9` is returned with `converged = false`; it is never
//! silently accepted.

use nalgebra::{Matrix4, Vector4};

use crate::error::{Error, Result};
use crate::spectrum::SpectrumSeries;
use crate::units::hz;

const MAX_ITERATIONS: usize = 200;
const STEP_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// Fit the spectrum values directly.
    Power,
    /// Fit `sqrt` of the model to amplitude data.
    SqrtPower,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitFlag {
    MaxIterations,
    /// The data hold a dip or no peak above the median.
    NegativePeak,
    /// Damping grew without finding a lower cost.
    Stalled,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LorentzianFit {
    /// rad/s
    pub center: f64,
    /// Full width at half maximum, rad/s.
    pub fwhm_gamma: f64,
    /// Height above background, in the spectrum's (squared, for
    /// [`FitModel::SqrtPower`]) units.
    pub peak: f64,
    pub background: f64,
    /// Parameter covariance in the order (center, gamma, peak, background).
    pub covariance: Matrix4<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub flag: Option<FitFlag>,
    pub model: FitModel,
    pub residual_rms: f64,
}

impl LorentzianFit {
    /// Model value at angular frequency `omega`.
    pub fn evaluate(&self, omega: f64) -> f64 {
        let p = Vector4::new(self.center, self.fwhm_gamma, self.peak, self.background);
        let m = power_model(&p, omega);
        match self.model {
            FitModel::Power => m,
            FitModel::SqrtPower => m.max(0.0).sqrt(),
        }
    }

    /// `data - model` on the spectrum's grid.
    pub fn residuals(&self, spectrum: &SpectrumSeries) -> Vec<f64> {
        spectrum.frequencies.iter().zip(&spectrum.values).map(|(f, y)| y - self.evaluate(hz(*f))).collect()
    }

    /// One-sigma parameter uncertainties (center, gamma, peak, background).
    pub fn std_errors(&self) -> [f64; 4] {
        std::array::from_fn(|i| self.covariance[(i, i)].max(0.0).sqrt())
    }
}

/// Fits the power-domain Lorentzian within `window` (Hz, inclusive).
pub fn fit_lorentzian(spectrum: &SpectrumSeries, window: (f64, f64)) -> Result<LorentzianFit> {
    fit(spectrum, window, FitModel::Power)
}

/// Fits `sqrt(B + S0 / (1 + 4 delta^2 / gamma^2))` to amplitude data.
pub fn fit_sqrt_lorentzian(amplitude_sweep: &SpectrumSeries, window: (f64, f64)) -> Result<LorentzianFit> {
    fit(amplitude_sweep, window, FitModel::SqrtPower)
}

/// Area under the fitted peak, `S0 * gamma / 4`, excluding the background.
/// Units are the spectrum's units times Hz.
pub fn integrate_lorentzian(fit: &LorentzianFit) -> Result<f64> {
    if !fit.converged {
        return Err(Error::Fit(format!("cannot integrate an unconverged fit ({:?})", fit.flag)));
    }
    Ok(fit.peak * fit.fwhm_gamma / 4.0)
}

fn power_model(p: &Vector4<f64>, omega: f64) -> f64 {
    let u = 2.0 * (omega - p[0]) / p[1];
    p[3] + p[2] / (1.0 + u * u)
}

/// Model value and gradient with respect to (center, gamma, peak, background).
fn power_model_grad(p: &Vector4<f64>, omega: f64) -> (f64, Vector4<f64>) {
    let (center, gamma, peak, bg) = (p[0], p[1], p[2], p[3]);
    let u = 2.0 * (omega - center) / gamma;
    let l = 1.0 / (1.0 + u * u);
    let l2 = l * l;
    let value = bg + peak * l;
    let grad = Vector4::new(4.0 * peak * u * l2 / gamma, 2.0 * peak * u * u * l2 / gamma, l, 1.0);
    (value, grad)
}

fn model_grad(model: FitModel, p: &Vector4<f64>, omega: f64) -> (f64, Vector4<f64>) {
    let (m, g) = power_model_grad(p, omega);
    match model {
        FitModel::Power => (m, g),
        FitModel::SqrtPower => {
            let a = m.max(0.0).sqrt();
            if a > 0.0 {
                (a, g / (2.0 * a))
            } else {
                (0.0, Vector4::zeros())
            }
        }
    }
}

fn cost(model: FitModel, p: &Vector4<f64>, x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(&w, &v)| {
            let m = power_model(p, w);
            let m = match model {
                FitModel::Power => m,
                FitModel::SqrtPower => m.max(0.0).sqrt(),
            };
            (v - m) * (v - m)
        })
        .sum()
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Moving average over `width` bins (odd), centered; edge bins use the
/// available part of the window.
fn boxcar(values: &[f64], width: usize) -> Vec<f64> {
    let half = width / 2;
    let mut prefix = vec![0.0; values.len() + 1];
    for (i, v) in values.iter().enumerate() {
        prefix[i + 1] = prefix[i] + v;
    }
    (0..values.len())
        .map(|i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect()
}

/// Initial parameters from a matched-filter search: the data are smoothed
/// with boxcars of 1, 3, 5, 9, ... bins and the width that maximizes
/// `height * sqrt(width)` locates the peak, so isolated noise spikes do not
/// win over a broad, low peak. Center at the smoothed maximum, background at
/// the median, width from the half-maximum run. The second value is false
/// when the data hold no peak, or a dip deeper than the peak.
fn initial_guess(x: &[f64], power: &[f64]) -> (Vector4<f64>, bool) {
    let base = median(power);
    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut width = 1;
    while width == 1 || width * 3 <= power.len() {
        let smooth = boxcar(power, width);
        let vmax = smooth.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let score = (vmax - base) * (width as f64).sqrt();
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, smooth));
        }
        width = if width == 1 { 3 } else { 2 * width - 1 };
    }
    let (_, smooth) = best.expect("at least one width is tried");
    let (imax, &vmax) = smooth.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    let height = vmax - base;
    let half = base + 0.5 * height;
    let mut lo = imax;
    while lo > 0 && smooth[lo - 1] > half {
        lo -= 1;
    }
    let mut hi = imax;
    while hi + 1 < smooth.len() && smooth[hi + 1] > half {
        hi += 1;
    }
    let spacing = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let width = ((hi - lo + 1) as f64 * spacing).max(spacing);
    let depth = base - smooth.iter().copied().fold(f64::INFINITY, f64::min);
    (Vector4::new(x[imax], width, height.max(0.0), base.max(0.0)), height > 0.0 && height > depth)
}

fn fit(spectrum: &SpectrumSeries, window: (f64, f64), model: FitModel) -> Result<LorentzianFit> {
    let (x, y): (Vec<f64>, Vec<f64>) = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.values)
        .filter(|(f, _)| **f >= window.0 && **f <= window.1)
        .map(|(f, v)| (hz(*f), *v))
        .unzip();
    if x.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "{} bins in the fit window [{}, {}] Hz; need at least 5",
            x.len(),
            window.0,
            window.1
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::Fit("non-finite data in the fit window".into()));
    }

    // work on data normalized to unit maximum
    let y_scale = y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if y_scale == 0.0 {
        return Err(Error::Fit("all-zero data in the fit window".into()));
    }
    let y: Vec<f64> = y.iter().map(|v| v / y_scale).collect();
    let power_scale = match model {
        FitModel::Power => y_scale,
        FitModel::SqrtPower => y_scale * y_scale,
    };
    let power: Vec<f64> = match model {
        FitModel::Power => y.clone(),
        FitModel::SqrtPower => y.iter().map(|a| a * a).collect(),
    };
    let (mut p, has_peak) = initial_guess(&x, &power);
    let n = x.len();

    if !has_peak {
        return Ok(LorentzianFit {
            center: p[0],
            fwhm_gamma: p[1],
            peak: 0.0,
            background: p[3] * power_scale,
            covariance: Matrix4::zeros(),
            converged: false,
            iterations: 0,
            flag: Some(FitFlag::NegativePeak),
            model,
            residual_rms: (cost(model, &p, &x, &y) / n as f64).sqrt() * y_scale,
        });
    }

    // step tolerance scale per parameter
    let scale = |p: &Vector4<f64>| {
        let s0 = p[2].abs().max(f64::MIN_POSITIVE);
        Vector4::new(p[1], p[1], s0, p[3].abs().max(1e-6 * s0))
    };

    let mut current = cost(model, &p, &x, &y);
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut flag = None;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let s = scale(&p);
        let mut jtj = Matrix4::zeros();
        let mut jtr = Vector4::zeros();
        for (&w, &v) in x.iter().zip(&y) {
            let (m, g) = model_grad(model, &p, w);
            let gs = g.component_mul(&s);
            jtj += gs * gs.transpose();
            jtr += gs * (v - m);
        }

        let mut accepted = None;
        while lambda < 1e16 {
            let floor = 1e-12 * (0..4).map(|i| jtj[(i, i)]).fold(0.0, f64::max);
            let mut lhs = jtj;
            for i in 0..4 {
                lhs[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let Some(delta) = lhs.lu().solve(&jtr) else {
                lambda *= 10.0;
                continue;
            };
            let mut trial = p + delta.component_mul(&s);
            if trial[1] <= 0.0 {
                trial[1] = 0.5 * p[1];
            }
            trial[2] = trial[2].max(0.0);
            trial[3] = trial[3].max(0.0);
            let trial_cost = cost(model, &trial, &x, &y);
            if trial_cost <= current {
                accepted = Some((trial, trial_cost));
                lambda = (lambda / 10.0).max(1e-12);
                break;
            }
            lambda *= 10.0;
        }

        let Some((trial, trial_cost)) = accepted else {
            // no decrease at any damping: already at the minimum to rounding
            let gradient_small = jtr.norm() <= 1e-8 * (jtj.norm() * current.max(f64::MIN_POSITIVE)).sqrt();
            converged = gradient_small || current == 0.0;
            if !converged {
                flag = Some(FitFlag::Stalled);
            }
            break;
        };
        let step = (trial - p).component_div(&s).amax();
        p = trial;
        current = trial_cost;
        if step < STEP_TOLERANCE {
            converged = true;
            break;
        }
    }
    if !converged && flag.is_none() {
        flag = Some(FitFlag::MaxIterations);
    }
    if p[2] <= 0.0 {
        converged = false;
        flag = Some(FitFlag::NegativePeak);
    }

    let mut jtj = Matrix4::zeros();
    for &w in &x {
        let (_, g) = model_grad(model, &p, w);
        jtj += g * g.transpose();
    }
    let dof = (n as f64 - 4.0).max(1.0);
    let mut covariance = jtj.try_inverse().map(|inv| inv * (current / dof)).unwrap_or_else(Matrix4::zeros);
    let unscale = Vector4::new(1.0, 1.0, power_scale, power_scale);
    covariance = Matrix4::from_diagonal(&unscale) * covariance * Matrix4::from_diagonal(&unscale);

    Ok(LorentzianFit {
        center: p[0],
        fwhm_gamma: p[1],
        peak: p[2] * power_scale,
        background: p[3] * power_scale,
        covariance,
        converged,
        iterations,
        flag,
        model,
        residual_rms: (current / n as f64).sqrt() * y_scale,
    })
}
