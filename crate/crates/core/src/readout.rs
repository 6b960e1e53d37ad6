//! From beam motion to detected quadrature-voltage spectra and back.
//!
//! Forward model for a bin at frequency `nu`:
//!
//! `S_V^Q = G^2 R^2 g^2 S_x / F(nu) + V_0^2 (S_phi^amp + S_phi^TLS)`
//!
//! with `R` the quadrature responsivity, `F` the sideband filter factor and
//! `G` an unknown gain perturbation standing in for the high-power cavity
//! nonlinearity. Phase noise is referenced to the off-resonance carrier
//! `V_0` and the incident power.
//!
//! [`volts_to_cavity_freq_psd`] inverts the signal part bin by bin:
//! `S_wc = w_c^2 F / ((2Q)^2 V_0^2 (1 - S_min)^2) * S_V^Q`.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};

use crate::cavity::{quadrature_responsivity, sideband_filter_factor, ReadoutGeometry};
use crate::error::{ensure, Error, Result};
use crate::mechanics::thermal_displacement_psd;
use crate::model::{CavityParams, CouplingModel, MechanicalMode, K_B};
use crate::spectrum::{validate_grid, SpectrumSeries, SpectrumUnits};
use crate::units::hz;

/// Detector and cavity noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseModel {
    /// Amplifier noise temperature, K.
    pub t_n: f64,
    /// TLS phase noise at 1 Hz, rad^2/Hz.
    pub a_tls: f64,
    pub tls_exponent: f64,
    /// Multiplicative responsivity error; 1 in the linear regime.
    pub gain_factor: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel { t_n: 0.0, a_tls: 0.0, tls_exponent: 0.5, gain_factor: 1.0 }
    }
}

impl NoiseModel {
    pub fn new(t_n: f64, a_tls: f64, tls_exponent: f64, gain_factor: f64) -> Result<Self> {
        let model = NoiseModel { t_n, a_tls, tls_exponent, gain_factor };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        ensure(self.t_n >= 0.0, || format!("t_n must be non-negative, got {}", self.t_n))?;
        ensure(self.a_tls >= 0.0, || format!("a_tls must be non-negative, got {}", self.a_tls))?;
        ensure(self.tls_exponent > 0.0 && self.tls_exponent < 2.0, || {
            format!("tls_exponent must lie in (0, 2), got {}", self.tls_exponent)
        })?;
        ensure(self.gain_factor.is_finite(), || "gain_factor must be finite".into())
    }
}

/// White amplifier phase floor `k_b T_N / P`, rad^2/Hz.
pub fn amplifier_phase_floor(t_n: f64, power_at_detector: f64) -> Result<f64> {
    if !(power_at_detector > 0.0) {
        return Err(Error::Domain(format!("detector power must be positive, got {power_at_detector}")));
    }
    Ok(K_B * t_n / power_at_detector)
}

/// Two-level-fluctuator phase noise `a_tls * nu^-exponent`, rad^2/Hz.
pub fn tls_phase_noise(model: &NoiseModel, nu: f64) -> Result<f64> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("TLS noise needs a positive frequency, got {nu}")));
    }
    Ok(model.a_tls * nu.powf(-model.tls_exponent))
}

/// Frequency below which TLS noise exceeds the amplifier floor.
pub fn tls_crossover(model: &NoiseModel, power: f64) -> f64 {
    (model.a_tls * power / (K_B * model.t_n)).powf(1.0 / model.tls_exponent)
}

/// Everything between the beam and the mixer output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutChain {
    pub cavity: CavityParams,
    pub coupling: CouplingModel,
    pub geometry: ReadoutGeometry,
    pub noise: NoiseModel,
}

impl ReadoutChain {
    pub fn responsivity(&self) -> f64 {
        quadrature_responsivity(&self.geometry, &self.cavity)
    }

    /// Signal-path filter factor at analysis frequency `nu` (Hz).
    pub fn filter_at(&self, nu: f64) -> f64 {
        filter_for(&self.geometry, &self.cavity, nu)
    }

    /// Total phase noise at `nu` (Hz), rad^2/Hz.
    pub fn phase_noise(&self, nu: f64) -> Result<f64> {
        let amp =
            if self.noise.t_n > 0.0 { amplifier_phase_floor(self.noise.t_n, self.cavity.power_incident)? } else { 0.0 };
        let tls = if self.noise.a_tls > 0.0 { tls_phase_noise(&self.noise, nu)? } else { 0.0 };
        Ok(amp + tls)
    }

    /// Voltage-referred noise floor at `nu`, V^2/Hz.
    pub fn noise_floor(&self, nu: f64) -> Result<f64> {
        Ok(self.geometry.v0 * self.geometry.v0 * self.phase_noise(nu)?)
    }

    /// Converts a displacement PSD value at `nu` to V^2/Hz (signal only).
    pub fn signal_gain(&self, nu: f64) -> f64 {
        let r = self.noise.gain_factor * self.responsivity() * self.coupling.g;
        r * r / self.filter_at(nu)
    }
}

/// On resonance the filter is evaluated at the sideband offset `2 pi nu`.
/// A detuned probe places one sideband on resonance, so the relevant offset
/// becomes `2 pi nu - |detuning|`.
fn filter_for(geometry: &ReadoutGeometry, cavity: &CavityParams, nu: f64) -> f64 {
    let offset = hz(nu) - geometry.detuning.abs();
    sideband_filter_factor(offset, cavity.linewidth())
}

/// What the beam is doing in the simulated spectrum.
#[derive(Debug, Clone, Copy)]
pub enum MotionSource<'a> {
    /// Analytic thermal Lorentzian of the mode.
    Thermal,
    /// A displacement PSD already estimated on the same grid.
    Estimated(&'a SpectrumSeries),
    /// No motion; noise only.
    Still,
}

/// How bin values are drawn.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumStatistics {
    /// Expected (noiseless) spectrum.
    Expected,
    /// Each stochastic bin scaled by the mean of `averages` independent unit
    /// exponentials, as for an averaged periodogram of Gaussian noise.
    Periodogram { averages: u32 },
}

/// Coherent displacement tone from an electrostatic drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveTone {
    /// Displacement amplitude, m.
    pub amplitude: f64,
    /// rad/s
    pub omega: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct ForwardOptions<'a> {
    pub motion: MotionSource<'a>,
    pub statistics: SpectrumStatistics,
    pub seed: u64,
    pub tone: Option<DriveTone>,
}

impl Default for ForwardOptions<'_> {
    fn default() -> Self {
        ForwardOptions { motion: MotionSource::Thermal, statistics: SpectrumStatistics::Expected, seed: 0, tone: None }
    }
}

/// Quadrature-voltage PSD at the mixer output.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectedSpectrum {
    /// Hz, strictly increasing.
    pub frequencies: Vec<f64>,
    /// V^2/Hz
    pub s_v_q: Vec<f64>,
    pub carrier: ReadoutGeometry,
    pub metadata: BTreeMap<String, String>,
}

impl DetectedSpectrum {
    pub fn to_series(&self) -> SpectrumSeries {
        SpectrumSeries {
            frequencies: self.frequencies.clone(),
            values: self.s_v_q.clone(),
            units: SpectrumUnits::Voltage,
            metadata: self.metadata.clone(),
        }
    }
}

/// Simulates the detected spectrum on `grid` (Hz, positive, increasing).
pub fn forward_spectrum(
    chain: &ReadoutChain,
    mode: &MechanicalMode,
    grid: &[f64],
    options: &ForwardOptions<'_>,
) -> Result<DetectedSpectrum> {
    validate_grid(grid)?;
    if grid[0] <= 0.0 {
        return Err(Error::Grid(format!("analysis frequencies must be positive, got {}", grid[0])));
    }
    chain.noise.validate()?;
    if let MotionSource::Estimated(series) = options.motion {
        if series.units != SpectrumUnits::Displacement {
            return Err(Error::Grid(format!("motion spectrum has units {}, expected m^2/Hz", series.units)));
        }
        let same = series.frequencies.len() == grid.len()
            && series.frequencies.iter().zip(grid).all(|(a, b)| (a - b).abs() <= 1e-9 * b.abs());
        if !same {
            return Err(Error::Grid("motion spectrum grid differs from the analysis grid".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(options.seed);
    let deviate = match options.statistics {
        SpectrumStatistics::Expected => None,
        SpectrumStatistics::Periodogram { averages } => {
            ensure(averages >= 1, || "averages must be at least 1".into())?;
            let n = averages as f64;
            Some(Gamma::new(n, 1.0 / n).map_err(|e| Error::Domain(e.to_string()))?)
        }
    };

    let mut s_v_q = Vec::with_capacity(grid.len());
    for (i, &nu) in grid.iter().enumerate() {
        let gain = chain.signal_gain(nu);
        let floor = chain.noise_floor(nu)?;
        let (stochastic, fixed) = match options.motion {
            MotionSource::Thermal => (gain * thermal_displacement_psd(mode, hz(nu) - mode.omega_m) + floor, 0.0),
            MotionSource::Estimated(series) => (floor, gain * series.values[i]),
            MotionSource::Still => (floor, 0.0),
        };
        let scale = deviate.as_ref().map_or(1.0, |d| d.sample(&mut rng));
        s_v_q.push(stochastic * scale + fixed);
    }

    if let Some(tone) = options.tone {
        let nu = tone.omega / std::f64::consts::TAU;
        let idx = nearest_bin(grid, nu);
        let width = bin_width(grid, idx);
        let mean_square = 0.5 * tone.amplitude * tone.amplitude;
        s_v_q[idx] += chain.signal_gain(grid[idx]) * mean_square / width;
    }

    let mut metadata = BTreeMap::new();
    metadata.insert("seed".into(), options.seed.to_string());
    metadata.insert("probe_detuning_rad_s".into(), format!("{:e}", chain.geometry.detuning));
    metadata.insert("v0_v".into(), format!("{:e}", chain.geometry.v0));
    metadata.insert("s_min".into(), format!("{:e}", chain.geometry.s_min));
    metadata.insert("power_w".into(), format!("{:e}", chain.cavity.power_incident));
    metadata.insert("g_rad_s_per_m".into(), format!("{:e}", chain.coupling.g));
    metadata.insert("t_n_k".into(), format!("{:e}", chain.noise.t_n));
    metadata.insert("a_tls".into(), format!("{:e}", chain.noise.a_tls));
    metadata.insert("gain_factor".into(), format!("{:e}", chain.noise.gain_factor));
    metadata.insert("temperature_k".into(), format!("{:e}", mode.temperature_bath));
    metadata.insert(
        "statistics".into(),
        match options.statistics {
            SpectrumStatistics::Expected => "expected".to_string(),
            SpectrumStatistics::Periodogram { averages } => format!("periodogram/{averages}"),
        },
    );

    Ok(DetectedSpectrum { frequencies: grid.to_vec(), s_v_q, carrier: chain.geometry, metadata })
}

pub(crate) fn nearest_bin(grid: &[f64], nu: f64) -> usize {
    grid.iter().enumerate().min_by(|a, b| (a.1 - nu).abs().total_cmp(&(b.1 - nu).abs())).map(|(i, _)| i).unwrap_or(0)
}

pub(crate) fn bin_width(grid: &[f64], i: usize) -> f64 {
    match grid.len() {
        0 | 1 => 1.0,
        _ if i == 0 => grid[1] - grid[0],
        n if i == n - 1 => grid[n - 1] - grid[n - 2],
        _ => 0.5 * (grid[i + 1] - grid[i - 1]),
    }
}

/// Converts a detected spectrum to cavity-frequency fluctuations,
/// (rad/s)^2/Hz, using each bin's own frequency in the filter term.
pub fn volts_to_cavity_freq_psd(
    spectrum: &DetectedSpectrum,
    cavity: &CavityParams,
    geometry: &ReadoutGeometry,
) -> Result<SpectrumSeries> {
    if geometry.s_min >= 1.0 {
        return Err(Error::Uncoupled);
    }
    ensure(geometry.v0 > 0.0, || format!("v0 must be positive, got {}", geometry.v0))?;
    let r = quadrature_responsivity(geometry, cavity);
    let values = spectrum
        .frequencies
        .iter()
        .zip(&spectrum.s_v_q)
        .map(|(&nu, &s)| filter_for(geometry, cavity, nu) * s / (r * r))
        .collect();
    let mut series = SpectrumSeries::new(spectrum.frequencies.clone(), values, SpectrumUnits::CavityFrequency)?;
    series.metadata = spectrum.metadata.clone();
    Ok(series)
}

/// Divides a cavity-frequency PSD by `g^2` to obtain displacement, m^2/Hz.
pub fn cavity_freq_to_displacement(series: &SpectrumSeries, g: f64) -> Result<SpectrumSeries> {
    ensure(g > 0.0, || format!("g must be positive, got {g}"))?;
    ensure(series.units == SpectrumUnits::CavityFrequency, || format!("expected (rad/s)^2/Hz, got {}", series.units))?;
    Ok(series.scaled(1.0 / (g * g), SpectrumUnits::Displacement))
}
