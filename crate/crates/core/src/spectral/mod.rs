//! The inverse pipeline: spectra from trajectories, Lorentzian fits,
//! peak integration, temperature-sweep calibration and the noise budget.

mod budget;
mod calibration;
mod fit;
mod welch;

pub use budget::{budget, NoiseBudget};
pub use calibration::{
    backaction_temperature, imprecision_psd, imprecision_temperature, saturation_temperature, temperature_sweep_fit,
    SweepPoint, SweepResidual, TemperatureSweepResult, DEFAULT_MIN_TEMP,
};
pub use fit::{fit_lorentzian, fit_sqrt_lorentzian, integrate_lorentzian, FitFlag, FitModel, LorentzianFit};
pub use welch::{welch_psd, welch_psd_samples};
