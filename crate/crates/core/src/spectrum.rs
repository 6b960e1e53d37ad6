use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result};

/// Physical units of a single-sided, per-Hz spectral density.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumUnits {
    /// m^2/Hz
    Displacement,
    /// (rad/s)^2/Hz
    CavityFrequency,
    /// V^2/Hz
    Voltage,
    /// rad^2/Hz
    Phase,
    /// Linear amplitude (m) from a swept drive, not a density.
    Amplitude,
    Arbitrary,
}

impl fmt::Display for SpectrumUnits {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpectrumUnits::Displacement => "m^2/Hz",
            SpectrumUnits::CavityFrequency => "(rad/s)^2/Hz",
            SpectrumUnits::Voltage => "V^2/Hz",
            SpectrumUnits::Phase => "rad^2/Hz",
            SpectrumUnits::Amplitude => "m",
            SpectrumUnits::Arbitrary => "arb",
        })
    }
}

/// Frequency-indexed series. Frequencies are in Hz and strictly increasing.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumSeries {
    pub frequencies: Vec<f64>,
    pub values: Vec<f64>,
    pub units: SpectrumUnits,
    pub metadata: BTreeMap<String, String>,
}

impl SpectrumSeries {
    pub fn new(frequencies: Vec<f64>, values: Vec<f64>, units: SpectrumUnits) -> Result<Self> {
        validate_grid(&frequencies)?;
        if frequencies.len() != values.len() {
            return Err(Error::Grid(format!("{} frequencies but {} values", frequencies.len(), values.len())));
        }
        Ok(SpectrumSeries { frequencies, values, units, metadata: BTreeMap::new() })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Uniform spacing if the grid is uniform to 1e-6 relative.
    pub fn resolution(&self) -> Option<f64> {
        if self.frequencies.len() < 2 {
            return None;
        }
        let df = (self.frequencies[self.len() - 1] - self.frequencies[0]) / (self.len() - 1) as f64;
        let uniform = self.frequencies.windows(2).all(|w| ((w[1] - w[0]) - df).abs() <= 1e-6 * df);
        uniform.then_some(df)
    }

    /// Trapezoidal integral over frequency in Hz.
    pub fn integrate(&self) -> f64 {
        self.frequencies.windows(2).zip(self.values.windows(2)).map(|(f, v)| 0.5 * (v[0] + v[1]) * (f[1] - f[0])).sum()
    }

    /// Sub-series with `lo <= f <= hi`.
    pub fn window(&self, lo: f64, hi: f64) -> SpectrumSeries {
        let (frequencies, values) = self
            .frequencies
            .iter()
            .zip(&self.values)
            .filter(|(f, _)| **f >= lo && **f <= hi)
            .map(|(f, v)| (*f, *v))
            .unzip();
        SpectrumSeries { frequencies, values, units: self.units, metadata: self.metadata.clone() }
    }

    pub fn scaled(&self, factor: f64, units: SpectrumUnits) -> SpectrumSeries {
        SpectrumSeries {
            frequencies: self.frequencies.clone(),
            values: self.values.iter().map(|v| v * factor).collect(),
            units,
            metadata: self.metadata.clone(),
        }
    }
}

/// Grids must be non-empty, finite and strictly increasing.
pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    if let Some(bad) = grid.iter().find(|f| !f.is_finite()) {
        return Err(Error::Grid(format!("non-finite frequency {bad}")));
    }
    if let Some(i) = grid.windows(2).position(|w| w[1] <= w[0]) {
        return Err(Error::Grid(format!("grid not strictly increasing at index {}", i + 1)));
    }
    Ok(())
}

/// `n` evenly spaced points from `start` to `stop` inclusive.
pub fn linear_grid(start: f64, stop: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![start],
        _ => {
            let step = (stop - start) / (n - 1) as f64;
            (0..n).map(|i| start + step * i as f64).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_validation() {
        assert!(validate_grid(&[1.0, 2.0, 3.0]).is_ok());
        assert!(validate_grid(&[]).is_err());
        assert!(validate_grid(&[1.0, 1.0]).is_err());
        assert!(validate_grid(&[1.0, f64::NAN]).is_err());
        assert!(SpectrumSeries::new(vec![1.0, 2.0], vec![1.0], SpectrumUnits::Arbitrary).is_err());
    }

    #[test]
    fn resolution_and_integral() {
        let s = SpectrumSeries::new(linear_grid(0.0, 10.0, 11), vec![2.0; 11], SpectrumUnits::Arbitrary).unwrap();
        assert!((s.resolution().unwrap() - 1.0).abs() < 1e-12);
        assert!((s.integrate() - 20.0).abs() < 1e-12);
        assert_eq!(s.window(2.0, 4.0).len(), 3);
    }
}
