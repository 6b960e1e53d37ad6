//! Welch PSD estimate: Hann-windowed, constant-detrended segments with a
//! single-sided, per-Hz normalization so that `sum(psd) * df` equals the
//! signal variance.

use rustfft::{num_complex::Complex64, FftPlanner};

use crate::error::{Error, Result};
use crate::mechanics::Trajectory;
use crate::spectrum::{SpectrumSeries, SpectrumUnits};

pub fn welch_psd(trajectory: &Trajectory, segment_length: usize, overlap: f64) -> Result<SpectrumSeries> {
    let series = welch_psd_samples(&trajectory.samples, trajectory.sample_rate(), segment_length, overlap)?;
    Ok(SpectrumSeries { units: SpectrumUnits::Displacement, ..series }.with_meta("seed", trajectory.seed))
}

pub fn welch_psd_samples(
    samples: &[f64],
    sample_rate: f64,
    segment_length: usize,
    overlap: f64,
) -> Result<SpectrumSeries> {
    if segment_length < 2 {
        return Err(Error::Domain(format!("segment length must be at least 2, got {segment_length}")));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::Domain(format!("overlap must lie in [0, 1), got {overlap}")));
    }
    if !(sample_rate > 0.0) {
        return Err(Error::Domain(format!("sample rate must be positive, got {sample_rate}")));
    }
    if samples.len() < segment_length {
        return Err(Error::InsufficientData(format!(
            "{} samples is shorter than one segment of {segment_length}",
            samples.len()
        )));
    }

    let n = segment_length;
    let step = (n - (overlap * n as f64).round() as usize).max(1);
    let segments = (samples.len() - n) / step + 1;

    // periodic Hann
    let window: Vec<f64> = (0..n).map(|i| 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / n as f64).cos()).collect();
    let window_power: f64 = window.iter().map(|w| w * w).sum();

    let fft = FftPlanner::new().plan_fft_forward(n);
    let bins = n / 2 + 1;
    let mut acc = vec![0.0; bins];
    let mut buf = vec![Complex64::new(0.0, 0.0); n];

    for s in 0..segments {
        let seg = &samples[s * step..s * step + n];
        let mean = seg.iter().sum::<f64>() / n as f64;
        for ((b, x), w) in buf.iter_mut().zip(seg).zip(&window) {
            *b = Complex64::new((x - mean) * w, 0.0);
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(&buf) {
            *a += b.norm_sqr();
        }
    }

    let norm = 1.0 / (sample_rate * window_power * segments as f64);
    let values = acc
        .iter()
        .enumerate()
        .map(|(k, p)| {
            let single_sided = if k == 0 || (n.is_multiple_of(2) && k == n / 2) { 1.0 } else { 2.0 };
            p * norm * single_sided
        })
        .collect();
    let frequencies = (0..bins).map(|k| k as f64 * sample_rate / n as f64).collect();

    Ok(SpectrumSeries::new(frequencies, values, SpectrumUnits::Arbitrary)?
        .with_meta("segments", segments)
        .with_meta("segment_length", n)
        .with_meta("overlap", overlap))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn tone_power() {
        let fs = 1000.0;
        let amp = 3.0;
        let x: Vec<f64> = (0..65536).map(|i| amp * (std::f64::consts::TAU * 123.4 * i as f64 / fs).sin()).collect();
        let psd = welch_psd_samples(&x, fs, 4096, 0.5).unwrap();
        let df = psd.resolution().unwrap();
        let total: f64 = psd.values.iter().sum::<f64>() * df;
        assert!(((total - amp * amp / 2.0) / (amp * amp / 2.0)).abs() < 0.02, "{total}");
    }

    #[test]
    fn white_noise_level_and_parseval() {
        let fs = 2000.0;
        let sigma = 0.5;
        let seg = 1024;
        let n = seg * 101 / 2 + seg; // 100+ segments at 50% overlap
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let normal = Normal::new(0.0, sigma).unwrap();
        let x: Vec<f64> = (0..n).map(|_| normal.sample(&mut rng)).collect();
        let psd = welch_psd_samples(&x, fs, seg, 0.5).unwrap();
        assert!(psd.metadata["segments"].parse::<usize>().unwrap() >= 100);

        let level = 2.0 * sigma * sigma / fs;
        let interior = &psd.values[1..psd.len() - 1];
        let mean = interior.iter().sum::<f64>() / interior.len() as f64;
        assert!(((mean - level) / level).abs() < 0.05);

        let df = psd.resolution().unwrap();
        let var = x.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let total = psd.values.iter().sum::<f64>() * df;
        assert!(((total - var) / var).abs() < 0.01, "{total} vs {var}");
    }

    #[test]
    fn errors() {
        assert!(matches!(welch_psd_samples(&[0.0; 10], 1.0, 16, 0.5), Err(Error::InsufficientData(_))));
        assert!(welch_psd_samples(&[0.0; 10], 1.0, 4, 1.0).is_err());
        assert!(welch_psd_samples(&[0.0; 10], 0.0, 4, 0.5).is_err());
    }

    #[test]
    fn non_power_of_two_segments() {
        let x: Vec<f64> = (0..3000).map(|i| (i as f64 * 0.3).sin()).collect();
        let psd = welch_psd_samples(&x, 10.0, 300, 0.25).unwrap();
        assert_eq!(psd.len(), 151);
    }
}
