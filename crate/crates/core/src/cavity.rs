//! Linear response of a notch (hanger) coupled quarter-wave resonator.
//!
//! `S21(w) = 1 - (Q/Q_ext) / (1 + 2iQ (w - w_c)/w_c)`
//!
//! Phase is referenced to the off-resonance carrier, so `arg S21(w_c) = 0`.
//! The probe is rotated so that all dispersive signal lands in the Q
//! quadrature.

use num_complex::Complex64;

use crate::error::{ensure, Result};
use crate::model::CavityParams;

/// One point of a frequency sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransmissionPoint {
    /// rad/s
    pub omega: f64,
    pub s21: Complex64,
}

impl TransmissionPoint {
    pub fn power_db(&self) -> f64 {
        10.0 * self.s21.norm_sqr().log10()
    }

    pub fn phase(&self) -> f64 {
        if self.s21.norm() == 0.0 {
            0.0
        } else {
            self.s21.arg()
        }
    }
}

/// Carrier amplitude and operating point of the homodyne readout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReadoutGeometry {
    /// Off-resonance carrier amplitude at the mixer, V.
    pub v0: f64,
    /// Normalized on-resonance transmission amplitude.
    pub s_min: f64,
    /// Probe offset from omega_c, rad/s. Zero is the bad-cavity operating
    /// point; `+-omega_m` places one motional sideband on resonance.
    pub detuning: f64,
}

impl ReadoutGeometry {
    pub fn new(v0: f64, s_min: f64, detuning: f64) -> Result<Self> {
        ensure(v0 > 0.0 && v0.is_finite(), || format!("v0 must be positive, got {v0}"))?;
        ensure((0.0..=1.0).contains(&s_min), || format!("s_min must lie in [0, 1], got {s_min}"))?;
        ensure(detuning.is_finite(), || "detuning must be finite".into())?;
        Ok(ReadoutGeometry { v0, s_min, detuning })
    }

    /// Geometry with `s_min` taken from the cavity model.
    pub fn for_cavity(cavity: &CavityParams, v0: f64, detuning: f64) -> Result<Self> {
        Self::new(v0, s_min(cavity), detuning)
    }
}

pub fn transmission(cavity: &CavityParams, omega: f64) -> Complex64 {
    let q = cavity.total_q();
    let depth = q / cavity.q_ext;
    let x = 2.0 * q * (omega - cavity.omega_c) / cavity.omega_c;
    Complex64::new(1.0, 0.0) - depth / Complex64::new(1.0, x)
}

pub fn sweep(cavity: &CavityParams, omegas: &[f64]) -> Vec<TransmissionPoint> {
    omegas.iter().map(|&omega| TransmissionPoint { omega, s21: transmission(cavity, omega) }).collect()
}

/// On-resonance transmission amplitude `1 - Q/Q_ext`.
pub fn s_min(cavity: &CavityParams) -> f64 {
    // 1 - Q/Q_ext == Q/Q_int, exact zero for a lossless cavity
    (cavity.total_q() * cavity.q_int.inverse()).clamp(0.0, 1.0)
}

/// Magnitude of `dV_Q / d omega_c` for a probe on resonance,
/// `(2Q/omega_c) V_0 (1 - S_min)`, in V per rad/s.
pub fn quadrature_responsivity(geometry: &ReadoutGeometry, cavity: &CavityParams) -> f64 {
    2.0 * cavity.total_q() / cavity.omega_c * geometry.v0 * (1.0 - geometry.s_min)
}

/// Attenuation of motional sidebands by the cavity, `1 + 4 (omega_m/gamma_c)^2`.
/// Tends to 1 in the bad-cavity limit.
pub fn sideband_filter_factor(omega_m: f64, gamma_c: f64) -> f64 {
    let r = omega_m / gamma_c;
    1.0 + 4.0 * r * r
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::InternalQ;
    use crate::units::*;
    use proptest::prelude::*;

    fn measured() -> CavityParams {
        CavityParams::new(ghz(5.0), InternalQ::Finite(38_000.0), 14_000.0, 70.0, pw(68.0)).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn off_resonance_unity() {
        let c = measured();
        let far = transmission(&c, c.omega_c * 1.5);
        assert!((far - Complex64::new(1.0, 0.0)).norm() < 1e-3);
    }

    #[test]
    fn resonance_dip_depth() {
        let c = measured();
        let on = transmission(&c, c.omega_c);
        assert!(rel(on.norm_sqr(), 0.072_485_207) < 1e-8);
        let point = TransmissionPoint { omega: c.omega_c, s21: on };
        assert!((point.power_db() + 11.3975).abs() < 1e-3);
        let half = transmission(&c, c.omega_c + c.omega_c / (2.0 * c.total_q()));
        assert!(rel(half.norm_sqr(), 0.536_242_6) < 1e-6);
    }

    #[test]
    fn s_min_values() {
        assert!(rel(s_min(&measured()), 0.269_230_769) < 1e-8);
        let lossless = CavityParams { q_int: InternalQ::Lossless, ..measured() };
        assert_eq!(s_min(&lossless), 0.0);
        let uncoupled = CavityParams { q_ext: 1e300, ..measured() };
        assert!((s_min(&uncoupled) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn responsivity_values() {
        let c = measured();
        let g = ReadoutGeometry::for_cavity(&c, 1.0, 0.0).unwrap();
        assert!(rel(quadrature_responsivity(&g, &c), 4.7594e-7) < 1e-4);
        let g2 = ReadoutGeometry { v0: 2.0, ..g };
        assert!(rel(quadrature_responsivity(&g2, &c), 2.0 * quadrature_responsivity(&g, &c)) < 1e-15);
        let dead = ReadoutGeometry { s_min: 1.0, ..g };
        assert_eq!(quadrature_responsivity(&dead, &c), 0.0);
        assert!(ReadoutGeometry::new(1.0, 1.5, 0.0).is_err());
        assert!(ReadoutGeometry::new(0.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn filter_factor_points() {
        assert!((sideband_filter_factor(1.0, 1e9) - 1.0).abs() < 1e-15);
        assert_eq!(sideband_filter_factor(0.5, 1.0), 2.0);
        assert!((sideband_filter_factor(mhz(2.0), mhz(4.0)) - 2.0).abs() < 1e-12);
        assert!(rel(sideband_filter_factor(khz(240.0), khz(490.0)), 1.9596) < 1e-4);
    }

    #[test]
    fn dip_minimum_and_half_depth_points() {
        let c = measured();
        let gc = c.linewidth();
        // |S21| minimum sits at omega_c
        let span: Vec<f64> = (-200..=200).map(|i| c.omega_c + gc * i as f64 / 100.0).collect();
        let pts = sweep(&c, &span);
        let imin = pts.iter().enumerate().min_by(|a, b| a.1.s21.norm().total_cmp(&b.1.s21.norm())).unwrap().0;
        assert_eq!(imin, 200);

        // half-depth points found by bisection on 1 - |S21|^2
        let depth = |w: f64| 1.0 - transmission(&c, w).norm_sqr();
        let half = depth(c.omega_c) / 2.0;
        let bisect = |mut lo: f64, mut hi: f64| {
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if (depth(mid) - half) * (depth(lo) - half) > 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let upper = bisect(c.omega_c, c.omega_c + 2.0 * gc);
        let lower = bisect(c.omega_c - 2.0 * gc, c.omega_c);
        assert!(rel(upper - lower, gc) < 1e-6);
    }

    #[test]
    fn small_signal_matches_responsivity() {
        let c = measured();
        let geom = ReadoutGeometry::for_cavity(&c, 1.0, 0.0).unwrap();
        let resp = quadrature_responsivity(&geom, &c);
        for frac in [1e-4, 1e-3, 5e-3, 9.9e-3] {
            let shift = frac * c.linewidth();
            let shifted = CavityParams { omega_c: c.omega_c + shift, ..c };
            // probe stays at the unperturbed resonance
            let v_q = geom.v0 * transmission(&shifted, c.omega_c).im;
            assert!(rel(v_q.abs(), resp * shift) < 0.01, "frac {frac}");
        }
    }

    proptest! {
        #[test]
        fn phase_antisymmetric(offset in 0.0f64..20.0) {
            let c = measured();
            let d = offset * c.linewidth();
            let up = transmission(&c, c.omega_c + d).arg();
            let down = transmission(&c, c.omega_c - d).arg();
            prop_assert!((up + down).abs() < 1e-9);
        }

        #[test]
        fn passive_transmission(q_int in 100.0f64..1e6, q_ext in 100.0f64..1e6, offset in -50.0f64..50.0) {
            let c = CavityParams::new(ghz(5.0), InternalQ::Finite(q_int), q_ext, 50.0, 0.0).unwrap();
            let s = transmission(&c, c.omega_c + offset * c.linewidth());
            prop_assert!(s.norm() <= 1.0 + 1e-9);
        }

        #[test]
        fn filter_at_least_one(w in 0.0f64..1e9, g in 1.0f64..1e9) {
            prop_assert!(sideband_filter_factor(w, g) >= 1.0);
        }
    }

    #[test]
    fn phase_zero_on_resonance() {
        let c = measured();
        let p = TransmissionPoint { omega: c.omega_c, s21: transmission(&c, c.omega_c) };
        assert_eq!(p.phase(), 0.0);
    }
}
