use crate::model::{MechanicalMode, HBAR, K_B};
use crate::spectral::calibration::imprecision_psd;

/// Experimental noise budget at one operating point.
///
/// Linear SQL ratios use `S_x / S_x(SQL) = 4 k_b T / (hbar omega_m)` per
/// quantity. The total ratio compares `S_x^im + S_x^sat` against
/// `2 S_x(SQL)`, the sum of the imprecision and backaction contributions at
/// the SQL.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseBudget {
    /// Imprecision temperature, K.
    pub t_im: f64,
    /// Saturation temperature, K. An upper bound on backaction heating.
    pub t_sat: f64,
    /// Backaction temperature when independently known, K.
    pub t_ba: Option<f64>,
    /// m^2/Hz
    pub s_x_im: f64,
    /// `hbar / (m omega_m gamma_m)`, m^2/Hz.
    pub s_x_sql: f64,
    /// `sqrt(S_x^im / S_x(SQL))`
    pub sql_ratio_linear: f64,
    /// `sqrt(S_x^sat / S_x(SQL))`
    pub sat_ratio_linear: f64,
    /// `sqrt((S_x^im + S_x^sat) / (2 S_x(SQL)))`
    pub total_ratio_linear: f64,
    /// `sqrt(4 k_b (T_im + T_sat) m gamma_m)`, N/sqrt(Hz).
    pub force_sensitivity: f64,
}

impl NoiseBudget {
    /// Force noise bound implied by the saturation temperature, N^2/Hz.
    pub fn s_f_sat(&self, mode: &MechanicalMode) -> f64 {
        4.0 * K_B * self.t_sat * mode.mass * mode.gamma_m()
    }

    /// `S_x^im * S_F^sat / hbar^2`; at least 1 for any physical detector.
    pub fn heisenberg_ratio(&self, mode: &MechanicalMode) -> f64 {
        self.s_x_im * self.s_f_sat(mode) / (HBAR * HBAR)
    }
}

pub fn budget(t_im: f64, t_sat: f64, mode: &MechanicalMode) -> NoiseBudget {
    let s_x_sql = HBAR / mode.mechanical_impedance();
    let ratio = |t: f64| (4.0 * K_B * t / (HBAR * mode.omega_m)).sqrt();
    NoiseBudget {
        t_im,
        t_sat,
        t_ba: None,
        s_x_im: imprecision_psd(t_im, mode),
        s_x_sql,
        sql_ratio_linear: ratio(t_im),
        sat_ratio_linear: ratio(t_sat),
        total_ratio_linear: ratio(t_im + t_sat) / 2f64.sqrt(),
        force_sensitivity: (4.0 * K_B * (t_im + t_sat) * mode.mass * mode.gamma_m()).sqrt(),
    }
}
