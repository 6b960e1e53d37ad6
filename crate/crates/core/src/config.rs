//! Scenario files.
//!
//! A scenario is a TOML document with the sections `cavity`, `mechanics`,
//! `coupling`, `noise`, `drive`, `run` and `sweep`. Every key carries its
//! unit in the name (`omega_c_ghz`, `mass_pg`, ...). Frequencies are
//! ordinary frequencies `omega / 2 pi`. Unknown keys are rejected.
//!
//! ```toml
//! [cavity]
//! omega_c_ghz = 5.0
//! q_int = 38000        # or "lossless"
//! q_ext = 14000
//! z_line_ohm = 70
//! power_pw = 100
//!
//! [mechanics]
//! omega_m_khz = 240
//! mass_pg = 2
//! q_m = 2300
//! temperature_mk = 100
//!
//! [coupling]
//! dcb_dx_af_per_um = 170
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cavity::ReadoutGeometry;
use crate::error::{Error, Result};
use crate::mechanics::DriveSpec;
use crate::model::{CavityParams, CouplingModel, InternalQ, MechanicalMode};
use crate::readout::{NoiseModel, ReadoutChain};
use crate::units::{af_per_um, ghz, khz, khz_per_nm, mk, pg, pw};

/// Characteristic impedance of the room-temperature detection chain, ohm.
pub const DETECTOR_IMPEDANCE: f64 = 50.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub cavity: CavitySection,
    pub mechanics: MechanicsSection,
    pub coupling: CouplingSection,
    #[serde(default)]
    pub noise: NoiseSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive: Option<DriveSection>,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub sweep: SweepSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CavitySection {
    pub omega_c_ghz: f64,
    pub q_int: InternalQ,
    pub q_ext: f64,
    #[serde(default = "default_z_line")]
    pub z_line_ohm: f64,
    #[serde(default)]
    pub power_pw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanicsSection {
    pub omega_m_khz: f64,
    pub mass_pg: f64,
    pub q_m: f64,
    #[serde(default)]
    pub temperature_mk: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dcb_dx_af_per_um: Option<f64>,
    #[serde(default)]
    pub dcd_dx_af_per_um: f64,
    /// Overrides the geometric estimate when given.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_khz_per_nm: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSection {
    #[serde(default)]
    pub t_n_k: f64,
    #[serde(default)]
    pub a_tls: f64,
    #[serde(default = "default_tls_exponent")]
    pub tls_exponent: f64,
    #[serde(default = "one")]
    pub gain_factor: f64,
    /// Net gain between the device and the mixer, dB.
    #[serde(default)]
    pub chain_gain_db: f64,
}

impl Default for NoiseSection {
    fn default() -> Self {
        NoiseSection {
            t_n_k: 0.0,
            a_tls: 0.0,
            tls_exponent: default_tls_exponent(),
            gain_factor: 1.0,
            chain_gain_db: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DriveSection {
    pub v_dc_v: f64,
    pub v_ac_uv: f64,
    /// Defaults to the mechanical resonance.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub drive_khz: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    /// TOML integers are signed, so seeds are limited to `0..=i64::MAX`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Simulated time per Langevin run, including burn-in.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub duration_s: Option<f64>,
    /// Defaults to the stability cap `T_m / 50`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt_s: Option<f64>,
    #[serde(default = "one_usize")]
    pub record_every: usize,
    /// Welch resolution; sets the segment length.
    #[serde(default = "default_resolution")]
    pub resolution_hz: f64,
    #[serde(default = "default_overlap")]
    pub overlap: f64,
    /// Periodogram averages for detector noise; 0 gives expected spectra.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub averages: Option<u32>,
    /// Analysis band `[lo, hi]`; defaults to `f_m +- 25 linewidths`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band_khz: Option<[f64; 2]>,
    #[serde(default)]
    pub probe_detuning_khz: f64,
    /// Rows written to `trajectory.csv`; spectra always use the full record.
    #[serde(default = "default_trajectory_rows")]
    pub trajectory_rows: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            seed: None,
            duration_s: None,
            dt_s: None,
            record_every: 1,
            resolution_hz: default_resolution(),
            overlap: default_overlap(),
            averages: None,
            band_khz: None,
            probe_detuning_khz: 0.0,
            trajectory_rows: default_trajectory_rows(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub powers_pw: Vec<f64>,
    #[serde(default)]
    pub temperatures_mk: Vec<f64>,
    #[serde(default = "default_min_temp")]
    pub min_temp_mk: f64,
    /// Beam temperature floor injected into simulated sweeps.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub saturation_mk: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_calibrated_khz_per_nm: Option<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            powers_pw: Vec::new(),
            temperatures_mk: Vec::new(),
            min_temp_mk: default_min_temp(),
            saturation_mk: None,
            g_calibrated_khz_per_nm: None,
        }
    }
}

fn default_z_line() -> f64 {
    50.0
}
fn default_tls_exponent() -> f64 {
    0.5
}
fn one() -> f64 {
    1.0
}
fn one_usize() -> usize {
    1
}
fn default_resolution() -> f64 {
    10.0
}
fn default_overlap() -> f64 {
    0.5
}
fn default_trajectory_rows() -> usize {
    100_000
}
fn default_min_temp() -> f64 {
    127.0
}

fn in_section<T>(section: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Config(m) => Error::Config(m),
        Error::Domain(m) => Error::Config(format!("[{section}] {m}")),
        other => Error::Config(format!("[{section}] {other}")),
    })
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl Scenario {
    /// Parses and validates. Syntax and unknown-key errors carry the line
    /// and column; value errors name the section and key.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let scenario: Scenario = toml::from_str(text).map_err(|e| config_err(e.to_string().trim_end()))?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => config_err(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| config_err(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let cavity = self.cavity_params()?;
        self.mode()?;
        self.coupling_model(&cavity)?;
        self.noise_model()?;
        self.drive_spec()?;
        if cavity.power_incident > 0.0 {
            self.geometry(&cavity)?;
        }
        let run = &self.run;
        if let Some(d) = run.duration_s {
            if !(d > 0.0) {
                return Err(config_err(format!("[run] duration_s must be positive, got {d}")));
            }
        }
        if let Some(dt) = run.dt_s {
            if !(dt > 0.0) {
                return Err(config_err(format!("[run] dt_s must be positive, got {dt}")));
            }
        }
        if run.record_every == 0 {
            return Err(config_err("[run] record_every must be at least 1"));
        }
        if !(run.resolution_hz > 0.0) {
            return Err(config_err(format!("[run] resolution_hz must be positive, got {}", run.resolution_hz)));
        }
        if !(0.0..1.0).contains(&run.overlap) {
            return Err(config_err(format!("[run] overlap must lie in [0, 1), got {}", run.overlap)));
        }
        if let Some([lo, hi]) = run.band_khz {
            if !(lo > 0.0 && hi > lo) {
                return Err(config_err(format!("[run] band_khz must satisfy 0 < lo < hi, got [{lo}, {hi}]")));
            }
        }
        let sweep = &self.sweep;
        if sweep.powers_pw.iter().any(|p| !(*p > 0.0)) {
            return Err(config_err("[sweep] powers_pw entries must be positive"));
        }
        if sweep.temperatures_mk.iter().any(|t| !(*t >= 0.0)) {
            return Err(config_err("[sweep] temperatures_mk entries must be non-negative"));
        }
        if let Some(s) = sweep.saturation_mk {
            if !(s >= 0.0) {
                return Err(config_err(format!("[sweep] saturation_mk must be non-negative, got {s}")));
            }
        }
        if let Some(g) = sweep.g_calibrated_khz_per_nm {
            if !(g > 0.0) {
                return Err(config_err(format!("[sweep] g_calibrated_khz_per_nm must be positive, got {g}")));
            }
        }
        Ok(())
    }

    pub fn cavity_params(&self) -> Result<CavityParams> {
        let c = &self.cavity;
        in_section("cavity", CavityParams::new(ghz(c.omega_c_ghz), c.q_int, c.q_ext, c.z_line_ohm, pw(c.power_pw)))
    }

    /// Mechanical mode at the configured bath temperature.
    pub fn mode(&self) -> Result<MechanicalMode> {
        let m = &self.mechanics;
        in_section("mechanics", MechanicalMode::new(khz(m.omega_m_khz), pg(m.mass_pg), m.q_m, mk(m.temperature_mk)))
    }

    /// Explicit `g_khz_per_nm` wins over the geometric estimate.
    pub fn coupling_model(&self, cavity: &CavityParams) -> Result<CouplingModel> {
        let c = &self.coupling;
        let dcd = af_per_um(c.dcd_dx_af_per_um);
        let r = match (c.g_khz_per_nm, c.dcb_dx_af_per_um) {
            (Some(g), dcb) => {
                if !(g > 0.0) {
                    return Err(config_err(format!("[coupling] g_khz_per_nm must be positive, got {g}")));
                }
                CouplingModel::new(af_per_um(dcb.unwrap_or(0.0)), dcd, khz_per_nm(g))
            }
            (None, Some(dcb)) => CouplingModel::from_geometry(af_per_um(dcb), dcd, cavity),
            (None, None) => {
                return Err(config_err("[coupling] needs dcb_dx_af_per_um or g_khz_per_nm"));
            }
        };
        in_section("coupling", r)
    }

    pub fn noise_model(&self) -> Result<NoiseModel> {
        let n = &self.noise;
        if !n.chain_gain_db.is_finite() {
            return Err(config_err("[noise] chain_gain_db must be finite"));
        }
        in_section("noise", NoiseModel::new(n.t_n_k, n.a_tls, n.tls_exponent, n.gain_factor))
    }

    pub fn drive_spec(&self) -> Result<Option<DriveSpec>> {
        let Some(d) = &self.drive else { return Ok(None) };
        let omega = match d.drive_khz {
            Some(f) => khz(f),
            None => khz(self.mechanics.omega_m_khz),
        };
        in_section("drive", DriveSpec::new(d.v_dc_v, d.v_ac_uv * 1e-6, omega)).map(Some)
    }

    /// Off-resonance carrier amplitude at the mixer for incident power `power`,
    /// `sqrt(2 Z_0 P)` times the chain gain.
    pub fn carrier_amplitude(&self, power: f64) -> f64 {
        (2.0 * DETECTOR_IMPEDANCE * power).sqrt() * 10f64.powf(self.noise.chain_gain_db / 20.0)
    }

    /// Needs a positive incident power on `cavity`.
    pub fn geometry(&self, cavity: &CavityParams) -> Result<ReadoutGeometry> {
        let v0 = self.carrier_amplitude(cavity.power_incident);
        in_section("run", ReadoutGeometry::for_cavity(cavity, v0, khz(self.run.probe_detuning_khz)))
    }

    /// Readout chain at incident power `power`, W.
    pub fn chain_at(&self, power: f64) -> Result<ReadoutChain> {
        if !(power > 0.0) {
            return Err(config_err(format!("[cavity] readout needs a positive probe power, got {power} W")));
        }
        let cavity = self.cavity_params()?.with_power(power);
        Ok(ReadoutChain {
            cavity,
            coupling: self.coupling_model(&cavity)?,
            geometry: self.geometry(&cavity)?,
            noise: self.noise_model()?,
        })
    }

    /// Seed for stochastic runs; the command-line override wins.
    pub fn seed(&self, cli_override: Option<u64>) -> Result<u64> {
        let seed = cli_override
            .or(self.run.seed)
            .ok_or_else(|| config_err("[run] seed is required for stochastic runs (or pass --seed)"))?;
        if seed > i64::MAX as u64 {
            return Err(config_err(format!("seed {seed} exceeds the TOML integer range")));
        }
        Ok(seed)
    }

    /// Analysis band in Hz.
    pub fn band_hz(&self) -> Result<(f64, f64)> {
        if let Some([lo, hi]) = self.run.band_khz {
            return Ok((lo * 1e3, hi * 1e3));
        }
        let mode = self.mode()?;
        let f_m = self.mechanics.omega_m_khz * 1e3;
        let half = 25.0 * mode.gamma_m() / std::f64::consts::TAU;
        Ok(((f_m - half).max(f_m * 0.01), f_m + half))
    }

    pub fn powers(&self) -> Vec<f64> {
        self.sweep.powers_pw.iter().map(|p| pw(*p)).collect()
    }

    pub fn temperatures(&self) -> Vec<f64> {
        self.sweep.temperatures_mk.iter().map(|t| mk(*t)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const BEAM: &str = r#"
[cavity]
omega_c_ghz = 5.0
q_int = 38000
q_ext = 14000
z_line_ohm = 70
power_pw = 100

[mechanics]
omega_m_khz = 240
mass_pg = 2
q_m = 2300
temperature_mk = 100

[coupling]
dcb_dx_af_per_um = 170
dcd_dx_af_per_um = 0.2

[noise]
t_n_k = 7.5

[run]
seed = 7

[sweep]
temperatures_mk = [130, 160, 200]
"#;

    #[test]
    fn parses_and_converts_units() {
        let s = Scenario::from_toml_str(BEAM).unwrap();
        let cavity = s.cavity_params().unwrap();
        assert!((cavity.total_q() - 10230.769).abs() < 1e-2);
        assert!((cavity.power_incident - 1e-10).abs() < 1e-24);
        let g = s.coupling_model(&cavity).unwrap().g;
        assert!((crate::units::to_khz_per_nm(g) - 1.19).abs() < 0.005);
        assert_eq!(s.seed(None).unwrap(), 7);
        assert_eq!(s.seed(Some(9)).unwrap(), 9);
        assert_eq!(s.temperatures().len(), 3);
        assert_eq!(s.sweep.min_temp_mk, 127.0);
    }

    #[test]
    fn explicit_g_wins() {
        let text = BEAM.replace("dcd_dx_af_per_um = 0.2", "dcd_dx_af_per_um = 0.2\ng_khz_per_nm = 1.16");
        let s = Scenario::from_toml_str(&text).unwrap();
        let g = s.coupling_model(&s.cavity_params().unwrap()).unwrap().g;
        assert!((crate::units::to_khz_per_nm(g) - 1.16).abs() < 1e-12);
    }

    #[test]
    fn lossless_keyword() {
        let s = Scenario::from_toml_str(&BEAM.replace("q_int = 38000", "q_int = \"lossless\"")).unwrap();
        assert!(s.cavity.q_int.is_lossless());
        let err = Scenario::from_toml_str(&BEAM.replace("q_int = 38000", "q_int = \"infinite\"")).unwrap_err();
        assert!(err.is_config());
    }

    #[test]
    fn unknown_key_reports_line() {
        let text = BEAM.replace("mass_pg = 2", "mass_pg = 2\nmass_kg = 2e-15");
        let msg = Scenario::from_toml_str(&text).unwrap_err().to_string();
        assert!(msg.contains("unknown field `mass_kg`"), "{msg}");
        assert!(msg.contains("line 12, column 1"), "{msg}");
    }

    #[test]
    fn bad_values_name_their_section() {
        let msg = Scenario::from_toml_str(&BEAM.replace("q_ext = 14000", "q_ext = -1")).unwrap_err().to_string();
        assert!(msg.contains("[cavity]") && msg.contains("q_ext"), "{msg}");
        let msg = Scenario::from_toml_str(&BEAM.replace("temperature_mk = 100", "temperature_mk = -5"))
            .unwrap_err()
            .to_string();
        assert!(msg.contains("[mechanics]"), "{msg}");
        let msg = Scenario::from_toml_str(&BEAM.replace("dcb_dx_af_per_um = 170\n", "")).unwrap_err().to_string();
        assert!(msg.contains("[coupling]"), "{msg}");
    }

    #[test]
    fn missing_seed_is_a_config_error() {
        let s = Scenario::from_toml_str(&BEAM.replace("seed = 7", "")).unwrap();
        assert!(s.seed(None).unwrap_err().is_config());
    }

    #[test]
    fn carrier_follows_power_and_gain() {
        let s = Scenario::from_toml_str(BEAM).unwrap();
        let v = s.carrier_amplitude(1e-10);
        assert!((v - (1e-8f64).sqrt()).abs() < 1e-15);
        let mut louder = s.clone();
        louder.noise.chain_gain_db = 20.0;
        assert!((louder.carrier_amplitude(1e-10) / v - 10.0).abs() < 1e-12);
    }

    #[test]
    fn default_band_brackets_resonance() {
        let s = Scenario::from_toml_str(BEAM).unwrap();
        let (lo, hi) = s.band_hz().unwrap();
        assert!(lo < 240e3 && hi > 240e3);
        assert!((hi - lo - 50.0 * 240e3 / 2300.0).abs() < 1e-6);
    }

    #[test]
    fn round_trip_of_shipped_example() {
        let s = Scenario::from_toml_str(BEAM).unwrap();
        let again = Scenario::from_toml_str(&s.to_toml_string().unwrap()).unwrap();
        assert_eq!(s, again);
    }

    proptest! {
        #[test]
        fn round_trip(
            f_c in 1.0f64..20.0,
            q_int in prop::option::of(1e3f64..1e6),
            q_ext in 1e2f64..1e5,
            mass in 0.1f64..100.0,
            temps in prop::collection::vec(0.0f64..500.0, 0..6),
            seed in prop::option::of(0..=i64::MAX as u64),
            g in prop::option::of(0.1f64..50.0),
            drive in prop::option::of((0.0f64..5.0, 0.0f64..1e3)),
            band in prop::option::of((100.0f64..200.0, 250.0f64..300.0)),
        ) {
            let mut s = Scenario::from_toml_str(BEAM).unwrap();
            s.cavity.omega_c_ghz = f_c;
            s.cavity.q_int = q_int.map_or(InternalQ::Lossless, InternalQ::Finite);
            s.cavity.q_ext = q_ext;
            s.mechanics.mass_pg = mass;
            s.sweep.temperatures_mk = temps;
            s.run.seed = seed;
            s.coupling.g_khz_per_nm = g;
            s.drive = drive.map(|(v_dc_v, v_ac_uv)| DriveSection { v_dc_v, v_ac_uv, drive_khz: None });
            s.run.band_khz = band.map(|(a, b)| [a, b]);
            let text = s.to_toml_string().unwrap();
            let again = Scenario::from_toml_str(&text).unwrap();
            prop_assert_eq!(&s, &again);
            prop_assert_eq!(text, again.to_toml_string().unwrap());
        }
    }
}
