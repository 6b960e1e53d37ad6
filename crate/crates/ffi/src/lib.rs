//! C ABI for cavimeter.
//!
//! Every fallible function returns a [`CvmStatus`] and hands results back
//! through out-pointers. Scenarios, trajectories and spectra are opaque
//! handles owned by the caller and released with their `_free` function.
//! After a non-OK status, [`cvm_last_error`] holds a message for the
//! calling thread. Panics never cross the boundary; they surface as
//! `CVM_STATUS_PANIC`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;

use cavimeter::config::Scenario;
use cavimeter::mechanics::Trajectory;
use cavimeter::projection::{intersection_power, minimum_total_uncertainty};
use cavimeter::runner::{self, RunContext};
use cavimeter::spectral::{fit_lorentzian, welch_psd};
use cavimeter::units::to_hz;
use cavimeter::{Error, SpectrumSeries, SpectrumUnits};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvmStatus {
    Ok = 0,
    NullPointer = 1,
    /// Malformed argument, such as a string that is not UTF-8.
    InvalidArgument = 2,
    /// Scenario could not be parsed or failed validation.
    Config = 3,
    /// Parameters outside the physical domain of a model.
    Domain = 4,
    /// Fit, calibration or data sufficiency failure.
    Numerical = 5,
    Io = 6,
    Panic = 7,
}

impl From<&Error> for CvmStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Config(_) => CvmStatus::Config,
            Error::Io(_) => CvmStatus::Io,
            Error::Domain(_) | Error::Stability { .. } | Error::TooShort { .. } | Error::Grid(_) | Error::Uncoupled => {
                CvmStatus::Domain
            }
            Error::InsufficientData(_) | Error::Fit(_) | Error::Calibration(_) => CvmStatus::Numerical,
        }
    }
}

/// Workflows runnable through [`cvm_run`].
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CvmCommand {
    Simulate = 0,
    Calibrate = 1,
    Budget = 2,
    Project = 3,
    Gaincal = 4,
}

pub struct CvmScenario(Scenario);

pub struct CvmTrajectory(Trajectory);

pub struct CvmSpectrum(SpectrumSeries);

/// Scenario-derived quantities; frequencies in Hz.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvmDerived {
    pub q_total: f64,
    pub gamma_c_hz: f64,
    pub gamma_m_hz: f64,
    pub spring_constant_n_per_m: f64,
    pub g_khz_per_nm: f64,
}

/// Lorentzian fit result; frequencies in Hz.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvmLorentzianFit {
    pub center_hz: f64,
    pub center_err_hz: f64,
    pub fwhm_hz: f64,
    pub fwhm_err_hz: f64,
    pub peak: f64,
    pub background: f64,
    pub residual_rms: f64,
    pub iterations: u32,
    pub converged: bool,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CvmProjectionSummary {
    /// Power where shot-noise imprecision meets backaction, W.
    pub intersection_power_w: f64,
    /// Power of minimum total uncertainty with amplifier noise, W.
    pub minimum_power_w: f64,
    /// Linear ratio of the minimum total uncertainty to the SQL.
    pub minimum_ratio_to_sql: f64,
    pub amplifier_quanta: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(message: String) {
    let c = CString::new(message.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn fail(status: CvmStatus, message: impl Into<String>) -> CvmStatus {
    set_error(message.into());
    status
}

fn from_error(e: Error) -> CvmStatus {
    let status = CvmStatus::from(&e);
    fail(status, e.to_string())
}

/// Runs `f`, clearing the last error first and trapping panics.
fn guard(f: impl FnOnce() -> CvmStatus) -> CvmStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(CvmStatus::Panic, format!("panic: {message}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, CvmStatus> {
    if p.is_null() {
        return Err(fail(CvmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| fail(CvmStatus::InvalidArgument, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, CvmStatus> {
    p.as_ref().ok_or_else(|| fail(CvmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn handle_mut<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, CvmStatus> {
    p.as_mut().ok_or_else(|| fail(CvmStatus::NullPointer, format!("{what} is null")))
}

/// Moves `value` into a new handle stored at `out`.
unsafe fn put_box<T>(out: *mut *mut T, value: T) -> CvmStatus {
    if out.is_null() {
        return fail(CvmStatus::NullPointer, "output pointer is null");
    }
    out.write(Box::into_raw(Box::new(value)));
    CvmStatus::Ok
}

/// Writes `value` to `out`, which must be non-null.
unsafe fn put<T>(out: *mut T, value: T) -> CvmStatus {
    if out.is_null() {
        return fail(CvmStatus::NullPointer, "output pointer is null");
    }
    out.write(value);
    CvmStatus::Ok
}

macro_rules! tri {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(s) => return s,
        }
    };
}

macro_rules! core {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return from_error(e),
        }
    };
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn cvm_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (always
/// NUL-terminated when `len > 0`, truncated if needed).
///
/// Returns the buffer size needed for the full message including the NUL,
/// or 0 when there is no error.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn cvm_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match &*e.borrow() {
        None => 0,
        Some(message) => {
            let bytes = message.as_bytes_with_nul();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len);
                std::ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n - 1) = 0;
            }
            bytes.len()
        }
    })
}

/// Parses a scenario from TOML text.
///
/// # Safety
/// `toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_scenario_from_toml(toml: *const c_char, out: *mut *mut CvmScenario) -> CvmStatus {
    guard(|| {
        let text = tri!(str_arg(toml, "toml"));
        let scenario = core!(Scenario::from_toml_str(text));
        put_box(out, CvmScenario(scenario))
    })
}

/// Reads a scenario from a TOML file.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_scenario_from_path(path: *const c_char, out: *mut *mut CvmScenario) -> CvmStatus {
    guard(|| {
        let path = tri!(str_arg(path, "path"));
        let scenario = core!(Scenario::from_path(Path::new(path)));
        put_box(out, CvmScenario(scenario))
    })
}

/// # Safety
/// `scenario` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvm_scenario_free(scenario: *mut CvmScenario) {
    if !scenario.is_null() {
        drop(Box::from_raw(scenario));
    }
}

/// Sets the master seed. Seeds above `INT64_MAX` are rejected.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvm_scenario_set_seed(scenario: *mut CvmScenario, seed: u64) -> CvmStatus {
    guard(|| {
        let s = tri!(handle_mut(scenario, "scenario"));
        core!(s.0.seed(Some(seed)));
        s.0.run.seed = Some(seed);
        CvmStatus::Ok
    })
}

/// Sets the bath temperature, mK.
///
/// # Safety
/// `scenario` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn cvm_scenario_set_temperature_mk(scenario: *mut CvmScenario, temperature_mk: f64) -> CvmStatus {
    guard(|| {
        let s = tri!(handle_mut(scenario, "scenario"));
        let mut updated = s.0.clone();
        updated.mechanics.temperature_mk = temperature_mk;
        core!(updated.validate());
        s.0 = updated;
        CvmStatus::Ok
    })
}

/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_scenario_derived(scenario: *const CvmScenario, out: *mut CvmDerived) -> CvmStatus {
    guard(|| {
        let s = tri!(handle(scenario, "scenario"));
        let d = core!(runner::derived(&s.0));
        put(
            out,
            CvmDerived {
                q_total: d.q_total,
                gamma_c_hz: d.gamma_c_hz,
                gamma_m_hz: d.gamma_m_hz,
                spring_constant_n_per_m: d.spring_constant_n_per_m,
                g_khz_per_nm: d.g_khz_per_nm,
            },
        )
    })
}

/// Runs a workflow and writes its artifacts and manifest under `out_dir`.
/// Nothing is written if the workflow fails.
///
/// # Safety
/// `scenario` must be a live handle; `out_dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn cvm_run(
    scenario: *const CvmScenario,
    command: CvmCommand,
    out_dir: *const c_char,
) -> CvmStatus {
    guard(|| {
        let s = &tri!(handle(scenario, "scenario")).0;
        let dir = tri!(str_arg(out_dir, "out_dir"));
        let ctx = RunContext::default();
        let output = match command {
            CvmCommand::Simulate => runner::run_simulate(s, &ctx),
            CvmCommand::Calibrate => runner::run_calibrate(s, &ctx).map(|r| r.0),
            CvmCommand::Budget => runner::run_budget(s, &ctx).map(|r| r.0),
            CvmCommand::Project => runner::run_project(s).map(|r| r.0),
            CvmCommand::Gaincal => runner::run_gaincal(s, &ctx).map(|r| r.0),
        };
        let output = core!(output);
        core!(runner::write_outputs(Path::new(dir), &output));
        CvmStatus::Ok
    })
}

/// Simulates the scenario's Langevin record at its bath temperature.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_simulate(
    scenario: *const CvmScenario,
    seed: u64,
    out: *mut *mut CvmTrajectory,
) -> CvmStatus {
    guard(|| {
        let s = &tri!(handle(scenario, "scenario")).0;
        if out.is_null() {
            return fail(CvmStatus::NullPointer, "output pointer is null");
        }
        // checked early: the simulation may take a while
        let mode = core!(s.mode());
        let trajectory = core!(runner::simulate_trajectory(s, &mode, seed));
        put_box(out, CvmTrajectory(trajectory))
    })
}

/// # Safety
/// `trajectory` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_trajectory_len(trajectory: *const CvmTrajectory, len: *mut usize) -> CvmStatus {
    guard(|| put(len, tri!(handle(trajectory, "trajectory")).0.samples.len()))
}

/// Sample interval of the record, s.
///
/// # Safety
/// `trajectory` must be a live handle; `dt` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_trajectory_dt(trajectory: *const CvmTrajectory, dt: *mut f64) -> CvmStatus {
    guard(|| put(dt, tri!(handle(trajectory, "trajectory")).0.dt))
}

/// Copies up to `len` displacement samples (m) into `buf` and stores the
/// count in `written`.
///
/// # Safety
/// `buf` must point to `len` writable doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_trajectory_copy(
    trajectory: *const CvmTrajectory,
    buf: *mut f64,
    len: usize,
    written: *mut usize,
) -> CvmStatus {
    guard(|| {
        let t = tri!(handle(trajectory, "trajectory"));
        if buf.is_null() || written.is_null() {
            return fail(CvmStatus::NullPointer, "output buffer is null");
        }
        let n = t.0.samples.len().min(len);
        std::ptr::copy_nonoverlapping(t.0.samples.as_ptr(), buf, n);
        put(written, n)
    })
}

/// # Safety
/// `trajectory` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvm_trajectory_free(trajectory: *mut CvmTrajectory) {
    if !trajectory.is_null() {
        drop(Box::from_raw(trajectory));
    }
}

/// One-sided Welch PSD (m^2/Hz) with a periodic Hann window.
///
/// # Safety
/// `trajectory` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_welch(
    trajectory: *const CvmTrajectory,
    segment_length: usize,
    overlap: f64,
    out: *mut *mut CvmSpectrum,
) -> CvmStatus {
    guard(|| {
        let t = tri!(handle(trajectory, "trajectory"));
        let psd = core!(welch_psd(&t.0, segment_length, overlap));
        put_box(out, CvmSpectrum(psd))
    })
}

/// Wraps caller data (Hz, increasing; values in arbitrary units) as a
/// spectrum handle. The arrays are copied.
///
/// # Safety
/// `frequencies` and `values` must each point to `len` readable doubles.
#[no_mangle]
pub unsafe extern "C" fn cvm_spectrum_from_arrays(
    frequencies: *const f64,
    values: *const f64,
    len: usize,
    out: *mut *mut CvmSpectrum,
) -> CvmStatus {
    guard(|| {
        if frequencies.is_null() || values.is_null() {
            return fail(CvmStatus::NullPointer, "input array is null");
        }
        let f = std::slice::from_raw_parts(frequencies, len).to_vec();
        let v = std::slice::from_raw_parts(values, len).to_vec();
        let series = core!(SpectrumSeries::new(f, v, SpectrumUnits::Arbitrary));
        put_box(out, CvmSpectrum(series))
    })
}

/// # Safety
/// `spectrum` must be a live handle; `len` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_spectrum_len(spectrum: *const CvmSpectrum, len: *mut usize) -> CvmStatus {
    guard(|| put(len, tri!(handle(spectrum, "spectrum")).0.len()))
}

/// Copies up to `len` bins into `frequencies` (Hz) and `values`, storing
/// the count in `written`.
///
/// # Safety
/// Both buffers must hold `len` writable doubles; `written` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_spectrum_copy(
    spectrum: *const CvmSpectrum,
    frequencies: *mut f64,
    values: *mut f64,
    len: usize,
    written: *mut usize,
) -> CvmStatus {
    guard(|| {
        let s = &tri!(handle(spectrum, "spectrum")).0;
        if frequencies.is_null() || values.is_null() || written.is_null() {
            return fail(CvmStatus::NullPointer, "output buffer is null");
        }
        let n = s.len().min(len);
        std::ptr::copy_nonoverlapping(s.frequencies.as_ptr(), frequencies, n);
        std::ptr::copy_nonoverlapping(s.values.as_ptr(), values, n);
        put(written, n)
    })
}

/// # Safety
/// `spectrum` must be null or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn cvm_spectrum_free(spectrum: *mut CvmSpectrum) {
    if !spectrum.is_null() {
        drop(Box::from_raw(spectrum));
    }
}

/// Fits a Lorentzian plus flat background over `[lo_hz, hi_hz]`. An
/// unconverged fit returns `CVM_STATUS_OK` with `converged = false`.
///
/// # Safety
/// `spectrum` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_fit_lorentzian(
    spectrum: *const CvmSpectrum,
    lo_hz: f64,
    hi_hz: f64,
    out: *mut CvmLorentzianFit,
) -> CvmStatus {
    guard(|| {
        let s = &tri!(handle(spectrum, "spectrum")).0;
        let fit = core!(fit_lorentzian(s, (lo_hz, hi_hz)));
        let err = fit.std_errors();
        put(
            out,
            CvmLorentzianFit {
                center_hz: to_hz(fit.center),
                center_err_hz: to_hz(err[0]),
                fwhm_hz: to_hz(fit.fwhm_gamma),
                fwhm_err_hz: to_hz(err[1]),
                peak: fit.peak,
                background: fit.background,
                residual_rms: fit.residual_rms,
                iterations: fit.iterations as u32,
                converged: fit.converged,
            },
        )
    })
}

/// Quantum-limit projection for a lossless-cavity scenario.
///
/// # Safety
/// `scenario` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cvm_projection_summary(
    scenario: *const CvmScenario,
    out: *mut CvmProjectionSummary,
) -> CvmStatus {
    guard(|| {
        let s = &tri!(handle(scenario, "scenario")).0;
        let p = core!(runner::projection_scenario(s));
        let min = minimum_total_uncertainty(&p);
        put(
            out,
            CvmProjectionSummary {
                intersection_power_w: intersection_power(&p),
                minimum_power_w: min.power,
                minimum_ratio_to_sql: min.linear_ratio_to_sql,
                amplifier_quanta: p.amplifier_quanta(),
            },
        )
    })
}
