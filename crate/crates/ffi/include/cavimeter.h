#ifndef CAVIMETER_H
#define CAVIMETER_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

/*
 Workflows runnable through [`cvm_run`].
 */
typedef enum CvmCommand {
  CVM_COMMAND_SIMULATE = 0,
  CVM_COMMAND_CALIBRATE = 1,
  CVM_COMMAND_BUDGET = 2,
  CVM_COMMAND_PROJECT = 3,
  CVM_COMMAND_GAINCAL = 4,
} CvmCommand;

typedef enum CvmStatus {
  CVM_STATUS_OK = 0,
  CVM_STATUS_NULL_POINTER = 1,
  /*
   Malformed argument, such as a string that is not UTF-8.
   */
  CVM_STATUS_INVALID_ARGUMENT = 2,
  /*
   Scenario could not be parsed or failed validation.
   */
  CVM_STATUS_CONFIG = 3,
  /*
   Parameters outside the physical domain of a model.
   */
  CVM_STATUS_DOMAIN = 4,
  /*
   Fit, calibration or data sufficiency failure.
   */
  CVM_STATUS_NUMERICAL = 5,
  CVM_STATUS_IO = 6,
  CVM_STATUS_PANIC = 7,
} CvmStatus;

typedef struct CvmScenario CvmScenario;

typedef struct CvmSpectrum CvmSpectrum;

typedef struct CvmTrajectory CvmTrajectory;

/*
 Scenario-derived quantities; frequencies in Hz.
 */
typedef struct CvmDerived {
  double q_total;
  double gamma_c_hz;
  double gamma_m_hz;
  double spring_constant_n_per_m;
  double g_khz_per_nm;
} CvmDerived;

/*
 Lorentzian fit result; frequencies in Hz.
 */
typedef struct CvmLorentzianFit {
  double center_hz;
  double center_err_hz;
  double fwhm_hz;
  double fwhm_err_hz;
  double peak;
  double background;
  double residual_rms;
  uint32_t iterations;
  bool converged;
} CvmLorentzianFit;

typedef struct CvmProjectionSummary {
  /*
   Power where shot-noise imprecision meets backaction, W.
   */
  double intersection_power_w;
  /*
   Power of minimum total uncertainty with amplifier noise, W.
   */
  double minimum_power_w;
  /*
   Linear ratio of the minimum total uncertainty to the SQL.
   */
  double minimum_ratio_to_sql;
  double amplifier_quanta;
} CvmProjectionSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Library version as a static NUL-terminated string.
 */
const char *cvm_version(void);

/*
 Copies the calling thread's last error message into `buf` (always
 NUL-terminated when `len > 0`, truncated if needed).

 Returns the buffer size needed for the full message including the NUL,
 or 0 when there is no error.

 # Safety
 `buf` must be null or point to `len` writable bytes.
 */
uintptr_t cvm_last_error(char *buf, uintptr_t len);

/*
 Parses a scenario from TOML text.

 # Safety
 `toml` must be a NUL-terminated string; `out` must be writable.
 */
enum CvmStatus cvm_scenario_from_toml(const char *toml, struct CvmScenario **out);

/*
 Reads a scenario from a TOML file.

 # Safety
 `path` must be a NUL-terminated string; `out` must be writable.
 */
enum CvmStatus cvm_scenario_from_path(const char *path, struct CvmScenario **out);

/*
 # Safety
 `scenario` must be null or a handle from this library, not yet freed.
 */
void cvm_scenario_free(struct CvmScenario *scenario);

/*
 Sets the master seed. Seeds above `INT64_MAX` are rejected.

 # Safety
 `scenario` must be a live handle.
 */
enum CvmStatus cvm_scenario_set_seed(struct CvmScenario *scenario, uint64_t seed);

/*
 Sets the bath temperature, mK.

 # Safety
 `scenario` must be a live handle.
 */
enum CvmStatus cvm_scenario_set_temperature_mk(struct CvmScenario *scenario, double temperature_mk);

/*
 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CvmStatus cvm_scenario_derived(const struct CvmScenario *scenario, struct CvmDerived *out);

/*
 Runs a workflow and writes its artifacts and manifest under `out_dir`.
 Nothing is written if the workflow fails.

 # Safety
 `scenario` must be a live handle; `out_dir` a NUL-terminated path.
 */
enum CvmStatus cvm_run(const struct CvmScenario *scenario,
                       enum CvmCommand command,
                       const char *out_dir);

/*
 Simulates the scenario's Langevin record at its bath temperature.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CvmStatus cvm_simulate(const struct CvmScenario *scenario,
                            uint64_t seed,
                            struct CvmTrajectory **out);

/*
 # Safety
 `trajectory` must be a live handle; `len` must be writable.
 */
enum CvmStatus cvm_trajectory_len(const struct CvmTrajectory *trajectory, uintptr_t *len);

/*
 Sample interval of the record, s.

 # Safety
 `trajectory` must be a live handle; `dt` must be writable.
 */
enum CvmStatus cvm_trajectory_dt(const struct CvmTrajectory *trajectory, double *dt);

/*
 Copies up to `len` displacement samples (m) into `buf` and stores the
 count in `written`.

 # Safety
 `buf` must point to `len` writable doubles; `written` must be writable.
 */
enum CvmStatus cvm_trajectory_copy(const struct CvmTrajectory *trajectory,
                                   double *buf,
                                   uintptr_t len,
                                   uintptr_t *written);

/*
 # Safety
 `trajectory` must be null or a handle from this library, not yet freed.
 */
void cvm_trajectory_free(struct CvmTrajectory *trajectory);

/*
 One-sided Welch PSD (m^2/Hz) with a periodic Hann window.

 # Safety
 `trajectory` must be a live handle; `out` must be writable.
 */
enum CvmStatus cvm_welch(const struct CvmTrajectory *trajectory,
                         uintptr_t segment_length,
                         double overlap,
                         struct CvmSpectrum **out);

/*
 Wraps caller data (Hz, increasing; values in arbitrary units) as a
 spectrum handle. The arrays are copied.

 # Safety
 `frequencies` and `values` must each point to `len` readable doubles.
 */
enum CvmStatus cvm_spectrum_from_arrays(const double *frequencies,
                                        const double *values,
                                        uintptr_t len,
                                        struct CvmSpectrum **out);

/*
 # Safety
 `spectrum` must be a live handle; `len` must be writable.
 */
enum CvmStatus cvm_spectrum_len(const struct CvmSpectrum *spectrum, uintptr_t *len);

/*
 Copies up to `len` bins into `frequencies` (Hz) and `values`, storing
 the count in `written`.

 # Safety
 Both buffers must hold `len` writable doubles; `written` must be writable.
 */
enum CvmStatus cvm_spectrum_copy(const struct CvmSpectrum *spectrum,
                                 double *frequencies,
                                 double *values,
                                 uintptr_t len,
                                 uintptr_t *written);

/*
 # Safety
 `spectrum` must be null or a handle from this library, not yet freed.
 */
void cvm_spectrum_free(struct CvmSpectrum *spectrum);

/*
 Fits a Lorentzian plus flat background over `[lo_hz, hi_hz]`. An
 unconverged fit returns `CVM_STATUS_OK` with `converged = false`.

 # Safety
 `spectrum` must be a live handle; `out` must be writable.
 */
enum CvmStatus cvm_fit_lorentzian(const struct CvmSpectrum *spectrum,
                                  double lo_hz,
                                  double hi_hz,
                                  struct CvmLorentzianFit *out);

/*
 Quantum-limit projection for a lossless-cavity scenario.

 # Safety
 `scenario` must be a live handle; `out` must be writable.
 */
enum CvmStatus cvm_projection_summary(const struct CvmScenario *scenario,
                                      struct CvmProjectionSummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CAVIMETER_H */
