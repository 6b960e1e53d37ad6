use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cavimeter::config::Scenario;
use cavimeter::runner::{self, RunContext, RunOutput};
use cavimeter::units::to_khz_per_nm;
use cavimeter::Error;

/// Displacement-detection simulator and noise-budget calculator for
/// microwave-cavity nanomechanics.
#[derive(Parser)]
#[command(name = "cavimeter", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master seed; overrides `run.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Periodogram averages for detector noise; 0 gives expected spectra.
    #[arg(long)]
    averages: Option<u32>,
    /// Run sweep points one after another instead of in parallel.
    #[arg(long)]
    serial: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Langevin trajectory plus displacement and detected spectra.
    Simulate(Common),
    /// Temperature-sweep calibration of the coupling g.
    Calibrate(Common),
    /// Imprecision and saturation budget versus probe power.
    Budget(Common),
    /// Quantum-limit projection versus probe power.
    Project(Common),
    /// Lorentzian fit of a two-column spectrum file.
    Fit {
        #[command(flatten)]
        common: Common,
        /// Spectrum CSV (`nu_hz,value`).
        #[arg(long)]
        input: PathBuf,
    },
    /// Readout gain calibration with a constant electrostatic drive.
    Gaincal(Common),
}

fn context(c: &Common) -> RunContext {
    RunContext {
        seed: c.seed,
        averages: c.averages,
        execution: if c.serial { runner::Execution::Serial } else { runner::Execution::Parallel },
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (common, output, summary) = match &cli.command {
        Command::Simulate(c) => {
            let scenario = Scenario::from_path(&c.config)?;
            let out = runner::run_simulate(&scenario, &context(c))?;
            (c, out, String::new())
        }
        Command::Calibrate(c) => {
            let scenario = Scenario::from_path(&c.config)?;
            let (out, report) = runner::run_calibrate(&scenario, &context(c))?;
            let mut s = format!(
                "g = 2pi x {:.4} kHz/nm, T intercept {:.1} mK",
                to_khz_per_nm(report.sweep.g_fit),
                report.sweep.t_intercept * 1e3
            );
            if !report.excluded.is_empty() {
                s += &format!("; {} point(s) below the fit window excluded", report.excluded.len());
            }
            (c, out, s)
        }
        Command::Budget(c) => {
            let scenario = Scenario::from_path(&c.config)?;
            let (out, rows) = runner::run_budget(&scenario, &context(c))?;
            (c, out, format!("{} budget rows", rows.len()))
        }
        Command::Project(c) => {
            let scenario = Scenario::from_path(&c.config)?;
            let (out, rows) = runner::run_project(&scenario)?;
            (c, out, format!("{} projection rows", rows.len()))
        }
        Command::Fit { common, input } => {
            let scenario = Scenario::from_path(&common.config)?;
            let spectrum = runner::read_spectrum(input)?;
            let (out, fit) = runner::run_fit_output(&scenario, &spectrum)?;
            let s = format!(
                "center {:.3} Hz, fwhm {:.3} Hz, converged {}",
                cavimeter::units::to_hz(fit.center),
                cavimeter::units::to_hz(fit.fwhm_gamma),
                fit.converged
            );
            if !fit.converged {
                // keep the flagged report for inspection, then fail
                finish(&common.out, &out, &s)?;
                return Err(Error::Fit(format!("did not converge ({:?})", fit.flag)));
            }
            (common, out, s)
        }
        Command::Gaincal(c) => {
            let scenario = Scenario::from_path(&c.config)?;
            let (out, est) = runner::run_gaincal(&scenario, &context(c))?;
            (c, out, format!("gain factor {:.4}", est.gain_factor))
        }
    };
    finish(&common.out, &output, &summary)
}

fn finish(dir: &std::path::Path, output: &RunOutput, summary: &str) -> Result<(), Error> {
    let written = runner::write_outputs(dir, output)?;
    // a closed stdout must not turn a finished run into a failure
    let mut stdout = std::io::stdout().lock();
    if !summary.is_empty() {
        let _ = writeln!(stdout, "{summary}");
    }
    for path in written {
        let _ = writeln!(stdout, "wrote {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_config() { 2 } else { 3 })
        }
    }
}
