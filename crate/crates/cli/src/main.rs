//! `nlps`: batch front door for the pseudospectral toolkit. Four
//! subcommands cover the offline workflows: `simulate` integrates a
//! configured scenario and writes norm series plus snapshots, `certify`
//! builds and checks the Fourier-side blow-up certificate, `lemmas` runs
//! the slow quadrature sweeps behind the decay estimates, and
//! `compare-oracle` cross-validates the spectral solver against the
//! direct-sum reference on a small frequency box.
//!
//! Exit codes are stable: 0 success, 1 configuration or usage error, 2
//! solver overflow, 3 certificate failure, 4 oracle mismatch. Internal
//! parallelism is capped by the `NLP_THREADS` environment variable.

mod certify;
mod compare;
mod config;
mod lemmas;
mod output;
mod simulate;

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(
    name = "nlps",
    version,
    about = "Pseudospectral runs and Fourier-side blow-up certificates \
             for nonlocal drift-diffusion systems",
    after_help = "Exit codes: 0 ok, 1 config error, 2 overflow, 3 certificate failure, \
                  4 oracle mismatch.\nSet NLP_THREADS to cap internal parallelism."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Amplitude argument of `certify`: an explicit value, or `auto` to
/// estimate the divergence threshold first and certify at twice it.
#[derive(Debug, Clone, Copy)]
enum Amplitude {
    Auto,
    Value(f64),
}

impl FromStr for Amplitude {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(Amplitude::Auto);
        }
        match s.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(Amplitude::Value(v)),
            _ => Err(format!("expected a positive number or `auto`, got {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum CertifyMode {
    RecursionOnly,
    SolverCoupled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
enum LemmaSweep {
    KDecay,
    Duhamel,
    Chandrasekhar,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate a configured scenario; write norms.csv, snapshots and a
    /// run summary.
    Simulate {
        /// Scenario description (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the config's `output` entry.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the dyadic certificate ladder, estimate the divergence
    /// threshold and write a report.
    Certify {
        /// Space dimension (2 or 3).
        #[arg(long)]
        dim: usize,
        /// Ladder depth. Recursion-only mode needs 3..=40; solver-coupled
        /// mode is capped at 3.
        #[arg(long)]
        kmax: u32,
        /// Certificate amplitude: a number, or `auto` for twice the
        /// estimated threshold.
        #[arg(long = "A", default_value = "auto")]
        amplitude: Amplitude,
        /// Regularity index of the divergence table.
        #[arg(long = "a", default_value_t = 0.0, allow_negative_numbers = true)]
        besov_index: f64,
        /// Pure recursion, or recursion plus trajectory barriers.
        #[arg(long, value_enum, default_value_t = CertifyMode::RecursionOnly)]
        mode: CertifyMode,
        /// Report path (JSON).
        #[arg(long)]
        out: PathBuf,
        /// Solver-coupled only: grid resolution per axis.
        #[arg(long, default_value_t = 128)]
        n: usize,
        /// Solver-coupled only: torus period.
        #[arg(long, default_value_t = 32.0 * std::f64::consts::PI)]
        period: f64,
        /// Solver-coupled only: time step.
        #[arg(long, default_value_t = 1e-3)]
        dt: f64,
        /// Solver-coupled only: integration horizon; defaults to the
        /// singular time of the certificate ladder.
        #[arg(long, default_value_t = nlps_core::t_star())]
        t_end: f64,
        /// Solver-coupled only: keep every this-many-th solver state.
        #[arg(long, default_value_t = 20)]
        snapshot_every: usize,
        /// Solver-coupled only: relative tolerance of the barrier
        /// comparison.
        #[arg(long, default_value_t = 0.01)]
        barrier_tol: f64,
    },
    /// Run one of the slow quadrature sweeps and write its CSV table.
    Lemmas {
        /// Which sweep to run.
        #[arg(long, value_enum)]
        which: LemmaSweep,
        /// Space dimension. The quadrature sweeps are implemented for d=3;
        /// the stationary-profile residuals accept any d >= 3.
        #[arg(long, default_value_t = 3)]
        dim: usize,
        /// Quadrature panels per integral.
        #[arg(long, default_value_t = 256)]
        panels: usize,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Cross-validate the spectral solver against the direct-sum reference.
    CompareOracle {
        /// Scenario description (JSON); the grid must reduce to an integer
        /// frequency box.
        #[arg(long)]
        config: PathBuf,
        /// Frequency cutoff of the reference box. Defaults to the initial
        /// data's support radius; choosing it smaller deliberately
        /// mismatches the two truncations.
        #[arg(long)]
        radius: Option<i64>,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not errors; everything else is
            // a usage problem and lands in the config-error exit class.
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let outcome = match cli.command {
        Command::Simulate { config, out } => simulate::run(&config, out.as_deref()),
        Command::Certify {
            dim,
            kmax,
            amplitude,
            besov_index,
            mode,
            out,
            n,
            period,
            dt,
            t_end,
            snapshot_every,
            barrier_tol,
        } => certify::run(&certify::Args {
            dim,
            kmax,
            amplitude,
            besov_index,
            mode,
            out,
            n,
            period,
            dt,
            t_end,
            snapshot_every,
            barrier_tol,
        }),
        Command::Lemmas { which, dim, panels, out } => lemmas::run(which, dim, panels, &out),
        Command::CompareOracle { config, radius } => compare::run(&config, radius),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
