#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod error;
mod output;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "odf", version, about = "Phase-sensitive optical-dipole-force state detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Common {
    /// Run configuration file, or `default` for the shipped one.
    #[arg(long, default_value = "default")]
    pub config: String,
    /// Output directory.
    #[arg(long, default_value = "odf-out")]
    pub out: PathBuf,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    pub threads: usize,
}

#[derive(Subcommand)]
enum Command {
    /// List the hyperfine-Zeeman states of the molecular ground state.
    Enumerate {
        #[command(flatten)]
        common: Common,
        /// Highest rotational level N''.
        #[arg(long)]
        nmax: Option<u32>,
    },
    /// Single-beam Stark shift of every state against lattice wavelength.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 785.0)]
        from_nm: f64,
        #[arg(long, default_value_t = 790.0)]
        to_nm: f64,
        #[arg(long, default_value_t = 501)]
        points: usize,
        /// Only states without nuclear spin.
        #[arg(long)]
        spinless: bool,
    },
    /// Mode frequencies, lattice excitation and sideband signals.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Also write the full same-phase trajectory.
        #[arg(long)]
        trajectory: bool,
    },
    /// Build a calibration bundle and optionally correct it for a partner molecule.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Atomic shifts (Hz), overriding the configured list.
        #[arg(long, value_delimiter = ',')]
        shifts: Option<Vec<f64>>,
        /// Sideband signal CSV recorded on the partner molecule alone.
        #[arg(long, requires = "atomic_shift_hz")]
        partner_signal: Option<PathBuf>,
        /// Atomic shift (Hz) of the partner measurement.
        #[arg(long, allow_hyphen_values = true)]
        atomic_shift_hz: Option<f64>,
    },
    /// Match measurements against predicted shifts of all states.
    Identify {
        #[command(flatten)]
        common: Common,
        /// Measurement CSV.
        #[arg(long, conflicts_with_all = ["sp", "op"], required_unless_present = "sp")]
        measurements: Option<PathBuf>,
        /// Same-phase sideband signal CSV.
        #[arg(long, requires_all = ["op", "bundle"])]
        sp: Option<PathBuf>,
        /// Opposite-phase sideband signal CSV.
        #[arg(long, requires = "sp")]
        op: Option<PathBuf>,
        /// Calibration bundle directory.
        #[arg(long)]
        bundle: Option<PathBuf>,
        /// Also apply the sign-only readout for N'' up to this level.
        #[arg(long)]
        exclude_up_to: Option<u32>,
    },
    /// Wavelength windows where the detuning sign alone excludes low N''.
    Windows {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        exclude_up_to: u32,
    },
    /// Classify consecutive measurements as reaction, quantum jump or no change.
    Classify {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        measurements: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Enumerate { common, nmax } => commands::enumerate(&common, nmax),
        Command::Spectrum { common, from_nm, to_nm, points, spinless } => {
            commands::spectrum(&common, from_nm, to_nm, points, spinless)
        }
        Command::Simulate { common, trajectory } => commands::simulate(&common, trajectory),
        Command::Calibrate { common, shifts, partner_signal, atomic_shift_hz } => {
            commands::calibrate(&common, shifts, partner_signal.zip(atomic_shift_hz))
        }
        Command::Identify { common, measurements, sp, op, bundle, exclude_up_to } => {
            let input = match (measurements, sp, op, bundle) {
                (Some(m), ..) => commands::IdentifyInput::Measurements(m),
                (None, Some(sp), Some(op), Some(bundle)) => commands::IdentifyInput::Signals { sp, op, bundle },
                _ => unreachable!("clap enforces the input combinations"),
            };
            commands::identify(&common, input, exclude_up_to)
        }
        Command::Windows { common, exclude_up_to } => commands::windows(&common, exclude_up_to),
        Command::Classify { common, measurements } => commands::classify(&common, &measurements),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
