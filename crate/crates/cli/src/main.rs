mod commands;
mod exit;
mod output;
mod state_file;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use spincm_core::verify::Suite;

use commands::{DiscreteArgs, GenerateArgs, KpArgs, SimulateArgs};

#[derive(Parser)]
#[command(name = "spincm", version, about = "Spin hyperbolic Calogero-Moser flows, discrete map and KP checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the t_m flow with RK4 and write the trajectory as CSV.
    Simulate {
        #[arg(long)]
        state: PathBuf,
        /// Flow index m >= 1.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        flow: u64,
        #[arg(long)]
        t_end: f64,
        #[arg(long)]
        dt: f64,
        /// Write every k-th step (the last step is always written).
        #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
        record_every: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Iterate the implicit discrete-time map and write the levels as CSV.
    Discrete {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        mu: f64,
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run an invariant suite and write the report.
    Verify {
        #[arg(long)]
        state: PathBuf,
        /// core, flows, discrete, kp or all.
        #[arg(long, default_value = "all")]
        suite: Suite,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the KP linear problems and residue relations at spectral parameter z.
    KpCheck {
        #[arg(long)]
        state: PathBuf,
        #[arg(long, allow_negative_numbers = true)]
        z: f64,
        /// Flow index m >= 1 for the residue relation.
        #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
        m: u64,
        #[arg(long, default_value_t = 8, value_parser = clap::value_parser!(u64).range(1..))]
        samples: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded random state file.
    Generate {
        #[arg(long)]
        particles: usize,
        #[arg(long)]
        colors: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        gamma: f64,
        #[arg(long, default_value_t = 1.0)]
        momentum_scale: f64,
        /// Redraw (seed + 1, ...) until the t_2 and t_3 flows stay regular up to this time.
        #[arg(long)]
        regular_until: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cmd: Command) -> Result<u8, exit::Failure> {
    match cmd {
        Command::Simulate {
            state,
            flow,
            t_end,
            dt,
            record_every,
            out,
        } => commands::simulate(&SimulateArgs {
            state,
            flow: flow as usize,
            t_end,
            dt,
            record_every: record_every as usize,
            out,
        }),
        Command::Discrete { state, mu, steps, out } => commands::discrete(&DiscreteArgs { state, mu, steps, out }),
        Command::Verify { state, suite, out } => commands::verify(&state, suite, &out),
        Command::KpCheck {
            state,
            z,
            m,
            samples,
            out,
        } => commands::kp(&KpArgs {
            state,
            z,
            m: m as usize,
            samples: samples as usize,
            out,
        }),
        Command::Generate {
            particles,
            colors,
            seed,
            gamma,
            momentum_scale,
            regular_until,
            out,
        } => commands::generate(&GenerateArgs {
            particles,
            colors,
            seed,
            gamma,
            momentum_scale,
            regular_until,
            out,
        }),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::USAGE } else { exit::OK });
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(f) => {
            eprintln!("error: {f}");
            f.exit_code()
        }
    }
}
