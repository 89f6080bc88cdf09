use std::io::{stderr, stdout};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qtransport_cli::{execute, load_config, report_error, Command, RunOptions, SweepSpec, ValidateSpec};

#[derive(Parser)]
#[command(
    name = "qtransport",
    version,
    about = "Transport between two finite reservoirs through a tight-binding channel"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Configuration file (flat key = value lines)
    config: PathBuf,
    /// Override a configuration entry, e.g. --set t_end=500
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Integrate the scenario and write CSV, summary and plot
    Run {
        #[command(flatten)]
        common: Common,
        /// Plot against log10 t
        #[arg(long)]
        log_x: bool,
        /// Comma-separated CSV columns to plot (default: all n_i)
        #[arg(long, value_delimiter = ',')]
        plot: Vec<String>,
    },
    /// Print the relaxation time and the effective spectrum
    Relax {
        #[command(flatten)]
        common: Common,
    },
    /// Print the final equilibrium state
    Equilibrium {
        #[command(flatten)]
        common: Common,
    },
    /// Vary one key over a grid, one summary row per point
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        key: String,
        #[arg(long, requires_all = ["to", "points"], conflicts_with = "values", allow_negative_numbers = true)]
        from: Option<f64>,
        #[arg(long, allow_negative_numbers = true)]
        to: Option<f64>,
        #[arg(long)]
        points: Option<usize>,
        /// Explicit comma-separated grid
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        values: Vec<f64>,
        /// With key mu_L0 or N_L0, also set the right partner to value - offset
        #[arg(long, allow_negative_numbers = true)]
        pair_offset: Option<f64>,
        /// Row file (default: stdout)
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare against the many-body master equation
    Validate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 50.0)]
        t_end: f64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Boson cutoff (default: from the initial occupations)
        #[arg(long)]
        n_max: Option<usize>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (common, command) = match cli.command {
        Cmd::Run { common, log_x, plot } => (
            common,
            Command::Run(RunOptions {
                log_x,
                plot_columns: plot,
            }),
        ),
        Cmd::Relax { common } => (common, Command::Relax),
        Cmd::Equilibrium { common } => (common, Command::Equilibrium),
        Cmd::Sweep {
            common,
            key,
            from,
            to,
            points,
            values,
            pair_offset,
            out,
        } => {
            let values = match (from, to, points) {
                (Some(a), Some(b), Some(n)) => SweepSpec::linspace(a, b, n),
                _ => values,
            };
            (
                common,
                Command::Sweep(SweepSpec {
                    key,
                    values,
                    pair_offset,
                    out,
                }),
            )
        }
        Cmd::Validate {
            common,
            t_end,
            samples,
            n_max,
        } => (common, Command::Validate(ValidateSpec { t_end, samples, n_max })),
    };
    let code = match load_config(&common.config, &common.overrides) {
        Ok(config) => execute(&command, &config, &mut stdout(), &mut stderr()),
        Err(e) => report_error(&e, &mut stderr()),
    };
    ExitCode::from(code as u8)
}
