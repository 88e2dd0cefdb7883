use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use trlink::cli::{self, plot, run, CliError, Config, PlotKind};

/// Time-reversal link simulator.
#[derive(Debug, Parser)]
#[command(name = "trlink", version)]
struct Args {
    /// Worker threads for sweep points.
    #[arg(long, global = true, default_value_t = 1)]
    jobs: usize,
    /// Replace the bit and noise seeds from the config.
    #[arg(long, global = true)]
    seed_override: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run every sweep point and write the results and summary CSVs.
    Run {
        config: PathBuf,
        /// Results CSV; the summary goes next to it.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Check a config and print the resolved settings.
    Validate { config: PathBuf },
    /// Plot a results CSV as SVG.
    Plot {
        csv: PathBuf,
        /// ber_vs_rate, sinr_vs_power or rate_vs_sampling
        #[arg(long)]
        kind: PlotKind,
        #[arg(short, long)]
        output: PathBuf,
    },
}

fn execute(args: Args) -> Result<(), CliError> {
    match args.command {
        Command::Run { config, output } => {
            let mut cfg = Config::load(&config)?;
            if let Some(s) = args.seed_override {
                cfg.override_seed(s);
            }
            if let Some(out) = output {
                cfg.summary_csv = cli::config::summary_path_for(&out);
                cfg.results_csv = out;
            }
            let rows = run::run_config(&cfg, args.jobs)?;
            cli::write_atomic(&cfg.results_csv, &run::results_csv(&rows)?)?;
            cli::write_atomic(&cfg.summary_csv, &run::summary_csv(&rows)?)?;
            eprintln!("wrote {} rows to {}", rows.len(), cfg.results_csv.display());
            eprintln!("summary in {}", cfg.summary_csv.display());
        }
        Command::Validate { config } => print!("{}", cli::validate_config(&config, args.seed_override)?),
        Command::Plot { csv, kind, output } => {
            plot::plot_file(&csv, kind, &output)?;
            eprintln!("wrote {}", output.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Args::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("trlink: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
