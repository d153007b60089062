use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use lsn_cli::network::NetworkScenario;
use lsn_cli::scenario::{validate_levels, McOverrides, Scenario};
use lsn_cli::{commands, CliError};

#[derive(Debug, Parser)]
#[command(name = "lsnsum", version, about = "Log skew normal approximation of correlated lognormal sums")]
struct Cli {
    /// Worker threads for Monte Carlo; results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Overrides the scenario's Monte Carlo seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Overrides the scenario's Monte Carlo sample count.
    #[arg(long, global = true)]
    samples: Option<usize>,
    /// Comma-separated probability levels for deviation reports.
    #[arg(long, global = true, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the LSN to a scenario and print the parameters as JSON.
    Fit {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate Monte Carlo, LSN and Fenton–Wilkinson cdfs and report
    /// horizontal deviations.
    Compare {
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON deviation report; printed to stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Dump the empirical cdf of the simulated sum.
    Simulate {
        scenario: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Evenly spaced order statistics to write; 0 writes every sample.
        #[arg(long, default_value_t = 1000)]
        points: usize,
    },
    /// Outage probability curves for each mobile placement.
    Outage {
        network: PathBuf,
        /// Output CSV; with several placements, `<stem>_<i>.<ext>` per placement.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Add a simulated column.
        #[arg(long)]
        mc: bool,
    },
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn placement_path(out: &Path, index: usize) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match out.extension() {
        Some(ext) => format!("{stem}_{index}.{}", ext.to_string_lossy()),
        None => format!("{stem}_{index}"),
    };
    out.with_file_name(name)
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("plain data serializes");
    s.push('\n');
    s
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(levels) = &cli.levels {
        validate_levels(levels)?;
    }
    let over = McOverrides {
        samples: cli.samples,
        seed: cli.seed,
        levels: cli.levels,
    };
    match cli.command {
        Command::Fit { scenario, out } => {
            let s = Scenario::load(&scenario, &over)?;
            write_output(out.as_deref(), &to_json(&commands::fit(&s)?))
        }
        Command::Compare { scenario, out, report } => {
            let s = Scenario::load(&scenario, &over)?;
            let (csv, rep) = commands::compare(&s)?;
            write_output(Some(&out), &csv)?;
            write_output(report.as_deref(), &to_json(&rep))
        }
        Command::Simulate { scenario, out, points } => {
            let s = Scenario::load(&scenario, &over)?;
            write_output(out.as_deref(), &commands::simulate(&s, points)?)
        }
        Command::Outage { network, out, mc } => {
            let n = NetworkScenario::load(&network, &over)?;
            let tables = commands::outage(&n, mc)?;
            match (out, tables.len()) {
                (out, 1) => write_output(out.as_deref(), &tables[0]),
                (Some(out), _) => tables
                    .iter()
                    .enumerate()
                    .try_for_each(|(i, t)| write_output(Some(&placement_path(&out, i)), t)),
                (None, _) => Err(CliError::Input("several placements need --out".into())),
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let threads = cli.threads;
    let result = match threads {
        Some(0) => Err(CliError::Input("--threads must be >= 1".into())),
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(CliError::Io(format!("thread pool: {e}"))),
        },
        None => run(cli),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("lsnsum: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
