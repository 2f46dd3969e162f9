use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tailopt::harness::{
    build_problem, fit_loglog_slope, parse_config, parse_grid, read_csv, run_experiment_with_threads, sweep, write_csv,
    write_csv_to, write_sweep_csv, ExperimentConfig, DEFAULT_BURN_IN, DEFAULT_MAX_RUNS,
};
use tailopt::Error;

#[derive(Parser)]
#[command(
    name = "tailopt",
    version,
    about = "Simulate nested clipped optimization under heavy-tailed noise"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment and write its metrics CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the experiment seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output CSV; defaults to output.path, else stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads for node epochs (default: all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run every assignment of a parameter grid.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        grid: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_MAX_RUNS)]
        max_runs: usize,
    },
    /// Fit the log-log slope of a metrics column.
    Rate {
        #[arg(long)]
        csv: PathBuf,
        #[arg(long, default_value_t = DEFAULT_BURN_IN)]
        burn_in: f64,
        #[arg(long, default_value = "running_min_grad_sq")]
        column: String,
    },
    /// Write the generated problem (features, labels, shards, w*) as CSV.
    Export {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load(path: &Path) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(parse_config(&text)?)
}

fn execute(command: Command) -> Result<(), Error> {
    match command {
        Command::Run {
            config,
            seed,
            out,
            threads,
        } => {
            let mut cfg = load(&config)?;
            if let Some(seed) = seed {
                cfg = cfg.with_overrides(&[("seed".into(), toml::Value::Integer(seed as i64))])?;
            }
            let threads = threads.unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
            let records = run_experiment_with_threads(&cfg, threads)?;
            match out.or_else(|| cfg.output.path.clone()) {
                Some(path) => write_csv(&records, &path)?,
                None => write_csv_to(&records, std::io::stdout().lock()).map_err(|e| Error::Io {
                    path: PathBuf::from("<stdout>"),
                    source: e.into(),
                })?,
            }
            if let Some(last) = records.last() {
                if last.diverged {
                    eprintln!("run diverged at round {}", last.round);
                }
            }
        }
        Command::Sweep {
            config,
            grid,
            out,
            max_runs,
        } => {
            let cfg = load(&config)?;
            let text = std::fs::read_to_string(&grid).map_err(|e| Error::Io {
                path: grid.clone(),
                source: e,
            })?;
            let grid = parse_grid(&text)?;
            let rows = sweep(&cfg, &grid, max_runs)?;
            let path = out.unwrap_or_else(|| PathBuf::from("sweep.csv"));
            write_sweep_csv(&grid, &rows, &path)?;
            if let Some(best) = rows.first() {
                let assigned: Vec<String> = best.assignment.iter().map(|(k, v)| format!("{k}={v}")).collect();
                println!(
                    "best: index {} ({}) objective_gap {:e}",
                    best.index,
                    assigned.join(", "),
                    best.last.objective_gap
                );
            }
        }
        Command::Rate { csv, burn_in, column } => {
            let records = read_csv(&csv)?;
            let series = records
                .iter()
                .map(|r| {
                    r.column(&column)
                        .map(|v| (r.round as f64, v))
                        .ok_or_else(|| Error::Contract(format!("unknown column `{column}`")))
                })
                .collect::<Result<Vec<_>, _>>()?;
            println!("{}", fit_loglog_slope(&series, burn_in)?);
        }
        Command::Export { config, out } => {
            let cfg = load(&config)?;
            build_problem(&cfg)?.write_columnar(&out)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e {
                Error::Config(_) => 2,
                Error::Io { .. } | Error::Csv { .. } => 3,
                _ => 1,
            })
        }
    }
}
