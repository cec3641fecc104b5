use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use powersim::benchmark::Axis;
use powersim::harness::{
    compute_metrics, meta_windows, read_run, run_matrix, run_scenario, timing_report,
    ScenarioConfig,
};
use powersim::{Result, SimError};

/// Multi-fidelity EMT/phasor power-system simulator.
#[derive(Parser)]
#[command(name = "powersim", version)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its CSV.
    Run {
        config: PathBuf,
        /// Override the CSV path from the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Run every test of a scenario for each variant of one component.
    Matrix {
        config: PathBuf,
        #[arg(long, value_parser = ["sg", "line", "converter", "res"])]
        axis: String,
        /// Override the output directory from the config.
        #[arg(long, short)]
        output: Option<PathBuf>,
    },
    /// Compare a run CSV with a reference CSV.
    Metrics {
        run: PathBuf,
        reference: PathBuf,
        /// Exclusion window `start:end` (s); repeatable. Defaults to the
        /// windows recorded with the reference run.
        #[arg(long = "window")]
        windows: Vec<String>,
        /// Only compare these signals.
        #[arg(long = "signal")]
        signals: Vec<String>,
    },
    /// Relative runtime table of the runs in a directory.
    Timing {
        dir: PathBuf,
        /// Baseline selection label; the first one found by default.
        #[arg(long)]
        baseline: Option<String>,
    },
}

fn parse_window(s: &str) -> Result<[f64; 2]> {
    let bad = || SimError::config(format!("window '{s}' is not start:end"));
    let (a, b) = s.split_once(':').ok_or_else(bad)?;
    let (a, b): (f64, f64) = (a.parse().map_err(|_| bad())?, b.parse().map_err(|_| bad())?);
    if a.is_nan() || b.is_nan() || b < a {
        return Err(bad());
    }
    Ok([a, b])
}

fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let io = |e| SimError::Io {
        path: dir.display().to_string(),
        source: e,
    };
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension().is_some_and(|x| x == "csv")
                && p.file_name().is_some_and(|n| n != "timing.csv")
        })
        .collect();
    files.sort();
    Ok(files)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Run { config, output } => {
            let mut c = ScenarioConfig::load(&config)?;
            if output.is_some() {
                c.output = output;
            }
            let r = run_scenario(&c)?;
            println!(
                "{}: {} samples, {} signals, integration {:.3} s{}",
                c.name,
                r.len(),
                r.names.len(),
                r.wall_clock_s,
                c.output
                    .map(|p| format!(", wrote {}", p.display()))
                    .unwrap_or_default()
            );
        }
        Cmd::Matrix {
            config,
            axis,
            output,
        } => {
            let mut c = ScenarioConfig::load(&config)?;
            if output.is_some() {
                c.output = output;
            }
            let runs = run_matrix(&c, Axis::parse(&axis)?)?;
            for (variant, test, r) in &runs {
                println!(
                    "{variant:<14} test {test}: integration {:.3} s",
                    r.wall_clock_s
                );
            }
            let rs: Vec<_> = runs.into_iter().map(|(_, _, r)| r).collect();
            if rs.len() >= 2 {
                print!("\n{}", timing_report(&rs, None)?.to_markdown());
            }
        }
        Cmd::Metrics {
            run,
            reference,
            windows,
            signals,
        } => {
            let mut a = read_run(&run)?;
            let mut b = read_run(&reference)?;
            if !signals.is_empty() {
                a = a.select(&signals)?;
                b = b.select(&signals)?;
            }
            let w = if windows.is_empty() {
                meta_windows(&b)
            } else {
                windows
                    .iter()
                    .map(|s| parse_window(s))
                    .collect::<Result<_>>()?
            };
            let m = compute_metrics(&a, &b, &w)?;
            print!("{}", m.to_csv());
            if let Some(rel) = m.relative_runtime {
                eprintln!("relative runtime {rel:.3}");
            }
        }
        Cmd::Timing { dir, baseline } => {
            let runs = csv_files(&dir)?
                .iter()
                .map(|p| read_run(p))
                .collect::<Result<Vec<_>>>()?;
            let rep = timing_report(&runs, baseline.as_deref())?;
            let out = dir.join("timing.csv");
            std::fs::write(&out, rep.to_csv()).map_err(|e| SimError::Io {
                path: out.display().to_string(),
                source: e,
            })?;
            print!("{}", rep.to_markdown());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
