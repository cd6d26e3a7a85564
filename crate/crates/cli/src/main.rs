use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use jcas_core::runner::{self, exit, RunReport};
use jcas_core::scenario::Scenario;
use jcas_core::selftest::run_selftest;

#[derive(Parser)]
#[command(
    name = "jcas",
    version,
    about = "RTD and FSI-OFDM joint sensing/communications simulator"
)]
struct Cli {
    /// Override the scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Directory for artifacts (default: the scenario's output_dir).
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file.
    Simulate { file: PathBuf },
    /// Run a built-in scenario (fig6, fig7, fig7_offgrid).
    Preset { name: String },
    /// Check the built-in invariants.
    Selftest {
        /// Corrupt the code matrix first; the run must then fail.
        #[arg(long)]
        inject_fault: bool,
    },
    /// Build or reuse the dual-window pattern for a scenario.
    Calibrate { file: PathBuf },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(exit::INVALID as u8);
        }
    }
    let code = match run(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            runner::exit_code(&e)
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: &Cli) -> jcas_core::Result<i32> {
    match &cli.command {
        Command::Simulate { file } => simulate(cli, Scenario::from_file(file)?),
        Command::Preset { name } => {
            let mut scn = Scenario::preset(name)?;
            if cli.out_dir.is_none() {
                scn.output_dir = scn.output_dir.join(&scn.name);
            }
            simulate(cli, scn)
        }
        Command::Selftest { inject_fault } => {
            let rep = run_selftest(*inject_fault);
            for c in &rep.checks {
                println!(
                    "{} {:<24} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            Ok(if rep.passed() {
                exit::OK
            } else {
                exit::FAILURE
            })
        }
        Command::Calibrate { file } => {
            let mut scn = Scenario::from_file(file)?;
            if let Some(seed) = cli.seed {
                scn.seed = seed;
            }
            let rep = runner::run_calibrate(&scn, &runner::cache_dir())?;
            println!(
                "pattern {} ({}), max condition {:.1}",
                rep.cache_path.display(),
                if rep.info.cache_hit {
                    "cached"
                } else {
                    "built"
                },
                rep.info.max_condition
            );
            if rep.unresolvable.is_empty() {
                Ok(exit::OK)
            } else {
                for (d, nu) in &rep.unresolvable {
                    println!("unresolvable cell: range bin {d}, Doppler bin {nu}");
                }
                Ok(exit::UNRESOLVABLE)
            }
        }
    }
}

fn simulate(cli: &Cli, mut scn: Scenario) -> jcas_core::Result<i32> {
    if let Some(seed) = cli.seed {
        scn.seed = seed;
    }
    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| scn.output_dir.clone());
    let report = runner::run_simulate(&scn, &out_dir)?;
    print_summary(&report, &out_dir);
    if report.runs.iter().any(|r| r.flagged_cells > 0) {
        return Ok(exit::UNRESOLVABLE);
    }
    Ok(exit::OK)
}

fn print_summary(report: &RunReport, out_dir: &Path) {
    for run in &report.runs {
        println!("[{}] K = {}", run.scheme.tag(), run.k);
        for d in &run.detections {
            println!(
                "  {:>8.1} m  {:>8.1} km/h  {:>6.1} dB  ({:?})",
                d.range_m,
                d.velocity_kmh,
                10.0 * d.normalized_power.log10(),
                d.map
            );
        }
        let e = &run.eval;
        print!(
            "  matched {}, missed {}, false alarms {}",
            e.matches.len(),
            e.misses.len(),
            e.false_alarms.len()
        );
        if let Some(pir) = e.peak_to_interference_db {
            print!(", peak-to-interference {pir:.1} dB");
        }
        println!();
        if let Some(c) = &run.comms {
            println!("  BER {:.3e} over {} bits, EVM {:.3}", c.ber, c.bits, c.evm);
        }
        if run.flagged_cells > 0 {
            println!("  {} unresolvable cells", run.flagged_cells);
        }
    }
    println!(
        "artifacts in {} ({:.0} ms)",
        out_dir.display(),
        report.elapsed_ms
    );
}
