use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynsample::bench::{self, exit, LemmaGrid};
use dynsample::config::{Experiment, ExperimentConfig};
use dynsample::SamplingPoint;

/// Recover initial data of diffusion-type equations from time samples at one point.
#[derive(Parser)]
#[command(name = "dynsample", version, about)]
struct Cli {
    /// Output directory; overrides `[output] dir` from the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one recovery at the config's (first) n.
    Recover { config: PathBuf },
    /// Recover for every n in the config's sweep and fit the error rate.
    Sweep { config: PathBuf },
    /// Grid-check the spectral inequalities the schedule relies on.
    CheckLemmas {
        /// Operator half-orders N to scan.
        #[arg(long = "n", value_delimiter = ',', default_values_t = [1u32, 2, 3, 4])]
        orders: Vec<u32>,
        #[arg(long, default_value_t = 200)]
        xmax: u64,
        #[arg(long, default_value_t = 50)]
        kmax: u64,
        #[arg(long, default_value_t = 8)]
        lmax: u32,
        /// Compare g against this value instead of 2N ln 2.
        #[arg(long, hide = true)]
        threshold: Option<f64>,
    },
    /// Scan min k|sin(k x0)| for a candidate sampling point.
    ScanX0 {
        expr: String,
        #[arg(long, default_value_t = 1_000_000)]
        kscan: u64,
    },
}

fn fail(e: &dynsample::Error) -> ExitCode {
    eprintln!("error: {e}");
    ExitCode::from(bench::exit_code(e) as u8)
}

fn load(path: &Path) -> Result<Experiment, dynsample::Error> {
    let (cfg, base) = ExperimentConfig::load(path)?;
    cfg.build(&base)
}

fn out_dir(cli_out: &Option<PathBuf>, exp: &Experiment) -> PathBuf {
    cli_out.clone().or_else(|| exp.out_dir.clone()).unwrap_or_else(|| PathBuf::from("dynsample-out"))
}

fn status(ok: bool) -> ExitCode {
    ExitCode::from(if ok { exit::OK } else { exit::CHECK_FAILED } as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match &cli.command {
        Command::Recover { config } => {
            let exp = match load(config) {
                Ok(e) => e,
                Err(e) => return fail(&e),
            };
            let report = match bench::run_recover(&exp) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let dir = out_dir(&cli.out, &exp);
            if let Err(e) = bench::write_recover(&report, &dir) {
                return fail(&e);
            }
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            print!("{}", report.summary());
            println!("wrote {}", dir.display());
            status(report.passed())
        }
        Command::Sweep { config } => {
            let exp = match load(config) {
                Ok(e) => e,
                Err(e) => return fail(&e),
            };
            let report = match bench::run_sweep(&exp) {
                Ok(r) => r,
                Err(e) => return fail(&e),
            };
            let dir = out_dir(&cli.out, &exp);
            if let Err(e) = bench::write_sweep(&report, &dir) {
                return fail(&e);
            }
            print!("{}", bench::sweep_summary(&report));
            println!("wrote {}", dir.display());
            status(bench::sweep_passed(&report, exp.settings.noise.is_some()))
        }
        Command::CheckLemmas { orders, xmax, kmax, lmax, threshold } => {
            if orders.is_empty() || orders.contains(&0) || *xmax < 2 || *kmax < 1 {
                eprintln!("error: need N >= 1, xmax >= 2 and kmax >= 1");
                return ExitCode::from(exit::USAGE as u8);
            }
            let grid =
                LemmaGrid { orders: orders.clone(), x_max: *xmax, k_max: *kmax, l_max: *lmax, threshold: *threshold };
            let report = bench::run_lemma_checks(&grid);
            print!("{}", report.summary());
            if let Some(dir) = &cli.out {
                let json = serde_json::to_value(&report).expect("report serializes");
                let written = std::fs::create_dir_all(dir)
                    .and_then(|_| std::fs::write(dir.join("lemmas.json"), bench::pretty(&json)));
                if let Err(e) = written {
                    return fail(&e.into());
                }
            }
            status(report.passed)
        }
        Command::ScanX0 { expr, kscan } => match SamplingPoint::from_expr(expr, *kscan) {
            Ok(p) => {
                let json = serde_json::json!({ "x0": p.expr, "scan": p.scan });
                print!("{}", bench::pretty(&json));
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
    }
}
