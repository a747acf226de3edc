use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use ptt_core::probes::{run_probe, ProbeFamily, DEFAULT_CEILING};
use ptt_core::{DyadicBank, Grid};
use ptt_runner::probes::default_baseline_path;
use ptt_runner::verify::{run_suite, Suite, VerifyOptions};
use ptt_runner::{run, RunConfig, RunnerError};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_BLOWUP: u8 = 3;

#[derive(Parser)]
#[command(name = "ptt", version, about = "Spectral solver and estimate probes for the PTT perturbation system")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        t_end: Option<f64>,
    },
    /// Run self-verification suites.
    Verify {
        #[arg(long, value_enum, default_value = "all")]
        suite: SuiteArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Samples per probe family.
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Baseline file for probe ratios; recorded when absent.
        #[arg(long)]
        baseline: Option<PathBuf>,
        /// Skip the baseline comparison.
        #[arg(long)]
        no_baseline: bool,
        /// Print the results as JSON.
        #[arg(long)]
        json: bool,
    },
    /// Ratio statistics for one estimate family.
    Probe {
        #[arg(long, value_enum)]
        family: FamilyArg,
        #[arg(long, default_values_t = vec![2.0])]
        p: Vec<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        #[arg(long, default_value_t = 32)]
        n: usize,
        #[arg(long, default_value_t = 2)]
        cutoff: i32,
        #[arg(long, default_value_t = DEFAULT_CEILING)]
        ceiling: f64,
    },
    /// Print the default run config.
    DefaultConfig,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Operators,
    Lp,
    Model,
    Integrator,
    Probes,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Operators => Suite::Operators,
            SuiteArg::Lp => Suite::Lp,
            SuiteArg::Model => Suite::Model,
            SuiteArg::Integrator => Suite::Integrator,
            SuiteArg::Probes => Suite::Probes,
            SuiteArg::All => Suite::All,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Commutator,
    Product,
}

fn exit_for(err: &RunnerError) -> u8 {
    match err {
        RunnerError::Config(_) => EXIT_CONFIG,
        RunnerError::Core(
            ptt_core::Error::InvalidGrid(_)
            | ptt_core::Error::InvalidLebesgue(_)
            | ptt_core::Error::InvalidParameter(_)
            | ptt_core::Error::UnsupportedRegime(_)
            | ptt_core::Error::Bank(_),
        ) => EXIT_CONFIG,
        _ => EXIT_FAIL,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}

fn dispatch(cmd: Command) -> Result<u8, RunnerError> {
    match cmd {
        Command::Run {
            config,
            seed,
            out,
            t_end,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(o) = out {
                cfg.out_dir = Some(o);
            }
            if let Some(t) = t_end {
                cfg.t_end = t;
            }
            cfg.validate()?;
            let outcome = run(&cfg)?;
            let r = &outcome.report;
            println!("{}", serde_json::to_string_pretty(r)?);
            if let Some(b) = &r.blowup {
                eprintln!("{b}");
            }
            Ok(if r.unexpected_blowup() {
                EXIT_BLOWUP
            } else if r.pass {
                0
            } else {
                EXIT_FAIL
            })
        }
        Command::Verify {
            suite,
            seed,
            samples,
            baseline,
            no_baseline,
            json,
        } => {
            let opts = VerifyOptions {
                seed,
                probe_samples: samples,
                baseline: if no_baseline {
                    None
                } else {
                    Some(baseline.unwrap_or_else(default_baseline_path))
                },
            };
            let results = run_suite(suite.into(), &opts)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&results)?);
            } else {
                for c in &results {
                    println!("{c}");
                }
            }
            let failed = results.iter().filter(|c| !c.pass).count();
            eprintln!("{} checks, {} failed", results.len(), failed);
            Ok(if failed == 0 { 0 } else { EXIT_FAIL })
        }
        Command::Probe {
            family,
            p,
            seed,
            samples,
            n,
            cutoff,
            ceiling,
        } => {
            let g = Grid::new(n)?;
            let bank = DyadicBank::new(&g, cutoff)?;
            let fam = match family {
                FamilyArg::Commutator => ProbeFamily::Commutator,
                FamilyArg::Product => ProbeFamily::Product,
            };
            let reports = run_probe(fam, &bank, seed, samples, &p, ceiling)?;
            println!("{}", serde_json::to_string_pretty(&reports)?);
            Ok(if reports.iter().all(|r| r.pass) { 0 } else { EXIT_FAIL })
        }
        Command::DefaultConfig => {
            println!("{}", serde_json::to_string_pretty(&RunConfig::default())?);
            Ok(0)
        }
    }
}
