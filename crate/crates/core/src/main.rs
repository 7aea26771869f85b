use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use ssac::harness::config::RunConfig;
use ssac::harness::run;

#[derive(Parser)]
#[command(name = "ssac", version, about = "Safety-index constrained soft actor-critic on a 2-D navigation task")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train an agent; writes metrics.csv and checkpoints under the output directory.
    Train {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Train even when the feasibility check finds states without a safe action.
        #[arg(long)]
        allow_infeasible: bool,
        /// Dotted overrides such as learner.m_pi=3.
        overrides: Vec<String>,
    },
    /// Roll out a trained policy and print a JSON report.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Must match the checkpoint's config when given.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, default_value_t = 50)]
        episodes: usize,
        #[arg(long)]
        deterministic: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write one probe CSV per episode into --out.
        #[arg(long)]
        probe: bool,
        #[arg(long)]
        out: Option<PathBuf>,
        overrides: Vec<String>,
    },
    /// Run a verification check and print a JSON report; exit code 2 on failure.
    Check {
        what: CheckKind,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Policy for the invariance check; uniform random actions without it.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Random seeds for the gradient suites.
        #[arg(long, default_value_t = 20)]
        seeds: u64,
        /// Start states for the invariance check.
        #[arg(long, default_value_t = 100)]
        states: usize,
        overrides: Vec<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum CheckKind {
    Gradients,
    Feasibility,
    Invariance,
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("report serializes")
}

fn verdict(passed: bool) -> ExitCode {
    if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

fn dispatch(cli: Cli) -> ssac::Result<ExitCode> {
    match cli.command {
        Command::Train {
            config,
            seed,
            out,
            allow_infeasible,
            mut overrides,
        } => {
            if let Some(s) = seed {
                overrides.push(format!("run.seed={s}"));
            }
            if let Some(dir) = out {
                overrides.push(format!("run.out_dir={}", toml_string(&dir)));
            }
            let cfg = RunConfig::load(config.as_deref(), &overrides)?;
            let summary = run::train(&cfg, allow_infeasible)?;
            println!("{}", json(&summary));
            Ok(ExitCode::SUCCESS)
        }
        Command::Eval {
            checkpoint,
            config,
            episodes,
            deterministic,
            seed,
            probe,
            out,
            overrides,
        } => {
            let cfg = match config {
                Some(p) => Some(RunConfig::load(Some(&p), &overrides)?),
                None if !overrides.is_empty() => Some(RunConfig::load(None, &overrides)?),
                None => None,
            };
            let probe_dir = match (probe, out) {
                (true, Some(dir)) => Some(dir),
                (true, None) => Some(PathBuf::from("probes")),
                (false, _) => None,
            };
            let result = run::eval(&checkpoint, cfg.as_ref(), episodes, deterministic, seed, probe_dir.as_deref())?;
            println!("{}", json(&result));
            Ok(ExitCode::SUCCESS)
        }
        Command::Check {
            what,
            config,
            checkpoint,
            seed,
            seeds,
            states,
            overrides,
        } => {
            let explicit = config.is_some() || !overrides.is_empty();
            let cfg = RunConfig::load(config.as_deref(), &overrides)?;
            match what {
                CheckKind::Gradients => {
                    let seed_list: Vec<u64> = (seed..seed + seeds).collect();
                    let report = run::check_gradients(&cfg, &seed_list, &[16, 16], 32)?;
                    for (name, err) in report.worst() {
                        eprintln!("{name:>22}  max relative error {err:.3e}");
                    }
                    println!("{}", json(&report));
                    Ok(verdict(report.passed()))
                }
                CheckKind::Feasibility => {
                    let report = run::feasibility(&cfg)?;
                    println!("{}", json(&report));
                    Ok(verdict(report.passed()))
                }
                CheckKind::Invariance => {
                    let report = run::invariance(explicit.then_some(&cfg), checkpoint.as_deref(), states, seed)?;
                    println!("{}", json(&report));
                    Ok(verdict(report.passed()))
                }
            }
        }
    }
}

/// Quotes a path as a TOML basic string for use in an override.
fn toml_string(path: &std::path::Path) -> String {
    toml::Value::String(path.display().to_string()).to_string()
}
