use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use bnet::env::EnvKind;
use bnet::{BnetConfig, Variant};
use bnet_cli::commands::{self, TrainOutcome};
use bnet_cli::config::{self, Overrides, RunConfig};
use bnet_cli::{CliError, Result};
use clap::{Args, Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bnet", version, about = "Hybrid neuroevolution of CGP policies")]
struct Cli {
    /// Output root (default: $BNET_OUTPUT_DIR, then ./runs).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run.
    Train(RunArgs),
    /// Train several seeds and summarize steps-to-solve.
    Bench {
        #[command(flatten)]
        run: RunArgs,
        /// Seeds, e.g. `0-19` or `1,4,7`.
        #[arg(long, default_value = "0-9")]
        seeds: String,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Evaluate a genome checkpoint deterministically.
    Eval {
        checkpoint: PathBuf,
        env: String,
        #[arg(long, default_value_t = 100)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        maze_file: Option<PathBuf>,
        /// Rescale observations onto [-1, 1]; defaults to the training
        /// default of the environment.
        #[arg(long)]
        normalize_observations: Option<bool>,
    },
    /// Train and save the elite experience for offline initialization.
    ExportExperience {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        output: PathBuf,
    },
    /// Train starting from a population fitted to saved experience.
    ImportExperience {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        input: PathBuf,
    },
    /// Print the default configuration.
    DefaultConfig {
        #[arg(default_value = "cartpole")]
        env: String,
        #[arg(long, default_value = "base")]
        variant: String,
    },
}

#[derive(Args)]
struct RunArgs {
    /// cartpole, mountaincar or gridmaze (overrides the config file).
    env: Option<String>,
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a `[bnet]` key, e.g. `--set critic.steps=200`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let ov = Overrides {
            env: self.env.clone(),
            variant: self.variant.clone(),
            seed: self.seed,
            set: self.set.clone(),
        };
        config::load(self.config.as_deref(), &ov)
    }
}

fn parse_seeds(s: &str) -> Result<Vec<u64>> {
    let bad = || CliError::Usage(format!("bad seed list `{s}`"));
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        match part.split_once('-') {
            Some((a, b)) => {
                let a: u64 = a.trim().parse().map_err(|_| bad())?;
                let b: u64 = b.trim().parse().map_err(|_| bad())?;
                if b < a {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn report(t: &TrainOutcome) {
    let s = &t.summary;
    match s.steps_to_solve {
        Some(steps) => println!("solved after {steps} training steps ({} iterations)", s.iterations),
        None => println!(
            "not solved within {} training steps ({} iterations)",
            s.training_steps, s.iterations
        ),
    }
    println!("outputs in {}", t.dir.display());
}

fn execute(cli: Cli) -> Result<()> {
    let root = commands::output_root(cli.out.as_deref());
    match cli.command {
        Command::Train(run) => report(&commands::train(&run.resolve()?, &root, None)?),
        Command::Bench { run, seeds, workers } => {
            let b = commands::bench(&run.resolve()?, &parse_seeds(&seeds)?, workers, &root)?;
            let s = &b.summary;
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.0}"));
            println!(
                "{} {}: solved {}/{} (failed {}), steps median {} [q1 {}, q3 {}]",
                s.env,
                s.variant,
                s.solved,
                s.runs,
                s.failed,
                fmt(s.median_steps),
                fmt(s.q1_steps),
                fmt(s.q3_steps)
            );
            for r in b.results.iter().filter(|r| r.error.is_some()) {
                eprintln!("seed {} failed: {}", r.seed, r.error.as_deref().unwrap_or(""));
            }
            println!("outputs in {}", b.dir.display());
        }
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
            maze_file,
            normalize_observations,
        } => {
            let env = EnvKind::from_str(&env)?;
            let normalize = normalize_observations
                .unwrap_or_else(|| BnetConfig::new(env, Variant::Base).normalize_observations);
            let s = commands::eval(&checkpoint, env, maze_file.as_deref(), normalize, episodes, seed)?;
            println!("episodes {} mean {} min {} max {}", s.episodes, s.mean, s.min, s.max);
        }
        Command::ExportExperience { run, output } => {
            let t = commands::export_experience(&run.resolve()?, &root, &output)?;
            report(&t);
            println!("experience written to {}", output.display());
        }
        Command::ImportExperience { run, input } => {
            report(&commands::import_experience(&run.resolve()?, &root, &input)?)
        }
        Command::DefaultConfig { env, variant } => {
            let env = EnvKind::from_str(&env)?;
            let variant = Variant::from_str(&variant)?;
            print!("{}", config::default_toml(env, variant)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seed_lists() {
        assert_eq!(parse_seeds("0-3").unwrap(), vec![0, 1, 2, 3]);
        assert_eq!(parse_seeds("1,5, 7-8").unwrap(), vec![1, 5, 7, 8]);
        assert!(parse_seeds("").is_err());
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("x").is_err());
    }
}
