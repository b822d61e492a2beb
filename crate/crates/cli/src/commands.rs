//! Implementations of the CLI subcommands.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use bnet::cgp::Genome;
use bnet::env::{run_episode, EnvKind, EvalMode, MazeLayout, MazeOptions};
use bnet::trajectory::ExperienceSet;
use bnet::{Bnet, RunSummary};
use log::{info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::output::{
    self, BenchSummary, OutputPaths, RunManifest, RunRecord, SeedResult,
};
use crate::{CliError, Result, OUTPUT_DIR_VAR};

/// `explicit`, else `$BNET_OUTPUT_DIR`, else `./runs`.
pub fn output_root(explicit: Option<&Path>) -> PathBuf {
    explicit
        .map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUTPUT_DIR_VAR).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("runs"))
}

/// Directory name of a run, e.g. `cartpole-bdist-cross-seed3`.
pub fn run_name(cfg: &RunConfig) -> String {
    format!("{}-{}-seed{}", cfg.env(), cfg.variant.name().replace('+', "-"), cfg.seed())
}

pub struct TrainOutcome {
    pub dir: PathBuf,
    pub manifest: RunManifest,
    pub summary: RunSummary,
    pub experience: ExperienceSet,
}

/// Runs one training run into `root/<run_name>`. With `experience`, the
/// initial population is fitted offline to it.
pub fn train(cfg: &RunConfig, root: &Path, experience: Option<&ExperienceSet>) -> Result<TrainOutcome> {
    let dir = root.join(run_name(cfg));
    std::fs::create_dir_all(&dir)?;
    let paths = OutputPaths::standard();
    let config = cfg.to_toml()?;
    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        env: cfg.env().name().to_string(),
        variant: cfg.variant.name().to_string(),
        seed: cfg.seed(),
        config_hash: crate::config::sha256_hex(config.as_bytes()),
        config: config.clone(),
        outputs: paths.clone(),
    };
    std::fs::write(dir.join(&paths.config), &config)?;
    manifest.save(&dir.join(&paths.manifest))?;
    info!("training {} into {}", run_name(cfg), dir.display());

    let mut bnet = Bnet::new(cfg.bnet.clone())?;
    if let Some(exp) = experience {
        bnet.init_offline(exp)?;
    }
    let summary = bnet.run()?;

    output::write_trace(BufWriter::new(File::create(dir.join(&paths.trace))?), &summary.reports)?;
    output::write_selection(
        BufWriter::new(File::create(dir.join(&paths.selection))?),
        &summary.selections,
    )?;
    if let Some(g) = &summary.champion {
        std::fs::write(dir.join(&paths.champion), g.to_text())?;
    }
    if let Some(g) = &summary.solution {
        std::fs::write(dir.join(&paths.solution), g.to_text())?;
    }
    let record = RunRecord {
        solved: summary.solved,
        steps_to_solve: summary.steps_to_solve,
        training_steps: summary.training_steps,
        check_steps: summary.check_steps,
        iterations: summary.iterations,
        champion_mean: summary.champion_mean,
        best_type_frequencies: summary
            .best_kind_frequencies()
            .into_iter()
            .map(|(k, f)| (k.name().to_string(), f))
            .collect(),
    };
    std::fs::write(dir.join(&paths.summary), serde_json::to_string_pretty(&record)? + "\n")?;
    Ok(TrainOutcome {
        dir,
        manifest,
        summary,
        experience: bnet.experience(),
    })
}

pub struct BenchOutcome {
    pub dir: PathBuf,
    pub results: Vec<SeedResult>,
    pub summary: BenchSummary,
}

/// Trains one run per seed on `workers` threads and writes `runs.csv` and
/// `summary.csv` into `root/bench-<env>-<variant>`. A failing seed is
/// reported in its row and does not stop the others.
pub fn bench(cfg: &RunConfig, seeds: &[u64], workers: usize, root: &Path) -> Result<BenchOutcome> {
    if seeds.is_empty() {
        return Err(CliError::Usage("bench needs at least one seed".into()));
    }
    let dir = root.join(format!("bench-{}-{}", cfg.env(), cfg.variant.name().replace('+', "-")));
    std::fs::create_dir_all(&dir)?;
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<SeedResult>>> = Mutex::new(vec![None; seeds.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers.clamp(1, seeds.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let r = bench_one(cfg, seeds[i], &dir);
                slots.lock().expect("bench results lock")[i] = Some(r);
            });
        }
    });
    let results: Vec<SeedResult> = slots
        .into_inner()
        .expect("bench results lock")
        .into_iter()
        .map(|r| r.expect("every seed ran"))
        .collect();
    let summary = BenchSummary::new(
        cfg.env().name(),
        cfg.variant.name(),
        cfg.bnet.max_training_steps,
        &results,
    );
    output::write_bench_runs(BufWriter::new(File::create(dir.join("runs.csv"))?), &results)?;
    output::write_bench_summary(BufWriter::new(File::create(dir.join("summary.csv"))?), &summary)?;
    Ok(BenchOutcome { dir, results, summary })
}

fn bench_one(cfg: &RunConfig, seed: u64, dir: &Path) -> SeedResult {
    match train(&cfg.with_seed(seed), dir, None) {
        Ok(t) => SeedResult {
            seed,
            solved: t.summary.solved,
            steps_to_solve: t.summary.steps_to_solve,
            training_steps: t.summary.training_steps,
            iterations: t.summary.iterations,
            check_steps: t.summary.check_steps,
            error: None,
        },
        Err(e) => {
            warn!("seed {seed} failed: {e}");
            SeedResult {
                seed,
                solved: false,
                steps_to_solve: None,
                training_steps: 0,
                iterations: 0,
                check_steps: 0,
                error: Some(e.to_string()),
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalStats {
    pub episodes: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Deterministic evaluation of a stored genome. The score is the selection
/// fitness (the episode return, or progress moves for the maze).
pub fn eval(
    checkpoint: &Path,
    env: EnvKind,
    maze_file: Option<&Path>,
    normalize_observations: bool,
    episodes: usize,
    seed: u64,
) -> Result<EvalStats> {
    if episodes == 0 {
        return Err(CliError::Usage("episodes must be >= 1".into()));
    }
    let text = std::fs::read_to_string(checkpoint)?;
    let genome = Genome::from_text(&text)?;
    let layout = match maze_file {
        Some(p) => MazeLayout::load(p)?,
        None => MazeLayout::default_layout(),
    };
    let mut environment = env.make_with(Some((&layout, MazeOptions::default())), normalize_observations)?;
    let spec = environment.spec().clone();
    let g = genome.config();
    if g.n_inputs != spec.observation_dim || g.n_outputs != spec.n_actions {
        return Err(CliError::Usage(format!(
            "checkpoint expects {} inputs and {} actions but {} has {} and {}",
            g.n_inputs, g.n_outputs, spec.name, spec.observation_dim, spec.n_actions
        )));
    }
    let policy = genome.decode();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut scores = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let t = run_episode(environment.as_mut(), &policy, EvalMode::Deterministic, 0, &mut rng)?;
        scores.push(t.score);
    }
    Ok(EvalStats {
        episodes,
        mean: scores.iter().sum::<f64>() / episodes as f64,
        min: scores.iter().copied().fold(f64::INFINITY, f64::min),
        max: scores.iter().copied().fold(f64::NEG_INFINITY, f64::max),
    })
}

/// Trains and writes the elite archive to `output`.
pub fn export_experience(cfg: &RunConfig, root: &Path, output: &Path) -> Result<TrainOutcome> {
    let t = train(cfg, root, None)?;
    t.experience.save(output)?;
    Ok(t)
}

/// Trains with an initial population fitted to the experience in `input`.
pub fn import_experience(cfg: &RunConfig, root: &Path, input: &Path) -> Result<TrainOutcome> {
    let exp = ExperienceSet::load(input)?;
    train(cfg, root, Some(&exp))
}
