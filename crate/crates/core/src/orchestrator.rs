//! The training cycle: evaluate candidates, select the champion robustly,
//! update archives and critic, and generate the next candidates.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use log::{debug, info, warn};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::{behavior_loss, LossSpec, Metric};
use crate::cgp::{mutate, random_genome, CgpConfig, Genome, Phenotype};
use crate::critic::{self, CriticTrainConfig, ValueNet, WeightingSource};
use crate::ea::{self, ConstantRate, EaConfig, EaResult};
use crate::env::{is_solved, run_episode, EnvKind, Environment, EvalMode, MazeLayout, MazeOptions};
use crate::error::{Error, Result};
use crate::selection::{self, DuelOutcome, FitnessRecord, SelectionConfig};
use crate::surrogate::{surrogate_search, KrigingBounds, KrigingModel, SurrogateArchive};
use crate::trajectory::{EliteArchive, ExperiencePool, ExperienceSet, Trajectory};

/// Which candidate generators run each iteration.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Generators {
    pub mutant: bool,
    pub bdist: bool,
    pub cross: bool,
    pub surrogate: bool,
}

impl Default for Generators {
    fn default() -> Self {
        Variant::Base.generators()
    }
}

impl Generators {
    pub fn count(&self) -> usize {
        [self.mutant, self.bdist, self.cross, self.surrogate]
            .iter()
            .filter(|&&g| g)
            .count()
    }
}

/// Named generator combinations.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    Base,
    Bdist,
    Cross,
    Surr,
    Mut,
    BdistCross,
}

impl Variant {
    pub const ALL: [Variant; 6] = [
        Variant::Base,
        Variant::Bdist,
        Variant::Cross,
        Variant::Surr,
        Variant::Mut,
        Variant::BdistCross,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Base => "base",
            Variant::Bdist => "bdist",
            Variant::Cross => "cross",
            Variant::Surr => "surr",
            Variant::Mut => "mut",
            Variant::BdistCross => "bdist+cross",
        }
    }

    pub fn generators(self) -> Generators {
        let g = |mutant, bdist, cross, surrogate| Generators {
            mutant,
            bdist,
            cross,
            surrogate,
        };
        match self {
            Variant::Base => g(true, true, true, true),
            Variant::Bdist => g(false, true, false, false),
            Variant::Cross => g(false, false, true, false),
            Variant::Surr => g(false, false, false, true),
            Variant::Mut => g(true, false, false, false),
            Variant::BdistCross => g(false, true, true, false),
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace(['-', '_', ' '], "");
        Variant::ALL
            .into_iter()
            .find(|v| v.name().replace('+', "") == key.replace('+', ""))
            .ok_or_else(|| {
                let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
                Error::InvalidArgument(format!("unknown variant `{s}` (valid: {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchSettings {
    pub mu: usize,
    pub lambda: usize,
    pub iterations: usize,
    pub mutation_rate: f64,
}

impl SearchSettings {
    pub fn ea_config(&self, seeds: Vec<Genome>) -> EaConfig {
        EaConfig::new(self.mu, self.lambda, self.iterations, self.mutation_rate).with_seeds(seeds)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CgpSettings {
    pub n_nodes: usize,
    pub arity: usize,
    pub max_active: usize,
    pub weight_range: (f64, f64),
    pub levels_back: Option<usize>,
}

impl Default for CgpSettings {
    fn default() -> Self {
        let c = CgpConfig::new(1, 1);
        CgpSettings {
            n_nodes: c.n_nodes,
            arity: c.arity,
            max_active: c.max_active,
            weight_range: c.weight_range,
            levels_back: c.levels_back,
        }
    }
}

impl CgpSettings {
    pub fn config(&self, n_inputs: usize, n_outputs: usize) -> Result<CgpConfig> {
        let c = CgpConfig {
            n_nodes: self.n_nodes,
            arity: self.arity,
            max_active: self.max_active,
            weight_range: self.weight_range,
            levels_back: self.levels_back,
            ..CgpConfig::new(n_inputs, n_outputs)
        };
        c.validate()?;
        Ok(c)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BnetConfig {
    pub env: EnvKind,
    pub generators: Generators,
    pub seed: u64,
    pub initial_population: usize,
    /// Training-step budget; solve checks are not counted.
    pub max_training_steps: u64,
    /// Iteration cap, 0 for none.
    pub max_iterations: usize,
    pub mutant_rate: f64,
    pub behavior_search: SearchSettings,
    pub surrogate_search: SearchSettings,
    /// Exploration for the initial candidates' evaluations.
    pub initial_epsilon: f64,
    /// Exploration for the mutant's evaluation.
    pub mutant_epsilon: f64,
    pub weighting: WeightingSource,
    pub gamma: f64,
    pub critic_hidden: Vec<usize>,
    pub critic: CriticTrainConfig,
    pub pool_capacity: usize,
    pub archive_capacity: usize,
    pub replacement_budget: usize,
    /// Desired evaluations per duel participant.
    pub repeats: usize,
    pub surrogate_records: usize,
    pub surrogate_states: usize,
    pub kriging: KrigingBounds,
    /// Feed policies and the critic observations rescaled from the
    /// environment bounds onto [-1, 1]. Only for bounded observations.
    pub normalize_observations: bool,
    pub cgp: CgpSettings,
    pub maze: MazeOptions,
    /// Custom maze; the bundled layout when absent.
    #[serde(skip)]
    pub maze_layout: Option<MazeLayout>,
}

impl BnetConfig {
    /// Defaults for an environment and generator variant.
    pub fn new(env: EnvKind, variant: Variant) -> Self {
        let (budget, eps, weighting, repeats) = match env {
            EnvKind::CartPole => (50_000, 0.0, WeightingSource::Critic, 3),
            EnvKind::MountainCar => (150_000, 0.3, WeightingSource::Critic, 3),
            EnvKind::GridMaze => (5_000, 0.0, WeightingSource::DirectReward, 5),
        };
        BnetConfig {
            env,
            generators: variant.generators(),
            seed: 0,
            initial_population: 5,
            max_training_steps: budget,
            max_iterations: 0,
            mutant_rate: 0.01,
            behavior_search: SearchSettings {
                mu: 20,
                lambda: 2,
                iterations: 1000,
                mutation_rate: 0.05,
            },
            surrogate_search: SearchSettings {
                mu: 8,
                lambda: 2,
                iterations: 500,
                mutation_rate: 0.05,
            },
            initial_epsilon: eps,
            mutant_epsilon: eps,
            weighting,
            gamma: 1.0,
            critic_hidden: vec![128, 64],
            critic: CriticTrainConfig::default(),
            pool_capacity: 50_000,
            archive_capacity: 10,
            replacement_budget: 2,
            repeats,
            surrogate_records: 100,
            surrogate_states: 20,
            kriging: KrigingBounds::default(),
            normalize_observations: env == EnvKind::MountainCar,
            cgp: CgpSettings::default(),
            maze: MazeOptions::default(),
            maze_layout: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidConfig(m.into()));
        if self.generators.count() == 0 {
            return bad("at least one generator must be enabled");
        }
        if self.normalize_observations && self.env.observation_bounds().is_none() {
            return bad("normalize_observations needs an environment with bounded observations");
        }
        if self.initial_population == 0 {
            return bad("initial_population must be >= 1");
        }
        for (name, v) in [
            ("mutant_rate", self.mutant_rate),
            ("initial_epsilon", self.initial_epsilon),
            ("mutant_epsilon", self.mutant_epsilon),
            ("gamma", self.gamma),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1], got {v}"));
            }
        }
        self.behavior_search.ea_config(vec![]).validate()?;
        self.surrogate_search.ea_config(vec![]).validate()?;
        SelectionConfig::new(self.repeats)?;
        if self.archive_capacity == 0 || self.pool_capacity == 0 {
            return bad("archive_capacity and pool_capacity must be >= 1");
        }
        if self.surrogate_records < 3 || self.surrogate_states == 0 {
            return bad("surrogate_records must be >= 3 and surrogate_states >= 1");
        }
        if self.critic.batch_size == 0 {
            return bad("critic.batch_size must be >= 1");
        }
        self.kriging.validate()?;
        let spec = self.env.spec();
        self.cgp.config(spec.observation_dim, spec.n_actions)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CandidateKind {
    Champion,
    Initial,
    Mutant,
    Bdist,
    Cross,
    Surrogate,
}

impl CandidateKind {
    pub fn name(self) -> &'static str {
        match self {
            CandidateKind::Champion => "champion",
            CandidateKind::Initial => "initial",
            CandidateKind::Mutant => "mutant",
            CandidateKind::Bdist => "bdist",
            CandidateKind::Cross => "cross",
            CandidateKind::Surrogate => "surrogate",
        }
    }
}

impl fmt::Display for CandidateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug)]
struct Member {
    id: u64,
    kind: CandidateKind,
    genome: Genome,
    phenotype: Phenotype,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CandidateResult {
    pub id: u64,
    pub kind: CandidateKind,
    /// Fitness of this iteration's evaluation.
    pub fitness: f64,
    pub steps: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iteration: usize,
    /// The champion's re-evaluation (if any) followed by fresh candidates.
    pub candidates: Vec<CandidateResult>,
    pub champion: u64,
    /// Generator that produced the current champion.
    pub champion_kind: CandidateKind,
    pub champion_mean: f64,
    pub champion_samples: usize,
    pub training_steps: u64,
    pub check_steps: u64,
    /// Best of the fresh candidates' fitness and the champion's mean.
    pub best_kind: CandidateKind,
    pub critic_loss: Option<f64>,
    /// Solve checks run this iteration as (candidate, mean score).
    pub checks: Vec<(u64, f64)>,
    pub solved: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionEvent {
    pub iteration: usize,
    pub duel: DuelOutcome,
}

#[derive(Clone, Debug)]
pub struct RunSummary {
    /// Solved within the training-step budget.
    pub solved: bool,
    pub steps_to_solve: Option<u64>,
    pub iterations: usize,
    pub training_steps: u64,
    pub check_steps: u64,
    pub champion: Option<Genome>,
    pub champion_mean: Option<f64>,
    /// Policy that passed the solve check.
    pub solution: Option<Genome>,
    pub reports: Vec<IterationReport>,
    pub selections: Vec<SelectionEvent>,
}

impl RunSummary {
    /// Fraction of reports (excluding the bootstrap iteration) won by each kind.
    pub fn best_kind_frequencies(&self) -> Vec<(CandidateKind, f64)> {
        let reports: Vec<_> = self.reports.iter().filter(|r| r.iteration > 0).collect();
        let mut counts: Vec<(CandidateKind, usize)> = Vec::new();
        for r in &reports {
            match counts.iter_mut().find(|(k, _)| *k == r.best_kind) {
                Some((_, c)) => *c += 1,
                None => counts.push((r.best_kind, 1)),
            }
        }
        counts
            .into_iter()
            .map(|(k, c)| (k, c as f64 / reports.len() as f64))
            .collect()
    }
}

const STREAM_EVAL: u64 = 1;
const STREAM_GEN: u64 = 2;
const STREAM_CRITIC: u64 = 3;
const STREAM_CHECK: u64 = 4;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Training state of one run.
pub struct Bnet {
    cfg: BnetConfig,
    cgp: Arc<CgpConfig>,
    env: Box<dyn Environment>,
    check_env: Box<dyn Environment>,
    rng_eval: ChaCha8Rng,
    rng_gen: ChaCha8Rng,
    rng_critic: ChaCha8Rng,
    rng_check: ChaCha8Rng,
    champion: Option<(Member, FitnessRecord)>,
    pending: Vec<Member>,
    archive: EliteArchive,
    pool: ExperiencePool,
    critic: Option<ValueNet>,
    surrogate: SurrogateArchive,
    iteration: usize,
    training_steps: u64,
    check_steps: u64,
    next_id: u64,
    solved_at: Option<u64>,
    checked: HashSet<u64>,
    solution: Option<Genome>,
    selections: Vec<SelectionEvent>,
}

impl Bnet {
    pub fn new(cfg: BnetConfig) -> Result<Self> {
        cfg.validate()?;
        let layout = match (&cfg.maze_layout, cfg.env) {
            (Some(l), _) => l.clone(),
            (None, _) => MazeLayout::default_layout(),
        };
        let env = cfg.env.make_with(Some((&layout, cfg.maze)), cfg.normalize_observations)?;
        let check_env = cfg.env.make_with(Some((&layout, cfg.maze)), cfg.normalize_observations)?;
        let spec = env.spec().clone();
        let cgp = Arc::new(cfg.cgp.config(spec.observation_dim, spec.n_actions)?);
        let mut rng_critic = stream(cfg.seed, STREAM_CRITIC);
        let critic = (cfg.weighting == WeightingSource::Critic)
            .then(|| ValueNet::new(spec.observation_dim, &cfg.critic_hidden, &mut rng_critic));
        Ok(Bnet {
            archive: EliteArchive::new(cfg.archive_capacity, cfg.replacement_budget)?,
            pool: ExperiencePool::new(cfg.pool_capacity)?,
            surrogate: SurrogateArchive::new(cfg.surrogate_records, cfg.surrogate_states)?,
            rng_eval: stream(cfg.seed, STREAM_EVAL),
            rng_gen: stream(cfg.seed, STREAM_GEN),
            rng_check: stream(cfg.seed, STREAM_CHECK),
            rng_critic,
            critic,
            cgp,
            env,
            check_env,
            champion: None,
            pending: Vec::new(),
            iteration: 0,
            training_steps: 0,
            check_steps: 0,
            next_id: 0,
            solved_at: None,
            checked: HashSet::new(),
            solution: None,
            selections: Vec::new(),
            cfg,
        })
    }

    pub fn config(&self) -> &BnetConfig {
        &self.cfg
    }

    pub fn cgp_config(&self) -> &Arc<CgpConfig> {
        &self.cgp
    }

    pub fn training_steps(&self) -> u64 {
        self.training_steps
    }

    pub fn check_steps(&self) -> u64 {
        self.check_steps
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn solved_at(&self) -> Option<u64> {
        self.solved_at
    }

    pub fn archive(&self) -> &EliteArchive {
        &self.archive
    }

    pub fn pool(&self) -> &ExperiencePool {
        &self.pool
    }

    pub fn selections(&self) -> &[SelectionEvent] {
        &self.selections
    }

    pub fn champion(&self) -> Option<(&Genome, &FitnessRecord)> {
        self.champion.as_ref().map(|(m, r)| (&m.genome, r))
    }

    /// Genomes waiting to be evaluated in the next iteration.
    pub fn pending(&self) -> Vec<(CandidateKind, &Genome)> {
        self.pending.iter().map(|m| (m.kind, &m.genome)).collect()
    }

    fn member(&mut self, kind: CandidateKind, genome: Genome) -> Member {
        let id = self.next_id;
        self.next_id += 1;
        Member {
            id,
            kind,
            phenotype: genome.decode(),
            genome,
        }
    }

    /// Random initial population.
    pub fn initialize(&mut self) -> Result<()> {
        self.ensure_fresh()?;
        for _ in 0..self.cfg.initial_population {
            let g = random_genome(&self.cgp, &mut self.rng_gen)?;
            let m = self.member(CandidateKind::Initial, g);
            self.pending.push(m);
        }
        Ok(())
    }

    /// Initial population fitted to stored experience by behavior search,
    /// without any environment interaction.
    pub fn init_offline(&mut self, experience: &ExperienceSet) -> Result<()> {
        self.ensure_fresh()?;
        experience.validate()?;
        let spec = self.env.spec();
        if experience.observation_dim != spec.observation_dim || experience.n_actions != spec.n_actions {
            return Err(Error::InvalidArgument(format!(
                "experience for {} ({}x{}) does not fit {}",
                experience.env, experience.observation_dim, experience.n_actions, spec.name
            )));
        }
        let mut refs = EliteArchive::new(self.cfg.archive_capacity, usize::MAX)?;
        refs.offer_batch(experience.trajectories.iter().filter(|t| !t.is_empty()).cloned().collect());
        let loss = LossSpec::new(Metric::BehaviorDistance, refs.reference_set(spec.n_actions)?)?;
        let mut ea_cfg = self.cfg.behavior_search.ea_config(vec![]);
        ea_cfg.mu = ea_cfg.mu.max(self.cfg.initial_population);
        let result = ea::run(
            &ea_cfg,
            &self.cgp,
            |g| behavior_loss(&g.decode(), &loss),
            &mut ConstantRate,
            &mut self.rng_gen,
        )?;
        for ind in result.population.into_iter().take(self.cfg.initial_population) {
            let m = self.member(CandidateKind::Initial, ind.genome);
            self.pending.push(m);
        }
        Ok(())
    }

    fn ensure_fresh(&self) -> Result<()> {
        if self.champion.is_some() || !self.pending.is_empty() {
            return Err(Error::InvalidArgument("population already initialized".into()));
        }
        Ok(())
    }

    /// Stored elite experience, for later offline initialization.
    pub fn experience(&self) -> ExperienceSet {
        let spec = self.env.spec();
        ExperienceSet {
            env: spec.name.clone(),
            observation_dim: spec.observation_dim,
            n_actions: spec.n_actions,
            trajectories: self.archive.entries().to_vec(),
        }
    }

    fn mode_for(&self, kind: CandidateKind) -> EvalMode {
        match kind {
            CandidateKind::Initial => EvalMode::with_exploration(self.cfg.initial_epsilon),
            CandidateKind::Mutant => EvalMode::with_exploration(self.cfg.mutant_epsilon),
            _ => EvalMode::Deterministic,
        }
    }

    pub fn run_iteration(&mut self) -> Result<IterationReport> {
        if self.champion.is_none() && self.pending.is_empty() {
            return Err(Error::InvalidArgument("population not initialized".into()));
        }
        let it = self.iteration;
        self.archive.begin_iteration();
        let mut trajectories: Vec<Trajectory> = Vec::new();
        let mut results = Vec::new();

        // (1) champion re-evaluation and fresh candidates
        if let Some((champ, rec)) = self.champion.as_mut() {
            let t = run_episode(
                self.env.as_mut(),
                &champ.phenotype,
                EvalMode::Deterministic,
                champ.id,
                &mut self.rng_eval,
            )?;
            rec.push(t.score);
            results.push(CandidateResult {
                id: champ.id,
                kind: CandidateKind::Champion,
                fitness: t.score,
                steps: t.len(),
            });
            trajectories.push(t);
        }
        let fresh = std::mem::take(&mut self.pending);
        let mut records = Vec::with_capacity(fresh.len());
        for m in &fresh {
            let mode = self.mode_for(m.kind);
            let t = run_episode(self.env.as_mut(), &m.phenotype, mode, m.id, &mut self.rng_eval)?;
            records.push(FitnessRecord::new(m.id, t.score));
            results.push(CandidateResult {
                id: m.id,
                kind: m.kind,
                fitness: t.score,
                steps: t.len(),
            });
            trajectories.push(t);
        }
        let best_kind = self.best_kind(&results);

        // (2) robust selection
        let mut members: Vec<Member> = Vec::with_capacity(fresh.len() + 1);
        let mut all: Vec<FitnessRecord> = Vec::with_capacity(fresh.len() + 1);
        let winner = match self.champion.take() {
            None => {
                members.extend(fresh);
                all.extend(records);
                (0..all.len())
                    .reduce(|a, b| if all[b].first() > all[a].first() { b } else { a })
                    .ok_or(Error::Empty("initial population"))?
            }
            Some((champ, champ_rec)) => {
                members.push(champ);
                members.extend(fresh);
                all.push(champ_rec);
                all.extend(records);
                let cfg = SelectionConfig::new(self.cfg.repeats)?;
                let lookup: HashMap<u64, usize> = members.iter().enumerate().map(|(i, m)| (m.id, i)).collect();
                let env = self.env.as_mut();
                let rng = &mut self.rng_eval;
                let (winner, duels) = selection::select(&mut all, 0, &cfg, |id| {
                    let m = &members[lookup[&id]];
                    let t = run_episode(env, &m.phenotype, EvalMode::Deterministic, id, rng)?;
                    let f = t.score;
                    trajectories.push(t);
                    Ok(f)
                })?;
                for d in duels {
                    debug!(
                        "iteration {it}: {} ({:.3}) vs {} ({:.3}) promoted={}",
                        d.champion, d.champion_mean, d.challenger, d.challenger_mean, d.promoted
                    );
                    self.selections.push(SelectionEvent { iteration: it, duel: d });
                }
                winner
            }
        };
        for (m, r) in members.iter().zip(&all) {
            if let Some(t) = trajectories.iter().find(|t| t.source.candidate == m.id) {
                self.surrogate.update(m.id, &m.genome, &t.states_flat(), r.mean())?;
            }
        }
        let threshold = self.check_env.spec().solve.threshold;
        let mut hopefuls: Vec<Member> = members
            .iter()
            .zip(&all)
            .filter(|(m, r)| r.first() >= threshold && !self.checked.contains(&m.id))
            .map(|(m, _)| m.clone())
            .collect();
        self.champion = Some((members.swap_remove(winner), all.swap_remove(winner)));

        // (3) archives and critic
        let steps: usize = trajectories.iter().map(Trajectory::len).sum();
        self.training_steps += steps as u64;
        for t in &mut trajectories {
            t.compute_returns(self.cfg.gamma)?;
        }
        let mut critic_loss = None;
        if let Some(net) = self.critic.as_mut() {
            for t in &trajectories {
                self.pool.append(t)?;
            }
            critic_loss = Some(critic::fit(net, &self.pool, &self.cfg.critic, &mut self.rng_critic)?);
        }
        self.archive.offer_batch(trajectories);

        // (4) segregated solve checks: the champion and any candidate that
        // reached the threshold, each policy at most once
        let (champ, _) = self.champion.as_ref().expect("champion set above");
        if !self.checked.contains(&champ.id) && !hopefuls.iter().any(|m| m.id == champ.id) {
            hopefuls.insert(0, champ.clone());
        }
        let mut checks = Vec::new();
        for m in hopefuls {
            if self.solved_at.is_some() {
                break;
            }
            self.checked.insert(m.id);
            let (solved, mean) = self.solve_check(&m.phenotype, m.id)?;
            checks.push((m.id, mean));
            if solved {
                info!("solved after {} training steps by candidate {}", self.training_steps, m.id);
                self.solved_at = Some(self.training_steps);
                self.solution = Some(m.genome);
            }
        }
        let (champ, champ_rec) = self.champion.as_ref().expect("champion set above");

        let report = IterationReport {
            iteration: it,
            candidates: results,
            champion: champ.id,
            champion_kind: champ.kind,
            champion_mean: champ_rec.mean(),
            champion_samples: champ_rec.n(),
            training_steps: self.training_steps,
            check_steps: self.check_steps,
            best_kind,
            critic_loss,
            checks,
            solved: self.solved_at.is_some(),
        };

        // (5) next candidates
        if self.solved_at.is_none() {
            self.generate()?;
        }
        self.iteration += 1;
        Ok(report)
    }

    /// Plays the solve-criterion window on the separate check environment.
    fn solve_check(&mut self, policy: &Phenotype, id: u64) -> Result<(bool, f64)> {
        let spec = self.check_env.spec().clone();
        let mut history = Vec::with_capacity(spec.solve.window);
        for _ in 0..spec.solve.window {
            let t = run_episode(self.check_env.as_mut(), policy, EvalMode::Deterministic, id, &mut self.rng_check)?;
            self.check_steps += t.len() as u64;
            history.push(t.score);
        }
        let mean = history.iter().sum::<f64>() / history.len() as f64;
        Ok((is_solved(&spec, &history)?, mean))
    }

    fn best_kind(&self, results: &[CandidateResult]) -> CandidateKind {
        let mut best = self
            .champion
            .as_ref()
            .map(|(_, r)| (CandidateKind::Champion, r.mean()));
        for r in results.iter().filter(|r| r.kind != CandidateKind::Champion) {
            if best.is_none_or(|(_, f)| r.fitness > f) {
                best = Some((r.kind, r.fitness));
            }
        }
        best.map_or(CandidateKind::Champion, |(k, _)| k)
    }

    fn references(&self, metric: Metric) -> Result<LossSpec> {
        let n_actions = self.env.spec().n_actions;
        let samples = self.archive.reference_set(n_actions)?;
        let entries = self.archive.entries().iter().filter(|t| !t.is_empty());
        let weighted = samples
            .into_iter()
            .zip(entries)
            .map(|(s, t)| {
                let w = match &self.critic {
                    Some(net) => critic::advantage(net, t)?,
                    None => t.rewards(),
                };
                s.with_weights(w)
            })
            .collect::<Result<Vec<_>>>()?;
        LossSpec::new(metric, weighted)
    }

    /// Best EA result that differs from the champion, else the best one.
    fn pick(result: EaResult, champion: &Genome) -> Genome {
        let idx = result
            .population
            .iter()
            .position(|i| &i.genome != champion)
            .unwrap_or(0);
        result.population.into_iter().nth(idx).expect("EA population is non-empty").genome
    }

    fn generate(&mut self) -> Result<()> {
        let champion = self.champion.as_ref().expect("champion exists").0.genome.clone();
        let gens = self.cfg.generators;
        if gens.mutant {
            let g = mutate(&champion, self.cfg.mutant_rate, &mut self.rng_gen)?;
            let m = self.member(CandidateKind::Mutant, g);
            self.pending.push(m);
        }
        for (enabled, metric, kind) in [
            (gens.bdist, Metric::WeightedBehaviorDistance, CandidateKind::Bdist),
            (gens.cross, Metric::WeightedCrossEntropy, CandidateKind::Cross),
        ] {
            if !enabled {
                continue;
            }
            let spec = self.references(metric)?;
            let cfg = self.cfg.behavior_search.ea_config(vec![champion.clone()]);
            let result = ea::run(
                &cfg,
                &self.cgp,
                |g| behavior_loss(&g.decode(), &spec),
                &mut ConstantRate,
                &mut self.rng_gen,
            )?;
            let m = self.member(kind, Self::pick(result, &champion));
            self.pending.push(m);
        }
        if gens.surrogate {
            let g = self.surrogate_candidate(&champion)?;
            let m = self.member(CandidateKind::Surrogate, g);
            self.pending.push(m);
        }
        Ok(())
    }

    fn surrogate_candidate(&mut self, champion: &Genome) -> Result<Genome> {
        let fallback = |rng: &mut ChaCha8Rng, rate| mutate(champion, rate, rng);
        if self.surrogate.len() < 3 {
            return fallback(&mut self.rng_gen, self.cfg.surrogate_search.mutation_rate);
        }
        let model = match KrigingModel::fit(self.surrogate.records(), &self.cfg.kriging) {
            Ok(m) => m,
            Err(e @ Error::Factorization { .. }) => {
                warn!("surrogate fit failed ({e}); mutating the champion instead");
                return fallback(&mut self.rng_gen, self.cfg.surrogate_search.mutation_rate);
            }
            Err(e) => return Err(e),
        };
        let cfg = self.cfg.surrogate_search.ea_config(vec![champion.clone()]);
        let result = surrogate_search(&model, &cfg, &self.cgp, &mut self.rng_gen)?;
        Ok(Self::pick(result, champion))
    }

    /// Iterates until solved or out of budget. Initializes randomly if no
    /// population exists yet.
    pub fn run(&mut self) -> Result<RunSummary> {
        let mut reports = Vec::new();
        if self.cfg.max_training_steps > 0 {
            if self.champion.is_none() && self.pending.is_empty() {
                self.initialize()?;
            }
            while self.solved_at.is_none()
                && self.training_steps < self.cfg.max_training_steps
                && (self.cfg.max_iterations == 0 || self.iteration < self.cfg.max_iterations)
            {
                reports.push(self.run_iteration()?);
            }
        }
        let solved_in_budget = self.solved_at.filter(|&s| s <= self.cfg.max_training_steps);
        Ok(RunSummary {
            solved: solved_in_budget.is_some(),
            steps_to_solve: solved_in_budget,
            iterations: self.iteration,
            training_steps: self.training_steps,
            check_steps: self.check_steps,
            champion: self.champion.as_ref().map(|(m, _)| m.genome.clone()),
            champion_mean: self.champion.as_ref().map(|(_, r)| r.mean()),
            solution: self.solution.clone(),
            reports,
            selections: self.selections.clone(),
        })
    }
}

/// Builds and runs a fresh training run.
pub fn run(cfg: BnetConfig) -> Result<RunSummary> {
    Bnet::new(cfg)?.run()
}
