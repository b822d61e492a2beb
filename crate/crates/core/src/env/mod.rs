//! Seedable episodic environments: CartPole, MountainCar and a tilting grid maze.

mod cartpole;
mod episode;
mod maze;
mod mountain_car;

use std::cell::Cell;
use std::fmt;
use std::str::FromStr;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cartpole::CartPole;
pub use episode::{run_episode, EvalMode};
pub use maze::{Cell as MazeCell, GridMaze, MazeFitness, MazeLayout, MazeOptions, DEFAULT_MAZE};
pub use mountain_car::MountainCar;

thread_local! {
    static STEPS: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn count_step() {
    STEPS.with(|s| s.set(s.get() + 1));
}

/// Environment steps taken on the calling thread since it started.
pub fn thread_env_steps() -> u64 {
    STEPS.with(Cell::get)
}

/// Solve rule: mean of the last `window` evaluation scores reaches `threshold`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveCriterion {
    pub window: usize,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub name: String,
    pub observation_dim: usize,
    pub n_actions: usize,
    pub max_episode_steps: usize,
    pub solve: SolveCriterion,
}

/// Checks an evaluation history (oldest first) against the solve rule.
pub fn is_solved(spec: &EnvSpec, history: &[f64]) -> Result<bool> {
    if history.is_empty() {
        return Err(Error::Empty("evaluation history"));
    }
    let w = spec.solve.window;
    if history.len() < w {
        return Ok(false);
    }
    let tail = &history[history.len() - w..];
    Ok(tail.iter().sum::<f64>() / w as f64 >= spec.solve.threshold)
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    pub terminal: bool,
    pub truncated: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment: Send {
    fn spec(&self) -> &EnvSpec;

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;

    fn step(&mut self, action: usize) -> Result<StepResult>;

    /// Selection fitness of the episode so far. Equals the cumulative reward
    /// except for the maze, which counts progress-making moves.
    fn episode_score(&self) -> f64;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnvKind {
    CartPole,
    MountainCar,
    GridMaze,
}

impl EnvKind {
    pub const ALL: [EnvKind; 3] = [EnvKind::CartPole, EnvKind::MountainCar, EnvKind::GridMaze];

    pub fn name(self) -> &'static str {
        match self {
            EnvKind::CartPole => "cartpole",
            EnvKind::MountainCar => "mountaincar",
            EnvKind::GridMaze => "gridmaze",
        }
    }

    pub fn spec(self) -> EnvSpec {
        match self {
            EnvKind::CartPole => cartpole::spec(),
            EnvKind::MountainCar => mountain_car::spec(),
            EnvKind::GridMaze => maze::spec(),
        }
    }

    /// Builds an environment; `maze` is only consulted for [`EnvKind::GridMaze`].
    /// Box bounds of the observation, when every component is bounded.
    pub fn observation_bounds(self) -> Option<Vec<(f64, f64)>> {
        match self {
            EnvKind::MountainCar => Some(vec![
                (mountain_car::MIN_POSITION, mountain_car::MAX_POSITION),
                (-mountain_car::MAX_SPEED, mountain_car::MAX_SPEED),
            ]),
            EnvKind::CartPole | EnvKind::GridMaze => None,
        }
    }

    /// Like [`make`](EnvKind::make), wrapped in [`NormalizedObservations`]
    /// when `normalize` is set.
    pub fn make_with(
        self,
        maze: Option<(&MazeLayout, MazeOptions)>,
        normalize: bool,
    ) -> Result<Box<dyn Environment>> {
        let env = self.make(maze)?;
        if !normalize {
            return Ok(env);
        }
        let bounds = self.observation_bounds().ok_or_else(|| {
            Error::InvalidConfig(format!("{self} observations are unbounded and cannot be normalized"))
        })?;
        Ok(Box::new(NormalizedObservations::new(env, &bounds)?))
    }

    pub fn make(self, maze: Option<(&MazeLayout, MazeOptions)>) -> Result<Box<dyn Environment>> {
        Ok(match self {
            EnvKind::CartPole => Box::new(CartPole::new()),
            EnvKind::MountainCar => Box::new(MountainCar::new()),
            EnvKind::GridMaze => match maze {
                Some((layout, opts)) => Box::new(GridMaze::new(layout.clone(), opts)?),
                None => Box::new(GridMaze::new(MazeLayout::default_layout(), MazeOptions::default())?),
            },
        })
    }
}

impl fmt::Display for EnvKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EnvKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', '_'], "").as_str() {
            "cartpole" | "cartpolev0" => Ok(EnvKind::CartPole),
            "mountaincar" | "mountaincarv0" => Ok(EnvKind::MountainCar),
            "gridmaze" | "maze" | "robotmaze" => Ok(EnvKind::GridMaze),
            _ => Err(Error::InvalidArgument(format!(
                "unknown environment `{s}` (expected cartpole, mountaincar or gridmaze)"
            ))),
        }
    }
}

/// Maps each observation component affinely from its bounds onto [-1, 1].
pub struct NormalizedObservations {
    inner: Box<dyn Environment>,
    center: Vec<f64>,
    half_width: Vec<f64>,
}

impl NormalizedObservations {
    pub fn new(inner: Box<dyn Environment>, bounds: &[(f64, f64)]) -> Result<Self> {
        if bounds.len() != inner.spec().observation_dim {
            return Err(Error::DimensionMismatch {
                expected: inner.spec().observation_dim,
                actual: bounds.len(),
            });
        }
        if bounds.iter().any(|&(lo, hi)| !(lo.is_finite() && hi.is_finite() && lo < hi)) {
            return Err(Error::InvalidArgument("observation bounds must be finite with low < high".into()));
        }
        Ok(NormalizedObservations {
            inner,
            center: bounds.iter().map(|&(lo, hi)| 0.5 * (lo + hi)).collect(),
            half_width: bounds.iter().map(|&(lo, hi)| 0.5 * (hi - lo)).collect(),
        })
    }

    fn map(&self, mut x: Vec<f64>) -> Vec<f64> {
        for ((v, c), h) in x.iter_mut().zip(&self.center).zip(&self.half_width) {
            *v = (*v - c) / h;
        }
        x
    }
}

impl Environment for NormalizedObservations {
    fn spec(&self) -> &EnvSpec {
        self.inner.spec()
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let x = self.inner.reset(rng);
        self.map(x)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        let mut r = self.inner.step(action)?;
        r.next_state = self.map(std::mem::take(&mut r.next_state));
        Ok(r)
    }

    fn episode_score(&self) -> f64 {
        self.inner.episode_score()
    }
}
