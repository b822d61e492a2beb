use rand::{Rng, RngCore};

use super::{count_step, EnvSpec, Environment, SolveCriterion, StepResult};
use crate::error::{Error, Result};

pub const MIN_POSITION: f64 = -1.2;
pub const MAX_POSITION: f64 = 0.6;
pub const MAX_SPEED: f64 = 0.07;
pub const GOAL_POSITION: f64 = 0.5;
pub const GOAL_VELOCITY: f64 = 0.0;
pub const FORCE: f64 = 0.001;
pub const GRAVITY: f64 = 0.0025;
pub const MAX_STEPS: usize = 200;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        name: "mountaincar".into(),
        observation_dim: 2,
        n_actions: 3,
        max_episode_steps: MAX_STEPS,
        solve: SolveCriterion {
            window: 100,
            threshold: -110.0,
        },
    }
}

/// Under-powered car in a valley. Actions: 0 accelerate left, 1 coast,
/// 2 accelerate right. Every step costs -1.
#[derive(Clone, Debug)]
pub struct MountainCar {
    spec: EnvSpec,
    position: f64,
    velocity: f64,
    steps: usize,
    done: bool,
    score: f64,
}

impl Default for MountainCar {
    fn default() -> Self {
        Self::new()
    }
}

impl MountainCar {
    pub fn new() -> Self {
        MountainCar {
            spec: spec(),
            position: -0.5,
            velocity: 0.0,
            steps: 0,
            done: true,
            score: 0.0,
        }
    }

    pub fn reset_to(&mut self, position: f64, velocity: f64) -> Vec<f64> {
        self.position = position;
        self.velocity = velocity;
        self.steps = 0;
        self.done = false;
        self.score = 0.0;
        vec![position, velocity]
    }
}

impl Environment for MountainCar {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let p = rng.gen_range(-0.6..-0.4);
        self.reset_to(p, 0.0)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= 3 {
            return Err(Error::ActionOutOfRange { action, n_actions: 3 });
        }
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        count_step();
        let mut v = self.velocity + (action as f64 - 1.0) * FORCE + (3.0 * self.position).cos() * (-GRAVITY);
        v = v.clamp(-MAX_SPEED, MAX_SPEED);
        let mut p = self.position + v;
        p = p.clamp(MIN_POSITION, MAX_POSITION);
        if p == MIN_POSITION && v < 0.0 {
            v = 0.0;
        }
        self.position = p;
        self.velocity = v;
        self.steps += 1;
        self.score -= 1.0;

        let terminal = p >= GOAL_POSITION && v >= GOAL_VELOCITY;
        let truncated = !terminal && self.steps >= MAX_STEPS;
        self.done = terminal || truncated;
        Ok(StepResult {
            next_state: vec![p, v],
            reward: -1.0,
            terminal,
            truncated,
        })
    }

    fn episode_score(&self) -> f64 {
        self.score
    }
}
