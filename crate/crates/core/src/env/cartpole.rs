use rand::{Rng, RngCore};

use super::{count_step, EnvSpec, Environment, SolveCriterion, StepResult};
use crate::error::{Error, Result};

pub const GRAVITY: f64 = 9.8;
pub const MASS_CART: f64 = 1.0;
pub const MASS_POLE: f64 = 0.1;
pub const TOTAL_MASS: f64 = MASS_CART + MASS_POLE;
/// Half the pole length.
pub const LENGTH: f64 = 0.5;
pub const POLE_MASS_LENGTH: f64 = MASS_POLE * LENGTH;
pub const FORCE_MAG: f64 = 10.0;
pub const TAU: f64 = 0.02;
pub const THETA_THRESHOLD: f64 = 12.0 * 2.0 * std::f64::consts::PI / 360.0;
pub const X_THRESHOLD: f64 = 2.4;
pub const MAX_STEPS: usize = 200;

pub(super) fn spec() -> EnvSpec {
    EnvSpec {
        name: "cartpole".into(),
        observation_dim: 4,
        n_actions: 2,
        max_episode_steps: MAX_STEPS,
        solve: SolveCriterion {
            window: 100,
            threshold: 195.0,
        },
    }
}

/// Classic cart-pole balancing with Euler integration. Action 0 pushes
/// left, action 1 pushes right; every step is worth +1.
#[derive(Clone, Debug)]
pub struct CartPole {
    spec: EnvSpec,
    state: [f64; 4],
    steps: usize,
    done: bool,
    score: f64,
}

impl Default for CartPole {
    fn default() -> Self {
        Self::new()
    }
}

impl CartPole {
    pub fn new() -> Self {
        CartPole {
            spec: spec(),
            state: [0.0; 4],
            steps: 0,
            done: true,
            score: 0.0,
        }
    }

    /// Starts an episode from an explicit state.
    pub fn reset_to(&mut self, state: [f64; 4]) -> Vec<f64> {
        self.state = state;
        self.steps = 0;
        self.done = false;
        self.score = 0.0;
        state.to_vec()
    }

    pub fn state(&self) -> [f64; 4] {
        self.state
    }
}

impl Environment for CartPole {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let mut s = [0.0; 4];
        for v in &mut s {
            *v = rng.gen_range(-0.05..0.05);
        }
        self.reset_to(s)
    }

    fn step(&mut self, action: usize) -> Result<StepResult> {
        if action >= 2 {
            return Err(Error::ActionOutOfRange { action, n_actions: 2 });
        }
        if self.done {
            return Err(Error::EpisodeFinished);
        }
        count_step();
        let [x, x_dot, theta, theta_dot] = self.state;
        let force = if action == 1 { FORCE_MAG } else { -FORCE_MAG };
        let (sin, cos) = theta.sin_cos();
        let temp = (force + POLE_MASS_LENGTH * theta_dot * theta_dot * sin) / TOTAL_MASS;
        let theta_acc = (GRAVITY * sin - cos * temp)
            / (LENGTH * (4.0 / 3.0 - MASS_POLE * cos * cos / TOTAL_MASS));
        let x_acc = temp - POLE_MASS_LENGTH * theta_acc * cos / TOTAL_MASS;

        self.state = [
            x + TAU * x_dot,
            x_dot + TAU * x_acc,
            theta + TAU * theta_dot,
            theta_dot + TAU * theta_acc,
        ];
        self.steps += 1;
        self.score += 1.0;

        let [x, _, theta, _] = self.state;
        let terminal = !(-X_THRESHOLD..=X_THRESHOLD).contains(&x)
            || !(-THETA_THRESHOLD..=THETA_THRESHOLD).contains(&theta);
        let truncated = !terminal && self.steps >= MAX_STEPS;
        self.done = terminal || truncated;
        Ok(StepResult {
            next_state: self.state.to_vec(),
            reward: 1.0,
            terminal,
            truncated,
        })
    }

    fn episode_score(&self) -> f64 {
        self.score
    }
}
