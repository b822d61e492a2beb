use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

use super::Environment;
use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::trajectory::{Trajectory, TrajectorySource, Transition};

/// How a policy's action distribution is turned into actions.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum EvalMode {
    /// Most probable action, ties to the lowest id.
    Deterministic,
    /// Sample from the distribution.
    Stochastic,
    /// Uniformly random action with probability `epsilon`, otherwise sample.
    Explore { epsilon: f64 },
}

impl EvalMode {
    /// `Explore` with the given epsilon, or `Deterministic` when it is zero.
    pub fn with_exploration(epsilon: f64) -> Self {
        if epsilon > 0.0 {
            EvalMode::Explore { epsilon }
        } else {
            EvalMode::Deterministic
        }
    }

    fn choose(self, probs: &crate::cgp::ActionDistribution, rng: &mut dyn RngCore) -> usize {
        match self {
            EvalMode::Deterministic => probs.argmax(),
            EvalMode::Stochastic => probs.sample(rng),
            EvalMode::Explore { epsilon } => {
                if rng.gen_bool(epsilon) {
                    rng.gen_range(0..probs.len())
                } else {
                    probs.sample(rng)
                }
            }
        }
    }
}

/// Plays one full episode. Returns are left empty.
pub fn run_episode(
    env: &mut dyn Environment,
    policy: &dyn Policy,
    mode: EvalMode,
    candidate: u64,
    rng: &mut dyn RngCore,
) -> Result<Trajectory> {
    let n_actions = env.spec().n_actions;
    if policy.n_actions() != n_actions {
        return Err(Error::DimensionMismatch {
            expected: n_actions,
            actual: policy.n_actions(),
        });
    }
    if let EvalMode::Explore { epsilon } = mode {
        if !(0.0..=1.0).contains(&epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon {epsilon} outside [0, 1]")));
        }
    }
    let mut state = env.reset(rng);
    let mut transitions = Vec::new();
    let mut fitness = 0.0;
    loop {
        let probs = policy.act(&state)?;
        if probs.probs().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite("policy output"));
        }
        let action = mode.choose(&probs, rng);
        let step = env.step(action)?;
        fitness += step.reward;
        transitions.push(Transition {
            state,
            action,
            reward: step.reward,
            action_probabilities: probs.into_inner(),
        });
        if step.done() {
            break;
        }
        state = step.next_state;
    }
    Ok(Trajectory {
        transitions,
        fitness,
        score: env.episode_score(),
        returns: Vec::new(),
        source: TrajectorySource { candidate, mode },
    })
}
