use crate::cgp::{ActionDistribution, Phenotype};
use crate::error::{Error, Result};

/// Anything that maps a state to a distribution over discrete actions.
pub trait Policy: Sync {
    fn n_actions(&self) -> usize;

    fn act(&self, state: &[f64]) -> Result<ActionDistribution>;

    /// Row-major probabilities for row-major `states` of width `dim`.
    fn act_batch(&self, states: &[f64], dim: usize) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(states.len() / dim.max(1) * self.n_actions());
        for row in states.chunks(dim) {
            out.extend_from_slice(self.act(row)?.probs());
        }
        Ok(out)
    }
}

impl Policy for Phenotype {
    fn n_actions(&self) -> usize {
        self.n_outputs()
    }

    fn act(&self, state: &[f64]) -> Result<ActionDistribution> {
        self.forward(state)
    }

    fn act_batch(&self, states: &[f64], dim: usize) -> Result<Vec<f64>> {
        if dim != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                actual: dim,
            });
        }
        self.forward_batch(states)
    }
}

/// Emits the same distribution in every state.
#[derive(Clone, Debug)]
pub struct FixedPolicy(pub ActionDistribution);

impl Policy for FixedPolicy {
    fn n_actions(&self) -> usize {
        self.0.len()
    }

    fn act(&self, _state: &[f64]) -> Result<ActionDistribution> {
        Ok(self.0.clone())
    }
}

/// Wraps a closure as a policy; handy for scripted controllers.
pub struct FnPolicy<F> {
    n_actions: usize,
    f: F,
}

impl<F> FnPolicy<F>
where
    F: Fn(&[f64]) -> ActionDistribution + Sync,
{
    pub fn new(n_actions: usize, f: F) -> Self {
        FnPolicy { n_actions, f }
    }
}

impl<F> Policy for FnPolicy<F>
where
    F: Fn(&[f64]) -> ActionDistribution + Sync,
{
    fn n_actions(&self) -> usize {
        self.n_actions
    }

    fn act(&self, state: &[f64]) -> Result<ActionDistribution> {
        Ok((self.f)(state))
    }
}
