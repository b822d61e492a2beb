//! Behavior distances and imitation losses between policies, measured on
//! stored state sets.
//!
//! A behavior is the list of action distributions a policy emits on a set
//! of states. Distances use the L1 norm between per-state distributions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::policy::Policy;
use crate::trajectory::{adapt_to_action, Trajectory};

/// Floor applied to probabilities inside logarithms.
pub const PROB_FLOOR: f64 = 1e-12;

/// A reference behavior: states, the actions taken in them, the adapted
/// reference distributions and a per-step weight.
#[derive(Clone, Debug, PartialEq)]
pub struct BehaviorSample {
    dim: usize,
    n_actions: usize,
    states: Vec<f64>,
    actions: Vec<usize>,
    reference: Vec<f64>,
    weights: Vec<f64>,
}

impl BehaviorSample {
    pub fn new(
        dim: usize,
        n_actions: usize,
        states: Vec<f64>,
        actions: Vec<usize>,
        reference: Vec<f64>,
        weights: Vec<f64>,
    ) -> Result<Self> {
        let t = actions.len();
        if t == 0 {
            return Err(Error::Empty("behavior sample"));
        }
        if dim == 0 || states.len() != t * dim {
            return Err(Error::DimensionMismatch {
                expected: t * dim,
                actual: states.len(),
            });
        }
        if reference.len() != t * n_actions {
            return Err(Error::DimensionMismatch {
                expected: t * n_actions,
                actual: reference.len(),
            });
        }
        if weights.len() != t {
            return Err(Error::DimensionMismatch {
                expected: t,
                actual: weights.len(),
            });
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= n_actions) {
            return Err(Error::ActionOutOfRange { action: a, n_actions });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("behavior weights"));
        }
        Ok(BehaviorSample {
            dim,
            n_actions,
            states,
            actions,
            reference,
            weights,
        })
    }

    /// Reference built from a stored episode: each stored distribution is
    /// replaced by a one-hot vector on the action that was taken.
    pub fn from_trajectory(trajectory: &Trajectory, n_actions: usize) -> Result<Self> {
        let reference = trajectory
            .transitions
            .iter()
            .flat_map(|t| {
                if t.action_probabilities.len() == n_actions {
                    adapt_to_action(&t.action_probabilities, t.action.min(n_actions - 1))
                } else {
                    vec![f64::NAN; n_actions]
                }
            })
            .collect::<Vec<_>>();
        if reference.iter().any(|p| p.is_nan()) {
            return Err(Error::DimensionMismatch {
                expected: n_actions,
                actual: trajectory.transitions[0].action_probabilities.len(),
            });
        }
        BehaviorSample::new(
            trajectory.state_dim(),
            n_actions,
            trajectory.states_flat(),
            trajectory.transitions.iter().map(|t| t.action).collect(),
            reference,
            vec![1.0; trajectory.len()],
        )
    }

    pub fn with_weights(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                actual: weights.len(),
            });
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::NonFinite("behavior weights"));
        }
        self.weights = weights;
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn actions(&self) -> &[usize] {
        &self.actions
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn reference(&self) -> &[f64] {
        &self.reference
    }

    pub fn reference_row(&self, t: usize) -> &[f64] {
        &self.reference[t * self.n_actions..(t + 1) * self.n_actions]
    }

    fn state_rows(&self, rows: &[usize]) -> Vec<f64> {
        rows.iter()
            .flat_map(|&t| self.states[t * self.dim..(t + 1) * self.dim].iter().copied())
            .collect()
    }
}

fn l1(p: &[f64], q: &[f64]) -> f64 {
    p.iter().zip(q).map(|(a, b)| (a - b).abs()).sum()
}

fn cross_entropy(p: &[f64], q: &[f64]) -> f64 {
    -p.iter()
        .zip(q)
        .filter(|(&pi, _)| pi != 0.0)
        .map(|(pi, qi)| pi * qi.max(PROB_FLOOR).ln())
        .sum::<f64>()
}

fn check_actions(policy: &dyn Policy, n_actions: usize) -> Result<()> {
    if policy.n_actions() != n_actions {
        return Err(Error::DimensionMismatch {
            expected: n_actions,
            actual: policy.n_actions(),
        });
    }
    Ok(())
}

/// Mean L1 distance between two policies' distributions over `states`
/// (row-major, `dim` columns).
pub fn behavior_distance(a: &dyn Policy, b: &dyn Policy, states: &[f64], dim: usize) -> Result<f64> {
    if states.is_empty() || dim == 0 {
        return Err(Error::Empty("state set"));
    }
    check_actions(b, a.n_actions())?;
    let n = a.n_actions();
    let pa = a.act_batch(states, dim)?;
    let pb = b.act_batch(states, dim)?;
    Ok(mean_row_distance(&pa, &pb, n))
}

/// Mean L1 distance between two row-major probability matrices.
pub fn mean_row_distance(p: &[f64], q: &[f64], n_actions: usize) -> f64 {
    let rows = p.len() / n_actions;
    let total: f64 = p
        .chunks(n_actions)
        .zip(q.chunks(n_actions))
        .map(|(x, y)| l1(x, y))
        .sum();
    total / rows as f64
}

/// Weight-normalised behavior distance to the sample's reference.
/// Falls back to the unweighted distance when all weights are zero.
pub fn weighted_behavior_distance(policy: &dyn Policy, sample: &BehaviorSample) -> Result<f64> {
    check_actions(policy, sample.n_actions)?;
    let probs = policy.act_batch(&sample.states, sample.dim)?;
    Ok(wbd_from_rows(&probs, sample, 0..sample.len()))
}

fn wbd_from_rows(probs: &[f64], sample: &BehaviorSample, rows: impl Iterator<Item = usize>) -> f64 {
    let n = sample.n_actions;
    let t_star = sample.len() as f64;
    let abs_sum: f64 = sample.weights.iter().map(|w| w.abs()).sum();
    let mut num = 0.0;
    let mut plain = 0.0;
    for (k, t) in rows.enumerate() {
        let d = l1(&probs[k * n..(k + 1) * n], sample.reference_row(t));
        num += d * sample.weights[t];
        plain += d;
    }
    if abs_sum == 0.0 {
        plain / t_star
    } else {
        (num / t_star) / (abs_sum / t_star)
    }
}

/// Cross-entropy of the policy against the one-hot reference, weighted by
/// the positive part of each step's weight.
pub fn weighted_cross_entropy(policy: &dyn Policy, sample: &BehaviorSample) -> Result<f64> {
    check_actions(policy, sample.n_actions)?;
    let probs = policy.act_batch(&sample.states, sample.dim)?;
    Ok(wce_from_rows(&probs, sample, 0..sample.len()))
}

fn wce_from_rows(probs: &[f64], sample: &BehaviorSample, rows: impl Iterator<Item = usize>) -> f64 {
    let n = sample.n_actions;
    let mut total = 0.0;
    for (k, t) in rows.enumerate() {
        let h = cross_entropy(sample.reference_row(t), &probs[k * n..(k + 1) * n]);
        total += h * positive_advantage(sample.weights[t]);
    }
    total / sample.len() as f64
}

/// Keeps non-negative advantages, zeroes the rest.
pub fn positive_advantage(w: f64) -> f64 {
    if w >= 0.0 {
        w
    } else {
        0.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    BehaviorDistance,
    WeightedBehaviorDistance,
    WeightedCrossEntropy,
}

/// Sum of a metric between a candidate and several reference behaviors.
///
/// Rows that cannot contribute (zero weight for the weighted distance,
/// non-positive weight for the cross-entropy) are dropped up front so the
/// candidate is only evaluated where it matters.
#[derive(Clone, Debug)]
pub struct LossSpec {
    metric: Metric,
    references: Vec<BehaviorSample>,
    prepared: Vec<Prepared>,
}

#[derive(Clone, Debug)]
struct Prepared {
    rows: Vec<usize>,
    states: Vec<f64>,
}

impl LossSpec {
    pub fn new(metric: Metric, references: Vec<BehaviorSample>) -> Result<Self> {
        let first = references.first().ok_or(Error::Empty("reference behaviors"))?;
        let (dim, n) = (first.dim, first.n_actions);
        if let Some(r) = references.iter().find(|r| r.dim != dim || r.n_actions != n) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: r.dim,
            });
        }
        let prepared = references
            .iter()
            .map(|r| {
                let keep: Box<dyn Fn(f64) -> bool> = match metric {
                    Metric::BehaviorDistance => Box::new(|_| true),
                    Metric::WeightedBehaviorDistance if r.weights.iter().all(|&w| w == 0.0) => {
                        Box::new(|_| true)
                    }
                    Metric::WeightedBehaviorDistance => Box::new(|w| w != 0.0),
                    Metric::WeightedCrossEntropy => Box::new(|w| w > 0.0),
                };
                let rows: Vec<usize> = (0..r.len()).filter(|&t| keep(r.weights[t])).collect();
                Prepared {
                    states: r.state_rows(&rows),
                    rows,
                }
            })
            .collect();
        Ok(LossSpec {
            metric,
            references,
            prepared,
        })
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn references(&self) -> &[BehaviorSample] {
        &self.references
    }

    pub fn n_actions(&self) -> usize {
        self.references[0].n_actions
    }

    pub fn dim(&self) -> usize {
        self.references[0].dim
    }

    /// States the candidate is evaluated on, summed over references.
    pub fn evaluated_rows(&self) -> usize {
        self.prepared.iter().map(|p| p.rows.len()).sum()
    }
}

/// Sum over references of the spec's metric; lower is better.
pub fn behavior_loss(policy: &dyn Policy, spec: &LossSpec) -> Result<f64> {
    check_actions(policy, spec.n_actions())?;
    let mut total = 0.0;
    for (r, p) in spec.references.iter().zip(&spec.prepared) {
        // only the cross-entropy can drop every row, and then contributes zero
        if p.rows.is_empty() {
            continue;
        }
        let probs = policy.act_batch(&p.states, r.dim)?;
        total += match spec.metric {
            Metric::BehaviorDistance => {
                let n = r.n_actions;
                let sum: f64 = p
                    .rows
                    .iter()
                    .enumerate()
                    .map(|(k, &t)| l1(&probs[k * n..(k + 1) * n], r.reference_row(t)))
                    .sum();
                sum / r.len() as f64
            }
            Metric::WeightedBehaviorDistance => wbd_from_rows(&probs, r, p.rows.iter().copied()),
            Metric::WeightedCrossEntropy => wce_from_rows(&probs, r, p.rows.iter().copied()),
        };
    }
    Ok(total)
}

/// Distance between a policy and the sample's reference distributions,
/// ignoring weights.
pub fn reference_distance(policy: &dyn Policy, sample: &BehaviorSample) -> Result<f64> {
    check_actions(policy, sample.n_actions)?;
    let probs = policy.act_batch(&sample.states, sample.dim)?;
    Ok(mean_row_distance(&probs, &sample.reference, sample.n_actions))
}
