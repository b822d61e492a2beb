//! State-value critic: a small tanh MLP regressed onto Monte-Carlo returns.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trajectory::{ExperiencePool, Trajectory};

/// Where the per-step weights of the behavior losses come from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightingSource {
    /// Advantage `R_t - V(s_t)` from the fitted critic.
    Critic,
    /// The immediate reward of each step; no critic is trained.
    DirectReward,
}

/// Fully connected network `input -> hidden... -> 1` with tanh hidden
/// units and a linear output. Parameters are stored layer by layer, each
/// as a row-major `out x in` weight block followed by `out` biases.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ValueNet {
    sizes: Vec<usize>,
    params: Vec<f64>,
}

impl ValueNet {
    pub fn new<R: Rng + ?Sized>(input_dim: usize, hidden: &[usize], rng: &mut R) -> Self {
        let mut net = Self::zeros(input_dim, hidden);
        let mut offset = 0;
        for w in net.sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            for p in &mut net.params[offset..offset + fan_out * (fan_in + 1)] {
                *p = rng.gen_range(-bound..bound);
            }
            offset += fan_out * (fan_in + 1);
        }
        net
    }

    pub fn zeros(input_dim: usize, hidden: &[usize]) -> Self {
        let mut sizes = vec![input_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let n = sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        ValueNet {
            sizes,
            params: vec![0.0; n],
        }
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn check(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim(),
                actual: state.len(),
            });
        }
        Ok(())
    }

    /// Layer activations, input first, output last.
    fn activations(&self, state: &[f64]) -> Vec<Vec<f64>> {
        let mut acts = vec![state.to_vec()];
        let mut offset = 0;
        let last = self.sizes.len() - 2;
        for (l, w) in self.sizes.windows(2).enumerate() {
            let (n_in, n_out) = (w[0], w[1]);
            let weights = &self.params[offset..offset + n_out * n_in];
            let biases = &self.params[offset + n_out * n_in..offset + n_out * (n_in + 1)];
            let input = &acts[l];
            let out: Vec<f64> = (0..n_out)
                .map(|o| {
                    let row = &weights[o * n_in..(o + 1) * n_in];
                    let z = biases[o] + row.iter().zip(input).map(|(a, b)| a * b).sum::<f64>();
                    if l == last {
                        z
                    } else {
                        z.tanh()
                    }
                })
                .collect();
            acts.push(out);
            offset += n_out * (n_in + 1);
        }
        acts
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        self.check(state)?;
        Ok(self.activations(state).last().map_or(0.0, |a| a[0]))
    }

    /// Adds `scale * dV/dparams` into `grad`, given the activations of one forward pass.
    fn backprop(&self, acts: &[Vec<f64>], scale: f64, grad: &mut [f64]) {
        let n_layers = self.sizes.len() - 1;
        let mut offsets = Vec::with_capacity(n_layers);
        let mut offset = 0;
        for w in self.sizes.windows(2) {
            offsets.push(offset);
            offset += w[1] * (w[0] + 1);
        }
        // delta = dV/dz for the current layer
        let mut delta = vec![scale];
        for l in (0..n_layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let off = offsets[l];
            let input = &acts[l];
            for o in 0..n_out {
                let d = delta[o];
                let row = &mut grad[off + o * n_in..off + (o + 1) * n_in];
                for (g, x) in row.iter_mut().zip(input) {
                    *g += d * x;
                }
                grad[off + n_out * n_in + o] += d;
            }
            if l > 0 {
                let weights = &self.params[off..off + n_out * n_in];
                delta = (0..n_in)
                    .map(|i| {
                        let back: f64 = (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum();
                        // input of layer l is tanh output of layer l-1
                        back * (1.0 - input[i] * input[i])
                    })
                    .collect();
            }
        }
    }

    /// Gradient of `V(state)` with respect to every parameter.
    pub fn value_gradient(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check(state)?;
        let mut grad = vec![0.0; self.params.len()];
        self.backprop(&self.activations(state), 1.0, &mut grad);
        Ok(grad)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CriticTrainConfig {
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for CriticTrainConfig {
    fn default() -> Self {
        CriticTrainConfig {
            steps: 1000,
            batch_size: 64,
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Mean squared error of the critic over the whole pool.
pub fn pool_mse(net: &ValueNet, pool: &ExperiencePool) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Empty("experience pool"));
    }
    let mut total = 0.0;
    for e in pool.iter() {
        let d = net.value(&e.state)? - e.ret;
        total += d * d;
    }
    Ok(total / pool.len() as f64)
}

/// Minibatch Adam on the squared error between `V(s)` and the stored
/// returns. Returns the pool MSE after training.
pub fn fit<R: Rng + ?Sized>(
    net: &mut ValueNet,
    pool: &ExperiencePool,
    cfg: &CriticTrainConfig,
    rng: &mut R,
) -> Result<f64> {
    if pool.is_empty() {
        return Err(Error::Empty("experience pool"));
    }
    if cfg.batch_size == 0 {
        return Err(Error::InvalidConfig("critic batch_size must be positive".into()));
    }
    if let Some(e) = pool.iter().find(|e| e.state.len() != net.input_dim()) {
        return Err(Error::DimensionMismatch {
            expected: net.input_dim(),
            actual: e.state.len(),
        });
    }
    let n = net.params.len();
    let mut m = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut grad = vec![0.0; n];
    let scale = 2.0 / cfg.batch_size as f64;
    for step in 1..=cfg.steps {
        grad.fill(0.0);
        let mut batch_loss = 0.0;
        for _ in 0..cfg.batch_size {
            let e = pool.get(rng.gen_range(0..pool.len()));
            let acts = net.activations(&e.state);
            let err = acts[acts.len() - 1][0] - e.ret;
            batch_loss += err * err;
            // dL/dV = 2 (V - R) / B
            net.backprop(&acts, scale * err, &mut grad);
        }
        if !batch_loss.is_finite() {
            return Err(Error::NonFinite("critic loss"));
        }
        let t = step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..n {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
            net.params[i] -= cfg.learning_rate * (m[i] / c1) / ((v[i] / c2).sqrt() + cfg.epsilon);
        }
    }
    let mse = pool_mse(net, pool)?;
    if !mse.is_finite() {
        return Err(Error::NonFinite("critic loss"));
    }
    Ok(mse)
}

/// Monte-Carlo advantage `R_t - V(s_t)` for every step.
pub fn advantage(net: &ValueNet, trajectory: &Trajectory) -> Result<Vec<f64>> {
    if trajectory.returns.len() != trajectory.len() {
        return Err(Error::InvalidArgument("trajectory returns not computed".into()));
    }
    trajectory
        .transitions
        .iter()
        .zip(&trajectory.returns)
        .map(|(t, r)| Ok(r - net.value(&t.state)?))
        .collect()
}
