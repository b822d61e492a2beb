//! Cartesian Genetic Programming neural networks used as stochastic policies.
//!
//! A genome is a single row of `n_nodes` nodes. Every node reads `arity`
//! weighted values from input terminals or earlier nodes, so any genome is
//! acyclic by construction. Addresses `0..n_inputs` are input terminals,
//! address `n_inputs + i` is node `i`.
//!
//! Only nodes reachable from the output genes are decoded into a
//! [`Phenotype`]. The readout values are normalised with a softmax into an
//! [`ActionDistribution`].

use std::fmt::Write as _;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Node outputs are saturated to this magnitude so deep relu chains stay finite.
const ACTIVATION_LIMIT: f64 = 1e12;

/// Attempts at resampling a structural gene before the parent value is kept.
const CAP_RETRIES: usize = 50;

/// Rows evaluated together by [`Phenotype::forward_batch`].
const BATCH_CHUNK: usize = 64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeFunction {
    Tanh,
    Sigmoid,
    Gaussian,
    Step,
    Relu,
}

impl NodeFunction {
    pub const ALL: [NodeFunction; 5] = [
        NodeFunction::Tanh,
        NodeFunction::Sigmoid,
        NodeFunction::Gaussian,
        NodeFunction::Step,
        NodeFunction::Relu,
    ];

    #[inline]
    pub fn apply(self, x: f64) -> f64 {
        match self {
            NodeFunction::Tanh => x.tanh(),
            NodeFunction::Sigmoid => 1.0 / (1.0 + (-x).exp()),
            NodeFunction::Gaussian => (-x * x).exp(),
            NodeFunction::Step => {
                if x >= 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            NodeFunction::Relu => x.clamp(0.0, ACTIVATION_LIMIT),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NodeFunction::Tanh => "tanh",
            NodeFunction::Sigmoid => "sigmoid",
            NodeFunction::Gaussian => "gaussian",
            NodeFunction::Step => "step",
            NodeFunction::Relu => "relu",
        }
    }
}

impl FromStr for NodeFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NodeFunction::ALL
            .iter()
            .copied()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::Format(format!("unknown node function `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CgpConfig {
    pub n_inputs: usize,
    pub n_outputs: usize,
    pub n_nodes: usize,
    pub arity: usize,
    pub function_set: Vec<NodeFunction>,
    pub weight_range: (f64, f64),
    /// `None` means any earlier node may be addressed.
    pub levels_back: Option<usize>,
    pub max_active: usize,
}

impl CgpConfig {
    /// Default grid: one row of 400 nodes, arity 10, at most 200 active nodes.
    pub fn new(n_inputs: usize, n_outputs: usize) -> Self {
        CgpConfig {
            n_inputs,
            n_outputs,
            n_nodes: 400,
            arity: 10,
            function_set: NodeFunction::ALL.to_vec(),
            weight_range: (-1.0, 1.0),
            levels_back: None,
            max_active: 200,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidConfig(msg.to_string()));
        if self.n_inputs == 0 {
            return bad("cgp needs at least one input");
        }
        if self.n_outputs == 0 {
            return bad("cgp needs at least one output");
        }
        if self.n_nodes == 0 {
            return bad("cgp needs at least one node");
        }
        if self.arity == 0 {
            return bad("cgp arity must be positive");
        }
        if self.function_set.is_empty() {
            return bad("cgp function set is empty");
        }
        if self.max_active == 0 {
            return bad("cgp max_active must be positive");
        }
        let (lo, hi) = self.weight_range;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return bad("cgp weight_range must be a finite interval lo < hi");
        }
        if self.levels_back == Some(0) {
            return bad("cgp levels_back must be positive");
        }
        Ok(())
    }

    fn address_space(&self) -> usize {
        self.n_inputs + self.n_nodes
    }

    /// Number of legal values for a connection gene of `node`.
    pub fn connection_domain(&self, node: usize) -> usize {
        match self.levels_back {
            None => self.n_inputs + node,
            Some(lb) => self.n_inputs + node.min(lb),
        }
    }

    fn sample_connection<R: Rng + ?Sized>(&self, node: usize, rng: &mut R) -> usize {
        let k = rng.gen_range(0..self.connection_domain(node));
        if k < self.n_inputs {
            k
        } else {
            // maps onto the `levels_back` window directly below the node
            let window = node - node.min(self.levels_back.unwrap_or(node));
            self.n_inputs + window + (k - self.n_inputs)
        }
    }

    fn sample_weight<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.weight_range;
        rng.gen_range(lo..hi)
    }

    fn sample_function<R: Rng + ?Sized>(&self, rng: &mut R) -> NodeFunction {
        self.function_set[rng.gen_range(0..self.function_set.len())]
    }

    fn is_legal_connection(&self, node: usize, addr: usize) -> bool {
        if addr < self.n_inputs {
            return true;
        }
        let Some(src) = addr.checked_sub(self.n_inputs) else {
            return false;
        };
        src < node && self.levels_back.is_none_or(|lb| node - src <= lb)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NodeGene {
    pub function: NodeFunction,
    pub connections: Vec<usize>,
    pub weights: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Genome {
    config: Arc<CgpConfig>,
    nodes: Vec<NodeGene>,
    outputs: Vec<usize>,
}

impl Genome {
    /// Builds a genome from explicit genes, checking every genome invariant.
    pub fn from_parts(
        config: Arc<CgpConfig>,
        nodes: Vec<NodeGene>,
        outputs: Vec<usize>,
    ) -> Result<Self> {
        config.validate()?;
        let genome = Genome {
            config,
            nodes,
            outputs,
        };
        genome.check()?;
        Ok(genome)
    }

    fn check(&self) -> Result<()> {
        let cfg = &*self.config;
        let fail = |m: String| Err(Error::Format(m));
        if self.nodes.len() != cfg.n_nodes {
            return fail(format!("expected {} nodes, got {}", cfg.n_nodes, self.nodes.len()));
        }
        if self.outputs.len() != cfg.n_outputs {
            return fail(format!(
                "expected {} output genes, got {}",
                cfg.n_outputs,
                self.outputs.len()
            ));
        }
        let (lo, hi) = cfg.weight_range;
        for (i, node) in self.nodes.iter().enumerate() {
            if node.connections.len() != cfg.arity || node.weights.len() != cfg.arity {
                return fail(format!("node {i} does not have arity {}", cfg.arity));
            }
            if !cfg.function_set.contains(&node.function) {
                return fail(format!("node {i} uses a function outside the function set"));
            }
            if let Some(&c) = node.connections.iter().find(|&&c| !cfg.is_legal_connection(i, c)) {
                return fail(format!("node {i} has illegal connection {c}"));
            }
            if node.weights.iter().any(|w| !(lo..=hi).contains(w)) {
                return fail(format!("node {i} has a weight outside [{lo}, {hi}]"));
            }
        }
        if let Some(&o) = self.outputs.iter().find(|&&o| o >= cfg.address_space()) {
            return fail(format!("output gene {o} out of range"));
        }
        Ok(())
    }

    pub fn config(&self) -> &Arc<CgpConfig> {
        &self.config
    }

    pub fn nodes(&self) -> &[NodeGene] {
        &self.nodes
    }

    pub fn output_genes(&self) -> &[usize] {
        &self.outputs
    }

    /// Total number of mutable genes.
    pub fn gene_count(&self) -> usize {
        self.nodes.len() * (1 + 2 * self.config.arity) + self.outputs.len()
    }

    fn active_mask(&self) -> Vec<bool> {
        let n_in = self.config.n_inputs;
        let mut active = vec![false; self.nodes.len()];
        for &o in &self.outputs {
            if o >= n_in {
                active[o - n_in] = true;
            }
        }
        for i in (0..self.nodes.len()).rev() {
            if active[i] {
                for &c in &self.nodes[i].connections {
                    if c >= n_in {
                        active[c - n_in] = true;
                    }
                }
            }
        }
        active
    }

    pub fn active_count(&self) -> usize {
        self.active_mask().iter().filter(|&&a| a).count()
    }

    /// Extracts the nodes reachable from the output genes.
    pub fn decode(&self) -> Phenotype {
        let cfg = &*self.config;
        let n_in = cfg.n_inputs;
        let mask = self.active_mask();
        let mut slot = vec![usize::MAX; self.nodes.len()];
        let mut active = Vec::new();
        for (i, &a) in mask.iter().enumerate() {
            if a {
                slot[i] = n_in + active.len();
                active.push(i);
            }
        }
        let resolve = |addr: usize| if addr < n_in { addr } else { slot[addr - n_in] };
        let mut functions = Vec::with_capacity(active.len());
        let mut sources = Vec::with_capacity(active.len() * cfg.arity);
        let mut weights = Vec::with_capacity(active.len() * cfg.arity);
        for &i in &active {
            let node = &self.nodes[i];
            functions.push(node.function);
            sources.extend(node.connections.iter().map(|&c| resolve(c)));
            weights.extend_from_slice(&node.weights);
        }
        Phenotype {
            n_inputs: n_in,
            arity: cfg.arity,
            active,
            functions,
            sources,
            weights,
            readouts: self.outputs.iter().map(|&o| resolve(o)).collect(),
        }
    }

    /// Writes the versioned text record used for checkpoints.
    pub fn to_text(&self) -> String {
        let cfg = &*self.config;
        let mut out = String::new();
        let _ = writeln!(out, "bnet-genome 1");
        let _ = writeln!(out, "inputs {}", cfg.n_inputs);
        let _ = writeln!(out, "outputs {}", cfg.n_outputs);
        let _ = writeln!(out, "nodes {}", cfg.n_nodes);
        let _ = writeln!(out, "arity {}", cfg.arity);
        let _ = writeln!(out, "max_active {}", cfg.max_active);
        match cfg.levels_back {
            None => {
                let _ = writeln!(out, "levels_back unrestricted");
            }
            Some(lb) => {
                let _ = writeln!(out, "levels_back {lb}");
            }
        }
        let _ = writeln!(out, "weight_range {} {}", cfg.weight_range.0, cfg.weight_range.1);
        let names: Vec<_> = cfg.function_set.iter().map(|f| f.name()).collect();
        let _ = writeln!(out, "functions {}", names.join(" "));
        let outs: Vec<_> = self.outputs.iter().map(|o| o.to_string()).collect();
        let _ = writeln!(out, "output_genes {}", outs.join(" "));
        for node in &self.nodes {
            let _ = write!(out, "node {}", node.function.name());
            for c in &node.connections {
                let _ = write!(out, " {c}");
            }
            let _ = write!(out, " |");
            for w in &node.weights {
                let _ = write!(out, " {w}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |key: &str| -> Result<Vec<String>> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Format(format!("missing `{key}` line")))?;
            let mut parts = line.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::Format(format!("expected `{key}`, found `{line}`")));
            }
            Ok(parts.map(str::to_string).collect())
        };
        fn one<T: FromStr>(v: &[String], key: &str) -> Result<T> {
            match v {
                [x] => x
                    .parse()
                    .map_err(|_| Error::Format(format!("bad value for `{key}`: {x}"))),
                _ => Err(Error::Format(format!("`{key}` expects one value"))),
            }
        }
        let version: u32 = one(&next("bnet-genome")?, "bnet-genome")?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported genome version {version}")));
        }
        let n_inputs = one(&next("inputs")?, "inputs")?;
        let n_outputs = one(&next("outputs")?, "outputs")?;
        let n_nodes = one(&next("nodes")?, "nodes")?;
        let arity = one(&next("arity")?, "arity")?;
        let max_active = one(&next("max_active")?, "max_active")?;
        let lb = next("levels_back")?;
        let levels_back = match lb.as_slice() {
            [s] if s == "unrestricted" => None,
            _ => Some(one(&lb, "levels_back")?),
        };
        let wr = next("weight_range")?;
        let weight_range = match wr.as_slice() {
            [a, b] => (
                a.parse().map_err(|_| Error::Format("bad weight_range".into()))?,
                b.parse().map_err(|_| Error::Format("bad weight_range".into()))?,
            ),
            _ => return Err(Error::Format("weight_range expects two values".into())),
        };
        let function_set = next("functions")?
            .iter()
            .map(|s| s.parse())
            .collect::<Result<Vec<NodeFunction>>>()?;
        let outputs = next("output_genes")?
            .iter()
            .map(|s| s.parse().map_err(|_| Error::Format(format!("bad output gene {s}"))))
            .collect::<Result<Vec<usize>>>()?;
        let config = Arc::new(CgpConfig {
            n_inputs,
            n_outputs,
            n_nodes,
            arity,
            function_set,
            weight_range,
            levels_back,
            max_active,
        });
        let mut nodes = Vec::with_capacity(n_nodes);
        for i in 0..n_nodes {
            let fields = next("node")?;
            if fields.len() != 2 + 2 * arity || fields[1 + arity] != "|" {
                return Err(Error::Format(format!("node {i}: malformed gene list")));
            }
            let function = fields[0].parse()?;
            let connections = fields[1..=arity]
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Format(format!("node {i}: bad connection {s}"))))
                .collect::<Result<Vec<usize>>>()?;
            let weights = fields[2 + arity..]
                .iter()
                .map(|s| s.parse().map_err(|_| Error::Format(format!("node {i}: bad weight {s}"))))
                .collect::<Result<Vec<f64>>>()?;
            nodes.push(NodeGene {
                function,
                connections,
                weights,
            });
        }
        if lines.next().is_some() {
            return Err(Error::Format("trailing data after last node".into()));
        }
        Genome::from_parts(config, nodes, outputs)
    }
}

/// Samples a fresh genome whose active node count respects `max_active`.
pub fn random_genome<R: Rng + ?Sized>(config: &Arc<CgpConfig>, rng: &mut R) -> Result<Genome> {
    config.validate()?;
    let nodes = (0..config.n_nodes)
        .map(|i| NodeGene {
            function: config.sample_function(rng),
            connections: (0..config.arity).map(|_| config.sample_connection(i, rng)).collect(),
            weights: (0..config.arity).map(|_| config.sample_weight(rng)).collect(),
        })
        .collect();
    let mut genome = Genome {
        config: Arc::clone(config),
        // terminals first, so each output is placed against a feasible genome
        outputs: vec![0; config.n_outputs],
        nodes,
    };
    for k in 0..config.n_outputs {
        let mut placed = false;
        for _ in 0..CAP_RETRIES {
            genome.outputs[k] = rng.gen_range(0..config.address_space());
            if genome.active_count() <= config.max_active {
                placed = true;
                break;
            }
        }
        if !placed {
            genome.outputs[k] = rng.gen_range(0..config.n_inputs);
        }
    }
    Ok(genome)
}

/// Point mutation: every gene is resampled from its legal domain with
/// probability `rate`. Structural changes that would push the active node
/// count past `max_active` are retried, then abandoned.
pub fn mutate<R: Rng + ?Sized>(genome: &Genome, rate: f64, rng: &mut R) -> Result<Genome> {
    if !(0.0..=1.0).contains(&rate) {
        return Err(Error::InvalidArgument(format!("mutation rate {rate} outside [0, 1]")));
    }
    let cfg = Arc::clone(&genome.config);
    let n_in = cfg.n_inputs;
    let mut child = genome.clone();
    let mut active = child.active_mask();

    for i in 0..child.nodes.len() {
        if rng.gen_bool(rate) {
            child.nodes[i].function = cfg.sample_function(rng);
        }
        for j in 0..cfg.arity {
            if !rng.gen_bool(rate) {
                continue;
            }
            let old = child.nodes[i].connections[j];
            if !active[i] {
                child.nodes[i].connections[j] = cfg.sample_connection(i, rng);
                continue;
            }
            let mut accepted = false;
            for _ in 0..CAP_RETRIES {
                let new = cfg.sample_connection(i, rng);
                child.nodes[i].connections[j] = new;
                // re-targeting onto an input or an already active node cannot grow the active set
                if new < n_in || active[new - n_in] || child.active_count() <= cfg.max_active {
                    accepted = true;
                    break;
                }
            }
            if !accepted {
                child.nodes[i].connections[j] = old;
            }
            active = child.active_mask();
        }
        for j in 0..cfg.arity {
            if rng.gen_bool(rate) {
                child.nodes[i].weights[j] = cfg.sample_weight(rng);
            }
        }
    }

    for k in 0..child.outputs.len() {
        if !rng.gen_bool(rate) {
            continue;
        }
        let old = child.outputs[k];
        let mut accepted = false;
        for _ in 0..CAP_RETRIES {
            let new = rng.gen_range(0..cfg.address_space());
            child.outputs[k] = new;
            if new < n_in || active[new - n_in] || child.active_count() <= cfg.max_active {
                accepted = true;
                break;
            }
        }
        if !accepted {
            child.outputs[k] = old;
        }
        active = child.active_mask();
    }
    Ok(child)
}

/// Probability vector over discrete actions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ActionDistribution(Vec<f64>);

impl ActionDistribution {
    pub fn softmax(logits: &[f64]) -> Self {
        let mut probs = vec![0.0; logits.len()];
        softmax_into(logits, &mut probs);
        ActionDistribution(probs)
    }

    /// Wraps an existing probability vector after checking it is a distribution.
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::Empty("action distribution"));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::NonFinite("action distribution"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("probabilities sum to {sum}")));
        }
        Ok(ActionDistribution(probs))
    }

    pub fn uniform(n: usize) -> Self {
        ActionDistribution(vec![1.0 / n as f64; n])
    }

    pub fn one_hot(n: usize, action: usize) -> Self {
        let mut p = vec![0.0; n];
        p[action] = 1.0;
        ActionDistribution(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Most probable action, ties resolved towards the lowest id.
    pub fn argmax(&self) -> usize {
        argmax(&self.0)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left a sliver of mass past the last bucket
        self.0.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

pub(crate) fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for (o, &l) in out.iter_mut().zip(logits) {
        *o = (l - max).exp();
        sum += *o;
    }
    for o in out.iter_mut() {
        *o /= sum;
    }
}

/// Decoded network: active nodes in evaluation order with resolved sources.
///
/// Value slots `0..n_inputs` hold the state, slot `n_inputs + k` holds the
/// k-th active node.
#[derive(Clone, Debug, PartialEq)]
pub struct Phenotype {
    n_inputs: usize,
    arity: usize,
    active: Vec<usize>,
    functions: Vec<NodeFunction>,
    sources: Vec<usize>,
    weights: Vec<f64>,
    readouts: Vec<usize>,
}

impl Phenotype {
    /// Genome indices of the active nodes, ascending.
    pub fn active_nodes(&self) -> &[usize] {
        &self.active
    }

    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn n_outputs(&self) -> usize {
        self.readouts.len()
    }

    fn check_state(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.n_inputs {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs,
                actual: state.len(),
            });
        }
        if state.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy input state"));
        }
        Ok(())
    }

    pub fn forward(&self, state: &[f64]) -> Result<ActionDistribution> {
        self.check_state(state)?;
        let mut values = Vec::with_capacity(self.n_inputs + self.active.len());
        values.extend_from_slice(state);
        for (k, f) in self.functions.iter().enumerate() {
            let base = k * self.arity;
            let mut acc = 0.0;
            for j in base..base + self.arity {
                acc += self.weights[j] * values[self.sources[j]];
            }
            values.push(f.apply(acc));
        }
        let logits: Vec<f64> = self.readouts.iter().map(|&r| values[r]).collect();
        Ok(ActionDistribution::softmax(&logits))
    }

    /// Evaluates row-major `states` (`n_inputs` columns) and returns the
    /// row-major action probabilities. Bit-identical to repeated [`forward`].
    ///
    /// [`forward`]: Phenotype::forward
    pub fn forward_batch(&self, states: &[f64]) -> Result<Vec<f64>> {
        let dim = self.n_inputs;
        if states.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: states.len() % dim,
            });
        }
        if states.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite("policy input state"));
        }
        let rows = states.len() / dim;
        let n_out = self.readouts.len();
        let n_slots = dim + self.active.len();
        let mut out = vec![0.0; rows * n_out];
        let mut values = vec![0.0; n_slots * BATCH_CHUNK];
        let mut acc = [0.0; BATCH_CHUNK];
        let mut logits = vec![0.0; n_out];

        for start in (0..rows).step_by(BATCH_CHUNK) {
            let len = BATCH_CHUNK.min(rows - start);
            for r in 0..len {
                let row = &states[(start + r) * dim..(start + r + 1) * dim];
                for (c, &x) in row.iter().enumerate() {
                    values[c * BATCH_CHUNK + r] = x;
                }
            }
            for (k, f) in self.functions.iter().enumerate() {
                let acc = &mut acc[..len];
                acc.fill(0.0);
                let base = k * self.arity;
                for j in base..base + self.arity {
                    let w = self.weights[j];
                    let src = &values[self.sources[j] * BATCH_CHUNK..][..len];
                    for (a, &v) in acc.iter_mut().zip(src) {
                        *a += w * v;
                    }
                }
                let dst = &mut values[(dim + k) * BATCH_CHUNK..][..len];
                for (d, &a) in dst.iter_mut().zip(acc.iter()) {
                    *d = f.apply(a);
                }
            }
            for r in 0..len {
                for (l, &slot) in logits.iter_mut().zip(&self.readouts) {
                    *l = values[slot * BATCH_CHUNK + r];
                }
                softmax_into(&logits, &mut out[(start + r) * n_out..(start + r + 1) * n_out]);
            }
        }
        Ok(out)
    }
}
