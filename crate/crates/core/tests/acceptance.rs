//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.
//!
//! Arguments after `--` select criteria by substring, e.g.
//! `cargo test --release --test acceptance -- maze`.
//!
//! The benchmark criteria train dozens of full runs and take hours on one
//! core. They run when `BNET_BENCHMARKS=1` is set or a filter names them
//! explicitly, and are listed as SKIP otherwise.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;
use std::time::Instant;

use bnet::behavior::{
    behavior_distance, behavior_loss, positive_advantage, weighted_behavior_distance, weighted_cross_entropy,
    BehaviorSample, LossSpec, Metric,
};
use bnet::cgp::{random_genome, CgpConfig, Phenotype};
use bnet::critic::{self, CriticTrainConfig, ValueNet};
use bnet::ea::{self, ConstantRate, EaConfig};
use bnet::env::{CartPole, EnvKind, Environment, EvalMode, GridMaze, MazeLayout, MazeOptions, MountainCar};
use bnet::orchestrator::CandidateKind;
use bnet::policy::Policy;
use bnet::selection::{duel, FitnessRecord, SelectionConfig};
use bnet::surrogate::{fit_distances, kernel, KrigingBounds};
use bnet::trajectory::{ExperiencePool, Trajectory, TrajectorySource, Transition};
use bnet::{BnetConfig, RunSummary, Variant};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

struct Suite {
    filters: Vec<String>,
    benchmarks: bool,
    passed: usize,
    skipped: usize,
    failed: Vec<String>,
}

impl Suite {
    fn selected(&self, name: &str) -> bool {
        self.filters.is_empty() || self.filters.iter().any(|f| name.contains(f.as_str()))
    }

    fn wants(&self, name: &str) -> bool {
        self.selected(name) && (self.benchmarks || !name.starts_with("benchmark/"))
    }

    fn run(&mut self, name: &str, f: impl FnOnce() -> (bool, String)) {
        if !self.wants(name) {
            if self.selected(name) {
                println!("SKIP {name}: long-running, set BNET_BENCHMARKS=1 or name it in a filter");
                self.skipped += 1;
            }
            return;
        }
        let t = Instant::now();
        let (ok, detail) = f();
        let tag = if ok { "PASS" } else { "FAIL" };
        println!("{tag} {name}: {detail} [{:.1}s]", t.elapsed().as_secs_f64());
        if ok {
            self.passed += 1;
        } else {
            self.failed.push(name.to_string());
        }
    }
}

fn main() {
    let filters: Vec<String> = std::env::args()
        .skip(1)
        .filter(|a| !a.starts_with('-'))
        .collect();
    let benchmarks = std::env::var("BNET_BENCHMARKS").is_ok_and(|v| v == "1")
        || filters.iter().any(|f| f.contains("benchmark"));
    let mut s = Suite {
        filters,
        benchmarks,
        passed: 0,
        skipped: 0,
        failed: Vec::new(),
    };

    s.run("properties/metric-identities", metric_identities);
    s.run("properties/kriging", kriging_properties);
    s.run("properties/critic", critic_properties);
    s.run("properties/ea", ea_properties);
    s.run("properties/selection", selection_properties);
    s.run("properties/env-golden-traces", golden_traces);
    s.run("properties/maze-brute-force", maze_brute_force);
    s.run("properties/determinism", determinism);

    let mut base: Option<Vec<RunSummary>> = None;
    let wants_base = ["cartpole-base", "best-candidate-type", "cartpole-mut"]
        .iter()
        .any(|n| s.wants(&format!("benchmark/{n}")));
    if wants_base {
        base = Some(bench(EnvKind::CartPole, Variant::Base, 0..10, None));
    }
    s.run("benchmark/cartpole-base", || cartpole_base(base.as_deref().unwrap()));
    s.run("benchmark/best-candidate-type", || best_candidate_type(base.as_deref().unwrap()));
    s.run("benchmark/cartpole-mut-slower-than-base", || mut_slower(base.as_deref().unwrap()));
    s.run("benchmark/mountaincar-base", mountaincar);
    s.run("benchmark/gridmaze-bdist-cross", gridmaze);

    println!("{} passed, {} failed, {} skipped", s.passed, s.failed.len(), s.skipped);
    if !s.failed.is_empty() {
        println!("failed: {}", s.failed.join(", "));
        std::process::exit(1);
    }
}

// ---------------------------------------------------------------- helpers

fn random_policies(n_inputs: usize, n_outputs: usize, count: usize, rng: &mut ChaCha8Rng) -> Vec<Phenotype> {
    let cfg = Arc::new(CgpConfig {
        n_nodes: 30,
        ..CgpConfig::new(n_inputs, n_outputs)
    });
    (0..count)
        .map(|_| random_genome(&cfg, rng).unwrap().decode())
        .collect()
}

fn random_states(rows: usize, dim: usize, scale: f64, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..rows * dim).map(|_| rng.gen_range(-scale..scale)).collect()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Sample whose reference rows are `target`'s distributions.
fn sample_from(target: &dyn Policy, states: &[f64], dim: usize, weights: Vec<f64>) -> BehaviorSample {
    let rows = states.len() / dim;
    let mut reference = Vec::new();
    let mut actions = Vec::new();
    for r in 0..rows {
        let p = target.act(&states[r * dim..(r + 1) * dim]).unwrap();
        actions.push(p.argmax());
        reference.extend_from_slice(p.probs());
    }
    BehaviorSample::new(dim, target.n_actions(), states.to_vec(), actions, reference, weights).unwrap()
}

fn one_hot_sample(target: &dyn Policy, states: &[f64], dim: usize, weights: Vec<f64>) -> BehaviorSample {
    let n = target.n_actions();
    let rows = states.len() / dim;
    let mut reference = vec![0.0; rows * n];
    let mut actions = Vec::new();
    for r in 0..rows {
        let a = target.act(&states[r * dim..(r + 1) * dim]).unwrap().argmax();
        reference[r * n + a] = 1.0;
        actions.push(a);
    }
    BehaviorSample::new(dim, n, states.to_vec(), actions, reference, weights).unwrap()
}

// ------------------------------------------------------------- properties

fn metric_identities() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (dim, n) = (4, 3);
    let states = random_states(16, dim, 2.0, &mut rng);
    let mut worst_axiom: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for _ in 0..1000 {
        let p = random_policies(dim, n, 3, &mut rng);
        let d = |a: &Phenotype, b: &Phenotype| behavior_distance(a, b, &states, dim).unwrap();
        let (ab, bc, ac) = (d(&p[0], &p[1]), d(&p[1], &p[2]), d(&p[0], &p[2]));
        worst_axiom = worst_axiom
            .max(d(&p[0], &p[0]).abs())
            .max((ab - d(&p[1], &p[0])).abs())
            .max(ac - ab - bc)
            .max(-ab);
        // naive oracle: per-state L1 averaged over states
        let naive: f64 = (0..16)
            .map(|r| {
                let s = &states[r * dim..(r + 1) * dim];
                l1(p[0].act(s).unwrap().probs(), p[1].act(s).unwrap().probs())
            })
            .sum::<f64>()
            / 16.0;
        worst_oracle = worst_oracle.max((naive - ab).abs());
    }

    // weighted distance with constant weights equals the plain distance,
    // and is invariant to positive rescaling of the weights
    let p = random_policies(dim, n, 2, &mut rng);
    let mut worst_weighting: f64 = 0.0;
    for w in [0.3, 1.0, 7.5] {
        let s = sample_from(&p[1], &states, dim, vec![w; 16]);
        let wbd = weighted_behavior_distance(&p[0], &s).unwrap();
        worst_weighting = worst_weighting.max((wbd - behavior_distance(&p[0], &p[1], &states, dim).unwrap()).abs());
    }
    let raw: Vec<f64> = (0..16).map(|_| rng.gen_range(-2.0..2.0)).collect();
    let a = weighted_behavior_distance(&p[0], &sample_from(&p[1], &states, dim, raw.clone())).unwrap();
    let scaled: Vec<f64> = raw.iter().map(|w| w * 3.7).collect();
    let b = weighted_behavior_distance(&p[0], &sample_from(&p[1], &states, dim, scaled)).unwrap();
    worst_weighting = worst_weighting.max((a - b).abs());

    // clipping of advantages
    let table = [(-2.0, 0.0), (-1e-300, 0.0), (0.0, 0.0), (0.5, 0.5), (3.0, 3.0)];
    let clip_ok = table.iter().all(|&(w, want)| positive_advantage(w) == want);
    let negative = one_hot_sample(&p[1], &states, dim, vec![-1.0; 16]);
    let clip_ok = clip_ok && weighted_cross_entropy(&p[0], &negative).unwrap() == 0.0;

    // loss over several references vs a naive double loop
    let refs: Vec<BehaviorSample> = (0..4)
        .map(|k| {
            let st = random_states(5 + k * 3, dim, 2.0, &mut rng);
            let rows = st.len() / dim;
            let w: Vec<f64> = (0..rows).map(|t| if t % 4 == 0 { 0.0 } else { rng.gen_range(-1.0..2.0) }).collect();
            one_hot_sample(&p[1], &st, dim, w)
        })
        .collect();
    let mut worst_additive: f64 = 0.0;
    for metric in [Metric::BehaviorDistance, Metric::WeightedBehaviorDistance, Metric::WeightedCrossEntropy] {
        let spec = LossSpec::new(metric, refs.clone()).unwrap();
        let got = behavior_loss(&p[0], &spec).unwrap();
        let mut naive = 0.0;
        for r in &refs {
            let t_len = r.len();
            let mut num = 0.0;
            let mut abs_w = 0.0;
            for t in 0..t_len {
                let q = p[0].act(&r.states()[t * dim..(t + 1) * dim]).unwrap();
                let pref = r.reference_row(t);
                let w = r.weights()[t];
                num += match metric {
                    Metric::BehaviorDistance => l1(q.probs(), pref),
                    Metric::WeightedBehaviorDistance => w * l1(q.probs(), pref),
                    Metric::WeightedCrossEntropy => {
                        let h: f64 = pref
                            .iter()
                            .zip(q.probs())
                            .map(|(pa, qa)| -pa * qa.max(1e-12).ln())
                            .sum();
                        w.max(0.0) * h
                    }
                };
                abs_w += w.abs();
            }
            naive += match metric {
                Metric::WeightedBehaviorDistance => num / abs_w,
                _ => num / t_len as f64,
            };
        }
        worst_additive = worst_additive.max((got - naive).abs() / naive.abs().max(1.0));
    }

    let ok = worst_axiom <= 1e-12 && worst_oracle <= 1e-12 && worst_weighting <= 1e-12 && clip_ok && worst_additive <= 1e-12;
    (
        ok,
        format!(
            "1000 triples: axiom slack {worst_axiom:.1e}, oracle {worst_oracle:.1e}; weighting {worst_weighting:.1e}; clipping {clip_ok}; additivity {worst_additive:.1e}"
        ),
    )
}

fn kriging_properties() -> (bool, String) {
    // kernel range
    let mut kernel_ok = true;
    for i in 0..=60 {
        let theta = 10f64.powf(-3.0 + 0.1 * i as f64);
        for d in [0.0, 1e-9, 0.01, 0.5, 1.0, 2.0, 40.0, 1e3, 1e6] {
            let k = kernel(theta, d);
            kernel_ok &= k > 0.0 && k <= 1.0;
        }
        kernel_ok &= kernel(theta, 0.0) == 1.0;
    }

    // interpolation at the training behaviors, checked against an
    // independent solve with the fitted hyperparameters
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 15;
    let pts: Vec<[f64; 3]> = (0..n).map(|_| [rng.gen(), rng.gen(), rng.gen()]).collect();
    let y: Vec<f64> = pts.iter().map(|p| (3.0 * p[0]).sin() + p[1] * p[1] - 0.5 * p[2]).collect();
    let d = DMatrix::from_fn(n, n, |i, j| l1(&pts[i], &pts[j]) / 3.0);
    let fit = fit_distances(&d, &y, &KrigingBounds::default()).unwrap();
    let r = d.map(|x| kernel(fit.theta, x));
    let psi = &r + DMatrix::identity(n, n) * fit.nugget;
    let resid = DVector::from_iterator(n, y.iter().map(|v| v - fit.mean));
    let alpha = psi.lu().solve(&resid).unwrap();
    let tol = fit.nugget * alpha.amax() * (1.0 + 1e-6) + 1e-12;
    let mut worst_interp: f64 = 0.0;
    let mut worst_oracle: f64 = 0.0;
    for i in 0..n {
        let row: Vec<f64> = (0..n).map(|j| d[(i, j)]).collect();
        let pred = fit.predict_from_distances(&row);
        let oracle = fit.mean + (r.row(i) * &alpha)[(0, 0)];
        worst_oracle = worst_oracle.max((pred - oracle).abs());
        worst_interp = worst_interp.max((pred - y[i]).abs());
    }
    let interp_ok = worst_interp <= tol && worst_oracle <= 1e-9;

    // a distance matrix no kernel correlation can represent forces the
    // nugget above its bounds before the factorization succeeds
    let bad = DMatrix::from_row_slice(3, 3, &[0.0, 0.0, 1e6, 0.0, 0.0, 0.0, 1e6, 0.0, 0.0]);
    let esc = fit_distances(&bad, &[1.0, 2.0, 3.0], &KrigingBounds::default());
    let esc_ok = matches!(&esc, Ok(f) if f.nugget > KrigingBounds::default().nugget.1 && f.log_likelihood.is_finite());

    (
        kernel_ok && interp_ok && esc_ok,
        format!(
            "kernel in (0,1]: {kernel_ok}; interpolation error {worst_interp:.2e} <= {tol:.2e} (nugget {:.1e}), oracle {worst_oracle:.1e}; escalated nugget {:?}",
            fit.nugget,
            esc.map(|f| f.nugget).ok()
        ),
    )
}

fn regression_pool(n: usize, rng: &mut ChaCha8Rng, target: impl Fn(&[f64]) -> f64) -> ExperiencePool {
    let transitions: Vec<Transition> = (0..n)
        .map(|_| {
            let state = random_states(1, 3, 1.0, rng);
            Transition {
                reward: target(&state),
                state,
                action: 0,
                action_probabilities: vec![1.0],
            }
        })
        .collect();
    let mut t = Trajectory {
        fitness: transitions.iter().map(|t| t.reward).sum(),
        score: 0.0,
        transitions,
        returns: Vec::new(),
        source: TrajectorySource {
            candidate: 0,
            mode: EvalMode::Deterministic,
        },
    };
    // with gamma = 0 every return is the immediate reward
    t.compute_returns(0.0).unwrap();
    let mut pool = ExperiencePool::new(n).unwrap();
    pool.append(&t).unwrap();
    pool
}

fn critic_properties() -> (bool, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let mut net = ValueNet::new(3, &[6, 4], &mut rng);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let state = random_states(1, 3, 1.0, &mut rng);
        let i = rng.gen_range(0..net.params().len());
        let g = net.value_gradient(&state).unwrap()[i];
        let orig = net.params()[i];
        net.params_mut()[i] = orig + h;
        let up = net.value(&state).unwrap();
        net.params_mut()[i] = orig - h;
        let down = net.value(&state).unwrap();
        net.params_mut()[i] = orig;
        let fd = (up - down) / (2.0 * h);
        worst = worst.max((g - fd).abs() / g.abs().max(fd.abs()).max(1e-6));
    }

    let pool = regression_pool(500, &mut rng, |s| 0.5 * s[0] - 0.3 * s[1] + 0.2 * s[2] + 0.1);
    let mut reg = ValueNet::new(3, &[16], &mut rng);
    let cfg = CriticTrainConfig {
        steps: 2000,
        ..CriticTrainConfig::default()
    };
    let mse = critic::fit(&mut reg, &pool, &cfg, &mut rng).unwrap();
    (
        worst <= 1e-4 && mse < 1e-2,
        format!("finite differences max rel err {worst:.1e} over 20 probes; linear regression MSE {mse:.2e}"),
    )
}

fn ea_properties() -> (bool, String) {
    let cfg = Arc::new(CgpConfig {
        n_nodes: 40,
        ..CgpConfig::new(4, 2)
    });
    let mut monotone = true;
    let mut improved = 0;
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let target = random_genome(&cfg, &mut rng).unwrap().decode();
        let states = random_states(64, 4, 2.0, &mut rng);
        let spec = LossSpec::new(
            Metric::BehaviorDistance,
            vec![one_hot_sample(&target, &states, 4, vec![1.0; 64])],
        )
        .unwrap();
        let ea_cfg = EaConfig::new(5, 2, 150, 0.05);
        let r = ea::run(&ea_cfg, &cfg, |g| behavior_loss(&g.decode(), &spec), &mut ConstantRate, &mut rng).unwrap();
        monotone &= r.trace.windows(2).all(|w| w[1] <= w[0]);
        improved += (r.trace.last().unwrap() < &r.trace[0]) as usize;
    }
    (
        monotone && improved >= 19,
        format!("elitism monotone in all runs: {monotone}; self-imitation improved in {improved}/20 runs (need >= 19)"),
    )
}

fn selection_properties() -> (bool, String) {
    // strict-mean promotion
    let cfg3 = SelectionConfig::new(3).unwrap();
    let mut champ = FitnessRecord::from_samples(0, vec![10.0, 10.0, 10.0]).unwrap();
    let mut tie = FitnessRecord::new(1, 12.0);
    let tied = duel(&mut champ, &mut tie, &cfg3, |_| Ok(9.0)).unwrap();
    let mut better = FitnessRecord::new(2, 12.0);
    let won = duel(&mut champ, &mut better, &cfg3, |_| Ok(9.5)).unwrap();
    let strict_ok = !tied.promoted && tied.challenger_mean == 10.0 && won.promoted;

    // a challenger one standard deviation worse than the champion
    let rejection_rate = |r: usize, seed: u64| {
        let cfg = SelectionConfig::new(r).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let champ_dist = Normal::new(0.0, 1.0).unwrap();
        let chal_dist = Normal::new(-1.0, 1.0).unwrap();
        let mut rejected = 0;
        for _ in 0..10_000 {
            let mut champ = FitnessRecord::new(0, champ_dist.sample(&mut rng));
            let mut chal = FitnessRecord::new(1, chal_dist.sample(&mut rng));
            if chal.first() <= champ.mean() {
                rejected += 1;
                continue;
            }
            let out = duel(&mut champ, &mut chal, &cfg, |id| {
                Ok(if id == 0 { champ_dist.sample(&mut rng) } else { chal_dist.sample(&mut rng) })
            })
            .unwrap();
            rejected += (!out.promoted) as usize;
        }
        rejected as f64 / 10_000.0
    };
    let r1 = rejection_rate(1, 77);
    let r5 = rejection_rate(5, 77);
    (
        strict_ok && r5 > r1,
        format!("strict promotion: {strict_ok}; worse challenger rejected {:.1}% with r=5 vs {:.1}% with r=1", 100.0 * r5, 100.0 * r1),
    )
}

struct GoldenStep {
    action: usize,
    state: Vec<f64>,
    reward: f64,
    terminal: bool,
    truncated: bool,
}

fn read_golden(text: &str) -> Vec<(Vec<f64>, Vec<GoldenStep>)> {
    let mut episodes: Vec<(Vec<f64>, Vec<GoldenStep>)> = Vec::new();
    for line in text.lines().filter(|l| !l.trim().is_empty()) {
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts[0] == "reset" {
            episodes.push((parts[1..].iter().map(|v| v.parse().unwrap()).collect(), Vec::new()));
            continue;
        }
        let n = parts.len();
        episodes.last_mut().unwrap().1.push(GoldenStep {
            action: parts[0].parse().unwrap(),
            state: parts[1..n - 3].iter().map(|v| v.parse().unwrap()).collect(),
            reward: parts[n - 3].parse().unwrap(),
            terminal: parts[n - 2] == "1",
            truncated: parts[n - 1] == "1",
        });
    }
    episodes
}

fn golden_traces() -> (bool, String) {
    let mut worst: f64 = 0.0;
    let mut flags_ok = true;
    let mut steps = 0;
    let mut check = |env: &mut dyn Environment, golden: &[GoldenStep]| {
        for g in golden {
            let r = env.step(g.action).unwrap();
            worst = worst.max(l1(&r.next_state, &g.state));
            flags_ok &= r.reward == g.reward && r.terminal == g.terminal && r.truncated == g.truncated;
            steps += 1;
        }
    };
    for file in [
        include_str!("data/cartpole_golden.txt"),
        include_str!("data/cartpole_balance_golden.txt"),
    ] {
        for (start, golden) in read_golden(file) {
            let mut env = CartPole::new();
            env.reset_to([start[0], start[1], start[2], start[3]]);
            check(&mut env, &golden);
        }
    }
    for (start, golden) in read_golden(include_str!("data/mountaincar_golden.txt")) {
        let mut env = MountainCar::new();
        env.reset_to(start[0], start[1]);
        check(&mut env, &golden);
    }
    (
        worst <= 1e-9 && flags_ok,
        format!("{steps} reference steps: max state deviation {worst:.1e}, rewards and end flags match: {flags_ok}"),
    )
}

/// Independent model of the tilting maze used as the brute-force oracle.
#[derive(Clone)]
struct MazeOracle {
    grid: Vec<Vec<char>>,
    goal: (usize, usize),
    dist: HashMap<(usize, usize), usize>,
    max_steps: usize,
    floor: f64,
    pos: (usize, usize),
    visited: Vec<(usize, usize)>,
    steps: usize,
    total: f64,
    best: usize,
    score: usize,
}

impl MazeOracle {
    fn new(text: &str, max_steps: usize, floor: f64) -> Self {
        let grid: Vec<Vec<char>> = text.lines().map(|l| l.chars().collect()).collect();
        let find = |c: char| {
            (0..grid.len())
                .flat_map(|r| (0..grid[r].len()).map(move |k| (r, k)))
                .find(|&(r, k)| grid[r][k] == c)
                .unwrap()
        };
        let (start, goal) = (find('S'), find('G'));
        let mut m = MazeOracle {
            grid,
            goal,
            dist: HashMap::new(),
            max_steps,
            floor,
            pos: start,
            visited: vec![start],
            steps: 0,
            total: 0.0,
            best: 0,
            score: 0,
        };
        // breadth-first search over forward moves from every cell
        let cells: Vec<(usize, usize)> = (0..m.grid.len())
            .flat_map(|r| (0..m.grid[r].len()).map(move |k| (r, k)))
            .filter(|&(r, k)| m.grid[r][k] != '#')
            .collect();
        for &c in &cells {
            let mut seen = HashMap::from([(c, 0usize)]);
            let mut q = VecDeque::from([c]);
            while let Some(x) = q.pop_front() {
                if x == goal {
                    m.dist.insert(c, seen[&x]);
                    break;
                }
                for a in 0..4 {
                    let y = m.roll(x, a);
                    if !seen.contains_key(&y) {
                        seen.insert(y, seen[&x] + 1);
                        q.push_back(y);
                    }
                }
            }
        }
        m.best = m.dist[&start];
        m
    }

    fn roll(&self, (mut r, mut c): (usize, usize), action: usize) -> (usize, usize) {
        let (dr, dc): (isize, isize) = [(-1, 0), (0, 1), (1, 0), (0, -1)][action];
        loop {
            let (nr, nc) = (r as isize + dr, c as isize + dc);
            if nr < 0 || nc < 0 || nr as usize >= self.grid.len() || nc as usize >= self.grid[0].len() {
                return (r, c);
            }
            if self.grid[nr as usize][nc as usize] == '#' {
                return (r, c);
            }
            (r, c) = (nr as usize, nc as usize);
        }
    }

    fn step(&mut self, action: usize) -> (f64, bool, bool) {
        let to = self.roll(self.pos, action);
        let reward = if to == self.pos {
            -0.75
        } else if to == self.goal {
            10.0
        } else if self.visited.contains(&to) {
            -0.25
        } else {
            0.1
        };
        if !self.visited.contains(&to) {
            self.visited.push(to);
        }
        self.pos = to;
        self.steps += 1;
        self.total += reward;
        if let Some(&d) = self.dist.get(&to) {
            if d < self.best {
                self.best = d;
                self.score += 1;
            }
        }
        let terminal = to == self.goal || self.total <= self.floor + 1e-9;
        (reward, terminal, !terminal && self.steps >= self.max_steps)
    }
}

fn maze_brute_force() -> (bool, String) {
    let layouts = ["S..\n.#.\n..G", "S.#\n...\n#.G", "S..\n...\n..G", ".S.\n#.#\n.G.", "..S\n.#.\nG.."];
    let options = [(75, -12.5), (6, -12.5), (75, -2.0)];
    let mut compared = 0usize;
    let mut mismatches = 0usize;
    let mut seen_rewards = [false; 4];
    let mut seen_ends = [false; 3];

    fn walk(
        env: &GridMaze,
        oracle: &MazeOracle,
        depth: usize,
        compared: &mut usize,
        mismatches: &mut usize,
        seen_rewards: &mut [bool; 4],
        seen_ends: &mut [bool; 3],
    ) {
        for a in 0..4 {
            let mut e = env.clone();
            let mut o = oracle.clone();
            let r = e.step(a).unwrap();
            let (reward, terminal, truncated) = o.step(a);
            let width = o.grid[0].len();
            let cell = r.next_state.iter().position(|&x| x == 1.0).unwrap();
            *compared += 1;
            if r.reward != reward
                || r.terminal != terminal
                || r.truncated != truncated
                || cell != o.pos.0 * width + o.pos.1
                || e.episode_score() != o.score as f64
            {
                *mismatches += 1;
            }
            let k = [0.1, -0.25, -0.75, 10.0].iter().position(|&v| v == reward).unwrap();
            seen_rewards[k] = true;
            if terminal && o.pos == o.goal {
                seen_ends[0] = true;
            } else if terminal {
                seen_ends[1] = true;
            } else if truncated {
                seen_ends[2] = true;
            }
            if !(r.terminal || r.truncated) && depth > 1 {
                walk(&e, &o, depth - 1, compared, mismatches, seen_rewards, seen_ends);
            }
        }
    }

    for layout in layouts {
        for &(max_steps, floor) in &options {
            let opts = MazeOptions {
                max_steps,
                min_cumulative_reward: floor,
                ..MazeOptions::default()
            };
            let mut env = GridMaze::new(MazeLayout::parse(layout).unwrap(), opts).unwrap();
            env.reset(&mut ChaCha8Rng::seed_from_u64(0));
            let oracle = MazeOracle::new(layout, max_steps, floor);
            walk(&env, &oracle, 8, &mut compared, &mut mismatches, &mut seen_rewards, &mut seen_ends);
        }
    }

    // long random episodes reach the default step and reward limits
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for i in 0..2000 {
        let layout = layouts[i % layouts.len()];
        let mut env = GridMaze::new(MazeLayout::parse(layout).unwrap(), MazeOptions::default()).unwrap();
        env.reset(&mut ChaCha8Rng::seed_from_u64(0));
        let mut o = MazeOracle::new(layout, 75, -12.5);
        // avoid the action that leads towards the goal half of the time
        let banned = rng.gen_range(0..4);
        loop {
            let a = loop {
                let a = rng.gen_range(0..4);
                if a != banned || rng.gen_bool(0.05) {
                    break a;
                }
            };
            let r = env.step(a).unwrap();
            let (reward, terminal, truncated) = o.step(a);
            compared += 1;
            if r.reward != reward || r.terminal != terminal || r.truncated != truncated {
                mismatches += 1;
            }
            if terminal && o.pos != o.goal {
                seen_ends[1] = true;
            }
            if truncated {
                seen_ends[2] = true;
            }
            if r.terminal || r.truncated {
                break;
            }
        }
    }
    let covered = seen_rewards.iter().all(|&s| s) && seen_ends.iter().all(|&s| s);
    (
        mismatches == 0 && covered,
        format!("{compared} steps compared with an independent model, {mismatches} mismatches; all rewards and end conditions exercised: {covered}"),
    )
}

fn tiny(env: EnvKind, variant: Variant, seed: u64) -> BnetConfig {
    let mut cfg = BnetConfig::new(env, variant).with_seed(seed);
    cfg.behavior_search.iterations = 10;
    cfg.surrogate_search.iterations = 10;
    cfg.critic.steps = 10;
    cfg.cgp.n_nodes = 60;
    cfg.max_training_steps = 3000;
    cfg
}

fn determinism() -> (bool, String) {
    let mut all = true;
    for (env, variant) in [
        (EnvKind::CartPole, Variant::Base),
        (EnvKind::MountainCar, Variant::Base),
        (EnvKind::GridMaze, Variant::BdistCross),
    ] {
        let trace = || {
            let s = bnet::run(tiny(env, variant, 3)).unwrap();
            serde_json::to_string(&(&s.reports, &s.selections)).unwrap()
                + &s.champion.map(|g| g.to_text()).unwrap_or_default()
        };
        all &= trace() == trace();
    }
    (all, format!("three environments rerun to identical traces: {all}"))
}

// ------------------------------------------------------------- benchmarks

fn bench(env: EnvKind, variant: Variant, seeds: std::ops::Range<u64>, budget: Option<u64>) -> Vec<RunSummary> {
    seeds
        .map(|seed| {
            let mut cfg = BnetConfig::new(env, variant).with_seed(seed);
            if let Some(b) = budget {
                cfg.max_training_steps = b;
            }
            let t = Instant::now();
            let s = bnet::run(cfg).unwrap();
            println!(
                "     {env} {variant} seed {seed}: {} after {} iterations ({:.0}s)",
                s.steps_to_solve.map_or("unsolved".to_string(), |v| format!("solved at {v} steps")),
                s.iterations,
                t.elapsed().as_secs_f64()
            );
            s
        })
        .collect()
}

/// Median of steps-to-solve, unsolved runs counted at the budget.
fn censored_median(runs: &[RunSummary], budget: u64) -> f64 {
    let mut v: Vec<f64> = runs.iter().map(|s| s.steps_to_solve.unwrap_or(budget) as f64).collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn cartpole_base(runs: &[RunSummary]) -> (bool, String) {
    let solved = runs.iter().filter(|s| s.solved).count();
    let median = censored_median(runs, 50_000);
    (
        solved >= 8 && median <= 20_000.0,
        format!("solved {solved}/10 within 50000 steps (need >= 8); median steps-to-solve {median:.0} (need <= 20000)"),
    )
}

fn best_candidate_type(runs: &[RunSummary]) -> (bool, String) {
    let mut counts: HashMap<CandidateKind, usize> = HashMap::new();
    for r in runs.iter().flat_map(|s| &s.reports).filter(|r| r.iteration > 0) {
        *counts.entry(r.best_kind).or_default() += 1;
    }
    let total: usize = counts.values().sum();
    let fresh = total - counts.get(&CandidateKind::Champion).copied().unwrap_or(0);
    let fraction = fresh as f64 / total.max(1) as f64;
    let surrogate = counts.get(&CandidateKind::Surrogate).copied().unwrap_or(0);
    let top_other = counts
        .iter()
        .filter(|(k, _)| **k != CandidateKind::Surrogate)
        .map(|(_, &c)| c)
        .max()
        .unwrap_or(0);
    let mut listed: Vec<_> = counts.iter().map(|(k, c)| format!("{k}={c}")).collect();
    listed.sort();
    (
        fraction >= 0.5 && surrogate < top_other,
        format!(
            "fresh candidate best in {:.0}% of {total} iterations (need >= 50%); surrogate not the most frequent: {} [{}]",
            100.0 * fraction,
            surrogate < top_other,
            listed.join(" ")
        ),
    )
}

fn mut_slower(base: &[RunSummary]) -> (bool, String) {
    let base_median = censored_median(base, 50_000);
    // A run capped at the Base median follows the uncapped run step for step,
    // so "unsolved at that budget" means its steps-to-solve exceed it. With
    // six of ten above the Base median, both middle order statistics are.
    let capped = bench(EnvKind::CartPole, Variant::Mut, 0..10, Some(base_median.floor() as u64));
    let above = capped.iter().filter(|s| !s.solved).count();
    if above >= 6 {
        return (
            true,
            format!("{above}/10 Mut runs still unsolved at the Base median {base_median:.0}, so the Mut median is larger"),
        );
    }
    let full = bench(EnvKind::CartPole, Variant::Mut, 0..10, None);
    let mut_median = censored_median(&full, 50_000);
    (
        mut_median > base_median,
        format!("Mut median {mut_median:.0} vs Base median {base_median:.0}"),
    )
}

fn mountaincar() -> (bool, String) {
    let runs = bench(EnvKind::MountainCar, Variant::Base, 0..10, None);
    let solved = runs.iter().filter(|s| s.solved).count();
    (
        solved >= 6,
        format!(
            "solved {solved}/10 within 150000 steps (need >= 6); median {:.0}",
            censored_median(&runs, 150_000)
        ),
    )
}

fn gridmaze() -> (bool, String) {
    let runs = bench(EnvKind::GridMaze, Variant::BdistCross, 0..5, None);
    let solved = runs.iter().filter(|s| s.solved).count();
    (
        solved >= 4,
        format!(
            "reached fitness >= 23 within 5000 steps in {solved}/5 runs (need >= 4); median {:.0}",
            censored_median(&runs, 5_000)
        ),
    )
}
