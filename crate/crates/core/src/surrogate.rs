//! Ordinary Kriging over behavior distances between evaluated candidates.
//!
//! The correlation between two policies is `exp(-theta * d)` where `d` is
//! their mean behavior distance. Hyperparameters are fitted by maximising
//! the concentrated log-likelihood with a log-grid scan followed by
//! golden-section refinement. The predicted mean serves as infill criterion.

use std::collections::VecDeque;
use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::behavior::mean_row_distance;
use crate::cgp::{CgpConfig, Genome, Phenotype};
use crate::ea::{self, ConstantRate, EaConfig};
use crate::error::{Error, Result};
use crate::policy::Policy;

/// Largest nugget tried when escalating after a failed factorization.
pub const MAX_NUGGET: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KrigingBounds {
    pub theta: (f64, f64),
    pub nugget: (f64, f64),
    /// Points per axis of the initial log-grid scan.
    pub grid: usize,
}

impl Default for KrigingBounds {
    fn default() -> Self {
        KrigingBounds {
            theta: (1e-3, 1e3),
            nugget: (1e-8, 1e-1),
            grid: 32,
        }
    }
}

impl KrigingBounds {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo > 0.0 && hi >= lo && hi.is_finite();
        if !ok(self.theta) || !ok(self.nugget) || self.grid < 2 {
            return Err(Error::InvalidConfig(format!("bad Kriging bounds {self:?}")));
        }
        Ok(())
    }
}

/// `exp(-theta * d)`, floored so it never underflows to zero.
pub fn kernel(theta: f64, d: f64) -> f64 {
    (-theta * d).exp().max(f64::MIN_POSITIVE)
}

fn correlation(d: &DMatrix<f64>, theta: f64, nugget: f64) -> DMatrix<f64> {
    let n = d.nrows();
    DMatrix::from_fn(n, n, |i, j| kernel(theta, d[(i, j)]) + if i == j { nugget } else { 0.0 })
}

struct Solved {
    chol: Cholesky<f64, Dyn>,
    mean: f64,
    variance: f64,
    log_likelihood: f64,
}

fn solve(d: &DMatrix<f64>, y: &DVector<f64>, theta: f64, nugget: f64) -> Option<Solved> {
    let n = y.len();
    let chol = correlation(d, theta, nugget).cholesky()?;
    let ones = DVector::from_element(n, 1.0);
    let pi_one = chol.solve(&ones);
    let pi_y = chol.solve(y);
    let mean = ones.dot(&pi_y) / ones.dot(&pi_one);
    let r = y - DVector::from_element(n, mean);
    let variance = (r.dot(&chol.solve(&r)) / n as f64).max(f64::MIN_POSITIVE);
    let log_det = 2.0 * chol.l_dirty().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_likelihood = -0.5 * n as f64 * variance.ln() - 0.5 * log_det;
    log_likelihood.is_finite().then_some(Solved {
        chol,
        mean,
        variance,
        log_likelihood,
    })
}

/// Concentrated log-likelihood `-(n/2) ln s2 - (1/2) ln |Psi|`, or `None`
/// when the correlation matrix does not factorize.
pub fn concentrated_log_likelihood(d: &DMatrix<f64>, y: &[f64], theta: f64, nugget: f64) -> Option<f64> {
    solve(d, &DVector::from_column_slice(y), theta, nugget).map(|s| s.log_likelihood)
}

/// Fitted Kriging hyperparameters and the factorized system.
#[derive(Clone, Debug)]
pub struct KrigingFit {
    pub theta: f64,
    /// Nugget after any escalation.
    pub nugget: f64,
    pub mean: f64,
    pub variance: f64,
    pub log_likelihood: f64,
    /// True when all responses were equal and a constant model was used.
    pub constant: bool,
    alpha: DVector<f64>,
}

impl KrigingFit {
    /// Predicted mean from a candidate's kernel values to the training points.
    pub fn predict(&self, kernel_row: &[f64]) -> f64 {
        self.mean + kernel_row.iter().zip(self.alpha.iter()).map(|(k, a)| k * a).sum::<f64>()
    }

    pub fn predict_from_distances(&self, distances: &[f64]) -> f64 {
        let row: Vec<f64> = distances.iter().map(|&d| kernel(self.theta, d)).collect();
        self.predict(&row)
    }

    /// `Psi^-1 (y - mean)`; the training-point prediction error is
    /// `nugget * alpha_i`.
    pub fn weights(&self) -> &[f64] {
        self.alpha.as_slice()
    }
}

fn golden_max(f: &dyn Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> (f64, f64) {
    const R: f64 = 0.618_033_988_749_895;
    let mut c = b - R * (b - a);
    let mut d = a + R * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - R * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + R * (b - a);
            fd = f(d);
        }
    }
    if fc >= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Fits ordinary Kriging to a precomputed distance matrix.
pub fn fit_distances(d: &DMatrix<f64>, y: &[f64], bounds: &KrigingBounds) -> Result<KrigingFit> {
    bounds.validate()?;
    let n = y.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("Kriging needs at least 3 points, got {n}")));
    }
    if d.nrows() != n || d.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: d.nrows(),
        });
    }
    if y.iter().chain(d.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("Kriging training data"));
    }
    let yv = DVector::from_column_slice(y);
    let (lo, hi) = y.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    if hi - lo <= 1e-12 * lo.abs().max(1.0) {
        return Ok(KrigingFit {
            theta: 1.0,
            nugget: bounds.nugget.0,
            mean: y[0],
            variance: 0.0,
            log_likelihood: f64::INFINITY,
            constant: true,
            alpha: DVector::zeros(n),
        });
    }

    let (lt0, lt1) = (bounds.theta.0.ln(), bounds.theta.1.ln());
    let (le0, le1) = (bounds.nugget.0.ln(), bounds.nugget.1.ln());
    let g = bounds.grid;
    let at = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (g - 1) as f64;
    let ll = |lt: f64, le: f64| {
        solve(d, &yv, lt.exp(), le.exp()).map_or(f64::NEG_INFINITY, |s| s.log_likelihood)
    };

    let mut scan = Vec::with_capacity(g * g);
    for i in 0..g {
        for j in 0..g {
            let (lt, le) = (at(lt0, lt1, i), at(le0, le1, j));
            scan.push((ll(lt, le), lt, le));
        }
    }
    scan.sort_by(|a, b| b.0.total_cmp(&a.0));

    let mut best = scan[0];
    if best.0.is_finite() {
        let (st, se) = ((lt1 - lt0) / (g - 1) as f64, (le1 - le0) / (g - 1) as f64);
        for &(v0, mut lt, mut le) in scan.iter().take(3) {
            if !v0.is_finite() {
                break;
            }
            let mut v = v0;
            for _ in 0..3 {
                let (t, vt) = golden_max(&|x| ll(x, le), (lt - st).max(lt0), (lt + st).min(lt1), 40);
                if vt > v {
                    lt = t;
                    v = vt;
                }
                let (e, ve) = golden_max(&|x| ll(lt, x), (le - se).max(le0), (le + se).min(le1), 40);
                if ve > v {
                    le = e;
                    v = ve;
                }
            }
            if v > best.0 {
                best = (v, lt, le);
            }
        }
        let s = solve(d, &yv, best.1.exp(), best.2.exp())
            .ok_or(Error::Factorization { nugget: best.2.exp() })?;
        return Ok(finish(s, &yv, best.1.exp(), best.2.exp()));
    }

    // nothing factorized inside the bounds: escalate the nugget
    let mut found: Option<(Solved, f64, f64)> = None;
    for i in 0..g {
        let theta = at(lt0, lt1, i).exp();
        let mut nugget = bounds.nugget.1 * 10.0;
        while nugget <= MAX_NUGGET * (1.0 + 1e-12) {
            if let Some(s) = solve(d, &yv, theta, nugget) {
                if found.as_ref().is_none_or(|(f, _, _)| s.log_likelihood > f.log_likelihood) {
                    found = Some((s, theta, nugget));
                }
                break;
            }
            nugget *= 10.0;
        }
    }
    let (s, theta, nugget) = found.ok_or(Error::Factorization { nugget: MAX_NUGGET })?;
    log::warn!("Kriging correlation matrix needed nugget {nugget:e} to factorize");
    Ok(finish(s, &yv, theta, nugget))
}

fn finish(s: Solved, y: &DVector<f64>, theta: f64, nugget: f64) -> KrigingFit {
    let r = y - DVector::from_element(y.len(), s.mean);
    KrigingFit {
        theta,
        nugget,
        mean: s.mean,
        variance: s.variance,
        log_likelihood: s.log_likelihood,
        constant: false,
        alpha: s.chol.solve(&r),
    }
}

/// An evaluated candidate with a subset of the states it visited.
#[derive(Clone, Debug)]
pub struct CandidateRecord {
    pub candidate: u64,
    pub genome: Genome,
    states: Vec<f64>,
    pub mean_fitness: f64,
}

impl CandidateRecord {
    pub fn new(candidate: u64, genome: Genome, states: Vec<f64>, mean_fitness: f64) -> Result<Self> {
        let dim = genome.config().n_inputs;
        if states.is_empty() {
            return Err(Error::Empty("candidate record states"));
        }
        if states.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: dim,
                actual: states.len() % dim,
            });
        }
        Ok(CandidateRecord {
            candidate,
            genome,
            states,
            mean_fitness,
        })
    }

    pub fn states(&self) -> &[f64] {
        &self.states
    }

    pub fn dim(&self) -> usize {
        self.genome.config().n_inputs
    }
}

/// Evenly spaced subset of at most `max` rows.
pub fn subsample_rows(states: &[f64], dim: usize, max: usize) -> Vec<f64> {
    let rows = states.len() / dim;
    if rows <= max {
        return states.to_vec();
    }
    let mut out = Vec::with_capacity(max * dim);
    for k in 0..max {
        let r = k * rows / max;
        out.extend_from_slice(&states[r * dim..(r + 1) * dim]);
    }
    out
}

/// Most recent evaluated candidates, keyed by candidate id.
#[derive(Clone, Debug)]
pub struct SurrogateArchive {
    capacity: usize,
    max_states: usize,
    records: VecDeque<CandidateRecord>,
}

impl SurrogateArchive {
    pub fn new(capacity: usize, max_states: usize) -> Result<Self> {
        if capacity == 0 || max_states == 0 {
            return Err(Error::InvalidConfig("surrogate archive needs capacity and states >= 1".into()));
        }
        Ok(SurrogateArchive {
            capacity,
            max_states,
            records: VecDeque::new(),
        })
    }

    /// Inserts or refreshes a candidate. Existing records keep their states
    /// and take the new mean fitness; either way the record becomes the most
    /// recent one.
    pub fn update(&mut self, candidate: u64, genome: &Genome, states: &[f64], mean_fitness: f64) -> Result<()> {
        if let Some(pos) = self.records.iter().position(|r| r.candidate == candidate) {
            let mut rec = self.records.remove(pos).expect("position is valid");
            rec.mean_fitness = mean_fitness;
            self.records.push_back(rec);
            return Ok(());
        }
        let dim = genome.config().n_inputs;
        let rec = CandidateRecord::new(
            candidate,
            genome.clone(),
            subsample_rows(states, dim, self.max_states),
            mean_fitness,
        )?;
        self.records.push_back(rec);
        while self.records.len() > self.capacity {
            self.records.pop_front();
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> Vec<CandidateRecord> {
        self.records.iter().cloned().collect()
    }
}

/// Behavior distance between two records on the concatenation of their
/// state sets.
pub fn pairwise_distance(a: &CandidateRecord, b: &CandidateRecord) -> Result<f64> {
    let (pa, pb) = (a.genome.decode(), b.genome.decode());
    pair_distance(&pa, &pb, a, b)
}

fn pair_distance(pa: &Phenotype, pb: &Phenotype, a: &CandidateRecord, b: &CandidateRecord) -> Result<f64> {
    if a.dim() != b.dim() || pa.n_outputs() != pb.n_outputs() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            actual: b.dim(),
        });
    }
    let mut states = Vec::with_capacity(a.states.len() + b.states.len());
    states.extend_from_slice(&a.states);
    states.extend_from_slice(&b.states);
    let qa = pa.forward_batch(&states)?;
    let qb = pb.forward_batch(&states)?;
    Ok(mean_row_distance(&qa, &qb, pa.n_outputs()))
}

/// Kriging model over candidate records, responses are mean fitnesses.
#[derive(Clone, Debug)]
pub struct KrigingModel {
    records: Vec<CandidateRecord>,
    distances: DMatrix<f64>,
    fit: KrigingFit,
    /// All records' states stacked, and each record's row range within.
    stacked: Vec<f64>,
    ranges: Vec<(usize, usize)>,
    /// Each record's own outputs on its own states.
    outputs: Vec<Vec<f64>>,
    n_actions: usize,
}

impl KrigingModel {
    pub fn fit(records: Vec<CandidateRecord>, bounds: &KrigingBounds) -> Result<Self> {
        let n = records.len();
        if n < 3 {
            return Err(Error::InvalidArgument(format!("Kriging needs at least 3 records, got {n}")));
        }
        let phenotypes: Vec<Phenotype> = records.iter().map(|r| r.genome.decode()).collect();
        let mut distances = DMatrix::zeros(n, n);
        for i in 0..n {
            for j in i + 1..n {
                let d = pair_distance(&phenotypes[i], &phenotypes[j], &records[i], &records[j])?;
                distances[(i, j)] = d;
                distances[(j, i)] = d;
            }
        }
        let y: Vec<f64> = records.iter().map(|r| r.mean_fitness).collect();
        let fit = fit_distances(&distances, &y, bounds)?;

        let mut stacked = Vec::new();
        let mut ranges = Vec::with_capacity(n);
        let mut outputs = Vec::with_capacity(n);
        for (r, p) in records.iter().zip(&phenotypes) {
            let start = stacked.len() / r.dim();
            stacked.extend_from_slice(&r.states);
            ranges.push((start, stacked.len() / r.dim()));
            outputs.push(p.forward_batch(&r.states)?);
        }
        Ok(KrigingModel {
            n_actions: phenotypes[0].n_outputs(),
            records,
            distances,
            fit,
            stacked,
            ranges,
            outputs,
        })
    }

    pub fn records(&self) -> &[CandidateRecord] {
        &self.records
    }

    pub fn distances(&self) -> &DMatrix<f64> {
        &self.distances
    }

    pub fn hyper(&self) -> &KrigingFit {
        &self.fit
    }

    /// Distances from `policy` to every record, each measured on that
    /// record's own states.
    pub fn distances_to(&self, policy: &dyn Policy) -> Result<Vec<f64>> {
        let dim = self.records[0].dim();
        let probs = policy.act_batch(&self.stacked, dim)?;
        let n = self.n_actions;
        Ok(self
            .ranges
            .iter()
            .zip(&self.outputs)
            .map(|(&(a, b), own)| mean_row_distance(&probs[a * n..b * n], own, n))
            .collect())
    }

    pub fn predict_mean(&self, policy: &dyn Policy) -> Result<f64> {
        if self.fit.constant {
            return Ok(self.fit.mean);
        }
        Ok(self.fit.predict_from_distances(&self.distances_to(policy)?))
    }
}

/// Maximises the predicted mean with the EA, returning the best genome.
pub fn surrogate_search<R: Rng + ?Sized>(
    model: &KrigingModel,
    cfg: &EaConfig,
    cgp: &Arc<CgpConfig>,
    rng: &mut R,
) -> Result<ea::EaResult> {
    ea::run(
        cfg,
        cgp,
        |g| Ok(-model.predict_mean(&g.decode())?),
        &mut ConstantRate,
        rng,
    )
}
