//! Gradient-free (mu + lambda) evolutionary algorithm over CGP genomes.

use std::sync::Arc;

use log::warn;
use rand::Rng;

use crate::cgp::{mutate, random_genome, CgpConfig, Genome};
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct EaConfig {
    pub mu: usize,
    pub lambda: usize,
    pub iterations: usize,
    pub mutation_rate: f64,
    /// Pre-defined candidates placed in the initial population.
    pub seeds: Vec<Genome>,
}

impl EaConfig {
    pub fn new(mu: usize, lambda: usize, iterations: usize, mutation_rate: f64) -> Self {
        EaConfig {
            mu,
            lambda,
            iterations,
            mutation_rate,
            seeds: Vec::new(),
        }
    }

    pub fn with_seeds(mut self, seeds: Vec<Genome>) -> Self {
        self.seeds = seeds;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu == 0 || self.lambda == 0 || self.iterations == 0 {
            return Err(Error::InvalidConfig("EA needs mu, lambda and iterations >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_rate) {
            return Err(Error::InvalidConfig(format!(
                "EA mutation rate {} outside [0, 1]",
                self.mutation_rate
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct Individual {
    pub genome: Genome,
    pub loss: f64,
}

#[derive(Clone, Debug)]
pub struct EaResult {
    /// Final parents, best first.
    pub population: Vec<Individual>,
    /// Best loss after initialization and after every iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    /// Offspring dropped because their loss was not finite.
    pub discarded: usize,
}

impl EaResult {
    pub fn best(&self) -> &Individual {
        &self.population[0]
    }
}

/// Hook for changing the mutation rate between iterations.
pub trait MutationSchedule {
    /// Rate for the next iteration, given whether the best loss improved.
    fn adapt(&mut self, rate: f64, improved: bool) -> f64;
}

/// Keeps the configured rate.
#[derive(Clone, Copy, Debug, Default)]
pub struct ConstantRate;

impl MutationSchedule for ConstantRate {
    fn adapt(&mut self, rate: f64, _improved: bool) -> f64 {
        clamp_rate(rate)
    }
}

/// Doubles the rate after `patience` iterations without improvement, up to
/// `cap`, and returns to the base rate once progress resumes.
#[derive(Clone, Debug)]
pub struct StagnationSchedule {
    pub patience: usize,
    pub cap: f64,
    base: Option<f64>,
    flat: usize,
}

impl StagnationSchedule {
    pub fn new(patience: usize, cap: f64) -> Self {
        StagnationSchedule {
            patience: patience.max(1),
            cap,
            base: None,
            flat: 0,
        }
    }
}

impl MutationSchedule for StagnationSchedule {
    fn adapt(&mut self, rate: f64, improved: bool) -> f64 {
        let base = *self.base.get_or_insert(rate);
        if improved {
            self.flat = 0;
            return clamp_rate(base);
        }
        self.flat += 1;
        if self.flat >= self.patience {
            self.flat = 0;
            return clamp_rate((rate * 2.0).min(self.cap));
        }
        clamp_rate(rate)
    }
}

fn clamp_rate(rate: f64) -> f64 {
    rate.clamp(f64::MIN_POSITIVE, 1.0)
}

/// Minimises `loss` over genomes. Offspring `i` mutates parent `i mod mu`
/// and selection keeps the `mu` best of parents and offspring, preferring
/// parents on ties.
pub fn run<L, R>(
    cfg: &EaConfig,
    cgp: &Arc<CgpConfig>,
    loss: L,
    schedule: &mut dyn MutationSchedule,
    rng: &mut R,
) -> Result<EaResult>
where
    L: Fn(&Genome) -> Result<f64>,
    R: Rng + ?Sized,
{
    cfg.validate()?;
    let mut evaluations = 0;
    let mut discarded = 0;
    let evaluate = |genome: Genome, evaluations: &mut usize| -> Result<Option<Individual>> {
        *evaluations += 1;
        let l = loss(&genome)?;
        Ok(l.is_finite().then_some(Individual { genome, loss: l }))
    };

    let mut initial: Vec<Genome> = cfg.seeds.clone();
    while initial.len() < cfg.mu {
        initial.push(random_genome(cgp, rng)?);
    }
    let mut parents = Vec::with_capacity(initial.len());
    for g in initial {
        match evaluate(g, &mut evaluations)? {
            Some(ind) => parents.push(ind),
            None => {
                discarded += 1;
                warn!("initial candidate has a non-finite loss; discarded");
            }
        }
    }
    if parents.is_empty() {
        return Err(Error::NonFinite("loss of every initial candidate"));
    }
    parents.sort_by(|a, b| a.loss.total_cmp(&b.loss));
    parents.truncate(cfg.mu);

    let mut trace = Vec::with_capacity(cfg.iterations + 1);
    trace.push(parents[0].loss);
    let mut rate = clamp_rate(cfg.mutation_rate);
    if cfg.mutation_rate == 0.0 {
        rate = 0.0;
    }
    for _ in 0..cfg.iterations {
        let mut offspring = Vec::with_capacity(cfg.lambda);
        for i in 0..cfg.lambda {
            let parent = &parents[i % parents.len()].genome;
            let child = mutate(parent, rate, rng)?;
            match evaluate(child, &mut evaluations)? {
                Some(ind) => offspring.push(ind),
                None => {
                    discarded += 1;
                    warn!("offspring has a non-finite loss; discarded");
                }
            }
        }
        let previous = parents[0].loss;
        parents.extend(offspring);
        // stable: parents precede offspring of equal loss
        parents.sort_by(|a, b| a.loss.total_cmp(&b.loss));
        parents.truncate(cfg.mu);
        let best = parents[0].loss;
        trace.push(best);
        if rate > 0.0 {
            rate = schedule.adapt(rate, best < previous);
        }
    }
    Ok(EaResult {
        population: parents,
        trace,
        evaluations,
        discarded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cgp() -> Arc<CgpConfig> {
        Arc::new(CgpConfig {
            n_nodes: 40,
            ..CgpConfig::new(2, 2)
        })
    }

    /// Mean first-node weight; a cheap smooth landscape for tests.
    fn weight_loss(g: &Genome) -> Result<f64> {
        Ok(g.nodes().iter().map(|n| n.weights[0]).sum::<f64>() / g.nodes().len() as f64)
    }

    #[test]
    fn constant_loss_keeps_best_constant() {
        let cfg = EaConfig::new(4, 2, 30, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let r = run(&cfg, &cgp(), |_| Ok(3.5), &mut ConstantRate, &mut rng).unwrap();
        assert!(r.trace.iter().all(|&l| l == 3.5));
        assert_eq!(r.population.len(), 4);
        assert_eq!(r.evaluations, 4 + 30 * 2);
    }

    #[test]
    fn elitism_and_progress() {
        let cfg = EaConfig::new(5, 2, 200, 0.05);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let r = run(&cfg, &cgp(), weight_loss, &mut ConstantRate, &mut rng).unwrap();
        assert!(r.trace.windows(2).all(|w| w[1] <= w[0]));
        assert!(r.trace.last().unwrap() < &r.trace[0]);
        assert!(r.population.windows(2).all(|w| w[0].loss <= w[1].loss));
    }

    #[test]
    fn seeded_optimum_is_kept() {
        let c = cgp();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut opt = random_genome(&c, &mut rng).unwrap();
        // a genome with every first weight at the lower bound is optimal
        let nodes: Vec<_> = opt
            .nodes()
            .iter()
            .cloned()
            .map(|mut n| {
                n.weights[0] = -1.0;
                n
            })
            .collect();
        opt = Genome::from_parts(Arc::clone(&c), nodes, opt.output_genes().to_vec()).unwrap();
        let best = weight_loss(&opt).unwrap();
        let cfg = EaConfig::new(3, 2, 50, 0.1).with_seeds(vec![opt]);
        let r = run(&cfg, &c, weight_loss, &mut ConstantRate, &mut rng).unwrap();
        assert_eq!(r.best().loss, best);
    }

    #[test]
    fn deterministic_per_seed() {
        let cfg = EaConfig::new(4, 2, 40, 0.05);
        let a = run(&cfg, &cgp(), weight_loss, &mut ConstantRate, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = run(&cfg, &cgp(), weight_loss, &mut ConstantRate, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a.trace, b.trace);
        assert_eq!(a.best().genome, b.best().genome);
    }

    #[test]
    fn non_finite_offspring_are_discarded() {
        let cfg = EaConfig::new(2, 2, 10, 0.2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let r = run(
            &cfg,
            &cgp(),
            |g| {
                let l = weight_loss(g)?;
                Ok(if l < 0.0 { f64::NAN } else { l })
            },
            &mut ConstantRate,
            &mut rng,
        );
        // either everything was discarded at init or the survivors are finite
        if let Ok(r) = r {
            assert!(r.population.iter().all(|i| i.loss.is_finite()));
        }
    }

    #[test]
    fn invalid_config() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for cfg in [EaConfig::new(0, 2, 1, 0.1), EaConfig::new(2, 0, 1, 0.1), EaConfig::new(2, 2, 0, 0.1)] {
            assert!(run(&cfg, &cgp(), weight_loss, &mut ConstantRate, &mut rng).is_err());
        }
    }

    #[test]
    fn schedules() {
        let mut c = ConstantRate;
        assert_eq!(c.adapt(0.05, false), 0.05);
        let mut s = StagnationSchedule::new(3, 0.3);
        let mut rate = 0.05;
        for _ in 0..3 {
            rate = s.adapt(rate, false);
        }
        assert_eq!(rate, 0.1);
        for _ in 0..30 {
            rate = s.adapt(rate, false);
        }
        assert_eq!(rate, 0.3);
        assert_eq!(s.adapt(rate, true), 0.05);
        assert_eq!(c.adapt(5.0, true), 1.0);
        assert!(c.adapt(0.0, true) > 0.0);
    }
}
