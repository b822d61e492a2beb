//! Robust elitist selection under noisy fitness.
//!
//! A challenger is a candidate whose one-time fitness beats the champion's
//! mean. Challengers are re-evaluated until they have at least as many
//! samples as the champion (and at least `r`), and only replace the champion
//! when their mean is strictly greater.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitnessRecord {
    pub candidate: u64,
    samples: Vec<f64>,
}

impl FitnessRecord {
    pub fn new(candidate: u64, first: f64) -> Self {
        FitnessRecord {
            candidate,
            samples: vec![first],
        }
    }

    pub fn from_samples(candidate: u64, samples: Vec<f64>) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::Empty("fitness samples"));
        }
        Ok(FitnessRecord { candidate, samples })
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn n(&self) -> usize {
        self.samples.len()
    }

    /// Fitness of the first evaluation.
    pub fn first(&self) -> f64 {
        self.samples[0]
    }

    pub fn mean(&self) -> f64 {
        self.samples.iter().sum::<f64>() / self.samples.len() as f64
    }

    pub fn push(&mut self, fitness: f64) {
        self.samples.push(fitness);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SelectionConfig {
    /// Desired number of evaluations per duel participant.
    pub repeats: usize,
}

impl SelectionConfig {
    pub fn new(repeats: usize) -> Result<Self> {
        if repeats == 0 {
            return Err(Error::InvalidConfig("selection repeats must be >= 1".into()));
        }
        Ok(SelectionConfig { repeats })
    }
}

/// Indices of `candidates` whose first fitness strictly exceeds the
/// champion mean, best first (stable for equal fitness).
pub fn find_challengers(candidates: &[FitnessRecord], champion: &FitnessRecord) -> Vec<usize> {
    let bar = champion.mean();
    let mut idx: Vec<usize> = (0..candidates.len())
        .filter(|&i| candidates[i].first() > bar)
        .collect();
    idx.sort_by(|&a, &b| candidates[b].first().total_cmp(&candidates[a].first()));
    idx
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DuelOutcome {
    pub champion: u64,
    pub challenger: u64,
    pub champion_mean: f64,
    pub challenger_mean: f64,
    pub champion_samples: usize,
    pub challenger_samples: usize,
    pub promoted: bool,
}

/// Runs one duel. `evaluate(id)` plays one evaluation episode of the given
/// candidate and returns its fitness; every result is appended to the
/// matching record.
pub fn duel<F>(
    champion: &mut FitnessRecord,
    challenger: &mut FitnessRecord,
    cfg: &SelectionConfig,
    mut evaluate: F,
) -> Result<DuelOutcome>
where
    F: FnMut(u64) -> Result<f64>,
{
    while champion.n() < cfg.repeats {
        let f = evaluate(champion.candidate)?;
        champion.push(f);
    }
    let target = champion.n().max(cfg.repeats);
    while challenger.n() < target {
        let f = evaluate(challenger.candidate)?;
        challenger.push(f);
    }
    let champion_mean = champion.mean();
    let challenger_mean = challenger.mean();
    Ok(DuelOutcome {
        champion: champion.candidate,
        challenger: challenger.candidate,
        champion_mean,
        challenger_mean,
        champion_samples: champion.n(),
        challenger_samples: challenger.n(),
        promoted: challenger_mean > champion_mean,
    })
}

/// Full selection round. `records[champion]` is the current champion; the
/// others are this iteration's candidates. Challengers are tried in order,
/// each only while its first fitness still beats the (possibly new)
/// champion's mean. Returns the index of the final champion and every duel.
pub fn select<F>(
    records: &mut [FitnessRecord],
    champion: usize,
    cfg: &SelectionConfig,
    mut evaluate: F,
) -> Result<(usize, Vec<DuelOutcome>)>
where
    F: FnMut(u64) -> Result<f64>,
{
    if champion >= records.len() {
        return Err(Error::InvalidArgument(format!(
            "champion index {champion} out of range"
        )));
    }
    let others: Vec<FitnessRecord> = records
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != champion)
        .map(|(_, r)| r.clone())
        .collect();
    let order: Vec<usize> = find_challengers(&others, &records[champion])
        .into_iter()
        .map(|j| if j >= champion { j + 1 } else { j })
        .collect();
    let mut current = champion;
    let mut duels = Vec::new();
    for c in order {
        if records[c].first() <= records[current].mean() {
            continue;
        }
        let (champ, chal) = pair_mut(records, current, c);
        let outcome = duel(champ, chal, cfg, &mut evaluate)?;
        if outcome.promoted {
            current = c;
        }
        duels.push(outcome);
    }
    Ok((current, duels))
}

fn pair_mut<T>(v: &mut [T], a: usize, b: usize) -> (&mut T, &mut T) {
    debug_assert_ne!(a, b);
    if a < b {
        let (lo, hi) = v.split_at_mut(b);
        (&mut lo[a], &mut hi[0])
    } else {
        let (lo, hi) = v.split_at_mut(a);
        (&mut hi[0], &mut lo[b])
    }
}
