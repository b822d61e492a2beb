//! Episode trajectories, discounted returns, the elite experience archive
//! and the experience pool used to train the critic.

use std::collections::VecDeque;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::behavior::BehaviorSample;
use crate::env::EvalMode;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: usize,
    pub reward: f64,
    /// Distribution the acting policy emitted in `state`.
    pub action_probabilities: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySource {
    pub candidate: u64,
    pub mode: EvalMode,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub transitions: Vec<Transition>,
    /// Undiscounted cumulative reward.
    pub fitness: f64,
    /// Selection fitness reported by the environment.
    pub score: f64,
    /// Per-step discounted returns; empty until [`Trajectory::compute_returns`].
    pub returns: Vec<f64>,
    pub source: TrajectorySource,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn rewards(&self) -> Vec<f64> {
        self.transitions.iter().map(|t| t.reward).collect()
    }

    pub fn compute_returns(&mut self, gamma: f64) -> Result<()> {
        self.returns = discounted_returns(&self.rewards(), gamma)?;
        Ok(())
    }

    pub fn state_dim(&self) -> usize {
        self.transitions.first().map_or(0, |t| t.state.len())
    }

    /// Row-major matrix of the visited states.
    pub fn states_flat(&self) -> Vec<f64> {
        self.transitions.iter().flat_map(|t| t.state.iter().copied()).collect()
    }
}

/// `R_t = r_t + gamma * R_{t+1}`, evaluated backwards in one pass.
pub fn discounted_returns(rewards: &[f64], gamma: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("discount {gamma} outside [0, 1]")));
    }
    if rewards.is_empty() {
        return Err(Error::Empty("trajectory"));
    }
    let mut out = vec![0.0; rewards.len()];
    let mut acc = 0.0;
    for (o, r) in out.iter_mut().zip(rewards).rev() {
        acc = r + gamma * acc;
        *o = acc;
    }
    Ok(out)
}

/// Bounded set of the best episodes seen so far, ordered best first.
///
/// Until full every offer is accepted. Afterwards an offer replaces the
/// worst entry only if it scores strictly higher, and at most `budget`
/// replacements happen between two calls to [`EliteArchive::begin_iteration`].
#[derive(Clone, Debug)]
pub struct EliteArchive {
    capacity: usize,
    budget: usize,
    replaced: usize,
    entries: Vec<Trajectory>,
}

impl EliteArchive {
    pub fn new(capacity: usize, budget: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("archive capacity must be positive".into()));
        }
        Ok(EliteArchive {
            capacity,
            budget,
            replaced: 0,
            entries: Vec::with_capacity(capacity),
        })
    }

    pub fn begin_iteration(&mut self) {
        self.replaced = 0;
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.entries.len() >= self.capacity
    }

    pub fn entries(&self) -> &[Trajectory] {
        &self.entries
    }

    pub fn min_score(&self) -> Option<f64> {
        self.entries.last().map(|t| t.score)
    }

    pub fn replacements_this_iteration(&self) -> usize {
        self.replaced
    }

    pub fn offer(&mut self, trajectory: Trajectory) -> bool {
        if !self.is_full() {
            self.insert(trajectory);
            return true;
        }
        if self.replaced >= self.budget {
            return false;
        }
        match self.min_score() {
            Some(min) if trajectory.score > min => {
                self.entries.pop();
                self.insert(trajectory);
                self.replaced += 1;
                true
            }
            _ => false,
        }
    }

    /// Offers one iteration's episodes best first, so a limited budget is
    /// spent on the strongest ones. Returns acceptance in input order.
    pub fn offer_batch(&mut self, trajectories: Vec<Trajectory>) -> Vec<bool> {
        let mut order: Vec<usize> = (0..trajectories.len()).collect();
        order.sort_by(|&a, &b| trajectories[b].score.total_cmp(&trajectories[a].score));
        let mut slots: Vec<Option<Trajectory>> = trajectories.into_iter().map(Some).collect();
        let mut accepted = vec![false; slots.len()];
        for i in order {
            if let Some(t) = slots[i].take() {
                accepted[i] = self.offer(t);
            }
        }
        accepted
    }

    fn insert(&mut self, trajectory: Trajectory) {
        // after existing entries of equal score
        let pos = self.entries.partition_point(|e| e.score >= trajectory.score);
        self.entries.insert(pos, trajectory);
    }

    /// Imitation references: every entry's states and actions, with the
    /// stored distributions replaced by one-hot vectors on the taken action.
    /// Weights are left at one.
    pub fn reference_set(&self, n_actions: usize) -> Result<Vec<BehaviorSample>> {
        if self.entries.is_empty() {
            return Err(Error::Empty("elite archive"));
        }
        self.entries
            .iter()
            .filter(|t| !t.is_empty())
            .map(|t| BehaviorSample::from_trajectory(t, n_actions))
            .collect()
    }
}

/// Distribution adapted so that the performed action has probability one.
pub fn adapt_to_action(stored: &[f64], action: usize) -> Vec<f64> {
    let mut p = vec![0.0; stored.len()];
    p[action] = 1.0;
    p
}

/// All observed states with their discounted returns, first in first out.
#[derive(Clone, Debug)]
pub struct ExperiencePool {
    capacity: usize,
    entries: VecDeque<PoolEntry>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolEntry {
    pub state: Vec<f64>,
    pub action: usize,
    pub ret: f64,
}

impl ExperiencePool {
    pub fn new(capacity: usize) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidConfig("pool capacity must be positive".into()));
        }
        Ok(ExperiencePool {
            capacity,
            entries: VecDeque::new(),
        })
    }

    pub fn append(&mut self, trajectory: &Trajectory) -> Result<()> {
        if trajectory.returns.len() != trajectory.len() {
            return Err(Error::InvalidArgument("trajectory returns not computed".into()));
        }
        for (t, &ret) in trajectory.transitions.iter().zip(&trajectory.returns) {
            if !ret.is_finite() {
                return Err(Error::NonFinite("discounted return"));
            }
            if self.entries.len() == self.capacity {
                self.entries.pop_front();
            }
            self.entries.push_back(PoolEntry {
                state: t.state.clone(),
                action: t.action,
                ret,
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize) -> &PoolEntry {
        &self.entries[i]
    }

    pub fn iter(&self) -> impl Iterator<Item = &PoolEntry> {
        self.entries.iter()
    }
}

/// Serialized experience used for offline initialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperienceSet {
    pub env: String,
    pub observation_dim: usize,
    pub n_actions: usize,
    pub trajectories: Vec<Trajectory>,
}

impl ExperienceSet {
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let set: ExperienceSet = serde_json::from_reader(std::io::BufReader::new(file))?;
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trajectories.iter().all(Trajectory::is_empty) {
            return Err(Error::Empty("experience set"));
        }
        for t in &self.trajectories {
            for tr in &t.transitions {
                if tr.state.len() != self.observation_dim {
                    return Err(Error::DimensionMismatch {
                        expected: self.observation_dim,
                        actual: tr.state.len(),
                    });
                }
                if tr.action >= self.n_actions {
                    return Err(Error::ActionOutOfRange {
                        action: tr.action,
                        n_actions: self.n_actions,
                    });
                }
            }
        }
        Ok(())
    }
}

pub const TRAJECTORY_CSV_HEADER: &str = "iteration,candidate_type,step,action,reward,fitness";

/// Appends one row per transition to a trajectory log.
pub fn write_trajectory_csv<W: Write>(
    out: &mut W,
    iteration: usize,
    candidate_type: &str,
    trajectory: &Trajectory,
) -> std::io::Result<()> {
    for (step, t) in trajectory.transitions.iter().enumerate() {
        writeln!(
            out,
            "{iteration},{candidate_type},{step},{},{},{}",
            t.action, t.reward, trajectory.fitness
        )?;
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;

    pub(crate) fn traj(score: f64, len: usize) -> Trajectory {
        Trajectory {
            transitions: (0..len)
                .map(|i| Transition {
                    state: vec![i as f64, score],
                    action: i % 2,
                    reward: 1.0,
                    action_probabilities: vec![0.6, 0.4],
                })
                .collect(),
            fitness: len as f64,
            score,
            returns: vec![],
            source: TrajectorySource {
                candidate: score as u64,
                mode: EvalMode::Deterministic,
            },
        }
    }

    #[test]
    fn returns_arithmetic() {
        let r = discounted_returns(&[1.0, 1.0, 1.0], 0.5).unwrap();
        assert_eq!(r, vec![1.75, 1.5, 1.0]);
        let r = discounted_returns(&[3.0, -1.0, 2.0], 0.0).unwrap();
        assert_eq!(r, vec![3.0, -1.0, 2.0]);
        let r = discounted_returns(&[1.0; 200], 1.0).unwrap();
        assert_eq!(r[0], 200.0);
        assert!(discounted_returns(&[1.0], 1.5).is_err());
        assert!(discounted_returns(&[], 0.9).is_err());
    }

    #[test]
    fn archive_fill_then_replace() {
        let mut a = EliteArchive::new(3, 2).unwrap();
        assert!(a.offer(traj(5.0, 2)));
        assert!(a.offer(traj(1.0, 2)));
        assert!(a.offer(traj(3.0, 2)));
        assert!(a.is_full());
        assert!(!a.offer(traj(0.5, 2)));
        assert!(!a.offer(traj(1.0, 2))); // not strictly better
        assert!(a.offer(traj(4.0, 2)));
        let scores: Vec<f64> = a.entries().iter().map(|t| t.score).collect();
        assert_eq!(scores, vec![5.0, 4.0, 3.0]);
    }

    #[test]
    fn archive_budget_keeps_best_offers() {
        let mut a = EliteArchive::new(3, 2).unwrap();
        a.offer_batch(vec![traj(1.0, 1), traj(2.0, 1), traj(3.0, 1)]);
        a.begin_iteration();
        let acc = a.offer_batch(vec![traj(6.0, 1), traj(9.0, 1), traj(5.0, 1), traj(8.0, 1), traj(7.0, 1)]);
        assert_eq!(acc, vec![false, true, false, true, false]);
        let scores: Vec<f64> = a.entries().iter().map(|t| t.score).collect();
        assert_eq!(scores, vec![9.0, 8.0, 3.0]);
        // budget is exhausted until the next iteration
        assert!(!a.offer(traj(100.0, 1)));
        a.begin_iteration();
        assert!(a.offer(traj(100.0, 1)));
    }

    #[test]
    fn reference_set_adapts_to_taken_action() {
        assert_eq!(adapt_to_action(&[0.6, 0.4], 0), vec![1.0, 0.0]);
        assert_eq!(adapt_to_action(&[0.3, 0.7], 0), vec![1.0, 0.0]);
        let mut a = EliteArchive::new(10, 2).unwrap();
        assert!(a.reference_set(2).is_err());
        for (s, l) in [(1.0, 3), (2.0, 5), (3.0, 4)] {
            a.offer(traj(s, l));
        }
        let refs = a.reference_set(2).unwrap();
        assert_eq!(refs.len(), 3);
        let lens: Vec<usize> = refs.iter().map(BehaviorSample::len).collect();
        assert_eq!(lens, vec![4, 5, 3]);
        // archive keeps the original distributions
        assert_eq!(a.entries()[0].transitions[0].action_probabilities, vec![0.6, 0.4]);
        assert_eq!(refs[0].reference_row(1), &[0.0, 1.0]);
    }

    #[test]
    fn pool_is_fifo() {
        let mut pool = ExperiencePool::new(10).unwrap();
        let mut t = traj(1.0, 6);
        assert!(pool.append(&t).is_err());
        t.compute_returns(1.0).unwrap();
        pool.append(&t).unwrap();
        let mut u = traj(2.0, 6);
        u.compute_returns(1.0).unwrap();
        pool.append(&u).unwrap();
        assert_eq!(pool.len(), 10);
        // first two entries of `t` were evicted
        assert_eq!(pool.get(0).state, vec![2.0, 1.0]);
        assert_eq!(pool.get(0).ret, 4.0);
        assert_eq!(pool.get(0).action, 0);
        assert_eq!(pool.get(9).state, vec![5.0, 2.0]);
    }

    #[test]
    fn csv_rows() {
        let mut buf = Vec::new();
        write_trajectory_csv(&mut buf, 3, "mutant", &traj(1.0, 2)).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert_eq!(s, "3,mutant,0,0,1,2\n3,mutant,1,1,1,2\n");
    }
}
