//! CSV and JSON artifacts. Every CSV has a fixed header; see the README for
//! column meanings.

use std::io::Write;
use std::path::{Path, PathBuf};

use bnet::orchestrator::{IterationReport, SelectionEvent};
use serde::{Deserialize, Serialize};

use crate::Result;

pub const TRACE_HEADER: [&str; 6] = [
    "iteration",
    "env_steps",
    "champion_mean",
    "candidate_type",
    "candidate_fitness",
    "best_type",
];

pub const SELECTION_HEADER: [&str; 8] = [
    "iteration",
    "champion",
    "challenger",
    "champion_mean",
    "challenger_mean",
    "champion_samples",
    "challenger_samples",
    "promoted",
];

pub const BENCH_RUNS_HEADER: [&str; 7] = [
    "seed",
    "solved",
    "steps_to_solve",
    "training_steps",
    "iterations",
    "check_steps",
    "error",
];

pub const BENCH_SUMMARY_HEADER: [&str; 10] = [
    "env",
    "variant",
    "runs",
    "solved",
    "failed",
    "budget",
    "median_steps",
    "q1_steps",
    "q3_steps",
    "censored",
];

/// One row per evaluated candidate per iteration.
pub fn write_trace<W: Write>(out: W, reports: &[IterationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in reports {
        for c in &r.candidates {
            w.write_record([
                r.iteration.to_string(),
                r.training_steps.to_string(),
                r.champion_mean.to_string(),
                c.kind.name().to_string(),
                c.fitness.to_string(),
                r.best_kind.name().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_selection<W: Write>(out: W, events: &[SelectionEvent]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(SELECTION_HEADER)?;
    for e in events {
        let d = &e.duel;
        w.write_record([
            e.iteration.to_string(),
            d.champion.to_string(),
            d.challenger.to_string(),
            d.champion_mean.to_string(),
            d.challenger_mean.to_string(),
            d.champion_samples.to_string(),
            d.challenger_samples.to_string(),
            d.promoted.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Outcome of one seeded run inside a benchmark.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    pub solved: bool,
    pub steps_to_solve: Option<u64>,
    pub training_steps: u64,
    pub iterations: usize,
    pub check_steps: u64,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchSummary {
    pub env: String,
    pub variant: String,
    pub runs: usize,
    pub solved: usize,
    pub failed: usize,
    pub budget: u64,
    /// Quartiles of steps-to-solve over runs that finished without error;
    /// unsolved runs count as the budget.
    pub median_steps: Option<f64>,
    pub q1_steps: Option<f64>,
    pub q3_steps: Option<f64>,
    /// Unsolved runs censored at the budget.
    pub censored: usize,
}

impl BenchSummary {
    pub fn new(env: &str, variant: &str, budget: u64, results: &[SeedResult]) -> Self {
        let ok: Vec<&SeedResult> = results.iter().filter(|r| r.error.is_none()).collect();
        let mut steps: Vec<f64> = ok
            .iter()
            .map(|r| r.steps_to_solve.unwrap_or(budget) as f64)
            .collect();
        steps.sort_by(f64::total_cmp);
        let solved = ok.iter().filter(|r| r.solved).count();
        BenchSummary {
            env: env.to_string(),
            variant: variant.to_string(),
            runs: results.len(),
            solved,
            failed: results.len() - ok.len(),
            budget,
            median_steps: quantile(&steps, 0.5),
            q1_steps: quantile(&steps, 0.25),
            q3_steps: quantile(&steps, 0.75),
            censored: ok.len() - solved,
        }
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile(sorted: &[f64], q: f64) -> Option<f64> {
    if sorted.is_empty() {
        return None;
    }
    let pos = q.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Some(sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64))
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

pub fn write_bench_runs<W: Write>(out: W, results: &[SeedResult]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_RUNS_HEADER)?;
    for r in results {
        w.write_record([
            r.seed.to_string(),
            r.solved.to_string(),
            opt(r.steps_to_solve),
            r.training_steps.to_string(),
            r.iterations.to_string(),
            r.check_steps.to_string(),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_bench_summary<W: Write>(out: W, s: &BenchSummary) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(BENCH_SUMMARY_HEADER)?;
    w.write_record([
        s.env.clone(),
        s.variant.clone(),
        s.runs.to_string(),
        s.solved.to_string(),
        s.failed.to_string(),
        s.budget.to_string(),
        opt(s.median_steps),
        opt(s.q1_steps),
        opt(s.q3_steps),
        s.censored.to_string(),
    ])?;
    w.flush()?;
    Ok(())
}

/// Files of one training run, relative to its directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OutputPaths {
    pub manifest: PathBuf,
    pub config: PathBuf,
    pub trace: PathBuf,
    pub selection: PathBuf,
    pub champion: PathBuf,
    pub solution: PathBuf,
    pub summary: PathBuf,
}

impl OutputPaths {
    pub fn standard() -> Self {
        OutputPaths {
            manifest: "manifest.json".into(),
            config: "config.toml".into(),
            trace: "trace.csv".into(),
            selection: "selection.csv".into(),
            champion: "champion.genome".into(),
            solution: "solution.genome".into(),
            summary: "summary.json".into(),
        }
    }
}

/// Written before a run starts; with the config snapshot it is enough to
/// repeat the run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub env: String,
    pub variant: String,
    pub seed: u64,
    /// SHA-256 of `config`.
    pub config_hash: String,
    /// Canonical TOML of the resolved configuration.
    pub config: String,
    pub outputs: OutputPaths,
}

impl RunManifest {
    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

/// Final statistics of a training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub solved: bool,
    pub steps_to_solve: Option<u64>,
    pub training_steps: u64,
    pub check_steps: u64,
    pub iterations: usize,
    pub champion_mean: Option<f64>,
    /// Fraction of iterations (after the first) each candidate type won.
    pub best_type_frequencies: Vec<(String, f64)>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quantiles() {
        let d = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert_eq!(quantile(&d, 0.5), Some(3.0));
        assert_eq!(quantile(&d, 0.25), Some(2.0));
        assert_eq!(quantile(&[1.0, 2.0], 0.5), Some(1.5));
        assert_eq!(quantile(&[], 0.5), None);
    }

    #[test]
    fn summary_censors_unsolved_and_skips_failures() {
        let r = |seed, steps: Option<u64>, error: Option<&str>| SeedResult {
            seed,
            solved: steps.is_some(),
            steps_to_solve: steps,
            training_steps: 0,
            iterations: 0,
            check_steps: 0,
            error: error.map(String::from),
        };
        let results = [r(0, Some(100), None), r(1, None, None), r(2, Some(300), None), r(3, None, Some("boom"))];
        let s = BenchSummary::new("cartpole", "base", 1000, &results);
        assert_eq!((s.runs, s.solved, s.failed, s.censored), (4, 2, 1, 1));
        assert_eq!(s.median_steps, Some(300.0));
        let mut buf = Vec::new();
        write_bench_summary(&mut buf, &s).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with(&BENCH_SUMMARY_HEADER.join(",")));
    }
}
