//! Summary tables derived from raw sweep results.
//!
//! | file                         | columns                                       |
//! |------------------------------|-----------------------------------------------|
//! | `tradeoff.csv`               | strategy,param,block,wer,rtf,mean_rounds      |
//! | `pareto.csv`                 | strategy,param,block,wer,rtf,mean_rounds      |
//! | `matched.csv` (optional)     | strategy,param,block,wer,rtf,mean_rounds      |
//! | `trajectory.csv`             | strategy,param,block,progress,cum_nll         |
//! | `trajectory_utterances.csv`  | strategy,param,block,utterance,progress,cum_nll |
//! | `throughput.csv`             | strategy,round,mean_tokens                    |
//! | `ccdf.csv`                   | profile,threshold,fraction                    |
//!
//! `trajectory.csv` holds the corpus mean of the per-utterance trajectories
//! in `trajectory_utterances.csv`, sampled at every `j / horizon`. Round-wise
//! tables only use utterances with at least `min_tokens` tokens.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::io::{write_csv_with_header, CommitRow, SweepData};
use crate::error::{Error, Result};
use crate::metrics::{ccdf, match_rtf, pareto, throughput, trajectory, trajectory_at, TradeoffPoint};
use crate::state::{CommitEvent, Prediction, Trace};

pub const TRADEOFF_FILE: &str = "tradeoff.csv";
pub const PARETO_FILE: &str = "pareto.csv";
pub const MATCHED_FILE: &str = "matched.csv";
pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const TRAJECTORY_UTT_FILE: &str = "trajectory_utterances.csv";
pub const THROUGHPUT_FILE: &str = "throughput.csv";
pub const CCDF_FILE: &str = "ccdf.csv";

const TRADEOFF_HEADER: &[&str] = &["strategy", "param", "block", "wer", "rtf", "mean_rounds"];

/// Thresholds at which CCDFs are tabulated: 0.00, 0.01, ..., 1.00.
pub fn ccdf_thresholds() -> Vec<f64> {
    (0..=100).map(|i| i as f64 / 100.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub strategy: String,
    pub param: String,
    pub block: usize,
    pub progress: f64,
    pub cum_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceTrajectoryRow {
    pub strategy: String,
    pub param: String,
    pub block: usize,
    pub utterance: String,
    pub progress: f64,
    pub cum_nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThroughputRow {
    /// `kind:param@block`, or `ar@1` for the reference.
    pub strategy: String,
    pub round: usize,
    pub mean_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CcdfRow {
    pub profile: String,
    pub threshold: f64,
    pub fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Analysis {
    pub tradeoff: Vec<TradeoffPoint>,
    pub pareto: Vec<TradeoffPoint>,
    pub matched: Vec<TradeoffPoint>,
    pub trajectory: Vec<TrajectoryRow>,
    pub trajectory_utterances: Vec<UtteranceTrajectoryRow>,
    pub throughput: Vec<ThroughputRow>,
    pub ccdf: Vec<CcdfRow>,
}

type CellKey = (String, String, usize);

/// Summarizes one or more sweeps. With several inputs, strategy names are
/// prefixed by `<label>/` so the tables stay distinguishable.
pub fn analyze(inputs: &[SweepData], target_rtf: Option<f64>) -> Result<Analysis> {
    if inputs.is_empty() {
        return Err(Error::invalid("nothing to analyze"));
    }
    let prefix = inputs.len() > 1;
    let mut out = Analysis::default();
    for data in inputs {
        let name = |s: &str| {
            if prefix {
                format!("{}/{}", data.meta.label, s)
            } else {
                s.to_string()
            }
        };
        let part = analyze_one(data)?;
        out.tradeoff.extend(part.tradeoff.into_iter().map(|mut p| {
            p.strategy = name(&p.strategy);
            p
        }));
        out.trajectory.extend(part.trajectory.into_iter().map(|mut r| {
            r.strategy = name(&r.strategy);
            r
        }));
        out.trajectory_utterances
            .extend(part.trajectory_utterances.into_iter().map(|mut r| {
                r.strategy = name(&r.strategy);
                r
            }));
        out.throughput.extend(part.throughput.into_iter().map(|mut r| {
            r.strategy = name(&r.strategy);
            r
        }));
        out.ccdf.extend(part.ccdf);
    }

    let mut blocks: Vec<(String, usize)> = Vec::new();
    for p in out.tradeoff.iter().filter(|p| !is_ar(&p.strategy)) {
        let key = (label_of(&p.strategy).to_string(), p.block);
        if !blocks.contains(&key) {
            blocks.push(key);
        }
    }
    for (label, block) in &blocks {
        let points: Vec<_> = out
            .tradeoff
            .iter()
            .filter(|p| !is_ar(&p.strategy) && label_of(&p.strategy) == label && p.block == *block)
            .cloned()
            .collect();
        out.pareto.extend(pareto(&points)?);
    }

    if let Some(target) = target_rtf {
        let mut kinds: Vec<&str> = Vec::new();
        for p in out.tradeoff.iter().filter(|p| !is_ar(&p.strategy)) {
            if !kinds.contains(&p.strategy.as_str()) {
                kinds.push(&p.strategy);
            }
        }
        let groups: Vec<Vec<TradeoffPoint>> = kinds
            .iter()
            .map(|k| out.tradeoff.iter().filter(|p| p.strategy == *k).cloned().collect())
            .collect();
        out.matched = match_rtf(&groups, target)?;
    }
    Ok(out)
}

fn is_ar(strategy: &str) -> bool {
    strategy == "ar" || strategy.ends_with("/ar")
}

fn label_of(strategy: &str) -> &str {
    strategy.rsplit_once('/').map_or("", |(l, _)| l)
}

fn analyze_one(data: &SweepData) -> Result<Analysis> {
    let meta = &data.meta;
    let mut cells: Vec<CellKey> = Vec::new();
    let mut runs_by_cell: HashMap<CellKey, Vec<usize>> = HashMap::new();
    for (i, r) in data.runs.iter().enumerate() {
        let key = (r.strategy.clone(), r.param.clone(), r.block);
        runs_by_cell
            .entry(key.clone())
            .or_insert_with(|| {
                cells.push(key);
                Vec::new()
            })
            .push(i);
    }

    let mut commits: HashMap<(CellKey, &str), Vec<&CommitRow>> = HashMap::new();
    for c in &data.commits {
        commits
            .entry(((c.strategy.clone(), c.param.clone(), c.block), c.utterance.as_str()))
            .or_default()
            .push(c);
    }

    let mut out = Analysis::default();
    let h = meta.horizon;
    for key in &cells {
        let runs: Vec<_> = runs_by_cell[key].iter().map(|&i| &data.runs[i]).collect();
        let n = runs.len() as f64;
        let total_calls: usize = runs.iter().map(|r| r.rounds).sum();
        let total_duration: f64 = runs.iter().map(|r| r.duration_s).sum();
        out.tradeoff.push(TradeoffPoint {
            strategy: key.0.clone(),
            param: key.1.clone(),
            block: key.2,
            wer: runs.iter().map(|r| r.wer).sum::<f64>() / n,
            rtf: meta.cost.seconds(total_calls) / total_duration,
            mean_rounds: total_calls as f64 / n,
        });

        let mut grid_sum = vec![0.0; h + 1];
        let mut counts_sum: Vec<usize> = Vec::new();
        let mut used = 0usize;
        for r in runs.iter().filter(|r| r.length >= meta.min_tokens) {
            let rows = commits
                .get(&(key.clone(), r.utterance.as_str()))
                .ok_or_else(|| Error::invalid(format!("no commits for {} in {:?}", r.utterance, key)))?;
            let trace = rebuild_trace(&r.utterance, r.length, rows);
            let points = trajectory(&trace, h)?;
            for (j, g) in grid_sum.iter_mut().enumerate() {
                let cum = trajectory_at(&points, j as f64 / h as f64);
                *g += cum;
                out.trajectory_utterances.push(UtteranceTrajectoryRow {
                    strategy: key.0.clone(),
                    param: key.1.clone(),
                    block: key.2,
                    utterance: r.utterance.clone(),
                    progress: j as f64 / h as f64,
                    cum_nll: cum,
                });
            }
            let tp = throughput(&trace);
            if counts_sum.len() < tp.counts.len() {
                counts_sum.resize(tp.counts.len(), 0);
            }
            for (s, c) in counts_sum.iter_mut().zip(&tp.counts) {
                *s += c;
            }
            used += 1;
        }
        if used > 0 {
            for (j, g) in grid_sum.iter().enumerate() {
                out.trajectory.push(TrajectoryRow {
                    strategy: key.0.clone(),
                    param: key.1.clone(),
                    block: key.2,
                    progress: j as f64 / h as f64,
                    cum_nll: g / used as f64,
                });
            }
            let label = if key.1.is_empty() {
                format!("{}@{}", key.0, key.2)
            } else {
                format!("{}:{}@{}", key.0, key.1, key.2)
            };
            for (round, s) in counts_sum.iter().enumerate() {
                out.throughput.push(ThroughputRow {
                    strategy: label.clone(),
                    round: round + 1,
                    mean_tokens: *s as f64 / used as f64,
                });
            }
        }
    }

    if !data.confidences.is_empty() {
        let samples: Vec<f64> = data.confidences.iter().map(|c| c.confidence).collect();
        let thresholds = ccdf_thresholds();
        let fractions = ccdf(&samples, &thresholds)?;
        out.ccdf = thresholds
            .into_iter()
            .zip(fractions)
            .map(|(threshold, fraction)| CcdfRow {
                profile: meta.label.clone(),
                threshold,
                fraction,
            })
            .collect();
    }
    Ok(out)
}

fn rebuild_trace(utterance: &str, length: usize, rows: &[&CommitRow]) -> Trace {
    let mut events: Vec<CommitEvent> = Vec::new();
    let mut hypothesis = vec![0; length];
    for c in rows {
        if let Some(p) = hypothesis.get_mut(c.position) {
            *p = c.token;
        }
        let pred = Prediction {
            position: c.position,
            token: c.token,
            confidence: c.confidence,
            nll: c.nll,
        };
        match events.last_mut() {
            Some(ev) if ev.round == c.round => ev.commits.push(pred),
            _ => events.push(CommitEvent {
                round: c.round,
                block: c.position / c.block.max(1),
                commits: vec![pred],
            }),
        }
    }
    Trace {
        utterance_id: utterance.to_string(),
        model_calls: events.len(),
        events,
        hypothesis,
        first_confidence: Vec::new(),
    }
}

impl Analysis {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_csv_with_header(&dir.join(TRADEOFF_FILE), TRADEOFF_HEADER, &self.tradeoff)?;
        write_csv_with_header(&dir.join(PARETO_FILE), TRADEOFF_HEADER, &self.pareto)?;
        if !self.matched.is_empty() {
            write_csv_with_header(&dir.join(MATCHED_FILE), TRADEOFF_HEADER, &self.matched)?;
        }
        write_csv_with_header(
            &dir.join(TRAJECTORY_FILE),
            &["strategy", "param", "block", "progress", "cum_nll"],
            &self.trajectory,
        )?;
        write_csv_with_header(
            &dir.join(TRAJECTORY_UTT_FILE),
            &["strategy", "param", "block", "utterance", "progress", "cum_nll"],
            &self.trajectory_utterances,
        )?;
        write_csv_with_header(
            &dir.join(THROUGHPUT_FILE),
            &["strategy", "round", "mean_tokens"],
            &self.throughput,
        )?;
        write_csv_with_header(
            &dir.join(CCDF_FILE),
            &["profile", "threshold", "fraction"],
            &self.ccdf,
        )
    }
}
