//! CSV/JSON persistence of sweep results.
//!
//! | file              | columns                                                                 |
//! |-------------------|-------------------------------------------------------------------------|
//! | `sweep.json`      | [`SweepMeta`]                                                           |
//! | `runs.csv`        | label,utterance,strategy,param,block,length,duration_s,rounds,wer,rtf   |
//! | `commits.csv`     | label,utterance,strategy,param,block,round,position,token,confidence,nll|
//! | `confidences.csv` | label,utterance,position,confidence                                     |

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::SweepOutput;
use crate::error::{Error, Result};
use crate::metrics::CostModel;
use crate::state::StrategyConfig;

pub const META_FILE: &str = "sweep.json";
pub const RUNS_FILE: &str = "runs.csv";
pub const COMMITS_FILE: &str = "commits.csv";
pub const CONFIDENCES_FILE: &str = "confidences.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepMeta {
    pub label: String,
    pub corpus_seed: u64,
    pub num_utterances: usize,
    pub block_sizes: Vec<usize>,
    pub strategies: Vec<StrategyConfig>,
    pub cost: CostModel,
    pub horizon: usize,
    pub min_tokens: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub label: String,
    pub utterance: String,
    pub strategy: String,
    pub param: String,
    pub block: usize,
    pub length: usize,
    pub duration_s: f64,
    pub rounds: usize,
    pub wer: f64,
    pub rtf: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitRow {
    pub label: String,
    pub utterance: String,
    pub strategy: String,
    pub param: String,
    pub block: usize,
    pub round: usize,
    pub position: usize,
    pub token: usize,
    pub confidence: f64,
    pub nll: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceRow {
    pub label: String,
    pub utterance: String,
    pub position: usize,
    pub confidence: f64,
}

/// Raw sweep results in their on-disk shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepData {
    pub meta: SweepMeta,
    pub runs: Vec<RunRow>,
    pub commits: Vec<CommitRow>,
    pub confidences: Vec<ConfidenceRow>,
}

pub(super) fn to_data(out: &SweepOutput) -> SweepData {
    let label = &out.meta.label;
    let runs = out
        .records
        .iter()
        .map(|r| RunRow {
            label: label.clone(),
            utterance: r.utterance_id.clone(),
            strategy: r.decoder.kind().to_string(),
            param: r.decoder.param(),
            block: r.block,
            length: r.length,
            duration_s: r.duration_s,
            rounds: r.rounds,
            wer: r.wer,
            rtf: r.rtf,
        })
        .collect();
    let commits = out
        .records
        .iter()
        .flat_map(|r| {
            let trace = &out.traces[r.trace];
            trace.events.iter().flat_map(move |ev| {
                ev.commits.iter().map(move |p| CommitRow {
                    label: label.clone(),
                    utterance: r.utterance_id.clone(),
                    strategy: r.decoder.kind().to_string(),
                    param: r.decoder.param(),
                    block: r.block,
                    round: ev.round,
                    position: p.position,
                    token: p.token,
                    confidence: p.confidence,
                    nll: p.nll,
                })
            })
        })
        .collect();
    let confidences = out
        .confidences
        .iter()
        .flat_map(|(id, cs)| {
            cs.iter().enumerate().map(move |(position, &confidence)| ConfidenceRow {
                label: label.clone(),
                utterance: id.clone(),
                position,
                confidence,
            })
        })
        .collect();
    SweepData {
        meta: out.meta.clone(),
        runs,
        commits,
        confidences,
    }
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes rows with an explicit header; used when a table may be empty.
pub fn write_csv_with_header<T: Serialize>(path: &Path, header: &[&str], rows: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(BufWriter::new(file));
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    csv::Reader::from_reader(file)
        .deserialize()
        .map(|r| r.map_err(|e| csv_error(path, e)))
        .collect()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::format(path, format!("{other:?}")),
    }
}

impl SweepData {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let meta = dir.join(META_FILE);
        let json = serde_json::to_string_pretty(&self.meta).map_err(|e| Error::format(&meta, e))?;
        let mut f = File::create(&meta).map_err(|e| Error::io(&meta, e))?;
        writeln!(f, "{json}").map_err(|e| Error::io(&meta, e))?;
        write_csv(&dir.join(RUNS_FILE), &self.runs)?;
        write_csv(&dir.join(COMMITS_FILE), &self.commits)?;
        write_csv(&dir.join(CONFIDENCES_FILE), &self.confidences)
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let meta_path = dir.join(META_FILE);
        let text = std::fs::read_to_string(&meta_path).map_err(|e| Error::io(&meta_path, e))?;
        let meta = serde_json::from_str(&text).map_err(|e| Error::format(&meta_path, e))?;
        Ok(Self {
            meta,
            runs: read_csv(&dir.join(RUNS_FILE))?,
            commits: read_csv(&dir.join(COMMITS_FILE))?,
            confidences: read_csv(&dir.join(CONFIDENCES_FILE))?,
        })
    }
}
