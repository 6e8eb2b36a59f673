//! Sweep execution, persistence and post-hoc analysis.
//!
//! A sweep decodes every utterance of a corpus under every
//! (strategy, block size) cell, plus the left-to-right reference. Raw results
//! are written as CSV (`runs.csv`, `commits.csv`, `confidences.csv`) together
//! with `sweep.json`; [`analyze`] turns them into the summary tables that the
//! plotting step consumes.

pub mod analyze;
pub mod io;
pub mod plot;

use std::fmt;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::decoding::{decode_ar, decode_utterance};
use crate::denoiser::{Corpus, CorpusConfig, Denoiser};
use crate::error::{Error, Result};
use crate::metrics::{rtf_proxy, wer, CostModel};
use crate::state::{DecodeState, StrategyConfig, Trace};

pub use analyze::{analyze, Analysis};
pub use io::{CommitRow, ConfidenceRow, RunRow, SweepData, SweepMeta};

/// Environment variable that overrides the master seed of a sweep.
pub const SEED_ENV: &str = "DIFFUDEC_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum CorpusSource {
    /// Corpus JSONL file with its `.meta.json` sidecar.
    Path(PathBuf),
    Generate(CorpusConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default = "defaults::label")]
    pub label: String,
    pub corpus: CorpusSource,
    #[serde(default = "defaults::block_sizes")]
    pub block_sizes: Vec<usize>,
    #[serde(default = "defaults::strategies")]
    pub strategies: Vec<StrategyConfig>,
    #[serde(default)]
    pub cost: CostModel,
    /// Positions counted by round-wise progress.
    #[serde(default = "defaults::horizon")]
    pub horizon: usize,
    /// Utterances shorter than this are left out of round-wise analysis.
    #[serde(default = "defaults::horizon")]
    pub min_tokens: usize,
    /// Replaces the seed of a generated corpus when set.
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "defaults::out_dir")]
    pub out_dir: PathBuf,
}

mod defaults {
    use std::path::PathBuf;

    use crate::state::StrategyConfig::{self, *};

    pub fn label() -> String {
        "default".into()
    }
    pub fn block_sizes() -> Vec<usize> {
        vec![4, 16, 64]
    }
    pub fn strategies() -> Vec<StrategyConfig> {
        vec![
            FixedK(4),
            FixedK(8),
            FixedK(16),
            FixedK(32),
            FixedK(64),
            FixedK(128),
            StaticThreshold(0.8),
            StaticThreshold(0.9),
            StaticThreshold(0.95),
            DynamicThreshold(1.0),
            DynamicThreshold(0.2),
            DynamicThreshold(0.05),
        ]
    }
    pub fn horizon() -> usize {
        32
    }
    pub fn out_dir() -> PathBuf {
        PathBuf::from("out")
    }
}

impl SweepConfig {
    /// Default grid over the default noisy-channel corpus.
    pub fn with_corpus(corpus: CorpusSource) -> Self {
        Self {
            label: defaults::label(),
            corpus,
            block_sizes: defaults::block_sizes(),
            strategies: defaults::strategies(),
            cost: CostModel::default(),
            horizon: defaults::horizon(),
            min_tokens: defaults::horizon(),
            seed: None,
            out_dir: defaults::out_dir(),
        }
    }

    /// Parses a JSON config. Relative paths are resolved against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: SweepConfig =
            serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(base) = base {
            if let CorpusSource::Path(p) = &mut cfg.corpus {
                if p.is_relative() {
                    *p = base.join(&*p);
                }
            }
            if cfg.out_dir.is_relative() {
                cfg.out_dir = base.join(&cfg.out_dir);
            }
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text, path.parent())
    }

    /// Applies `DIFFUDEC_SEED` if it is set.
    pub fn apply_env(&mut self) -> Result<()> {
        if let Ok(v) = std::env::var(SEED_ENV) {
            let seed = v
                .trim()
                .parse()
                .map_err(|e| Error::Config(format!("{SEED_ENV}={v:?}: {e}")))?;
            self.seed = Some(seed);
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.block_sizes.is_empty() {
            return Err(Error::Config("block_sizes is empty".into()));
        }
        if self.strategies.is_empty() {
            return Err(Error::Config("strategies is empty".into()));
        }
        if let Some(b) = self.block_sizes.iter().find(|&&b| b == 0) {
            return Err(Error::Config(format!("cell with block size {b}: must be at least 1")));
        }
        for s in &self.strategies {
            s.validate()
                .map_err(|e| Error::Config(format!("cell {s}: {e}")))?;
        }
        if self.horizon == 0 {
            return Err(Error::Config("horizon must be at least 1".into()));
        }
        self.cost
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        if self.label.contains(['/', ',']) {
            return Err(Error::Config(format!("label {:?} may not contain '/' or ','", self.label)));
        }
        Ok(())
    }

    pub fn load_corpus(&self) -> Result<Corpus> {
        match &self.corpus {
            CorpusSource::Path(p) => Corpus::load(p),
            CorpusSource::Generate(c) => {
                let mut c = c.clone();
                if let Some(seed) = self.seed {
                    c.seed = seed;
                }
                Corpus::generate(c)
            }
        }
    }
}

/// What produced a run: the left-to-right reference or a diffusion strategy.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decoder {
    Ar,
    Diffusion(StrategyConfig),
}

impl Decoder {
    pub fn kind(&self) -> &'static str {
        match self {
            Decoder::Ar => "ar",
            Decoder::Diffusion(s) => s.kind(),
        }
    }

    pub fn param(&self) -> String {
        match self {
            Decoder::Ar => String::new(),
            Decoder::Diffusion(s) => s.param(),
        }
    }
}

impl fmt::Display for Decoder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decoder::Ar => f.write_str("ar"),
            Decoder::Diffusion(s) => s.fmt(f),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub utterance_id: String,
    pub decoder: Decoder,
    pub block: usize,
    pub length: usize,
    pub duration_s: f64,
    pub wer: f64,
    pub rtf: f64,
    pub rounds: usize,
    /// Index into [`SweepOutput::traces`].
    pub trace: usize,
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub meta: SweepMeta,
    /// Sorted by cell (AR first, then strategies in config order, block sizes
    /// in config order), then by utterance order in the corpus.
    pub records: Vec<RunRecord>,
    pub traces: Vec<Trace>,
    /// Per utterance, the first-round confidences of a fully parallel pass.
    pub confidences: Vec<(String, Vec<f64>)>,
}

/// Decodes the whole grid. `threads` of `None` uses rayon's default pool
/// size; the output does not depend on it.
pub fn run_sweep(config: &SweepConfig, threads: Option<usize>) -> Result<SweepOutput> {
    config.validate()?;
    let corpus = config.load_corpus()?;
    let denoiser = corpus.build_denoiser()?;

    let mut cells = vec![(Decoder::Ar, 1)];
    for s in &config.strategies {
        for &b in &config.block_sizes {
            cells.push((Decoder::Diffusion(*s), b));
        }
    }

    let decode_one = |u: &crate::state::Utterance| -> Result<(Vec<(Trace, f64)>, Vec<f64>)> {
        let mut out = Vec::with_capacity(cells.len());
        for (decoder, block) in &cells {
            let trace = match decoder {
                Decoder::Ar => decode_ar(u, &denoiser)?,
                Decoder::Diffusion(s) => decode_utterance(u, &denoiser, s, *block)
                    .map_err(|e| Error::Config(format!("cell {decoder} B={block}: {e}")))?,
            };
            let w = wer(&u.reference, &trace.hypothesis)?;
            out.push((trace, w));
        }
        let fresh = DecodeState::new(u.len(), u.len())?;
        let all: Vec<usize> = (0..u.len()).collect();
        let confidences = denoiser
            .forward(u, &fresh, &all)?
            .into_iter()
            .map(|p| p.confidence)
            .collect();
        Ok((out, confidences))
    };

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let per_utt: Vec<_> = pool.install(|| {
        corpus
            .utterances
            .par_iter()
            .map(decode_one)
            .collect::<Result<Vec<_>>>()
    })?;

    let mut records = Vec::with_capacity(cells.len() * corpus.utterances.len());
    let mut traces = Vec::with_capacity(records.capacity());
    let mut per_utt: Vec<_> = per_utt.into_iter().map(|(runs, c)| (runs.into_iter(), c)).collect();
    for (decoder, block) in &cells {
        for (u, (runs, _)) in corpus.utterances.iter().zip(per_utt.iter_mut()) {
            let (trace, w) = runs.next().expect("one run per cell");
            records.push(RunRecord {
                utterance_id: u.id.clone(),
                decoder: *decoder,
                block: *block,
                length: u.len(),
                duration_s: u.duration_s,
                wer: w,
                rtf: rtf_proxy(&trace, &config.cost, u.duration_s)?,
                rounds: trace.rounds(),
                trace: traces.len(),
            });
            traces.push(trace);
        }
    }
    let confidences = corpus
        .utterances
        .iter()
        .zip(per_utt)
        .map(|(u, (_, c))| (u.id.clone(), c))
        .collect();

    Ok(SweepOutput {
        meta: SweepMeta {
            label: config.label.clone(),
            corpus_seed: corpus.config.seed,
            num_utterances: corpus.utterances.len(),
            block_sizes: config.block_sizes.clone(),
            strategies: config.strategies.clone(),
            cost: config.cost,
            horizon: config.horizon,
            min_tokens: config.min_tokens,
        },
        records,
        traces,
        confidences,
    })
}

impl SweepOutput {
    pub fn records_for<'a>(
        &'a self,
        decoder: Decoder,
        block: usize,
    ) -> impl Iterator<Item = &'a RunRecord> + 'a {
        self.records
            .iter()
            .filter(move |r| r.decoder == decoder && (r.decoder == Decoder::Ar || r.block == block))
    }

    pub fn to_data(&self) -> SweepData {
        io::to_data(self)
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        self.to_data().write(dir)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::denoiser::CorpusConfig;

    fn tiny(n: usize) -> SweepConfig {
        let mut cfg = SweepConfig::with_corpus(CorpusSource::Generate(CorpusConfig {
            num_utterances: n,
            min_len: 6,
            max_len: 12,
            vocab_size: 8,
            seed: 3,
            ..CorpusConfig::default()
        }));
        cfg.block_sizes = vec![2, 8];
        cfg.strategies = vec![StrategyConfig::FixedK(2), StrategyConfig::StaticThreshold(0.9)];
        cfg
    }

    #[test]
    fn record_counts() {
        let out = run_sweep(&tiny(10), Some(1)).unwrap();
        assert_eq!(out.records.len(), 50);
        assert_eq!(out.records.iter().filter(|r| r.decoder == Decoder::Ar).count(), 10);
        let mut keys: Vec<_> = out
            .records
            .iter()
            .map(|r| (r.utterance_id.clone(), r.decoder.to_string(), r.block))
            .collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), 50);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let a = run_sweep(&tiny(12), Some(1)).unwrap();
        let b = run_sweep(&tiny(12), Some(4)).unwrap();
        assert_eq!(a.records, b.records);
        assert_eq!(a.traces, b.traces);
    }

    #[test]
    fn invalid_cells_named() {
        let mut cfg = tiny(2);
        cfg.block_sizes.push(0);
        let err = run_sweep(&cfg, None).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("block size 0")), "{err}");

        let mut cfg = tiny(2);
        cfg.strategies.push(StrategyConfig::StaticThreshold(1.5));
        let err = run_sweep(&cfg, None).unwrap_err();
        assert!(matches!(&err, Error::Config(m) if m.contains("static:1.5")), "{err}");
    }

    #[test]
    fn unreadable_corpus_is_io_error() {
        let cfg = SweepConfig::with_corpus(CorpusSource::Path("/nonexistent/c.jsonl".into()));
        let err = run_sweep(&cfg, None).unwrap_err();
        assert!(err.is_io());
        assert!(err.to_string().contains("/nonexistent/c.meta.json"));
    }

    #[test]
    fn config_rejects_unknown_keys() {
        let err = SweepConfig::from_json(r#"{"corpus": {"path": "c.jsonl"}, "bogus": 1}"#, None);
        assert!(matches!(err, Err(Error::Config(_))));
        let ok = SweepConfig::from_json(
            r#"{"corpus": {"path": "c.jsonl"}, "strategies": ["fixed:4", "static:0.9"]}"#,
            Some(Path::new("/tmp/x")),
        )
        .unwrap();
        assert_eq!(ok.corpus, CorpusSource::Path("/tmp/x/c.jsonl".into()));
        assert_eq!(ok.block_sizes, vec![4, 16, 64]);
        assert_eq!(ok.strategies.len(), 2);
    }
}
