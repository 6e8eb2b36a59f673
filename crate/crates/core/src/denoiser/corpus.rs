use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use rand::distr::weighted::WeightedIndex;
use rand_distr::{Distribution as _, Gamma};
use serde::{Deserialize, Serialize};

use super::{NoisyChannel, NoisyChannelConfig, Profile, ProfileConfig, SyntheticDenoiser};
use crate::error::{Error, Result};
use crate::seed;
use crate::state::{Utterance, Vocabulary};

const TRANSITION_STREAM: u64 = 0x7472_616e;
const INITIAL_STREAM: u64 = 0x696e_6974;
const UTTERANCE_STREAM: u64 = 0x7574_7472;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DenoiserKind {
    NoisyChannel,
    Profile(ProfileConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusConfig {
    pub num_utterances: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub vocab_size: usize,
    #[serde(default = "defaults::token_duration_s")]
    pub token_duration_s: f64,
    pub seed: u64,
    /// Confusion rate of the observation channel.
    #[serde(default = "defaults::epsilon")]
    pub epsilon: f64,
    /// Symmetric Dirichlet concentration of each bigram row.
    #[serde(default = "defaults::concentration")]
    pub concentration: f64,
    #[serde(default = "defaults::smoothing")]
    pub smoothing: f64,
    #[serde(default = "defaults::denoiser")]
    pub denoiser: DenoiserKind,
}

mod defaults {
    use super::DenoiserKind;

    pub fn token_duration_s() -> f64 {
        0.3
    }
    pub fn epsilon() -> f64 {
        0.2
    }
    pub fn concentration() -> f64 {
        0.2
    }
    pub fn smoothing() -> f64 {
        1e-3
    }
    pub fn denoiser() -> DenoiserKind {
        DenoiserKind::NoisyChannel
    }
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            num_utterances: 500,
            min_len: 16,
            max_len: 64,
            vocab_size: 4,
            token_duration_s: defaults::token_duration_s(),
            seed: 7,
            epsilon: defaults::epsilon(),
            concentration: defaults::concentration(),
            smoothing: defaults::smoothing(),
            denoiser: defaults::denoiser(),
        }
    }
}

impl CorpusConfig {
    pub fn validate(&self) -> Result<()> {
        if self.vocab_size < 2 {
            return Err(Error::invalid(format!(
                "vocabulary size must be at least 2, got {}",
                self.vocab_size
            )));
        }
        if self.min_len < 1 || self.min_len > self.max_len {
            return Err(Error::invalid(format!(
                "need 1 <= min_len <= max_len, got {}..={}",
                self.min_len, self.max_len
            )));
        }
        if !(self.token_duration_s > 0.0 && self.token_duration_s.is_finite()) {
            return Err(Error::invalid("token duration must be positive"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "confusion rate must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if !(self.concentration > 0.0) {
            return Err(Error::invalid("concentration must be positive"));
        }
        if let DenoiserKind::Profile(p) = &self.denoiser {
            p.validate()?;
        }
        Ok(())
    }

    pub fn channel_config(&self) -> Result<NoisyChannelConfig> {
        let transition = build_transition(
            seed::combine(&[self.seed, TRANSITION_STREAM]),
            self.vocab_size,
            self.concentration,
        )?;
        let mut rng = seed::stream(&[self.seed, INITIAL_STREAM]);
        let initial = dirichlet_row(&mut rng, self.vocab_size, self.concentration)?;
        NoisyChannelConfig::new(self.epsilon, transition, initial, self.smoothing)
    }

    pub fn build_denoiser(&self) -> Result<SyntheticDenoiser> {
        self.validate()?;
        Ok(match self.denoiser {
            DenoiserKind::NoisyChannel => {
                SyntheticDenoiser::NoisyChannel(NoisyChannel::new(self.channel_config()?)?)
            }
            DenoiserKind::Profile(p) => {
                SyntheticDenoiser::Profile(Profile::new(p, self.vocab_size, self.seed)?)
            }
        })
    }
}

fn dirichlet_row<R: Rng>(rng: &mut R, size: usize, concentration: f64) -> Result<Vec<f64>> {
    let gamma = Gamma::new(concentration, 1.0)
        .map_err(|e| Error::invalid(format!("concentration {concentration}: {e}")))?;
    let mut row: Vec<f64> = (0..size).map(|_| gamma.sample(rng)).collect();
    let total: f64 = row.iter().sum();
    if total > 0.0 && total.is_finite() {
        row.iter_mut().for_each(|p| *p /= total);
    } else {
        // every draw underflowed
        row.fill(1.0 / size as f64);
    }
    Ok(row)
}

/// Bigram matrix whose rows are independent symmetric Dirichlet draws.
pub fn build_transition(seed: u64, vocab_size: usize, concentration: f64) -> Result<Vec<Vec<f64>>> {
    if vocab_size < 2 {
        return Err(Error::invalid("vocabulary size must be at least 2"));
    }
    if !(concentration > 0.0) {
        return Err(Error::invalid("concentration must be positive"));
    }
    (0..vocab_size)
        .map(|row| {
            let mut rng = seed::stream(&[seed, row as u64]);
            dirichlet_row(&mut rng, vocab_size, concentration)
        })
        .collect()
}

/// Synthetic transcripts sampled from the bigram chain, with each observation
/// drawn from the confusion channel around its reference token.
pub fn generate_corpus(config: &CorpusConfig) -> Result<Vec<Utterance>> {
    config.validate()?;
    let channel = config.channel_config()?;
    let start = WeightedIndex::new(&channel.initial)
        .map_err(|e| Error::invalid(format!("initial distribution: {e}")))?;
    let rows = channel
        .transition
        .iter()
        .map(WeightedIndex::new)
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| Error::invalid(format!("transition row: {e}")))?;
    let v = config.vocab_size;

    let utterances = (0..config.num_utterances)
        .map(|i| {
            let mut rng = seed::stream(&[config.seed, UTTERANCE_STREAM, i as u64]);
            let len = rng.random_range(config.min_len..=config.max_len);
            let mut reference = Vec::with_capacity(len);
            reference.push(start.sample(&mut rng));
            for j in 1..len {
                let prev = reference[j - 1];
                reference.push(rows[prev].sample(&mut rng));
            }
            let observations = reference
                .iter()
                .map(|&r| {
                    if rng.random::<f64>() < config.epsilon {
                        // uniform over the other v-1 tokens
                        let other = rng.random_range(0..v - 1);
                        if other >= r {
                            other + 1
                        } else {
                            other
                        }
                    } else {
                        r
                    }
                })
                .collect();
            Utterance {
                id: format!("utt-{i:05}"),
                duration_s: len as f64 * config.token_duration_s,
                reference,
                observations,
            }
        })
        .collect();
    Ok(utterances)
}

/// A generated corpus together with the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub config: CorpusConfig,
    pub vocabulary: Vocabulary,
    pub utterances: Vec<Utterance>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Sidecar {
    vocabulary: Vocabulary,
    config: CorpusConfig,
}

impl Corpus {
    pub fn generate(config: CorpusConfig) -> Result<Self> {
        let utterances = generate_corpus(&config)?;
        Ok(Self {
            vocabulary: Vocabulary::synthetic(config.vocab_size)?,
            config,
            utterances,
        })
    }

    pub fn build_denoiser(&self) -> Result<SyntheticDenoiser> {
        self.config.build_denoiser()
    }

    /// Sidecar file sitting next to a corpus file: `c.jsonl` -> `c.meta.json`.
    pub fn sidecar_path(corpus: &Path) -> PathBuf {
        corpus.with_extension("meta.json")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_corpus(path, &self.utterances)?;
        let sidecar = Sidecar {
            vocabulary: self.vocabulary.clone(),
            config: self.config.clone(),
        };
        let meta = Self::sidecar_path(path);
        let json = serde_json::to_string_pretty(&sidecar)
            .map_err(|e| Error::format(&meta, e))?;
        std::fs::write(&meta, json + "\n").map_err(|e| Error::io(&meta, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let meta = Self::sidecar_path(path);
        let text = std::fs::read_to_string(&meta).map_err(|e| Error::io(&meta, e))?;
        let sidecar: Sidecar = serde_json::from_str(&text).map_err(|e| Error::format(&meta, e))?;
        sidecar.config.validate()?;
        if sidecar.vocabulary.size() != sidecar.config.vocab_size {
            return Err(Error::format(&meta, "vocabulary size disagrees with config"));
        }
        let utterances = read_corpus(path)?;
        for u in &utterances {
            u.validate(sidecar.vocabulary.size())
                .map_err(|e| Error::format(path, e))?;
        }
        Ok(Self {
            config: sidecar.config,
            vocabulary: sidecar.vocabulary,
            utterances,
        })
    }
}

pub fn write_corpus(path: &Path, utterances: &[Utterance]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut out = BufWriter::new(file);
    for u in utterances {
        serde_json::to_writer(&mut out, u).map_err(|e| Error::format(path, e))?;
        out.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    out.flush().map_err(|e| Error::io(path, e))
}

pub fn read_corpus(path: &Path) -> Result<Vec<Utterance>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut utterances = Vec::new();
    for (lineno, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let u: Utterance = serde_json::from_str(&line)
            .map_err(|e| Error::format(path, format!("line {}: {e}", lineno + 1)))?;
        utterances.push(u);
    }
    Ok(utterances)
}
