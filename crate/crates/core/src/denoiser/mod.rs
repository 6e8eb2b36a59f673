//! Per-position posterior models that stand in for a full speech-conditioned
//! denoising network, plus the synthetic corpus they are evaluated on.
//!
//! Two analytic models are provided:
//!
//! - [`NoisyChannel`]: a bigram language model combined with a symmetric
//!   confusion channel over the observed token. Committed neighbours on
//!   either side condition the posterior, emulating bidirectional context.
//! - [`Profile`]: a model whose confidence at each position is drawn from a
//!   Beta law and sharpened by committed neighbours. Used to reproduce
//!   skewed (speech-like) and dispersed (reasoning-like) confidence profiles.

mod corpus;
mod noisy_channel;
mod profile;

pub use corpus::{
    build_transition, generate_corpus, read_corpus, write_corpus, Corpus, CorpusConfig,
    DenoiserKind,
};
pub use noisy_channel::{NoisyChannel, NoisyChannelConfig};
pub use profile::{Profile, ProfileConfig};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::state::{DecodeState, Prediction, Utterance};

/// Probability vector over the vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Distribution {
    probabilities: Vec<f64>,
}

impl Distribution {
    /// Normalizes nonnegative weights into a distribution.
    pub fn from_weights(mut weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(Error::invalid("distribution weights must be finite and nonnegative"));
        }
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) {
            return Err(Error::invalid("distribution weights sum to zero"));
        }
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self {
            probabilities: weights,
        })
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probabilities
    }

    /// Highest-probability token and its mass; the lowest index wins ties.
    pub fn argmax(&self) -> (usize, f64) {
        let mut best = (0, self.probabilities[0]);
        for (i, &p) in self.probabilities.iter().enumerate().skip(1) {
            if p > best.1 {
                best = (i, p);
            }
        }
        best
    }
}

/// A model that scores every vocabulary item at a masked position given the
/// utterance evidence and the current committed context.
pub trait Denoiser: Send + Sync {
    fn vocab_size(&self) -> usize;

    fn posterior(
        &self,
        utterance: &Utterance,
        state: &DecodeState,
        position: usize,
    ) -> Result<Distribution>;

    fn predict(
        &self,
        utterance: &Utterance,
        state: &DecodeState,
        position: usize,
    ) -> Result<Prediction> {
        let (token, confidence) = self.posterior(utterance, state, position)?.argmax();
        Ok(Prediction::new(position, token, confidence))
    }

    /// One model call: predictions for every listed position against the
    /// same state.
    fn forward(
        &self,
        utterance: &Utterance,
        state: &DecodeState,
        positions: &[usize],
    ) -> Result<Vec<Prediction>> {
        positions
            .iter()
            .map(|&p| self.predict(utterance, state, p))
            .collect()
    }
}

pub(crate) fn check_masked(utterance: &Utterance, state: &DecodeState, position: usize) -> Result<()> {
    if state.len() != utterance.len() {
        return Err(Error::invalid(format!(
            "state length {} does not match utterance {} of length {}",
            state.len(),
            utterance.id,
            utterance.len()
        )));
    }
    match state.cell(position) {
        Some(c) if c.is_masked() => Ok(()),
        Some(_) => Err(Error::invalid(format!("position {position} is not masked"))),
        None => Err(Error::invalid(format!(
            "position {position} outside sequence of length {}",
            state.len()
        ))),
    }
}

/// Either synthetic model, chosen at corpus-configuration time.
#[derive(Debug, Clone)]
pub enum SyntheticDenoiser {
    NoisyChannel(NoisyChannel),
    Profile(Profile),
}

impl Denoiser for SyntheticDenoiser {
    fn vocab_size(&self) -> usize {
        match self {
            SyntheticDenoiser::NoisyChannel(d) => d.vocab_size(),
            SyntheticDenoiser::Profile(d) => d.vocab_size(),
        }
    }

    fn posterior(&self, u: &Utterance, s: &DecodeState, p: usize) -> Result<Distribution> {
        match self {
            SyntheticDenoiser::NoisyChannel(d) => d.posterior(u, s, p),
            SyntheticDenoiser::Profile(d) => d.posterior(u, s, p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_tie_breaks_low() {
        let d = Distribution::from_weights(vec![0.5, 0.5]).unwrap();
        assert_eq!(d.argmax(), (0, 0.5));
        let d = Distribution::from_weights(vec![0.1, 0.45, 0.45]).unwrap();
        assert_eq!(d.argmax().0, 1);
    }

    #[test]
    fn rejects_degenerate_weights() {
        assert!(Distribution::from_weights(vec![0.0, 0.0]).is_err());
        assert!(Distribution::from_weights(vec![-1.0, 2.0]).is_err());
        assert!(Distribution::from_weights(vec![f64::NAN, 1.0]).is_err());
    }
}
