use rand::Rng;
use rand_distr::{Beta, Distribution as _};
use serde::{Deserialize, Serialize};

use super::{check_masked, Denoiser, Distribution};
use crate::error::{Error, Result};
use crate::seed;
use crate::state::{DecodeState, Utterance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileConfig {
    pub alpha: f64,
    pub beta: f64,
    /// Sharpening rate per committed neighbour.
    pub context_gain: f64,
    /// When set, the predicted token is the reference with probability equal
    /// to the base confidence and a decoy otherwise.
    pub calibrated: bool,
}

impl ProfileConfig {
    /// Confidence mass concentrated near 1, as seen in read-speech
    /// transcription.
    pub const SKEWED: ProfileConfig = ProfileConfig {
        alpha: 1.85,
        beta: 0.043,
        context_gain: 1.0,
        calibrated: true,
    };

    /// Broad confidence spread, as seen in multi-step reasoning text.
    pub const DISPERSED: ProfileConfig = ProfileConfig {
        alpha: 2.53,
        beta: 0.403,
        context_gain: 1.0,
        calibrated: true,
    };

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::invalid(format!(
                "Beta shape parameters must be positive, got ({}, {})",
                self.alpha, self.beta
            )));
        }
        if !(self.context_gain >= 0.0 && self.context_gain.is_finite()) {
            return Err(Error::invalid(format!(
                "context gain must be nonnegative, got {}",
                self.context_gain
            )));
        }
        Ok(())
    }
}

/// Confidence-profile model.
///
/// Each `(seed, utterance, position)` key yields a fixed base confidence
/// `c0 ~ Beta(alpha, beta)`. With `n` committed neighbours the effective
/// confidence is `1 - (1 - c0) * exp(-context_gain * n)`; that mass goes to
/// the designated token and the rest is spread uniformly.
#[derive(Debug, Clone)]
pub struct Profile {
    config: ProfileConfig,
    law: Beta<f64>,
    vocab_size: usize,
    seed: u64,
}

impl Profile {
    pub fn new(config: ProfileConfig, vocab_size: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        if vocab_size < 2 {
            return Err(Error::invalid("profile model needs a vocabulary of at least 2"));
        }
        let law = Beta::new(config.alpha, config.beta)
            .map_err(|e| Error::invalid(format!("Beta law: {e}")))?;
        Ok(Self {
            config,
            law,
            vocab_size,
            seed,
        })
    }

    pub fn config(&self) -> &ProfileConfig {
        &self.config
    }

    /// Base confidence and designated token at a position; independent of
    /// the decode round.
    pub fn draw(&self, utterance: &Utterance, position: usize) -> (f64, usize) {
        let mut rng = seed::stream(&[
            self.seed,
            seed::hash_str(&utterance.id),
            position as u64,
        ]);
        let c0 = self.law.sample(&mut rng);
        let c0 = if c0.is_nan() { 1.0 } else { c0.clamp(0.0, 1.0) };
        let u: f64 = rng.random();
        let reference = utterance.reference[position];
        let token = if self.config.calibrated && u >= c0 {
            (reference + 1) % self.vocab_size
        } else {
            reference
        };
        (c0, token)
    }
}

impl Denoiser for Profile {
    fn vocab_size(&self) -> usize {
        self.vocab_size
    }

    fn posterior(
        &self,
        utterance: &Utterance,
        state: &DecodeState,
        position: usize,
    ) -> Result<Distribution> {
        check_masked(utterance, state, position)?;
        let (c0, token) = self.draw(utterance, position);
        let neighbours = [position.checked_sub(1), Some(position + 1)]
            .into_iter()
            .flatten()
            .filter(|&p| state.token_at(p).is_some())
            .count();
        let c = 1.0 - (1.0 - c0) * (-self.config.context_gain * neighbours as f64).exp();
        let rest = (1.0 - c) / (self.vocab_size - 1) as f64;
        let mut weights = vec![rest; self.vocab_size];
        weights[token] = c;
        Distribution::from_weights(weights)
    }
}
