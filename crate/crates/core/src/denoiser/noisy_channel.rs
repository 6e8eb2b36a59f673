use serde::{Deserialize, Serialize};

use super::{check_masked, Denoiser, Distribution};
use crate::error::{Error, Result};
use crate::state::{DecodeState, Utterance};

const STOCHASTIC_TOL: f64 = 1e-9;

/// Parameters of the noisy-channel model: a confusion rate for the
/// observation channel and a bigram chain over tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoisyChannelConfig {
    pub epsilon: f64,
    /// Row-stochastic bigram matrix, `transition[prev][next]`.
    pub transition: Vec<Vec<f64>>,
    /// Distribution of the first token.
    pub initial: Vec<f64>,
    /// Additive constant mixed into every chain probability before
    /// renormalization; keeps every bigram reachable.
    pub smoothing: f64,
}

impl NoisyChannelConfig {
    /// Applies `smoothing` to raw chain rows and validates the result.
    pub fn new(
        epsilon: f64,
        transition: Vec<Vec<f64>>,
        initial: Vec<f64>,
        smoothing: f64,
    ) -> Result<Self> {
        if !(smoothing > 0.0 && smoothing.is_finite()) {
            return Err(Error::invalid(format!("smoothing must be positive, got {smoothing}")));
        }
        let smooth = |row: &[f64]| -> Vec<f64> {
            let denom = 1.0 + smoothing * row.len() as f64;
            row.iter().map(|p| (p + smoothing) / denom).collect()
        };
        let cfg = Self {
            epsilon,
            transition: transition.iter().map(|r| smooth(r)).collect(),
            initial: smooth(&initial),
            smoothing,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn vocab_size(&self) -> usize {
        self.initial.len()
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.initial.len();
        if v < 2 {
            return Err(Error::invalid("noisy channel needs a vocabulary of at least 2"));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::invalid(format!(
                "confusion rate must lie in [0, 1), got {}",
                self.epsilon
            )));
        }
        if self.transition.len() != v || self.transition.iter().any(|r| r.len() != v) {
            return Err(Error::invalid("transition matrix must be square over the vocabulary"));
        }
        let stochastic = |row: &[f64]| {
            row.iter().all(|p| *p >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= STOCHASTIC_TOL
        };
        if !stochastic(&self.initial) {
            return Err(Error::invalid("initial distribution must sum to 1"));
        }
        if let Some(i) = self.transition.iter().position(|r| !stochastic(r)) {
            return Err(Error::invalid(format!("transition row {i} must sum to 1")));
        }
        Ok(())
    }
}

/// Bigram chain plus symmetric confusion channel.
///
/// `p(v) ∝ A(o | v) · left(v) · right(v)` where `A(o|v) = 1-ε` when the
/// observation matches and `ε/(|V|-1)` otherwise. `left` is the start
/// distribution at position 0, the chain row of a committed left neighbour,
/// or uniform when that neighbour is masked; `right` is the chain column
/// into a committed right neighbour, otherwise uniform.
#[derive(Debug, Clone)]
pub struct NoisyChannel {
    config: NoisyChannelConfig,
}

impl NoisyChannel {
    pub fn new(config: NoisyChannelConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self { config })
    }

    pub fn config(&self) -> &NoisyChannelConfig {
        &self.config
    }

    fn channel(&self, observed: usize, v: usize) -> f64 {
        let eps = self.config.epsilon;
        if observed == v {
            1.0 - eps
        } else {
            eps / (self.vocab_size() - 1) as f64
        }
    }
}

impl Denoiser for NoisyChannel {
    fn vocab_size(&self) -> usize {
        self.config.vocab_size()
    }

    fn posterior(
        &self,
        utterance: &Utterance,
        state: &DecodeState,
        position: usize,
    ) -> Result<Distribution> {
        check_masked(utterance, state, position)?;
        let n = self.vocab_size();
        let uniform = 1.0 / n as f64;
        let observed = utterance.observations[position];
        let left = if position == 0 {
            Some(self.config.initial.as_slice())
        } else {
            state
                .token_at(position - 1)
                .map(|prev| self.config.transition[prev].as_slice())
        };
        let right = state.token_at(position + 1);

        let weights = (0..n)
            .map(|v| {
                let l = left.map_or(uniform, |row| row[v]);
                let r = right.map_or(uniform, |next| self.config.transition[v][next]);
                self.channel(observed, v) * l * r
            })
            .collect();
        Distribution::from_weights(weights)
    }
}
