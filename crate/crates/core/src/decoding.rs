//! Commitment strategies and the block-sequential scheduler.
//!
//! Each round, the denoiser is called once on every masked position of the
//! active block. A strategy then picks which of those predictions become
//! permanent. Every strategy commits at least one token per round, so a block
//! of length `n` finishes in at most `n` rounds.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::state::{CommitEvent, DecodeState, Prediction, StrategyConfig, Trace, Utterance};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectionResult {
    /// Chosen positions, most confident first.
    pub chosen: Vec<usize>,
    pub used_fallback: bool,
}

/// Descending confidence, then ascending position.
fn rank(a: &Prediction, b: &Prediction) -> Ordering {
    b.confidence
        .total_cmp(&a.confidence)
        .then(a.position.cmp(&b.position))
}

fn ranked(candidates: &[Prediction]) -> Result<Vec<&Prediction>> {
    if candidates.is_empty() {
        return Err(Error::invalid("no candidate predictions"));
    }
    let mut sorted: Vec<&Prediction> = candidates.iter().collect();
    sorted.sort_by(|a, b| rank(a, b));
    Ok(sorted)
}

fn top(sorted: &[&Prediction], n: usize, used_fallback: bool) -> SelectionResult {
    SelectionResult {
        chosen: sorted[..n].iter().map(|p| p.position).collect(),
        used_fallback,
    }
}

/// The `k` most confident candidates.
pub fn select_fixed_k(candidates: &[Prediction], k: usize) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::invalid("k must be at least 1"));
    }
    let sorted = ranked(candidates)?;
    Ok(top(&sorted, k.min(sorted.len()), false))
}

/// Every candidate with confidence strictly above `threshold`; the single
/// most confident one when none qualifies.
pub fn select_static(candidates: &[Prediction], threshold: f64) -> Result<SelectionResult> {
    let sorted = ranked(candidates)?;
    let passing = sorted.iter().take_while(|p| p.confidence > threshold).count();
    Ok(if passing == 0 {
        top(&sorted, 1, true)
    } else {
        top(&sorted, passing, false)
    })
}

/// Largest `k` with `(k + 1) * (1 - c_k) < factor` over the sorted
/// confidences `c_1 >= c_2 >= ...`; the top-1 when no `k` qualifies.
pub fn select_dynamic(candidates: &[Prediction], factor: f64) -> Result<SelectionResult> {
    let sorted = ranked(candidates)?;
    // The left side is nondecreasing in k, so the qualifying k form a prefix.
    let k = sorted
        .iter()
        .enumerate()
        .take_while(|(i, p)| (*i as f64 + 2.0) * (1.0 - p.confidence) < factor)
        .count();
    Ok(if k == 0 {
        top(&sorted, 1, true)
    } else {
        top(&sorted, k, false)
    })
}

pub fn select(candidates: &[Prediction], strategy: &StrategyConfig) -> Result<SelectionResult> {
    match *strategy {
        StrategyConfig::FixedK(k) => select_fixed_k(candidates, k),
        StrategyConfig::StaticThreshold(c) => select_static(candidates, c),
        StrategyConfig::DynamicThreshold(f) => select_dynamic(candidates, f),
    }
}

struct Recorder {
    events: Vec<CommitEvent>,
    first_confidence: Vec<Option<f64>>,
}

impl Recorder {
    fn new(len: usize) -> Self {
        Self {
            events: Vec::new(),
            first_confidence: vec![None; len],
        }
    }

    fn observe(&mut self, predictions: &[Prediction]) {
        for p in predictions {
            self.first_confidence[p.position].get_or_insert(p.confidence);
        }
    }

    fn commit(&mut self, state: &mut DecodeState, commits: Vec<Prediction>) -> Result<()> {
        let event = CommitEvent {
            round: state.round() + 1,
            block: state.active_block(),
            commits,
        };
        state.apply_commits(&event)?;
        self.events.push(event);
        Ok(())
    }

    fn finish(self, utterance: &Utterance, state: &DecodeState) -> Result<Trace> {
        let hypothesis = state
            .hypothesis()
            .ok_or_else(|| Error::violation("decode finished with masked cells"))?;
        Ok(Trace {
            utterance_id: utterance.id.clone(),
            model_calls: state.round(),
            events: self.events,
            hypothesis,
            first_confidence: self.first_confidence.into_iter().flatten().collect(),
        })
    }
}

/// Block-sequential diffusion decoding of one utterance.
pub fn decode_utterance<D: Denoiser + ?Sized>(
    utterance: &Utterance,
    denoiser: &D,
    strategy: &StrategyConfig,
    block_size: usize,
) -> Result<Trace> {
    strategy.validate()?;
    utterance.validate(denoiser.vocab_size())?;
    let mut state = DecodeState::new(utterance.len(), block_size)?;
    let mut rec = Recorder::new(utterance.len());

    while !state.is_complete() {
        let masked = state.active_masked();
        let predictions = denoiser.forward(utterance, &state, &masked)?;
        rec.observe(&predictions);
        let selection = select(&predictions, strategy)?;
        let commits = selection
            .chosen
            .iter()
            .map(|&pos| {
                *predictions
                    .iter()
                    .find(|p| p.position == pos)
                    .expect("selection drawn from candidates")
            })
            .collect();
        rec.commit(&mut state, commits)?;
    }
    rec.finish(utterance, &state)
}

/// Left-to-right reference decoding: one position per round, each conditioned
/// on the committed prefix.
pub fn decode_ar<D: Denoiser + ?Sized>(utterance: &Utterance, denoiser: &D) -> Result<Trace> {
    utterance.validate(denoiser.vocab_size())?;
    let mut state = DecodeState::new(utterance.len(), 1)?;
    let mut rec = Recorder::new(utterance.len());
    for position in 0..utterance.len() {
        let prediction = denoiser.predict(utterance, &state, position)?;
        rec.observe(std::slice::from_ref(&prediction));
        rec.commit(&mut state, vec![prediction])?;
    }
    rec.finish(utterance, &state)
}
