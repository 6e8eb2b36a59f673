//! Shared domain types: vocabulary, utterances, per-position decode state,
//! predictions, commit events and decode traces.
//!
//! A [`DecodeState`] is the only mutable object in a decode run. It tracks
//! which cells are still masked, which block is active and how many rounds
//! (model calls) have been issued. Cells only ever move from `Masked` to
//! `Committed`.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered set of distinct token strings. A token is referred to by its index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
}

impl Vocabulary {
    pub fn new(tokens: Vec<String>) -> Result<Self> {
        if tokens.len() < 2 {
            return Err(Error::invalid(format!(
                "vocabulary needs at least 2 tokens, got {}",
                tokens.len()
            )));
        }
        let mut seen = HashSet::with_capacity(tokens.len());
        for t in &tokens {
            if !seen.insert(t.as_str()) {
                return Err(Error::invalid(format!("duplicate vocabulary token {t:?}")));
            }
        }
        Ok(Self { tokens })
    }

    /// Vocabulary of `size` placeholder tokens `t0, t1, ...`.
    pub fn synthetic(size: usize) -> Result<Self> {
        Self::new((0..size).map(|i| format!("t{i}")).collect())
    }

    pub fn size(&self) -> usize {
        self.tokens.len()
    }

    pub fn token(&self, index: usize) -> Option<&str> {
        self.tokens.get(index).map(String::as_str)
    }

    pub fn index_of(&self, token: &str) -> Option<usize> {
        self.tokens.iter().position(|t| t == token)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = Error;

    fn try_from(tokens: Vec<String>) -> Result<Self> {
        Self::new(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.tokens
    }
}

/// A reference transcript plus the synthetic acoustic evidence observed for
/// each position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Utterance {
    pub id: String,
    pub reference: Vec<usize>,
    pub observations: Vec<usize>,
    pub duration_s: f64,
}

impl Utterance {
    pub fn len(&self) -> usize {
        self.reference.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reference.is_empty()
    }

    pub fn validate(&self, vocab_size: usize) -> Result<()> {
        if self.reference.is_empty() {
            return Err(Error::invalid(format!("utterance {}: empty reference", self.id)));
        }
        if self.reference.len() != self.observations.len() {
            return Err(Error::invalid(format!(
                "utterance {}: reference length {} != observation length {}",
                self.id,
                self.reference.len(),
                self.observations.len()
            )));
        }
        if let Some(&bad) = self
            .reference
            .iter()
            .chain(&self.observations)
            .find(|&&t| t >= vocab_size)
        {
            return Err(Error::invalid(format!(
                "utterance {}: token index {bad} outside vocabulary of size {vocab_size}",
                self.id
            )));
        }
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            return Err(Error::invalid(format!(
                "utterance {}: duration must be positive, got {}",
                self.id, self.duration_s
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CellState {
    Masked,
    Committed { token: usize, round: usize, nll: f64 },
}

impl CellState {
    pub fn is_masked(&self) -> bool {
        matches!(self, CellState::Masked)
    }

    pub fn token(&self) -> Option<usize> {
        match *self {
            CellState::Committed { token, .. } => Some(token),
            CellState::Masked => None,
        }
    }
}

/// The model's argmax guess at one masked position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub position: usize,
    pub token: usize,
    pub confidence: f64,
    pub nll: f64,
}

impl Prediction {
    /// Builds a prediction, deriving the NLL from the confidence.
    pub fn new(position: usize, token: usize, confidence: f64) -> Self {
        Self {
            position,
            token,
            confidence,
            nll: -confidence.ln(),
        }
    }
}

/// Tokens committed in one round, all inside one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommitEvent {
    pub round: usize,
    pub block: usize,
    pub commits: Vec<Prediction>,
}

/// Per-position decode state of a single utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeState {
    cells: Vec<CellState>,
    block_size: usize,
    active_block: usize,
    round: usize,
}

impl DecodeState {
    /// All `len` cells masked, split into blocks of `block_size`. The last
    /// block is shorter when `block_size` does not divide `len`.
    pub fn new(len: usize, block_size: usize) -> Result<Self> {
        if len == 0 {
            return Err(Error::invalid("sequence length must be at least 1"));
        }
        if block_size == 0 {
            return Err(Error::invalid("block size must be at least 1"));
        }
        Ok(Self {
            cells: vec![CellState::Masked; len],
            block_size,
            active_block: 0,
            round: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    pub fn round(&self) -> usize {
        self.round
    }

    pub fn active_block(&self) -> usize {
        self.active_block
    }

    pub fn cells(&self) -> &[CellState] {
        &self.cells
    }

    pub fn cell(&self, position: usize) -> Option<&CellState> {
        self.cells.get(position)
    }

    /// Committed token at `position`, `None` if masked or out of range.
    pub fn token_at(&self, position: usize) -> Option<usize> {
        self.cells.get(position).and_then(CellState::token)
    }

    pub fn num_blocks(&self) -> usize {
        self.cells.len().div_ceil(self.block_size)
    }

    pub fn block_range(&self, block: usize) -> Range<usize> {
        let start = (block * self.block_size).min(self.cells.len());
        let end = (start + self.block_size).min(self.cells.len());
        start..end
    }

    pub fn block_of(&self, position: usize) -> usize {
        position / self.block_size
    }

    /// Range of the active block, or `None` once every cell is committed.
    pub fn active_range(&self) -> Option<Range<usize>> {
        (!self.is_complete()).then(|| self.block_range(self.active_block))
    }

    /// Masked positions of the active block in ascending order.
    pub fn active_masked(&self) -> Vec<usize> {
        self.active_range()
            .map(|r| r.filter(|&p| self.cells[p].is_masked()).collect())
            .unwrap_or_default()
    }

    pub fn committed_count(&self) -> usize {
        self.cells.iter().filter(|c| !c.is_masked()).count()
    }

    pub fn is_complete(&self) -> bool {
        self.active_block >= self.num_blocks()
    }

    /// Records one round of commits. The state is left untouched on error.
    pub fn apply_commits(&mut self, event: &CommitEvent) -> Result<()> {
        let Some(active) = self.active_range() else {
            return Err(Error::violation("decode already complete"));
        };
        if event.commits.is_empty() {
            return Err(Error::violation(format!(
                "round {} commits no tokens",
                event.round
            )));
        }
        if event.round != self.round + 1 {
            return Err(Error::violation(format!(
                "event round {} does not follow round {}",
                event.round, self.round
            )));
        }
        if event.block != self.active_block {
            return Err(Error::violation(format!(
                "event targets block {} but block {} is active",
                event.block, self.active_block
            )));
        }
        let mut seen = HashSet::with_capacity(event.commits.len());
        for p in &event.commits {
            if !active.contains(&p.position) {
                return Err(Error::violation(format!(
                    "position {} outside active block {:?}",
                    p.position, active
                )));
            }
            if !self.cells[p.position].is_masked() {
                return Err(Error::violation(format!(
                    "position {} is already committed",
                    p.position
                )));
            }
            if !seen.insert(p.position) {
                return Err(Error::violation(format!(
                    "position {} committed twice in round {}",
                    p.position, event.round
                )));
            }
        }

        for p in &event.commits {
            self.cells[p.position] = CellState::Committed {
                token: p.token,
                round: event.round,
                nll: p.nll,
            };
        }
        self.round += 1;
        while !self.is_complete()
            && self
                .block_range(self.active_block)
                .all(|i| !self.cells[i].is_masked())
        {
            self.active_block += 1;
        }
        Ok(())
    }

    /// Fraction of the first `horizon` positions that are committed, capped
    /// at 1.
    pub fn normalized_progress(&self, horizon: usize) -> Result<f64> {
        if horizon == 0 {
            return Err(Error::invalid("progress horizon must be at least 1"));
        }
        let committed = self
            .cells
            .iter()
            .take(horizon)
            .filter(|c| !c.is_masked())
            .count();
        Ok((committed as f64 / horizon as f64).min(1.0))
    }

    /// Committed tokens in position order; `None` while any cell is masked.
    pub fn hypothesis(&self) -> Option<Vec<usize>> {
        self.cells.iter().map(CellState::token).collect()
    }
}

/// Complete record of one decode run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub utterance_id: String,
    pub events: Vec<CommitEvent>,
    pub model_calls: usize,
    pub hypothesis: Vec<usize>,
    /// Confidence each position received the first time it was evaluated.
    pub first_confidence: Vec<f64>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.hypothesis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hypothesis.is_empty()
    }

    pub fn rounds(&self) -> usize {
        self.events.len()
    }

    /// Checks that every position is committed exactly once, rounds are
    /// strictly increasing and each round maps to one model call.
    pub fn check_complete(&self) -> Result<()> {
        let len = self.hypothesis.len();
        let mut seen = vec![false; len];
        let mut last_round = 0;
        for ev in &self.events {
            if ev.round <= last_round {
                return Err(Error::invalid(format!(
                    "trace {}: round {} after round {}",
                    self.utterance_id, ev.round, last_round
                )));
            }
            last_round = ev.round;
            if ev.commits.is_empty() {
                return Err(Error::invalid(format!(
                    "trace {}: empty round {}",
                    self.utterance_id, ev.round
                )));
            }
            for p in &ev.commits {
                match seen.get_mut(p.position) {
                    Some(s) if !*s => *s = true,
                    Some(_) => {
                        return Err(Error::invalid(format!(
                            "trace {}: position {} committed twice",
                            self.utterance_id, p.position
                        )))
                    }
                    None => {
                        return Err(Error::invalid(format!(
                            "trace {}: position {} out of range",
                            self.utterance_id, p.position
                        )))
                    }
                }
            }
        }
        if let Some(missing) = seen.iter().position(|s| !s) {
            return Err(Error::invalid(format!(
                "trace {}: position {missing} never committed",
                self.utterance_id
            )));
        }
        if self.model_calls != self.events.len() {
            return Err(Error::invalid(format!(
                "trace {}: {} model calls for {} rounds",
                self.utterance_id,
                self.model_calls,
                self.events.len()
            )));
        }
        Ok(())
    }
}

/// Token-commitment rule applied each round.
///
/// Textual form (used in configs and CSVs): `fixed:<k>`, `static:<C>`,
/// `dynamic:<f>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum StrategyConfig {
    FixedK(usize),
    StaticThreshold(f64),
    DynamicThreshold(f64),
}

impl StrategyConfig {
    pub fn validate(&self) -> Result<()> {
        match *self {
            StrategyConfig::FixedK(k) if k < 1 => {
                Err(Error::invalid("fixed-number k must be at least 1"))
            }
            StrategyConfig::StaticThreshold(c) if !(c > 0.0 && c < 1.0) => Err(Error::invalid(
                format!("static threshold must lie in (0, 1), got {c}"),
            )),
            StrategyConfig::DynamicThreshold(f) if !(f > 0.0 && f.is_finite()) => Err(
                Error::invalid(format!("dynamic factor must be positive, got {f}")),
            ),
            _ => Ok(()),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            StrategyConfig::FixedK(_) => "fixed",
            StrategyConfig::StaticThreshold(_) => "static",
            StrategyConfig::DynamicThreshold(_) => "dynamic",
        }
    }

    pub fn param(&self) -> String {
        match *self {
            StrategyConfig::FixedK(k) => k.to_string(),
            StrategyConfig::StaticThreshold(c) => c.to_string(),
            StrategyConfig::DynamicThreshold(f) => f.to_string(),
        }
    }
}

impl fmt::Display for StrategyConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind(), self.param())
    }
}

impl FromStr for StrategyConfig {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, param) = s
            .split_once(':')
            .ok_or_else(|| Error::invalid(format!("strategy {s:?} is not of the form kind:param")))?;
        let bad = |e: &dyn fmt::Display| Error::invalid(format!("strategy {s:?}: {e}"));
        let cfg = match kind.trim() {
            "fixed" => StrategyConfig::FixedK(param.trim().parse().map_err(|e| bad(&e))?),
            "static" => StrategyConfig::StaticThreshold(param.trim().parse().map_err(|e| bad(&e))?),
            "dynamic" => {
                StrategyConfig::DynamicThreshold(param.trim().parse().map_err(|e| bad(&e))?)
            }
            other => return Err(Error::invalid(format!("unknown strategy kind {other:?}"))),
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl TryFrom<String> for StrategyConfig {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<StrategyConfig> for String {
    fn from(s: StrategyConfig) -> Self {
        s.to_string()
    }
}
