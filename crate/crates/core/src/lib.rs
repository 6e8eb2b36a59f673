//! A laboratory for comparing token-commitment strategies in diffusion-style
//! parallel decoding.
//!
//! - [`state`]: decode-state bookkeeping shared by everything else.
//! - [`denoiser`]: analytic per-position posterior models and synthetic
//!   corpora.
//! - [`decoding`]: fixed-number, static-threshold and dynamic-threshold
//!   commitment, the block scheduler and the left-to-right reference.
//! - [`metrics`]: WER, RTF proxy, cumulative-NLL trajectories, throughput,
//!   confidence CCDF and Pareto selection.
//! - [`harness`]: sweeps, CSV persistence, analysis tables and SVG plots.

pub mod decoding;
pub mod denoiser;
pub mod error;
pub mod harness;
pub mod metrics;
mod seed;
pub mod state;

pub use decoding::{
    decode_ar, decode_utterance, select, select_dynamic, select_fixed_k, select_static,
    SelectionResult,
};
pub use denoiser::{Corpus, CorpusConfig, Denoiser, Distribution, SyntheticDenoiser};
pub use error::{Error, Result};
pub use state::{
    CellState, CommitEvent, DecodeState, Prediction, StrategyConfig, Trace, Utterance, Vocabulary,
};
