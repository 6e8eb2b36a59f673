use diffudec::denoiser::{CorpusConfig, DenoiserKind, NoisyChannelConfig, ProfileConfig};
use diffudec::{CommitEvent, Corpus, DecodeState, Denoiser, Prediction, Utterance};
use proptest::prelude::*;

fn small_corpus(kind: DenoiserKind, vocab_size: usize) -> Corpus {
    Corpus::generate(CorpusConfig {
        num_utterances: 40,
        vocab_size,
        denoiser: kind,
        ..CorpusConfig::default()
    })
    .unwrap()
}

/// Single-block state with the given positions committed to the reference.
fn state_with(utt: &Utterance, committed: &[usize]) -> DecodeState {
    let mut state = DecodeState::new(utt.len(), utt.len()).unwrap();
    if !committed.is_empty() {
        let commits = committed
            .iter()
            .map(|&p| Prediction::new(p, utt.reference[p], 0.5))
            .collect();
        state
            .apply_commits(&CommitEvent { round: 1, block: 0, commits })
            .unwrap();
    }
    state
}

/// Direct evaluation of the product of channel, left and right factors.
fn posterior_oracle(cfg: &NoisyChannelConfig, utt: &Utterance, state: &DecodeState, pos: usize) -> Vec<f64> {
    let v = cfg.transition.len();
    let mut w: Vec<f64> = (0..v)
        .map(|x| {
            let channel = if utt.observations[pos] == x {
                1.0 - cfg.epsilon
            } else {
                cfg.epsilon / (v - 1) as f64
            };
            let left = if pos == 0 {
                cfg.initial[x]
            } else {
                state.token_at(pos - 1).map_or(1.0 / v as f64, |t| cfg.transition[t][x])
            };
            let right = state
                .token_at(pos + 1)
                .map_or(1.0 / v as f64, |t| cfg.transition[x][t]);
            channel * left * right
        })
        .collect();
    let z: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= z);
    w
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn noisy_channel_posterior_matches_formula(
        vocab in 2usize..12,
        utt_index in 0usize..40,
        mask_bits in any::<u64>(),
    ) {
        let corpus = small_corpus(DenoiserKind::NoisyChannel, vocab);
        let cfg = corpus.config.channel_config().unwrap();
        let den = corpus.build_denoiser().unwrap();
        let utt = &corpus.utterances[utt_index];
        let committed: Vec<usize> = (0..utt.len()).filter(|&p| mask_bits >> (p % 64) & 1 == 1).collect();
        let state = state_with(utt, &committed);
        for pos in state.active_masked() {
            let got = den.posterior(utt, &state, pos).unwrap();
            let p = got.probabilities();
            let want = posterior_oracle(&cfg, utt, &state, pos);
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            for (a, b) in p.iter().zip(&want) {
                prop_assert!(*a >= 0.0 && (a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn profile_posterior_is_normalized_and_sharpens(
        utt_index in 0usize..40,
        mask_bits in any::<u64>(),
    ) {
        let corpus = small_corpus(DenoiserKind::Profile(ProfileConfig::DISPERSED), 32);
        let den = corpus.build_denoiser().unwrap();
        let utt = &corpus.utterances[utt_index];
        let empty = state_with(utt, &[]);
        let committed: Vec<usize> = (0..utt.len()).filter(|&p| mask_bits >> (p % 64) & 1 == 1).collect();
        let state = state_with(utt, &committed);
        for pos in state.active_masked() {
            let d = den.posterior(utt, &state, pos).unwrap();
            prop_assert!((d.probabilities().iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let now = den.predict(utt, &state, pos).unwrap();
            let before = den.predict(utt, &empty, pos).unwrap();
            prop_assert!(now.confidence >= before.confidence);
        }
    }
}

#[test]
fn profile_is_calibrated() {
    let uniform = ProfileConfig { alpha: 1.0, beta: 1.0, context_gain: 0.0, calibrated: true };
    let corpus = Corpus::generate(CorpusConfig {
        num_utterances: 2500,
        min_len: 40,
        max_len: 40,
        vocab_size: 32,
        denoiser: DenoiserKind::Profile(uniform),
        ..CorpusConfig::default()
    })
    .unwrap();
    let den = corpus.build_denoiser().unwrap();
    let mut bins = vec![(0usize, 0usize); 20];
    for utt in &corpus.utterances {
        let state = state_with(utt, &[]);
        for p in den.forward(utt, &state, &state.active_masked()).unwrap() {
            let b = ((p.confidence / 0.05) as usize).min(19);
            bins[b].0 += 1;
            bins[b].1 += usize::from(p.token == utt.reference[p.position]);
        }
    }
    let total: usize = bins.iter().map(|b| b.0).sum();
    assert!(total >= 100_000, "only {total} positions");
    for (i, &(n, correct)) in bins.iter().enumerate().skip(1) {
        let mid = 0.05 * i as f64 + 0.025;
        let acc = correct as f64 / n as f64;
        assert!((acc - mid).abs() <= 0.03, "bin {i}: accuracy {acc:.4} vs {mid:.3} over {n}");
    }
}

#[test]
fn profile_draws_ignore_the_round() {
    let corpus = small_corpus(DenoiserKind::Profile(ProfileConfig::SKEWED), 32);
    let den = corpus.build_denoiser().unwrap();
    let utt = &corpus.utterances[0];
    let a = den.predict(utt, &state_with(utt, &[]), 5).unwrap();
    let b = den.predict(utt, &state_with(utt, &[20, 30]), 5).unwrap();
    assert_eq!(a, b);
}

#[test]
fn corpus_roundtrip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    for (name, kind) in [
        ("noisy", DenoiserKind::NoisyChannel),
        ("skewed", DenoiserKind::Profile(ProfileConfig::SKEWED)),
    ] {
        let corpus = small_corpus(kind, 8);
        let path = dir.path().join(format!("{name}.jsonl"));
        corpus.save(&path).unwrap();
        assert!(Corpus::sidecar_path(&path).exists());
        let back = Corpus::load(&path).unwrap();
        assert_eq!(back, corpus);
        let a = corpus.build_denoiser().unwrap();
        let b = back.build_denoiser().unwrap();
        let utt = &corpus.utterances[3];
        let s = state_with(utt, &[]);
        assert_eq!(
            a.forward(utt, &s, &s.active_masked()).unwrap(),
            b.forward(utt, &s, &s.active_masked()).unwrap()
        );
    }
}

#[test]
fn corpus_rejects_out_of_vocabulary_tokens() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("c.jsonl");
    let mut corpus = small_corpus(DenoiserKind::NoisyChannel, 4);
    corpus.utterances[0].reference[0] = 9;
    corpus.save(&path).unwrap();
    let err = Corpus::load(&path).unwrap_err();
    assert!(!err.is_io(), "{err}");
}
