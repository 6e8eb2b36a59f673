use diffudec::denoiser::{CorpusConfig, DenoiserKind, ProfileConfig};
use diffudec::metrics::{ar_trajectory, throughput, trajectory};
use diffudec::{decode_ar, decode_utterance, Corpus, StrategyConfig, Trace, Utterance};
use proptest::prelude::*;
use std::sync::OnceLock;

fn corpora() -> &'static [Corpus; 2] {
    static C: OnceLock<[Corpus; 2]> = OnceLock::new();
    C.get_or_init(|| {
        let base = CorpusConfig {
            num_utterances: 60,
            min_len: 1,
            max_len: 70,
            ..CorpusConfig::default()
        };
        [
            Corpus::generate(base.clone()).unwrap(),
            Corpus::generate(CorpusConfig {
                vocab_size: 32,
                denoiser: DenoiserKind::Profile(ProfileConfig::DISPERSED),
                ..base
            })
            .unwrap(),
        ]
    })
}

fn strategy() -> impl Strategy<Value = StrategyConfig> {
    prop_oneof![
        (1usize..40).prop_map(StrategyConfig::FixedK),
        (1e-6f64..1.0).prop_map(StrategyConfig::StaticThreshold),
        (1e-6f64..2.0).prop_map(StrategyConfig::DynamicThreshold),
    ]
}

/// Structural checks on a finished trace.
fn check_trace(utt: &Utterance, trace: &Trace, block: usize) {
    let mut seen = vec![false; utt.len()];
    let mut last_block = 0;
    for (i, ev) in trace.events.iter().enumerate() {
        assert_eq!(ev.round, i + 1);
        assert!(ev.block >= last_block);
        last_block = ev.block;
        assert!(!ev.commits.is_empty());
        for p in &ev.commits {
            assert_eq!(p.position / block, ev.block);
            assert!(!seen[p.position], "position {} committed twice", p.position);
            seen[p.position] = true;
            assert_eq!(trace.hypothesis[p.position], p.token);
            assert_eq!(p.nll, -p.confidence.ln());
        }
    }
    assert!(seen.iter().all(|&s| s));
    assert_eq!(trace.model_calls, trace.events.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn traces_are_well_formed(which in 0usize..2, idx in 0usize..60, s in strategy(), block in 1usize..80) {
        let corpus = &corpora()[which];
        let utt = &corpus.utterances[idx];
        let den = corpus.build_denoiser().unwrap();
        let trace = decode_utterance(utt, &den, &s, block).unwrap();
        check_trace(utt, &trace, block);

        let tp = throughput(&trace);
        prop_assert_eq!(tp.counts.iter().sum::<usize>(), utt.len());
        prop_assert_eq!(tp.stopping_round, trace.events.len());

        for horizon in [1, 8, 32, utt.len()] {
            let traj = trajectory(&trace, horizon).unwrap();
            for w in traj.windows(2) {
                prop_assert!(w[0].cumulative_nll <= w[1].cumulative_nll);
                prop_assert!(w[0].progress < w[1].progress);
            }
            let last = traj.last().unwrap();
            prop_assert_eq!(last.progress, utt.len().min(horizon) as f64 / horizon as f64);
        }
    }

    #[test]
    fn fixed_k_rounds_per_block(which in 0usize..2, idx in 0usize..60, k in 1usize..20, block in 1usize..40) {
        let corpus = &corpora()[which];
        let utt = &corpus.utterances[idx];
        let den = corpus.build_denoiser().unwrap();
        let trace = decode_utterance(utt, &den, &StrategyConfig::FixedK(k), block).unwrap();
        let blocks = utt.len().div_ceil(block);
        for b in 0..blocks {
            let size = block.min(utt.len() - b * block);
            let rounds = trace.events.iter().filter(|e| e.block == b).count();
            prop_assert_eq!(rounds, size.div_ceil(k));
        }
    }

    #[test]
    fn single_position_blocks_reproduce_reference(which in 0usize..2, idx in 0usize..60, s in strategy()) {
        let corpus = &corpora()[which];
        let utt = &corpus.utterances[idx];
        let den = corpus.build_denoiser().unwrap();
        prop_assert_eq!(decode_utterance(utt, &den, &s, 1).unwrap(), decode_ar(utt, &den).unwrap());
    }
}

#[test]
fn reference_trajectory_matches_decoded_reference() {
    for corpus in corpora() {
        let den = corpus.build_denoiser().unwrap();
        for utt in &corpus.utterances {
            let direct = ar_trajectory(utt, &den, 32).unwrap();
            let via = trajectory(&decode_ar(utt, &den).unwrap(), 32).unwrap();
            assert_eq!(direct.len(), via.len());
            for (a, b) in direct.iter().zip(&via) {
                assert!((a.cumulative_nll - b.cumulative_nll).abs() <= 1e-12);
                assert!((a.progress - b.progress).abs() <= 1e-12);
            }
        }
    }
}

#[test]
fn tiny_threshold_finishes_each_block_in_one_round() {
    let corpus = &corpora()[0];
    let den = corpus.build_denoiser().unwrap();
    for utt in &corpus.utterances {
        let trace = decode_utterance(utt, &den, &StrategyConfig::StaticThreshold(1e-9), 16).unwrap();
        assert_eq!(trace.rounds(), utt.len().div_ceil(16));
    }
}

#[test]
fn decoding_is_deterministic() {
    let corpus = &corpora()[1];
    let den = corpus.build_denoiser().unwrap();
    let again = corpus.build_denoiser().unwrap();
    for utt in &corpus.utterances {
        let s = StrategyConfig::DynamicThreshold(0.2);
        assert_eq!(
            decode_utterance(utt, &den, &s, 16).unwrap(),
            decode_utterance(utt, &again, &s, 16).unwrap()
        );
    }
}
