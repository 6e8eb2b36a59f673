//! Brute-force reference implementations shared by the integration tests.
#![allow(dead_code)]

use std::collections::HashMap;

use diffudec::metrics::TradeoffPoint;
use diffudec::Prediction;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn predictions(confidences: &[f64]) -> Vec<Prediction> {
    confidences
        .iter()
        .enumerate()
        .map(|(i, &c)| Prediction::new(i, 0, c))
        .collect()
}

/// Rank of each position: how many others beat it on (confidence desc,
/// position asc), by pairwise counting.
pub fn ranks(c: &[f64]) -> Vec<usize> {
    (0..c.len())
        .map(|i| {
            (0..c.len())
                .filter(|&j| c[j] > c[i] || (c[j] == c[i] && j < i))
                .count()
        })
        .collect()
}

/// Positions whose rank is below `n`, listed by rank.
pub fn top_by_rank(c: &[f64], n: usize) -> Vec<usize> {
    let r = ranks(c);
    let mut out = vec![usize::MAX; n.min(c.len())];
    for (i, &ri) in r.iter().enumerate() {
        if ri < out.len() {
            out[ri] = i;
        }
    }
    out
}

/// Confidences listed by rank, so `by_rank(c)[k - 1]` is the `k`-th largest.
pub fn by_rank(c: &[f64]) -> Vec<f64> {
    let mut out = vec![f64::NAN; c.len()];
    for (i, r) in ranks(c).into_iter().enumerate() {
        out[r] = c[i];
    }
    out
}

pub fn brute_fixed_k(c: &[f64], k: usize) -> Vec<usize> {
    top_by_rank(c, k)
}

pub fn brute_static(c: &[f64], threshold: f64) -> (Vec<usize>, bool) {
    let n = c.iter().filter(|&&x| x > threshold).count();
    if n == 0 {
        (top_by_rank(c, 1), true)
    } else {
        (top_by_rank(c, n), false)
    }
}

/// Every `k` in `1..=m` satisfying `(k + 1) * (1 - c_(k)) < factor`.
pub fn dynamic_satisfying(c: &[f64], factor: f64) -> Vec<usize> {
    let sorted = by_rank(c);
    (1..=c.len())
        .filter(|&k| (k as f64 + 1.0) * (1.0 - sorted[k - 1]) < factor)
        .collect()
}

pub fn brute_dynamic(c: &[f64], factor: f64) -> (Vec<usize>, bool) {
    match dynamic_satisfying(c, factor).into_iter().max() {
        Some(k) => (top_by_rank(c, k), false),
        None => (top_by_rank(c, 1), true),
    }
}

/// Levenshtein distance by memoized recursion on suffixes.
pub fn edit_distance_oracle<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    fn go<T: PartialEq>(a: &[T], b: &[T], i: usize, j: usize, memo: &mut HashMap<(usize, usize), usize>) -> usize {
        if i == a.len() {
            return b.len() - j;
        }
        if j == b.len() {
            return a.len() - i;
        }
        if let Some(&d) = memo.get(&(i, j)) {
            return d;
        }
        let d = if a[i] == b[j] {
            go(a, b, i + 1, j + 1, memo)
        } else {
            1 + go(a, b, i + 1, j, memo)
                .min(go(a, b, i, j + 1, memo))
                .min(go(a, b, i + 1, j + 1, memo))
        };
        memo.insert((i, j), d);
        d
    }
    go(a, b, 0, 0, &mut HashMap::new())
}

/// Pareto frontier by pairwise dominance, ordered by RTF then input order.
pub fn pareto_oracle(points: &[TradeoffPoint]) -> Vec<TradeoffPoint> {
    let dominated = |p: &TradeoffPoint| {
        points.iter().any(|q| {
            q.wer <= p.wer && q.rtf <= p.rtf && (q.wer < p.wer || q.rtf < p.rtf)
        })
    };
    let mut keep: Vec<(usize, &TradeoffPoint)> =
        points.iter().enumerate().filter(|(_, p)| !dominated(p)).collect();
    keep.sort_by(|a, b| a.1.rtf.total_cmp(&b.1.rtf).then(a.0.cmp(&b.0)));
    keep.into_iter().map(|(_, p)| p.clone()).collect()
}

/// A confidence vector of length `1..=64` drawn from one of several shapes:
/// uniform, concentrated near 1, and each of those again with values drawn
/// from a small pool so that ties are common.
pub fn random_confidences(rng: &mut ChaCha8Rng) -> Vec<f64> {
    let m = rng.random_range(1..=64);
    let near_one = rng.random_bool(0.5);
    let draw = |rng: &mut ChaCha8Rng| {
        let u: f64 = rng.random();
        if near_one {
            1.0 - 0.3 * u.powi(3)
        } else {
            u
        }
    };
    if rng.random_bool(0.5) {
        (0..m).map(|_| draw(rng)).collect()
    } else {
        let pool: Vec<f64> = (0..rng.random_range(1..=6)).map(|_| draw(rng)).collect();
        (0..m).map(|_| pool[rng.random_range(0..pool.len())]).collect()
    }
}

/// A strategy parameter triple `(k, C, f)` for one test case.
pub fn random_params(rng: &mut ChaCha8Rng) -> (usize, f64, f64) {
    let k = rng.random_range(1..=70);
    let c = match rng.random_range(0..4) {
        0 => 0.8,
        1 => 0.9,
        2 => 0.95,
        _ => rng.random(),
    };
    let f = match rng.random_range(0..4) {
        0 => 1.0,
        1 => 0.2,
        2 => 0.05,
        _ => rng.random_range(0.0..2.0),
    };
    (k, c, f)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
