//! Analysis instruments: word error rate, real-time-factor proxy, cumulative
//! uncertainty trajectories, per-round throughput, confidence CCDF, and
//! Pareto/matched-RTF selection over trade-off points.

use serde::{Deserialize, Serialize};

use crate::decoding::decode_ar;
use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::state::{Trace, Utterance};

/// Minimal number of substitutions, insertions and deletions turning
/// `reference` into `hypothesis`.
pub fn edit_distance<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> usize {
    let mut prev: Vec<usize> = (0..=hypothesis.len()).collect();
    let mut cur = vec![0; hypothesis.len() + 1];
    for (i, r) in reference.iter().enumerate() {
        cur[0] = i + 1;
        for (j, h) in hypothesis.iter().enumerate() {
            let sub = prev[j] + usize::from(r != h);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[hypothesis.len()]
}

/// Edit distance divided by the reference length. May exceed 1.
pub fn wer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64> {
    if reference.is_empty() {
        return Err(Error::invalid("WER needs a nonempty reference"));
    }
    Ok(edit_distance(reference, hypothesis) as f64 / reference.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub seconds_per_call: f64,
}

impl Default for CostModel {
    fn default() -> Self {
        Self {
            seconds_per_call: 0.05,
        }
    }
}

impl CostModel {
    pub fn validate(&self) -> Result<()> {
        if self.seconds_per_call > 0.0 && self.seconds_per_call.is_finite() {
            Ok(())
        } else {
            Err(Error::invalid("seconds per call must be positive"))
        }
    }

    pub fn seconds(&self, model_calls: usize) -> f64 {
        model_calls as f64 * self.seconds_per_call
    }
}

/// Simulated inference time over audio duration.
pub fn rtf_proxy(trace: &Trace, cost: &CostModel, duration_s: f64) -> Result<f64> {
    if !(duration_s > 0.0) {
        return Err(Error::invalid(format!(
            "audio duration must be positive, got {duration_s}"
        )));
    }
    Ok(cost.seconds(trace.model_calls) / duration_s)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub progress: f64,
    pub cumulative_nll: f64,
}

/// Cumulative NLL against normalized progress over the first `horizon`
/// positions. Starts at `(0, 0)` and gains one point per round that commits
/// inside the horizon; commits beyond it are ignored.
pub fn trajectory(trace: &Trace, horizon: usize) -> Result<Vec<TrajectoryPoint>> {
    if horizon == 0 {
        return Err(Error::invalid("trajectory horizon must be at least 1"));
    }
    trace.check_complete()?;
    let mut points = vec![TrajectoryPoint {
        progress: 0.0,
        cumulative_nll: 0.0,
    }];
    let (mut committed, mut cum) = (0usize, 0.0f64);
    for event in &trace.events {
        let inside: Vec<_> = event
            .commits
            .iter()
            .filter(|p| p.position < horizon)
            .collect();
        if inside.is_empty() {
            continue;
        }
        committed += inside.len();
        cum += inside.iter().map(|p| p.nll).sum::<f64>();
        points.push(TrajectoryPoint {
            progress: (committed as f64 / horizon as f64).min(1.0),
            cumulative_nll: cum,
        });
    }
    Ok(points)
}

/// Trajectory of the left-to-right reference decode.
pub fn ar_trajectory<D: Denoiser + ?Sized>(
    utterance: &Utterance,
    denoiser: &D,
    horizon: usize,
) -> Result<Vec<TrajectoryPoint>> {
    trajectory(&decode_ar(utterance, denoiser)?, horizon)
}

/// Cumulative NLL at progress `p`: value of the last point at or before `p`.
pub fn trajectory_at(points: &[TrajectoryPoint], progress: f64) -> f64 {
    points
        .iter()
        .take_while(|pt| pt.progress <= progress + 1e-12)
        .last()
        .map_or(0.0, |pt| pt.cumulative_nll)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Throughput {
    /// Newly committed tokens in each round.
    pub counts: Vec<usize>,
    pub stopping_round: usize,
}

pub fn throughput(trace: &Trace) -> Throughput {
    let counts: Vec<usize> = trace.events.iter().map(|e| e.commits.len()).collect();
    Throughput {
        stopping_round: counts.len(),
        counts,
    }
}

/// Fraction of `confidences` at or above each threshold.
pub fn ccdf(confidences: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if confidences.is_empty() {
        return Err(Error::invalid("CCDF needs at least one sample"));
    }
    let mut sorted = confidences.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&s| {
            let below = sorted.partition_point(|&c| c < s);
            (sorted.len() - below) as f64 / n
        })
        .collect())
}

/// One decoding configuration summarized over a corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub strategy: String,
    pub param: String,
    pub block: usize,
    pub wer: f64,
    pub rtf: f64,
    pub mean_rounds: f64,
}

/// Points not dominated in (WER, RTF), ordered by RTF ascending. Ties in RTF
/// keep their input order.
pub fn pareto(points: &[TradeoffPoint]) -> Result<Vec<TradeoffPoint>> {
    if points.is_empty() {
        return Err(Error::invalid("Pareto frontier of an empty set"));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        let (pa, pb) = (&points[a], &points[b]);
        pa.rtf
            .total_cmp(&pb.rtf)
            .then(pa.wer.total_cmp(&pb.wer))
            .then(a.cmp(&b))
    });

    // Sweep in RTF order keeping the best WER seen at strictly smaller RTF.
    let mut keep = vec![false; points.len()];
    let mut best_before = f64::INFINITY;
    let mut i = 0;
    while i < order.len() {
        let rtf = points[order[i]].rtf;
        let mut j = i;
        while j < order.len() && points[order[j]].rtf == rtf {
            j += 1;
        }
        // order[i] has the lowest WER within this RTF group
        let group_best = points[order[i]].wer;
        for &idx in &order[i..j] {
            let w = points[idx].wer;
            keep[idx] = w == group_best && w < best_before;
        }
        best_before = best_before.min(group_best);
        i = j;
    }

    let mut out: Vec<usize> = (0..points.len()).filter(|&i| keep[i]).collect();
    out.sort_by(|&a, &b| points[a].rtf.total_cmp(&points[b].rtf).then(a.cmp(&b)));
    Ok(out.into_iter().map(|i| points[i].clone()).collect())
}

/// Per group, the point whose RTF is closest to `target_rtf`; ties go to the
/// lower WER, then to the earlier point.
pub fn match_rtf(groups: &[Vec<TradeoffPoint>], target_rtf: f64) -> Result<Vec<TradeoffPoint>> {
    groups
        .iter()
        .map(|g| {
            g.iter()
                .min_by(|a, b| {
                    let da = (a.rtf - target_rtf).abs();
                    let db = (b.rtf - target_rtf).abs();
                    da.total_cmp(&db).then(a.wer.total_cmp(&b.wer))
                })
                .cloned()
                .ok_or_else(|| Error::invalid("match_rtf: empty strategy group"))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::state::{CommitEvent, Prediction};

    #[test]
    fn wer_examples() {
        assert_eq!(wer(&['a', 'b', 'c'], &['a', 'b', 'c']).unwrap(), 0.0);
        assert!((wer(&['a', 'b', 'c'], &['a', 'x', 'c']).unwrap() - 1.0 / 3.0).abs() < 1e-15);
        assert_eq!(wer(&['a', 'b'], &['a', 'x', 'b', 'y']).unwrap(), 1.0);
        assert_eq!(wer(&['a'], &[]).unwrap(), 1.0);
        assert!(wer::<char>(&[], &['a']).is_err());
    }

    fn trace(confs: &[&[(usize, f64)]]) -> Trace {
        let len = confs.iter().map(|r| r.len()).sum();
        Trace {
            utterance_id: "t".into(),
            events: confs
                .iter()
                .enumerate()
                .map(|(r, commits)| CommitEvent {
                    round: r + 1,
                    block: 0,
                    commits: commits.iter().map(|&(p, c)| Prediction::new(p, 0, c)).collect(),
                })
                .collect(),
            model_calls: confs.len(),
            hypothesis: vec![0; len],
            first_confidence: vec![],
        }
    }

    #[test]
    fn rtf_examples() {
        let t = trace(&[&[(0, 1.0)], &[(1, 1.0)], &[(2, 1.0)], &[(3, 1.0)], &[(4, 1.0)], &[(5, 1.0)]]);
        let r = rtf_proxy(&t, &CostModel::default(), 10.0).unwrap();
        assert!((r - 0.03).abs() < 1e-15);
        let empty = trace(&[]);
        assert_eq!(rtf_proxy(&empty, &CostModel::default(), 1.0).unwrap(), 0.0);
        assert!(rtf_proxy(&t, &CostModel::default(), 0.0).is_err());
    }

    #[test]
    fn trajectory_examples() {
        let t = trace(&[&[(0, 0.5)], &[(1, 0.25)]]);
        let pts = trajectory(&t, 2).unwrap();
        assert_eq!(pts[0], TrajectoryPoint { progress: 0.0, cumulative_nll: 0.0 });
        assert_eq!(pts[1].progress, 0.5);
        assert!((pts[1].cumulative_nll - 0.693_147_180_559_945_3).abs() < 1e-12);
        assert_eq!(pts[2].progress, 1.0);
        assert!((pts[2].cumulative_nll - 2.079_441_541_679_835_8).abs() < 1e-12);

        let single = trace(&[&[(0, 1.0)], &[(1, 0.5), (2, 0.5)]]);
        assert_eq!(
            trajectory(&single, 3).unwrap()[1],
            TrajectoryPoint { progress: 1.0 / 3.0, cumulative_nll: 0.0 }
        );
    }

    #[test]
    fn trajectory_ignores_commits_past_horizon() {
        let t = trace(&[&[(2, 0.5)], &[(0, 0.5), (3, 0.5)], &[(1, 0.5)]]);
        let pts = trajectory(&t, 2).unwrap();
        assert_eq!(pts.len(), 3);
        assert_eq!(pts.last().unwrap().progress, 1.0);
    }

    #[test]
    fn incomplete_trace_rejected() {
        let mut t = trace(&[&[(0, 0.5)]]);
        t.hypothesis.push(0);
        assert!(matches!(trajectory(&t, 2), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn ccdf_examples() {
        assert_eq!(ccdf(&[1.0, 1.0], &[0.9]).unwrap(), vec![1.0]);
        assert_eq!(ccdf(&[0.99, 0.5, 0.91, 0.3], &[0.9]).unwrap(), vec![0.5]);
        assert_eq!(ccdf(&[0.5, 0.9], &[0.9, 0.0, 1.5]).unwrap(), vec![0.5, 1.0, 0.0]);
        assert!(ccdf(&[], &[0.5]).is_err());
    }

    fn pt(wer: f64, rtf: f64) -> TradeoffPoint {
        TradeoffPoint {
            strategy: "s".into(),
            param: format!("{wer}/{rtf}"),
            block: 1,
            wer,
            rtf,
            mean_rounds: 0.0,
        }
    }

    #[test]
    fn pareto_examples() {
        assert_eq!(pareto(&[pt(1.0, 1.0)]).unwrap(), vec![pt(1.0, 1.0)]);
        assert_eq!(pareto(&[pt(2.0, 2.0), pt(1.0, 1.0)]).unwrap(), vec![pt(1.0, 1.0)]);
        let front = pareto(&[pt(1.0, 3.0), pt(3.0, 1.0), pt(2.0, 2.0), pt(3.0, 3.0)]).unwrap();
        let rtfs: Vec<f64> = front.iter().map(|p| p.rtf).collect();
        assert_eq!(rtfs, vec![1.0, 2.0, 3.0]);
        assert!(pareto(&[]).is_err());
    }

    #[test]
    fn match_rtf_examples() {
        let g = vec![vec![pt(3.0, 0.1), pt(2.0, 0.2), pt(1.0, 0.4)]];
        assert_eq!(match_rtf(&g, 0.2).unwrap()[0], pt(2.0, 0.2));
        assert_eq!(match_rtf(&g, 0.0).unwrap()[0], pt(3.0, 0.1));
        let tie = vec![vec![pt(3.0, 0.25), pt(2.0, 0.75)]];
        assert_eq!(match_rtf(&tie, 0.5).unwrap()[0].wer, 2.0);
        assert!(match_rtf(&[vec![]], 0.2).is_err());
    }
}
