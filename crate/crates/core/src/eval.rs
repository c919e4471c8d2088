//! Event-level scoring against annotated collar positions.
//!
//! A detection matches a label when they are at most `tolerance` samples
//! apart; each detection and label is used at most once. Matching maximizes
//! the number of pairs, then minimizes their total distance. Remaining
//! detections are false positives and remaining labels false negatives.
//!
//! Accuracy is `tp / (tp + fp + fn)`: with no true negatives in an event
//! task, it reduces to recall whenever there are no false positives.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct EvalConfig {
    /// Matching neighborhood half-width in samples.
    pub tolerance: f64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self { tolerance: 500.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MatchOutcome {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    /// `(detection index, label index)`, ascending.
    pub pairs: Vec<(usize, usize)>,
}

/// Optimal one-to-one matching of sorted detections to sorted labels.
pub fn match_events(detections: &[f64], labels: &[f64], config: &EvalConfig) -> Result<MatchOutcome> {
    if !(config.tolerance >= 0.0) {
        return Err(Error::InvalidConfig("tolerance must be nonnegative".into()));
    }
    if detections.iter().chain(labels).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("event position"));
    }
    if detections.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Unsorted("detections"));
    }
    if labels.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Unsorted("labels"));
    }
    let tol = config.tolerance;
    let mut pairs = Vec::new();
    // Split into clusters no pair can straddle: consecutive positions of the
    // merged sequence more than `tol` apart.
    let (mut di, mut li) = (0, 0);
    while di < detections.len() || li < labels.len() {
        let (d0, l0) = (di, li);
        let mut last = f64::NEG_INFINITY;
        loop {
            let next_d = detections.get(di).copied();
            let next_l = labels.get(li).copied();
            let take_det = match (next_d, next_l) {
                (Some(d), Some(l)) => d <= l,
                (Some(_), None) => true,
                (None, Some(_)) => false,
                (None, None) => break,
            };
            let pos = if take_det { next_d } else { next_l }.expect("some");
            if last != f64::NEG_INFINITY && pos - last > tol {
                break;
            }
            last = pos;
            if take_det {
                di += 1;
            } else {
                li += 1;
            }
        }
        match_cluster(&detections[d0..di], &labels[l0..li], tol, d0, l0, &mut pairs);
    }
    let tp = pairs.len();
    Ok(MatchOutcome {
        tp,
        fp: detections.len() - tp,
        fn_: labels.len() - tp,
        pairs,
    })
}

/// Dynamic program over non-crossing matchings, which include an optimum
/// for points on a line.
fn match_cluster(dets: &[f64], labels: &[f64], tol: f64, d_off: usize, l_off: usize, out: &mut Vec<(usize, usize)>) {
    let (n, m) = (dets.len(), labels.len());
    if n == 0 || m == 0 {
        return;
    }
    #[derive(Clone, Copy, PartialEq)]
    enum Step {
        SkipDet,
        SkipLabel,
        Pair,
    }
    // (matches, total distance), indexed [i][j] over prefixes.
    let w = m + 1;
    let mut score = vec![(0usize, 0f64); (n + 1) * w];
    let mut step = vec![Step::SkipDet; (n + 1) * w];
    let better = |a: (usize, f64), b: (usize, f64)| a.0 > b.0 || (a.0 == b.0 && a.1 < b.1);
    for j in 1..=m {
        step[j] = Step::SkipLabel;
    }
    for i in 1..=n {
        for j in 1..=m {
            // Preference on ties: pair, then leave the later label unmatched.
            let mut best = score[(i - 1) * w + j];
            let mut how = Step::SkipDet;
            if better(score[i * w + j - 1], best) || score[i * w + j - 1] == best {
                best = score[i * w + j - 1];
                how = Step::SkipLabel;
            }
            let dist = libm::fabs(dets[i - 1] - labels[j - 1]);
            if dist <= tol {
                let prev = score[(i - 1) * w + j - 1];
                let cand = (prev.0 + 1, prev.1 + dist);
                if better(cand, best) || cand == best {
                    best = cand;
                    how = Step::Pair;
                }
            }
            score[i * w + j] = best;
            step[i * w + j] = how;
        }
    }
    let start = out.len();
    let (mut i, mut j) = (n, m);
    while i > 0 && j > 0 {
        match step[i * w + j] {
            Step::Pair => {
                out.push((d_off + i - 1, l_off + j - 1));
                i -= 1;
                j -= 1;
            }
            Step::SkipDet => i -= 1,
            Step::SkipLabel => j -= 1,
        }
    }
    out[start..].reverse();
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub accuracy: f64,
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Scores from micro-averaged counts.
///
/// Empty denominators score 1 when nothing was expected and nothing was
/// found, 0 otherwise.
pub fn metrics(tp: usize, fp: usize, fn_: usize) -> EvalReport {
    let ratio = |num: usize, den: usize, empty: bool| {
        if den == 0 {
            if empty {
                1.0
            } else {
                0.0
            }
        } else {
            num as f64 / den as f64
        }
    };
    let precision = ratio(tp, tp + fp, fn_ == 0);
    let recall = ratio(tp, tp + fn_, fp == 0);
    EvalReport {
        tp,
        fp,
        fn_,
        precision,
        recall,
        f1: f1_score(precision, recall),
        accuracy: ratio(tp, tp + fp + fn_, true),
    }
}

impl EvalReport {
    pub fn from_outcome(outcome: &MatchOutcome) -> Self {
        metrics(outcome.tp, outcome.fp, outcome.fn_)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(d: &[f64], l: &[f64], tol: f64) -> (usize, usize, usize) {
        let o = match_events(d, l, &EvalConfig { tolerance: tol }).unwrap();
        (o.tp, o.fp, o.fn_)
    }

    #[test]
    fn exact_hits() {
        let xs = [100.0, 900.0, 1700.0];
        assert_eq!(run(&xs, &xs, 500.0), (3, 0, 0));
        assert_eq!(metrics(3, 0, 0).f1, 1.0);
    }

    #[test]
    fn nothing_detected() {
        assert_eq!(run(&[], &[100.0, 200.0], 500.0), (0, 0, 2));
        assert_eq!(metrics(0, 0, 2).recall, 0.0);
    }

    #[test]
    fn just_outside() {
        assert_eq!(run(&[651.0], &[100.0], 500.0), (0, 1, 1));
        assert_eq!(run(&[600.0], &[100.0], 500.0), (1, 0, 0));
    }

    #[test]
    fn greedy_trap_is_avoided() {
        // Nearest-first would pair 6 with 10 and strand both others.
        let o = match_events(&[6.0, 15.0], &[0.0, 10.0], &EvalConfig { tolerance: 6.0 }).unwrap();
        assert_eq!(o.tp, 2);
        assert_eq!(o.pairs, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn prefers_closer_partner() {
        let o = match_events(&[0.0, 100.0], &[100.0], &EvalConfig::default()).unwrap();
        assert_eq!(o.pairs, vec![(1, 0)]);
    }

    #[test]
    fn rejects_unsorted() {
        assert_eq!(
            match_events(&[2.0, 1.0], &[], &EvalConfig::default()),
            Err(Error::Unsorted("detections"))
        );
        assert_eq!(
            match_events(&[], &[2.0, 1.0], &EvalConfig::default()),
            Err(Error::Unsorted("labels"))
        );
    }

    #[test]
    fn empty_run_convention() {
        let r = metrics(0, 0, 0);
        assert_eq!((r.precision, r.recall, r.f1, r.accuracy), (1.0, 1.0, 1.0, 1.0));
    }

    #[test]
    fn published_rows() {
        assert_eq!(libm::round(f1_score(1.0, 0.946) * 1e4) / 1e4, 0.9723);
        assert_eq!(libm::round(f1_score(1.0, 0.984) * 1e4) / 1e4, 0.9919);
    }

    #[test]
    fn accuracy_is_recall_without_false_positives() {
        for tp in 0..20 {
            for fn_ in 0..5 {
                let r = metrics(tp, 0, fn_);
                assert_eq!(r.accuracy, r.recall);
            }
        }
    }
}
