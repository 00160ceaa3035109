//! Context-token voting: which context tokens earn the right to stay.
//!
//! Given head-averaged attention over the concatenation, every
//! current-sentence token acts as a voter. A voter's baseline is its average
//! attention to the other current-sentence tokens; a context token collects
//! the voter's vote when the voter attends to it at least as strongly as
//! that baseline. Tokens whose vote count reaches `q * p` survive.
//!
//! Two readings of the vote-count definition exist; the one implemented
//! sums over the current-sentence voters, which is the only reading under
//! which the `q * p` threshold (at most `p` votes) is attainable. The
//! baseline divides by `p` even though the sum has `p - 1` terms, so with
//! `p == 1` the baseline is zero and the lone voter approves everything.

use alloc::vec::Vec;

use crate::layout::SegmentLayout;
use crate::tensor::Tensor;

/// Outcome of one selection round over the alive context tokens.
#[derive(Clone, Debug, PartialEq)]
pub struct SelectionDecision {
    /// Layout slots that were up for a vote, in ascending order.
    pub candidates: Vec<usize>,
    /// Vote counts per candidate, each in 0..=p.
    pub scores: Vec<usize>,
    /// Survival per candidate: `keep[k] == (scores[k] as f64 >= threshold)`.
    pub keep: Vec<bool>,
    /// `q * p`.
    pub threshold: f64,
}

impl SelectionDecision {
    /// Candidate slots that lost the vote.
    pub fn dropped(&self) -> Vec<usize> {
        self.candidates
            .iter()
            .zip(&self.keep)
            .filter(|(_, &k)| !k)
            .map(|(&c, _)| c)
            .collect()
    }

    pub fn kept(&self) -> Vec<usize> {
        self.candidates
            .iter()
            .zip(&self.keep)
            .filter(|(_, &k)| k)
            .map(|(&c, _)| c)
            .collect()
    }
}

/// Elementwise mean of the per-head attention matrices.
pub fn average_heads(heads: &[Tensor]) -> Tensor {
    assert!(!heads.is_empty(), "average_heads over zero heads");
    let shape = heads[0].shape();
    let mut out = Tensor::zeros(shape.0, shape.1);
    for head in heads {
        assert_eq!(
            head.shape(),
            shape,
            "head shape [{}x{}] vs [{}x{}]",
            head.rows(),
            head.cols(),
            shape.0,
            shape.1
        );
        out.add_assign(head);
    }
    out.scale_assign(1.0 / heads.len() as f64);
    out
}

/// Per-voter baselines: `baseline[i] = (1/p) * sum over current-sentence
/// slots j != i of A[i, j]`, for each voter i in the current sentence.
pub fn source_baseline(avg: &Tensor, layout: &SegmentLayout) -> Vec<f64> {
    let p = layout.p();
    assert!(p >= 1, "baseline with no current-sentence tokens");
    assert!(
        avg.rows() >= p && avg.cols() >= p,
        "attention [{}x{}] smaller than p={p}",
        avg.rows(),
        avg.cols()
    );
    let mut out = Vec::with_capacity(p);
    for i in 0..p {
        let mut sum = 0.0;
        for j in 0..p {
            if j != i {
                sum += avg.at(i, j);
            }
        }
        out.push(sum / p as f64);
    }
    out
}

/// Vote counts for the alive context tokens. A tie with the baseline counts
/// as a vote.
pub fn correlation_scores(avg: &Tensor, baselines: &[f64], layout: &SegmentLayout) -> Vec<usize> {
    let p = layout.p();
    assert_eq!(baselines.len(), p, "{} baselines for p={p}", baselines.len());
    layout
        .candidates()
        .iter()
        .map(|&k| (0..p).filter(|&i| avg.at(i, k) >= baselines[i]).count())
        .collect()
}

/// Survival flags from vote counts: `scores[k] >= q * p`.
pub fn select(scores: &[usize], q: f64, p: usize) -> Vec<bool> {
    assert!((0.0..=1.0).contains(&q), "q={q} outside [0, 1]");
    let threshold = q * p as f64;
    scores.iter().map(|&s| s as f64 >= threshold).collect()
}

/// The composed fast path: average attention is assumed to already be
/// head-averaged (see [`average_heads`]).
pub fn decide(avg: &Tensor, layout: &SegmentLayout, q: f64) -> SelectionDecision {
    let baselines = source_baseline(avg, layout);
    let scores = correlation_scores(avg, &baselines, layout);
    let keep = select(&scores, q, layout.p());
    SelectionDecision {
        candidates: layout.candidates(),
        scores,
        keep,
        threshold: q * layout.p() as f64,
    }
}
