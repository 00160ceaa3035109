//! Corpus-level BLEU-4 with brevity penalty.
//!
//! Tokenization is whitespace splitting, case-sensitive, and n-gram
//! counts aggregate over the whole corpus before any precision is formed.
//! An n-gram order whose hypothesis total is zero contributes a zero
//! precision, which zeroes the score; this matches the reference
//! implementation this module mirrors and means corpora of only very
//! short sentences need the smoothing flag to produce signal. Smoothing
//! (off by default) replaces a zero clipped count at orders two and up
//! with `1 / (total + 1)` and touches nothing else.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::error::DataError;
use crate::mathx;
use crate::vocab::tokenize;

pub const MAX_ORDER: usize = 4;

#[derive(Clone, Debug, PartialEq)]
pub struct BleuScore {
    /// Percentage in [0, 100].
    pub score: f64,
    pub precisions: [f64; MAX_ORDER],
    pub brevity_penalty: f64,
    pub hyp_len: usize,
    pub ref_len: usize,
}

fn ngram_counts<'a>(tokens: &'a [&'a str], n: usize) -> BTreeMap<&'a [&'a str], usize> {
    let mut counts = BTreeMap::new();
    for gram in tokens.windows(n) {
        *counts.entry(gram).or_insert(0) += 1;
    }
    counts
}

pub fn corpus_bleu(hypotheses: &[&str], references: &[&str], smooth: bool) -> Result<BleuScore, DataError> {
    if hypotheses.len() != references.len() {
        return Err(DataError::CountMismatch {
            hypotheses: hypotheses.len(),
            references: references.len(),
        });
    }
    let mut hyp_len = 0;
    let mut ref_len = 0;
    let mut clipped = [0usize; MAX_ORDER];
    let mut totals = [0usize; MAX_ORDER];
    for (hyp, reference) in hypotheses.iter().zip(references) {
        let h = tokenize(hyp);
        let r = tokenize(reference);
        hyp_len += h.len();
        ref_len += r.len();
        for n in 1..=MAX_ORDER {
            totals[n - 1] += h.len().saturating_sub(n - 1);
            let ref_counts = ngram_counts(&r, n);
            for (gram, count) in ngram_counts(&h, n) {
                let allowed = ref_counts.get(gram).copied().unwrap_or(0);
                clipped[n - 1] += count.min(allowed);
            }
        }
    }
    let mut precisions = [0.0; MAX_ORDER];
    for n in 0..MAX_ORDER {
        precisions[n] = if totals[n] == 0 {
            0.0
        } else if clipped[n] > 0 {
            clipped[n] as f64 / totals[n] as f64
        } else if smooth && n >= 1 {
            1.0 / (totals[n] as f64 + 1.0)
        } else {
            0.0
        };
    }
    let brevity_penalty = if hyp_len == 0 {
        0.0
    } else if hyp_len > ref_len {
        1.0
    } else {
        mathx::exp(1.0 - ref_len as f64 / hyp_len as f64)
    };
    let score = if precisions.iter().any(|&p| p == 0.0) {
        0.0
    } else {
        let mean_log = precisions.iter().map(|&p| mathx::ln(p)).sum::<f64>() / MAX_ORDER as f64;
        100.0 * brevity_penalty * mathx::exp(mean_log)
    };
    Ok(BleuScore { score, precisions, brevity_penalty, hyp_len, ref_len })
}

/// Convenience over owned sentence lists.
pub fn corpus_bleu_owned(
    hypotheses: &[alloc::string::String],
    references: &[alloc::string::String],
    smooth: bool,
) -> Result<BleuScore, DataError> {
    let h: Vec<&str> = hypotheses.iter().map(|s| s.as_str()).collect();
    let r: Vec<&str> = references.iter().map(|s| s.as_str()).collect();
    corpus_bleu(&h, &r, smooth)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_scores_one_hundred() {
        let sents = ["the quick brown fox jumps", "over the lazy dog today"];
        let b = corpus_bleu(&sents, &sents, false).unwrap();
        assert_eq!(b.score, 100.0);
        assert_eq!(b.precisions, [1.0; 4]);
        assert_eq!(b.brevity_penalty, 1.0);
    }

    #[test]
    fn empty_hypotheses_score_zero() {
        let b = corpus_bleu(&["", ""], &["a b", "c d"], false).unwrap();
        assert_eq!(b.score, 0.0);
        assert_eq!(b.hyp_len, 0);
    }

    #[test]
    fn too_short_for_four_grams_scores_zero_raw() {
        let b = corpus_bleu(&["the cat sat"], &["the cat sat down"], false).unwrap();
        assert_eq!(b.score, 0.0);
        // Lower orders were perfect; only the missing 4-grams zeroed it.
        assert_eq!(b.precisions[0], 1.0);
        assert_eq!(b.precisions[2], 1.0);
        assert_eq!(b.precisions[3], 0.0);
    }

    #[test]
    fn hand_case_matches_the_direct_formula() {
        let b = corpus_bleu(&["a b c d e f"], &["a b c d x f"], false).unwrap();
        let expected = 100.0
            * mathx::exp(
                (mathx::ln(5.0 / 6.0) + mathx::ln(3.0 / 5.0) + mathx::ln(2.0 / 4.0) + mathx::ln(1.0 / 3.0))
                    / 4.0,
            );
        assert!((b.score - expected).abs() < 1e-9, "{} vs {expected}", b.score);
        assert_eq!(b.precisions, [5.0 / 6.0, 3.0 / 5.0, 2.0 / 4.0, 1.0 / 3.0]);
    }

    #[test]
    fn brevity_penalty_punishes_short_output() {
        let b = corpus_bleu(&["a b c d"], &["a b c d e f"], false).unwrap();
        assert_eq!(b.precisions, [1.0; 4]);
        let bp = mathx::exp(1.0 - 6.0 / 4.0);
        assert!((b.brevity_penalty - bp).abs() < 1e-15);
        assert!((b.score - 100.0 * bp).abs() < 1e-9);
    }

    #[test]
    fn long_output_gets_no_brevity_bonus() {
        let b = corpus_bleu(&["a b c d e f g h"], &["a b c d e"], false).unwrap();
        assert_eq!(b.brevity_penalty, 1.0);
    }

    #[test]
    fn counts_aggregate_over_the_corpus() {
        // Per-sentence, the second pair has no correct 4-gram; the corpus
        // totals still produce a nonzero score.
        let hyps = ["a b c d e", "x y z w v"];
        let refs = ["a b c d e", "x y q w v"];
        let b = corpus_bleu(&hyps, &refs, false).unwrap();
        assert!(b.score > 0.0);
        assert_eq!(b.precisions[0], 9.0 / 10.0);
    }

    #[test]
    fn smoothing_rescues_zero_counts_at_higher_orders() {
        let raw = corpus_bleu(&["a b c d"], &["a x c y"], false).unwrap();
        assert_eq!(raw.score, 0.0);
        let smoothed = corpus_bleu(&["a b c d"], &["a x c y"], true).unwrap();
        assert_eq!(smoothed.precisions[0], 2.0 / 4.0);
        assert_eq!(smoothed.precisions[1], 1.0 / 4.0);
        assert_eq!(smoothed.precisions[2], 1.0 / 3.0);
        assert_eq!(smoothed.precisions[3], 1.0 / 2.0);
        assert!(smoothed.score > 0.0);
    }

    #[test]
    fn smoothing_never_touches_the_unigram_order() {
        let b = corpus_bleu(&["q w e r"], &["a s d f"], true).unwrap();
        assert_eq!(b.precisions[0], 0.0);
        assert_eq!(b.score, 0.0);
    }

    #[test]
    fn mismatched_counts_error() {
        assert_eq!(
            corpus_bleu(&["a"], &[], false),
            Err(DataError::CountMismatch { hypotheses: 1, references: 0 })
        );
    }
}
