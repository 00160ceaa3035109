//! Length-normalized beam search over the decoder.
//!
//! The encoded context is recorded once; each prefix evaluation is
//! recorded after a tape watermark and truncated away again, so memory
//! stays flat however long the search runs. Hypotheses are ranked by
//! `log_prob / len^penalty` where `len` counts generated tokens including
//! the terminal end marker; ties break toward the lexicographically
//! smaller token sequence, making the search fully deterministic.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::ModelError;
use crate::mathx;
use crate::model::{EncoderOutput, Session};
use crate::vocab::{BOS, EOS};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BeamConfig {
    pub beam: usize,
    /// Length-penalty exponent; 0 ranks by raw summed log-probability.
    pub penalty: f64,
    /// Output length cap as a multiple of the current sentence length.
    pub max_len_factor: f64,
}

impl Default for BeamConfig {
    fn default() -> Self {
        Self { beam: 4, penalty: 1.0, max_len_factor: 2.0 }
    }
}

impl BeamConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.beam < 1 {
            return Err(ModelError::InvalidConfig { reason: alloc::string::String::from("beam must be at least 1") });
        }
        if !(self.penalty >= 0.0) {
            return Err(ModelError::InvalidConfig { reason: alloc::string::String::from("penalty must be non-negative") });
        }
        if !(self.max_len_factor > 0.0) {
            return Err(ModelError::InvalidConfig { reason: alloc::string::String::from("max_len_factor must be positive") });
        }
        Ok(())
    }

    /// Longest allowed output (in generated tokens, end marker included)
    /// for a current sentence of `source_len` tokens. Never below 4, so
    /// very short sources still get room to differ in length.
    pub fn max_output_len(&self, source_len: usize) -> usize {
        let scaled = self.max_len_factor * source_len as f64;
        (scaled as usize).max(4)
    }
}

/// A finished hypothesis: generated tokens ending in the end marker.
#[derive(Clone, Debug, PartialEq)]
pub struct Hypothesis {
    pub tokens: Vec<usize>,
    pub score: f64,
    pub log_prob: f64,
}

impl Hypothesis {
    /// The tokens without the terminal end marker.
    pub fn surface(&self) -> &[usize] {
        match self.tokens.last() {
            Some(&EOS) => &self.tokens[..self.tokens.len() - 1],
            _ => &self.tokens,
        }
    }
}

fn normalized(log_prob: f64, len: usize, penalty: f64) -> f64 {
    log_prob / mathx::powf(len as f64, penalty)
}

#[derive(Clone)]
struct Beam {
    tokens: Vec<usize>,
    log_prob: f64,
    score: f64,
    done: bool,
}

impl Beam {
    fn extend(&self, token: usize, lp: f64, penalty: f64) -> Self {
        let mut tokens = self.tokens.clone();
        tokens.push(token);
        let log_prob = self.log_prob + lp;
        let score = normalized(log_prob, tokens.len(), penalty);
        Self { tokens, log_prob, score, done: token == EOS }
    }
}

fn log_softmax(row: &[f64]) -> Vec<f64> {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = mathx::ln(row.iter().map(|&x| mathx::exp(x - max)).sum::<f64>()) + max;
    row.iter().map(|&x| x - lse).collect()
}

/// The `k` most probable next tokens, ties toward the smaller id.
fn top_k(logp: &[f64], k: usize) -> Vec<(usize, f64)> {
    let mut order: Vec<usize> = (0..logp.len()).collect();
    order.sort_by(|&a, &b| logp[b].partial_cmp(&logp[a]).expect("non-finite comparison").then(a.cmp(&b)));
    order.into_iter().take(k).map(|i| (i, logp[i])).collect()
}

/// Searches for the best output given encoded context. Pass `enc_tgt` to
/// decode through the dual-context path. Always terminates: once a
/// hypothesis reaches the length cap only the end marker may be emitted.
pub fn beam_search(
    sess: &mut Session,
    enc_src: &EncoderOutput,
    enc_tgt: Option<&EncoderOutput>,
    cfg: &BeamConfig,
) -> Result<Hypothesis, ModelError> {
    cfg.validate()?;
    let cap = sess.config().max_positions.saturating_sub(1);
    let max_len = cfg.max_output_len(enc_src.layout.p()).min(cap).max(1);
    let mark = sess.mark();
    let mut beams = vec![Beam { tokens: Vec::new(), log_prob: 0.0, score: 0.0, done: false }];
    while beams.iter().any(|b| !b.done) {
        let mut candidates: Vec<Beam> = beams.iter().filter(|b| b.done).cloned().collect();
        for beam in beams.iter().filter(|b| !b.done) {
            let mut prefix = Vec::with_capacity(beam.tokens.len() + 1);
            prefix.push(BOS);
            prefix.extend_from_slice(&beam.tokens);
            let logits = match enc_tgt {
                None => sess.decode_mono(&prefix, enc_src)?,
                Some(t) => sess.decode_bi(&prefix, enc_src, t)?,
            };
            let value = sess.value(logits);
            let logp = log_softmax(value.row(value.rows() - 1));
            sess.truncate(mark);
            if beam.tokens.len() + 1 == max_len {
                candidates.push(beam.extend(EOS, logp[EOS], cfg.penalty));
            } else {
                for (token, lp) in top_k(&logp, cfg.beam) {
                    candidates.push(beam.extend(token, lp, cfg.penalty));
                }
            }
        }
        candidates.sort_by(|a, b| {
            b.score
                .partial_cmp(&a.score)
                .expect("non-finite score comparison")
                .then_with(|| a.tokens.cmp(&b.tokens))
        });
        candidates.truncate(cfg.beam);
        beams = candidates;
    }
    let best = beams.into_iter().next().expect("beam search lost every hypothesis");
    Ok(Hypothesis { tokens: best.tokens, score: best.score, log_prob: best.log_prob })
}
