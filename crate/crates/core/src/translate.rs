//! Document translation through one trained model.
//!
//! Mono mode encodes each sentence with its source-side window and beam
//! searches the standard decoder. Bilingual mode runs two passes per
//! document: pass one translates every sentence context-free (the
//! concatenation is just the sentence itself) and caches the results;
//! pass two re-translates each sentence through the dual-context decoder,
//! drawing target context from the cached first pass.

use alloc::string::String;
use alloc::vec::Vec;

use crate::beam::{beam_search, BeamConfig};
use crate::config::ModelConfig;
use crate::data::{context_neighbors, decoder_rows, source_concat, target_concat, ContextExample, Document};
use crate::error::ModelError;
use crate::model::{EncoderOutput, Session};
use crate::state::ModelState;
use crate::vocab::Vocabulary;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TranslationMode {
    /// Source-side context only.
    Mono,
    /// Two passes: sentence-level first pass, then dual-context decoding
    /// over source context and first-pass target context.
    Bi,
}

pub fn translate_corpus(
    cfg: &ModelConfig,
    state: &ModelState,
    vocab: &Vocabulary,
    documents: &[Document],
    mode: TranslationMode,
    bc: &BeamConfig,
) -> Result<Vec<Vec<String>>, ModelError> {
    documents
        .iter()
        .map(|doc| translate_document(cfg, state, vocab, doc, mode, bc))
        .collect()
}

pub fn translate_document(
    cfg: &ModelConfig,
    state: &ModelState,
    vocab: &Vocabulary,
    doc: &Document,
    mode: TranslationMode,
    bc: &BeamConfig,
) -> Result<Vec<String>, ModelError> {
    let src_ids: Vec<Vec<usize>> = doc.src.iter().map(|s| vocab.encode(s)).collect();
    let mut sess = Session::eval(cfg, state);
    let output_ids = match mode {
        TranslationMode::Mono => {
            let window = cfg.context_window.clone();
            let mut out = Vec::with_capacity(src_ids.len());
            for k in 0..src_ids.len() {
                let neighbors = context_neighbors(k, src_ids.len(), &window);
                let ex = example(doc, k, &src_ids, &neighbors, Vec::new());
                let mark = sess.mark();
                let enc = sess.encode(&source_concat(&ex)?)?;
                let hyp = beam_search(&mut sess, &enc, None, bc)?;
                sess.truncate(mark);
                out.push(hyp.surface().to_vec());
            }
            out
        }
        TranslationMode::Bi => {
            // Pass 1: context-free, cached per document.
            let mut first_pass = Vec::with_capacity(src_ids.len());
            for k in 0..src_ids.len() {
                let ex = example(doc, k, &src_ids, &[], Vec::new());
                let mark = sess.mark();
                let enc = sess.encode(&source_concat(&ex)?)?;
                let hyp = beam_search(&mut sess, &enc, None, bc)?;
                sess.truncate(mark);
                first_pass.push(hyp.surface().to_vec());
            }
            // Pass 2: dual-context decoding against the cached pass.
            let window = cfg.context_window.clone();
            let mut out = Vec::with_capacity(src_ids.len());
            for k in 0..src_ids.len() {
                let neighbors = context_neighbors(k, src_ids.len(), &window);
                let tgt_context: Vec<Vec<usize>> =
                    neighbors.iter().map(|&j| first_pass[j].clone()).collect();
                let ex = example(doc, k, &src_ids, &neighbors, tgt_context);
                let mark = sess.mark();
                let enc_src = sess.encode(&source_concat(&ex)?)?;
                let enc_tgt = sess.encode(&target_concat(&ex)?)?;
                let hyp = beam_search(&mut sess, &enc_src, Some(&enc_tgt), bc)?;
                sess.truncate(mark);
                out.push(hyp.surface().to_vec());
            }
            out
        }
    };
    Ok(output_ids.iter().map(|ids| vocab.decode(ids)).collect())
}

fn example(
    doc: &Document,
    k: usize,
    src_ids: &[Vec<usize>],
    neighbors: &[usize],
    tgt_context: Vec<Vec<usize>>,
) -> ContextExample {
    ContextExample {
        doc_id: doc.doc_id.clone(),
        index: k,
        current: src_ids[k].clone(),
        src_context: neighbors.iter().map(|&j| src_ids[j].clone()).collect(),
        tgt_context,
        target: None,
    }
}

/// Teacher-forced next-token predictions for one example: the argmax of
/// every logit row when the decoder is fed `<bos>` + target. Row `i`
/// aligns with the `i`-th entry of target + `<eos>`.
pub fn forced_predictions(
    sess: &mut Session,
    enc_src: &EncoderOutput,
    enc_tgt: Option<&EncoderOutput>,
    target: &[usize],
) -> Result<Vec<usize>, ModelError> {
    let (prefix, _) = decoder_rows(target);
    let mark = sess.mark();
    let logits = match enc_tgt {
        None => sess.decode_mono(&prefix, enc_src)?,
        Some(t) => sess.decode_bi(&prefix, enc_src, t)?,
    };
    let value = sess.value(logits);
    let mut out = Vec::with_capacity(value.rows());
    for i in 0..value.rows() {
        let row = value.row(i);
        let mut best = 0;
        for (j, &x) in row.iter().enumerate() {
            if x > row[best] {
                best = j;
            }
        }
        out.push(best);
    }
    sess.truncate(mark);
    Ok(out)
}
