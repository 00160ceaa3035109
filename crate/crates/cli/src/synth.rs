//! A synthetic corpus where context is the only way to get the answer.
//!
//! Every document has two sentences. The first is a cue sentence holding a
//! key token; the second is a template sentence whose translation is the
//! template itself plus a value token determined by the key. Templates and
//! keys are crossed exhaustively, so the value is unpredictable from the
//! current sentence alone (each key is equally likely given a template)
//! and a model must read the neighbouring sentence to pick it.

use selnmt_core::{DataError, Document, DocumentCorpus};

pub const KEYS: usize = 8;
pub const TEMPLATES: usize = 8;

/// Where a context-determined token sits in the training targets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DisambigPoint {
    pub doc_id: String,
    /// Sentence index within the document.
    pub index: usize,
    /// Row within target + `<eos>` holding the value token.
    pub target_pos: usize,
    /// The value token's surface form.
    pub value: String,
}

pub struct SynthTask {
    pub corpus: DocumentCorpus,
    pub points: Vec<DisambigPoint>,
}

fn template(t: usize) -> String {
    format!("t{t}a t{t}b t{t}c t{t}d")
}

/// Builds `docs` documents; 64 covers every template and key pairing
/// exactly once.
pub fn copy_with_context(docs: usize) -> Result<SynthTask, DataError> {
    let mut documents = Vec::with_capacity(docs);
    let mut points = Vec::with_capacity(docs);
    for i in 0..docs {
        let key = i % KEYS;
        let tpl = (i / KEYS) % TEMPLATES;
        let doc_id = format!("syn{i:03}");
        let cue = format!("cue key{key}");
        let current = template(tpl);
        documents.push(Document {
            doc_id: doc_id.clone(),
            src: vec![cue.clone(), current.clone()],
            tgt: Some(vec![cue, format!("{current} val{key}")]),
        });
        points.push(DisambigPoint {
            doc_id,
            index: 1,
            target_pos: 4,
            value: format!("val{key}"),
        });
    }
    let corpus = DocumentCorpus::new(documents)?;
    Ok(SynthTask { corpus, points })
}
