//! Corpus and translation files: JSON Lines, one document per line.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use selnmt_core::{Document, DocumentCorpus};

use crate::fail::{io_fail, Failure};
use crate::runconfig::RunConfig;

/// A translated document: the input fields plus one hypothesis per source
/// sentence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranslationRecord {
    pub doc_id: String,
    pub src: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt: Option<Vec<String>>,
    pub hyp: Vec<String>,
}

/// The first line of every generated JSONL file: which schema follows and
/// the settings that produced it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileHeader {
    pub schema: String,
    pub version: u32,
    pub config: RunConfig,
}

impl FileHeader {
    pub fn new(schema: &str, config: &RunConfig) -> Self {
        Self { schema: schema.to_string(), version: 1, config: config.clone() }
    }
}

/// Parses a corpus file: one JSON document per line, blank lines ignored.
/// An empty file is an empty corpus. Errors carry 1-based line numbers.
pub fn read_corpus(path: &Path) -> Result<DocumentCorpus, Failure> {
    let file = File::open(path).map_err(|e| io_fail(path, e))?;
    let mut documents = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_fail(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let doc: Document = serde_json::from_str(&line)
            .map_err(|e| Failure::Data(format!("{} line {}: {e}", path.display(), i + 1)))?;
        documents.push(doc);
    }
    DocumentCorpus::new(documents)
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}

pub fn write_corpus(path: &Path, corpus: &DocumentCorpus) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_fail(path, e))?;
    let mut out = BufWriter::new(file);
    for doc in &corpus.documents {
        serde_json::to_writer(&mut out, doc).map_err(|e| Failure::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| io_fail(path, e))?;
    }
    out.flush().map_err(|e| io_fail(path, e))
}

/// Writes translations: a config header line, then one record per input
/// document in input order.
pub fn write_translations(
    path: &Path,
    config: &RunConfig,
    records: &[TranslationRecord],
) -> Result<(), Failure> {
    let file = File::create(path).map_err(|e| io_fail(path, e))?;
    let mut out = BufWriter::new(file);
    let header = FileHeader::new("selnmt/translations", config);
    serde_json::to_writer(&mut out, &header).map_err(|e| Failure::Data(e.to_string()))?;
    out.write_all(b"\n").map_err(|e| io_fail(path, e))?;
    for rec in records {
        serde_json::to_writer(&mut out, rec).map_err(|e| Failure::Data(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| io_fail(path, e))?;
    }
    out.flush().map_err(|e| io_fail(path, e))
}

/// What one line of an evaluation input contributed.
enum EvalLine {
    Sentences(Vec<String>),
    Header,
}

/// Reads sentences for scoring. Accepts three shapes per line: a JSON
/// translation record (takes `hyp` or `tgt` per `want_hyp`), a JSON
/// document (takes `tgt`), or plain text (the line is one sentence).
/// Header lines are skipped.
pub fn read_sentences(path: &Path, want_hyp: bool) -> Result<Vec<String>, Failure> {
    let file = File::open(path).map_err(|e| io_fail(path, e))?;
    let mut sentences = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_fail(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match parse_eval_line(&line, want_hyp) {
            Ok(EvalLine::Sentences(s)) => sentences.extend(s),
            Ok(EvalLine::Header) => {}
            Err(reason) => {
                return Err(Failure::Data(format!("{} line {}: {reason}", path.display(), i + 1)));
            }
        }
    }
    Ok(sentences)
}

fn parse_eval_line(line: &str, want_hyp: bool) -> Result<EvalLine, String> {
    if !line.trim_start().starts_with('{') {
        return Ok(EvalLine::Sentences(vec![line.to_string()]));
    }
    if serde_json::from_str::<FileHeader>(line).is_ok() {
        return Ok(EvalLine::Header);
    }
    if let Ok(rec) = serde_json::from_str::<TranslationRecord>(line) {
        return if want_hyp {
            Ok(EvalLine::Sentences(rec.hyp))
        } else {
            rec.tgt.map(EvalLine::Sentences).ok_or_else(|| "record has no tgt sentences".to_string())
        };
    }
    match serde_json::from_str::<Document>(line) {
        Ok(_) if want_hyp => Err("document has no hyp sentences".to_string()),
        Ok(doc) => doc.tgt.map(EvalLine::Sentences).ok_or_else(|| "document has no tgt sentences".to_string()),
        Err(e) => Err(e.to_string()),
    }
}
