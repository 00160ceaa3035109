//! Vocabulary files: the text format from the core crate, one line each.

use std::fs;
use std::path::Path;

use selnmt_core::Vocabulary;

use crate::fail::{io_fail, Failure};

pub fn write_vocab(path: &Path, vocab: &Vocabulary) -> Result<(), Failure> {
    let mut text = vocab.to_lines().join("\n");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

pub fn read_vocab(path: &Path) -> Result<Vocabulary, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    Vocabulary::from_lines(text.lines())
        .map_err(|e| Failure::Data(format!("{}: {e}", path.display())))
}
