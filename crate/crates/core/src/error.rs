//! Error types for data-level failures. Numeric contract violations
//! (shape mismatches and the like) panic instead; see the crate docs.

use alloc::string::String;
use core::fmt;

/// Problems with corpus content, vocabularies, or batching inputs.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DataError {
    /// A document declares target sentences but their count differs from
    /// the source count.
    MismatchedSentenceCounts { doc_id: String, src: usize, tgt: usize },
    /// Training requires target sentences and the document has none.
    MissingTargets { doc_id: String },
    /// A vocabulary budget too small to hold the reserved tokens.
    VocabTooSmall { max_size: usize, reserved: usize },
    /// A serialized vocabulary line that cannot be accepted.
    MalformedVocab { line: usize, reason: String },
    /// One example alone exceeds the batch token budget.
    ExampleTooLong { doc_id: String, index: usize, tokens: usize, max_tokens: usize },
    /// A source sentence tokenized to nothing, so no example can be built
    /// around it.
    EmptySentence { doc_id: String, index: usize },
    /// Scoring was asked to pair hypothesis and reference lists of
    /// different lengths.
    CountMismatch { hypotheses: usize, references: usize },
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::MismatchedSentenceCounts { doc_id, src, tgt } => {
                write!(f, "document {doc_id}: {src} source sentences but {tgt} target sentences")
            }
            DataError::MissingTargets { doc_id } => {
                write!(f, "document {doc_id}: target sentences required but absent")
            }
            DataError::VocabTooSmall { max_size, reserved } => {
                write!(f, "vocabulary budget {max_size} cannot hold {reserved} reserved tokens")
            }
            DataError::MalformedVocab { line, reason } => {
                write!(f, "vocabulary line {line}: {reason}")
            }
            DataError::ExampleTooLong { doc_id, index, tokens, max_tokens } => {
                write!(
                    f,
                    "document {doc_id} sentence {index}: {tokens} tokens exceed the batch budget of {max_tokens}"
                )
            }
            DataError::EmptySentence { doc_id, index } => {
                write!(f, "document {doc_id} sentence {index}: empty source sentence")
            }
            DataError::CountMismatch { hypotheses, references } => {
                write!(f, "{hypotheses} hypotheses scored against {references} references")
            }
        }
    }
}

impl core::error::Error for DataError {}

/// Problems detected at model entry points.
#[derive(Clone, Debug, PartialEq)]
pub enum ModelError {
    EmptyCurrentSentence,
    /// A token position beyond the position-embedding table.
    PositionOverflow { position: usize, max_positions: usize },
    /// A token id beyond the embedding table.
    TokenOutOfRange { id: usize, vocab_size: usize },
    /// Decoder prefix longer than the position table allows.
    PrefixTooLong { len: usize, max_positions: usize },
    InvalidConfig { reason: String },
    /// Training produced a non-finite loss; the step is reported so runs
    /// can be triaged from the log alone.
    NonFiniteLoss { step: u64 },
}

impl fmt::Display for ModelError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelError::EmptyCurrentSentence => write!(f, "current sentence is empty"),
            ModelError::PositionOverflow { position, max_positions } => {
                write!(f, "position {position} exceeds max_positions {max_positions}")
            }
            ModelError::TokenOutOfRange { id, vocab_size } => {
                write!(f, "token id {id} outside vocabulary of size {vocab_size}")
            }
            ModelError::PrefixTooLong { len, max_positions } => {
                write!(f, "target prefix of {len} tokens exceeds max_positions {max_positions}")
            }
            ModelError::InvalidConfig { reason } => write!(f, "invalid config: {reason}"),
            ModelError::NonFiniteLoss { step } => {
                write!(f, "non-finite loss at step {step}")
            }
        }
    }
}

impl core::error::Error for ModelError {}
