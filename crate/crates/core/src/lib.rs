//! Context-aware translation with layer-wise context selection.
//!
//! An encoder-decoder sequence model whose encoder consumes the current
//! source sentence concatenated with neighbouring document context and
//! progressively discards context tokens that the current sentence does not
//! attend to. The crate is self-contained: it ships its own dense-tensor
//! numerics with reverse-mode gradients, the selection voting mechanism, the
//! full encoder/decoder (including the bilingual gated decoder), training
//! losses and optimizer, beam-search decoding, and corpus BLEU.
//!
//! Everything here is `no_std`-compatible (with `alloc`); file formats, the
//! CLI, and all IO live in the companion `selnmt` crate.
//!
//! Error policy: data-level problems (bad corpus input, oversized sentences,
//! mismatched checkpoints) are reported through `Result`; violations of
//! documented numeric preconditions (shape mismatches, non-scalar losses)
//! panic with a message naming the offending shapes.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod beam;
pub mod bleu;
pub mod config;
pub mod data;
pub mod error;
pub mod gradcheck;
pub mod layout;
mod mathx;
pub mod model;
pub mod rng;
pub mod selection;
pub mod state;
pub mod tape;
pub mod tensor;
pub mod train;
pub mod translate;
pub mod vocab;

pub use beam::BeamConfig;
pub use config::{ContextWindow, ModelConfig};
pub use data::{Batch, ContextExample, Document, DocumentCorpus, EncoderInput};
pub use error::{DataError, ModelError};
pub use layout::{Segment, SegmentLayout};
pub use model::{EncoderOutput, SelectionLayerTrace, Session};
pub use rng::SeededRng;
pub use selection::SelectionDecision;
pub use state::ModelState;
pub use tape::{Tape, ValueId};
pub use tensor::Tensor;
pub use train::{StepMetrics, TrainConfig, Trainer};
pub use vocab::Vocabulary;
