//! Operator surface for the selnmt model: file formats (corpus JSONL,
//! vocabulary text, binary checkpoints, metrics logs, trace exports) and
//! the subcommand implementations behind the `selnmt` binary.

pub mod checkpoint;
pub mod commands;
pub mod corpus_io;
pub mod fail;
pub mod metrics;
pub mod runconfig;
pub mod synth;
pub mod trace_io;
pub mod vocab_io;

pub use fail::Failure;
pub use runconfig::{Mode, RunConfig};
