//! One flat configuration surface for every subcommand.
//!
//! A run is described by a single JSON object; command-line flags override
//! individual keys. The merged result is echoed at startup, written into
//! every checkpoint, and stamped on every output file, so an artifact
//! always names the settings that produced it.

use std::fs;
use std::path::Path;

use clap::ValueEnum;
use serde::{Deserialize, Serialize};

use selnmt_core::{BeamConfig, ContextWindow, ModelConfig, TrainConfig};

use crate::fail::Failure;

/// Whether the target-context path participates.
///
/// `mono` trains on the source-context loss alone and decodes in one pass.
/// `bi` mixes both losses by `alpha` and decodes in two passes, feeding
/// first-pass translations back in as target context.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Mono,
    Bi,
}

/// The full settings of a run, flattened into one key space. `alpha` lives
/// here exactly once and feeds both the model and the trainer.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    // Architecture.
    pub d_model: usize,
    pub d_ffn: usize,
    pub heads: usize,
    pub n1: usize,
    pub n2: usize,
    pub decoder_layers: Option<usize>,
    pub q: f64,
    pub alpha: f64,
    pub c: f64,
    pub dropout: f64,
    pub label_smoothing: f64,
    pub max_positions: usize,
    pub context_window: ContextWindow,
    /// Filled in from the built or loaded vocabulary, not by the operator.
    pub vocab_size: usize,
    // Optimization.
    pub seed: u64,
    pub steps: u64,
    pub warmup: u64,
    pub lr_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub max_tokens: usize,
    pub checkpoint_every: u64,
    // Decoding.
    pub beam: usize,
    pub length_penalty: f64,
    pub max_len_factor: f64,
    // Data.
    pub max_vocab: usize,
    pub subword: bool,
    /// Character-pair merge rounds when `subword` is on.
    pub merge_rounds: usize,
    pub mode: Mode,
}

impl Default for RunConfig {
    fn default() -> Self {
        let m = ModelConfig::default();
        let t = TrainConfig::default();
        let b = BeamConfig::default();
        Self {
            d_model: m.d_model,
            d_ffn: m.d_ffn,
            heads: m.heads,
            n1: m.n1,
            n2: m.n2,
            decoder_layers: m.decoder_layers,
            q: m.q,
            alpha: m.alpha,
            c: m.c,
            dropout: m.dropout,
            label_smoothing: m.label_smoothing,
            max_positions: m.max_positions,
            context_window: m.context_window,
            vocab_size: 0,
            seed: t.seed,
            steps: t.steps,
            warmup: t.warmup,
            lr_scale: t.lr_scale,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
            max_tokens: t.max_tokens,
            checkpoint_every: t.checkpoint_every,
            beam: b.beam,
            length_penalty: b.penalty,
            max_len_factor: b.max_len_factor,
            max_vocab: 4096,
            subword: false,
            merge_rounds: 200,
            mode: Mode::Mono,
        }
    }
}

impl RunConfig {
    /// Parses a config file. Unknown keys are rejected so a typo cannot
    /// silently fall back to a default.
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| Failure::Usage(format!("config {}: {e}", path.display())))
    }

    /// Locks in the vocabulary size and the mode's loss weighting, then
    /// checks every derived config. Call once the vocabulary exists.
    pub fn finalize(&mut self, vocab_len: usize) -> Result<(), Failure> {
        self.vocab_size = vocab_len;
        if self.mode == Mode::Mono {
            self.alpha = 1.0;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), Failure> {
        self.model_config().validate()?;
        self.train_config().validate()?;
        self.beam_config().validate()?;
        Ok(())
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            vocab_size: self.vocab_size,
            d_model: self.d_model,
            d_ffn: self.d_ffn,
            heads: self.heads,
            n1: self.n1,
            n2: self.n2,
            decoder_layers: self.decoder_layers,
            q: self.q,
            alpha: self.alpha,
            c: self.c,
            dropout: self.dropout,
            label_smoothing: self.label_smoothing,
            max_positions: self.max_positions,
            context_window: self.context_window,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            steps: self.steps,
            warmup: self.warmup,
            lr_scale: self.lr_scale,
            beta1: self.beta1,
            beta2: self.beta2,
            adam_eps: self.adam_eps,
            alpha: self.alpha,
            max_tokens: self.max_tokens,
            checkpoint_every: self.checkpoint_every,
        }
    }

    pub fn beam_config(&self) -> BeamConfig {
        BeamConfig { beam: self.beam, penalty: self.length_penalty, max_len_factor: self.max_len_factor }
    }
}

/// Parses the `--window P,N` override.
pub fn parse_window(s: &str) -> Result<ContextWindow, String> {
    let (p, n) = s.split_once(',').ok_or_else(|| format!("expected P,N but got {s:?}"))?;
    let previous = p.trim().parse().map_err(|e| format!("previous count {p:?}: {e}"))?;
    let next = n.trim().parse().map_err(|e| format!("next count {n:?}: {e}"))?;
    Ok(ContextWindow { previous, next })
}
