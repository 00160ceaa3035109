//! Model and training hyper-parameters.

use alloc::format;
use alloc::string::String;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

/// How many neighbouring sentences to pull in as context on each side.
/// `{1, 1}` is the offline setting; `{1, 0}` the online one.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContextWindow {
    pub previous: usize,
    pub next: usize,
}

impl Default for ContextWindow {
    fn default() -> Self {
        Self { previous: 1, next: 1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelConfig {
    /// Total vocabulary size including reserved tokens. Zero means "not
    /// yet known"; fill it in from the vocabulary before use.
    pub vocab_size: usize,
    pub d_model: usize,
    pub d_ffn: usize,
    pub heads: usize,
    /// Unified self-attention layer count.
    pub n1: usize,
    /// Selection layer count.
    pub n2: usize,
    /// Decoder depth; `None` means `n1 + n2`.
    pub decoder_layers: Option<usize>,
    /// Vote threshold fraction: a context token needs `q * p` votes.
    pub q: f64,
    /// Weight of the source-only loss in the combined objective.
    pub alpha: f64,
    /// Gate range scalar; the fused gate is confined to `[0, c]`.
    pub c: f64,
    pub dropout: f64,
    pub label_smoothing: f64,
    pub max_positions: usize,
    pub context_window: ContextWindow,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            vocab_size: 0,
            d_model: 128,
            d_ffn: 256,
            heads: 4,
            n1: 1,
            n2: 5,
            decoder_layers: None,
            q: 0.3,
            alpha: 0.5,
            c: 1.0,
            dropout: 0.1,
            label_smoothing: 0.1,
            max_positions: 256,
            context_window: ContextWindow::default(),
        }
    }
}

impl ModelConfig {
    pub fn new(vocab_size: usize) -> Self {
        Self { vocab_size, ..Self::default() }
    }

    pub fn decoder_layer_count(&self) -> usize {
        self.decoder_layers.unwrap_or(self.n1 + self.n2)
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.heads
    }

    pub fn encoder_layer_count(&self) -> usize {
        self.n1 + self.n2
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        fn invalid(reason: String) -> Result<(), ModelError> {
            Err(ModelError::InvalidConfig { reason })
        }
        if self.vocab_size == 0 {
            return invalid(format!("vocab_size must be positive"));
        }
        if self.d_model == 0 || self.d_ffn == 0 {
            return invalid(format!("d_model {} and d_ffn {} must be positive", self.d_model, self.d_ffn));
        }
        if self.heads == 0 || self.d_model % self.heads != 0 {
            return invalid(format!("d_model {} not divisible by heads {}", self.d_model, self.heads));
        }
        if self.n1 + self.n2 == 0 {
            return invalid(format!("n1 + n2 must be at least 1"));
        }
        if self.decoder_layer_count() == 0 {
            return invalid(format!("decoder_layers must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.q) {
            return invalid(format!("q {} outside [0, 1]", self.q));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return invalid(format!("alpha {} outside [0, 1]", self.alpha));
        }
        if !(0.0..=1.0).contains(&self.c) {
            return invalid(format!("c {} outside [0, 1]", self.c));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return invalid(format!("dropout {} outside [0, 1)", self.dropout));
        }
        if !(0.0..1.0).contains(&self.label_smoothing) {
            return invalid(format!("label_smoothing {} outside [0, 1)", self.label_smoothing));
        }
        if self.max_positions == 0 {
            return invalid(format!("max_positions must be positive"));
        }
        Ok(())
    }
}
