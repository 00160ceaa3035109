//! Named parameter tensors.
//!
//! Every learnable tensor lives in one ordered map keyed by a stable name,
//! so checkpoints, gradient maps, and the optimizer all address parameters
//! the same way. Encoder layers are numbered absolutely (unified layers
//! first, then selection layers) which lets two configs that split the same
//! depth differently share one state.
//!
//! The output projection is tied to `embed.word`; it has no entry of its
//! own.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::config::ModelConfig;
use crate::mathx;
use crate::rng::SeededRng;
use crate::tensor::Tensor;

pub const SEGMENT_KINDS: usize = 3;

#[derive(Clone, Debug, PartialEq)]
pub struct ModelState {
    params: BTreeMap<String, Tensor>,
}

impl ModelState {
    /// Fresh parameters for `cfg`, drawn from `rng`: embeddings at scale
    /// `1/sqrt(d_model)`, projection weights Glorot-normal, biases zero,
    /// layer-norm gains one.
    pub fn init(cfg: &ModelConfig, rng: &mut SeededRng) -> Self {
        let d = cfg.d_model;
        let mut state = Self { params: BTreeMap::new() };

        let embed_std = 1.0 / mathx::sqrt(d as f64);
        state.insert("embed.word", normal(rng, cfg.vocab_size, d, embed_std));
        state.insert("embed.pos", normal(rng, cfg.max_positions, d, embed_std));
        state.insert("embed.seg", normal(rng, SEGMENT_KINDS, d, embed_std));

        for layer in 0..cfg.encoder_layer_count() {
            state.add_attention_block(rng, &format!("enc.{layer}.attn"), d);
            state.add_layer_norm(&format!("enc.{layer}.ln1"), d);
            state.add_layer_norm(&format!("enc.{layer}.ln2"), d);
            state.add_ffn(rng, &format!("enc.{layer}.ffn"), d, cfg.d_ffn);
        }
        state.add_layer_norm("enc.final_ln", d);

        for layer in 0..cfg.decoder_layer_count() {
            state.add_attention_block(rng, &format!("dec.{layer}.self"), d);
            state.add_attention_block(rng, &format!("dec.{layer}.cross_s"), d);
            state.add_attention_block(rng, &format!("dec.{layer}.cross_t"), d);
            state.insert(&format!("dec.{layer}.gate.ws"), normal(rng, d, 1, glorot(d, 1)));
            state.insert(&format!("dec.{layer}.gate.ut"), normal(rng, d, 1, glorot(d, 1)));
            state.insert(&format!("dec.{layer}.gate.b"), Tensor::zeros(1, 1));
            state.add_layer_norm(&format!("dec.{layer}.ln1"), d);
            state.add_layer_norm(&format!("dec.{layer}.ln2"), d);
            state.add_layer_norm(&format!("dec.{layer}.ln3"), d);
            state.add_ffn(rng, &format!("dec.{layer}.ffn"), d, cfg.d_ffn);
        }
        state.add_layer_norm("dec.final_ln", d);
        state
    }

    pub fn from_entries(entries: impl IntoIterator<Item = (String, Tensor)>) -> Self {
        Self { params: entries.into_iter().collect() }
    }

    fn add_attention_block(&mut self, rng: &mut SeededRng, prefix: &str, d: usize) {
        for w in ["wq", "wk", "wv", "wo"] {
            self.insert(&format!("{prefix}.{w}"), normal(rng, d, d, glorot(d, d)));
        }
        for b in ["bq", "bk", "bv", "bo"] {
            self.insert(&format!("{prefix}.{b}"), Tensor::zeros(1, d));
        }
    }

    fn add_ffn(&mut self, rng: &mut SeededRng, prefix: &str, d: usize, d_ffn: usize) {
        self.insert(&format!("{prefix}.w1"), normal(rng, d, d_ffn, glorot(d, d_ffn)));
        self.insert(&format!("{prefix}.b1"), Tensor::zeros(1, d_ffn));
        self.insert(&format!("{prefix}.w2"), normal(rng, d_ffn, d, glorot(d_ffn, d)));
        self.insert(&format!("{prefix}.b2"), Tensor::zeros(1, d));
    }

    fn add_layer_norm(&mut self, prefix: &str, d: usize) {
        self.insert(&format!("{prefix}.gain"), Tensor::filled(1, d, 1.0));
        self.insert(&format!("{prefix}.bias"), Tensor::zeros(1, d));
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) {
        self.params.insert(String::from(name), tensor);
    }

    pub fn get(&self, name: &str) -> &Tensor {
        self.params
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn get_mut(&mut self, name: &str) -> &mut Tensor {
        self.params
            .get_mut(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn contains(&self, name: &str) -> bool {
        self.params.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Names in sorted order.
    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.params.keys().map(String::as_str)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.params.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn scalar_count(&self) -> usize {
        self.params.values().map(Tensor::len).sum()
    }
}

fn glorot(fan_in: usize, fan_out: usize) -> f64 {
    mathx::sqrt(2.0 / (fan_in + fan_out) as f64)
}

fn normal(rng: &mut SeededRng, rows: usize, cols: usize, std: f64) -> Tensor {
    let data: Vec<f64> = (0..rows * cols).map(|_| rng.normal() * std).collect();
    Tensor::from_vec(rows, cols, data)
}
