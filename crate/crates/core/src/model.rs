//! The network: embedding, unified and selection encoder layers, and the
//! two decoding paths (standard, and dual-context with a fused gate).
//!
//! A [`Session`] owns one tape and binds every named parameter onto it, so
//! a forward pass followed by `backward` yields a gradient per parameter.
//! Inference reuses one session across decode steps by truncating the tape
//! back to the post-encoder watermark.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use serde::Serialize;

use crate::config::ModelConfig;
use crate::data::EncoderInput;
use crate::error::ModelError;
use crate::layout::SegmentLayout;
use crate::mathx;
use crate::rng::SeededRng;
use crate::selection;
use crate::state::ModelState;
use crate::tape::{Tape, ValueId};
use crate::tensor::Tensor;

pub const LN_EPS: f64 = 1e-5;

/// Additive attention-logit penalty for dead or causally-forbidden keys.
/// Finite so the tape's all-finite invariant holds, yet large enough that
/// the softmax underflows those entries to exactly zero.
pub const MASK_PENALTY: f64 = -1e9;

/// What one selection layer saw and decided, restricted to the tokens that
/// were alive when the layer ran. Slot indices refer to the original
/// concatenation.
#[derive(Clone, Debug, Serialize)]
pub struct SelectionLayerTrace {
    /// Absolute encoder layer index.
    pub layer: usize,
    pub alive_before: Vec<usize>,
    /// Head-averaged attention over `alive_before` rows and columns.
    pub averaged_attention: Vec<Vec<f64>>,
    /// Per-voter baselines, one per current-sentence token.
    pub baselines: Vec<f64>,
    pub candidates: Vec<usize>,
    pub scores: Vec<usize>,
    pub threshold: f64,
    pub kept: Vec<usize>,
    pub dropped: Vec<usize>,
    /// Alive context tokens after this layer over context tokens alive at
    /// encoder entry; 1.0 when the input had no context.
    pub ratio_after: f64,
}

pub struct EncoderOutput {
    /// Representations of the surviving tokens, `[layout.m(), d_model]`.
    pub representations: ValueId,
    /// Compacted layout; `original_positions` map rows back to the input
    /// concatenation.
    pub layout: SegmentLayout,
    /// One entry per selection layer.
    pub trace: Vec<SelectionLayerTrace>,
}

pub struct Session<'a> {
    cfg: &'a ModelConfig,
    tape: Tape,
    bound: BTreeMap<String, ValueId>,
    train_mode: bool,
    rng: Option<SeededRng>,
}

impl<'a> Session<'a> {
    /// Inference session: no dropout, no gradients.
    pub fn eval(cfg: &'a ModelConfig, state: &'a ModelState) -> Self {
        Self::build(cfg, state, false, None)
    }

    /// Training session: dropout active, every parameter tracked for
    /// gradients. `rng` drives the dropout masks.
    pub fn train(cfg: &'a ModelConfig, state: &'a ModelState, rng: SeededRng) -> Self {
        Self::build(cfg, state, true, Some(rng))
    }

    fn build(cfg: &'a ModelConfig, state: &'a ModelState, train_mode: bool, rng: Option<SeededRng>) -> Self {
        let mut tape = Tape::new();
        let mut bound = BTreeMap::new();
        for (name, tensor) in state.iter() {
            bound.insert(String::from(name), tape.leaf(tensor.clone(), train_mode));
        }
        Self { cfg, tape, bound, train_mode, rng }
    }

    fn p(&self, name: &str) -> ValueId {
        *self
            .bound
            .get(name)
            .unwrap_or_else(|| panic!("no parameter named {name}"))
    }

    pub fn value(&self, id: ValueId) -> &Tensor {
        self.tape.value(id)
    }

    /// Direct tape access, for callers composing recorded values into
    /// larger expressions (loss mixing, custom probes).
    pub fn tape_mut(&mut self) -> &mut Tape {
        &mut self.tape
    }

    pub fn config(&self) -> &ModelConfig {
        self.cfg
    }

    /// Tape watermark; see [`Session::truncate`].
    pub fn mark(&self) -> usize {
        self.tape.len()
    }

    /// Drop every node recorded after `mark`. Lets decoding reuse one
    /// encoded context across many prefix evaluations.
    pub fn truncate(&mut self, mark: usize) {
        assert!(mark >= self.bound.len(), "truncating into bound parameters");
        self.tape.truncate(mark);
    }

    pub fn backward_with_seed(&mut self, root: ValueId, seed: f64) {
        self.tape.backward_with_seed(root, seed);
    }

    /// Gradient per parameter after a backward pass; parameters the loss
    /// never touched report zeros.
    pub fn grad_map(&self) -> BTreeMap<String, Tensor> {
        self.bound
            .iter()
            .map(|(name, &id)| {
                let g = match self.tape.grad(id) {
                    Some(t) => t.clone(),
                    None => {
                        let v = self.tape.value(id);
                        Tensor::zeros(v.rows(), v.cols())
                    }
                };
                (name.clone(), g)
            })
            .collect()
    }

    /// Mean label-smoothed cross entropy of `logits` rows against
    /// `targets`, over the rows where `include` is set. Returns the loss
    /// node and the included-row count.
    pub fn smoothed_loss(&mut self, logits: ValueId, targets: &[usize], include: &[bool]) -> (ValueId, usize) {
        let count = include.iter().filter(|&&b| b).count();
        assert!(count > 0, "loss over zero target tokens");
        let sum = self
            .tape
            .smoothed_ce_sum(logits, targets, include, self.cfg.label_smoothing);
        (self.tape.scale(sum, 1.0 / count as f64), count)
    }

    /// Sum (not mean) variant, for callers that pool counts themselves.
    pub fn smoothed_loss_sum(&mut self, logits: ValueId, targets: &[usize], include: &[bool]) -> ValueId {
        self.tape
            .smoothed_ce_sum(logits, targets, include, self.cfg.label_smoothing)
    }

    fn dropout(&mut self, x: ValueId) -> ValueId {
        if !self.train_mode || self.cfg.dropout == 0.0 {
            return x;
        }
        let keep = 1.0 - self.cfg.dropout;
        let (rows, cols) = self.tape.value(x).shape();
        let rng = self.rng.as_mut().expect("training session without rng");
        let data: Vec<f64> = (0..rows * cols)
            .map(|_| if rng.uniform() < keep { 1.0 / keep } else { 0.0 })
            .collect();
        let mask = self.tape.constant(Tensor::from_vec(rows, cols, data));
        self.tape.mul(x, mask)
    }

    fn check_ids(&self, ids: &[usize]) -> Result<(), ModelError> {
        for &id in ids {
            if id >= self.cfg.vocab_size {
                return Err(ModelError::TokenOutOfRange { id, vocab_size: self.cfg.vocab_size });
            }
        }
        Ok(())
    }

    /// Word + position + segment embedding of a concatenation, with the
    /// word table scaled by sqrt(d_model).
    fn embed_concat(&mut self, input: &EncoderInput) -> Result<ValueId, ModelError> {
        self.check_ids(&input.ids)?;
        for &pos in &input.positions {
            if pos >= self.cfg.max_positions {
                return Err(ModelError::PositionOverflow { position: pos, max_positions: self.cfg.max_positions });
            }
        }
        let words = self.tape.gather(self.p("embed.word"), input.ids.clone());
        let scaled = self.tape.scale(words, mathx::sqrt(self.cfg.d_model as f64));
        let pos = self.tape.gather(self.p("embed.pos"), input.positions.clone());
        let segs: Vec<usize> = input.layout.segments().iter().map(|s| s.id()).collect();
        let seg = self.tape.gather(self.p("embed.seg"), segs);
        let sum = self.tape.add(scaled, pos);
        let sum = self.tape.add(sum, seg);
        Ok(self.dropout(sum))
    }

    /// Word + position embedding of a decoder prefix (no segments).
    fn embed_prefix(&mut self, prefix: &[usize]) -> Result<ValueId, ModelError> {
        if prefix.len() > self.cfg.max_positions {
            return Err(ModelError::PrefixTooLong { len: prefix.len(), max_positions: self.cfg.max_positions });
        }
        self.check_ids(prefix)?;
        let words = self.tape.gather(self.p("embed.word"), prefix.to_vec());
        let scaled = self.tape.scale(words, mathx::sqrt(self.cfg.d_model as f64));
        let pos = self.tape.gather(self.p("embed.pos"), (0..prefix.len()).collect());
        let sum = self.tape.add(scaled, pos);
        Ok(self.dropout(sum))
    }

    /// Multi-head attention block `prefix.{wq,wk,wv,wo,bq,bk,bv,bo}` with
    /// queries from `xq` and keys/values from `xkv`. Returns the projected
    /// output and the per-head attention matrices.
    fn attention(&mut self, prefix: &str, xq: ValueId, xkv: ValueId, mask: Option<Tensor>) -> (ValueId, Vec<ValueId>) {
        let dk = self.cfg.head_dim();
        let q_all = self.projected(prefix, "wq", "bq", xq);
        let k_all = self.projected(prefix, "wk", "bk", xkv);
        let v_all = self.projected(prefix, "wv", "bv", xkv);
        let mask_id = mask.map(|m| self.tape.constant(m));
        let mut heads = Vec::with_capacity(self.cfg.heads);
        let mut probs = Vec::with_capacity(self.cfg.heads);
        for h in 0..self.cfg.heads {
            let qh = self.tape.slice_cols(q_all, h * dk, dk);
            let kh = self.tape.slice_cols(k_all, h * dk, dk);
            let vh = self.tape.slice_cols(v_all, h * dk, dk);
            let scores = self.tape.matmul_tb(qh, kh);
            let mut scaled = self.tape.scale(scores, 1.0 / mathx::sqrt(dk as f64));
            if let Some(m) = mask_id {
                scaled = self.tape.add(scaled, m);
            }
            let attn = self.tape.softmax_rows(scaled);
            probs.push(attn);
            heads.push(self.tape.matmul(attn, vh));
        }
        let merged = self.tape.concat_cols(&heads);
        let out = self.projected(prefix, "wo", "bo", merged);
        (out, probs)
    }

    fn projected(&mut self, prefix: &str, w: &str, b: &str, x: ValueId) -> ValueId {
        let wid = self.p(&format!("{prefix}.{w}"));
        let bid = self.p(&format!("{prefix}.{b}"));
        let prod = self.tape.matmul(x, wid);
        self.tape.add_row(prod, bid)
    }

    fn layer_norm(&mut self, prefix: &str, x: ValueId) -> ValueId {
        let gain = self.p(&format!("{prefix}.gain"));
        let bias = self.p(&format!("{prefix}.bias"));
        self.tape.layer_norm(x, gain, bias, LN_EPS)
    }

    fn ffn(&mut self, prefix: &str, x: ValueId) -> ValueId {
        let h = self.projected(prefix, "w1", "b1", x);
        let h = self.tape.relu(h);
        self.projected(prefix, "w2", "b2", h)
    }

    /// One pre-norm encoder block over the concatenation; dead slots are
    /// masked out of the keys. Returns the new representations and this
    /// block's attention heads.
    fn encoder_layer(&mut self, layer: usize, x: ValueId, layout: &SegmentLayout) -> (ValueId, Vec<ValueId>) {
        let n = layout.len();
        let normed = self.layer_norm(&format!("enc.{layer}.ln1"), x);
        let mask = dead_key_mask(n, layout.alive_flags());
        let (attn, probs) = self.attention(&format!("enc.{layer}.attn"), normed, normed, mask);
        let attn = self.dropout(attn);
        let x = self.tape.add(x, attn);
        let normed = self.layer_norm(&format!("enc.{layer}.ln2"), x);
        let ffn = self.ffn(&format!("enc.{layer}.ffn"), normed);
        let ffn = self.dropout(ffn);
        (self.tape.add(x, ffn), probs)
    }

    /// Run the full encoder: `n1` unified layers, then `n2` selection
    /// layers that vote context tokens dead, then compaction to the
    /// survivors and the final layer norm.
    pub fn encode(&mut self, input: &EncoderInput) -> Result<EncoderOutput, ModelError> {
        let mut layout = input.layout.clone();
        let initial_context = layout.candidates().len();
        let mut x = self.embed_concat(input)?;
        let mut trace = Vec::with_capacity(self.cfg.n2);
        for layer in 0..self.cfg.n1 {
            (x, _) = self.encoder_layer(layer, x, &layout);
        }
        for step in 0..self.cfg.n2 {
            let layer = self.cfg.n1 + step;
            let alive_before = layout.alive_indices();
            let (next, prob_ids) = self.encoder_layer(layer, x, &layout);
            x = next;
            let heads: Vec<Tensor> = prob_ids.iter().map(|&id| self.tape.value(id).clone()).collect();
            let avg = selection::average_heads(&heads);
            let baselines = selection::source_baseline(&avg, &layout);
            let decision = selection::decide(&avg, &layout, self.cfg.q);
            for slot in decision.dropped() {
                layout.kill(slot);
            }
            let ratio_after = if initial_context == 0 {
                1.0
            } else {
                layout.candidates().len() as f64 / initial_context as f64
            };
            trace.push(SelectionLayerTrace {
                layer,
                averaged_attention: restrict(&avg, &alive_before),
                baselines,
                candidates: decision.candidates.clone(),
                scores: decision.scores.clone(),
                threshold: decision.threshold,
                kept: decision.kept(),
                dropped: decision.dropped(),
                alive_before,
                ratio_after,
            });
        }
        let survivors = layout.alive_indices();
        let gathered = self.tape.gather(x, survivors);
        let out = self.layer_norm("enc.final_ln", gathered);
        Ok(EncoderOutput { representations: out, layout: layout.compact(), trace })
    }

    /// Standard decoder over one encoded context: causal self-attention,
    /// cross-attention (the source-side block), feed-forward; returns
    /// vocabulary logits per prefix position via the tied word embedding.
    pub fn decode_mono(&mut self, prefix: &[usize], enc: &EncoderOutput) -> Result<ValueId, ModelError> {
        let mut x = self.embed_prefix(prefix)?;
        let causal = causal_mask(prefix.len());
        for layer in 0..self.cfg.decoder_layer_count() {
            x = self.decoder_self(layer, x, &causal);
            let normed = self.layer_norm(&format!("dec.{layer}.ln2"), x);
            let (z, _) = self.attention(&format!("dec.{layer}.cross_s"), normed, enc.representations, None);
            let z = self.dropout(z);
            x = self.tape.add(x, z);
            x = self.decoder_ffn(layer, x);
        }
        Ok(self.output_logits(x))
    }

    /// Dual-context decoder: one cross-attention over the source
    /// concatenation, one over the target concatenation, fused per
    /// position by the gate.
    pub fn decode_bi(
        &mut self,
        prefix: &[usize],
        enc_src: &EncoderOutput,
        enc_tgt: &EncoderOutput,
    ) -> Result<ValueId, ModelError> {
        let mut x = self.embed_prefix(prefix)?;
        let causal = causal_mask(prefix.len());
        for layer in 0..self.cfg.decoder_layer_count() {
            x = self.decoder_self(layer, x, &causal);
            let normed = self.layer_norm(&format!("dec.{layer}.ln2"), x);
            let (zs, _) = self.attention(&format!("dec.{layer}.cross_s"), normed, enc_src.representations, None);
            let (zt, _) = self.attention(&format!("dec.{layer}.cross_t"), normed, enc_tgt.representations, None);
            let fused = self.gate_fuse(zs, zt, layer);
            let fused = self.dropout(fused);
            x = self.tape.add(x, fused);
            x = self.decoder_ffn(layer, x);
        }
        Ok(self.output_logits(x))
    }

    /// Per-position convex blend of the two cross-attention outputs:
    /// `gamma = c * sigmoid(z_s W_s + z_t U_t + b)`, then
    /// `(1 - gamma) * z_s + gamma * z_t`. With `c = 0` the target branch
    /// is multiplied by an exact zero.
    pub fn gate_fuse(&mut self, zs: ValueId, zt: ValueId, layer: usize) -> ValueId {
        let a = self.tape.value(zs).shape();
        let b = self.tape.value(zt).shape();
        assert_eq!(a, b, "gate_fuse [{}x{}] vs [{}x{}]", a.0, a.1, b.0, b.1);
        let ws = self.p(&format!("dec.{layer}.gate.ws"));
        let ut = self.p(&format!("dec.{layer}.gate.ut"));
        let bias = self.p(&format!("dec.{layer}.gate.b"));
        let s = self.tape.matmul(zs, ws);
        let t = self.tape.matmul(zt, ut);
        let sum = self.tape.add(s, t);
        let sum = self.tape.add_row(sum, bias);
        let sig = self.tape.sigmoid(sum);
        let gamma = self.tape.scale(sig, self.cfg.c);
        let ones = self.tape.constant(Tensor::filled(a.0, 1, 1.0));
        let inv = self.tape.sub(ones, gamma);
        let left = self.tape.mul_col(zs, inv);
        let right = self.tape.mul_col(zt, gamma);
        self.tape.add(left, right)
    }

    fn decoder_self(&mut self, layer: usize, x: ValueId, causal: &Tensor) -> ValueId {
        let normed = self.layer_norm(&format!("dec.{layer}.ln1"), x);
        let (sa, _) = self.attention(&format!("dec.{layer}.self"), normed, normed, Some(causal.clone()));
        let sa = self.dropout(sa);
        self.tape.add(x, sa)
    }

    fn decoder_ffn(&mut self, layer: usize, x: ValueId) -> ValueId {
        let normed = self.layer_norm(&format!("dec.{layer}.ln3"), x);
        let f = self.ffn(&format!("dec.{layer}.ffn"), normed);
        let f = self.dropout(f);
        self.tape.add(x, f)
    }

    fn output_logits(&mut self, x: ValueId) -> ValueId {
        let normed = self.layer_norm("dec.final_ln", x);
        self.tape.matmul_tb(normed, self.p("embed.word"))
    }
}

/// Mask adding [`MASK_PENALTY`] on columns of dead slots; `None` when
/// everything is alive.
fn dead_key_mask(n_rows: usize, alive: &[bool]) -> Option<Tensor> {
    if alive.iter().all(|&a| a) {
        return None;
    }
    let mut mask = Tensor::zeros(n_rows, alive.len());
    for (j, &ok) in alive.iter().enumerate() {
        if !ok {
            for i in 0..n_rows {
                mask.set(i, j, MASK_PENALTY);
            }
        }
    }
    Some(mask)
}

fn causal_mask(n: usize) -> Tensor {
    let mut mask = Tensor::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            mask.set(i, j, MASK_PENALTY);
        }
    }
    mask
}

fn restrict(avg: &Tensor, rows: &[usize]) -> Vec<Vec<f64>> {
    rows.iter()
        .map(|&i| rows.iter().map(|&j| avg.at(i, j)).collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::Segment;
    use alloc::vec;

    fn tiny_cfg() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            d_ffn: 16,
            heads: 2,
            n1: 1,
            n2: 2,
            decoder_layers: Some(1),
            q: 0.4,
            dropout: 0.0,
            max_positions: 16,
            ..ModelConfig::new(11)
        }
    }

    fn simple_input(current: &[usize], context: &[usize]) -> EncoderInput {
        let mut segs = vec![Segment::Current; current.len()];
        segs.extend(vec![Segment::SourceContext; context.len()]);
        let layout = SegmentLayout::new(current.len(), segs);
        let mut ids = current.to_vec();
        ids.extend_from_slice(context);
        let positions: Vec<usize> = (0..current.len()).chain(0..context.len()).collect();
        EncoderInput { ids, positions, layout }
    }

    #[test]
    fn zeroed_output_projections_make_layers_identity() {
        let cfg = tiny_cfg();
        let mut state = ModelState::init(&cfg, &mut SeededRng::new(3));
        for layer in 0..cfg.encoder_layer_count() {
            *state.get_mut(&format!("enc.{layer}.attn.wo")) = Tensor::zeros(8, 8);
            *state.get_mut(&format!("enc.{layer}.attn.bo")) = Tensor::zeros(1, 8);
            *state.get_mut(&format!("enc.{layer}.ffn.w2")) = Tensor::zeros(16, 8);
            *state.get_mut(&format!("enc.{layer}.ffn.b2")) = Tensor::zeros(1, 8);
        }
        let input = simple_input(&[5, 6, 7], &[8, 9]);
        let mut sess = Session::eval(&cfg, &state);
        let embedded = sess.embed_concat(&input).unwrap();
        let before = sess.value(embedded).clone();
        let (out, _) = sess.encoder_layer(0, embedded, &input.layout);
        assert_eq!(sess.value(out), &before);
    }

    #[test]
    fn dead_slots_get_exactly_zero_attention() {
        let cfg = tiny_cfg();
        let state = ModelState::init(&cfg, &mut SeededRng::new(5));
        let input = simple_input(&[1, 2], &[3, 4, 5]);
        let mut layout = input.layout.clone();
        layout.kill(3);
        let mut sess = Session::eval(&cfg, &state);
        let embedded = sess.embed_concat(&input).unwrap();
        let (_, probs) = sess.encoder_layer(0, embedded, &layout);
        for prob in probs {
            let t = sess.value(prob);
            for i in 0..t.rows() {
                assert_eq!(t.at(i, 3), 0.0, "row {i} leaked weight to a dead slot");
                let total: f64 = t.row(i).iter().sum();
                assert!((total - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn segment_embedding_distinguishes_equal_tokens() {
        let cfg = tiny_cfg();
        let state = ModelState::init(&cfg, &mut SeededRng::new(7));
        // Same token id, same in-sentence position, different segments.
        let input = simple_input(&[4], &[4]);
        let mut sess = Session::eval(&cfg, &state);
        let embedded = sess.embed_concat(&input).unwrap();
        let t = sess.value(embedded);
        assert_ne!(t.row(0), t.row(1));
        let seg = state.get("embed.seg");
        let diff: Vec<f64> = t
            .row(0)
            .iter()
            .zip(t.row(1))
            .map(|(a, b)| a - b)
            .collect();
        for (j, d) in diff.iter().enumerate() {
            let expected = seg.at(Segment::Current.id(), j) - seg.at(Segment::SourceContext.id(), j);
            assert!((d - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn encode_reports_nested_alive_sets_and_monotone_ratios() {
        let cfg = ModelConfig { n2: 3, q: 0.6, ..tiny_cfg() };
        let state = ModelState::init(&cfg, &mut SeededRng::new(11));
        let input = simple_input(&[1, 2, 3], &[4, 5, 6, 7, 8, 9]);
        let mut sess = Session::eval(&cfg, &state);
        let enc = sess.encode(&input).unwrap();
        assert_eq!(enc.trace.len(), 3);
        let mut prev_ratio = 1.0;
        let mut prev_alive: Vec<usize> = (0..input.layout.len()).collect();
        for entry in &enc.trace {
            assert!(entry.ratio_after <= prev_ratio + 1e-15);
            prev_ratio = entry.ratio_after;
            assert!(entry.alive_before.iter().all(|slot| prev_alive.contains(slot)));
            let survivors: Vec<usize> = entry
                .alive_before
                .iter()
                .copied()
                .filter(|slot| !entry.dropped.contains(slot))
                .collect();
            prev_alive = survivors;
            for voter in 0..input.layout.p() {
                assert!(entry.alive_before.contains(&voter), "current token {voter} dropped");
            }
        }
        assert_eq!(enc.layout.m(), enc.layout.len());
        assert_eq!(sess.value(enc.representations).rows(), enc.layout.m());
        // The final layout's survivors are exactly the last layer's.
        let final_slots: Vec<usize> = enc.layout.original_positions().to_vec();
        assert_eq!(final_slots, prev_alive);
    }

    #[test]
    fn q_zero_encode_keeps_everything() {
        let cfg = ModelConfig { q: 0.0, ..tiny_cfg() };
        let state = ModelState::init(&cfg, &mut SeededRng::new(13));
        let input = simple_input(&[1, 2], &[3, 4, 5, 6]);
        let mut sess = Session::eval(&cfg, &state);
        let enc = sess.encode(&input).unwrap();
        for entry in &enc.trace {
            assert!(entry.dropped.is_empty());
            assert_eq!(entry.ratio_after, 1.0);
        }
        assert_eq!(enc.layout.m(), input.layout.len());
    }

    #[test]
    fn single_token_prefix_logit_shape() {
        let cfg = tiny_cfg();
        let state = ModelState::init(&cfg, &mut SeededRng::new(17));
        let input = simple_input(&[1, 2, 3], &[4, 5]);
        let mut sess = Session::eval(&cfg, &state);
        let enc = sess.encode(&input).unwrap();
        let logits = sess.decode_mono(&[1], &enc).unwrap();
        assert_eq!(sess.value(logits).shape(), (1, 11));
    }

    #[test]
    fn gate_at_zero_weights_is_midpoint() {
        let cfg = ModelConfig { c: 1.0, ..tiny_cfg() };
        let mut state = ModelState::init(&cfg, &mut SeededRng::new(19));
        *state.get_mut("dec.0.gate.ws") = Tensor::zeros(8, 1);
        *state.get_mut("dec.0.gate.ut") = Tensor::zeros(8, 1);
        *state.get_mut("dec.0.gate.b") = Tensor::zeros(1, 1);
        let mut sess = Session::eval(&cfg, &state);
        let zs = sess.tape.constant(Tensor::from_rows(&[&[2.0; 8], &[4.0; 8]]));
        let zt = sess.tape.constant(Tensor::from_rows(&[&[0.0; 8], &[0.0; 8]]));
        let fused = sess.gate_fuse(zs, zt, 0);
        let t = sess.value(fused);
        for v in t.row(0) {
            assert_eq!(*v, 1.0);
        }
        for v in t.row(1) {
            assert_eq!(*v, 2.0);
        }
    }

    #[test]
    fn gate_c_zero_returns_source_branch_exactly() {
        let cfg = ModelConfig { c: 0.0, ..tiny_cfg() };
        let state = ModelState::init(&cfg, &mut SeededRng::new(23));
        let mut sess = Session::eval(&cfg, &state);
        let mut rng = SeededRng::new(29);
        let zs_t = Tensor::from_vec(3, 8, (0..24).map(|_| rng.normal()).collect());
        let zt_t = Tensor::from_vec(3, 8, (0..24).map(|_| rng.normal()).collect());
        let zs = sess.tape.constant(zs_t.clone());
        let zt = sess.tape.constant(zt_t);
        let fused = sess.gate_fuse(zs, zt, 0);
        let out = sess.value(fused);
        for (a, b) in out.data().iter().zip(zs_t.data()) {
            assert_eq!(a, b);
        }
    }

    #[test]
    fn bi_with_c_zero_matches_mono_logits() {
        let cfg = ModelConfig { c: 0.0, decoder_layers: Some(2), ..tiny_cfg() };
        let state = ModelState::init(&cfg, &mut SeededRng::new(31));
        let src = simple_input(&[1, 2, 3], &[4, 5, 6]);
        let tgt_ctx = {
            let mut segs = vec![Segment::Current; 3];
            segs.extend(vec![Segment::TargetContext; 2]);
            EncoderInput {
                ids: vec![1, 2, 3, 9, 10],
                positions: vec![0, 1, 2, 0, 1],
                layout: SegmentLayout::new(3, segs),
            }
        };
        let prefix = [1usize, 7, 8];

        let mut mono = Session::eval(&cfg, &state);
        let enc = mono.encode(&src).unwrap();
        let mono_logits = mono.decode_mono(&prefix, &enc).unwrap();

        let mut bi = Session::eval(&cfg, &state);
        let enc_s = bi.encode(&src).unwrap();
        let enc_t = bi.encode(&tgt_ctx).unwrap();
        let bi_logits = bi.decode_bi(&prefix, &enc_s, &enc_t).unwrap();

        let a = mono.value(mono_logits);
        let b = bi.value(bi_logits);
        assert_eq!(a.shape(), b.shape());
        for (x, y) in a.data().iter().zip(b.data()) {
            assert_eq!(x, y);
        }
    }

    #[test]
    fn truncate_allows_reencoding_free_decode_steps() {
        let cfg = tiny_cfg();
        let state = ModelState::init(&cfg, &mut SeededRng::new(37));
        let input = simple_input(&[1, 2], &[3, 4]);
        let mut sess = Session::eval(&cfg, &state);
        let enc = sess.encode(&input).unwrap();
        let mark = sess.mark();
        let l1 = sess.decode_mono(&[1], &enc).unwrap();
        let first = sess.value(l1).clone();
        let grown = sess.mark();
        assert!(grown > mark);
        sess.truncate(mark);
        assert_eq!(sess.mark(), mark);
        let l2 = sess.decode_mono(&[1, 3], &enc).unwrap();
        assert_eq!(sess.value(l2).row(0), first.row(0));
    }

    #[test]
    fn out_of_range_ids_and_positions_are_rejected() {
        let cfg = tiny_cfg();
        let state = ModelState::init(&cfg, &mut SeededRng::new(41));
        let mut sess = Session::eval(&cfg, &state);
        let bad_id = simple_input(&[99], &[]);
        assert!(matches!(
            sess.encode(&bad_id),
            Err(ModelError::TokenOutOfRange { id: 99, .. })
        ));
        let mut bad_pos = simple_input(&[1, 2], &[]);
        bad_pos.positions[1] = 99;
        assert!(matches!(
            sess.encode(&bad_pos),
            Err(ModelError::PositionOverflow { position: 99, .. })
        ));
        let enc_input = simple_input(&[1, 2], &[3]);
        let enc = sess.encode(&enc_input).unwrap();
        let long_prefix: Vec<usize> = vec![1; 17];
        assert!(matches!(
            sess.decode_mono(&long_prefix, &enc),
            Err(ModelError::PrefixTooLong { len: 17, .. })
        ));
    }

    #[test]
    fn dropout_draws_are_deterministic_per_seed() {
        let cfg = ModelConfig { dropout: 0.2, ..tiny_cfg() };
        let state = ModelState::init(&cfg, &mut SeededRng::new(43));
        let input = simple_input(&[1, 2, 3], &[4, 5]);
        let run = |seed: u64| {
            let mut sess = Session::train(&cfg, &state, SeededRng::new(seed));
            let enc = sess.encode(&input).unwrap();
            sess.value(enc.representations).clone()
        };
        assert_eq!(run(7), run(7));
        assert_ne!(run(7), run(8));
    }
}
