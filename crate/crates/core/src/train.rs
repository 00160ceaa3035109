//! Losses, the optimizer, and the training step.
//!
//! Each step records every example of a batch on one tape, so gradients
//! accumulate through the graph rather than through ad-hoc bookkeeping.
//! The combined objective mixes the source-only loss and the bilingual
//! loss as `alpha * L_m + (1 - alpha) * L_b`; terms with a zero
//! coefficient are skipped entirely, which is what makes the alpha = 0
//! and alpha = 1 runs exact specializations rather than approximations.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::data::Batch;
use crate::error::ModelError;
use crate::mathx;
use crate::model::Session;
use crate::rng::{derive_seed, SeededRng};
use crate::state::ModelState;
use crate::tape::ValueId;
use crate::tensor::Tensor;

/// Stream tags for [`derive_seed`], so initialization, dropout, and batch
/// ordering never share random draws.
pub const INIT_STREAM: u64 = 1;
pub const DROPOUT_STREAM: u64 = 2;
pub const ORDER_STREAM: u64 = 3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub seed: u64,
    /// Total optimizer steps to run.
    pub steps: u64,
    /// Warmup steps of the inverse-square-root schedule.
    pub warmup: u64,
    /// Multiplier on the schedule.
    pub lr_scale: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    /// Weight of the source-only loss in the combined objective.
    pub alpha: f64,
    /// Batch budget in prediction rows.
    pub max_tokens: usize,
    /// Checkpoint cadence in steps; 0 writes only the final checkpoint.
    pub checkpoint_every: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            steps: 1000,
            warmup: 200,
            lr_scale: 1.0,
            beta1: 0.9,
            beta2: 0.98,
            adam_eps: 1e-9,
            alpha: 0.5,
            max_tokens: 256,
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let fail = |reason: String| Err(ModelError::InvalidConfig { reason });
        if self.warmup < 1 {
            return fail(String::from("warmup must be at least 1"));
        }
        if self.steps < 1 {
            return fail(String::from("steps must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return fail(String::from("alpha must lie in [0, 1]"));
        }
        if !(self.lr_scale > 0.0) || !self.lr_scale.is_finite() {
            return fail(String::from("lr_scale must be positive and finite"));
        }
        for (name, beta) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0..1.0).contains(&beta) {
                return fail(alloc::format!("{name} must lie in [0, 1)"));
            }
        }
        if !(self.adam_eps > 0.0) {
            return fail(String::from("adam_eps must be positive"));
        }
        if self.max_tokens < 2 {
            return fail(String::from("max_tokens must fit at least one prediction row pair"));
        }
        Ok(())
    }

    /// Inverse-square-root schedule with linear warmup:
    /// `lr_scale * d_model^-0.5 * min(step^-0.5, step * warmup^-1.5)`.
    /// Steps are 1-based; the peak sits exactly at `step == warmup`.
    pub fn learning_rate(&self, d_model: usize, step: u64) -> f64 {
        assert!(step >= 1, "schedule steps are 1-based");
        let s = step as f64;
        let ramp = s * mathx::powf(self.warmup as f64, -1.5);
        let decay = mathx::powf(s, -0.5);
        self.lr_scale * mathx::powf(d_model as f64, -0.5) * ramp.min(decay)
    }
}

/// Adam with bias correction. Moments live per parameter name and are
/// exposed for checkpointing, so a resumed run continues the exact
/// trajectory.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(cfg: &TrainConfig) -> Self {
        Self {
            beta1: cfg.beta1,
            beta2: cfg.beta2,
            eps: cfg.adam_eps,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    pub fn from_parts(
        beta1: f64,
        beta2: f64,
        eps: f64,
        t: u64,
        m: BTreeMap<String, Tensor>,
        v: BTreeMap<String, Tensor>,
    ) -> Self {
        Self { beta1, beta2, eps, t, m, v }
    }

    pub fn hyper(&self) -> (f64, f64, f64) {
        (self.beta1, self.beta2, self.eps)
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&BTreeMap<String, Tensor>, &BTreeMap<String, Tensor>) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, state: &mut ModelState, grads: &BTreeMap<String, Tensor>, lr: f64) {
        self.t += 1;
        let bc1 = 1.0 - mathx::powf(self.beta1, self.t as f64);
        let bc2 = 1.0 - mathx::powf(self.beta2, self.t as f64);
        for (name, grad) in grads {
            let param = state.get_mut(name);
            assert_eq!(
                param.shape(),
                grad.shape(),
                "gradient shape mismatch for {name}"
            );
            let m = self
                .m
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(grad.rows(), grad.cols()));
            let v = self
                .v
                .entry(name.clone())
                .or_insert_with(|| Tensor::zeros(grad.rows(), grad.cols()));
            let (pd, gd) = (param.data_mut(), grad.data());
            let (md, vd) = (m.data_mut(), v.data_mut());
            for i in 0..gd.len() {
                let g = gd[i];
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * g;
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * g * g;
                let m_hat = md[i] / bc1;
                let v_hat = vd[i] / bc2;
                pd[i] -= lr * m_hat / (mathx::sqrt(v_hat) + self.eps);
            }
        }
    }
}

/// Averages the per-layer alive-context ratios over every encode that
/// happened within one step.
struct RatioAccum {
    sums: Vec<f64>,
    encodes: usize,
}

impl RatioAccum {
    fn new() -> Self {
        Self { sums: Vec::new(), encodes: 0 }
    }

    fn add(&mut self, trace: &[crate::model::SelectionLayerTrace]) {
        if self.sums.is_empty() {
            self.sums = vec![0.0; trace.len()];
        }
        assert_eq!(self.sums.len(), trace.len(), "selection layer count changed mid-step");
        for (sum, layer) in self.sums.iter_mut().zip(trace) {
            *sum += layer.ratio_after;
        }
        self.encodes += 1;
    }

    fn mean(self) -> Vec<f64> {
        if self.encodes == 0 {
            return Vec::new();
        }
        let n = self.encodes as f64;
        self.sums.into_iter().map(|s| s / n).collect()
    }
}

/// Mean label-smoothed cross entropy of the source-only path over every
/// prediction row in the batch.
pub fn loss_mono(sess: &mut Session, batch: &Batch) -> Result<ValueId, ModelError> {
    let (sum, count) = pass_sum(sess, batch, Pass::Mono, &mut RatioAccum::new())?;
    Ok(sess.tape_mut().scale(sum, 1.0 / count as f64))
}

/// Mean label-smoothed cross entropy of the bilingual path (dual
/// cross-attention over both concatenations).
pub fn loss_bi(sess: &mut Session, batch: &Batch) -> Result<ValueId, ModelError> {
    let (sum, count) = pass_sum(sess, batch, Pass::Bi, &mut RatioAccum::new())?;
    Ok(sess.tape_mut().scale(sum, 1.0 / count as f64))
}

/// `alpha * loss_mono + (1 - alpha) * loss_bi`, both terms computed. At
/// the endpoints the IEEE identities `x * 1 == x`, `x * 0 == +0` for
/// finite positive `x`, and `L + 0 == L` make the value collapse
/// bit-exactly to the surviving term.
pub fn loss_all(sess: &mut Session, batch: &Batch, alpha: f64) -> Result<ValueId, ModelError> {
    let m = loss_mono(sess, batch)?;
    let b = loss_bi(sess, batch)?;
    Ok(combine_losses(sess, Some(m), Some(b), alpha))
}

pub fn combine_losses(
    sess: &mut Session,
    mono: Option<ValueId>,
    bi: Option<ValueId>,
    alpha: f64,
) -> ValueId {
    assert!((0.0..=1.0).contains(&alpha), "alpha {alpha} outside [0, 1]");
    match (mono, bi) {
        (Some(m), Some(b)) => {
            let lm = sess.tape_mut().scale(m, alpha);
            let lb = sess.tape_mut().scale(b, 1.0 - alpha);
            sess.tape_mut().add(lm, lb)
        }
        (Some(m), None) => m,
        (None, Some(b)) => b,
        (None, None) => panic!("combine_losses with no terms"),
    }
}

enum Pass {
    Mono,
    Bi,
}

fn pass_sum(
    sess: &mut Session,
    batch: &Batch,
    pass: Pass,
    ratios: &mut RatioAccum,
) -> Result<(ValueId, usize), ModelError> {
    assert!(!batch.is_empty(), "loss over an empty batch");
    let mut total: Option<ValueId> = None;
    let mut count = 0;
    for row in 0..batch.len() {
        let enc_src = sess.encode(&batch.source.input(row))?;
        ratios.add(&enc_src.trace);
        let logits = match pass {
            Pass::Mono => sess.decode_mono(batch.prefix(row), &enc_src)?,
            Pass::Bi => {
                let enc_tgt = sess.encode(&batch.bilingual.input(row))?;
                ratios.add(&enc_tgt.trace);
                sess.decode_bi(batch.prefix(row), &enc_src, &enc_tgt)?
            }
        };
        let target = batch.target(row);
        let include = vec![true; target.len()];
        let s = sess.smoothed_loss_sum(logits, target, &include);
        total = Some(match total {
            Some(t) => sess.tape_mut().add(t, s),
            None => s,
        });
        count += target.len();
    }
    Ok((total.expect("empty batch"), count))
}

/// Loss nodes for one optimizer step. Unlike [`loss_all`], the source
/// encoding is shared between the two paths and zero-coefficient terms
/// are never computed.
pub struct StepLosses {
    pub mono: Option<ValueId>,
    pub bi: Option<ValueId>,
    pub all: ValueId,
    pub selection_ratios: Vec<f64>,
}

pub fn step_losses(sess: &mut Session, batch: &Batch, alpha: f64) -> Result<StepLosses, ModelError> {
    assert!((0.0..=1.0).contains(&alpha), "alpha {alpha} outside [0, 1]");
    assert!(!batch.is_empty(), "loss over an empty batch");
    let mut ratios = RatioAccum::new();
    let mut mono_total: Option<ValueId> = None;
    let mut bi_total: Option<ValueId> = None;
    let mut count = 0;
    for row in 0..batch.len() {
        let enc_src = sess.encode(&batch.source.input(row))?;
        ratios.add(&enc_src.trace);
        let target = batch.target(row);
        let include = vec![true; target.len()];
        count += target.len();
        if alpha > 0.0 {
            let logits = sess.decode_mono(batch.prefix(row), &enc_src)?;
            let s = sess.smoothed_loss_sum(logits, target, &include);
            mono_total = Some(match mono_total {
                Some(t) => sess.tape_mut().add(t, s),
                None => s,
            });
        }
        if alpha < 1.0 {
            let enc_tgt = sess.encode(&batch.bilingual.input(row))?;
            ratios.add(&enc_tgt.trace);
            let logits = sess.decode_bi(batch.prefix(row), &enc_src, &enc_tgt)?;
            let s = sess.smoothed_loss_sum(logits, target, &include);
            bi_total = Some(match bi_total {
                Some(t) => sess.tape_mut().add(t, s),
                None => s,
            });
        }
    }
    let inv = 1.0 / count as f64;
    let mono = mono_total.map(|t| sess.tape_mut().scale(t, inv));
    let bi = bi_total.map(|t| sess.tape_mut().scale(t, inv));
    let all = combine_losses(sess, mono, bi, alpha);
    Ok(StepLosses { mono, bi, all, selection_ratios: ratios.mean() })
}

/// One metrics-log line. Skipped loss terms serialize as null.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepMetrics {
    pub step: u64,
    pub loss_m: Option<f64>,
    pub loss_b: Option<f64>,
    pub loss_all: f64,
    pub lr: f64,
    pub selection_ratio_per_layer: Vec<f64>,
}

/// Owns the parameters and optimizer; one call per optimizer step. Batch
/// iteration order and checkpoint IO belong to the caller.
pub struct Trainer {
    model: ModelConfig,
    cfg: TrainConfig,
    state: ModelState,
    opt: Adam,
    completed: u64,
}

impl Trainer {
    pub fn new(model: ModelConfig, cfg: TrainConfig) -> Result<Self, ModelError> {
        model.validate()?;
        cfg.validate()?;
        let mut rng = SeededRng::new(derive_seed(cfg.seed, INIT_STREAM, 0));
        let state = ModelState::init(&model, &mut rng);
        let opt = Adam::new(&cfg);
        Ok(Self { model, cfg, state, opt, completed: 0 })
    }

    /// Rebuilds a trainer mid-run; continues the schedule, moments, and
    /// derived random streams exactly as an uninterrupted run would.
    pub fn resume(
        model: ModelConfig,
        cfg: TrainConfig,
        state: ModelState,
        opt: Adam,
        completed: u64,
    ) -> Result<Self, ModelError> {
        model.validate()?;
        cfg.validate()?;
        assert_eq!(opt.steps(), completed, "optimizer step count disagrees with trainer");
        Ok(Self { model, cfg, state, opt, completed })
    }

    pub fn model_config(&self) -> &ModelConfig {
        &self.model
    }

    pub fn train_config(&self) -> &TrainConfig {
        &self.cfg
    }

    pub fn state(&self) -> &ModelState {
        &self.state
    }

    pub fn optimizer(&self) -> &Adam {
        &self.opt
    }

    pub fn completed_steps(&self) -> u64 {
        self.completed
    }

    /// Deterministic batch order for one epoch.
    pub fn batch_order(&self, epoch: u64, batches: usize) -> Vec<usize> {
        let mut order: Vec<usize> = (0..batches).collect();
        let mut rng = SeededRng::new(derive_seed(self.cfg.seed, ORDER_STREAM, epoch));
        rng.shuffle(&mut order);
        order
    }

    pub fn train_step(&mut self, batch: &Batch) -> Result<StepMetrics, ModelError> {
        let step = self.completed + 1;
        for (_, tensor) in self.state.iter() {
            if !tensor.is_finite() {
                return Err(ModelError::NonFiniteLoss { step });
            }
        }
        let lr = self.cfg.learning_rate(self.model.d_model, step);
        let rng = SeededRng::new(derive_seed(self.cfg.seed, DROPOUT_STREAM, step));
        let mut sess = Session::train(&self.model, &self.state, rng);
        let losses = step_losses(&mut sess, batch, self.cfg.alpha)?;
        let loss_all = sess.value(losses.all).item();
        if !loss_all.is_finite() {
            return Err(ModelError::NonFiniteLoss { step });
        }
        sess.backward_with_seed(losses.all, 1.0);
        let metrics = StepMetrics {
            step,
            loss_m: losses.mono.map(|id| sess.value(id).item()),
            loss_b: losses.bi.map(|id| sess.value(id).item()),
            loss_all,
            lr,
            selection_ratio_per_layer: losses.selection_ratios,
        };
        let grads = sess.grad_map();
        drop(sess);
        self.opt.step(&mut self.state, &grads, lr);
        self.completed = step;
        Ok(metrics)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ContextWindow;
    use crate::data::{build_examples, make_batches, Document, DocumentCorpus};
    use crate::vocab::Vocabulary;
    use alloc::string::ToString;

    fn tiny_setup() -> (ModelConfig, Vocabulary, Batch) {
        let corpus = DocumentCorpus::new(vec![Document {
            doc_id: "d".to_string(),
            src: vec!["a b c".to_string(), "b c a".to_string(), "c a b".to_string()],
            tgt: Some(vec!["x y".to_string(), "y x".to_string(), "x x".to_string()]),
        }])
        .unwrap();
        let sentences: Vec<&str> = corpus.documents[0]
            .src
            .iter()
            .chain(corpus.documents[0].tgt.iter().flatten())
            .map(String::as_str)
            .collect();
        let vocab = Vocabulary::build(sentences, 64).unwrap();
        let mut cfg = ModelConfig::new(vocab.len());
        cfg.d_model = 16;
        cfg.d_ffn = 32;
        cfg.heads = 2;
        cfg.n1 = 1;
        cfg.n2 = 1;
        cfg.decoder_layers = Some(1);
        cfg.max_positions = 32;
        cfg.dropout = 0.0;
        let examples = build_examples(&corpus, &vocab, &ContextWindow { previous: 1, next: 1 }).unwrap();
        let batches = make_batches(&examples, 64).unwrap();
        assert_eq!(batches.len(), 1);
        (cfg, vocab, batches.into_iter().next().unwrap())
    }

    #[test]
    fn default_config_is_valid() {
        TrainConfig::default().validate().unwrap();
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut cfg = TrainConfig::default();
        cfg.warmup = 0;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.alpha = 1.5;
        assert!(cfg.validate().is_err());
        cfg = TrainConfig::default();
        cfg.beta2 = 1.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn schedule_ramps_then_decays() {
        let cfg = TrainConfig { warmup: 100, lr_scale: 1.0, ..TrainConfig::default() };
        // Closed form during warmup: s * w^-1.5 scaled by d^-0.5.
        let lr25 = cfg.learning_rate(64, 25);
        assert!((lr25 - 0.125 * 25.0 / 1000.0).abs() < 1e-15);
        // Peak at the warmup boundary, where the two branches meet.
        let peak = cfg.learning_rate(64, 100);
        assert!((peak - 0.125 * 0.1).abs() < 1e-15);
        assert!(cfg.learning_rate(64, 99) < peak);
        assert!(cfg.learning_rate(64, 101) < peak);
        // Decay thereafter.
        assert!(cfg.learning_rate(64, 400) < cfg.learning_rate(64, 200));
    }

    #[test]
    fn adam_first_step_moves_by_roughly_lr() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(&cfg);
        let mut state = ModelState::from_entries([("w".to_string(), Tensor::filled(1, 1, 5.0))]);
        let mut grads = BTreeMap::new();
        grads.insert("w".to_string(), Tensor::filled(1, 1, 2.0));
        adam.step(&mut state, &grads, 0.1);
        // Bias correction makes the first update lr * g / (|g| + eps).
        let moved = 5.0 - state.get("w").item();
        assert!((moved - 0.1).abs() < 1e-8, "moved {moved}");
    }

    #[test]
    fn adam_descends_a_quadratic() {
        let cfg = TrainConfig::default();
        let mut adam = Adam::new(&cfg);
        let mut state = ModelState::from_entries([("x".to_string(), Tensor::filled(1, 1, 4.0))]);
        for _ in 0..500 {
            let x = state.get("x").item();
            let mut grads = BTreeMap::new();
            grads.insert("x".to_string(), Tensor::filled(1, 1, 2.0 * (x - 3.0)));
            adam.step(&mut state, &grads, 0.05);
        }
        assert!((state.get("x").item() - 3.0).abs() < 0.05);
    }

    #[test]
    fn losses_collapse_bit_exactly_at_alpha_endpoints() {
        let (cfg, _vocab, batch) = tiny_setup();
        let mut rng = SeededRng::new(9);
        let state = ModelState::init(&cfg, &mut rng);
        let mut sess = Session::eval(&cfg, &state);
        let m = loss_mono(&mut sess, &batch).unwrap();
        let b = loss_bi(&mut sess, &batch).unwrap();
        let all1 = loss_all(&mut sess, &batch, 1.0).unwrap();
        let all0 = loss_all(&mut sess, &batch, 0.0).unwrap();
        let bits = |id| sess.value(id).item().to_bits();
        assert_eq!(bits(all1), bits(m));
        assert_eq!(bits(all0), bits(b));
    }

    #[test]
    fn loss_all_is_affine_in_alpha() {
        let (cfg, _vocab, batch) = tiny_setup();
        let mut rng = SeededRng::new(10);
        let state = ModelState::init(&cfg, &mut rng);
        let mut sess = Session::eval(&cfg, &state);
        let id0 = loss_all(&mut sess, &batch, 0.0).unwrap();
        let id1 = loss_all(&mut sess, &batch, 1.0).unwrap();
        let idh = loss_all(&mut sess, &batch, 0.5).unwrap();
        let (l0, l1, lh) = (sess.value(id0).item(), sess.value(id1).item(), sess.value(idh).item());
        assert_eq!(lh.to_bits(), (0.5 * l1 + 0.5 * l0).to_bits());
    }

    #[test]
    fn bilingual_loss_reaches_the_gate_parameters() {
        let (cfg, _vocab, batch) = tiny_setup();
        let mut rng = SeededRng::new(11);
        let state = ModelState::init(&cfg, &mut rng);
        let mut sess = Session::train(&cfg, &state, SeededRng::new(0));
        let losses = step_losses(&mut sess, &batch, 0.0).unwrap();
        sess.backward_with_seed(losses.all, 1.0);
        let grads = sess.grad_map();
        for name in ["dec.0.gate.ws", "dec.0.gate.ut", "dec.0.gate.b"] {
            let g = grads.get(name).unwrap();
            assert!(g.data().iter().any(|&x| x != 0.0), "no gradient reached {name}");
        }
    }

    #[test]
    fn step_metrics_report_ratios_per_selection_layer() {
        let (cfg, _vocab, batch) = tiny_setup();
        let mut trainer = Trainer::new(cfg, TrainConfig::default()).unwrap();
        let metrics = trainer.train_step(&batch).unwrap();
        assert_eq!(metrics.step, 1);
        assert_eq!(metrics.selection_ratio_per_layer.len(), 1);
        let r = metrics.selection_ratio_per_layer[0];
        assert!((0.0..=1.0).contains(&r));
        assert!(metrics.loss_m.is_some() && metrics.loss_b.is_some());
    }

    #[test]
    fn training_reduces_the_loss() {
        let (cfg, _vocab, batch) = tiny_setup();
        let tc = TrainConfig { warmup: 10, steps: 40, alpha: 1.0, ..TrainConfig::default() };
        let mut trainer = Trainer::new(cfg, tc).unwrap();
        let first = trainer.train_step(&batch).unwrap().loss_all;
        let mut last = first;
        for _ in 0..39 {
            last = trainer.train_step(&batch).unwrap().loss_all;
        }
        assert!(last < first, "loss went {first} -> {last}");
    }

    #[test]
    fn fixed_seed_reproduces_metrics_bit_exactly() {
        let (cfg, _vocab, batch) = tiny_setup();
        let mut cfg_dropout = cfg.clone();
        cfg_dropout.dropout = 0.1;
        let tc = TrainConfig { warmup: 5, ..TrainConfig::default() };
        let mut a = Trainer::new(cfg_dropout.clone(), tc.clone()).unwrap();
        let mut b = Trainer::new(cfg_dropout, tc).unwrap();
        for _ in 0..5 {
            let ma = a.train_step(&batch).unwrap();
            let mb = b.train_step(&batch).unwrap();
            assert_eq!(ma.loss_all.to_bits(), mb.loss_all.to_bits());
            assert_eq!(ma.loss_m.map(f64::to_bits), mb.loss_m.map(f64::to_bits));
            assert_eq!(ma.loss_b.map(f64::to_bits), mb.loss_b.map(f64::to_bits));
        }
    }

    #[test]
    fn resume_continues_the_exact_trajectory() {
        let (cfg, _vocab, batch) = tiny_setup();
        let mut cfg_dropout = cfg.clone();
        cfg_dropout.dropout = 0.1;
        let tc = TrainConfig { warmup: 5, ..TrainConfig::default() };
        let mut whole = Trainer::new(cfg_dropout.clone(), tc.clone()).unwrap();
        let mut first_half = Trainer::new(cfg_dropout.clone(), tc.clone()).unwrap();
        for _ in 0..2 {
            whole.train_step(&batch).unwrap();
            first_half.train_step(&batch).unwrap();
        }
        let mut resumed = Trainer::resume(
            cfg_dropout,
            tc,
            first_half.state().clone(),
            first_half.optimizer().clone(),
            first_half.completed_steps(),
        )
        .unwrap();
        for _ in 0..3 {
            let expect = whole.train_step(&batch).unwrap();
            let got = resumed.train_step(&batch).unwrap();
            assert_eq!(expect.step, got.step);
            assert_eq!(expect.loss_all.to_bits(), got.loss_all.to_bits());
        }
    }

    #[test]
    fn batch_order_is_a_deterministic_permutation() {
        let (cfg, _vocab, _batch) = tiny_setup();
        let trainer = Trainer::new(cfg, TrainConfig::default()).unwrap();
        let a = trainer.batch_order(0, 10);
        let b = trainer.batch_order(0, 10);
        assert_eq!(a, b);
        let mut sorted = a.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..10).collect::<Vec<_>>());
        assert_ne!(trainer.batch_order(1, 10), a);
    }

    #[test]
    fn non_finite_parameters_abort_with_the_step() {
        let (cfg, _vocab, batch) = tiny_setup();
        let tc = TrainConfig::default();
        let trainer = Trainer::new(cfg.clone(), tc.clone()).unwrap();
        let mut state = trainer.state().clone();
        state.get_mut("embed.word").set(0, 0, f64::INFINITY);
        let mut poisoned = Trainer::resume(cfg, tc, state, Adam::new(&TrainConfig::default()), 0).unwrap();
        assert_eq!(
            poisoned.train_step(&batch),
            Err(ModelError::NonFiniteLoss { step: 1 })
        );
    }
}
