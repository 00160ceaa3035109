//! Selection-trace export: what each selection layer saw and decided for
//! one example, with surface forms, as a single versioned JSON document.
//! The per-layer attention matrices and alive ratios are enough to redraw
//! heatmaps and the ratio-over-depth curve in any plotting tool.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use selnmt_core::data::EncoderInput;
use selnmt_core::{ContextExample, EncoderOutput, Segment, Vocabulary};

use crate::fail::{io_fail, Failure};
use crate::runconfig::RunConfig;

pub const TRACE_SCHEMA: &str = "selnmt/trace";

/// One slot of the encoder input concatenation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceToken {
    /// Index into the original concatenation.
    pub slot: usize,
    pub id: usize,
    pub token: String,
    pub segment: Segment,
    pub position: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceLayer {
    /// Absolute encoder layer index.
    pub layer: usize,
    /// Slots alive when the layer ran; rows and columns of the attention
    /// matrix below.
    pub alive_before: Vec<usize>,
    pub averaged_attention: Vec<Vec<f64>>,
    /// One baseline per current-sentence voter.
    pub baselines: Vec<f64>,
    pub threshold: f64,
    /// Context slots put to the vote, aligned with `scores`.
    pub candidates: Vec<usize>,
    pub scores: Vec<usize>,
    pub kept: Vec<TraceToken>,
    pub dropped: Vec<TraceToken>,
    /// Alive context after this layer over context alive at encoder entry.
    pub ratio_after: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceFile {
    pub schema: String,
    pub version: u32,
    pub config: RunConfig,
    pub doc_id: String,
    /// Sentence index within the document.
    pub index: usize,
    /// The full encoder input concatenation in slot order.
    pub tokens: Vec<TraceToken>,
    pub layers: Vec<TraceLayer>,
    /// Slots still alive after the last layer.
    pub final_alive: Vec<usize>,
}

/// Assembles the export for one encoded example.
pub fn build_trace(
    config: &RunConfig,
    vocab: &Vocabulary,
    example: &ContextExample,
    input: &EncoderInput,
    output: &EncoderOutput,
) -> TraceFile {
    let token_at = |slot: usize| TraceToken {
        slot,
        id: input.ids[slot],
        token: vocab.token(input.ids[slot]).to_string(),
        segment: input.layout.segment(slot),
        position: input.positions[slot],
    };
    let tokens: Vec<TraceToken> = (0..input.ids.len()).map(token_at).collect();
    let layers = output
        .trace
        .iter()
        .map(|t| TraceLayer {
            layer: t.layer,
            alive_before: t.alive_before.clone(),
            averaged_attention: t.averaged_attention.clone(),
            baselines: t.baselines.clone(),
            threshold: t.threshold,
            candidates: t.candidates.clone(),
            scores: t.scores.clone(),
            kept: t.kept.iter().map(|&s| token_at(s)).collect(),
            dropped: t.dropped.iter().map(|&s| token_at(s)).collect(),
            ratio_after: t.ratio_after,
        })
        .collect();
    TraceFile {
        schema: TRACE_SCHEMA.to_string(),
        version: 1,
        config: config.clone(),
        doc_id: example.doc_id.clone(),
        index: example.index,
        tokens,
        layers,
        final_alive: output.layout.original_positions().to_vec(),
    }
}

pub fn write_trace(path: &Path, trace: &TraceFile) -> Result<(), Failure> {
    let mut text = serde_json::to_string_pretty(trace).expect("trace serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_fail(path, e))
}

pub fn read_trace(path: &Path) -> Result<TraceFile, Failure> {
    let text = fs::read_to_string(path).map_err(|e| io_fail(path, e))?;
    serde_json::from_str(&text)
        .map_err(|e| Failure::Data(format!("trace {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    use selnmt_core::data::{build_examples, source_concat};
    use selnmt_core::{Document, DocumentCorpus, ModelState, SeededRng, Session};
    use tempfile::NamedTempFile;

    fn traced(q: f64) -> (RunConfig, TraceFile) {
        let corpus = DocumentCorpus::new(vec![Document {
            doc_id: "d0".into(),
            src: vec!["a b c".into(), "b d".into(), "c c a".into()],
            tgt: None,
        }])
        .unwrap();
        let vocab = Vocabulary::build(["a b c", "b d", "c c a"], 64).unwrap();
        let mut config = RunConfig {
            d_model: 16,
            d_ffn: 32,
            heads: 2,
            n1: 1,
            n2: 2,
            decoder_layers: Some(1),
            dropout: 0.0,
            q,
            max_positions: 32,
            ..RunConfig::default()
        };
        config.finalize(vocab.len()).unwrap();
        let model = config.model_config();
        let state = ModelState::init(&model, &mut SeededRng::new(7));
        let examples = build_examples(&corpus, &vocab, &config.context_window).unwrap();
        let ex = &examples[1];
        let input = source_concat(ex).unwrap();
        let mut sess = Session::eval(&model, &state);
        let output = sess.encode(&input).unwrap();
        (config.clone(), build_trace(&config, &vocab, ex, &input, &output))
    }

    #[test]
    fn trace_carries_surfaces_and_round_trips() {
        let (config, trace) = traced(0.6);
        assert_eq!(trace.schema, TRACE_SCHEMA);
        assert_eq!(trace.config, config);
        assert_eq!(trace.doc_id, "d0");
        assert_eq!(trace.index, 1);
        assert_eq!(trace.layers.len(), 2);
        // Sentence "b d" with both neighbours as context.
        assert_eq!(trace.tokens[0].token, "b");
        assert_eq!(trace.tokens[0].segment, Segment::Current);
        assert!(trace.tokens.iter().any(|t| t.token == "<sep>"));

        let file = NamedTempFile::new().unwrap();
        write_trace(file.path(), &trace).unwrap();
        assert_eq!(read_trace(file.path()).unwrap(), trace);
    }

    #[test]
    fn dropped_tokens_match_the_final_layout() {
        let (_, trace) = traced(0.9);
        let mut dead: Vec<usize> = trace
            .layers
            .iter()
            .flat_map(|l| l.dropped.iter().map(|t| t.slot))
            .collect();
        dead.sort_unstable();
        let alive = &trace.final_alive;
        for slot in 0..trace.tokens.len() {
            assert_eq!(alive.contains(&slot), !dead.contains(&slot), "slot {slot}");
        }
        // Ratios never rise with depth.
        for pair in trace.layers.windows(2) {
            assert!(pair[1].ratio_after <= pair[0].ratio_after + 1e-15);
        }
    }

    #[test]
    fn zero_threshold_trace_is_all_alive() {
        let (_, trace) = traced(0.0);
        for layer in &trace.layers {
            assert_eq!(layer.ratio_after, 1.0);
            assert!(layer.dropped.is_empty());
        }
        assert_eq!(trace.final_alive.len(), trace.tokens.len());
    }
}
