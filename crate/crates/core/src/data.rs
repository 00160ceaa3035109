//! Documents, context windows, and batch assembly.
//!
//! A corpus is a list of sentence-aligned documents. Each sentence becomes
//! one example whose context is drawn from its own document only. The
//! encoder consumes a concatenation of the current sentence and context
//! sentences; positions restart at every sentence boundary and a separator
//! stands between adjacent context sentences (never before the first).

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::config::ContextWindow;
use crate::error::{DataError, ModelError};
use crate::layout::{Segment, SegmentLayout};
use crate::vocab::{Vocabulary, BOS, EOS, PAD, SEP};

/// A sentence-aligned document. Targets are absent for source-only input.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Document {
    pub doc_id: String,
    pub src: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tgt: Option<Vec<String>>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DocumentCorpus {
    pub documents: Vec<Document>,
}

impl DocumentCorpus {
    pub fn new(documents: Vec<Document>) -> Result<Self, DataError> {
        let corpus = Self { documents };
        corpus.validate()?;
        Ok(corpus)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        for doc in &self.documents {
            if let Some(tgt) = &doc.tgt {
                if tgt.len() != doc.src.len() {
                    return Err(DataError::MismatchedSentenceCounts {
                        doc_id: doc.doc_id.clone(),
                        src: doc.src.len(),
                        tgt: tgt.len(),
                    });
                }
            }
        }
        Ok(())
    }

    pub fn has_targets(&self) -> bool {
        self.documents.iter().all(|d| d.tgt.is_some())
    }

    pub fn sentence_count(&self) -> usize {
        self.documents.iter().map(|d| d.src.len()).sum()
    }
}

/// One sentence with its document context, already mapped to token ids.
/// Context sentences appear in document order on both sides.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ContextExample {
    pub doc_id: String,
    /// Sentence index within the document.
    pub index: usize,
    pub current: Vec<usize>,
    pub src_context: Vec<Vec<usize>>,
    pub tgt_context: Vec<Vec<usize>>,
    pub target: Option<Vec<usize>>,
}

/// Indices of the sentences inside sentence `index`'s context window, in
/// document order, clipped to the document's `count` sentences.
pub fn context_neighbors(index: usize, count: usize, window: &ContextWindow) -> Vec<usize> {
    let lo = index.saturating_sub(window.previous);
    let hi = (index + 1 + window.next).min(count);
    (lo..index).chain(index + 1..hi).collect()
}

/// Expands a corpus into per-sentence examples. The window never crosses a
/// document boundary; sentences near an edge simply get less context.
pub fn build_examples(
    corpus: &DocumentCorpus,
    vocab: &Vocabulary,
    window: &ContextWindow,
) -> Result<Vec<ContextExample>, DataError> {
    corpus.validate()?;
    let mut out = Vec::with_capacity(corpus.sentence_count());
    for doc in &corpus.documents {
        let src_ids: Vec<Vec<usize>> = doc.src.iter().map(|s| vocab.encode(s)).collect();
        let tgt_ids: Option<Vec<Vec<usize>>> =
            doc.tgt.as_ref().map(|tgt| tgt.iter().map(|s| vocab.encode(s)).collect());
        for (k, current) in src_ids.iter().enumerate() {
            if current.is_empty() {
                return Err(DataError::EmptySentence { doc_id: doc.doc_id.clone(), index: k });
            }
            let neighbors = context_neighbors(k, src_ids.len(), window);
            let gather = |ids: &[Vec<usize>]| neighbors.iter().map(|&j| ids[j].clone()).collect();
            out.push(ContextExample {
                doc_id: doc.doc_id.clone(),
                index: k,
                current: current.clone(),
                src_context: gather(&src_ids),
                tgt_context: tgt_ids.as_deref().map(gather).unwrap_or_default(),
                target: tgt_ids.as_ref().map(|t| t[k].clone()),
            });
        }
    }
    Ok(out)
}

/// Encoder-ready token sequence: ids, per-sentence positions, and the
/// segment layout the selection layers operate on.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderInput {
    pub ids: Vec<usize>,
    pub positions: Vec<usize>,
    pub layout: SegmentLayout,
}

impl EncoderInput {
    pub fn new(ids: Vec<usize>, positions: Vec<usize>, layout: SegmentLayout) -> Self {
        assert_eq!(ids.len(), positions.len(), "ids and positions disagree in length");
        assert_eq!(ids.len(), layout.len(), "ids and layout disagree in length");
        Self { ids, positions, layout }
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

/// Current sentence followed by source-side context.
pub fn source_concat(example: &ContextExample) -> Result<EncoderInput, ModelError> {
    concat(&example.current, &example.src_context, Segment::SourceContext)
}

/// Current sentence followed by target-side context. The current sentence
/// stays on the source side; only the context comes from the target
/// language.
pub fn target_concat(example: &ContextExample) -> Result<EncoderInput, ModelError> {
    concat(&example.current, &example.tgt_context, Segment::TargetContext)
}

fn concat(
    current: &[usize],
    context: &[Vec<usize>],
    segment: Segment,
) -> Result<EncoderInput, ModelError> {
    let p = current.len();
    if p == 0 {
        return Err(ModelError::EmptyCurrentSentence);
    }
    let mut ids: Vec<usize> = current.to_vec();
    let mut positions: Vec<usize> = (0..p).collect();
    let mut segments = vec![Segment::Current; p];
    let mut prev_len = 0;
    for (si, sentence) in context.iter().enumerate() {
        if si > 0 {
            // The separator sits after the previous sentence and takes the
            // position that sentence's next token would have had.
            ids.push(SEP);
            positions.push(prev_len);
            segments.push(segment);
        }
        for (i, &t) in sentence.iter().enumerate() {
            ids.push(t);
            positions.push(i);
            segments.push(segment);
        }
        prev_len = sentence.len();
    }
    Ok(EncoderInput::new(ids, positions, SegmentLayout::new(p, segments)))
}

/// Teacher-forcing rows for one target sentence: the decoder input prefix
/// and the ids it must predict, shifted by one.
pub fn decoder_rows(target: &[usize]) -> (Vec<usize>, Vec<usize>) {
    let mut prefix = Vec::with_capacity(target.len() + 1);
    prefix.push(BOS);
    prefix.extend_from_slice(target);
    let mut predict = target.to_vec();
    predict.push(EOS);
    (prefix, predict)
}

/// Rows of equal width with per-row true lengths. Pad slots carry the pad
/// id, position zero, and a dead layout slot, so they can never attend,
/// vote, or be voted for.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PaddedBlock {
    pub ids: Vec<Vec<usize>>,
    pub positions: Vec<Vec<usize>>,
    pub layouts: Vec<SegmentLayout>,
    pub lens: Vec<usize>,
}

impl PaddedBlock {
    fn build(inputs: Vec<EncoderInput>, pad_segment: Segment) -> Self {
        let width = inputs.iter().map(EncoderInput::len).max().unwrap_or(0);
        let mut block = Self {
            ids: Vec::with_capacity(inputs.len()),
            positions: Vec::with_capacity(inputs.len()),
            layouts: Vec::with_capacity(inputs.len()),
            lens: Vec::with_capacity(inputs.len()),
        };
        for input in inputs {
            let len = input.len();
            let mut ids = input.ids;
            let mut positions = input.positions;
            let mut segments = input.layout.segments().to_vec();
            ids.resize(width, PAD);
            positions.resize(width, 0);
            segments.resize(width, pad_segment);
            let mut layout = SegmentLayout::new(input.layout.p(), segments);
            for slot in len..width {
                layout.kill(slot);
            }
            block.ids.push(ids);
            block.positions.push(positions);
            block.layouts.push(layout);
            block.lens.push(len);
        }
        block
    }

    pub fn rows(&self) -> usize {
        self.lens.len()
    }

    pub fn width(&self) -> usize {
        self.ids.first().map_or(0, Vec::len)
    }

    /// The row as the model should see it, pads stripped.
    pub fn input(&self, row: usize) -> EncoderInput {
        let len = self.lens[row];
        let segments = self.layouts[row].segments()[..len].to_vec();
        EncoderInput::new(
            self.ids[row][..len].to_vec(),
            self.positions[row][..len].to_vec(),
            SegmentLayout::new(self.layouts[row].p(), segments),
        )
    }

    /// The full padded row, dead pad slots included.
    pub fn padded_input(&self, row: usize) -> EncoderInput {
        EncoderInput::new(
            self.ids[row].clone(),
            self.positions[row].clone(),
            self.layouts[row].clone(),
        )
    }
}

/// Where an example came from, kept so metrics and traces can name it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExampleOrigin {
    pub doc_id: String,
    pub index: usize,
}

/// A training batch: both encoder concatenations plus teacher-forcing rows,
/// padded to rectangles.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Batch {
    pub source: PaddedBlock,
    pub bilingual: PaddedBlock,
    /// `<bos>` + target, padded with the pad id.
    pub prefixes: Vec<Vec<usize>>,
    /// target + `<eos>`, padded with the pad id.
    pub targets: Vec<Vec<usize>>,
    /// True on rows that contribute to the loss.
    pub include: Vec<Vec<bool>>,
    pub origins: Vec<ExampleOrigin>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.origins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.origins.is_empty()
    }

    /// Number of real (loss-carrying) target rows for one example.
    pub fn target_rows(&self, row: usize) -> usize {
        self.include[row].iter().filter(|&&x| x).count()
    }

    pub fn prefix(&self, row: usize) -> &[usize] {
        &self.prefixes[row][..self.target_rows(row)]
    }

    pub fn target(&self, row: usize) -> &[usize] {
        &self.targets[row][..self.target_rows(row)]
    }

    fn build(examples: &[&ContextExample]) -> Result<Self, DataError> {
        let mut sources = Vec::with_capacity(examples.len());
        let mut bilinguals = Vec::with_capacity(examples.len());
        let mut prefixes = Vec::with_capacity(examples.len());
        let mut targets = Vec::with_capacity(examples.len());
        let mut origins = Vec::with_capacity(examples.len());
        for ex in examples {
            let data_err = |_| DataError::EmptySentence { doc_id: ex.doc_id.clone(), index: ex.index };
            sources.push(source_concat(ex).map_err(data_err)?);
            bilinguals.push(target_concat(ex).map_err(data_err)?);
            let target = ex.target.as_ref().expect("batched examples carry targets");
            let (prefix, predict) = decoder_rows(target);
            prefixes.push(prefix);
            targets.push(predict);
            origins.push(ExampleOrigin { doc_id: ex.doc_id.clone(), index: ex.index });
        }
        let width = targets.iter().map(Vec::len).max().unwrap_or(0);
        let mut include = Vec::with_capacity(examples.len());
        for (prefix, target) in prefixes.iter_mut().zip(&mut targets) {
            let mut flags = vec![true; target.len()];
            flags.resize(width, false);
            include.push(flags);
            prefix.resize(width, PAD);
            target.resize(width, PAD);
        }
        Ok(Self {
            source: PaddedBlock::build(sources, Segment::SourceContext),
            bilingual: PaddedBlock::build(bilinguals, Segment::TargetContext),
            prefixes,
            targets,
            include,
            origins,
        })
    }
}

/// Groups examples into batches holding at most `max_tokens` prediction
/// rows each. Examples are bucketed by target length (stable within a
/// length) so rows in one batch waste little padding.
pub fn make_batches(examples: &[ContextExample], max_tokens: usize) -> Result<Vec<Batch>, DataError> {
    let mut order: Vec<usize> = (0..examples.len()).collect();
    for ex in examples {
        let Some(target) = &ex.target else {
            return Err(DataError::MissingTargets { doc_id: ex.doc_id.clone() });
        };
        let cost = target.len() + 1;
        if cost > max_tokens {
            return Err(DataError::ExampleTooLong {
                doc_id: ex.doc_id.clone(),
                index: ex.index,
                tokens: cost,
                max_tokens,
            });
        }
    }
    order.sort_by_key(|&i| examples[i].target.as_ref().map_or(0, Vec::len));
    let mut batches = Vec::new();
    let mut bucket: Vec<&ContextExample> = Vec::new();
    let mut used = 0;
    for &i in &order {
        let cost = examples[i].target.as_ref().map_or(0, Vec::len) + 1;
        if used + cost > max_tokens && !bucket.is_empty() {
            batches.push(Batch::build(&bucket)?);
            bucket.clear();
            used = 0;
        }
        bucket.push(&examples[i]);
        used += cost;
    }
    if !bucket.is_empty() {
        batches.push(Batch::build(&bucket)?);
    }
    Ok(batches)
}
