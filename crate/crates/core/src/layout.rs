//! Bookkeeping for the encoder's concatenated input sequence.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

/// Which part of the concatenation a token belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Segment {
    Current = 0,
    SourceContext = 1,
    TargetContext = 2,
}

impl Segment {
    pub fn id(self) -> usize {
        self as usize
    }
}

/// Per-token bookkeeping for one concatenation: the first `p` slots are the
/// current sentence, the rest are context. Selection layers flip `alive`
/// flags off; a token once dead never returns. `m` always equals the number
/// of alive slots.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentLayout {
    p: usize,
    m: usize,
    segment_ids: Vec<Segment>,
    alive: Vec<bool>,
    /// Index of each slot in the concatenation as originally built, so
    /// compacted views can be traced back.
    original_positions: Vec<usize>,
}

impl SegmentLayout {
    /// Layout over a freshly built concatenation: everything alive,
    /// positions the identity. The first `p` segment ids must be
    /// [`Segment::Current`] and nothing after them may be.
    pub fn new(p: usize, segment_ids: Vec<Segment>) -> Self {
        assert!(p >= 1, "layout with empty current sentence");
        assert!(p <= segment_ids.len(), "p={p} beyond {} tokens", segment_ids.len());
        for (i, seg) in segment_ids.iter().enumerate() {
            assert_eq!(
                *seg == Segment::Current,
                i < p,
                "slot {i} has segment {seg:?} with p={p}"
            );
        }
        let n = segment_ids.len();
        Self {
            p,
            m: n,
            segment_ids,
            alive: alloc::vec![true; n],
            original_positions: (0..n).collect(),
        }
    }

    /// Total slots, alive or not.
    pub fn len(&self) -> usize {
        self.segment_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segment_ids.is_empty()
    }

    /// Current-sentence token count.
    pub fn p(&self) -> usize {
        self.p
    }

    /// Alive token count.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn segment(&self, i: usize) -> Segment {
        self.segment_ids[i]
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segment_ids
    }

    pub fn is_alive(&self, i: usize) -> bool {
        self.alive[i]
    }

    pub fn alive_flags(&self) -> &[bool] {
        &self.alive
    }

    pub fn original_positions(&self) -> &[usize] {
        &self.original_positions
    }

    pub fn alive_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.alive[i]).collect()
    }

    /// Slots that a selection layer may vote on: alive context tokens.
    /// Current-sentence tokens are never candidates.
    pub fn candidates(&self) -> Vec<usize> {
        (0..self.len())
            .filter(|&i| self.alive[i] && self.segment_ids[i] != Segment::Current)
            .collect()
    }

    /// Alive context count over total context count, the quantity the
    /// selection trace reports. A layout with no context slots at all
    /// reports 1.0.
    pub fn context_ratio(&self) -> f64 {
        let total = self.len() - self.p;
        if total == 0 {
            return 1.0;
        }
        let alive = self.candidates().len();
        alive as f64 / total as f64
    }

    /// Mark a context slot dead. Killing a current-sentence slot is a
    /// contract violation.
    pub fn kill(&mut self, i: usize) {
        assert!(
            self.segment_ids[i] != Segment::Current,
            "killing current-sentence slot {i}"
        );
        if self.alive[i] {
            self.alive[i] = false;
            self.m -= 1;
        }
    }

    /// View containing only the alive slots, with `original_positions`
    /// pointing back into this layout's slot space.
    pub fn compact(&self) -> SegmentLayout {
        let keep = self.alive_indices();
        SegmentLayout {
            p: self.p,
            m: keep.len(),
            segment_ids: keep.iter().map(|&i| self.segment_ids[i]).collect(),
            alive: alloc::vec![true; keep.len()],
            original_positions: keep.iter().map(|&i| self.original_positions[i]).collect(),
        }
    }

    /// True when `later` could have been produced from `self` by killing
    /// zero or more context slots.
    pub fn covers(&self, later: &SegmentLayout) -> bool {
        self.len() == later.len()
            && self.p == later.p
            && self.segment_ids == later.segment_ids
            && self.alive.iter().zip(&later.alive).all(|(a, b)| *a || !*b)
    }
}
