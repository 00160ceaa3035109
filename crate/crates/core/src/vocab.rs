//! Token ↔ id mapping with frequency-ranked construction.
//!
//! Tokenization is whitespace splitting. An optional subword mode learns
//! greedy character-pair merges from the corpus; units that continue a
//! word carry a trailing `@@`, and `decode` rejoins them. Five ids are
//! reserved and stable across every vocabulary.

use alloc::borrow::ToOwned;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::DataError;

pub const PAD: usize = 0;
pub const BOS: usize = 1;
pub const EOS: usize = 2;
pub const UNK: usize = 3;
pub const SEP: usize = 4;

pub const RESERVED: [&str; 5] = ["<pad>", "<bos>", "<eos>", "<unk>", "<sep>"];

const CONTINUE: &str = "@@";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: BTreeMap<String, usize>,
    /// Subword merge rules in application order; empty in word-level mode.
    merges: Vec<(String, String)>,
}

pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace().collect()
}

impl Vocabulary {
    /// Word-level vocabulary: most frequent tokens first, ties broken
    /// lexicographically, truncated to `max_size` including the reserved
    /// ids.
    pub fn build<'s>(sentences: impl IntoIterator<Item = &'s str>, max_size: usize) -> Result<Self, DataError> {
        if max_size < RESERVED.len() {
            return Err(DataError::VocabTooSmall { max_size, reserved: RESERVED.len() });
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for sentence in sentences {
            for token in tokenize(sentence) {
                *counts.entry(token.to_owned()).or_insert(0) += 1;
            }
        }
        let ranked = rank(counts, max_size - RESERVED.len());
        Ok(Self::from_ranked(ranked, Vec::new()))
    }

    /// Subword vocabulary: words are split into characters and the
    /// `merge_rounds` most frequent adjacent unit pairs are merged, most
    /// frequent pair first (ties lexicographic). The resulting units are
    /// then ranked like words.
    pub fn build_subword<'s>(
        sentences: impl IntoIterator<Item = &'s str>,
        max_size: usize,
        merge_rounds: usize,
    ) -> Result<Self, DataError> {
        if max_size < RESERVED.len() {
            return Err(DataError::VocabTooSmall { max_size, reserved: RESERVED.len() });
        }
        let mut word_counts: BTreeMap<String, u64> = BTreeMap::new();
        for sentence in sentences {
            for token in tokenize(sentence) {
                *word_counts.entry(token.to_owned()).or_insert(0) += 1;
            }
        }
        let mut words: Vec<(Vec<String>, u64)> = word_counts
            .into_iter()
            .map(|(w, n)| (split_chars(&w), n))
            .collect();
        let mut merges = Vec::with_capacity(merge_rounds);
        for _ in 0..merge_rounds {
            let mut pair_counts: BTreeMap<(String, String), u64> = BTreeMap::new();
            for (units, n) in &words {
                for pair in units.windows(2) {
                    *pair_counts.entry((pair[0].clone(), pair[1].clone())).or_insert(0) += n;
                }
            }
            let Some(best) = pair_counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then_with(|| b.0.cmp(&a.0)))
            else {
                break;
            };
            if best.1 < 2 {
                break;
            }
            for (units, _) in &mut words {
                apply_merge(units, &best.0);
            }
            merges.push(best.0);
        }
        let mut unit_counts: BTreeMap<String, u64> = BTreeMap::new();
        for (units, n) in &words {
            for u in units {
                *unit_counts.entry(u.clone()).or_insert(0) += n;
            }
        }
        let ranked = rank(unit_counts, max_size - RESERVED.len());
        Ok(Self::from_ranked(ranked, merges))
    }

    fn from_ranked(ranked: Vec<String>, merges: Vec<(String, String)>) -> Self {
        let mut tokens: Vec<String> = RESERVED.iter().map(|&s| s.to_owned()).collect();
        tokens.extend(ranked);
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self { tokens, index, merges }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn uses_subwords(&self) -> bool {
        !self.merges.is_empty()
    }

    pub fn id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        assert!(id < self.tokens.len(), "token id {id} outside vocabulary of {}", self.tokens.len());
        &self.tokens[id]
    }

    pub fn encode(&self, text: &str) -> Vec<usize> {
        let mut out = Vec::new();
        for word in tokenize(text) {
            if self.merges.is_empty() {
                out.push(self.id(word).unwrap_or(UNK));
            } else {
                let mut units = split_chars(word);
                for merge in &self.merges {
                    apply_merge(&mut units, merge);
                }
                out.extend(units.iter().map(|u| self.id(u).unwrap_or(UNK)));
            }
        }
        out
    }

    /// Surface string for a decoded id sequence. Subword continuations are
    /// joined; reserved ids render as their literal forms.
    pub fn decode(&self, ids: &[usize]) -> String {
        let mut out = String::new();
        let mut joining = false;
        for &id in ids {
            let tok = self.token(id);
            if !joining && !out.is_empty() {
                out.push(' ');
            }
            match tok.strip_suffix(CONTINUE) {
                Some(stem) if id >= RESERVED.len() => {
                    out.push_str(stem);
                    joining = true;
                }
                _ => {
                    out.push_str(tok);
                    joining = false;
                }
            }
        }
        out
    }

    /// Serialized form: `#`-prefixed header lines (reserved list and merge
    /// rules), then every token in id order.
    pub fn to_lines(&self) -> Vec<String> {
        let mut lines = Vec::with_capacity(self.tokens.len() + 1 + self.merges.len());
        lines.push(format!("# reserved: {}", RESERVED.join(" ")));
        for (a, b) in &self.merges {
            lines.push(format!("#merge {a} {b}"));
        }
        lines.extend(self.tokens.iter().cloned());
        lines
    }

    pub fn from_lines<'s>(lines: impl IntoIterator<Item = &'s str>) -> Result<Self, DataError> {
        let mut tokens: Vec<String> = Vec::new();
        let mut merges = Vec::new();
        for (lineno, raw) in lines.into_iter().enumerate() {
            let line = raw.trim_end_matches(['\r', '\n']);
            if line.is_empty() {
                continue;
            }
            if let Some(rule) = line.strip_prefix("#merge ") {
                let mut parts = rule.split(' ');
                match (parts.next(), parts.next(), parts.next()) {
                    (Some(a), Some(b), None) => merges.push((a.to_owned(), b.to_owned())),
                    _ => {
                        return Err(DataError::MalformedVocab {
                            line: lineno + 1,
                            reason: format!("bad merge rule {line:?}"),
                        })
                    }
                }
                continue;
            }
            if line.starts_with('#') {
                continue;
            }
            if line.chars().any(char::is_whitespace) {
                return Err(DataError::MalformedVocab {
                    line: lineno + 1,
                    reason: format!("token {line:?} contains whitespace"),
                });
            }
            tokens.push(line.to_owned());
        }
        if tokens.len() < RESERVED.len() || tokens[..RESERVED.len()] != RESERVED.map(str::to_owned) {
            return Err(DataError::MalformedVocab {
                line: 1,
                reason: format!("file must begin with the reserved tokens {RESERVED:?}"),
            });
        }
        let mut index = BTreeMap::new();
        for (i, t) in tokens.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(DataError::MalformedVocab {
                    line: i + 1,
                    reason: format!("duplicate token {t:?}"),
                });
            }
        }
        Ok(Self { tokens, index, merges })
    }
}

fn rank(counts: BTreeMap<String, u64>, budget: usize) -> Vec<String> {
    let mut entries: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|(t, _)| !RESERVED.contains(&t.as_str()))
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
    entries.truncate(budget);
    entries.into_iter().map(|(t, _)| t).collect()
}

fn split_chars(word: &str) -> Vec<String> {
    let chars: Vec<char> = word.chars().collect();
    let last = chars.len().saturating_sub(1);
    chars
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if i == last {
                c.to_owned().into()
            } else {
                format!("{c}{CONTINUE}")
            }
        })
        .collect()
}

fn apply_merge(units: &mut Vec<String>, (a, b): &(String, String)) {
    let mut i = 0;
    while i + 1 < units.len() {
        if &units[i] == a && &units[i + 1] == b {
            let right = units.remove(i + 1);
            let left = &mut units[i];
            left.truncate(left.len() - CONTINUE.len());
            left.push_str(&right);
        } else {
            i += 1;
        }
    }
}
