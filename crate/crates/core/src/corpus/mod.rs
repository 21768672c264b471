//! Click-log ingestion, preprocessing and the processed-corpus file format.

mod format;
mod parse;
mod preprocess;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use format::{read_corpus, write_corpus, CORPUS_VERSION};
pub use parse::{
    parse_diginetica, parse_diginetica_reader, parse_generic, parse_generic_reader,
    parse_yoochoose, parse_yoochoose_reader, ParseReport,
};
pub use preprocess::{preprocess, PreprocessConfig, Recipe};

/// One click before vocabulary assignment.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RawEvent {
    pub session_id: String,
    /// Epoch milliseconds.
    pub timestamp: i64,
    pub item_id: String,
}

impl RawEvent {
    pub fn new(session_id: impl Into<String>, timestamp: i64, item_id: impl Into<String>) -> Self {
        Self {
            session_id: session_id.into(),
            timestamp,
            item_id: item_id.into(),
        }
    }
}

/// A history prefix and the item clicked right after it.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SessionExample {
    pub history: Vec<u32>,
    pub target: u32,
}

impl SessionExample {
    pub fn new(history: Vec<u32>, target: u32) -> Self {
        Self { history, target }
    }

    pub fn last(&self) -> Option<u32> {
        self.history.last().copied()
    }
}

/// Bijection between raw item identifiers and dense indices `0..len`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ItemVocab {
    ids: Vec<String>,
    index: HashMap<String, u32>,
}

impl ItemVocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the index of `id`, assigning the next free one if unseen.
    pub fn intern(&mut self, id: &str) -> u32 {
        if let Some(&i) = self.index.get(id) {
            return i;
        }
        let i = self.ids.len() as u32;
        self.ids.push(id.to_owned());
        self.index.insert(id.to_owned(), i);
        i
    }

    pub fn get(&self, id: &str) -> Option<u32> {
        self.index.get(id).copied()
    }

    pub fn id(&self, index: u32) -> Option<&str> {
        self.ids.get(index as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn from_ids(ids: Vec<String>) -> crate::Result<Self> {
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i as u32).is_some() {
                return Err(crate::Error::UnsupportedFormat(format!(
                    "duplicate item id {id:?} in vocabulary"
                )));
            }
        }
        Ok(Self { ids, index })
    }
}

/// Train/test examples plus everything needed to interpret them.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProcessedCorpus {
    pub dataset: String,
    pub config_hash: String,
    pub vocab: ItemVocab,
    /// Full (deduplication-free) training sessions, before prefix augmentation.
    pub train_sessions: Vec<Vec<u32>>,
    pub train: Vec<SessionExample>,
    pub test: Vec<SessionExample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub dataset: String,
    pub config_hash: String,
    pub format_version: u32,
    pub items: usize,
    pub train_sessions: usize,
    pub train_examples: usize,
    pub test_examples: usize,
    pub fingerprint: String,
}

impl ProcessedCorpus {
    pub fn num_items(&self) -> usize {
        self.vocab.len()
    }

    /// SHA-256 of the canonical binary encoding, hex encoded.
    pub fn fingerprint(&self) -> String {
        hex_digest(&format::encode(self))
    }

    pub fn stats(&self) -> CorpusStats {
        CorpusStats {
            dataset: self.dataset.clone(),
            config_hash: self.config_hash.clone(),
            format_version: CORPUS_VERSION,
            items: self.num_items(),
            train_sessions: self.train_sessions.len(),
            train_examples: self.train.len(),
            test_examples: self.test.len(),
            fingerprint: self.fingerprint(),
        }
    }

    /// Prefix-augments `sessions` and wraps them as a corpus; handy for
    /// synthetic data and tests.
    pub fn from_sessions(
        dataset: &str,
        num_items: usize,
        train_sessions: Vec<Vec<u32>>,
        test_sessions: &[Vec<u32>],
    ) -> Self {
        let vocab = ItemVocab::from_ids((0..num_items).map(|i| i.to_string()).collect())
            .expect("numeric ids are unique");
        let train = augment(&train_sessions, None);
        let test = augment(test_sessions, None);
        Self {
            dataset: dataset.to_owned(),
            config_hash: String::new(),
            vocab,
            train_sessions,
            train,
            test,
        }
    }
}

/// Expands each session of length `m` into `m - 1` (prefix, next item)
/// examples, keeping at most `max_len` most recent history items.
pub fn augment(sessions: &[Vec<u32>], max_len: Option<usize>) -> Vec<SessionExample> {
    let mut out = Vec::new();
    for s in sessions {
        for i in 1..s.len() {
            let start = max_len.map_or(0, |m| i.saturating_sub(m));
            out.push(SessionExample::new(s[start..i].to_vec(), s[i]));
        }
    }
    out
}

pub(crate) fn hex_digest(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn prefix_rule() {
        let ex = augment(&[vec![0, 1, 2]], None);
        assert_eq!(
            ex,
            vec![SessionExample::new(vec![0], 1), SessionExample::new(vec![0, 1], 2)]
        );
    }

    #[test]
    fn truncation_keeps_most_recent() {
        let ex = augment(&[vec![5, 6, 7, 8]], Some(2));
        assert_eq!(ex[2], SessionExample::new(vec![6, 7], 8));
        assert_eq!(ex[0], SessionExample::new(vec![5], 6));
    }

    #[test]
    fn vocab_is_contiguous_bijection() {
        let mut v = ItemVocab::new();
        assert_eq!(v.intern("x"), 0);
        assert_eq!(v.intern("y"), 1);
        assert_eq!(v.intern("x"), 0);
        assert_eq!(v.id(1), Some("y"));
        assert_eq!(v.get("z"), None);
        assert!(ItemVocab::from_ids(vec!["a".into(), "a".into()]).is_err());
    }
}
