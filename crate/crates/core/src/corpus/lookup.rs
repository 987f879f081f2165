use std::collections::HashMap;

use super::words::tokenize;
use super::{ClozeItem, EmbeddingTable, FiveSentenceStory, WordEmbeddingTable};

/// What a model consumes for one sentence.
#[derive(Debug, Clone, PartialEq)]
pub enum SentenceInput<'a, T> {
    /// A precomputed sentence vector.
    Vector(&'a [T]),
    /// Word vectors, to be encoded by a learned sentence encoder.
    Words(Vec<&'a [T]>),
}

/// Resolves sentence keys to model inputs.
pub trait SentenceLookup: Sync {
    fn resolve(&self, key: &str) -> Option<SentenceInput<'_, f32>>;

    fn contains(&self, key: &str) -> bool {
        self.resolve(key).is_some()
    }
}

impl SentenceLookup for EmbeddingTable {
    fn resolve(&self, key: &str) -> Option<SentenceInput<'_, f32>> {
        self.get(key).map(SentenceInput::Vector)
    }

    fn contains(&self, key: &str) -> bool {
        EmbeddingTable::contains(self, key)
    }
}

impl<L: SentenceLookup + ?Sized> SentenceLookup for &L {
    fn resolve(&self, key: &str) -> Option<SentenceInput<'_, f32>> {
        (**self).resolve(key)
    }

    fn contains(&self, key: &str) -> bool {
        (**self).contains(key)
    }
}

/// Tokenized sentences keyed by sentence key, stored as token ids into a
/// word table so the corpus is not materialized as vectors.
#[derive(Debug, Clone)]
pub struct WordSequences<'w> {
    words: &'w WordEmbeddingTable,
    sentences: HashMap<String, Vec<Option<usize>>>,
}

impl<'w> WordSequences<'w> {
    pub fn new(words: &'w WordEmbeddingTable) -> Self {
        WordSequences {
            words,
            sentences: HashMap::new(),
        }
    }

    pub fn add(&mut self, key: &str, text: &str) {
        let ids: Vec<Option<usize>> = tokenize(text).iter().map(|t| self.words.token_id(t)).collect();
        // empty sentences become one OOV token
        let ids = if ids.is_empty() { vec![None] } else { ids };
        self.sentences.insert(key.to_string(), ids);
    }

    pub fn add_stories(&mut self, stories: &[FiveSentenceStory]) {
        for s in stories.iter().flat_map(|st| st.sentences.iter()) {
            self.add(&s.key, &s.text);
        }
    }

    pub fn add_items(&mut self, items: &[ClozeItem]) {
        for s in items.iter().flat_map(|it| it.prompt.iter().chain(it.endings.iter())) {
            self.add(&s.key, &s.text);
        }
    }

    pub fn len(&self) -> usize {
        self.sentences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sentences.is_empty()
    }
}

impl SentenceLookup for WordSequences<'_> {
    fn resolve(&self, key: &str) -> Option<SentenceInput<'_, f32>> {
        self.sentences
            .get(key)
            .map(|ids| SentenceInput::Words(ids.iter().map(|&id| self.words.by_id(id)).collect()))
    }

    fn contains(&self, key: &str) -> bool {
        self.sentences.contains_key(key)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn word_sequences_resolve_by_key() {
        let mut w = WordEmbeddingTable::new(2).unwrap();
        w.insert("bob", &[1.0, 2.0]).unwrap();
        let item = ClozeItem::from_texts("i", ["Bob.", "x", "y", "z"], ["Bob bob", ""], Some(0));
        let mut seqs = WordSequences::new(&w);
        seqs.add_items(&[item]);
        assert_eq!(seqs.len(), 6);
        match seqs.resolve("i#e1").unwrap() {
            SentenceInput::Words(v) => assert_eq!(v, vec![&[1.0, 2.0][..], &[1.0, 2.0][..]]),
            _ => panic!(),
        }
        match seqs.resolve("i#e2").unwrap() {
            SentenceInput::Words(v) => assert_eq!(v, vec![&[0.0, 0.0][..]]),
            _ => panic!(),
        }
        assert!(seqs.resolve("missing").is_none());
    }
}
