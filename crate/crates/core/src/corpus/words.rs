use std::collections::HashMap;

use super::EmbeddingTable;
use crate::error::{check_dim, Error, Result};

/// Reserved key for the unknown-token vector in token-keyed EMB1 files.
pub const OOV_KEY: &str = "<oov>";

/// Lowercases, splits on whitespace and strips punctuation surrounding each
/// piece. Pieces that are pure punctuation vanish.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split_whitespace()
        .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_lowercase())
        .filter(|w| !w.is_empty())
        .collect()
}

/// Token vectors plus the vector used for unknown tokens.
#[derive(Debug, Clone, PartialEq)]
pub struct WordEmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f32>,
    oov: Vec<f32>,
}

impl WordEmbeddingTable {
    /// An empty vocabulary; every token maps to the zero OOV vector.
    pub fn new(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::config("word-vector dimension must be positive"));
        }
        Ok(WordEmbeddingTable {
            dim,
            index: HashMap::new(),
            data: Vec::new(),
            oov: vec![0.0; dim],
        })
    }

    /// Uses the `<oov>` record as the unknown vector when present, zeros otherwise.
    pub fn from_table(table: &EmbeddingTable) -> Self {
        let dim = table.dim();
        let mut index = HashMap::with_capacity(table.len());
        let mut data = Vec::with_capacity(table.len() * dim);
        let mut oov = vec![0.0; dim];
        for (k, v) in table.iter() {
            if k == OOV_KEY {
                oov.copy_from_slice(v);
            } else {
                index.insert(k.to_string(), index.len());
                data.extend_from_slice(v);
            }
        }
        WordEmbeddingTable { dim, index, data, oov }
    }

    pub fn insert(&mut self, token: impl Into<String>, vector: &[f32]) -> Result<()> {
        let token = token.into();
        check_dim("word vector", self.dim, vector.len())?;
        if vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(token));
        }
        if self.index.contains_key(&token) {
            return Err(Error::DuplicateKey(token));
        }
        self.index.insert(token, self.index.len());
        self.data.extend_from_slice(vector);
        Ok(())
    }

    pub fn set_oov(&mut self, vector: &[f32]) -> Result<()> {
        check_dim("oov vector", self.dim, vector.len())?;
        self.oov.copy_from_slice(vector);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn oov_vector(&self) -> &[f32] {
        &self.oov
    }

    pub(crate) fn token_id(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub(crate) fn by_id(&self, id: Option<usize>) -> &[f32] {
        match id {
            Some(i) => &self.data[i * self.dim..(i + 1) * self.dim],
            None => &self.oov,
        }
    }

    pub fn lookup(&self, token: &str) -> Option<&[f32]> {
        self.token_id(token).map(|i| self.by_id(Some(i)))
    }

    pub fn get_or_oov(&self, token: &str) -> &[f32] {
        self.by_id(self.token_id(token))
    }
}

/// One vector per token; an empty or all-punctuation sentence yields a
/// single OOV vector.
pub fn embed_sentence_by_words<'w>(text: &str, words: &'w WordEmbeddingTable) -> Vec<&'w [f32]> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return vec![words.oov_vector()];
    }
    tokens.iter().map(|t| words.get_or_oov(t)).collect()
}
