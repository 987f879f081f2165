//! Story data: ROCStory-format CSV ingestion, EMB1 embedding tables, word
//! tokenization, negative sampling, training-example construction and
//! synthetic corpora.

mod csv_io;
mod emb;
mod examples;
mod lookup;
mod synth;
mod words;

pub use csv_io::{
    load_cloze_set, load_training_corpus, write_cloze_set, write_training_corpus, CLOZE_HEADER,
    CLOZE_HEADER_UNLABELED, TRAINING_HEADER,
};
pub use emb::{
    load_embedding_table, read_embedding_table, write_embedding_table, write_embedding_table_to,
    EmbeddingTable, EMB1_MAGIC,
};
pub use examples::{build_examples, sample_negative, ExampleSource, LabeledEnding, NegativeSource};
pub use lookup::{SentenceInput, SentenceLookup, WordSequences};
pub use synth::{generate_synthetic, SynthConfig, SynthRegime, SyntheticBundle};
pub use words::{embed_sentence_by_words, tokenize, WordEmbeddingTable, OOV_KEY};

use serde::{Deserialize, Serialize};

/// A sentence and its embedding-table key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sentence {
    pub key: String,
    pub text: String,
}

impl Sentence {
    pub fn new(key: impl Into<String>, text: impl Into<String>) -> Self {
        Sentence {
            key: key.into(),
            text: text.into(),
        }
    }
}

/// A complete training story (no wrong ending).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FiveSentenceStory {
    pub story_id: String,
    pub title: String,
    pub sentences: [Sentence; 5],
}

/// A four-sentence prompt with two candidate endings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeItem {
    pub item_id: String,
    pub prompt: [Sentence; 4],
    pub endings: [Sentence; 2],
    /// Index of the right ending, when known.
    pub gold_index: Option<usize>,
}

/// `<storyid>#s<k>` for `k` in `1..=5`.
pub fn story_key(story_id: &str, k: usize) -> String {
    format!("{story_id}#s{k}")
}

/// `<itemid>#e<k>` for `k` in `1..=2`.
pub fn ending_key(item_id: &str, k: usize) -> String {
    format!("{item_id}#e{k}")
}

impl FiveSentenceStory {
    pub fn from_texts(story_id: &str, title: &str, texts: [&str; 5]) -> Self {
        FiveSentenceStory {
            story_id: story_id.to_string(),
            title: title.to_string(),
            sentences: std::array::from_fn(|k| Sentence::new(story_key(story_id, k + 1), texts[k])),
        }
    }

    pub fn ending(&self) -> &Sentence {
        &self.sentences[4]
    }
}

impl ClozeItem {
    pub fn from_texts(item_id: &str, prompt: [&str; 4], endings: [&str; 2], gold_index: Option<usize>) -> Self {
        ClozeItem {
            item_id: item_id.to_string(),
            prompt: std::array::from_fn(|k| Sentence::new(story_key(item_id, k + 1), prompt[k])),
            endings: std::array::from_fn(|k| Sentence::new(ending_key(item_id, k + 1), endings[k])),
            gold_index,
        }
    }

    /// Same item with the two candidates exchanged (gold index follows).
    pub fn swapped(&self) -> Self {
        ClozeItem {
            item_id: self.item_id.clone(),
            prompt: self.prompt.clone(),
            endings: [self.endings[1].clone(), self.endings[0].clone()],
            gold_index: self.gold_index.map(|g| 1 - g),
        }
    }
}
