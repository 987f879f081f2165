use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{ClozeItem, FiveSentenceStory, SentenceLookup};
use crate::error::{Error, Result};

/// One `(prompt, ending, label)` training record, by sentence key.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledEnding {
    pub item_key: String,
    pub prompt_keys: [String; 4],
    pub ending_key: String,
    /// 1 = right, 0 = wrong.
    pub label: usize,
}

/// Which sentences of other stories may serve as wrong endings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum NegativeSource {
    /// Only the fifth sentence (an ending) of another story.
    #[default]
    Fifth,
    /// Any of the five sentences of another story.
    Any,
}

/// Draws a wrong ending for `corpus[story_index]` uniformly from the other
/// stories.
pub fn sample_negative<'c, R: Rng + ?Sized>(
    story_index: usize,
    corpus: &'c [FiveSentenceStory],
    source: NegativeSource,
    rng: &mut R,
) -> Result<&'c str> {
    if corpus.len() < 2 {
        return Err(Error::CorpusTooSmall(corpus.len()));
    }
    if story_index >= corpus.len() {
        return Err(Error::config(format!(
            "story index {story_index} out of range for corpus of {}",
            corpus.len()
        )));
    }
    let mut other = rng.random_range(0..corpus.len() - 1);
    if other >= story_index {
        other += 1;
    }
    let sentence = match source {
        NegativeSource::Fifth => 4,
        NegativeSource::Any => rng.random_range(0..5),
    };
    Ok(&corpus[other].sentences[sentence].key)
}

pub enum ExampleSource<'a> {
    /// Five-sentence stories: one positive plus one sampled negative each.
    Stories(&'a [FiveSentenceStory], NegativeSource),
    /// Labeled cloze items: gold ending positive, the other negative.
    Cloze(&'a [ClozeItem]),
}

fn prompt_keys<'s>(sentences: impl Iterator<Item = &'s super::Sentence>) -> [String; 4] {
    let keys: Vec<String> = sentences.take(4).map(|s| s.key.clone()).collect();
    keys.try_into().expect("four prompt sentences")
}

/// Builds labeled examples, checking that every key resolves in `lookup`.
pub fn build_examples<L: SentenceLookup + ?Sized, R: Rng + ?Sized>(
    source: ExampleSource<'_>,
    lookup: &L,
    rng: &mut R,
) -> Result<Vec<LabeledEnding>> {
    let mut out = Vec::new();
    match source {
        ExampleSource::Stories(corpus, neg) => {
            out.reserve(2 * corpus.len());
            for (i, story) in corpus.iter().enumerate() {
                let prompt = prompt_keys(story.sentences.iter());
                let negative = sample_negative(i, corpus, neg, rng)?.to_string();
                out.push(LabeledEnding {
                    item_key: story.story_id.clone(),
                    prompt_keys: prompt.clone(),
                    ending_key: story.ending().key.clone(),
                    label: 1,
                });
                out.push(LabeledEnding {
                    item_key: story.story_id.clone(),
                    prompt_keys: prompt,
                    ending_key: negative,
                    label: 0,
                });
            }
        }
        ExampleSource::Cloze(items) => {
            out.reserve(2 * items.len());
            for item in items {
                let gold = item
                    .gold_index
                    .ok_or_else(|| Error::UnlabeledItem(item.item_id.clone()))?;
                let prompt = prompt_keys(item.prompt.iter());
                for (k, ending) in item.endings.iter().enumerate() {
                    out.push(LabeledEnding {
                        item_key: item.item_id.clone(),
                        prompt_keys: prompt.clone(),
                        ending_key: ending.key.clone(),
                        label: usize::from(k == gold),
                    });
                }
            }
        }
    }
    for ex in &out {
        for key in ex.prompt_keys.iter().chain(std::iter::once(&ex.ending_key)) {
            if !lookup.contains(key) {
                return Err(Error::MissingEmbedding(key.clone()));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{story_key, EmbeddingTable};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn corpus(n: usize) -> Vec<FiveSentenceStory> {
        (0..n)
            .map(|i| {
                let id = format!("st{i}");
                FiveSentenceStory::from_texts(&id, "t", ["a", "b", "c", "d", "e"])
            })
            .collect()
    }

    fn table_for(stories: &[FiveSentenceStory], items: &[ClozeItem]) -> EmbeddingTable {
        let mut t = EmbeddingTable::new(2).unwrap();
        for s in stories.iter().flat_map(|s| s.sentences.iter()) {
            t.insert(s.key.clone(), &[0.0, 1.0]).unwrap();
        }
        for s in items.iter().flat_map(|i| i.prompt.iter().chain(i.endings.iter())) {
            t.insert(s.key.clone(), &[1.0, 0.0]).unwrap();
        }
        t
    }

    #[test]
    fn two_story_corpus_has_one_choice() {
        let c = corpus(2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20 {
            assert_eq!(sample_negative(0, &c, NegativeSource::Fifth, &mut rng).unwrap(), "st1#s5");
        }
    }

    #[test]
    fn tiny_corpus_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            sample_negative(0, &corpus(1), NegativeSource::Fifth, &mut rng),
            Err(Error::CorpusTooSmall(1))
        ));
    }

    #[test]
    fn draws_are_uniform_over_other_stories() {
        let c = corpus(3);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut counts = [0usize; 3];
        let n = 10_000;
        for _ in 0..n {
            let key = sample_negative(0, &c, NegativeSource::Fifth, &mut rng).unwrap();
            let idx = c.iter().position(|s| s.sentences[4].key == key).unwrap();
            counts[idx] += 1;
        }
        assert_eq!(counts[0], 0);
        // chi-square against uniform over {1, 2}, 1 dof, 0.999 quantile 10.83
        let e = n as f64 / 2.0;
        let chi2: f64 = counts[1..].iter().map(|&o| (o as f64 - e).powi(2) / e).sum();
        assert!(chi2 < 10.83, "chi2 = {chi2}");
        for &cnt in &counts[1..] {
            assert!((cnt as f64 / n as f64 - 0.5).abs() < 0.02);
        }
    }

    #[test]
    fn never_returns_own_sentence_exhaustive() {
        let c = corpus(4);
        for source in [NegativeSource::Fifth, NegativeSource::Any] {
            for seed in 0..50 {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                for idx in 0..4 {
                    let key = sample_negative(idx, &c, source, &mut rng).unwrap();
                    assert!((1..=5).all(|k| key != story_key(&c[idx].story_id, k)));
                }
            }
        }
    }

    #[test]
    fn cloze_item_yields_one_of_each_label() {
        let items = vec![ClozeItem::from_texts("q", ["a", "b", "c", "d"], ["e", "f"], Some(1))];
        let t = table_for(&[], &items);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ex = build_examples(ExampleSource::Cloze(&items), &t, &mut rng).unwrap();
        assert_eq!(ex.len(), 2);
        assert_eq!(ex[0].label, 0);
        assert_eq!(ex[1].label, 1);
        assert_eq!(ex[1].ending_key, "q#e2");
    }

    #[test]
    fn ten_stories_yield_twenty_balanced_examples() {
        let c = corpus(10);
        let t = table_for(&c, &[]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ex = build_examples(ExampleSource::Stories(&c, NegativeSource::Fifth), &t, &mut rng).unwrap();
        assert_eq!(ex.len(), 20);
        assert_eq!(ex.iter().filter(|e| e.label == 1).count(), 10);
        for e in ex.iter().filter(|e| e.label == 0) {
            assert!(!e.ending_key.starts_with(&format!("{}#", e.item_key)));
        }
    }

    #[test]
    fn missing_key_is_named() {
        let items = vec![ClozeItem::from_texts("q", ["a", "b", "c", "d"], ["e", "f"], Some(0))];
        let t = EmbeddingTable::new(2).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        match build_examples(ExampleSource::Cloze(&items), &t, &mut rng) {
            Err(Error::MissingEmbedding(k)) => assert_eq!(k, "q#s1"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unlabeled_items_are_rejected() {
        let items = vec![ClozeItem::from_texts("q", ["a", "b", "c", "d"], ["e", "f"], None)];
        let t = table_for(&[], &items);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            build_examples(ExampleSource::Cloze(&items), &t, &mut rng),
            Err(Error::UnlabeledItem(_))
        ));
    }
}
