//! ROCStory-layout CSVs and EMB1 embedding tables: write, read back, and
//! resolve sentence keys both as precomputed vectors and as word sequences.
//!
//! ```text
//! cargo run --example data_files
//! ```

use cloze_rank::corpus::{
    build_examples, load_cloze_set, load_embedding_table, load_training_corpus, tokenize, write_cloze_set,
    write_embedding_table, write_training_corpus, ClozeItem, EmbeddingTable, ExampleSource, FiveSentenceStory,
    NegativeSource, SentenceInput, SentenceLookup, WordEmbeddingTable, WordSequences,
};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let dir = std::env::temp_dir().join("cloze-rank-data-files");
    std::fs::create_dir_all(&dir)?;

    let stories = vec![
        FiveSentenceStory::from_texts(
            "a1",
            "Rain",
            ["It rained.", "Ann had no coat.", "She ran home.", "She was soaked.", "She made tea."],
        ),
        FiveSentenceStory::from_texts(
            "b2",
            "Exam",
            ["Tom studied.", "He slept early.", "The exam came.", "It was easy.", "He passed."],
        ),
    ];
    let items = vec![ClozeItem::from_texts(
        "q1",
        ["Kim got a puppy.", "It chewed shoes.", "She trained it.", "It learned fast."],
        ["Kim was proud.", "Kim hated dogs."],
        Some(0),
    )];
    write_training_corpus(dir.join("train.csv"), &stories)?;
    write_cloze_set(dir.join("val.csv"), &items)?;
    let stories = load_training_corpus(dir.join("train.csv"))?;
    let items = load_cloze_set(dir.join("val.csv"), true)?;
    println!("{} stories, {} cloze items, first key {}", stories.len(), items.len(), stories[0].sentences[0].key);

    // a toy 3-dimensional sentence table keyed like the exporter's output
    let mut table = EmbeddingTable::new(3)?;
    let keys = stories
        .iter()
        .flat_map(|s| s.sentences.iter())
        .chain(items.iter().flat_map(|i| i.prompt.iter().chain(&i.endings)));
    for (n, sentence) in keys.enumerate() {
        table.insert(sentence.key.clone(), &[n as f32, 1.0, -1.0])?;
    }
    write_embedding_table(&table, dir.join("sentences.emb"))?;
    let back = load_embedding_table(dir.join("sentences.emb"))?;
    println!("EMB1 round trip: {} records of dim {}, equal: {}", back.len(), back.dim(), back == table);

    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let examples = build_examples(ExampleSource::Stories(&stories, NegativeSource::Fifth), &back, &mut rng)?;
    for ex in &examples {
        println!("  {} + {} -> label {}", ex.item_key, ex.ending_key, ex.label);
    }

    let mut words = WordEmbeddingTable::new(2)?;
    for (n, token) in ["kim", "was", "proud"].into_iter().enumerate() {
        words.insert(token, &[n as f32, 0.5])?;
    }
    let mut seqs = WordSequences::new(&words);
    seqs.add_items(&items);
    let text = &items[0].endings[1].text;
    if let Some(SentenceInput::Words(vectors)) = seqs.resolve(&items[0].endings[1].key) {
        println!("{text:?} -> tokens {:?}, {} word vectors (unknown tokens use the OOV vector)", tokenize(text), vectors.len());
    }
    Ok(())
}
