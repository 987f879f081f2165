//! Trains the published configurations on real ROCStory data.
//!
//! Expects `$CLOZE_RANK_DATA_DIR` (or the first argument) to hold
//! `train.csv`, `val.csv`, `test.csv`, `sentences.emb` and optionally
//! `words.emb`, all produced by the embedding exporter. At 4800 dimensions
//! this takes hours on one core; pass a smaller run count as the second
//! argument to shorten it.
//!
//! ```text
//! cargo run --release --example rocstories -- /data/rocstories 1
//! ```

use std::path::PathBuf;

use cloze_rank::cli::DATA_DIR_ENV;
use cloze_rank::corpus::{load_cloze_set, load_embedding_table, load_training_corpus, WordEmbeddingTable};
use cloze_rank::models::{EmbeddingSource, ModelSpec, ModelVariant};
use cloze_rank::training::{run_experiment, DataBundle, TrainConfig, TrainSource};

fn main() -> cloze_rank::Result<()> {
    let mut args = std::env::args().skip(1);
    let Some(dir) = args.next().map(PathBuf::from).or_else(|| std::env::var_os(DATA_DIR_ENV).map(PathBuf::from)) else {
        eprintln!("usage: rocstories <data-dir> [runs]  (or set {DATA_DIR_ENV})");
        std::process::exit(2);
    };
    let runs: usize = args.next().map_or(5, |r| r.parse().expect("runs must be a number"));

    let words = dir.join("words.emb");
    let data = DataBundle {
        train: load_training_corpus(dir.join("train.csv"))?,
        val: load_cloze_set(dir.join("val.csv"), true)?,
        test: load_cloze_set(dir.join("test.csv"), true)?,
        sentences: Some(load_embedding_table(dir.join("sentences.emb"))?),
        words: if words.is_file() {
            Some(WordEmbeddingTable::from_table(&load_embedding_table(words)?))
        } else {
            None
        },
    };
    println!("{} training stories, {} val items, {} test items", data.train.len(), data.val.len(), data.test.len());

    let mut grid = Vec::new();
    for train_on in [TrainSource::Train, TrainSource::Val] {
        for variant in [ModelVariant::Nc, ModelVariant::Fc, ModelVariant::Ls] {
            grid.push((variant, EmbeddingSource::Precomputed, train_on));
        }
    }
    if data.words.is_some() {
        grid.push((ModelVariant::Ls, EmbeddingSource::Words, TrainSource::Val));
    }
    for (variant, source, train_on) in grid {
        let spec = ModelSpec::published(variant, source);
        let config = TrainConfig {
            runs: if variant == ModelVariant::Fc { 1 } else { runs },
            ..TrainConfig::new(train_on)
        };
        let report = run_experiment(&spec, &config, &data)?;
        println!("{:<14} {:.1}%", report.model, 100.0 * report.mean_test_accuracy);
    }
    Ok(())
}
