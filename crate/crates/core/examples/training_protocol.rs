//! One training run with an observer that watches the holdout split, every
//! checkpoint evaluation, and the final best model, which is saved as MDL1
//! and reloaded.
//!
//! ```text
//! cargo run --release --example training_protocol
//! ```

use cloze_rank::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use cloze_rank::corpus::{generate_synthetic, LabeledEnding, SynthConfig, SynthRegime};
use cloze_rank::models::{accuracy, EmbeddingSource, ModelSpec, ModelVariant, StoryClozeModel};
use cloze_rank::training::{train_run_observed, CheckpointEval, DataBundle, RunObserver, RunResult, RunSplit, TrainConfig, TrainSource};

struct Narrator {
    best: Option<StoryClozeModel<f32>>,
}

impl RunObserver for Narrator {
    fn on_split(&mut self, split: &RunSplit) {
        println!("train on {} items, select on {}", split.train_items.len(), split.selection.len());
    }

    fn on_epoch_start(&mut self, epoch: usize, examples: &[LabeledEnding]) {
        println!("epoch {epoch}: {} examples", examples.len());
    }

    fn on_checkpoint(&mut self, eval: &CheckpointEval, _: &StoryClozeModel<f32>, is_best: bool) -> cloze_rank::Result<()> {
        let mark = if is_best { " (new best)" } else { "" };
        println!("  update {:>6}: selection accuracy {:.4}{mark}", eval.update, eval.selection_accuracy);
        Ok(())
    }

    fn on_finish(&mut self, _: &RunResult, best: &StoryClozeModel<f32>) -> cloze_rank::Result<()> {
        self.best = Some(best.clone());
        Ok(())
    }
}

fn main() -> cloze_rank::Result<()> {
    let data: DataBundle = generate_synthetic(&SynthConfig::new(SynthRegime::Style, 500, 300, 300, 32, 2))?.into();
    let spec = ModelSpec::with_dims(ModelVariant::Ls, EmbeddingSource::Precomputed, 32, vec![64, 32], 0);
    let config = TrainConfig {
        checkpoint_interval: 200,
        max_epochs: 4,
        patience: 5,
        ..TrainConfig::new(TrainSource::Val)
    };
    let mut narrator = Narrator { best: None };
    let run = train_run_observed(&spec, &config, &data, 0, &mut narrator)?;
    println!(
        "best checkpoint at update {} of {}: selection {:.4}, test {:.4}",
        run.best_checkpoint_id, run.updates_performed, run.best_validation_accuracy, run.test_accuracy
    );
    println!("epoch losses {:?}", run.epoch_losses);

    let best = narrator.best.expect("on_finish runs once");
    let path = std::env::temp_dir().join("cloze-rank-best.mdl");
    let meta = CheckpointMeta {
        run_index: 0,
        update_count: run.best_checkpoint_id as u64,
    };
    save_checkpoint(&path, &best, meta)?;
    let (reloaded, meta) = load_checkpoint(&path)?;
    let table = data.sentences.as_ref().expect("synthetic data has a sentence table");
    println!(
        "reloaded {} (update {}): test accuracy {:.4}",
        path.display(),
        meta.update_count,
        accuracy(&reloaded, &data.test, table)?
    );
    Ok(())
}
