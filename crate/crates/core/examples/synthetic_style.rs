//! Style regime: right and wrong endings differ along a hidden direction, so
//! an ending-only model (NC) is enough.
//!
//! ```text
//! cargo run --release --example synthetic_style
//! ```

use cloze_rank::corpus::{generate_synthetic, SynthConfig, SynthRegime};
use cloze_rank::models::{EmbeddingSource, ModelSpec, ModelVariant};
use cloze_rank::training::{run_experiment, DataBundle, TrainConfig, TrainSource};

fn main() -> cloze_rank::Result<()> {
    let data: DataBundle = generate_synthetic(&SynthConfig::new(SynthRegime::Style, 2000, 500, 500, 64, 0))?.into();
    // negatives drawn from other stories carry the right style too, so the
    // labeled validation items are the only usable training signal here
    let config = TrainConfig::new(TrainSource::Val);
    for (variant, widths) in [(ModelVariant::Nc, vec![256, 64]), (ModelVariant::Ls, vec![256, 128, 64])] {
        let spec = ModelSpec::with_dims(variant, EmbeddingSource::Precomputed, 64, widths, 0);
        let report = run_experiment(&spec, &config, &data)?;
        for run in &report.runs {
            println!(
                "{} run {}: selection {:.4} test {:.4} (best at update {})",
                report.model, run.run_index, run.best_validation_accuracy, run.test_accuracy, run.best_checkpoint_id
            );
        }
        println!("{} mean test accuracy {:.4}\n", report.model, report.mean_test_accuracy);
    }
    Ok(())
}
