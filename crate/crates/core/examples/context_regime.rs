//! Context regime: both endings look alike and only their relation to the
//! fourth sentence tells them apart. NC stays at chance, LS and FC do not.
//!
//! ```text
//! cargo run --release --example context_regime
//! ```

use cloze_rank::corpus::{generate_synthetic, SynthConfig, SynthRegime};
use cloze_rank::models::{EmbeddingSource, ModelSpec, ModelVariant};
use cloze_rank::training::{run_experiment, DataBundle, TrainConfig, TrainSource};

fn main() -> cloze_rank::Result<()> {
    let data: DataBundle = generate_synthetic(&SynthConfig::new(SynthRegime::Context, 2000, 500, 500, 64, 0))?.into();
    let config = TrainConfig {
        runs: 3,
        ..TrainConfig::new(TrainSource::Train)
    };
    let models = [
        (ModelVariant::Nc, vec![256, 64]),
        (ModelVariant::Ls, vec![256, 128, 64]),
        (ModelVariant::Fc, vec![256, 64]),
    ];
    for (variant, widths) in models {
        let spec = ModelSpec::with_dims(variant, EmbeddingSource::Precomputed, 64, widths, 0);
        let t = std::time::Instant::now();
        let report = run_experiment(&spec, &config, &data)?;
        println!(
            "{:<14} mean selection {:.4}  mean test {:.4}  ({:.1}s)",
            report.model,
            report.mean_validation_accuracy,
            report.mean_test_accuracy,
            t.elapsed().as_secs_f64()
        );
    }
    Ok(())
}
