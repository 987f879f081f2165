//! Scoring a cloze item by hand: assemble each ending's input, read off
//! `P(right)`, pick the larger, and check that swapping the endings swaps
//! the prediction.
//!
//! ```text
//! cargo run --example forced_choice
//! ```

use cloze_rank::corpus::{generate_synthetic, SynthConfig, SynthRegime};
use cloze_rank::models::{accuracy, choose, predict_ending, EmbeddingSource, ModelSpec, ModelVariant, StoryClozeModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> cloze_rank::Result<()> {
    let data = generate_synthetic(&SynthConfig::new(SynthRegime::Context, 10, 20, 20, 16, 1))?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for variant in [ModelVariant::Nc, ModelVariant::Ls, ModelVariant::Fc] {
        let spec = ModelSpec::with_dims(variant, EmbeddingSource::Precomputed, 16, vec![8], 0);
        let model = StoryClozeModel::<f32>::new(spec, &mut rng)?;
        let item = &data.val[0];
        let scores = model.ending_scores(item, &data.table)?;
        let swapped = item.swapped();
        let pick = choose(scores);
        println!(
            "{:?}: P(right) = [{:.4}, {:.4}] -> ending {} (gold {:?}); swapped -> {}; untrained accuracy {:.2}",
            variant,
            scores[0],
            scores[1],
            pick + 1,
            item.gold_index.map(|g| g + 1),
            predict_ending(&model, &swapped, &data.table)? + 1,
            accuracy(&model, &data.test, &data.table)?
        );
    }
    Ok(())
}
