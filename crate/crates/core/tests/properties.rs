//! Randomized invariants of the numeric core and the forced-choice rule.

use cloze_rank::corpus::{ClozeItem, EmbeddingTable, SentenceInput};
use cloze_rank::models::{accuracy, choose, predict_ending, EmbeddingSource, ModelSpec, ModelVariant, StoryClozeModel};
use cloze_rank::nn::{relu, sgd_step, softmax, GradientSet, Mlp, SgdConfig};
use cloze_rank::seq::Gru;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn finite() -> impl Strategy<Value = f64> {
    -1e3f64..1e3
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn softmax_normalizes(a in finite(), b in finite(), c in -50f64..50.0) {
        let p = softmax([a, b]);
        prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
        let q = softmax([a + c, b + c]);
        prop_assert!((p[0] - q[0]).abs() <= 1e-12);
        let pf = softmax([a as f32, b as f32]);
        prop_assert!((pf[0] + pf[1] - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn relu_is_idempotent_and_nonnegative(x in prop::collection::vec(finite(), 0..20)) {
        let once = relu(&x);
        prop_assert!(once.iter().all(|&v| v >= 0.0));
        prop_assert_eq!(relu(&once), once);
    }

    #[test]
    fn forward_is_pure(seed in any::<u64>(), x in prop::collection::vec(-3f32..3.0, 6)) {
        let mlp = Mlp::<f32>::new(6, &[5, 3], &mut ChaCha8Rng::seed_from_u64(seed));
        let (a, _) = mlp.forward(&x).unwrap();
        let (b, _) = mlp.forward(&x).unwrap();
        prop_assert_eq!(a[0].to_bits(), b[0].to_bits());
        prop_assert_eq!(a[1].to_bits(), b[1].to_bits());
    }

    #[test]
    fn zero_learning_rate_is_the_identity(seed in any::<u64>(), x in prop::collection::vec(-3f32..3.0, 4)) {
        let mut mlp = Mlp::<f32>::new(4, &[3], &mut ChaCha8Rng::seed_from_u64(seed));
        let before = mlp.clone();
        let (_, cache) = mlp.forward(&x).unwrap();
        let grads = mlp.backward(&cache, 1).unwrap();
        // the constructor rejects lr = 0, the step itself accepts it
        sgd_step(&mut mlp, &grads, &SgdConfig { learning_rate: 0.0 }).unwrap();
        prop_assert_eq!(&mlp, &before);
        sgd_step(&mut mlp, &GradientSet::zeros_like(&before), &SgdConfig::default()).unwrap();
        prop_assert_eq!(&mlp, &before);
    }

    #[test]
    fn gru_state_stays_in_the_open_unit_interval(seed in any::<u64>(), len in 1usize..12, scale in 0.1f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let gru = Gru::<f64>::new(3, 4, &mut rng);
        let seq: Vec<Vec<f64>> = (0..len).map(|t| (0..3).map(|k| scale * ((t * 3 + k) as f64).sin()).collect()).collect();
        let refs: Vec<&[f64]> = seq.iter().map(|v| v.as_slice()).collect();
        let (h, _) = gru.encode(&refs).unwrap();
        // tanh rounds to exactly ±1 in f64 once its argument passes ~19
        prop_assert!(h.iter().all(|v| v.abs() <= 1.0));
        if scale < 3.0 {
            prop_assert!(h.iter().all(|v| v.abs() < 1.0));
        }
    }

    #[test]
    fn ls_assembly_is_symmetric(a in prop::collection::vec(-5f64..5.0, 4), b in prop::collection::vec(-5f64..5.0, 4)) {
        let spec = ModelSpec::with_dims(ModelVariant::Ls, EmbeddingSource::Precomputed, 4, vec![3], 0);
        let model = StoryClozeModel::<f64>::zeros(spec).unwrap();
        let filler = [0.0; 4];
        let assemble = |s4: &[f64], end: &[f64]| {
            let prompt = [
                SentenceInput::Vector(&filler[..]),
                SentenceInput::Vector(&filler[..]),
                SentenceInput::Vector(&filler[..]),
                SentenceInput::Vector(s4),
            ];
            model.assemble_input(&prompt, &SentenceInput::Vector(end)).unwrap().0
        };
        prop_assert_eq!(assemble(&a, &b), assemble(&b, &a));
    }

    #[test]
    fn choice_is_invariant_under_monotone_maps(s0 in 0f32..1.0, s1 in 0f32..1.0) {
        let c = choose([s0, s1]);
        prop_assert_eq!(choose([s0.exp(), s1.exp()]), c);
        prop_assert_eq!(choose([2.0 * s0 + 1.0, 2.0 * s1 + 1.0]), c);
        prop_assert_eq!(choose([s0.powi(3), s1.powi(3)]), c);
    }

    #[test]
    fn exactly_one_ordering_is_counted_correct(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let spec = ModelSpec::with_dims(ModelVariant::Ls, EmbeddingSource::Precomputed, 3, vec![4], 0);
        let model = StoryClozeModel::<f32>::new(spec, &mut rng).unwrap();
        let item = ClozeItem::from_texts("x", ["a", "b", "c", "d"], ["e", "f"], Some(0));
        let swapped = item.swapped();
        let mut table = EmbeddingTable::new(3).unwrap();
        for (k, s) in item.prompt.iter().chain(&item.endings).enumerate() {
            let v = [(seed as f32 + k as f32).sin(), (k as f32).cos(), 0.3 * k as f32];
            table.insert(s.key.clone(), &v).unwrap();
        }
        let scores = model.ending_scores(&item, &table).unwrap();
        let a = predict_ending(&model, &item, &table).unwrap();
        let b = predict_ending(&model, &swapped, &table).unwrap();
        if scores[0] != scores[1] {
            prop_assert_eq!(a, 1 - b);
            prop_assert_eq!(
                accuracy(&model, std::slice::from_ref(&item), &table).unwrap(),
                accuracy(&model, &[swapped], &table).unwrap()
            );
        }
        prop_assert_eq!(predict_ending(&model, &item, &table).unwrap(), a);
    }
}
