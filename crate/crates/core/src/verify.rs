//! Finite-difference verification of every hand-written backward pass.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::models::{EmbeddingSource, ExampleInput, ModelSpec, ModelVariant, OwnedSentence, StoryClozeModel};
use crate::nn::gradcheck::grad_check_sampled;
use crate::nn::{dot, Differentiable, GradCheckReport, GradientSet, Mlp, Parameterized};
use crate::seq::{BiLstm, Gru};

pub const GRADCHECK_EPS: f64 = 1e-5;
pub const GRADCHECK_TOL: f64 = 1e-4;

/// Parts of the network the suite checks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Component {
    /// Classifier with hidden widths `[256, 64]`.
    MlpSmall,
    /// Classifier with hidden widths `[2400, 1200, 600]`.
    MlpLarge,
    Gru,
    Bilstm,
    /// End-to-end FC model (GRU + classifier).
    ModelFc,
    /// End-to-end LS model over word vectors (BiLSTM + classifier).
    ModelLsWords,
}

impl Component {
    pub const ALL: [Component; 6] = [
        Component::MlpSmall,
        Component::MlpLarge,
        Component::Gru,
        Component::Bilstm,
        Component::ModelFc,
        Component::ModelLsWords,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Component::MlpSmall => "mlp[256,64]",
            Component::MlpLarge => "mlp[2400,1200,600]",
            Component::Gru => "gru",
            Component::Bilstm => "bilstm",
            Component::ModelFc => "model-fc",
            Component::ModelLsWords => "model-ls-words",
        }
    }
}

impl fmt::Display for Component {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Wraps a model and negates its analytic gradient, to show the checker
/// catches a broken backward pass.
pub struct SignFlipped<M>(pub M);

impl<M: Parameterized<f64>> Parameterized<f64> for SignFlipped<M> {
    fn tensors(&self) -> Vec<&[f64]> {
        self.0.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.0.tensors_mut()
    }
}

impl<M: Differentiable> Differentiable for SignFlipped<M> {
    type Input = M::Input;

    fn loss(&self, input: &M::Input, label: usize) -> Result<f64> {
        self.0.loss(input, label)
    }

    fn gradient(&self, input: &M::Input, label: usize) -> Result<GradientSet<f64>> {
        let mut g = self.0.gradient(input, label)?;
        g.scale(-1.0);
        Ok(g)
    }

    fn kink_pattern(&self, input: &M::Input) -> Result<Vec<bool>> {
        self.0.kink_pattern(input)
    }
}

/// A GRU under the scalar loss `head · encode(seq)`.
pub struct GruProbe {
    pub gru: Gru<f64>,
    pub head: Vec<f64>,
}

impl Parameterized<f64> for GruProbe {
    fn tensors(&self) -> Vec<&[f64]> {
        self.gru.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.gru.tensors_mut()
    }
}

impl Differentiable for GruProbe {
    type Input = [Vec<f64>];

    fn loss(&self, seq: &[Vec<f64>], _label: usize) -> Result<f64> {
        let refs: Vec<&[f64]> = seq.iter().map(|v| v.as_slice()).collect();
        Ok(dot(&self.head, &self.gru.encode(&refs)?.0))
    }

    fn gradient(&self, seq: &[Vec<f64>], _label: usize) -> Result<GradientSet<f64>> {
        let refs: Vec<&[f64]> = seq.iter().map(|v| v.as_slice()).collect();
        let (_, cache) = self.gru.encode(&refs)?;
        Ok(self.gru.backward(&cache, &self.head)?.0)
    }
}

/// A BiLSTM under the scalar loss `head · encode(words)`.
pub struct BiLstmProbe {
    pub bilstm: BiLstm<f64>,
    pub head: Vec<f64>,
}

impl Parameterized<f64> for BiLstmProbe {
    fn tensors(&self) -> Vec<&[f64]> {
        self.bilstm.tensors()
    }

    fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
        self.bilstm.tensors_mut()
    }
}

impl Differentiable for BiLstmProbe {
    type Input = [Vec<f64>];

    fn loss(&self, words: &[Vec<f64>], _label: usize) -> Result<f64> {
        let refs: Vec<&[f64]> = words.iter().map(|v| v.as_slice()).collect();
        Ok(dot(&self.head, &self.bilstm.encode(&refs)?.0))
    }

    fn gradient(&self, words: &[Vec<f64>], _label: usize) -> Result<GradientSet<f64>> {
        let refs: Vec<&[f64]> = words.iter().map(|v| v.as_slice()).collect();
        let (_, cache) = self.bilstm.encode(&refs)?;
        Ok(self.bilstm.backward(&cache, &self.head)?.0)
    }
}

fn normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

/// Model-level inputs are kept small so the classifier starts away from
/// saturation, where gradients shrink to the size of round-off in the loss.
fn model_input<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<f64> {
    normal_vec(n, rng).into_iter().map(|v| 0.5 * v).collect()
}

fn normal_seq<R: Rng + ?Sized>(len: usize, dim: usize, rng: &mut R) -> Vec<Vec<f64>> {
    (0..len).map(|_| normal_vec(dim, rng)).collect()
}

/// Zero-initialized biases put ReLUs fed by a dead layer exactly on their
/// kink, where the loss is not differentiable. Jitter every tensor by a tenth
/// of its own scale (0.01 for all-zero tensors) so the check runs at a
/// generic point.
fn jitter<M: Parameterized<f64>, R: Rng + ?Sized>(model: &mut M, rng: &mut R) {
    for t in model.tensors_mut() {
        let rms = (t.iter().map(|v| v * v).sum::<f64>() / t.len().max(1) as f64).sqrt();
        let scale = if rms > 0.0 { 0.1 * rms } else { 0.01 };
        for v in t.iter_mut() {
            *v += scale * rng.sample::<f64, _>(StandardNormal);
        }
    }
}

/// Checks against the label the model currently gets wrong, which keeps
/// the output error at least 1/2 and the gradients well above round-off.
fn check<M: Differentiable>(
    mut model: M,
    input: &M::Input,
    per_tensor: usize,
    corrupt: bool,
    rng: &mut ChaCha8Rng,
) -> Result<GradCheckReport> {
    jitter(&mut model, rng);
    let label = if model.loss(input, 0)? >= model.loss(input, 1)? { 0 } else { 1 };
    if corrupt {
        grad_check_sampled(&mut SignFlipped(model), input, label, GRADCHECK_EPS, per_tensor)
    } else {
        grad_check_sampled(&mut model, input, label, GRADCHECK_EPS, per_tensor)
    }
}

/// Toy input width used for the wide classifier shapes.
pub const TOY_INPUT_DIM: usize = 6;

/// One component checked at one seed. Recurrent toys have dimension ≤ 6.
pub fn check_component(component: Component, seed: u64, corrupt: bool) -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match component {
        Component::MlpSmall | Component::MlpLarge => {
            let widths: &[usize] = if component == Component::MlpSmall {
                &[256, 64]
            } else {
                &[2400, 1200, 600]
            };
            let mlp = Mlp::<f64>::new(TOY_INPUT_DIM, widths, &mut rng);
            let x = normal_vec(TOY_INPUT_DIM, &mut rng);
            let per_tensor = if component == Component::MlpSmall { usize::MAX } else { 24 };
            check(mlp, &x, per_tensor, corrupt, &mut rng)
        }
        Component::Gru => {
            let (input, hidden) = (4, 5);
            let gru = Gru::<f64>::new(input, hidden, &mut rng);
            let head = normal_vec(hidden, &mut rng);
            let seq = normal_seq(4, input, &mut rng);
            check(GruProbe { gru, head }, &seq, usize::MAX, corrupt, &mut rng)
        }
        Component::Bilstm => {
            let (word, hidden) = (3, 3);
            let bilstm = BiLstm::<f64>::new(word, hidden, &mut rng);
            let head = normal_vec(2 * hidden, &mut rng);
            let len = rng.random_range(1..=5);
            let words = normal_seq(len, word, &mut rng);
            check(BiLstmProbe { bilstm, head }, &words, usize::MAX, corrupt, &mut rng)
        }
        Component::ModelFc => {
            let dim = 5;
            let spec = ModelSpec::with_dims(ModelVariant::Fc, EmbeddingSource::Precomputed, dim, vec![4, 3], 0);
            let model = StoryClozeModel::<f64>::new(spec, &mut rng)?;
            let input = ExampleInput {
                prompt: std::array::from_fn(|_| OwnedSentence::Vector(model_input(dim, &mut rng))),
                ending: OwnedSentence::Vector(model_input(dim, &mut rng)),
            };
            check(model, &input, usize::MAX, corrupt, &mut rng)
        }
        Component::ModelLsWords => {
            let (dim, word) = (6, 3);
            let spec = ModelSpec::with_dims(ModelVariant::Ls, EmbeddingSource::Words, dim, vec![4], word);
            let model = StoryClozeModel::<f64>::new(spec, &mut rng)?;
            let sentence = |rng: &mut ChaCha8Rng| {
                let len = rng.random_range(1..=4);
                OwnedSentence::Words((0..len).map(|_| model_input(word, rng)).collect())
            };
            let input = ExampleInput {
                prompt: std::array::from_fn(|_| sentence(&mut rng)),
                ending: sentence(&mut rng),
            };
            check(model, &input, usize::MAX, corrupt, &mut rng)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComponentResult {
    pub component: Component,
    pub seeds: usize,
    /// Worst relative error over all seeds.
    pub max_rel_error: f64,
    pub checked: usize,
    /// Entries whose stencil straddled a ReLU kink.
    pub skipped: usize,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckSummary {
    pub seed: u64,
    pub results: Vec<ComponentResult>,
}

impl GradCheckSummary {
    pub fn all_passed(&self) -> bool {
        self.results.iter().all(|r| r.passed)
    }

    pub fn failing(&self) -> Vec<Component> {
        self.results.iter().filter(|r| !r.passed).map(|r| r.component).collect()
    }
}

impl fmt::Display for GradCheckSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in &self.results {
            writeln!(
                f,
                "{:<20} seeds={:<3} checked={:<6} skipped={:<3} max_rel_error={:.3e} {}",
                r.component.name(),
                r.seeds,
                r.checked,
                r.skipped,
                r.max_rel_error,
                if r.passed { "ok" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}

/// Checks every component over seeds `seed..seed + seeds`. `corrupt` negates
/// the backward pass of one component.
pub fn run_gradcheck_suite(seed: u64, seeds: usize, corrupt: Option<Component>) -> Result<GradCheckSummary> {
    let mut results = Vec::new();
    for component in Component::ALL {
        let mut worst: f64 = 0.0;
        let mut checked = 0;
        let mut skipped = 0;
        for s in 0..seeds as u64 {
            let r = check_component(component, seed.wrapping_add(s), corrupt == Some(component))?;
            worst = worst.max(r.max_rel_error);
            checked += r.checked;
            skipped += r.skipped;
        }
        results.push(ComponentResult {
            component,
            seeds,
            max_rel_error: worst,
            checked,
            skipped,
            passed: seeds > 0 && worst < GRADCHECK_TOL,
        });
    }
    Ok(GradCheckSummary { seed, results })
}
