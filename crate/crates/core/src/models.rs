//! The three input assemblies (ending only, last sentence + ending, encoded
//! prompt + ending) on top of a shared feed-forward classifier, and
//! forced-choice inference over two candidate endings.

use std::fmt;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{ClozeItem, SentenceInput, SentenceLookup};
use crate::error::{check_dim, Error, Result};
use crate::nn::{
    cross_entropy, axpy, Differentiable, GradientSet, Mlp, MlpCache, Parameterized, Scalar, RIGHT,
};
use crate::seq::{BiLstm, BiLstmCache, Gru, GruCache};

/// Skip-thought vectors are 4800-dimensional.
pub const SENTENCE_DIM: usize = 4800;
/// Word-vector dimension assumed for the learned-encoder variant.
pub const DEFAULT_WORD_DIM: usize = 300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModelVariant {
    /// Ending only.
    Nc,
    /// Fourth prompt sentence plus ending.
    Ls,
    /// GRU-encoded prompt plus ending.
    Fc,
}

impl ModelVariant {
    pub fn code(self) -> u8 {
        match self {
            ModelVariant::Nc => 0,
            ModelVariant::Ls => 1,
            ModelVariant::Fc => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(ModelVariant::Nc),
            1 => Some(ModelVariant::Ls),
            2 => Some(ModelVariant::Fc),
            _ => None,
        }
    }
}

impl fmt::Display for ModelVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelVariant::Nc => "NC",
            ModelVariant::Ls => "LS",
            ModelVariant::Fc => "FC",
        })
    }
}

/// Where sentence vectors come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum EmbeddingSource {
    /// Precomputed sentence vectors (`skip` on the command line).
    #[value(name = "skip")]
    #[serde(rename = "skip")]
    Precomputed,
    /// A bidirectional LSTM over word vectors, trained jointly.
    Words,
}

impl EmbeddingSource {
    pub fn code(self) -> u8 {
        match self {
            EmbeddingSource::Precomputed => 0,
            EmbeddingSource::Words => 1,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(EmbeddingSource::Precomputed),
            1 => Some(EmbeddingSource::Words),
            _ => None,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            EmbeddingSource::Precomputed => "skip",
            EmbeddingSource::Words => "words",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub variant: ModelVariant,
    pub embedding_source: EmbeddingSource,
    /// Sentence-vector dimension, which is also the classifier input width.
    pub input_dim: usize,
    pub hidden_widths: Vec<usize>,
    /// Output dimension of the GRU and/or BiLSTM; must equal `input_dim`.
    pub encoder_dim: Option<usize>,
    pub word_dim: Option<usize>,
}

impl ModelSpec {
    /// Published layer sizes: NC and FC use `[256, 64]`, LS uses
    /// `[2400, 1200, 600]`; encoders are 4800-dimensional.
    pub fn published(variant: ModelVariant, source: EmbeddingSource) -> Self {
        let hidden_widths = match variant {
            ModelVariant::Nc | ModelVariant::Fc => vec![256, 64],
            ModelVariant::Ls => vec![2400, 1200, 600],
        };
        Self::with_dims(variant, source, SENTENCE_DIM, hidden_widths, DEFAULT_WORD_DIM)
    }

    /// A spec at arbitrary sizes, filling encoder fields as the variant requires.
    pub fn with_dims(
        variant: ModelVariant,
        source: EmbeddingSource,
        input_dim: usize,
        hidden_widths: Vec<usize>,
        word_dim: usize,
    ) -> Self {
        let needs_encoder = variant == ModelVariant::Fc || source == EmbeddingSource::Words;
        ModelSpec {
            variant,
            embedding_source: source,
            input_dim,
            hidden_widths,
            encoder_dim: needs_encoder.then_some(input_dim),
            word_dim: (source == EmbeddingSource::Words).then_some(word_dim),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::config("input dimension must be positive"));
        }
        if self.hidden_widths.contains(&0) {
            return Err(Error::config("hidden widths must be positive"));
        }
        let needs_encoder =
            self.variant == ModelVariant::Fc || self.embedding_source == EmbeddingSource::Words;
        match (needs_encoder, self.encoder_dim) {
            (true, None) => {
                return Err(Error::config(format!(
                    "{} with {} embeddings requires an encoder dimension",
                    self.variant,
                    self.embedding_source.short_name()
                )))
            }
            (false, Some(_)) => {
                return Err(Error::config(format!(
                    "{} with precomputed embeddings takes no encoder",
                    self.variant
                )))
            }
            (true, Some(d)) if d != self.input_dim => {
                return Err(Error::config(format!(
                    "encoder dimension {d} must equal the classifier input dimension {}",
                    self.input_dim
                )))
            }
            _ => {}
        }
        match (self.embedding_source, self.word_dim) {
            (EmbeddingSource::Words, None) | (EmbeddingSource::Words, Some(0)) => {
                return Err(Error::config("word embeddings require a positive word dimension"))
            }
            (EmbeddingSource::Precomputed, Some(_)) => {
                return Err(Error::config("precomputed embeddings take no word dimension"))
            }
            _ => {}
        }
        if self.embedding_source == EmbeddingSource::Words && !self.input_dim.is_multiple_of(2) {
            return Err(Error::config("BiLSTM output dimension must be even"));
        }
        Ok(())
    }

    /// `<regime>-<VARIANT>-<source>`, e.g. `val-LS-skip`.
    pub fn name(&self, regime: &str) -> String {
        format!("{regime}-{}-{}", self.variant, self.embedding_source.short_name())
    }
}

/// Owned version of [`SentenceInput`], for building inputs by hand.
#[derive(Debug, Clone, PartialEq)]
pub enum OwnedSentence<T> {
    Vector(Vec<T>),
    Words(Vec<Vec<T>>),
}

impl<T> OwnedSentence<T> {
    pub fn as_input(&self) -> SentenceInput<'_, T> {
        match self {
            OwnedSentence::Vector(v) => SentenceInput::Vector(v),
            OwnedSentence::Words(ws) => SentenceInput::Words(ws.iter().map(|w| w.as_slice()).collect()),
        }
    }
}

/// A prompt/ending pair with owned vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct ExampleInput<T> {
    pub prompt: [OwnedSentence<T>; 4],
    pub ending: OwnedSentence<T>,
}

impl<T> ExampleInput<T> {
    pub fn prompt_inputs(&self) -> [SentenceInput<'_, T>; 4] {
        std::array::from_fn(|k| self.prompt[k].as_input())
    }
}

#[derive(Debug, Clone)]
pub struct AssemblyCache<T> {
    /// BiLSTM caches keyed by slot (0..4 prompt, 4 ending).
    sentence: Vec<(usize, BiLstmCache<T>)>,
    gru: Option<GruCache<T>>,
}

#[derive(Debug, Clone)]
pub struct ModelCache<T> {
    assembly: AssemblyCache<T>,
    mlp: MlpCache<T>,
}

impl<T> ModelCache<T> {
    pub fn probs(&self) -> [T; 2]
    where
        T: Copy,
    {
        self.mlp.probs
    }
}

const ENDING_SLOT: usize = 4;

/// A classifier plus whatever encoders its spec calls for.
#[derive(Debug, Clone, PartialEq)]
pub struct StoryClozeModel<T> {
    spec: ModelSpec,
    pub classifier: Mlp<T>,
    pub gru: Option<Gru<T>>,
    pub bilstm: Option<BiLstm<T>>,
}

impl<T: Scalar> StoryClozeModel<T> {
    pub fn new<R: Rng + ?Sized>(spec: ModelSpec, rng: &mut R) -> Result<Self> {
        spec.validate()?;
        let classifier = Mlp::new(spec.input_dim, &spec.hidden_widths, rng);
        let gru = (spec.variant == ModelVariant::Fc).then(|| Gru::new(spec.input_dim, spec.input_dim, rng));
        let bilstm = match (spec.embedding_source, spec.word_dim) {
            (EmbeddingSource::Words, Some(wd)) => Some(BiLstm::new(wd, spec.input_dim / 2, rng)),
            _ => None,
        };
        Ok(StoryClozeModel {
            spec,
            classifier,
            gru,
            bilstm,
        })
    }

    /// All parameters zero.
    pub fn zeros(spec: ModelSpec) -> Result<Self> {
        spec.validate()?;
        let classifier = Mlp::zeros(spec.input_dim, &spec.hidden_widths);
        let gru = (spec.variant == ModelVariant::Fc).then(|| Gru::zeros(spec.input_dim, spec.input_dim));
        let bilstm = match (spec.embedding_source, spec.word_dim) {
            (EmbeddingSource::Words, Some(wd)) => Some(BiLstm::tied(crate::seq::Lstm::zeros(wd, spec.input_dim / 2))),
            _ => None,
        };
        Ok(StoryClozeModel {
            spec,
            classifier,
            gru,
            bilstm,
        })
    }

    /// Assembles a model from parts, checking them against `spec`.
    pub fn from_parts(spec: ModelSpec, classifier: Mlp<T>, gru: Option<Gru<T>>, bilstm: Option<BiLstm<T>>) -> Result<Self> {
        spec.validate()?;
        check_dim("classifier input", spec.input_dim, classifier.input_dim())?;
        if classifier.hidden_widths() != spec.hidden_widths {
            return Err(Error::config("classifier widths differ from spec"));
        }
        if gru.is_some() != (spec.variant == ModelVariant::Fc) {
            return Err(Error::config("GRU presence must match the FC variant"));
        }
        if let Some(g) = &gru {
            check_dim("gru input", spec.input_dim, g.input_dim())?;
            check_dim("gru hidden", spec.input_dim, g.hidden_dim())?;
        }
        if bilstm.is_some() != (spec.embedding_source == EmbeddingSource::Words) {
            return Err(Error::config("BiLSTM presence must match the embedding source"));
        }
        if let Some(b) = &bilstm {
            check_dim("bilstm output", spec.input_dim, b.output_dim())?;
            check_dim("bilstm word dim", spec.word_dim.unwrap_or(0), b.word_dim())?;
        }
        Ok(StoryClozeModel {
            spec,
            classifier,
            gru,
            bilstm,
        })
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    /// Number of leading tensors that belong to the classifier.
    pub fn classifier_tensor_count(&self) -> usize {
        2 * (self.spec.hidden_widths.len() + 1)
    }

    fn encode_sentence(&self, input: &SentenceInput<'_, T>) -> Result<(Vec<T>, Option<BiLstmCache<T>>)> {
        match (input, &self.bilstm) {
            (SentenceInput::Vector(v), None) => {
                check_dim("sentence vector", self.spec.input_dim, v.len())?;
                Ok((v.to_vec(), None))
            }
            (SentenceInput::Words(ws), Some(b)) => {
                let (v, c) = b.encode(ws)?;
                Ok((v, Some(c)))
            }
            (SentenceInput::Vector(_), Some(_)) => Err(Error::config("model expects word sequences, got a sentence vector")),
            (SentenceInput::Words(_), None) => Err(Error::config("model expects sentence vectors, got word sequences")),
        }
    }

    /// Builds the classifier input: ending (NC), fourth sentence + ending
    /// (LS), or GRU(prompt) + ending (FC).
    pub fn assemble_input(
        &self,
        prompt: &[SentenceInput<'_, T>; 4],
        ending: &SentenceInput<'_, T>,
    ) -> Result<(Vec<T>, AssemblyCache<T>)> {
        let mut cache = AssemblyCache {
            sentence: Vec::new(),
            gru: None,
        };
        let (mut x, ending_cache) = self.encode_sentence(ending)?;
        if let Some(c) = ending_cache {
            cache.sentence.push((ENDING_SLOT, c));
        }
        match self.spec.variant {
            ModelVariant::Nc => {}
            ModelVariant::Ls => {
                let (last, c) = self.encode_sentence(&prompt[3])?;
                if let Some(c) = c {
                    cache.sentence.push((3, c));
                }
                axpy(T::one(), &last, &mut x);
            }
            ModelVariant::Fc => {
                let gru = self.gru.as_ref().ok_or_else(|| Error::config("FC model without a GRU encoder"))?;
                let mut encoded = Vec::with_capacity(4);
                for (slot, p) in prompt.iter().enumerate() {
                    let (v, c) = self.encode_sentence(p)?;
                    if let Some(c) = c {
                        cache.sentence.push((slot, c));
                    }
                    encoded.push(v);
                }
                let seq: Vec<&[T]> = encoded.iter().map(|v| v.as_slice()).collect();
                let (context, gc) = gru.encode(&seq)?;
                cache.gru = Some(gc);
                axpy(T::one(), &context, &mut x);
            }
        }
        Ok((x, cache))
    }

    /// `P(right)` for an already assembled input.
    pub fn score_ending(&self, assembled: &[T]) -> Result<T> {
        Ok(self.classifier.forward(assembled)?.0[RIGHT])
    }

    pub fn forward(
        &self,
        prompt: &[SentenceInput<'_, T>; 4],
        ending: &SentenceInput<'_, T>,
    ) -> Result<([T; 2], ModelCache<T>)> {
        let (x, assembly) = self.assemble_input(prompt, ending)?;
        let (probs, mlp) = self.classifier.forward(&x)?;
        Ok((probs, ModelCache { assembly, mlp }))
    }

    /// Adds `scale · ∂CE/∂θ` into `grads`, routing the classifier input
    /// gradient through whichever encoders produced it.
    pub fn accumulate_backward(
        &self,
        cache: &ModelCache<T>,
        label: usize,
        grads: &mut GradientSet<T>,
        scale: T,
    ) -> Result<()> {
        let n_cls = self.classifier_tensor_count();
        let slices = grads.as_mut_slices();
        if slices.len() != self.tensors().len() {
            return Err(Error::StaleCache);
        }
        let (g_cls, rest) = slices.split_at_mut(n_cls);
        let dx = self.classifier.accumulate_backward(&cache.mlp, label, g_cls, scale)?;
        let (g_gru, g_bi) = rest.split_at_mut(if self.gru.is_some() { 9 } else { 0 });

        // gradient arriving at each encoded sentence slot
        let mut slot_grads: Vec<(usize, Vec<T>)> = vec![(ENDING_SLOT, dx.clone())];
        match self.spec.variant {
            ModelVariant::Nc => {}
            ModelVariant::Ls => slot_grads.push((3, dx.clone())),
            ModelVariant::Fc => {
                let gru = self.gru.as_ref().ok_or(Error::StaleCache)?;
                let gc = cache.assembly.gru.as_ref().ok_or(Error::StaleCache)?;
                let dseq = gru.accumulate_backward(gc, &dx, g_gru)?;
                slot_grads.extend(dseq.into_iter().enumerate());
            }
        }
        if let Some(bilstm) = &self.bilstm {
            for (slot, g) in slot_grads {
                let (_, c) = cache
                    .assembly
                    .sentence
                    .iter()
                    .find(|(s, _)| *s == slot)
                    .ok_or(Error::StaleCache)?;
                bilstm.accumulate_backward(c, &g, g_bi)?;
            }
        }
        Ok(())
    }

    pub fn backward(&self, cache: &ModelCache<T>, label: usize) -> Result<GradientSet<T>> {
        let mut g = GradientSet::zeros_like(self);
        self.accumulate_backward(cache, label, &mut g, T::one())?;
        Ok(g)
    }

    pub fn cast<U: Scalar>(&self) -> StoryClozeModel<U> {
        StoryClozeModel {
            spec: self.spec.clone(),
            classifier: self.classifier.cast(),
            gru: self.gru.as_ref().map(Gru::cast),
            bilstm: self.bilstm.as_ref().map(BiLstm::cast),
        }
    }
}

impl<T: Scalar> Parameterized<T> for StoryClozeModel<T> {
    fn tensors(&self) -> Vec<&[T]> {
        let mut t = self.classifier.tensors();
        if let Some(g) = &self.gru {
            t.extend(g.tensors());
        }
        if let Some(b) = &self.bilstm {
            t.extend(b.tensors());
        }
        t
    }

    fn tensors_mut(&mut self) -> Vec<&mut [T]> {
        let mut t = self.classifier.tensors_mut();
        if let Some(g) = &mut self.gru {
            t.extend(g.tensors_mut());
        }
        if let Some(b) = &mut self.bilstm {
            t.extend(b.tensors_mut());
        }
        t
    }
}

impl Differentiable for StoryClozeModel<f64> {
    type Input = ExampleInput<f64>;

    fn loss(&self, input: &ExampleInput<f64>, label: usize) -> Result<f64> {
        let (p, _) = self.forward(&input.prompt_inputs(), &input.ending.as_input())?;
        Ok(cross_entropy(p, label))
    }

    fn gradient(&self, input: &ExampleInput<f64>, label: usize) -> Result<GradientSet<f64>> {
        let (_, cache) = self.forward(&input.prompt_inputs(), &input.ending.as_input())?;
        self.backward(&cache, label)
    }

    fn kink_pattern(&self, input: &ExampleInput<f64>) -> Result<Vec<bool>> {
        let (_, cache) = self.forward(&input.prompt_inputs(), &input.ending.as_input())?;
        Ok(cache.mlp.relu_pattern())
    }
}

fn resolve<'a, L: SentenceLookup + ?Sized>(lookup: &'a L, key: &str) -> Result<SentenceInput<'a, f32>> {
    lookup
        .resolve(key)
        .ok_or_else(|| Error::MissingEmbedding(key.to_string()))
}

impl StoryClozeModel<f32> {
    /// Forward pass for a prompt/ending given by sentence keys. Prompt
    /// sentences the variant ignores are not resolved.
    pub fn forward_by_key<L: SentenceLookup + ?Sized>(
        &self,
        prompt_keys: [&str; 4],
        ending_key: &str,
        lookup: &L,
    ) -> Result<([f32; 2], ModelCache<f32>)> {
        let unused = || SentenceInput::Vector(&[][..]);
        let prompt: [SentenceInput<'_, f32>; 4] = match self.spec.variant {
            ModelVariant::Nc => std::array::from_fn(|_| unused()),
            ModelVariant::Ls => [unused(), unused(), unused(), resolve(lookup, prompt_keys[3])?],
            ModelVariant::Fc => [
                resolve(lookup, prompt_keys[0])?,
                resolve(lookup, prompt_keys[1])?,
                resolve(lookup, prompt_keys[2])?,
                resolve(lookup, prompt_keys[3])?,
            ],
        };
        let ending = resolve(lookup, ending_key)?;
        self.forward(&prompt, &ending)
    }

    pub fn probs_by_key<L: SentenceLookup + ?Sized>(
        &self,
        prompt_keys: [&str; 4],
        ending_key: &str,
        lookup: &L,
    ) -> Result<[f32; 2]> {
        Ok(self.forward_by_key(prompt_keys, ending_key, lookup)?.0)
    }

    /// `P(right)` for both candidate endings of `item`.
    pub fn ending_scores<L: SentenceLookup + ?Sized>(&self, item: &ClozeItem, lookup: &L) -> Result<[f32; 2]> {
        let prompt: [&str; 4] = std::array::from_fn(|k| item.prompt[k].key.as_str());
        let s0 = self.probs_by_key(prompt, &item.endings[0].key, lookup)?[RIGHT];
        let s1 = self.probs_by_key(prompt, &item.endings[1].key, lookup)?[RIGHT];
        Ok([s0, s1])
    }
}

/// Index of the ending with the higher `P(right)`; exact ties pick 0.
pub fn choose(scores: [f32; 2]) -> usize {
    usize::from(scores[1] > scores[0])
}

pub fn predict_ending<L: SentenceLookup + ?Sized>(
    model: &StoryClozeModel<f32>,
    item: &ClozeItem,
    lookup: &L,
) -> Result<usize> {
    Ok(choose(model.ending_scores(item, lookup)?))
}

/// Fraction of labeled items whose predicted ending is the gold one.
pub fn accuracy<L: SentenceLookup + ?Sized>(
    model: &StoryClozeModel<f32>,
    items: &[ClozeItem],
    lookup: &L,
) -> Result<f64> {
    if items.is_empty() {
        return Err(Error::config("accuracy over an empty item set"));
    }
    let correct: Result<Vec<bool>> = items
        .par_iter()
        .map(|it| {
            let gold = it
                .gold_index
                .ok_or_else(|| Error::UnlabeledItem(it.item_id.clone()))?;
            Ok(predict_ending(model, it, lookup)? == gold)
        })
        .collect();
    let correct = correct?.into_iter().filter(|&c| c).count();
    Ok(correct as f64 / items.len() as f64)
}
