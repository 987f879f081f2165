//! Training protocol: holdout construction, shuffled-epoch SGD, periodic
//! checkpoint evaluation on a model-selection set, best-checkpoint test
//! accuracy and multi-run averaging.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{
    build_examples, ClozeItem, EmbeddingTable, ExampleSource, FiveSentenceStory, LabeledEnding, NegativeSource,
    SentenceLookup, SyntheticBundle, WordEmbeddingTable, WordSequences,
};
use crate::error::{Error, Result};
use crate::models::{accuracy, EmbeddingSource, ModelSpec, StoryClozeModel};
use crate::nn::{cross_entropy, sgd_step, GradientSet, SgdConfig};

/// Which labeled data the classifier is fit on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TrainSource {
    /// Five-sentence training stories with sampled negatives; the whole
    /// validation set selects checkpoints.
    Train,
    /// The validation set minus a holdout, which selects checkpoints.
    Val,
}

impl TrainSource {
    pub fn short_name(self) -> &'static str {
        match self {
            TrainSource::Train => "trn",
            TrainSource::Val => "val",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub train_on: TrainSource,
    pub learning_rate: f64,
    pub holdout_fraction: f64,
    /// Updates between checkpoint evaluations.
    pub checkpoint_interval: u64,
    pub runs: usize,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Stop after this many checkpoints without a new best.
    pub patience: usize,
    pub seed: u64,
    pub neg_source: NegativeSource,
    /// Draw the holdout once from `seed` instead of once per run seed.
    pub fixed_holdout: bool,
    /// Train only the classifier; encoders keep their initial weights.
    pub freeze_encoder: bool,
    /// Runs executed concurrently (1 = sequential).
    pub parallel_runs: usize,
}

impl TrainConfig {
    pub fn new(train_on: TrainSource) -> Self {
        TrainConfig {
            train_on,
            learning_rate: 0.01,
            holdout_fraction: 0.1,
            checkpoint_interval: 3000,
            runs: 5,
            batch_size: 1,
            max_epochs: 30,
            patience: 10,
            seed: 0,
            neg_source: NegativeSource::Fifth,
            fixed_holdout: false,
            freeze_encoder: false,
            parallel_runs: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.learning_rate));
        }
        if !(self.holdout_fraction > 0.0 && self.holdout_fraction < 1.0) {
            return bad(format!("holdout fraction must be in (0, 1), got {}", self.holdout_fraction));
        }
        if self.checkpoint_interval == 0 {
            return bad("checkpoint interval must be at least 1".into());
        }
        if self.runs == 0 {
            return bad("runs must be at least 1".into());
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1".into());
        }
        if self.max_epochs == 0 {
            return bad("max epochs must be at least 1".into());
        }
        if self.patience == 0 {
            return bad("patience must be at least 1".into());
        }
        if self.parallel_runs == 0 {
            return bad("parallel runs must be at least 1".into());
        }
        Ok(())
    }

    pub fn run_seed(&self, run_index: usize) -> u64 {
        self.seed.wrapping_add(run_index as u64)
    }
}

/// Everything a run reads. Shared immutably between runs.
#[derive(Debug, Clone, Default)]
pub struct DataBundle {
    pub train: Vec<FiveSentenceStory>,
    pub val: Vec<ClozeItem>,
    pub test: Vec<ClozeItem>,
    pub sentences: Option<EmbeddingTable>,
    pub words: Option<WordEmbeddingTable>,
}

impl From<SyntheticBundle> for DataBundle {
    fn from(s: SyntheticBundle) -> Self {
        DataBundle {
            train: s.train,
            val: s.val,
            test: s.test,
            sentences: Some(s.table),
            words: None,
        }
    }
}

impl DataBundle {
    /// Sentence resolver for the given embedding source.
    pub fn lookup(&self, source: EmbeddingSource) -> Result<Box<dyn SentenceLookup + '_>> {
        match source {
            EmbeddingSource::Precomputed => match &self.sentences {
                Some(t) => Ok(Box::new(t)),
                None => Err(Error::config("precomputed sentence embeddings are not loaded")),
            },
            EmbeddingSource::Words => {
                let words = self
                    .words
                    .as_ref()
                    .ok_or_else(|| Error::config("word vectors are not loaded"))?;
                let mut seqs = WordSequences::new(words);
                seqs.add_stories(&self.train);
                seqs.add_items(&self.val);
                seqs.add_items(&self.test);
                Ok(Box::new(seqs))
            }
        }
    }
}

fn ceil_share(n: usize, share: f64) -> usize {
    // guard against 0.9 * 10 = 9.000000000000002
    ((n as f64 * share) - 1e-9).ceil().max(0.0) as usize
}

/// Uniformly random partition into `⌈(1 − f)·n⌉` training items and the
/// remaining holdout. Each part keeps the original item order.
pub fn split_holdout(items: &[ClozeItem], fraction: f64, seed: u64) -> Result<(Vec<ClozeItem>, Vec<ClozeItem>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::config(format!("holdout fraction must be in (0, 1), got {fraction}")));
    }
    let n = items.len();
    let n_train = ceil_share(n, 1.0 - fraction);
    if n < 2 || n_train == 0 || n_train >= n {
        return Err(Error::config(format!(
            "holdout fraction {fraction} on {n} items leaves an empty partition"
        )));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut train_idx = order[..n_train].to_vec();
    let mut hold_idx = order[n_train..].to_vec();
    train_idx.sort_unstable();
    hold_idx.sort_unstable();
    Ok((
        train_idx.into_iter().map(|i| items[i].clone()).collect(),
        hold_idx.into_iter().map(|i| items[i].clone()).collect(),
    ))
}

/// Training items and model-selection items for one run.
#[derive(Debug, Clone)]
pub struct RunSplit {
    /// Cloze items trained on (validation-set regime only).
    pub train_items: Vec<ClozeItem>,
    pub selection: Vec<ClozeItem>,
}

pub fn split_for_run(config: &TrainConfig, bundle: &DataBundle, run_index: usize) -> Result<RunSplit> {
    if bundle.val.is_empty() {
        return Err(Error::config("no validation data"));
    }
    match config.train_on {
        TrainSource::Train => Ok(RunSplit {
            train_items: Vec::new(),
            selection: bundle.val.clone(),
        }),
        TrainSource::Val => {
            let seed = if config.fixed_holdout {
                config.seed
            } else {
                config.run_seed(run_index)
            };
            let (train_items, selection) = split_holdout(&bundle.val, config.holdout_fraction, seed)?;
            Ok(RunSplit {
                train_items,
                selection,
            })
        }
    }
}

/// The items checkpoints are selected on: the full validation set when
/// training on stories, the holdout when training on the validation set.
pub fn select_model_selection_set(config: &TrainConfig, bundle: &DataBundle, run_index: usize) -> Result<Vec<ClozeItem>> {
    Ok(split_for_run(config, bundle, run_index)?.selection)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEval {
    /// Updates performed when the checkpoint was taken; doubles as its id.
    pub update: u64,
    pub selection_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub run_index: usize,
    pub best_checkpoint_id: u64,
    pub best_validation_accuracy: f64,
    pub test_accuracy: f64,
    pub updates_performed: u64,
    pub epochs_completed: usize,
    /// Mean training loss per epoch (the last one may be partial).
    pub epoch_losses: Vec<f64>,
    pub trace: Vec<CheckpointEval>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub model: String,
    pub runs: Vec<RunResult>,
    pub mean_validation_accuracy: f64,
    pub mean_test_accuracy: f64,
    pub spec: ModelSpec,
    pub config: TrainConfig,
}

impl ExperimentReport {
    pub fn from_runs(spec: &ModelSpec, config: &TrainConfig, runs: Vec<RunResult>) -> Self {
        let n = runs.len().max(1) as f64;
        ExperimentReport {
            model: spec.name(config.train_on.short_name()),
            mean_validation_accuracy: runs.iter().map(|r| r.best_validation_accuracy).sum::<f64>() / n,
            mean_test_accuracy: runs.iter().map(|r| r.test_accuracy).sum::<f64>() / n,
            runs,
            spec: spec.clone(),
            config: config.clone(),
        }
    }
}

/// Hooks into a training run. All methods default to no-ops.
pub trait RunObserver {
    fn on_split(&mut self, _split: &RunSplit) {}

    /// The example list for an epoch, before shuffling.
    fn on_epoch_start(&mut self, _epoch: usize, _examples: &[LabeledEnding]) {}

    /// Called before every SGD update with its mini-batch.
    fn on_batch(&mut self, _epoch: usize, _batch: &[&LabeledEnding]) {}

    fn on_checkpoint(&mut self, _eval: &CheckpointEval, _model: &StoryClozeModel<f32>, _is_best: bool) -> Result<()> {
        Ok(())
    }

    fn on_finish(&mut self, _result: &RunResult, _best: &StoryClozeModel<f32>) -> Result<()> {
        Ok(())
    }
}

/// Observer that ignores everything.
pub struct NoObserver;

impl RunObserver for NoObserver {}

/// Mean cross-entropy over `examples`.
pub fn dataset_loss<L: SentenceLookup + ?Sized>(
    model: &StoryClozeModel<f32>,
    examples: &[LabeledEnding],
    lookup: &L,
) -> Result<f64> {
    let mut total = 0.0;
    for ex in examples {
        let (p, _) = model.forward_by_key(prompt_refs(ex), &ex.ending_key, lookup)?;
        total += cross_entropy(p, ex.label) as f64;
    }
    Ok(total / examples.len().max(1) as f64)
}

fn prompt_refs(ex: &LabeledEnding) -> [&str; 4] {
    std::array::from_fn(|k| ex.prompt_keys[k].as_str())
}

/// One SGD update on a mini-batch; returns the batch's summed loss.
pub fn sgd_update<L: SentenceLookup + ?Sized>(
    model: &mut StoryClozeModel<f32>,
    batch: &[&LabeledEnding],
    lookup: &L,
    grads: &mut GradientSet<f32>,
    sgd: &SgdConfig,
    freeze_encoder: bool,
) -> Result<f64> {
    let scale = 1.0 / batch.len() as f32;
    let mut loss = 0.0;
    for ex in batch {
        let (p, cache) = model.forward_by_key(prompt_refs(ex), &ex.ending_key, lookup)?;
        loss += cross_entropy(p, ex.label) as f64;
        model.accumulate_backward(&cache, ex.label, grads, scale)?;
    }
    if freeze_encoder {
        let n = model.classifier_tensor_count();
        for t in &mut grads.as_mut_slices()[n..] {
            t.iter_mut().for_each(|v| *v = 0.0);
        }
    }
    sgd_step(model, grads, sgd)?;
    grads.zero();
    Ok(loss)
}

pub fn train_run(spec: &ModelSpec, config: &TrainConfig, bundle: &DataBundle, run_index: usize) -> Result<RunResult> {
    train_run_observed(spec, config, bundle, run_index, &mut NoObserver)
}

pub fn train_run_observed(
    spec: &ModelSpec,
    config: &TrainConfig,
    bundle: &DataBundle,
    run_index: usize,
    observer: &mut dyn RunObserver,
) -> Result<RunResult> {
    config.validate()?;
    spec.validate()?;
    let lookup = bundle.lookup(spec.embedding_source)?;
    let lookup = lookup.as_ref();
    run_with_lookup(spec, config, bundle, lookup, run_index, observer)
}

fn run_with_lookup(
    spec: &ModelSpec,
    config: &TrainConfig,
    bundle: &DataBundle,
    lookup: &dyn SentenceLookup,
    run_index: usize,
    observer: &mut dyn RunObserver,
) -> Result<RunResult> {
    let split = split_for_run(config, bundle, run_index)?;
    if split.selection.is_empty() {
        return Err(Error::config("model-selection set is empty"));
    }
    if bundle.test.is_empty() {
        return Err(Error::config("no test data"));
    }
    observer.on_split(&split);

    let mut rng = ChaCha8Rng::seed_from_u64(config.run_seed(run_index));
    let mut model = StoryClozeModel::<f32>::new(spec.clone(), &mut rng)?;
    let mut grads = GradientSet::zeros_like(&model);
    let sgd = SgdConfig::new(config.learning_rate)?;

    let fixed_examples = match config.train_on {
        TrainSource::Val => Some(build_examples(ExampleSource::Cloze(&split.train_items), lookup, &mut rng)?),
        TrainSource::Train => {
            if bundle.train.len() < 2 {
                return Err(Error::CorpusTooSmall(bundle.train.len()));
            }
            None
        }
    };

    let mut updates: u64 = 0;
    let mut trace = Vec::new();
    let mut epoch_losses = Vec::new();
    let mut best: Option<(CheckpointEval, StoryClozeModel<f32>)> = None;
    let mut stale_checkpoints = 0usize;
    let mut stopped = false;

    let evaluate = |model: &StoryClozeModel<f32>,
                        updates: u64,
                        trace: &mut Vec<CheckpointEval>,
                        best: &mut Option<(CheckpointEval, StoryClozeModel<f32>)>,
                        observer: &mut dyn RunObserver|
     -> Result<bool> {
        let eval = CheckpointEval {
            update: updates,
            selection_accuracy: accuracy(model, &split.selection, lookup)?,
        };
        trace.push(eval);
        let improved = best
            .as_ref()
            .is_none_or(|(b, _)| eval.selection_accuracy > b.selection_accuracy);
        if improved {
            *best = Some((eval, model.clone()));
        }
        observer.on_checkpoint(&eval, model, improved)?;
        Ok(improved)
    };

    let mut epochs_completed = 0;
    for epoch in 0..config.max_epochs {
        let fresh;
        let examples: &[LabeledEnding] = match &fixed_examples {
            Some(ex) => ex,
            None => {
                // negatives are redrawn every epoch
                fresh = build_examples(ExampleSource::Stories(&bundle.train, config.neg_source), lookup, &mut rng)?;
                &fresh
            }
        };
        if examples.is_empty() {
            return Err(Error::config("no training examples"));
        }
        observer.on_epoch_start(epoch, examples);
        let mut order: Vec<&LabeledEnding> = examples.iter().collect();
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        let mut seen = 0;
        for batch in order.chunks(config.batch_size) {
            observer.on_batch(epoch, batch);
            epoch_loss += sgd_update(&mut model, batch, lookup, &mut grads, &sgd, config.freeze_encoder)?;
            seen += batch.len();
            updates += 1;
            if updates.is_multiple_of(config.checkpoint_interval) {
                if evaluate(&model, updates, &mut trace, &mut best, observer)? {
                    stale_checkpoints = 0;
                } else {
                    stale_checkpoints += 1;
                    if stale_checkpoints >= config.patience {
                        stopped = true;
                        break;
                    }
                }
            }
        }
        epoch_losses.push(epoch_loss / seen as f64);
        epochs_completed = epoch + 1;
        if stopped {
            break;
        }
    }
    if trace.last().is_none_or(|e| e.update != updates) {
        evaluate(&model, updates, &mut trace, &mut best, observer)?;
    }
    let (best_eval, best_model) = best.expect("at least one checkpoint evaluated");
    let result = RunResult {
        run_index,
        best_checkpoint_id: best_eval.update,
        best_validation_accuracy: best_eval.selection_accuracy,
        test_accuracy: accuracy(&best_model, &bundle.test, lookup)?,
        updates_performed: updates,
        epochs_completed,
        epoch_losses,
        trace,
    };
    observer.on_finish(&result, &best_model)?;
    Ok(result)
}

pub fn run_experiment(spec: &ModelSpec, config: &TrainConfig, bundle: &DataBundle) -> Result<ExperimentReport> {
    run_experiment_observed(spec, config, bundle, |_| NoObserver)
}

/// Runs `config.runs` independent runs with seeds `seed + run_index`,
/// `config.parallel_runs` at a time, and averages them.
pub fn run_experiment_observed<O, F>(
    spec: &ModelSpec,
    config: &TrainConfig,
    bundle: &DataBundle,
    make_observer: F,
) -> Result<ExperimentReport>
where
    O: RunObserver + Send,
    F: Fn(usize) -> O + Sync,
{
    config.validate()?;
    spec.validate()?;
    let lookup = bundle.lookup(spec.embedding_source)?;
    let lookup: &dyn SentenceLookup = lookup.as_ref();
    let one = |i: usize| -> Result<RunResult> {
        let mut obs = make_observer(i);
        run_with_lookup(spec, config, bundle, lookup, i, &mut obs)
    };
    let runs: Result<Vec<RunResult>> = if config.parallel_runs > 1 {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.parallel_runs)
            .build()
            .map_err(|e| Error::config(e.to_string()))?;
        pool.install(|| (0..config.runs).into_par_iter().map(one).collect())
    } else {
        (0..config.runs).map(one).collect()
    };
    Ok(ExperimentReport::from_runs(spec, config, runs?))
}
