//! The `cloze` command line: `synth`, `train`, `eval`, `gradcheck`, `report`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::checkpoint::{load_checkpoint, save_checkpoint, CheckpointMeta};
use crate::corpus::{
    generate_synthetic, load_cloze_set, load_embedding_table, load_training_corpus, write_cloze_set,
    write_embedding_table, write_training_corpus, NegativeSource, SynthConfig, SynthRegime, WordEmbeddingTable,
};
use crate::models::{accuracy, EmbeddingSource, ModelSpec, ModelVariant, StoryClozeModel, DEFAULT_WORD_DIM, SENTENCE_DIM};
use crate::report::{emit_report, parse_report_json, ReportFormat};
use crate::training::{
    run_experiment_observed, CheckpointEval, DataBundle, ExperimentReport, RunObserver, RunResult, TrainConfig,
    TrainSource,
};
use crate::verify::{run_gradcheck_suite, Component};

/// Environment variable that relative data paths are resolved against.
pub const DATA_DIR_ENV: &str = "CLOZE_RANK_DATA_DIR";

#[derive(Debug, Parser)]
#[command(name = "cloze", version, about = "Story ending classifiers over sentence embeddings")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with a known signal.
    Synth(SynthArgs),
    /// Train a model over several runs and report accuracies.
    Train(TrainArgs),
    /// Score a checkpoint on a labeled cloze set.
    Eval(EvalArgs),
    /// Compare analytic gradients with finite differences.
    Gradcheck(GradcheckArgs),
    /// Render a saved report.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, value_enum)]
    pub regime: SynthRegime,
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    #[arg(long, default_value_t = 2000)]
    pub n_train: usize,
    #[arg(long, default_value_t = 500)]
    pub n_val: usize,
    #[arg(long, default_value_t = 500)]
    pub n_test: usize,
    #[arg(long, default_value_t = 1.0)]
    pub mu: f64,
    #[arg(long, default_value_t = 0.5)]
    pub sigma: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Directory for train.csv, val.csv, test.csv and sentences.emb.
    #[arg(long)]
    pub out: PathBuf,
}

/// Data locations shared by `train` and `eval`.
#[derive(Debug, Clone, PartialEq, Args, Serialize, Deserialize)]
pub struct DataArgs {
    /// Base for relative data paths (default: $CLOZE_RANK_DATA_DIR).
    #[arg(long, env = DATA_DIR_ENV)]
    pub data_dir: Option<PathBuf>,
    /// Five-sentence training stories (CSV).
    #[arg(long)]
    pub train_csv: Option<PathBuf>,
    /// Labeled validation cloze items (CSV).
    #[arg(long)]
    pub val_csv: Option<PathBuf>,
    /// Labeled test cloze items (CSV).
    #[arg(long)]
    pub test_csv: Option<PathBuf>,
    /// EMB1 sentence embeddings, keyed by sentence key. May be repeated.
    #[arg(long = "sentence-embeddings")]
    pub sentence_embeddings: Vec<PathBuf>,
    /// EMB1 word vectors, keyed by token.
    #[arg(long)]
    pub word_vectors: Option<PathBuf>,
}

impl DataArgs {
    fn resolve(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    fn required(&self, p: &Option<PathBuf>, flag: &str) -> anyhow::Result<PathBuf> {
        match p {
            Some(p) => Ok(self.resolve(p)),
            None => bail!("missing required path {flag}"),
        }
    }

    fn load_lookup(&self, source: EmbeddingSource, bundle: &mut DataBundle) -> anyhow::Result<()> {
        match source {
            EmbeddingSource::Precomputed => {
                if self.sentence_embeddings.is_empty() {
                    bail!("skip embeddings require --sentence-embeddings");
                }
                let mut table: Option<crate::corpus::EmbeddingTable> = None;
                for p in &self.sentence_embeddings {
                    let t = load_embedding_table(self.resolve(p))?;
                    match &mut table {
                        Some(acc) => acc.merge(&t)?,
                        None => table = Some(t),
                    }
                }
                bundle.sentences = table;
            }
            EmbeddingSource::Words => {
                let path = self.required(&self.word_vectors, "--word-vectors (required by --embeddings words)")?;
                bundle.words = Some(WordEmbeddingTable::from_table(&load_embedding_table(path)?));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    #[arg(long, value_enum)]
    pub model: ModelVariant,
    #[arg(long, value_enum, default_value = "skip")]
    pub embeddings: EmbeddingSource,
    #[arg(long, value_enum, default_value = "val")]
    pub train_on: TrainSource,
    #[arg(long, default_value_t = 0.01, allow_negative_numbers = true)]
    pub lr: f64,
    #[arg(long, default_value_t = 0.1, allow_negative_numbers = true)]
    pub holdout: f64,
    #[arg(long, default_value_t = 3000)]
    pub checkpoint_every: u64,
    #[arg(long, default_value_t = 5)]
    pub runs: usize,
    #[arg(long, default_value_t = 1)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value = "fifth")]
    pub neg_source: NegativeSource,
    #[arg(long, default_value_t = 30)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    /// Hidden widths, e.g. `256,64`. Defaults follow the variant.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
    /// Sentence/encoder dimension (default: the embedding file's, or 4800 for words).
    #[arg(long)]
    pub input_dim: Option<usize>,
    #[arg(long)]
    pub freeze_encoder: bool,
    /// Use one holdout for all runs instead of one per run seed.
    #[arg(long)]
    pub fixed_holdout: bool,
    #[arg(long, default_value_t = 1)]
    pub parallel_runs: usize,
    /// Save every evaluated checkpoint, not just the best.
    #[arg(long)]
    pub keep_checkpoints: bool,
    #[command(flatten)]
    pub data: DataArgs,
    #[arg(long, default_value = "runs")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// Labeled cloze CSV to score.
    #[arg(long)]
    pub items: PathBuf,
    #[command(flatten)]
    pub data: DataArgs,
}

#[derive(Debug, Args)]
pub struct GradcheckArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 10)]
    pub seeds: usize,
    /// Negate one component's backward pass (checker sanity test).
    #[arg(long, value_enum)]
    pub corrupt: Option<Component>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// A report.json written by `train`.
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "tsv")]
    pub format: ReportFormat,
}

/// What `train` records next to its outputs; enough to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigSnapshot {
    pub argv: Vec<String>,
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub data: DataArgs,
}

impl TrainArgs {
    pub fn train_config(&self) -> anyhow::Result<TrainConfig> {
        let c = TrainConfig {
            train_on: self.train_on,
            learning_rate: self.lr,
            holdout_fraction: self.holdout,
            checkpoint_interval: self.checkpoint_every,
            runs: self.runs,
            batch_size: self.batch_size,
            max_epochs: self.max_epochs,
            patience: self.patience,
            seed: self.seed,
            neg_source: self.neg_source,
            fixed_holdout: self.fixed_holdout,
            freeze_encoder: self.freeze_encoder,
            parallel_runs: self.parallel_runs,
        };
        c.validate()?;
        Ok(c)
    }

    /// Model dimensions: published sizes unless overridden.
    pub fn model_spec(&self, embedding_dim: Option<usize>, word_dim: Option<usize>) -> anyhow::Result<ModelSpec> {
        let published = ModelSpec::published(self.model, self.embeddings);
        let input_dim = self.input_dim.or(embedding_dim).unwrap_or(SENTENCE_DIM);
        let widths = self.hidden.clone().unwrap_or(published.hidden_widths);
        let spec = ModelSpec::with_dims(
            self.model,
            self.embeddings,
            input_dim,
            widths,
            word_dim.unwrap_or(DEFAULT_WORD_DIM),
        );
        spec.validate()?;
        Ok(spec)
    }
}

/// Writes best checkpoints, traces and (optionally) every checkpoint of a run.
struct RunWriter {
    dir: PathBuf,
    run_index: usize,
    keep: bool,
}

impl RunObserver for RunWriter {
    fn on_checkpoint(&mut self, eval: &CheckpointEval, model: &StoryClozeModel<f32>, _is_best: bool) -> crate::Result<()> {
        if self.keep {
            let meta = CheckpointMeta {
                run_index: self.run_index as u32,
                update_count: eval.update,
            };
            save_checkpoint(self.dir.join(format!("ckpt-{:09}.mdl", eval.update)), model, meta)?;
        }
        Ok(())
    }

    fn on_finish(&mut self, result: &RunResult, best: &StoryClozeModel<f32>) -> crate::Result<()> {
        let meta = CheckpointMeta {
            run_index: self.run_index as u32,
            update_count: result.best_checkpoint_id,
        };
        save_checkpoint(self.dir.join("best.mdl"), best, meta)?;
        let mut trace = String::from("update\tselection_accuracy\n");
        for e in &result.trace {
            trace.push_str(&format!("{}\t{:.6}\n", e.update, e.selection_accuracy));
        }
        fs::write(self.dir.join("trace.tsv"), trace).map_err(|e| crate::Error::io(self.dir.join("trace.tsv"), e))
    }
}

fn write_file(path: &Path, contents: &str) -> anyhow::Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

pub fn run_synth(args: &SynthArgs) -> anyhow::Result<()> {
    let cfg = SynthConfig {
        mu: args.mu,
        sigma: args.sigma,
        ..SynthConfig::new(args.regime, args.n_train, args.n_val, args.n_test, args.dim, args.seed)
    };
    let bundle = generate_synthetic(&cfg)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    write_training_corpus(args.out.join("train.csv"), &bundle.train)?;
    write_cloze_set(args.out.join("val.csv"), &bundle.val)?;
    write_cloze_set(args.out.join("test.csv"), &bundle.test)?;
    write_embedding_table(&bundle.table, args.out.join("sentences.emb"))?;
    write_file(&args.out.join("synth.json"), &serde_json::to_string_pretty(&cfg)?)?;
    println!(
        "wrote {} stories, {} val and {} test items, {} vectors of dim {} to {}",
        bundle.train.len(),
        bundle.val.len(),
        bundle.test.len(),
        bundle.table.len(),
        bundle.table.dim(),
        args.out.display()
    );
    Ok(())
}

/// Loads data, trains, and writes `<out>/<model-name>/` with `config.json`,
/// `report.json`, `report.tsv` and one `run-k/` directory per run.
pub fn run_train(args: &TrainArgs, argv: &[String]) -> anyhow::Result<ExperimentReport> {
    let config = args.train_config()?;
    let data = &args.data;
    let mut bundle = DataBundle {
        val: load_cloze_set(data.required(&data.val_csv, "--val-csv")?, true)?,
        test: load_cloze_set(data.required(&data.test_csv, "--test-csv")?, true)?,
        ..Default::default()
    };
    if args.train_on == TrainSource::Train {
        bundle.train = load_training_corpus(data.required(&data.train_csv, "--train-csv (required by --train-on train)")?)?;
    }
    data.load_lookup(args.embeddings, &mut bundle)?;
    let spec = args.model_spec(
        bundle.sentences.as_ref().map(|t| t.dim()),
        bundle.words.as_ref().map(|w| w.dim()),
    )?;

    let dir = args.out.join(spec.name(args.train_on.short_name()));
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let snapshot = ConfigSnapshot {
        argv: argv.to_vec(),
        spec: spec.clone(),
        config: config.clone(),
        data: data.clone(),
    };
    write_file(&dir.join("config.json"), &serde_json::to_string_pretty(&snapshot)?)?;
    for k in 0..config.runs {
        let run_dir = dir.join(format!("run-{k}"));
        fs::create_dir_all(&run_dir).with_context(|| format!("creating {}", run_dir.display()))?;
    }

    let report = run_experiment_observed(&spec, &config, &bundle, |k| RunWriter {
        dir: dir.join(format!("run-{k}")),
        run_index: k,
        keep: args.keep_checkpoints,
    })?;
    write_file(&dir.join("report.json"), &emit_report(&report, ReportFormat::Json))?;
    let tsv = emit_report(&report, ReportFormat::Tsv);
    write_file(&dir.join("report.tsv"), &tsv)?;
    print!("{tsv}");
    Ok(report)
}

pub fn run_eval(args: &EvalArgs) -> anyhow::Result<f64> {
    let (model, _) = load_checkpoint(&args.checkpoint)?;
    let items = load_cloze_set(args.data.resolve(&args.items), true)?;
    let mut bundle = DataBundle {
        test: items,
        ..Default::default()
    };
    args.data.load_lookup(model.spec().embedding_source, &mut bundle)?;
    let lookup = bundle.lookup(model.spec().embedding_source)?;
    let acc = accuracy(&model, &bundle.test, lookup.as_ref())?;
    println!("{}\t{}\t{:.4}", args.checkpoint.display(), bundle.test.len(), acc);
    Ok(acc)
}

/// Runs the gradient suite; `Ok(false)` when any component fails.
pub fn run_gradcheck(args: &GradcheckArgs) -> anyhow::Result<bool> {
    let summary = run_gradcheck_suite(args.seed, args.seeds, args.corrupt)?;
    print!("{summary}");
    let failing = summary.failing();
    if !failing.is_empty() {
        let names: Vec<&str> = failing.iter().map(|c| c.name()).collect();
        eprintln!("gradient check failed: {}", names.join(", "));
    }
    Ok(failing.is_empty())
}

pub fn run_report(args: &ReportArgs) -> anyhow::Result<()> {
    let text = fs::read_to_string(&args.input).with_context(|| format!("reading {}", args.input.display()))?;
    print!("{}", emit_report(&parse_report_json(&text)?, args.format));
    Ok(())
}

/// Parses `argv` and runs the command. Usage errors exit with status 2,
/// failures with 1.
pub fn main_from<I, T>(argv: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    let argv: Vec<String> = argv.iter().map(|a| a.to_string_lossy().into_owned()).collect();
    let outcome = match &cli.command {
        Command::Synth(a) => run_synth(a).map(|_| true),
        Command::Train(a) => run_train(a, &argv).map(|_| true),
        Command::Eval(a) => run_eval(a).map(|_| true),
        Command::Gradcheck(a) => run_gradcheck(a),
        Command::Report(a) => run_report(a).map(|_| true),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

pub fn main() -> ExitCode {
    main_from(std::env::args_os())
}
