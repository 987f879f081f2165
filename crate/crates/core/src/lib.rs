//! Forced-choice story-ending classifiers over sentence embeddings, built on a
//! small from-scratch neural network library.
//!
//! * [`nn`]: dense layers, softmax cross-entropy, SGD, gradient checking
//! * [`seq`]: GRU and bidirectional LSTM encoders with backpropagation through time
//! * [`corpus`]: CSV and EMB1 ingestion, negative sampling, synthetic corpora
//! * [`models`]: the NC / LS / FC input assemblies and forced-choice inference
//! * [`training`]: holdout, checkpoint selection, multi-run experiments
//! * [`cli`]: the `cloze` command line

pub mod checkpoint;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod models;
pub mod nn;
pub mod report;
pub mod seq;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
pub use models::{accuracy, choose, predict_ending, EmbeddingSource, ModelSpec, ModelVariant, StoryClozeModel};
pub use training::{run_experiment, DataBundle, ExperimentReport, RunResult, TrainConfig, TrainSource};
