//! Synthetic corpora with a known answer, for exercising the whole pipeline
//! without the real stories or a pretrained encoder.
//!
//! Every non-informative sentence is drawn from the same background
//! distribution `N(0, (μ² + σ²) I)`.
//!
//! * `style`: right endings `~ N(+μu, σ²I)`, wrong endings `~ N(−μu, σ²I)`
//!   for a fixed unit direction `u`; prompts are background noise, so the
//!   ending alone decides the item.
//! * `context`: each item has a latent `t ~ N(0, μ²I)`; the fourth sentence
//!   and the right ending are both `t + σ·noise`, the wrong ending is
//!   background. Both endings have the same marginal law, so only their
//!   relation to the fourth sentence is informative.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{ClozeItem, EmbeddingTable, FiveSentenceStory};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SynthRegime {
    Style,
    Context,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub regime: SynthRegime,
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub dim: usize,
    pub seed: u64,
    pub mu: f64,
    pub sigma: f64,
}

impl SynthConfig {
    pub fn new(regime: SynthRegime, n_train: usize, n_val: usize, n_test: usize, dim: usize, seed: u64) -> Self {
        SynthConfig {
            regime,
            n_train,
            n_val,
            n_test,
            dim,
            seed,
            mu: 1.0,
            sigma: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBundle {
    pub train: Vec<FiveSentenceStory>,
    pub val: Vec<ClozeItem>,
    pub test: Vec<ClozeItem>,
    pub table: EmbeddingTable,
    /// The style direction `u` (style regime only).
    pub direction: Option<Vec<f32>>,
}

struct Sampler {
    rng: ChaCha8Rng,
    dim: usize,
    mu: f64,
    sigma: f64,
}

impl Sampler {
    fn gauss(&mut self, mean: Option<&[f64]>, std: f64) -> Vec<f64> {
        (0..self.dim)
            .map(|k| {
                let n: f64 = StandardNormal.sample(&mut self.rng);
                mean.map_or(0.0, |m| m[k]) + std * n
            })
            .collect()
    }

    fn background(&mut self) -> Vec<f64> {
        let std = (self.mu * self.mu + self.sigma * self.sigma).sqrt();
        self.gauss(None, std)
    }

    fn latent(&mut self) -> Vec<f64> {
        let mu = self.mu;
        self.gauss(None, mu)
    }

    fn near(&mut self, center: &[f64]) -> Vec<f64> {
        let s = self.sigma;
        self.gauss(Some(center), s)
    }
}

fn f32s(v: &[f64]) -> Vec<f32> {
    v.iter().map(|&x| x as f32).collect()
}

/// Draws `(prompt, right ending, wrong ending)` vectors for one story.
fn draw_story(s: &mut Sampler, regime: SynthRegime, style: &[f64]) -> ([Vec<f64>; 4], Vec<f64>, Vec<f64>) {
    match regime {
        SynthRegime::Style => {
            let prompt = std::array::from_fn(|_| s.background());
            let anti: Vec<f64> = style.iter().map(|v| -v).collect();
            let right = s.near(style);
            let wrong = s.near(&anti);
            (prompt, right, wrong)
        }
        SynthRegime::Context => {
            let t = s.latent();
            let p0 = s.background();
            let p1 = s.background();
            let p2 = s.background();
            let p3 = s.near(&t);
            let right = s.near(&t);
            let wrong = s.background();
            ([p0, p1, p2, p3], right, wrong)
        }
    }
}

pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticBundle> {
    if cfg.dim < 2 {
        return Err(Error::config(format!("synthetic dim must be at least 2, got {}", cfg.dim)));
    }
    if cfg.n_train == 0 || cfg.n_val == 0 || cfg.n_test == 0 {
        return Err(Error::config("synthetic split sizes must be at least 1"));
    }
    if !(cfg.sigma >= 0.0 && cfg.mu >= 0.0 && cfg.sigma.is_finite() && cfg.mu.is_finite()) {
        return Err(Error::config("mu and sigma must be finite and non-negative"));
    }
    let mut s = Sampler {
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        dim: cfg.dim,
        mu: cfg.mu,
        sigma: cfg.sigma,
    };
    let u = s.gauss(None, 1.0);
    let norm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let u: Vec<f64> = u.iter().map(|x| x / norm).collect();
    let style: Vec<f64> = u.iter().map(|x| cfg.mu * x).collect();

    let n_sentences = 5 * cfg.n_train + 6 * (cfg.n_val + cfg.n_test);
    let mut table = EmbeddingTable::with_capacity(cfg.dim, n_sentences)?;
    let regime_name = match cfg.regime {
        SynthRegime::Style => "style",
        SynthRegime::Context => "context",
    };
    let text = |key: &str| format!("synthetic {regime_name} sentence {key}");

    let mut train = Vec::with_capacity(cfg.n_train);
    for i in 0..cfg.n_train {
        let id = format!("train-{i:06}");
        let (prompt, right, _) = draw_story(&mut s, cfg.regime, &style);
        let vectors = [&prompt[0], &prompt[1], &prompt[2], &prompt[3], &right];
        let story = FiveSentenceStory::from_texts(&id, "synthetic", [""; 5]);
        let story = FiveSentenceStory {
            sentences: story.sentences.map(|mut sen| {
                sen.text = text(&sen.key);
                sen
            }),
            ..story
        };
        for (sen, v) in story.sentences.iter().zip(vectors) {
            table.insert(sen.key.clone(), &f32s(v))?;
        }
        train.push(story);
    }

    let cloze = |prefix: &str, n: usize, s: &mut Sampler, table: &mut EmbeddingTable| -> Result<Vec<ClozeItem>> {
        let mut items = Vec::with_capacity(n);
        for i in 0..n {
            let id = format!("{prefix}-{i:06}");
            let (prompt, right, wrong) = draw_story(s, cfg.regime, &style);
            let gold = usize::from(s.rng.random_bool(0.5));
            let endings = if gold == 0 { [right, wrong] } else { [wrong, right] };
            let mut item = ClozeItem::from_texts(&id, [""; 4], [""; 2], Some(gold));
            for (sen, v) in item.prompt.iter_mut().zip(&prompt) {
                sen.text = text(&sen.key);
                table.insert(sen.key.clone(), &f32s(v))?;
            }
            for (sen, v) in item.endings.iter_mut().zip(&endings) {
                sen.text = text(&sen.key);
                table.insert(sen.key.clone(), &f32s(v))?;
            }
            items.push(item);
        }
        Ok(items)
    };
    let val = cloze("val", cfg.n_val, &mut s, &mut table)?;
    let test = cloze("test", cfg.n_test, &mut s, &mut table)?;

    Ok(SyntheticBundle {
        train,
        val,
        test,
        table,
        direction: match cfg.regime {
            SynthRegime::Style => Some(f32s(&u)),
            SynthRegime::Context => None,
        },
    })
}
