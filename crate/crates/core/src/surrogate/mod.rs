//! Local linear surrogate over question-word deletions.
//!
//! Every context word position is a class. A perturbation drops a random
//! subset of question words, the model is asked the shortened question with
//! the context unchanged, and the probability it assigns to the answer-start
//! class becomes the regression target. A weighted ridge fit on the keep/drop
//! indicator design gives one coefficient per question word.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{AnswerPrediction, AnswererHandle, PredictionCache};
use crate::text::{self, Mask, TokenizedText};

mod ridge;

pub use ridge::{fit_weighted_ridge, RidgeFit};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateConfig {
    pub n_samples: usize,
    /// On the ×100 cosine-distance scale of [`mask_distance`].
    pub kernel_width: f64,
    pub ridge_alpha: f64,
    pub seed: u64,
}

impl Default for SurrogateConfig {
    fn default() -> Self {
        SurrogateConfig {
            n_samples: 1000,
            kernel_width: 25.0,
            ridge_alpha: 1.0,
            seed: 0,
        }
    }
}

impl SurrogateConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.kernel_width > 0.0 && self.kernel_width.is_finite()) {
            return Err(Error::Config(format!(
                "kernel width must be positive, got {}",
                self.kernel_width
            )));
        }
        if !(self.ridge_alpha >= 0.0 && self.ridge_alpha.is_finite()) {
            return Err(Error::Config(format!(
                "ridge alpha must be non-negative, got {}",
                self.ridge_alpha
            )));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        SurrogateConfig { seed, ..self }
    }
}

/// Stable per-example seed: independent of batch order and worker count.
pub fn example_seed(base: u64, example_id: &str) -> u64 {
    // FNV-1a over the id, then a splitmix64 finalizer over (hash ^ base).
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in example_id.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    let mut z = h ^ base.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Row 0 is the original question; each of the `n_samples` further rows drops
/// between 1 and `n_words - 1` words, with the count and positions drawn
/// uniformly.
pub fn sample_masks(n_words: usize, config: &SurrogateConfig) -> Result<Vec<Mask>> {
    if n_words == 0 {
        return Err(Error::Contract(
            "cannot perturb a question with no words".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut masks = Vec::with_capacity(config.n_samples + 1);
    masks.push(Mask::all(n_words));
    for _ in 0..config.n_samples {
        if n_words == 1 {
            masks.push(Mask::all(1));
            continue;
        }
        let k = rng.gen_range(1..n_words);
        let mut keep = vec![true; n_words];
        for i in index::sample(&mut rng, n_words, k) {
            keep[i] = false;
        }
        masks.push(Mask::new(keep)?);
    }
    Ok(masks)
}

/// 100 × cosine distance between the mask and the all-ones vector.
pub fn mask_distance(mask: &Mask) -> f64 {
    let n = mask.len() as f64;
    let k = mask.kept() as f64;
    100.0 * (1.0 - (k / n).sqrt())
}

pub fn kernel(distance: f64, width: f64) -> f64 {
    (-(distance * distance) / (width * width)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSample {
    pub mask: Mask,
    pub reduced_question: String,
    pub target_prob: f64,
    pub distance: f64,
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Explanation {
    /// One per question word, in question order.
    pub coefficients: Vec<f64>,
    pub intercept: f64,
    pub target_class: usize,
    pub config: SurrogateConfig,
    pub n_words: usize,
    pub words: Vec<String>,
}

impl Explanation {
    /// Word indices by descending coefficient (ties by position).
    pub fn ranking(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.n_words).collect();
        order.sort_by(|&a, &b| {
            self.coefficients[b]
                .total_cmp(&self.coefficients[a])
                .then(a.cmp(&b))
        });
        order
    }
}

/// Scored perturbations of one question. The design and weights do not
/// depend on the class, so any class can be explained from the same model
/// answers.
#[derive(Debug, Clone)]
pub struct Perturbations {
    pub config: SurrogateConfig,
    pub words: Vec<String>,
    pub masks: Vec<Mask>,
    pub questions: Vec<String>,
    pub distances: Vec<f64>,
    pub weights: Vec<f64>,
    pub predictions: Vec<AnswerPrediction>,
}

impl Perturbations {
    /// Samples masks and queries the model once per distinct reduced question.
    pub fn collect(
        question: &TokenizedText,
        cache: &mut PredictionCache<'_>,
        config: &SurrogateConfig,
    ) -> Result<Self> {
        config.validate()?;
        let masks = sample_masks(question.word_count(), config)?;
        let mut questions = Vec::with_capacity(masks.len());
        let mut predictions = Vec::with_capacity(masks.len());
        for (i, mask) in masks.iter().enumerate() {
            let q = text::apply_mask(question, mask)?;
            let p = cache.predict(&q).map_err(|source| Error::Sample {
                sample: i,
                mask: mask.to_string(),
                source,
            })?;
            predictions.push(p.clone());
            questions.push(q);
        }
        let distances: Vec<f64> = masks.iter().map(mask_distance).collect();
        let weights = distances
            .iter()
            .map(|&d| kernel(d, config.kernel_width))
            .collect();
        Ok(Perturbations {
            config: *config,
            words: question
                .word_texts()
                .into_iter()
                .map(String::from)
                .collect(),
            masks,
            questions,
            distances,
            weights,
            predictions,
        })
    }

    pub fn design(&self) -> Vec<Vec<f64>> {
        self.masks
            .iter()
            .map(|m| {
                m.as_slice()
                    .iter()
                    .map(|&k| if k { 1.0 } else { 0.0 })
                    .collect()
            })
            .collect()
    }

    pub fn targets(&self, class: usize) -> Result<Vec<f64>> {
        self.predictions
            .iter()
            .enumerate()
            .map(|(i, p)| {
                p.prob(class).ok_or_else(|| {
                    Error::Contract(format!(
                        "class {class} is outside the model's {} context tokens (sample {i})",
                        p.context_tokens.len()
                    ))
                })
            })
            .collect()
    }

    pub fn samples(&self, class: usize) -> Result<Vec<PerturbationSample>> {
        let targets = self.targets(class)?;
        Ok((0..self.masks.len())
            .map(|i| PerturbationSample {
                mask: self.masks[i].clone(),
                reduced_question: self.questions[i].clone(),
                target_prob: targets[i],
                distance: self.distances[i],
                weight: self.weights[i],
            })
            .collect())
    }

    /// Fits the surrogate for one class.
    pub fn explain_class(&self, class: usize) -> Result<Explanation> {
        let targets = self.targets(class)?;
        let fit = fit_weighted_ridge(
            &self.design(),
            &targets,
            &self.weights,
            self.config.ridge_alpha,
        )?;
        Ok(Explanation {
            coefficients: fit.coefficients,
            intercept: fit.intercept,
            target_class: class,
            config: self.config,
            n_words: self.words.len(),
            words: self.words.clone(),
        })
    }
}

/// Explains the model's answer-start probability for `target_class` in terms
/// of the question's words.
pub fn explain(
    question: &TokenizedText,
    context: &str,
    handle: &AnswererHandle,
    target_class: usize,
    config: &SurrogateConfig,
) -> Result<Explanation> {
    let mut cache = PredictionCache::new(handle, context);
    explain_cached(question, &mut cache, target_class, config)
}

pub fn explain_cached(
    question: &TokenizedText,
    cache: &mut PredictionCache<'_>,
    target_class: usize,
    config: &SurrogateConfig,
) -> Result<Explanation> {
    Perturbations::collect(question, cache, config)?.explain_class(target_class)
}
