//! Skip-gram with negative sampling.
//!
//! For every center token and every context token within a per-position
//! window (uniformly shrunk in `[1, window]`, clipped at sentence
//! boundaries), the trainer applies one positive update and `negatives`
//! negative updates of the logistic objective, with a linearly decaying
//! learning rate. The trained input-vector (center) table becomes the
//! output embedding matrix; context vectors are discarded.
//!
//! In deterministic mode one sequential worker processes everything and two
//! identical-seed runs are bit-identical. Otherwise the sentence stream is
//! chunked over unsynchronized workers whose relaxed-atomic updates may
//! interleave, so the final matrix is run-dependent.

mod sampler;
mod vocab;

use std::sync::atomic::{AtomicU64, Ordering};

use ndarray::Array2;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::rng::stream_rng;

pub use sampler::{NegativeSampler, NEGATIVE_EXPONENT};
pub use vocab::{build_vocab, build_vocab_from_lines, Corpus};

#[derive(Debug, Error)]
pub enum SgnsError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("corpus is empty after dropping tokens with count < {min_count}")]
    EmptyCorpus { min_count: u64 },
    #[error("need a vocabulary of at least 2 tokens, got {0}")]
    VocabTooSmall(usize),
    #[error("invalid sgns configuration: {0}")]
    InvalidConfig(String),
    #[error("training diverged (non-finite loss) at epoch {epoch}, step {step}")]
    Diverged { epoch: usize, step: u64 },
    #[error(transparent)]
    Embedding(#[from] crate::embedding::EmbeddingError),
}

/// How the `window` parameter is interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowSemantics {
    /// `window` is the maximum offset on each side.
    Side,
    /// `window` is the total span; each side gets `max(1, window / 2)`.
    Span,
}

impl std::str::FromStr for WindowSemantics {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "side" => Ok(WindowSemantics::Side),
            "span" => Ok(WindowSemantics::Span),
            other => Err(format!("unknown window semantics {other:?}, expected side|span")),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SgnsConfig {
    pub dim: usize,
    pub window: usize,
    pub window_semantics: WindowSemantics,
    pub negatives: usize,
    pub epochs: usize,
    /// Starting rate; decays linearly to 1e-4 of itself over the run.
    pub learning_rate: f64,
    pub min_count: u64,
    /// Frequent-token subsampling threshold; 0 disables subsampling.
    pub subsample_threshold: f64,
    pub seed: u64,
    pub deterministic: bool,
    /// Worker count when `deterministic` is false.
    pub threads: usize,
}

impl Default for SgnsConfig {
    fn default() -> Self {
        Self {
            dim: 512,
            window: 11,
            window_semantics: WindowSemantics::Side,
            negatives: 10,
            epochs: 5,
            learning_rate: 0.025,
            min_count: 5,
            subsample_threshold: 1e-4,
            seed: 1,
            deterministic: true,
            threads: 1,
        }
    }
}

impl SgnsConfig {
    pub fn validate(&self) -> Result<(), SgnsError> {
        if self.dim < 1 || self.window < 1 || self.negatives < 1 || self.min_count < 1 {
            return Err(SgnsError::InvalidConfig(
                "dim, window, negatives and min_count must all be >= 1".into(),
            ));
        }
        if !(self.learning_rate > 0.0) {
            return Err(SgnsError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs < 1 {
            return Err(SgnsError::InvalidConfig("epochs must be >= 1".into()));
        }
        if self.subsample_threshold < 0.0 {
            return Err(SgnsError::InvalidConfig("subsample_threshold must be >= 0".into()));
        }
        Ok(())
    }

    /// Maximum context offset per side under the configured semantics.
    pub fn effective_side(&self) -> usize {
        match self.window_semantics {
            WindowSemantics::Side => self.window,
            WindowSemantics::Span => (self.window / 2).max(1),
        }
    }

    /// Provenance string recorded on the output matrix.
    fn source_tag(&self) -> String {
        format!(
            "sgns(dim={},window={}:{},negatives={},epochs={},lr={},min_count={},subsample={},seed={})",
            self.dim,
            self.window,
            match self.window_semantics {
                WindowSemantics::Side => "side",
                WindowSemantics::Span => "span",
            },
            self.negatives,
            self.epochs,
            self.learning_rate,
            self.min_count,
            self.subsample_threshold,
            self.seed,
        )
    }
}

/// Trained embeddings plus the recorded loss trace.
#[derive(Debug)]
pub struct SgnsOutput {
    pub matrix: EmbeddingMatrix,
    /// Mean per-pair loss of each epoch.
    pub epoch_losses: Vec<f64>,
}

/// Context range for the center at `i` with window `b`, clipped to the
/// sentence: training never reads outside `[0, len)`.
fn window_bounds(len: usize, i: usize, b: usize) -> (usize, usize) {
    (i.saturating_sub(b), (i + b).min(len - 1))
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// `-ln σ(z)` for a positive pair (label 1), `-ln σ(-z)` for a noise pair
/// (label 0).
fn logistic_loss(z: f64, label: f64) -> f64 {
    if label > 0.5 {
        softplus(-z)
    } else {
        softplus(z)
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Loss of the objective for a single (center, context, negatives) tuple.
pub fn tuple_loss(center: &[f64], context: &[f64], negatives: &[Vec<f64>]) -> f64 {
    let mut loss = logistic_loss(dot(center, context), 1.0);
    for neg in negatives {
        loss += logistic_loss(dot(center, neg), 0.0);
    }
    loss
}

/// Gradients of [`tuple_loss`] with respect to every vector involved.
pub struct TupleGradients {
    pub center: Vec<f64>,
    pub context: Vec<f64>,
    pub negatives: Vec<Vec<f64>>,
}

pub fn tuple_gradients(
    center: &[f64],
    context: &[f64],
    negatives: &[Vec<f64>],
) -> TupleGradients {
    let dim = center.len();
    let mut g_center = vec![0.0; dim];
    // d(loss)/dz = σ(z) − label, applied through z = center·other.
    let dz_pos = sigmoid(dot(center, context)) - 1.0;
    let g_context: Vec<f64> = center.iter().map(|&c| dz_pos * c).collect();
    for (g, &u) in g_center.iter_mut().zip(context) {
        *g += dz_pos * u;
    }
    let mut g_negatives = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let dz = sigmoid(dot(center, neg));
        g_negatives.push(center.iter().map(|&c| dz * c).collect());
        for (g, &u) in g_center.iter_mut().zip(neg) {
            *g += dz * u;
        }
    }
    TupleGradients { center: g_center, context: g_context, negatives: g_negatives }
}

/// Parameter table shared across workers: rows of f64 stored as relaxed
/// atomics so the parallel mode needs no locks. The sequential mode touching
/// it from one thread stays bit-reproducible.
struct ParamTable {
    data: Vec<AtomicU64>,
    dim: usize,
}

impl ParamTable {
    fn zeros(rows: usize, dim: usize) -> Self {
        let data = (0..rows * dim).map(|_| AtomicU64::new(0f64.to_bits())).collect();
        Self { data, dim }
    }

    fn seeded_uniform(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let half = 0.5 / dim as f64;
        let data = (0..rows * dim)
            .map(|_| {
                let v = rng.random::<f64>().mul_add(2.0 * half, -half);
                AtomicU64::new(v.to_bits())
            })
            .collect();
        Self { data, dim }
    }

    #[inline]
    fn read_row(&self, row: usize, buf: &mut [f64]) {
        let base = row * self.dim;
        for (j, slot) in buf.iter_mut().enumerate() {
            *slot = f64::from_bits(self.data[base + j].load(Ordering::Relaxed));
        }
    }

    /// `row += scale * vec`, elementwise load/store (lost updates are
    /// acceptable in hogwild mode and impossible with one worker).
    #[inline]
    fn add_scaled(&self, row: usize, scale: f64, vec: &[f64]) {
        let base = row * self.dim;
        for (j, &v) in vec.iter().enumerate() {
            let slot = &self.data[base + j];
            let cur = f64::from_bits(slot.load(Ordering::Relaxed));
            slot.store((cur + scale * v).to_bits(), Ordering::Relaxed);
        }
    }

    fn into_array(self, rows: usize) -> Array2<f64> {
        let flat: Vec<f64> =
            self.data.into_iter().map(|a| f64::from_bits(a.into_inner())).collect();
        Array2::from_shape_vec((rows, self.dim), flat).expect("table shape")
    }
}

/// Trains embeddings on a corpus.
pub fn train(corpus: &Corpus, cfg: &SgnsConfig) -> Result<SgnsOutput, SgnsError> {
    cfg.validate()?;
    let vocab = corpus.vocab_size();
    if vocab < 2 {
        return Err(SgnsError::VocabTooSmall(vocab));
    }

    let mut init_rng = stream_rng(cfg.seed, "sgns.init");
    let input = ParamTable::seeded_uniform(vocab, cfg.dim, &mut init_rng);
    let output = ParamTable::zeros(vocab, cfg.dim);

    let sentence_tokens: u64 = corpus.sentences().iter().map(|s| s.len() as u64).sum();
    let total_positions = sentence_tokens * cfg.epochs as u64;
    let progress = AtomicU64::new(0);

    let keep_probability: Vec<f64> = if cfg.subsample_threshold > 0.0 {
        let t = cfg.subsample_threshold;
        corpus
            .counts()
            .iter()
            .map(|&c| {
                let f = c as f64 / corpus.total_tokens() as f64;
                ((t / f).sqrt() + t / f).min(1.0)
            })
            .collect()
    } else {
        Vec::new()
    };

    let workers = if cfg.deterministic { 1 } else { cfg.threads.max(1) };
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let (loss_sum, pairs) = if workers == 1 {
            run_sentences(
                corpus,
                cfg,
                0,
                epoch,
                0..corpus.sentences().len(),
                &input,
                &output,
                &progress,
                total_positions,
                &keep_probability,
            )?
        } else {
            let n = corpus.sentences().len();
            let chunk = n.div_ceil(workers);
            std::thread::scope(|scope| {
                let mut handles = Vec::new();
                for w in 0..workers {
                    let range = (w * chunk).min(n)..((w + 1) * chunk).min(n);
                    let input = &input;
                    let output = &output;
                    let progress = &progress;
                    let keep = &keep_probability;
                    handles.push(scope.spawn(move || {
                        run_sentences(
                            corpus,
                            cfg,
                            w,
                            epoch,
                            range,
                            input,
                            output,
                            progress,
                            total_positions,
                            keep,
                        )
                    }));
                }
                let mut loss = 0.0;
                let mut pairs = 0u64;
                for handle in handles {
                    let (l, p) = handle.join().expect("worker panicked")?;
                    loss += l;
                    pairs += p;
                }
                Ok::<(f64, u64), SgnsError>((loss, pairs))
            })?
        };
        let mean = loss_sum / pairs.max(1) as f64;
        if !mean.is_finite() {
            return Err(SgnsError::Diverged { epoch: epoch + 1, step: pairs });
        }
        epoch_losses.push(mean);
    }

    let vectors = input.into_array(vocab);
    let matrix = EmbeddingMatrix::new(corpus.tokens().to_vec(), vectors, cfg.source_tag())?;
    Ok(SgnsOutput { matrix, epoch_losses })
}

#[allow(clippy::too_many_arguments)]
fn run_sentences(
    corpus: &Corpus,
    cfg: &SgnsConfig,
    worker: usize,
    epoch: usize,
    range: std::ops::Range<usize>,
    input: &ParamTable,
    output: &ParamTable,
    progress: &AtomicU64,
    total_positions: u64,
    keep_probability: &[f64],
) -> Result<(f64, u64), SgnsError> {
    let mut rng = stream_rng(cfg.seed, &format!("sgns.train.w{worker}.e{epoch}"));
    let mut sampler = NegativeSampler::with_rng(
        corpus.counts(),
        NEGATIVE_EXPONENT,
        stream_rng(cfg.seed, &format!("sgns.negatives.w{worker}.e{epoch}")),
    );
    let side = cfg.effective_side();
    let lr_floor = cfg.learning_rate * 1e-4;

    let dim = cfg.dim;
    let mut center_vec = vec![0.0; dim];
    let mut other_vec = vec![0.0; dim];
    let mut acc = vec![0.0; dim];

    let mut loss_sum = 0.0;
    let mut pairs = 0u64;
    let mut kept: Vec<u32> = Vec::new();
    for si in range {
        let sentence = &corpus.sentences()[si];
        let done = progress.fetch_add(sentence.len() as u64, Ordering::Relaxed);
        let remaining = 1.0 - done as f64 / total_positions as f64;
        let lr = (cfg.learning_rate * remaining).max(lr_floor);

        kept.clear();
        if keep_probability.is_empty() {
            kept.extend_from_slice(sentence);
        } else {
            for &id in sentence {
                if rng.random::<f64>() < keep_probability[id as usize] {
                    kept.push(id);
                }
            }
        }
        if kept.len() < 2 {
            continue;
        }

        for i in 0..kept.len() {
            let b = rng.random_range(1..=side);
            let (lo, hi) = window_bounds(kept.len(), i, b);
            let center = kept[i] as usize;
            for j in lo..=hi {
                if j == i {
                    continue;
                }
                let context = kept[j] as usize;
                input.read_row(center, &mut center_vec);
                acc.fill(0.0);
                let mut pair_loss = 0.0;

                // Positive term.
                output.read_row(context, &mut other_vec);
                let z = dot(&center_vec, &other_vec);
                let g = (1.0 - sigmoid(z)) * lr;
                pair_loss += logistic_loss(z, 1.0);
                for (a, &u) in acc.iter_mut().zip(&other_vec) {
                    *a += g * u;
                }
                output.add_scaled(context, g, &center_vec);

                // Noise terms; redraw when the sampler hits the positive.
                let mut drawn = 0usize;
                let mut attempts = 0usize;
                while drawn < cfg.negatives && attempts < cfg.negatives * 1000 {
                    attempts += 1;
                    let neg = sampler.next_index();
                    if neg == context {
                        continue;
                    }
                    output.read_row(neg, &mut other_vec);
                    let z = dot(&center_vec, &other_vec);
                    let g = -sigmoid(z) * lr;
                    pair_loss += logistic_loss(z, 0.0);
                    for (a, &u) in acc.iter_mut().zip(&other_vec) {
                        *a += g * u;
                    }
                    output.add_scaled(neg, g, &center_vec);
                    drawn += 1;
                }

                input.add_scaled(center, 1.0, &acc);
                pairs += 1;
                if !pair_loss.is_finite() {
                    return Err(SgnsError::Diverged { epoch: epoch + 1, step: pairs });
                }
                loss_sum += pair_loss;
            }
        }
    }
    Ok((loss_sum, pairs))
}
