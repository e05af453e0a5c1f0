//! Probing classifier: predicts a token's category from its embedding alone,
//! scored by k-fold cross-validation over the vocabulary.
//!
//! The vocabulary is split into seeded random bins of near-equal size; each
//! bin serves once as the evaluation set while the classifier trains on the
//! rest, so every aligned token is evaluated exactly once. The report keeps
//! per-fold accuracies, their mean, twice their sample standard deviation
//! (a 95% interval), and a summed confusion matrix.

mod mlp;

use std::fs;
use std::path::Path;

use ndarray::Axis;
use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;
use crate::lexicon::{Lexicon, LexiconError};
use crate::rng::stream_rng;

pub use mlp::{train_mlp, MlpClassifier, TrainedMlp};

#[derive(Debug, Error)]
pub enum ProbeError {
    #[error("invalid probe configuration: {0}")]
    InvalidConfig(String),
    #[error("training set contains fewer than two classes")]
    SingleClassTrainingSet,
    #[error("training diverged (non-finite loss) at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("need at least {folds} samples for {folds} folds, got {n}")]
    TooFewSamples { n: usize, folds: usize },
    #[error("lexicon is not univalent; apply filter_univalent first")]
    NotUnivalent,
    #[error("aligned vocabulary covers fewer than two classes")]
    TooFewClasses,
    #[error(transparent)]
    Lexicon(#[from] LexiconError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("serializing report: {0}")]
    Serialize(#[from] serde_json::Error),
}

/// Training hyperparameters. The MLP shape follows the probing setup (one
/// hidden layer, softmax output); optimizer settings are explicit here and
/// echoed into the JSON report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProbeConfig {
    pub hidden_units: usize,
    pub folds: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        Self {
            hidden_units: 100,
            folds: 10,
            epochs: 50,
            batch_size: 64,
            learning_rate: 0.01,
            seed: 1,
        }
    }
}

impl ProbeConfig {
    pub fn validate(&self) -> Result<(), ProbeError> {
        if self.folds < 2 {
            return Err(ProbeError::InvalidConfig(format!(
                "folds must be >= 2, got {}",
                self.folds
            )));
        }
        if self.hidden_units < 1 {
            return Err(ProbeError::InvalidConfig("hidden_units must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ProbeError::InvalidConfig(format!(
                "learning_rate must be > 0, got {}",
                self.learning_rate
            )));
        }
        if self.epochs < 1 || self.batch_size < 1 {
            return Err(ProbeError::InvalidConfig("epochs and batch_size must be >= 1".into()));
        }
        Ok(())
    }
}

/// Cross-validation outcome.
#[derive(Debug, Clone, Serialize)]
pub struct CrossValReport {
    /// Classes present in the aligned vocabulary, in tagset order.
    pub tags: Vec<String>,
    pub n_samples: usize,
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    /// Twice the sample standard deviation of the fold accuracies.
    pub two_sigma: f64,
    pub majority_class_frequency: f64,
    /// `confusion[true][predicted]`, summed over all folds.
    pub confusion: Vec<Vec<u64>>,
}

impl CrossValReport {
    /// Accuracy line in the reporting format `"97.77 % (+/- 1.16 %)"`.
    pub fn summary(&self) -> String {
        format_summary(self.mean, self.two_sigma)
    }

    /// Writes the JSON report, embedding the configuration that produced it.
    pub fn write_json(&self, path: &Path, cfg: &ProbeConfig) -> Result<(), ProbeError> {
        #[derive(Serialize)]
        struct ReportFile<'a> {
            schema_version: u32,
            config: &'a ProbeConfig,
            summary: String,
            #[serde(flatten)]
            report: &'a CrossValReport,
        }
        let file = ReportFile { schema_version: 1, config: cfg, summary: self.summary(), report: self };
        let json = serde_json::to_string_pretty(&file)?;
        fs::write(path, json)
            .map_err(|source| ProbeError::Io { path: path.display().to_string(), source })
    }
}

/// Formats a mean and 2σ pair the way accuracy tables present them.
pub fn format_summary(mean: f64, two_sigma: f64) -> String {
    format!("{:.2} % (+/- {:.2} %)", mean * 100.0, two_sigma * 100.0)
}

/// Splits `[0, n)` into `folds` disjoint seeded random bins whose sizes
/// differ by at most one. Deterministic for a fixed seed.
pub fn make_folds(n: usize, folds: usize, seed: u64) -> Result<Vec<Vec<usize>>, ProbeError> {
    if folds < 1 {
        return Err(ProbeError::InvalidConfig("folds must be >= 1".into()));
    }
    if n < folds {
        return Err(ProbeError::TooFewSamples { n, folds });
    }
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut stream_rng(seed, "probe.folds"));
    let base = n / folds;
    let extra = n % folds;
    let mut out = Vec::with_capacity(folds);
    let mut at = 0usize;
    for f in 0..folds {
        let size = base + usize::from(f < extra);
        out.push(indices[at..at + size].to_vec());
        at += size;
    }
    Ok(out)
}

/// Runs k-fold cross-validation of the probing classifier over the
/// vocabulary shared by the embedding matrix and the (univalent) lexicon.
pub fn crossvalidate(
    m: &EmbeddingMatrix,
    lex: &Lexicon,
    cfg: &ProbeConfig,
) -> Result<CrossValReport, ProbeError> {
    cfg.validate()?;
    if !lex.is_univalent() {
        return Err(ProbeError::NotUnivalent);
    }
    let alignment = lex.indicators(m.tokens())?;
    let n = alignment.len();
    if n < cfg.folds {
        return Err(ProbeError::TooFewSamples { n, folds: cfg.folds });
    }

    // Classes present among aligned tokens, in tagset order.
    let tags: Vec<String> = alignment.indicators.iter().map(|i| i.category().to_string()).collect();
    if tags.len() < 2 {
        return Err(ProbeError::TooFewClasses);
    }
    let class_of = |token: &str| -> usize {
        let tag = lex.tags_of(token).expect("aligned token").iter().next().expect("univalent");
        tags.iter().position(|t| t == tag).expect("tag collected above")
    };
    let labels: Vec<usize> = alignment.tokens.iter().map(|t| class_of(t)).collect();
    let data = m.vectors().select(Axis(0), &alignment.rows);
    let n_classes = tags.len();

    let folds = make_folds(n, cfg.folds, cfg.seed)?;
    let in_fold = |fold: &[usize]| {
        let mut mask = vec![false; n];
        for &i in fold {
            mask[i] = true;
        }
        mask
    };

    struct FoldOutcome {
        accuracy: f64,
        confusion: Vec<Vec<u64>>,
    }

    let outcomes: Vec<FoldOutcome> = folds
        .par_iter()
        .enumerate()
        .map(|(f, eval_idx)| -> Result<FoldOutcome, ProbeError> {
            let mask = in_fold(eval_idx);
            let train_idx: Vec<usize> = (0..n).filter(|&i| !mask[i]).collect();
            let x_train = data.select(Axis(0), &train_idx);
            let y_train: Vec<usize> = train_idx.iter().map(|&i| labels[i]).collect();
            let mut rng = stream_rng(cfg.seed, &format!("probe.fold.{f}"));
            let trained = train_mlp(x_train.view(), &y_train, n_classes, cfg, &mut rng)?;

            let x_eval = data.select(Axis(0), eval_idx);
            let preds = trained.classifier.predict(x_eval.view());
            let mut confusion = vec![vec![0u64; n_classes]; n_classes];
            let mut correct = 0usize;
            for (&i, &pred) in eval_idx.iter().zip(&preds) {
                let truth = labels[i];
                confusion[truth][pred] += 1;
                if truth == pred {
                    correct += 1;
                }
            }
            Ok(FoldOutcome { accuracy: correct as f64 / eval_idx.len() as f64, confusion })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let fold_accuracies: Vec<f64> = outcomes.iter().map(|o| o.accuracy).collect();
    let mean = fold_accuracies.iter().sum::<f64>() / fold_accuracies.len() as f64;
    let var = fold_accuracies.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
        / (fold_accuracies.len() - 1) as f64;
    let two_sigma = 2.0 * var.sqrt();

    let mut confusion = vec![vec![0u64; n_classes]; n_classes];
    for o in &outcomes {
        for (row, orow) in confusion.iter_mut().zip(&o.confusion) {
            for (cell, ocell) in row.iter_mut().zip(orow) {
                *cell += ocell;
            }
        }
    }

    let mut class_counts = vec![0usize; n_classes];
    for &label in &labels {
        class_counts[label] += 1;
    }
    let majority_class_frequency =
        class_counts.iter().copied().max().unwrap_or(0) as f64 / n as f64;

    Ok(CrossValReport {
        tags,
        n_samples: n,
        fold_accuracies,
        mean,
        two_sigma,
        majority_class_frequency,
        confusion,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    #[test]
    fn folds_exact_division() {
        let folds = make_folds(10, 10, 1).unwrap();
        assert_eq!(folds.len(), 10);
        assert!(folds.iter().all(|f| f.len() == 1));
    }

    #[test]
    fn folds_remainder_sizes() {
        let folds = make_folds(10_005, 10, 1).unwrap();
        let mut sizes: Vec<usize> = folds.iter().map(Vec::len).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![1000, 1000, 1000, 1000, 1000, 1001, 1001, 1001, 1001, 1001]);
    }

    #[test]
    fn folds_partition_and_determinism() {
        let a = make_folds(103, 7, 9).unwrap();
        let b = make_folds(103, 7, 9).unwrap();
        assert_eq!(a, b);
        let mut all: Vec<usize> = a.into_iter().flatten().collect();
        all.sort_unstable();
        assert_eq!(all, (0..103).collect::<Vec<_>>());
    }

    #[test]
    fn folds_reject_small_n() {
        assert!(matches!(make_folds(3, 4, 1), Err(ProbeError::TooFewSamples { .. })));
    }

    fn planted(n: usize) -> (EmbeddingMatrix, Lexicon) {
        // Two classes separated far beyond the noise in dimension 0.
        let mut rng = stream_rng(77, "test.planted");
        let mut data = Array2::zeros((n, 4));
        let mut pairs = Vec::new();
        let mut tokens = Vec::new();
        for i in 0..n {
            let class = i % 2;
            let tag = if class == 0 { "N" } else { "V" };
            let token = format!("w{i}");
            pairs.push((token.clone(), tag.to_string()));
            tokens.push(token);
            for j in 0..4 {
                let base = if j == 0 { 6.0 * class as f64 } else { 0.0 };
                data[(i, j)] = base + rand::Rng::random::<f64>(&mut rng) - 0.5;
            }
        }
        let m = EmbeddingMatrix::new(tokens, data, "planted").unwrap();
        (m, Lexicon::from_pairs(pairs))
    }

    #[test]
    fn crossvalidate_separable_data() {
        let (m, lex) = planted(120);
        let cfg =
            ProbeConfig { folds: 4, epochs: 60, batch_size: 16, ..ProbeConfig::default() };
        let report = crossvalidate(&m, &lex, &cfg).unwrap();
        assert_eq!(report.fold_accuracies.len(), 4);
        assert!(report.mean > 0.95, "mean {}", report.mean);
        assert_eq!(report.n_samples, 120);
        // Every sample evaluated exactly once.
        let evaluated: u64 = report.confusion.iter().flatten().sum();
        assert_eq!(evaluated, 120);
        // Confusion row sums are the per-class counts.
        for row in &report.confusion {
            assert_eq!(row.iter().sum::<u64>(), 60);
        }
    }

    #[test]
    fn crossvalidate_is_reproducible() {
        let (m, lex) = planted(60);
        let cfg = ProbeConfig { folds: 3, epochs: 5, ..ProbeConfig::default() };
        let a = crossvalidate(&m, &lex, &cfg).unwrap();
        let b = crossvalidate(&m, &lex, &cfg).unwrap();
        assert_eq!(a.fold_accuracies, b.fold_accuracies);
        assert_eq!(a.confusion, b.confusion);
        assert_eq!(a.mean.to_bits(), b.mean.to_bits());
    }

    #[test]
    fn crossvalidate_rejects_multivalent() {
        let (m, _) = planted(20);
        let lex = Lexicon::from_pairs([("w0", "N"), ("w0", "V"), ("w1", "V")]);
        let cfg = ProbeConfig { folds: 2, ..ProbeConfig::default() };
        assert!(matches!(crossvalidate(&m, &lex, &cfg), Err(ProbeError::NotUnivalent)));
    }

    #[test]
    fn mean_and_two_sigma_match_direct_statistics() {
        let (m, lex) = planted(40);
        let cfg = ProbeConfig { folds: 4, epochs: 3, ..ProbeConfig::default() };
        let report = crossvalidate(&m, &lex, &cfg).unwrap();
        let oracle_mean =
            report.fold_accuracies.iter().sum::<f64>() / report.fold_accuracies.len() as f64;
        let oracle_var = report
            .fold_accuracies
            .iter()
            .map(|a| (a - oracle_mean).powi(2))
            .sum::<f64>()
            / (report.fold_accuracies.len() - 1) as f64;
        assert!((report.mean - oracle_mean).abs() < 1e-12);
        assert!((report.two_sigma - 2.0 * oracle_var.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_two_fold_perfect_split() {
        // 4 samples, 2 classes, perfectly separable: both folds score 1.
        let data = ndarray::array![[0.0, 0.0], [0.1, 0.0], [5.0, 5.0], [5.1, 5.0]];
        let tokens = vec!["a".into(), "b".into(), "c".into(), "d".into()];
        let m = EmbeddingMatrix::new(tokens, data, "t").unwrap();
        let lex =
            Lexicon::from_pairs([("a", "X"), ("b", "X"), ("c", "Y"), ("d", "Y")]);
        let cfg = ProbeConfig { folds: 2, epochs: 80, seed: 3, ..ProbeConfig::default() };
        let report = crossvalidate(&m, &lex, &cfg).unwrap();
        assert_eq!(report.fold_accuracies, vec![1.0, 1.0]);
        assert_eq!(report.mean, 1.0);
        assert_eq!(report.two_sigma, 0.0);
    }

    #[test]
    fn summary_formatting_matches_reporting_style() {
        assert_eq!(format_summary(0.9777, 0.0116), "97.77 % (+/- 1.16 %)");
        assert_eq!(format_summary(1.0, 0.0), "100.00 % (+/- 0.00 %)");
    }

    #[test]
    fn report_json_round_trip() {
        let (m, lex) = planted(24);
        let cfg = ProbeConfig { folds: 2, epochs: 2, ..ProbeConfig::default() };
        let report = crossvalidate(&m, &lex, &cfg).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        report.write_json(f.path(), &cfg).unwrap();
        let value: serde_json::Value =
            serde_json::from_str(&std::fs::read_to_string(f.path()).unwrap()).unwrap();
        assert_eq!(value["schema_version"], 1);
        assert_eq!(value["config"]["folds"], 2);
        assert_eq!(value["fold_accuracies"].as_array().unwrap().len(), 2);
        assert!(value["summary"].as_str().unwrap().contains("%"));
    }
}
