//! One-hidden-layer perceptron with a softmax output, trained by mini-batch
//! SGD on cross-entropy. Initialization is uniform scaled by fan-in and
//! fully seeded, so training is bit-reproducible.

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ProbeConfig, ProbeError};

/// Trained classifier parameters.
#[derive(Debug, Clone)]
pub struct MlpClassifier {
    pub(crate) w1: Array2<f64>,
    pub(crate) b1: Array1<f64>,
    pub(crate) w2: Array2<f64>,
    pub(crate) b2: Array1<f64>,
}

/// Training outcome: parameters plus the recorded loss trace.
#[derive(Debug, Clone)]
pub struct TrainedMlp {
    pub classifier: MlpClassifier,
    /// Mean cross-entropy per epoch; the last entry is the final loss.
    pub epoch_losses: Vec<f64>,
}

impl TrainedMlp {
    pub fn final_loss(&self) -> f64 {
        *self.epoch_losses.last().expect("at least one epoch")
    }
}

impl MlpClassifier {
    fn init(d: usize, hidden: usize, classes: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale1 = 1.0 / (d as f64).sqrt();
        let scale2 = 1.0 / (hidden as f64).sqrt();
        let mut uniform = |scale: f64| rng.random::<f64>().mul_add(2.0 * scale, -scale);
        let mut w1 = Array2::zeros((d, hidden));
        for v in w1.iter_mut() {
            *v = uniform(scale1);
        }
        let mut w2 = Array2::zeros((hidden, classes));
        for v in w2.iter_mut() {
            *v = uniform(scale2);
        }
        Self { w1, b1: Array1::zeros(hidden), w2, b2: Array1::zeros(classes) }
    }

    pub fn n_classes(&self) -> usize {
        self.b2.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w1.nrows()
    }

    /// Softmax class probabilities, shape `(n, classes)`.
    pub fn probabilities(&self, x: ArrayView2<'_, f64>) -> Array2<f64> {
        let hidden = (x.dot(&self.w1) + &self.b1).mapv(|v| v.max(0.0));
        let mut logits = hidden.dot(&self.w2) + &self.b2;
        for mut row in logits.rows_mut() {
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            row.mapv_inplace(|v| (v - max).exp());
            let sum = row.sum();
            row.mapv_inplace(|v| v / sum);
        }
        logits
    }

    /// Predicted class per row; ties resolve to the lowest index.
    pub fn predict(&self, x: ArrayView2<'_, f64>) -> Vec<usize> {
        self.probabilities(x)
            .rows()
            .into_iter()
            .map(|row| {
                let mut best = 0usize;
                let mut best_p = f64::NEG_INFINITY;
                for (i, &p) in row.iter().enumerate() {
                    if p > best_p {
                        best_p = p;
                        best = i;
                    }
                }
                best
            })
            .collect()
    }
}

struct Gradients {
    w1: Array2<f64>,
    b1: Array1<f64>,
    w2: Array2<f64>,
    b2: Array1<f64>,
}

/// Mean cross-entropy of a batch under the current parameters.
fn batch_loss(c: &MlpClassifier, x: ArrayView2<'_, f64>, y: &[usize]) -> f64 {
    let probs = c.probabilities(x);
    let n = y.len() as f64;
    -y.iter()
        .enumerate()
        .map(|(i, &target)| probs[(i, target)].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n
}

/// Analytic gradient of [`batch_loss`] with respect to every parameter.
fn batch_gradients(c: &MlpClassifier, x: ArrayView2<'_, f64>, y: &[usize]) -> (f64, Gradients) {
    let n = y.len() as f64;
    let h_pre = x.dot(&c.w1) + &c.b1;
    let h = h_pre.mapv(|v| v.max(0.0));
    let mut probs = h.dot(&c.w2) + &c.b2;
    for mut row in probs.rows_mut() {
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    let loss = -y
        .iter()
        .enumerate()
        .map(|(i, &target)| probs[(i, target)].max(f64::MIN_POSITIVE).ln())
        .sum::<f64>()
        / n;

    // d(loss)/d(logits) = (probs - onehot) / n
    let mut dlogits = probs;
    for (i, &target) in y.iter().enumerate() {
        dlogits[(i, target)] -= 1.0;
    }
    dlogits.mapv_inplace(|v| v / n);

    let dw2 = h.t().dot(&dlogits);
    let db2 = dlogits.sum_axis(Axis(0));
    let mut dh = dlogits.dot(&c.w2.t());
    dh.zip_mut_with(&h_pre, |g, &pre| {
        if pre <= 0.0 {
            *g = 0.0;
        }
    });
    let dw1 = x.t().dot(&dh);
    let db1 = dh.sum_axis(Axis(0));
    (loss, Gradients { w1: dw1, b1: db1, w2: dw2, b2: db2 })
}

/// Trains the classifier. Requires finite inputs, labels below `n_classes`,
/// and at least two distinct classes in the training set. A non-finite loss
/// aborts with the offending epoch.
pub fn train_mlp(
    x: ArrayView2<'_, f64>,
    y: &[usize],
    n_classes: usize,
    cfg: &ProbeConfig,
    rng: &mut ChaCha8Rng,
) -> Result<TrainedMlp, ProbeError> {
    if x.nrows() != y.len() || y.is_empty() {
        return Err(ProbeError::InvalidConfig(format!(
            "{} rows but {} labels",
            x.nrows(),
            y.len()
        )));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(ProbeError::InvalidConfig(format!(
            "label {bad} out of range for {n_classes} classes"
        )));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(ProbeError::InvalidConfig("non-finite value in inputs".into()));
    }
    let mut seen = vec![false; n_classes];
    for &c in y {
        seen[c] = true;
    }
    if seen.iter().filter(|&&s| s).count() < 2 {
        return Err(ProbeError::SingleClassTrainingSet);
    }

    let mut classifier = MlpClassifier::init(x.ncols(), cfg.hidden_units, n_classes, rng);
    let mut order: Vec<usize> = (0..y.len()).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x.select(Axis(0), chunk);
            let yb: Vec<usize> = chunk.iter().map(|&i| y[i]).collect();
            let (loss, g) = batch_gradients(&classifier, xb.view(), &yb);
            if !loss.is_finite() {
                return Err(ProbeError::Diverged { epoch: epoch + 1 });
            }
            loss_sum += loss;
            batches += 1;
            let lr = cfg.learning_rate;
            classifier.w1.scaled_add(-lr, &g.w1);
            classifier.b1.scaled_add(-lr, &g.b1);
            classifier.w2.scaled_add(-lr, &g.w2);
            classifier.b2.scaled_add(-lr, &g.b2);
        }
        epoch_losses.push(loss_sum / batches as f64);
    }
    Ok(TrainedMlp { classifier, epoch_losses })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use rand_distr::{Distribution, Normal};

    /// Two Gaussian blobs at ±3 with sigma 0.5 in the first coordinate.
    fn blobs(n: usize, d: usize, seed: u64) -> (Array2<f64>, Vec<usize>) {
        let mut rng = stream_rng(seed, "test.blobs");
        let noise = Normal::new(0.0, 0.5).unwrap();
        let mut x = Array2::zeros((n, d));
        let mut y = Vec::with_capacity(n);
        for i in 0..n {
            let class = i % 2;
            y.push(class);
            let center = if class == 0 { -3.0 } else { 3.0 };
            for j in 0..d {
                let base = if j == 0 { center } else { 0.0 };
                x[(i, j)] = base + noise.sample(&mut rng);
            }
        }
        (x, y)
    }

    /// Nearest-centroid oracle: confirms the blobs are linearly separable
    /// before the MLP is asked to fit them.
    fn nearest_centroid_accuracy(x: &Array2<f64>, y: &[usize]) -> f64 {
        let d = x.ncols();
        let mut centroids = vec![vec![0.0f64; d]; 2];
        let mut counts = [0usize; 2];
        for (row, &class) in x.rows().into_iter().zip(y) {
            counts[class] += 1;
            for (j, v) in row.iter().enumerate() {
                centroids[class][j] += v;
            }
        }
        for (c, count) in centroids.iter_mut().zip(counts) {
            for v in c.iter_mut() {
                *v /= count as f64;
            }
        }
        let mut correct = 0usize;
        for (row, &class) in x.rows().into_iter().zip(y) {
            let dist = |c: &Vec<f64>| -> f64 {
                row.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum()
            };
            let pred = if dist(&centroids[0]) <= dist(&centroids[1]) { 0 } else { 1 };
            if pred == class {
                correct += 1;
            }
        }
        correct as f64 / y.len() as f64
    }

    #[test]
    fn separable_blobs_reach_high_training_accuracy() {
        let (x, y) = blobs(200, 8, 31);
        assert_eq!(nearest_centroid_accuracy(&x, &y), 1.0, "oracle: blobs must be separable");

        let cfg = ProbeConfig::default();
        let mut rng = stream_rng(31, "test.train");
        let trained = train_mlp(x.view(), &y, 2, &cfg, &mut rng).unwrap();
        let preds = trained.classifier.predict(x.view());
        let acc = preds.iter().zip(&y).filter(|(p, t)| p == t).count() as f64 / y.len() as f64;
        assert!(acc >= 0.99, "training accuracy {acc}");
        assert!(trained.final_loss().is_finite());
    }

    #[test]
    fn shuffled_labels_score_near_chance_on_holdout() {
        let (x, mut y) = blobs(200, 8, 32);
        let mut rng = stream_rng(32, "test.shuffle");
        y.shuffle(&mut rng);
        // Train on 160, evaluate on 40. The [0.4, 0.7] band is the
        // plausible range for Binomial(40, ~0.5) plus slight memorization.
        let x_train = x.slice(ndarray::s![..160, ..]);
        let y_train = &y[..160];
        let x_eval = x.slice(ndarray::s![160.., ..]);
        let y_eval = &y[160..];
        let cfg = ProbeConfig::default();
        let trained = train_mlp(x_train, y_train, 2, &cfg, &mut rng).unwrap();
        let preds = trained.classifier.predict(x_eval);
        let acc =
            preds.iter().zip(y_eval).filter(|(p, t)| p == t).count() as f64 / y_eval.len() as f64;
        assert!((0.4..=0.7).contains(&acc), "holdout accuracy {acc}");
    }

    #[test]
    fn single_class_training_set_is_error() {
        let x = Array2::zeros((4, 3));
        let y = vec![1, 1, 1, 1];
        let cfg = ProbeConfig::default();
        let mut rng = stream_rng(1, "test");
        assert!(matches!(
            train_mlp(x.view(), &y, 2, &cfg, &mut rng),
            Err(ProbeError::SingleClassTrainingSet)
        ));
    }

    #[test]
    fn analytic_gradient_matches_central_differences() {
        let (x, y) = blobs(5, 4, 33);
        let mut rng = stream_rng(33, "test.grad");
        let classifier = MlpClassifier::init(4, 3, 2, &mut rng);
        let (_, grads) = batch_gradients(&classifier, x.view(), &y);

        let step = 1e-5;
        let rel_tol = 1e-4;
        let mut check = |get: &dyn Fn(&MlpClassifier) -> f64,
                         set: &dyn Fn(&mut MlpClassifier, f64),
                         analytic: f64,
                         name: &str| {
            let base = get(&classifier);
            let mut plus = classifier.clone();
            set(&mut plus, base + step);
            let mut minus = classifier.clone();
            set(&mut minus, base - step);
            let fd = (batch_loss(&plus, x.view(), &y) - batch_loss(&minus, x.view(), &y))
                / (2.0 * step);
            let denom = analytic.abs().max(fd.abs()).max(1e-8);
            assert!(
                ((fd - analytic) / denom).abs() < rel_tol,
                "{name}: fd {fd} vs analytic {analytic}"
            );
        };

        for i in 0..4 {
            for j in 0..3 {
                check(
                    &|c| c.w1[(i, j)],
                    &move |c, v| c.w1[(i, j)] = v,
                    grads.w1[(i, j)],
                    "w1",
                );
            }
        }
        for j in 0..3 {
            check(&|c| c.b1[j], &move |c, v| c.b1[j] = v, grads.b1[j], "b1");
        }
        for i in 0..3 {
            for j in 0..2 {
                check(
                    &|c| c.w2[(i, j)],
                    &move |c, v| c.w2[(i, j)] = v,
                    grads.w2[(i, j)],
                    "w2",
                );
            }
        }
        for j in 0..2 {
            check(&|c| c.b2[j], &move |c, v| c.b2[j] = v, grads.b2[j], "b2");
        }
    }

    #[test]
    fn training_is_reproducible() {
        let (x, y) = blobs(60, 4, 34);
        let cfg = ProbeConfig { epochs: 5, ..ProbeConfig::default() };
        let mut rng1 = stream_rng(34, "test.repro");
        let mut rng2 = stream_rng(34, "test.repro");
        let a = train_mlp(x.view(), &y, 2, &cfg, &mut rng1).unwrap();
        let b = train_mlp(x.view(), &y, 2, &cfg, &mut rng2).unwrap();
        assert_eq!(a.classifier.w1, b.classifier.w1);
        assert_eq!(a.classifier.w2, b.classifier.w2);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }
}
