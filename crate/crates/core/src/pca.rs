//! Principal component analysis with canonical component signs.
//!
//! Components are the right singular vectors of the mean-centered data
//! matrix, ordered by explained variance (`σ²/(V−1)`). Because the
//! orientation of a singular vector is arbitrary, every component row is
//! canonicalized so that its coordinate of largest absolute value is
//! positive (ties broken by the lowest index); two fits of the same data are
//! then bit-identical and fits of different runs are comparable.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView2, Axis};
use thiserror::Error;

use crate::embedding::EmbeddingMatrix;

#[derive(Debug, Error)]
pub enum PcaError {
    #[error("need at least 2 rows to fit, got {0}")]
    TooFewRows(usize),
    #[error("k = {k} out of range, expected 1 <= k <= {max}")]
    KOutOfRange { k: usize, max: usize },
    #[error("dimension mismatch: model has D = {model}, data has D = {data}")]
    DimensionMismatch { model: usize, data: usize },
    #[error("projection has {proj} columns but model has k = {k}")]
    ProjectionMismatch { proj: usize, k: usize },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("singular value decomposition did not converge")]
    NoConvergence,
}

/// Fitted PCA basis: mean vector, orthonormal component rows ordered by
/// non-increasing explained variance, and canonical signs.
#[derive(Debug, Clone)]
pub struct PcaModel {
    mean: Array1<f64>,
    components: Array2<f64>,
    explained_variance: Vec<f64>,
    degenerate: bool,
}

/// Component scores of a data set under a [`PcaModel`].
#[derive(Debug, Clone)]
pub struct Projection {
    coords: Array2<f64>,
    model_ref: String,
}

impl Projection {
    pub fn new(coords: Array2<f64>, model_ref: impl Into<String>) -> Self {
        Self { coords, model_ref: model_ref.into() }
    }

    pub fn coords(&self) -> ArrayView2<'_, f64> {
        self.coords.view()
    }

    /// Number of projected rows.
    pub fn len(&self) -> usize {
        self.coords.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.nrows() == 0
    }

    /// Number of components.
    pub fn k(&self) -> usize {
        self.coords.ncols()
    }

    pub fn model_ref(&self) -> &str {
        &self.model_ref
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.coords.column(j).to_vec()
    }

    /// Projection restricted to the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Projection {
        Projection {
            coords: self.coords.select(Axis(0), rows),
            model_ref: self.model_ref.clone(),
        }
    }
}

/// Fits a `k`-component model to an embedding matrix by singular value
/// decomposition of the mean-centered data.
///
/// Requires `V >= 2` and `1 <= k <= min(V-1, D)`. Rank-deficient input
/// yields trailing zero variances; duplicate singular values among the
/// retained components set the `degenerate` flag (component order then falls
/// back to the decomposition's deterministic index order).
pub fn fit(m: &EmbeddingMatrix, k: usize) -> Result<PcaModel, PcaError> {
    fit_view(m.vectors(), k)
}

/// [`fit`] over a raw data view; rows are samples, columns are dimensions.
pub fn fit_view(data: ArrayView2<'_, f64>, k: usize) -> Result<PcaModel, PcaError> {
    let v = data.nrows();
    let d = data.ncols();
    if v < 2 {
        return Err(PcaError::TooFewRows(v));
    }
    let max_k = (v - 1).min(d);
    if k == 0 || k > max_k {
        return Err(PcaError::KOutOfRange { k, max: max_k });
    }

    let mean = data.mean_axis(Axis(0)).expect("v >= 2");
    let centered = &data - &mean;
    let flat = centered.as_slice().expect("freshly computed array is contiguous");
    let mat = DMatrix::from_row_slice(v, d, flat);

    // Singular values come back sorted in descending order; the stable sort
    // below only reorders if the backend ever fails to.
    let svd = mat.try_svd(false, true, f64::EPSILON, 0).ok_or(PcaError::NoConvergence)?;
    let v_t = svd.v_t.expect("requested v_t");
    let singular = svd.singular_values;

    let mut order: Vec<usize> = (0..singular.len()).collect();
    order.sort_by(|&a, &b| {
        singular[b].partial_cmp(&singular[a]).expect("singular values are finite")
    });

    let denom = (v - 1) as f64;
    let mut components = Array2::zeros((k, d));
    let mut explained_variance = Vec::with_capacity(k);
    for (row, &idx) in order.iter().take(k).enumerate() {
        for col in 0..d {
            components[(row, col)] = v_t[(idx, col)];
        }
        let sigma = singular[idx];
        explained_variance.push(sigma * sigma / denom);
    }

    // Duplicate singular values make the component order (and any rotation
    // within the eigenspace) a backend artifact; flag it for the manifest.
    let sigma_max = singular[order[0]].max(f64::MIN_POSITIVE);
    let mut degenerate = false;
    for w in 0..k {
        if w + 1 < order.len() {
            let a = singular[order[w]];
            let b = singular[order[w + 1]];
            if (a - b).abs() <= 1e-9 * sigma_max {
                degenerate = true;
                break;
            }
        }
    }

    let mut model = PcaModel { mean, components, explained_variance, degenerate };
    model.canonicalize_signs();
    Ok(model)
}

impl PcaModel {
    pub fn k(&self) -> usize {
        self.components.nrows()
    }

    pub fn dim(&self) -> usize {
        self.components.ncols()
    }

    pub fn mean(&self) -> &Array1<f64> {
        &self.mean
    }

    /// Orthonormal component rows, shape `(k, D)`.
    pub fn components(&self) -> ArrayView2<'_, f64> {
        self.components.view()
    }

    /// Sample variance of the fitting data along each component,
    /// non-increasing.
    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// True when retained singular values were duplicated and the component
    /// order fell back to decomposition order.
    pub fn degenerate(&self) -> bool {
        self.degenerate
    }

    /// Applies the canonical-sign rule to every component row: the
    /// coordinate of largest absolute value is made positive, ties broken by
    /// the lowest index. Idempotent; [`fit`] applies it already.
    pub fn canonicalize_signs(&mut self) {
        for mut row in self.components.rows_mut() {
            let mut best = 0usize;
            let mut best_abs = 0.0f64;
            for (i, v) in row.iter().enumerate() {
                if v.abs() > best_abs {
                    best_abs = v.abs();
                    best = i;
                }
            }
            if best_abs > 0.0 && row[best] < 0.0 {
                row.mapv_inplace(|v| -v);
            }
        }
    }

    /// Component scores of `m`: `(vectors − mean) · componentsᵀ`.
    pub fn project(&self, m: &EmbeddingMatrix) -> Result<Projection, PcaError> {
        let coords = self.project_view(m.vectors())?;
        Ok(Projection {
            coords,
            model_ref: format!("pca(k={},d={}) of {}", self.k(), self.dim(), m.source_tag()),
        })
    }

    /// [`PcaModel::project`] over a raw data view.
    pub fn project_view(&self, data: ArrayView2<'_, f64>) -> Result<Array2<f64>, PcaError> {
        if data.ncols() != self.dim() {
            return Err(PcaError::DimensionMismatch { model: self.dim(), data: data.ncols() });
        }
        let centered = &data - &self.mean;
        Ok(centered.dot(&self.components.t()))
    }

    /// Maps component scores back to the original space:
    /// `coords · components + mean`. Exact when `k = D`.
    pub fn reconstruct(&self, proj: &Projection) -> Result<Array2<f64>, PcaError> {
        if proj.k() != self.k() {
            return Err(PcaError::ProjectionMismatch { proj: proj.k(), k: self.k() });
        }
        Ok(proj.coords.dot(&self.components) + &self.mean)
    }

    /// Persists the model as a text artifact: header `"K D"`, the mean line,
    /// `K` component lines, and a variance line. Values use the shortest
    /// exact representation, so save/load round-trips bit-exactly.
    pub fn save(&self, path: &Path) -> Result<(), PcaError> {
        let display = path.display().to_string();
        let mut out = String::new();
        out.push_str(&format!("{} {}\n", self.k(), self.dim()));
        push_line(&mut out, self.mean.iter());
        for row in self.components.rows() {
            push_line(&mut out, row.iter());
        }
        push_line(&mut out, self.explained_variance.iter());
        fs::write(path, out).map_err(|source| PcaError::Io { path: display, source })
    }

    /// Loads a model saved by [`PcaModel::save`].
    pub fn load(path: &Path) -> Result<PcaModel, PcaError> {
        let display = path.display().to_string();
        let content = fs::read_to_string(path)
            .map_err(|source| PcaError::Io { path: display.clone(), source })?;
        let parse_err = |line: usize, msg: String| PcaError::Parse {
            path: display.clone(),
            line,
            msg,
        };
        let mut lines = content.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| parse_err(1, "missing header".into()))?;
        let fields: Vec<&str> = header.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(parse_err(1, format!("header must be \"K D\", got {header:?}")));
        }
        let k: usize =
            fields[0].parse().map_err(|_| parse_err(1, format!("invalid K {:?}", fields[0])))?;
        let d: usize =
            fields[1].parse().map_err(|_| parse_err(1, format!("invalid D {:?}", fields[1])))?;
        if k == 0 || d == 0 {
            return Err(parse_err(1, "K and D must be >= 1".into()));
        }

        let mut numbers = |expected: usize| -> Result<Vec<f64>, PcaError> {
            let (off, line) =
                lines.next().ok_or_else(|| parse_err(0, "unexpected end of file".into()))?;
            let lineno = off + 1;
            let values: Result<Vec<f64>, _> = line
                .split(' ')
                .map(|f| {
                    f.parse::<f64>()
                        .map_err(|_| parse_err(lineno, format!("non-numeric field {f:?}")))
                })
                .collect();
            let values = values?;
            if values.len() != expected {
                return Err(parse_err(
                    lineno,
                    format!("expected {expected} values, found {}", values.len()),
                ));
            }
            if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
                return Err(parse_err(lineno, format!("non-finite value {bad}")));
            }
            Ok(values)
        };

        let mean = Array1::from_vec(numbers(d)?);
        let mut components = Array2::zeros((k, d));
        for row in 0..k {
            let values = numbers(d)?;
            for (col, v) in values.into_iter().enumerate() {
                components[(row, col)] = v;
            }
        }
        let explained_variance = numbers(k)?;
        if explained_variance.windows(2).any(|w| w[1] > w[0])
            || explained_variance.iter().any(|&v| v < 0.0)
        {
            return Err(parse_err(0, "variances must be non-negative and non-increasing".into()));
        }
        let sigma_max = explained_variance.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
        let degenerate = explained_variance
            .windows(2)
            .any(|w| (w[0] - w[1]).abs() <= 1e-9 * sigma_max);
        Ok(PcaModel { mean, components, explained_variance, degenerate })
    }
}

fn push_line<'a>(out: &mut String, values: impl Iterator<Item = &'a f64>) {
    let mut first = true;
    for v in values {
        if !first {
            out.push(' ');
        }
        out.push_str(&format!("{v}"));
        first = false;
    }
    out.push('\n');
}
