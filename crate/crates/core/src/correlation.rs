//! Pearson correlation of component scores against category indicators.
//!
//! The categories × components grid of coefficients is the central
//! diagnostic: a cell far from zero means the category concentrates along
//! that principal direction. Correlating a binary indicator with a
//! continuous score is the point-biserial special case of Pearson, so one
//! implementation serves both.
//!
//! Correlation against a constant input is undefined, not zero; such cells
//! are carried as absent and exported as empty fields.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use thiserror::Error;

use crate::lexicon::IndicatorVector;
use crate::pca::Projection;
use crate::rng::stream_rng;
use crate::svg;

#[derive(Debug, Error)]
pub enum CorrelationError {
    #[error("length mismatch: x has {x}, y has {y}")]
    LengthMismatch { x: usize, y: usize },
    #[error("need at least 3 samples, got {0}")]
    TooFewSamples(usize),
    #[error("undefined correlation: {0} input is constant")]
    ConstantInput(&'static str),
    #[error("indicator {category:?} has {len} entries, projection has {rows} rows")]
    IndicatorMismatch { category: String, len: usize, rows: usize },
    #[error("no indicators given")]
    NoIndicators,
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Pearson correlation coefficient of two equal-length samples.
///
/// `r = Σ(xᵢ−x̄)(yᵢ−ȳ) / √(Σ(xᵢ−x̄)² · Σ(yᵢ−ȳ)²)`, clamped to `[-1, 1]`
/// against rounding. Requires `n >= 3`; a constant input yields a
/// distinguished error rather than a silent zero.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<f64, CorrelationError> {
    if x.len() != y.len() {
        return Err(CorrelationError::LengthMismatch { x: x.len(), y: y.len() });
    }
    if x.len() < 3 {
        return Err(CorrelationError::TooFewSamples(x.len()));
    }
    if is_constant(x) {
        return Err(CorrelationError::ConstantInput("x"));
    }
    if is_constant(y) {
        return Err(CorrelationError::ConstantInput("y"));
    }
    let n = x.len() as f64;
    let mean_x: f64 = x.iter().sum::<f64>() / n;
    let mean_y: f64 = y.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&xi, &yi) in x.iter().zip(y) {
        let dx = xi - mean_x;
        let dy = yi - mean_y;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CorrelationError::ConstantInput("x"));
    }
    if syy == 0.0 {
        return Err(CorrelationError::ConstantInput("y"));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

fn is_constant(values: &[f64]) -> bool {
    values.windows(2).all(|w| w[0] == w[1])
}

/// Location and value of the strongest coefficient in a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaxCell {
    pub tag_index: usize,
    pub component: usize,
    pub r: f64,
}

/// Categories × components grid of Pearson coefficients.
#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    tags: Vec<String>,
    k: usize,
    n: usize,
    cells: Vec<Option<f64>>,
    max_abs: Option<MaxCell>,
}

impl CorrelationMatrix {
    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Sample count behind every cell.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Coefficient for (tag row, component column); `None` marks an
    /// undefined correlation (constant input).
    pub fn r(&self, tag: usize, component: usize) -> Option<f64> {
        self.cells[tag * self.k + component]
    }

    /// Strongest cell by absolute value, if any cell is defined.
    pub fn max_abs(&self) -> Option<MaxCell> {
        self.max_abs
    }

    /// Writes the grid as CSV (`tag,PC1,…`) with coefficients to six
    /// decimals, plus an SVG heatmap colored by signed magnitude next to it
    /// (same stem, `.svg` extension). Undefined cells are empty in the CSV
    /// and gray in the SVG.
    pub fn heatmap_export(&self, csv_path: &Path) -> Result<(), CorrelationError> {
        let io_err = |path: &Path, source| CorrelationError::Io {
            path: path.display().to_string(),
            source,
        };
        let mut out = String::from("tag");
        for j in 0..self.k {
            out.push_str(&format!(",PC{}", j + 1));
        }
        out.push('\n');
        for (t, tag) in self.tags.iter().enumerate() {
            out.push_str(&svg::csv_field(tag));
            for j in 0..self.k {
                out.push(',');
                if let Some(r) = self.r(t, j) {
                    out.push_str(&format!("{r:.6}"));
                }
            }
            out.push('\n');
        }
        fs::write(csv_path, out).map_err(|e| io_err(csv_path, e))?;

        let svg_path = csv_path.with_extension("svg");
        let doc = svg::correlation_heatmap(self, &svg::SvgOptions::default());
        fs::write(&svg_path, doc).map_err(|e| io_err(&svg_path, e))
    }
}

/// Correlates every projection column with every indicator.
///
/// Indicator lengths must equal the projection's row count (align both to
/// the same vocabulary first). Constant indicators or constant score columns
/// produce absent cells. Also records the strongest cell.
pub fn correlate(
    proj: &Projection,
    indicators: &[IndicatorVector],
) -> Result<CorrelationMatrix, CorrelationError> {
    if indicators.is_empty() {
        return Err(CorrelationError::NoIndicators);
    }
    let n = proj.len();
    if n < 3 {
        return Err(CorrelationError::TooFewSamples(n));
    }
    for ind in indicators {
        if ind.len() != n {
            return Err(CorrelationError::IndicatorMismatch {
                category: ind.category().to_string(),
                len: ind.len(),
                rows: n,
            });
        }
    }
    let k = proj.k();
    let columns: Vec<Vec<f64>> = (0..k).map(|j| proj.column(j)).collect();
    let cells: Vec<Option<f64>> = indicators
        .par_iter()
        .flat_map(|ind| {
            let y = ind.values_f64();
            columns
                .par_iter()
                .map(move |col| match pearson(col, &y) {
                    Ok(r) => Some(r),
                    Err(CorrelationError::ConstantInput(_)) => None,
                    // Lengths and n were validated above.
                    Err(_) => None,
                })
                .collect::<Vec<_>>()
        })
        .collect();

    let mut max_abs: Option<MaxCell> = None;
    for (idx, cell) in cells.iter().enumerate() {
        if let Some(r) = cell {
            let better = max_abs.map_or(true, |m| r.abs() > m.r.abs());
            if better {
                max_abs = Some(MaxCell { tag_index: idx / k, component: idx % k, r: *r });
            }
        }
    }

    Ok(CorrelationMatrix {
        tags: indicators.iter().map(|i| i.category().to_string()).collect(),
        k,
        n,
        cells,
        max_abs,
    })
}

/// Null distribution of |r| under label permutation: shuffles the indicator
/// `resamples` times (seeded) and returns the absolute coefficients, for the
/// user's judgment of how large a real coefficient must be to matter.
pub fn permutation_null(
    scores: &[f64],
    indicator: &IndicatorVector,
    resamples: usize,
    seed: u64,
) -> Result<Vec<f64>, CorrelationError> {
    let mut labels = indicator.values_f64();
    if labels.len() != scores.len() {
        return Err(CorrelationError::LengthMismatch { x: scores.len(), y: labels.len() });
    }
    let mut rng = stream_rng(seed, "correlation.permutation");
    let mut out = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        labels.shuffle(&mut rng);
        out.push(pearson(scores, &labels)?.abs());
    }
    Ok(out)
}
