//! Analysis toolkit for the categorical structure of word-embedding spaces.
//!
//! The library covers the full desk-scale pipeline: loading and persisting
//! embedding matrices ([`embedding`]), aligning token/category lexicons and
//! building indicator vectors ([`lexicon`]), principal component analysis
//! with canonical component signs ([`pca`]), Pearson correlation of component
//! scores against category indicators ([`correlation`]), a cross-validated
//! probing classifier ([`probe`]), a skip-gram negative-sampling trainer
//! ([`sgns`]), histogram/scatter/region diagnostics ([`report`]), planted
//! fixture generators ([`synth`]), and reproducibility manifests
//! ([`manifest`]).

pub mod correlation;
pub mod embedding;
pub mod lexicon;
pub mod pca;
pub mod probe;
pub mod rng;
pub mod sgns;
pub mod svg;

pub use correlation::{correlate, pearson, CorrelationError, CorrelationMatrix};
pub use embedding::{EmbeddingError, EmbeddingMatrix, VectorFormat};
pub use lexicon::{Alignment, IndicatorVector, Lexicon, LexiconError};
pub use pca::{PcaError, PcaModel, Projection};
pub use probe::{crossvalidate, CrossValReport, ProbeConfig, ProbeError};
pub use sgns::{Corpus, SgnsConfig, SgnsError, SgnsOutput};
