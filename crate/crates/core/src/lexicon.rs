//! Token→category lexicons and indicator vectors.
//!
//! A lexicon maps word forms to sets of category tags (a form carrying more
//! than one tag is *multivalent*). Lexicons load from UTF-8 TSV files with
//! one `token<TAB>tag` pair per line; repeated tokens accumulate their tag
//! sets. Indicator vectors mark membership of one category over a vocabulary
//! aligned between an embedding matrix and the lexicon.

use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("token {token:?} is multivalent ({tags:?}); filter the lexicon to univalent entries first")]
    MultivalentToken { token: String, tags: Vec<String> },
    #[error("no vocabulary token is covered by the lexicon")]
    EmptyAlignment,
}

/// Mapping token → set of category tags, plus the ordered tag inventory.
///
/// The tagset preserves first-appearance order, which drives the ordering of
/// indicator vectors and every downstream export.
#[derive(Debug, Clone)]
pub struct Lexicon {
    entries: HashMap<String, BTreeSet<String>>,
    tagset: Vec<String>,
}

/// Binary membership vector for one category over an aligned vocabulary.
#[derive(Debug, Clone)]
pub struct IndicatorVector {
    category: String,
    values: Vec<u8>,
    positives: usize,
    constant: bool,
}

impl IndicatorVector {
    pub fn category(&self) -> &str {
        &self.category
    }

    /// Entries are exactly 0 or 1.
    pub fn values(&self) -> &[u8] {
        &self.values
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn positives(&self) -> usize {
        self.positives
    }

    /// True when every aligned token is a member; constant vectors are
    /// useless for correlation and are skipped there.
    pub fn is_constant(&self) -> bool {
        self.constant
    }
}

/// A vocabulary aligned between an embedding matrix and a lexicon, with one
/// indicator per category that has at least one member.
#[derive(Debug, Clone)]
pub struct Alignment {
    /// Indices into the original vocabulary, ascending.
    pub rows: Vec<usize>,
    /// Tokens at those indices.
    pub tokens: Vec<String>,
    pub indicators: Vec<IndicatorVector>,
}

impl Alignment {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

impl Lexicon {
    /// Builds a lexicon from (token, tag) pairs; repeated tokens accumulate.
    pub fn from_pairs<I, S>(pairs: I) -> Lexicon
    where
        I: IntoIterator<Item = (S, S)>,
        S: Into<String>,
    {
        let mut lex = Lexicon { entries: HashMap::new(), tagset: Vec::new() };
        for (token, tag) in pairs {
            lex.insert(token.into(), tag.into());
        }
        lex
    }

    fn insert(&mut self, token: String, tag: String) {
        if !self.tagset.contains(&tag) {
            self.tagset.push(tag.clone());
        }
        self.entries.entry(token).or_default().insert(tag);
    }

    /// Loads the TSV format. Each line must contain exactly two non-empty
    /// fields separated by one tab; anything else is reported with its
    /// 1-based line number.
    pub fn load(path: &Path) -> Result<Lexicon, LexiconError> {
        let display = path.display().to_string();
        let content = fs::read_to_string(path)
            .map_err(|source| LexiconError::Io { path: display.clone(), source })?;
        let mut lex = Lexicon { entries: HashMap::new(), tagset: Vec::new() };
        for (off, raw) in content.lines().enumerate() {
            let line = raw.strip_suffix('\r').unwrap_or(raw);
            let lineno = off + 1;
            let parse_err = |msg: String| LexiconError::Parse {
                path: display.clone(),
                line: lineno,
                msg,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected 2 tab-separated fields, found {}",
                    fields.len()
                )));
            }
            let (token, tag) = (fields[0], fields[1]);
            if token.is_empty() {
                return Err(parse_err("empty token".into()));
            }
            if tag.is_empty() {
                return Err(parse_err("empty tag".into()));
            }
            lex.insert(token.to_string(), tag.to_string());
        }
        Ok(lex)
    }

    /// Writes the TSV format with tokens sorted for stable output.
    pub fn write(&self, path: &Path) -> Result<(), LexiconError> {
        let display = path.display().to_string();
        let mut tokens: Vec<&String> = self.entries.keys().collect();
        tokens.sort();
        let mut out = String::new();
        for token in tokens {
            for tag in &self.entries[token] {
                out.push_str(token);
                out.push('\t');
                out.push_str(tag);
                out.push('\n');
            }
        }
        fs::write(path, out).map_err(|source| LexiconError::Io { path: display, source })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Ordered inventory of distinct tags (first-appearance order).
    pub fn tagset(&self) -> &[String] {
        &self.tagset
    }

    pub fn tags_of(&self, token: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(token)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.entries.contains_key(token)
    }

    pub fn is_univalent(&self) -> bool {
        self.entries.values().all(|tags| tags.len() == 1)
    }

    /// Number of multivalent forms.
    pub fn multivalent_count(&self) -> usize {
        self.entries.values().filter(|tags| tags.len() > 1).count()
    }

    /// Keeps only entries with exactly one tag. Idempotent; may yield an
    /// empty lexicon, which downstream operations reject.
    pub fn filter_univalent(&self) -> Lexicon {
        let entries: HashMap<String, BTreeSet<String>> = self
            .entries
            .iter()
            .filter(|(_, tags)| tags.len() == 1)
            .map(|(token, tags)| (token.clone(), tags.clone()))
            .collect();
        let tagset = self
            .tagset
            .iter()
            .filter(|tag| entries.values().any(|tags| tags.contains(*tag)))
            .cloned()
            .collect();
        Lexicon { entries, tagset }
    }

    /// Builds one indicator per tag with at least one member, over the
    /// subsequence of `vocab` covered by this lexicon.
    ///
    /// The lexicon must be univalent; a multivalent entry among the aligned
    /// tokens is an error (the caller was expected to filter first). For a
    /// univalent lexicon the returned indicators partition the aligned
    /// vocabulary: they sum element-wise to the all-ones vector.
    pub fn indicators(&self, vocab: &[String]) -> Result<Alignment, LexiconError> {
        self.build_alignment(vocab, false)
    }

    /// Like [`Lexicon::indicators`] but tolerates multivalent entries: a
    /// token counts as a member of every tag it carries. The partition
    /// property does not hold for the result.
    pub fn membership_indicators(&self, vocab: &[String]) -> Result<Alignment, LexiconError> {
        self.build_alignment(vocab, true)
    }

    fn build_alignment(
        &self,
        vocab: &[String],
        allow_multivalent: bool,
    ) -> Result<Alignment, LexiconError> {
        let mut rows = Vec::new();
        let mut tokens = Vec::new();
        for (i, token) in vocab.iter().enumerate() {
            if let Some(tags) = self.entries.get(token) {
                if tags.len() > 1 && !allow_multivalent {
                    return Err(LexiconError::MultivalentToken {
                        token: token.clone(),
                        tags: tags.iter().cloned().collect(),
                    });
                }
                rows.push(i);
                tokens.push(token.clone());
            }
        }
        if rows.is_empty() {
            return Err(LexiconError::EmptyAlignment);
        }
        let mut indicators = Vec::new();
        for tag in &self.tagset {
            let mut values = vec![0u8; tokens.len()];
            let mut positives = 0usize;
            for (slot, token) in tokens.iter().enumerate() {
                if self.entries[token].contains(tag) {
                    values[slot] = 1;
                    positives += 1;
                }
            }
            if positives == 0 {
                continue;
            }
            let constant = positives == tokens.len();
            indicators.push(IndicatorVector { category: tag.clone(), values, positives, constant });
        }
        Ok(Alignment { rows, tokens, indicators })
    }
}
