//! Corpus ingestion for the skip-gram trainer.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use super::SgnsError;

/// Tokenized corpus with its frequency table. Tokens below the minimum
/// count are mapped out of the sentences before training; ids are assigned
/// by descending count with ties broken lexicographically, so the vocabulary
/// order is independent of hash iteration.
#[derive(Debug, Clone)]
pub struct Corpus {
    pub(crate) sentences: Vec<Vec<u32>>,
    tokens: Vec<String>,
    counts: Vec<u64>,
    total_tokens: u64,
}

impl Corpus {
    pub fn vocab_size(&self) -> usize {
        self.tokens.len()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    /// Occurrence count per token id, over the whole token stream.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    /// Total occurrences of kept tokens.
    pub fn total_tokens(&self) -> u64 {
        self.total_tokens
    }

    pub fn sentences(&self) -> &[Vec<u32>] {
        &self.sentences
    }
}

/// Reads a corpus file: UTF-8, one sentence per line, space-tokenized.
pub fn build_vocab(path: &Path, min_count: u64) -> Result<Corpus, SgnsError> {
    let content = fs::read_to_string(path)
        .map_err(|source| SgnsError::Io { path: path.display().to_string(), source })?;
    build_vocab_from_lines(content.lines(), min_count)
}

/// [`build_vocab`] over in-memory lines.
pub fn build_vocab_from_lines<'a>(
    lines: impl IntoIterator<Item = &'a str>,
    min_count: u64,
) -> Result<Corpus, SgnsError> {
    let raw: Vec<Vec<&str>> = lines
        .into_iter()
        .map(|line| line.split_whitespace().collect())
        .collect();

    let mut freq: HashMap<&str, u64> = HashMap::new();
    for sentence in &raw {
        for token in sentence {
            *freq.entry(token).or_insert(0) += 1;
        }
    }

    let mut kept: Vec<(&str, u64)> =
        freq.into_iter().filter(|&(_, c)| c >= min_count).collect();
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    if kept.is_empty() {
        return Err(SgnsError::EmptyCorpus { min_count });
    }

    let ids: HashMap<&str, u32> =
        kept.iter().enumerate().map(|(i, &(t, _))| (t, i as u32)).collect();
    let sentences: Vec<Vec<u32>> = raw
        .iter()
        .map(|sentence| sentence.iter().filter_map(|t| ids.get(t).copied()).collect())
        .filter(|s: &Vec<u32>| !s.is_empty())
        .collect();

    let tokens: Vec<String> = kept.iter().map(|&(t, _)| t.to_string()).collect();
    let counts: Vec<u64> = kept.iter().map(|&(_, c)| c).collect();
    let total_tokens = counts.iter().sum();
    Ok(Corpus { sentences, tokens, counts, total_tokens })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn min_count_filters() {
        let corpus = build_vocab_from_lines(["a b a", "b c"], 2).unwrap();
        assert_eq!(corpus.vocab_size(), 2);
        let mut pairs: Vec<(&str, u64)> = corpus
            .tokens()
            .iter()
            .map(String::as_str)
            .zip(corpus.counts().iter().copied())
            .collect();
        pairs.sort();
        assert_eq!(pairs, vec![("a", 2), ("b", 2)]);
        // `c` is mapped out of the sentences entirely.
        assert_eq!(corpus.sentences()[1].len(), 1);
    }

    #[test]
    fn min_count_one_keeps_singletons() {
        let corpus = build_vocab_from_lines(["a b a", "b c"], 1).unwrap();
        assert_eq!(corpus.vocab_size(), 3);
        assert!(corpus.tokens().iter().any(|t| t == "c"));
        assert_eq!(corpus.total_tokens(), 5);
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(matches!(
            build_vocab_from_lines([], 1),
            Err(SgnsError::EmptyCorpus { .. })
        ));
        assert!(matches!(
            build_vocab_from_lines(["a b"], 5),
            Err(SgnsError::EmptyCorpus { min_count: 5 })
        ));
    }

    #[test]
    fn ids_ordered_by_count_then_token() {
        let corpus = build_vocab_from_lines(["c c b b a"], 1).unwrap();
        assert_eq!(corpus.tokens(), &["b".to_string(), "c".to_string(), "a".to_string()]);
        assert_eq!(corpus.counts(), &[2, 2, 1]);
    }

    #[test]
    fn counts_consistent_with_stream() {
        let corpus = build_vocab_from_lines(["x y x", "y y z"], 1).unwrap();
        let mut from_stream = vec![0u64; corpus.vocab_size()];
        for sentence in corpus.sentences() {
            for &id in sentence {
                from_stream[id as usize] += 1;
            }
        }
        assert_eq!(from_stream, corpus.counts());
    }
}
