//! Word vocabulary with frequency-based ordering.

use std::collections::HashMap;

use crate::corpus::CorpusStore;

/// Words at or above a frequency threshold, ordered by descending frequency
/// with lexicographic tie-breaking; ids are contiguous from 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocabulary {
    words: Vec<String>,
    freqs: Vec<u64>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn from_entries(mut entries: Vec<(String, u64)>) -> Self {
        entries.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut vocab = Vocabulary::default();
        for (word, freq) in entries {
            vocab.index.insert(word.clone(), vocab.words.len());
            vocab.words.push(word);
            vocab.freqs.push(freq);
        }
        vocab
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn word(&self, id: usize) -> &str {
        &self.words[id]
    }

    pub fn freq(&self, id: usize) -> u64 {
        self.freqs[id]
    }

    pub fn freqs(&self) -> &[u64] {
        &self.freqs
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }
}

/// Counts tokens over every stored sentence and keeps words with
/// frequency >= `min_count`.
pub fn build_vocab(store: &CorpusStore, min_count: u64) -> Vocabulary {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for sentence in &store.sentences {
        for token in &sentence.tokens {
            *counts.entry(token.as_str()).or_insert(0) += 1;
        }
    }
    let entries: Vec<(String, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count)
        .map(|(w, c)| (w.to_string(), c))
        .collect();
    Vocabulary::from_entries(entries)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn orders_by_descending_frequency_then_lexicographic() {
        let v = Vocabulary::from_entries(vec![
            ("beta".into(), 3),
            ("alpha".into(), 3),
            ("common".into(), 10),
            ("rare".into(), 1),
        ]);
        assert_eq!(v.words(), ["common", "alpha", "beta", "rare"]);
        assert_eq!(v.get("alpha"), Some(1));
        assert_eq!(v.freq(0), 10);
    }

    #[test]
    fn min_count_filters_rare_words() {
        let corpus = "d1\t2008-01-01\tAlpha alpha alpha beta beta gamma\n";
        let store = CorpusStore::ingest_strings(corpus, "e\tg\tzzz\n").unwrap();
        let v = build_vocab(&store, 2);
        assert_eq!(v.words(), ["alpha", "beta"]);
        assert_eq!(v.get("gamma"), None);
    }

    #[test]
    fn empty_when_nothing_reaches_min_count() {
        let corpus = "d1\t2008-01-01\tOne of each word only\n";
        let store = CorpusStore::ingest_strings(corpus, "e\tg\tzzz\n").unwrap();
        assert!(build_vocab(&store, 2).is_empty());
    }
}
