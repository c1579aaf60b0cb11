//! Ranked text excerpts explaining what drives an index value.
//!
//! Each mention-bearing sentence in a queried period is scored by the
//! classifier posterior of its trained vector, raised by the posteriors of
//! vectors inferred for its neighboring sentences. The top-scoring
//! excerpts, with one sentence of context on each side, describe the
//! period in the source's own words.

use std::collections::BTreeMap;
use std::path::Path;

use chrono::NaiveDate;

use crate::classify::RelevanceClassifier;
use crate::corpus::{CorpusStore, Sentence};
use crate::embed::EmbeddingModel;
use crate::signal::Period;
use crate::{Error, Result};

/// Excerpt scoring and ranking settings.
#[derive(Debug, Clone)]
pub struct DescribeConfig {
    /// Inferred vectors averaged per neighbor sentence.
    pub infer_samples: usize,
    /// Gradient steps per inference.
    pub infer_steps: usize,
    pub infer_lr: f64,
    pub seed: u64,
    /// Excerpts returned per query.
    pub k: usize,
}

impl Default for DescribeConfig {
    fn default() -> Self {
        DescribeConfig { infer_samples: 100, infer_steps: 50, infer_lr: 0.0125, seed: 42, k: 10 }
    }
}

impl DescribeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.infer_samples == 0 {
            return Err(Error::InvalidInput("infer_samples must be positive".into()));
        }
        if !(self.infer_lr > 0.0 && self.infer_lr.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "infer_lr must be positive and finite, got {}",
                self.infer_lr
            )));
        }
        if self.k == 0 {
            return Err(Error::InvalidInput("k must be positive".into()));
        }
        Ok(())
    }
}

/// One ranked result with its context sentences.
#[derive(Debug, Clone)]
pub struct Excerpt {
    /// 1-based rank within the query result.
    pub rank: usize,
    pub score: f64,
    pub sentence_id: u64,
    pub date: NaiveDate,
    pub doc_id: String,
    /// Lexicon ids of the entities the center sentence mentions.
    pub entity_ids: Vec<String>,
    pub prev: Option<String>,
    pub center: String,
    pub next: Option<String>,
}

/// A candidate dropped for repeating a higher-ranked sentence verbatim.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DedupRemoval {
    pub kept_sentence: u64,
    pub removed_sentence: u64,
}

/// The individual posterior terms an excerpt score maximizes over.
#[derive(Debug, Clone, Copy)]
pub struct ExcerptTerms {
    pub center: f64,
    pub prev: Option<f64>,
    pub next: Option<f64>,
}

impl ExcerptTerms {
    pub fn score(&self) -> f64 {
        let mut best = self.center;
        for term in [self.prev, self.next].into_iter().flatten() {
            best = best.max(term);
        }
        best
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E3779B97F4A7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D049BB133111EB);
    z ^ (z >> 31)
}

// Base RNG stream for inferring one sentence; sample i adds i. Keyed by
// the inferred sentence's id so parallel and serial scoring agree.
fn infer_stream(seed: u64, sentence_id: u64) -> u64 {
    splitmix64(seed ^ splitmix64(sentence_id))
}

// A neighbor shorter than one full context window after vocabulary lookup
// would keep its random initialization through inference; it carries no
// signal, so it contributes no term.
fn inferable(model: &EmbeddingModel, sentence: &Sentence) -> bool {
    let in_vocab = sentence.tokens.iter().filter(|t| model.vocab.get(t).is_some()).count();
    in_vocab > model.context_n
}

// Posterior of the mean of `samples` inferred vectors for one sentence.
fn neighbor_term(
    clf: &RelevanceClassifier,
    model: &EmbeddingModel,
    sentence: &Sentence,
    config: &DescribeConfig,
) -> Result<Option<f64>> {
    if !inferable(model, sentence) {
        return Ok(None);
    }
    let base = infer_stream(config.seed, sentence.sentence_id);
    let mut mean = vec![0.0; model.dim];
    for sample in 0..config.infer_samples {
        let v = model.infer_vector(
            &sentence.tokens,
            config.infer_steps,
            config.infer_lr,
            base.wrapping_add(sample as u64),
        )?;
        for (m, x) in mean.iter_mut().zip(&v) {
            *m += x;
        }
    }
    for m in &mut mean {
        *m /= config.infer_samples as f64;
    }
    Ok(Some(clf.posterior(&mean)))
}

/// Scores one sentence: the best of its own posterior and the posteriors
/// of its inferred neighbor means.
pub fn score_excerpt(
    store: &CorpusStore,
    clf: &RelevanceClassifier,
    model: &EmbeddingModel,
    sentence_id: u64,
    config: &DescribeConfig,
) -> Result<f64> {
    Ok(excerpt_terms(store, clf, model, sentence_id, config)?.score())
}

/// The center and neighbor posterior terms behind an excerpt score.
pub fn excerpt_terms(
    store: &CorpusStore,
    clf: &RelevanceClassifier,
    model: &EmbeddingModel,
    sentence_id: u64,
    config: &DescribeConfig,
) -> Result<ExcerptTerms> {
    config.validate()?;
    let center = clf.posterior(&model.extract_vector(sentence_id)?);
    let mut terms = ExcerptTerms { center, prev: None, next: None };
    if let Some(prev) = store.neighbor(sentence_id, -1) {
        terms.prev = neighbor_term(clf, model, prev, config)?;
    }
    if let Some(next) = store.neighbor(sentence_id, 1) {
        terms.next = neighbor_term(clf, model, next, config)?;
    }
    Ok(terms)
}

/// Ranks the period's mention-bearing sentences for the given entities.
///
/// An empty `entities` slice queries all entities. Sentences repeating an
/// earlier-ranked sentence's exact token sequence are dropped and logged.
pub fn rank_excerpts(
    store: &CorpusStore,
    clf: &RelevanceClassifier,
    model: &EmbeddingModel,
    period: Period,
    entities: &[u32],
    config: &DescribeConfig,
) -> Result<(Vec<Excerpt>, Vec<DedupRemoval>)> {
    config.validate()?;
    for &e in entities {
        if e as usize >= store.lexicon.len() {
            return Err(Error::InvalidInput(format!("unknown entity index {e}")));
        }
    }
    let mut candidates = Vec::new();
    for sentence in &store.sentences {
        if sentence.mentions.is_empty() {
            continue;
        }
        if !entities.is_empty() && !entities.iter().any(|e| sentence.mentions_entity(*e)) {
            continue;
        }
        if Period::of(period.kind, store.date_of(sentence)) != period {
            continue;
        }
        candidates.push(sentence);
    }
    let mut scored: Vec<(f64, &Sentence)> = candidates
        .iter()
        .map(|s| Ok((score_excerpt(store, clf, model, s.sentence_id, config)?, *s)))
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| {
        b.0.total_cmp(&a.0).then_with(|| {
            let ka = (store.date_of(a.1), store.doc_id_of(a.1), a.1.position);
            let kb = (store.date_of(b.1), store.doc_id_of(b.1), b.1.position);
            ka.cmp(&kb)
        })
    });
    // First occurrence of a token sequence is the best-ranked one.
    let mut kept_by_tokens: BTreeMap<&[String], u64> = BTreeMap::new();
    let mut removals = Vec::new();
    let mut excerpts = Vec::new();
    for (score, sentence) in scored {
        match kept_by_tokens.get(sentence.tokens.as_slice()) {
            Some(&kept) => {
                removals.push(DedupRemoval {
                    kept_sentence: kept,
                    removed_sentence: sentence.sentence_id,
                });
                continue;
            }
            None => {
                kept_by_tokens.insert(&sentence.tokens, sentence.sentence_id);
            }
        }
        if excerpts.len() == config.k {
            continue;
        }
        excerpts.push(Excerpt {
            rank: excerpts.len() + 1,
            score,
            sentence_id: sentence.sentence_id,
            date: store.date_of(sentence),
            doc_id: store.doc_id_of(sentence).to_string(),
            entity_ids: sentence
                .mentions
                .iter()
                .map(|&m| store.lexicon.entity_id(m as usize).to_string())
                .collect(),
            prev: store.neighbor(sentence.sentence_id, -1).map(|s| s.text.clone()),
            center: sentence.text.clone(),
            next: store.neighbor(sentence.sentence_id, 1).map(|s| s.text.clone()),
        });
    }
    Ok((excerpts, removals))
}

/// Writes excerpts as CSV with quoted text fields.
pub fn write_excerpt_csv(path: &Path, excerpts: &[Excerpt]) -> Result<()> {
    let label = path.display().to_string();
    let wrap = |e: csv::Error| Error::Data(format!("{label}: {e}"));
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(["rank", "score", "date", "doc_id", "entity_ids", "prev", "center", "next"])
        .map_err(wrap)?;
    for e in excerpts {
        w.write_record([
            e.rank.to_string(),
            e.score.to_string(),
            e.date.format(crate::corpus::DATE_FORMAT).to_string(),
            e.doc_id.clone(),
            e.entity_ids.join(";"),
            e.prev.clone().unwrap_or_default(),
            e.center.clone(),
            e.next.clone().unwrap_or_default(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Human-readable excerpt listing.
pub fn render_excerpts_text(excerpts: &[Excerpt]) -> String {
    let mut out = String::new();
    for e in excerpts {
        out.push_str(&format!(
            "{} {}, relevance {:.3}, rank {} [{}]\n",
            e.doc_id,
            e.date.format(crate::corpus::DATE_FORMAT),
            e.score,
            e.rank,
            e.entity_ids.join(";"),
        ));
        if let Some(prev) = &e.prev {
            out.push_str(&format!("    {prev}\n"));
        }
        out.push_str(&format!("  > {}\n", e.center));
        if let Some(next) = &e.next {
            out.push_str(&format!("    {next}\n"));
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Activation, OutputForm};
    use crate::embed::tests_support::model_with_sentences;
    use crate::embed::{train_dm, TrainConfig};
    use crate::signal::PeriodKind;
    use std::sync::OnceLock;

    // Classifier whose posterior rises monotonically with coordinate 0.
    fn coord0_classifier(dim: usize) -> RelevanceClassifier {
        let mut w1 = vec![0.0; dim];
        w1[0] = 1.0;
        RelevanceClassifier {
            input_dim: dim,
            hidden: 1,
            activation: Activation::Relu,
            output_form: OutputForm::LinearLogits,
            w1,
            b1: vec![0.0],
            w2: vec![0.0, 4.0],
            b2: vec![0.0; 2],
        }
    }

    // Single-sentence docs: no neighbors exist, scores equal the center
    // posterior of the crafted vector.
    fn crafted_store(rows: &[(&str, &str, f64)]) -> (CorpusStore, EmbeddingModel, RelevanceClassifier) {
        let lexicon = "b1\tg\tAlpha\nb2\tg\tBravo\n";
        let mut corpus = String::new();
        for (i, (doc, date, _)) in rows.iter().enumerate() {
            let who = if i % 2 == 0 { "Alpha" } else { "Bravo" };
            corpus.push_str(&format!("{doc}\t{date}\t{who} result number {i} came in .\n"));
        }
        let store = CorpusStore::ingest_strings(&corpus, lexicon).unwrap();
        let dim = 3;
        let vectors: Vec<(u64, Vec<f64>)> = rows
            .iter()
            .enumerate()
            .map(|(i, &(_, _, strength))| (i as u64, vec![strength, 0.1, -0.2]))
            .collect();
        let model = model_with_sentences(dim, &vectors);
        (store, model, coord0_classifier(dim))
    }

    fn fast_config() -> DescribeConfig {
        DescribeConfig { infer_samples: 3, infer_steps: 5, ..DescribeConfig::default() }
    }

    #[test]
    fn isolated_sentences_score_their_center_posterior() {
        let (store, model, clf) = crafted_store(&[("d0", "2008-09-02", 0.8)]);
        let terms = excerpt_terms(&store, &clf, &model, 0, &fast_config()).unwrap();
        assert!(terms.prev.is_none() && terms.next.is_none());
        let expected = clf.posterior(&model.extract_vector(0).unwrap());
        assert_eq!(terms.score(), expected);
        assert_eq!(
            score_excerpt(&store, &clf, &model, 0, &fast_config()).unwrap(),
            expected
        );
    }

    #[test]
    fn ranking_orders_by_score_then_date_doc_position() {
        let rows = [
            ("d3", "2008-09-10", 0.2),
            ("d1", "2008-09-04", 0.9),
            ("d2", "2008-09-04", 0.9), // same score as d1, later doc id
            ("d0", "2008-09-02", 0.9), // same score, earlier date
            ("d4", "2008-09-20", 0.5),
        ];
        let (store, model, clf) = crafted_store(&rows);
        let period: Period = "2008-09".parse().unwrap();
        let (excerpts, removals) =
            rank_excerpts(&store, &clf, &model, period, &[], &fast_config()).unwrap();
        assert!(removals.is_empty());
        let docs: Vec<&str> = excerpts.iter().map(|e| e.doc_id.as_str()).collect();
        assert_eq!(docs, vec!["d0", "d1", "d2", "d4", "d3"]);
        assert_eq!(excerpts[0].rank, 1);
        assert_eq!(excerpts[4].rank, 5);
        for w in excerpts.windows(2) {
            assert!(w[0].score >= w[1].score);
        }
    }

    #[test]
    fn k_truncates_after_dedup() {
        let rows = [
            ("d0", "2008-09-02", 0.9),
            ("d1", "2008-09-03", 0.8),
            ("d2", "2008-09-04", 0.7),
            ("d3", "2008-09-05", 0.6),
        ];
        let (store, model, clf) = crafted_store(&rows);
        let period: Period = "2008-09".parse().unwrap();
        let config = DescribeConfig { k: 2, ..fast_config() };
        let (excerpts, _) = rank_excerpts(&store, &clf, &model, period, &[], &config).unwrap();
        assert_eq!(excerpts.len(), 2);
        assert_eq!(excerpts[0].doc_id, "d0");
        assert_eq!(excerpts[1].doc_id, "d1");
    }

    #[test]
    fn period_and_entity_filters_limit_candidates() {
        let rows = [
            ("d0", "2008-09-02", 0.9), // Alpha, September
            ("d1", "2008-09-03", 0.8), // Bravo, September
            ("d2", "2008-10-04", 0.7), // Alpha, October
        ];
        let (store, model, clf) = crafted_store(&rows);
        let period: Period = "2008-09".parse().unwrap();
        let alpha = store.lexicon.entity_index("b1").unwrap() as u32;
        let (excerpts, _) =
            rank_excerpts(&store, &clf, &model, period, &[alpha], &fast_config()).unwrap();
        assert_eq!(excerpts.len(), 1);
        assert_eq!(excerpts[0].doc_id, "d0");
        assert_eq!(excerpts[0].entity_ids, vec!["b1".to_string()]);
        // October has only d2.
        let october: Period = "2008-10".parse().unwrap();
        let (excerpts, _) =
            rank_excerpts(&store, &clf, &model, october, &[], &fast_config()).unwrap();
        assert_eq!(excerpts.len(), 1);
        assert_eq!(excerpts[0].doc_id, "d2");
        // Empty period: empty result, not an error.
        let empty: Period = "2009-01".parse().unwrap();
        let (excerpts, removals) =
            rank_excerpts(&store, &clf, &model, empty, &[], &fast_config()).unwrap();
        assert!(excerpts.is_empty() && removals.is_empty());
    }

    #[test]
    fn verbatim_repeats_collapse_to_the_best_scored_copy() {
        // d0 and d2 carry identical sentence text (same index parity trick:
        // both mention Alpha) with different crafted strengths.
        let lexicon = "b1\tg\tAlpha\n";
        let corpus = "\
d0\t2008-09-02\tAlpha misses every target .
d1\t2008-09-03\tAlpha hits one target .
d2\t2008-09-04\tAlpha misses every target .
";
        let store = CorpusStore::ingest_strings(corpus, lexicon).unwrap();
        let model = model_with_sentences(
            3,
            &[
                (0, vec![0.4, 0.0, 0.0]),
                (1, vec![0.2, 0.0, 0.0]),
                (2, vec![0.9, 0.0, 0.0]),
            ],
        );
        let clf = coord0_classifier(3);
        let period: Period = "2008-09".parse().unwrap();
        let (excerpts, removals) =
            rank_excerpts(&store, &clf, &model, period, &[], &fast_config()).unwrap();
        assert_eq!(excerpts.len(), 2);
        assert_eq!(excerpts[0].sentence_id, 2, "higher-scoring copy survives");
        assert_eq!(removals, vec![DedupRemoval { kept_sentence: 2, removed_sentence: 0 }]);
        // Permutation property: candidates = survivors + removals.
        assert_eq!(excerpts.len() + removals.len(), 3);
    }

    // Shared trained model over a corpus with three-sentence documents, so
    // neighbor terms actually exist.
    fn trained_fixture() -> &'static (CorpusStore, EmbeddingModel, RelevanceClassifier) {
        static FIXTURE: OnceLock<(CorpusStore, EmbeddingModel, RelevanceClassifier)> =
            OnceLock::new();
        FIXTURE.get_or_init(|| {
            let lexicon = "b1\tg\tAlpha\nb2\tg\tBravo\n";
            let mut corpus = String::new();
            for i in 0..30 {
                let who = if i % 2 == 0 { "Alpha" } else { "Bravo" };
                corpus.push_str(&format!(
                    "d{i}\t2008-09-{:02}\tMarkets opened with heavy selling pressure today . \
{who} faced severe losses and turmoil again . Analysts expect further declines ahead .\n",
                    i % 28 + 1,
                ));
            }
            let store = CorpusStore::ingest_strings(&corpus, lexicon).unwrap();
            let config = TrainConfig {
                dim: 8,
                context_n: 2,
                min_count: 1,
                epochs: 6,
                lr_initial: 0.05,
                lr_final: 0.001,
                seed: 7,
                ..TrainConfig::default()
            };
            let model = train_dm(&store, &config).unwrap().model;
            (store, model, coord0_classifier(8))
        })
    }

    #[test]
    fn neighbor_terms_raise_scores_and_obey_the_max() {
        let (store, model, clf) = trained_fixture();
        let config = fast_config();
        // Sentence 1 of each doc is the mention-bearing center.
        for center in [1u64, 4, 7] {
            let terms = excerpt_terms(store, clf, model, center, &config).unwrap();
            assert!(terms.prev.is_some(), "prev neighbor is inferable");
            assert!(terms.next.is_some(), "next neighbor is inferable");
            let score = score_excerpt(store, clf, model, center, &config).unwrap();
            assert_eq!(score, terms.score());
            assert!(score >= terms.center, "max includes the center term");
            let hand_max = terms
                .center
                .max(terms.prev.unwrap())
                .max(terms.next.unwrap());
            assert_eq!(score, hand_max);
        }
    }

    #[test]
    fn scoring_is_deterministic_per_seed() {
        let (store, model, clf) = trained_fixture();
        let config = fast_config();
        let a = score_excerpt(store, clf, model, 1, &config).unwrap();
        let b = score_excerpt(store, clf, model, 1, &config).unwrap();
        assert_eq!(a, b);
        // Seed sensitivity shows in the neighbor term through a classifier
        // with no flat regions.
        let mut smooth = coord0_classifier(8);
        smooth.activation = Activation::Tanh;
        let term = |seed: u64| {
            let config = DescribeConfig { seed, ..fast_config() };
            excerpt_terms(store, &smooth, model, 1, &config).unwrap().prev.unwrap()
        };
        assert_ne!(term(42), term(99), "different seeds infer different neighbors");
    }

    #[test]
    fn averaging_more_samples_stabilizes_the_neighbor_term() {
        let (store, model, clf) = trained_fixture();
        let term_with = |samples: usize, seed: u64| {
            let config = DescribeConfig {
                infer_samples: samples,
                infer_steps: 10,
                seed,
                ..DescribeConfig::default()
            };
            excerpt_terms(store, clf, model, 1, &config).unwrap().prev.unwrap()
        };
        let spread = |samples: usize| {
            let terms: Vec<f64> = (0..20).map(|s| term_with(samples, s)).collect();
            crate::mathutil::std_dev(&terms)
        };
        let noisy = spread(1);
        let stable = spread(100);
        assert!(
            stable < noisy,
            "100-sample std {stable} should be below 1-sample std {noisy}"
        );
    }

    #[test]
    fn out_of_vocabulary_neighbors_contribute_no_term() {
        // The crafted model's vocabulary contains only "filler": every
        // neighbor is fully out of vocabulary even in multi-sentence docs.
        let lexicon = "b1\tg\tAlpha\n";
        let corpus = "d0\t2008-09-02\tNoise words first . Alpha sinks fast . Noise words last .\n";
        let store = CorpusStore::ingest_strings(corpus, lexicon).unwrap();
        let model = model_with_sentences(3, &[(1, vec![0.5, 0.0, 0.0])]);
        let clf = coord0_classifier(3);
        let terms = excerpt_terms(&store, &clf, &model, 1, &fast_config()).unwrap();
        assert!(terms.prev.is_none());
        assert!(terms.next.is_none());
    }

    #[test]
    fn csv_and_text_outputs_round_trip() {
        let rows = [("d0", "2008-09-02", 0.9), ("d1", "2008-09-03", 0.4)];
        let (store, model, clf) = crafted_store(&rows);
        let period: Period = "2008-09".parse().unwrap();
        let (excerpts, _) =
            rank_excerpts(&store, &clf, &model, period, &[], &fast_config()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("excerpts.csv");
        write_excerpt_csv(&path, &excerpts).unwrap();
        let mut reader = csv::Reader::from_path(&path).unwrap();
        assert_eq!(
            reader.headers().unwrap(),
            &csv::StringRecord::from(vec![
                "rank", "score", "date", "doc_id", "entity_ids", "prev", "center", "next"
            ])
        );
        let records: Vec<csv::StringRecord> = reader.records().map(|r| r.unwrap()).collect();
        assert_eq!(records.len(), 2);
        assert_eq!(&records[0][0], "1");
        assert_eq!(&records[0][3], "d0");
        assert_eq!(&records[0][5], "", "missing neighbor is an empty field");
        let text = render_excerpts_text(&excerpts);
        assert!(text.contains("d0 2008-09-02, relevance"));
        assert!(text.contains("rank 1"));
        assert!(text.contains("  > "));
        // All periods have the same period type as the query.
        assert_eq!(period.kind, PeriodKind::Month);
    }

    #[test]
    fn unknown_entity_index_is_rejected() {
        let (store, model, clf) = crafted_store(&[("d0", "2008-09-02", 0.5)]);
        let period: Period = "2008-09".parse().unwrap();
        let err = rank_excerpts(&store, &clf, &model, period, &[99], &fast_config()).unwrap_err();
        assert!(err.to_string().contains("unknown entity"), "{err}");
    }
}
