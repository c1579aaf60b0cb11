//! Python bindings for the core pipeline: corpus ingestion, labeling,
//! sentence embeddings, the relevance classifier, evaluation metrics,
//! index percentiles, and the synthetic-corpus generator.

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use chrono::NaiveDate;
use eventscope::classify::{ClassifierConfig, RelevanceClassifier};
use eventscope::corpus::CorpusStore;
use eventscope::embed::{train_dm, EmbeddingModel, TrainConfig};
use eventscope::evaluate::{self, ConfusionMatrix};
use eventscope::labeling::WindowConfig;
use eventscope::signal;
use eventscope::synth::{self, SynthConfig};

fn to_py(err: eventscope::Error) -> PyErr {
    match err {
        eventscope::Error::Io { .. } => PyIOError::new_err(err.to_string()),
        _ => PyValueError::new_err(err.to_string()),
    }
}

fn parse_date(s: &str) -> PyResult<NaiveDate> {
    NaiveDate::parse_from_str(s, "%Y-%m-%d")
        .map_err(|e| PyValueError::new_err(format!("invalid date {s:?}: {e}")))
}

fn cm_from_counts(tpc: u64, fpc: u64, tnc: u64, fnc: u64) -> ConfusionMatrix {
    ConfusionMatrix { tpc, fpc, tnc, fnc }
}

/// Splits raw text into sentences.
#[pyfunction]
fn split_sentences(text: &str) -> Vec<String> {
    eventscope::corpus::split_sentences(text)
}

/// Lowercased word tokens of one sentence.
#[pyfunction]
fn tokenize(sentence: &str) -> Vec<String> {
    eventscope::corpus::tokenize(sentence)
}

/// Labels a (sentence date, event dates) pair: 1 inside the inner window
/// of any event, 0 outside every outer window, None in between.
#[pyfunction]
#[pyo3(signature = (sentence_date, event_dates, w_in=(-8, 45), w_out=(-120, 120)))]
fn label_pair(
    sentence_date: &str,
    event_dates: Vec<String>,
    w_in: (i64, i64),
    w_out: (i64, i64),
) -> PyResult<Option<u8>> {
    let date = parse_date(sentence_date)?;
    let events = event_dates.iter().map(|d| parse_date(d)).collect::<PyResult<Vec<_>>>()?;
    let windows = WindowConfig { inner: w_in, outer: w_out, ..WindowConfig::default() };
    windows.validate().map_err(to_py)?;
    Ok(eventscope::labeling::label_pair(date, &events, &windows))
}

/// Loss and gain of a confusion matrix under preference `mu`.
#[pyclass(frozen, get_all)]
struct Usefulness {
    loss_best_guess: f64,
    loss_model: f64,
    absolute: f64,
    relative: f64,
}

#[pymethods]
impl Usefulness {
    fn __repr__(&self) -> String {
        format!(
            "Usefulness(loss_best_guess={}, loss_model={}, absolute={}, relative={})",
            self.loss_best_guess, self.loss_model, self.absolute, self.relative
        )
    }
}

/// Usefulness of a classifier's confusion counts at preference `mu`.
#[pyfunction]
fn usefulness(tpc: u64, fpc: u64, tnc: u64, fnc: u64, mu: f64) -> PyResult<Usefulness> {
    let u = evaluate::usefulness(&cm_from_counts(tpc, fpc, tnc, fnc), mu).map_err(to_py)?;
    Ok(Usefulness {
        loss_best_guess: u.loss_best_guess,
        loss_model: u.loss_model,
        absolute: u.absolute,
        relative: u.relative,
    })
}

/// F-score of confusion counts with recall weighted by `beta`.
#[pyfunction]
fn f_beta(tpc: u64, fpc: u64, tnc: u64, fnc: u64, beta: f64) -> f64 {
    evaluate::f_beta(&cm_from_counts(tpc, fpc, tnc, fnc), beta)
}

/// The `beta` that aligns an F-score with preference `mu`.
#[pyfunction]
fn mu_to_beta(mu: f64) -> f64 {
    evaluate::mu_to_beta(mu)
}

/// Area under the ROC curve; ties contribute half.
#[pyfunction]
fn roc_auc(scores: Vec<f64>, labels: Vec<u8>) -> PyResult<f64> {
    if scores.len() != labels.len() {
        return Err(PyValueError::new_err("scores and labels differ in length"));
    }
    evaluate::roc_auc(&scores, &labels).map_err(to_py)
}

/// Percentile rank of each score within the full sample, rounded down to
/// a multiple of `step`.
#[pyfunction]
#[pyo3(signature = (scores, step=2))]
fn percentile_band(scores: Vec<f64>, step: u32) -> PyResult<Vec<f64>> {
    if scores.is_empty() {
        return Err(PyValueError::new_err("scores must not be empty"));
    }
    if step != 2 && step != 4 {
        return Err(PyValueError::new_err(format!("step must be 2 or 4, got {step}")));
    }
    Ok(signal::percentile_band(&scores, step))
}

/// A generated corpus with its ground truth.
#[pyclass(frozen, get_all)]
struct SynthCorpus {
    /// Tab-separated documents: doc_id, date, text.
    corpus: String,
    /// Tab-separated entities: id, groups, surface form.
    lexicon: String,
    /// CSV of entity_id, event_date.
    events: String,
    /// CSV naming each mention sentence and whether it was planted.
    truth: String,
    sentence_count: u64,
    planted_count: usize,
}

/// Generates a synthetic corpus with planted event language.
#[pyfunction]
#[pyo3(signature = (
    entities=8, events_per_entity=2.5, span_start="2007-01-01", span_days=730,
    background_vocab=2000, event_vocab=200, event_word_rate=0.85,
    sentences_per_day=0.25, sentence_len_min=8, sentence_len_max=14,
    context_sentences=1.2, groups=2, w_in=(-8, 45), w_out=(-120, 120), seed=42
))]
#[allow(clippy::too_many_arguments)]
fn generate_corpus(
    entities: usize,
    events_per_entity: f64,
    span_start: &str,
    span_days: u32,
    background_vocab: usize,
    event_vocab: usize,
    event_word_rate: f64,
    sentences_per_day: f64,
    sentence_len_min: usize,
    sentence_len_max: usize,
    context_sentences: f64,
    groups: usize,
    w_in: (i64, i64),
    w_out: (i64, i64),
    seed: u64,
) -> PyResult<SynthCorpus> {
    let config = SynthConfig {
        entities,
        events_per_entity,
        span_start: parse_date(span_start)?,
        span_days,
        background_vocab,
        event_vocab,
        lambda: event_word_rate,
        sentences_per_day,
        sentence_len_min,
        sentence_len_max,
        context_sentences,
        groups,
        windows: WindowConfig { inner: w_in, outer: w_out, ..WindowConfig::default() },
        seed,
    };
    let out = synth::generate(&config).map_err(to_py)?;
    Ok(SynthCorpus {
        corpus: out.corpus,
        lexicon: out.lexicon,
        events: out.events,
        truth: out.manifest,
        sentence_count: out.sentence_count,
        planted_count: out.planted_count,
    })
}

/// Ingested corpus: documents, sentences, and entity mentions.
#[pyclass(frozen, name = "CorpusStore")]
struct PyCorpusStore {
    inner: CorpusStore,
}

#[pymethods]
impl PyCorpusStore {
    /// Parses corpus and lexicon text into a store.
    #[staticmethod]
    fn ingest(corpus_text: &str, lexicon_text: &str) -> PyResult<Self> {
        let inner = CorpusStore::ingest_strings(corpus_text, lexicon_text).map_err(to_py)?;
        Ok(PyCorpusStore { inner })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyCorpusStore { inner: CorpusStore::load(path.as_ref()).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn documents(&self) -> usize {
        self.inner.docs.len()
    }

    #[getter]
    fn sentences(&self) -> usize {
        self.inner.sentences.len()
    }

    #[getter]
    fn entity_ids(&self) -> Vec<String> {
        self.inner.lexicon.entity_ids().to_vec()
    }

    /// Ids of sentences that mention at least one entity.
    fn mention_bearing_ids(&self) -> Vec<u64> {
        self.inner.mention_bearing_ids()
    }

    fn sentence_text(&self, sentence_id: u64) -> PyResult<String> {
        self.sentence(sentence_id).map(|s| s.text.clone())
    }

    fn sentence_tokens(&self, sentence_id: u64) -> PyResult<Vec<String>> {
        self.sentence(sentence_id).map(|s| s.tokens.clone())
    }

    fn sentence_date(&self, sentence_id: u64) -> PyResult<String> {
        self.sentence(sentence_id).map(|s| self.inner.date_of(s).format("%Y-%m-%d").to_string())
    }

    /// Entity ids mentioned by the sentence.
    fn sentence_entities(&self, sentence_id: u64) -> PyResult<Vec<String>> {
        self.sentence(sentence_id).map(|s| {
            s.mentions.iter().map(|&m| self.inner.lexicon.entity_id(m as usize).to_string()).collect()
        })
    }

    fn __len__(&self) -> usize {
        self.inner.sentences.len()
    }

    fn __repr__(&self) -> String {
        let stats = self.inner.stats();
        format!(
            "CorpusStore(documents={}, sentences={}, mention_bearing={})",
            stats.documents, stats.sentences, stats.mention_bearing
        )
    }
}

impl PyCorpusStore {
    fn sentence(&self, sentence_id: u64) -> PyResult<&eventscope::corpus::Sentence> {
        self.inner
            .sentence(sentence_id)
            .ok_or_else(|| PyValueError::new_err(format!("unknown sentence id {sentence_id}")))
    }
}

/// Distributed-memory sentence embeddings with hierarchical softmax.
#[pyclass(frozen, name = "EmbeddingModel")]
struct PyEmbeddingModel {
    inner: EmbeddingModel,
}

#[pymethods]
impl PyEmbeddingModel {
    /// Trains embeddings over a store's sentences.
    #[staticmethod]
    #[pyo3(signature = (
        store, dim=600, context_n=5, min_count=5, epochs=5, lr_initial=0.025,
        lr_final=0.0001, word_only_pass=true, learn_projection=false, seed=42, threads=1
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        store: &PyCorpusStore,
        dim: usize,
        context_n: usize,
        min_count: u64,
        epochs: usize,
        lr_initial: f64,
        lr_final: f64,
        word_only_pass: bool,
        learn_projection: bool,
        seed: u64,
        threads: usize,
    ) -> PyResult<Self> {
        let config = TrainConfig {
            dim,
            context_n,
            min_count,
            epochs,
            lr_initial,
            lr_final,
            include_word_only_pass: word_only_pass,
            learn_projection,
            seed,
            threads,
            ..TrainConfig::default()
        };
        let outcome = train_dm(&store.inner, &config).map_err(to_py)?;
        Ok(PyEmbeddingModel { inner: outcome.model })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyEmbeddingModel { inner: EmbeddingModel::load(path.as_ref()).map_err(to_py)? })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim
    }

    #[getter]
    fn vocab_size(&self) -> usize {
        self.inner.vocab.len()
    }

    /// The trained vector of a mention-bearing sentence.
    fn extract_vector(&self, sentence_id: u64) -> PyResult<Vec<f64>> {
        self.inner.extract_vector(sentence_id).map_err(to_py)
    }

    /// Fits a vector for unseen tokens with frozen word parameters.
    #[pyo3(signature = (tokens, steps=50, lr=0.0125, seed=42))]
    fn infer_vector(
        &self,
        tokens: Vec<String>,
        steps: usize,
        lr: f64,
        seed: u64,
    ) -> PyResult<Vec<f64>> {
        self.inner.infer_vector(&tokens, steps, lr, seed).map_err(to_py)
    }

    fn __repr__(&self) -> String {
        format!(
            "EmbeddingModel(dim={}, vocab={}, sentences={})",
            self.inner.dim,
            self.inner.vocab.len(),
            self.inner.sent_ids.len()
        )
    }
}

/// Two-class feed-forward relevance classifier.
#[pyclass(frozen, name = "RelevanceClassifier")]
struct PyRelevanceClassifier {
    inner: RelevanceClassifier,
}

#[pymethods]
impl PyRelevanceClassifier {
    /// Trains on row-per-instance features and 0/1 labels.
    #[staticmethod]
    #[pyo3(signature = (
        xs, ys, hidden=50, activation="relu", output_form="linear-logits",
        lr=0.01, momentum=0.9, epochs=100, batch_size=32, seed=42,
        valid_xs=None, valid_ys=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        xs: Vec<Vec<f64>>,
        ys: Vec<u8>,
        hidden: usize,
        activation: &str,
        output_form: &str,
        lr: f64,
        momentum: f64,
        epochs: usize,
        batch_size: usize,
        seed: u64,
        valid_xs: Option<Vec<Vec<f64>>>,
        valid_ys: Option<Vec<u8>>,
    ) -> PyResult<Self> {
        let input_dim = xs.first().map(|row| row.len()).unwrap_or(0);
        if input_dim == 0 {
            return Err(PyValueError::new_err("xs must hold at least one non-empty row"));
        }
        let flatten = |rows: &[Vec<f64>]| -> PyResult<Vec<f64>> {
            let mut flat = Vec::with_capacity(rows.len() * input_dim);
            for row in rows {
                if row.len() != input_dim {
                    return Err(PyValueError::new_err(format!(
                        "ragged feature rows: expected {input_dim}, got {}",
                        row.len()
                    )));
                }
                flat.extend_from_slice(row);
            }
            Ok(flat)
        };
        let flat_xs = flatten(&xs)?;
        let config = ClassifierConfig {
            input_dim,
            hidden,
            activation: activation.parse().map_err(to_py)?,
            output_form: output_form.parse().map_err(to_py)?,
            lr,
            momentum,
            epochs,
            batch_size,
            seed,
        };
        let mut clf = RelevanceClassifier::init(&config).map_err(to_py)?;
        match (valid_xs, valid_ys) {
            (Some(vx), Some(vy)) => {
                let flat_vx = flatten(&vx)?;
                clf.train(&flat_xs, &ys, Some((&flat_vx, &vy)), &config).map_err(to_py)?;
            }
            (None, None) => {
                clf.train(&flat_xs, &ys, None, &config).map_err(to_py)?;
            }
            _ => {
                return Err(PyValueError::new_err(
                    "valid_xs and valid_ys must be given together",
                ))
            }
        }
        Ok(PyRelevanceClassifier { inner: clf })
    }

    #[staticmethod]
    fn load(path: &str) -> PyResult<Self> {
        Ok(PyRelevanceClassifier {
            inner: RelevanceClassifier::load(path.as_ref()).map_err(to_py)?,
        })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.inner.save(path.as_ref()).map_err(to_py)
    }

    #[getter]
    fn input_dim(&self) -> usize {
        self.inner.input_dim
    }

    /// Probability that one feature vector is event-relevant.
    fn posterior(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.input_dim {
            return Err(PyValueError::new_err(format!(
                "expected {} features, got {}",
                self.inner.input_dim,
                x.len()
            )));
        }
        Ok(self.inner.posterior(&x))
    }

    /// Posterior per feature row.
    fn posteriors(&self, xs: Vec<Vec<f64>>) -> PyResult<Vec<f64>> {
        xs.into_iter().map(|x| self.posterior(x)).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "RelevanceClassifier(input_dim={}, hidden={})",
            self.inner.input_dim, self.inner.hidden
        )
    }
}

#[pymodule]
fn eventscope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(split_sentences, m)?)?;
    m.add_function(wrap_pyfunction!(tokenize, m)?)?;
    m.add_function(wrap_pyfunction!(label_pair, m)?)?;
    m.add_function(wrap_pyfunction!(usefulness, m)?)?;
    m.add_function(wrap_pyfunction!(f_beta, m)?)?;
    m.add_function(wrap_pyfunction!(mu_to_beta, m)?)?;
    m.add_function(wrap_pyfunction!(roc_auc, m)?)?;
    m.add_function(wrap_pyfunction!(percentile_band, m)?)?;
    m.add_function(wrap_pyfunction!(generate_corpus, m)?)?;
    m.add_class::<Usefulness>()?;
    m.add_class::<SynthCorpus>()?;
    m.add_class::<PyCorpusStore>()?;
    m.add_class::<PyEmbeddingModel>()?;
    m.add_class::<PyRelevanceClassifier>()?;
    m.add("__version__", eventscope::VERSION)?;
    Ok(())
}
