//! Training loop for the distributed-memory model. Parameters live in
//! relaxed atomic cells so the optional lock-free parallel mode (sentence
//! shards racing benignly) shares one code path with the deterministic
//! single-threaded default.

use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::CorpusStore;
use crate::embed::{
    build_huffman, build_vocab, identity_matrix, EmbeddingModel, HuffmanTree, TrainConfig,
};
use crate::error::{Error, Result};
use crate::mathutil::{ln_sigmoid, sigmoid};

struct AtomicF64(AtomicU64);

impl AtomicF64 {
    fn new(v: f64) -> Self {
        AtomicF64(AtomicU64::new(v.to_bits()))
    }

    fn get(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Relaxed))
    }

    fn set(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Relaxed)
    }

    /// Read-modify-write without a lock; lost updates are acceptable in the
    /// parallel mode and impossible single-threaded.
    fn add(&self, d: f64) {
        self.set(self.get() + d);
    }
}

fn to_cells(v: &[f64]) -> Vec<AtomicF64> {
    v.iter().map(|&x| AtomicF64::new(x)).collect()
}

fn from_cells(v: &[AtomicF64]) -> Vec<f64> {
    v.iter().map(|c| c.get()).collect()
}

struct Params {
    dim: usize,
    learn_projection: bool,
    word: Vec<AtomicF64>,
    sent: Vec<AtomicF64>,
    node: Vec<AtomicF64>,
    proj: Vec<AtomicF64>,
    bias: Vec<AtomicF64>,
}

impl Params {
    fn from_model(model: &EmbeddingModel) -> Self {
        Params {
            dim: model.dim,
            learn_projection: model.learn_projection,
            word: to_cells(&model.word_vecs),
            sent: to_cells(&model.sent_vecs),
            node: to_cells(&model.node_vecs),
            proj: to_cells(&model.proj),
            bias: to_cells(&model.bias),
        }
    }

    fn write_back(&self, model: &mut EmbeddingModel) {
        model.word_vecs = from_cells(&self.word);
        model.sent_vecs = from_cells(&self.sent);
        model.node_vecs = from_cells(&self.node);
        model.proj = from_cells(&self.proj);
        model.bias = from_cells(&self.bias);
    }
}

struct Buffers {
    mean: Vec<f64>,
    h: Vec<f64>,
    g: Vec<f64>,
    gm: Vec<f64>,
}

impl Buffers {
    fn new(dim: usize) -> Self {
        Buffers {
            mean: vec![0.0; dim],
            h: vec![0.0; dim],
            g: vec![0.0; dim],
            gm: vec![0.0; dim],
        }
    }
}

/// One window of stochastic gradient descent on -ln p(target | mean input).
/// Returns ln p measured before the update. Update order keeps every
/// gradient evaluated at the pre-update parameters: the projected input and
/// input mean are cached, output-node gradients are read before the node is
/// moved, and the input rows step through U as it was.
fn window_step(
    p: &Params,
    tree: &HuffmanTree,
    slot: Option<u32>,
    context: &[u32],
    target: u32,
    lr: f64,
    bufs: &mut Buffers,
) -> f64 {
    let dim = p.dim;
    let cnt = (context.len() + slot.is_some() as usize) as f64;
    bufs.mean.iter_mut().for_each(|x| *x = 0.0);
    if let Some(s) = slot {
        let base = s as usize * dim;
        for j in 0..dim {
            bufs.mean[j] += p.sent[base + j].get();
        }
    }
    for &w in context {
        let base = w as usize * dim;
        for j in 0..dim {
            bufs.mean[j] += p.word[base + j].get();
        }
    }
    bufs.mean.iter_mut().for_each(|x| *x /= cnt);

    if p.learn_projection {
        for i in 0..dim {
            let mut acc = p.bias[i].get();
            let base = i * dim;
            for j in 0..dim {
                acc += p.proj[base + j].get() * bufs.mean[j];
            }
            bufs.h[i] = acc;
        }
    } else {
        bufs.h.copy_from_slice(&bufs.mean);
    }

    bufs.g.iter_mut().for_each(|x| *x = 0.0);
    let mut logp = 0.0;
    let code = tree.code(target as usize);
    let path = tree.path(target as usize);
    for (&b, &node) in code.iter().zip(path) {
        let base = node as usize * dim;
        let mut f = 0.0;
        for j in 0..dim {
            f += p.node[base + j].get() * bufs.h[j];
        }
        logp += ln_sigmoid(if b == 0 { f } else { -f });
        let gf = sigmoid(f) - (1.0 - b as f64);
        for j in 0..dim {
            bufs.g[j] += gf * p.node[base + j].get();
            p.node[base + j].add(-lr * gf * bufs.h[j]);
        }
    }

    if p.learn_projection {
        for i in 0..dim {
            bufs.gm[i] = 0.0;
        }
        for i in 0..dim {
            let gi = bufs.g[i];
            let base = i * dim;
            for j in 0..dim {
                bufs.gm[j] += gi * p.proj[base + j].get();
            }
        }
        for i in 0..dim {
            let gi = bufs.g[i];
            let base = i * dim;
            for j in 0..dim {
                p.proj[base + j].add(-lr * gi * bufs.mean[j]);
            }
            p.bias[i].add(-lr * gi);
        }
    } else {
        bufs.gm.copy_from_slice(&bufs.g);
    }

    let scale = lr / cnt;
    if let Some(s) = slot {
        let base = s as usize * dim;
        for j in 0..dim {
            p.sent[base + j].add(-scale * bufs.gm[j]);
        }
    }
    for &w in context {
        let base = w as usize * dim;
        for j in 0..dim {
            p.word[base + j].add(-scale * bufs.gm[j]);
        }
    }
    logp
}

/// A sentence prepared for training: in-vocabulary token ids and, for
/// mention-bearing sentences, the sentence-vector slot.
pub(crate) struct SentenceJob {
    slot: Option<u32>,
    token_ids: Vec<u32>,
}

pub struct TrainOutcome {
    pub model: EmbeddingModel,
    /// Mean ln p(target) per epoch, measured before each update.
    pub epoch_mean_log_prob: Vec<f64>,
    /// Eligible sentences with fewer than context_n + 1 in-vocabulary
    /// tokens; they contribute no windows.
    pub short_sentences: usize,
    pub windows_per_epoch: u64,
}

/// Seeds and initializes a model without running any epochs. Word and
/// sentence rows draw uniform values in (-0.5/dim, 0.5/dim), in that order;
/// output nodes start at zero, the projection at identity.
pub(crate) fn init_model(
    store: &CorpusStore,
    config: &TrainConfig,
) -> Result<(EmbeddingModel, Vec<SentenceJob>, usize)> {
    config.validate()?;
    let vocab = build_vocab(store, config.min_count);
    if vocab.is_empty() {
        return Err(Error::Data(format!(
            "vocabulary is empty at min_count {}",
            config.min_count
        )));
    }
    let tree = build_huffman(vocab.freqs())?;
    let sent_ids = store.mention_bearing_ids();
    let dim = config.dim;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let span = 0.5 / dim as f64;
    let mut draw = |len: usize| -> Vec<f64> {
        (0..len).map(|_| rng.random_range(-span..span)).collect()
    };
    let word_vecs = draw(vocab.len() * dim);
    let sent_vecs = draw(sent_ids.len() * dim);
    let node_vecs = vec![0.0; (vocab.len() - 1) * dim];

    let mut jobs = Vec::new();
    let mut short = 0usize;
    let mut no_window_ids = Vec::new();
    let mut next_slot = 0u32;
    for sentence in &store.sentences {
        let mentioned = !sentence.mentions.is_empty();
        let slot = if mentioned {
            let s = next_slot;
            next_slot += 1;
            Some(s)
        } else {
            None
        };
        if !mentioned && !config.include_word_only_pass {
            continue;
        }
        let token_ids: Vec<u32> = sentence
            .tokens
            .iter()
            .filter_map(|t| vocab.get(t))
            .map(|id| id as u32)
            .collect();
        if token_ids.len() < config.context_n + 1 {
            short += 1;
            if mentioned {
                no_window_ids.push(sentence.sentence_id);
            }
            continue;
        }
        jobs.push(SentenceJob { slot, token_ids });
    }

    let model = EmbeddingModel {
        dim,
        context_n: config.context_n,
        learn_projection: config.learn_projection,
        vocab,
        tree,
        word_vecs,
        sent_vecs,
        sent_ids,
        proj: identity_matrix(dim),
        bias: vec![0.0; dim],
        node_vecs,
        no_window_ids,
    };
    Ok((model, jobs, short))
}

/// Trains sentence vectors for every mention-bearing sentence (plus the
/// word-only pass when enabled). The learning rate interpolates linearly
/// from `lr_initial` on the first epoch to `lr_final` on the last.
pub fn train_dm(store: &CorpusStore, config: &TrainConfig) -> Result<TrainOutcome> {
    let (mut model, jobs, short_sentences) = init_model(store, config)?;
    let params = Params::from_model(&model);
    let n = config.context_n;
    let threads = config.threads.max(1).min(jobs.len().max(1));

    let mut epoch_mean_log_prob = Vec::with_capacity(config.epochs);
    let mut windows_per_epoch = 0u64;
    for epoch in 0..config.epochs {
        let lr = if config.epochs == 1 {
            config.lr_initial
        } else {
            let t = epoch as f64 / (config.epochs - 1) as f64;
            config.lr_initial + (config.lr_final - config.lr_initial) * t
        };
        let (logp_sum, window_count) = if threads <= 1 {
            run_shard(&params, &model.tree, &jobs, n, lr)
        } else {
            let chunk = jobs.len().div_ceil(threads);
            let mut totals = Vec::new();
            std::thread::scope(|scope| {
                let handles: Vec<_> = jobs
                    .chunks(chunk)
                    .map(|shard| scope.spawn(|| run_shard(&params, &model.tree, shard, n, lr)))
                    .collect();
                for h in handles {
                    totals.push(h.join().expect("training shard panicked"));
                }
            });
            totals.into_iter().fold((0.0, 0), |(s, c), (s2, c2)| (s + s2, c + c2))
        };
        windows_per_epoch = window_count;
        epoch_mean_log_prob.push(if window_count == 0 {
            0.0
        } else {
            logp_sum / window_count as f64
        });
    }
    params.write_back(&mut model);
    Ok(TrainOutcome { model, epoch_mean_log_prob, short_sentences, windows_per_epoch })
}

fn run_shard(
    params: &Params,
    tree: &HuffmanTree,
    jobs: &[SentenceJob],
    n: usize,
    lr: f64,
) -> (f64, u64) {
    let mut bufs = Buffers::new(params.dim);
    let mut logp_sum = 0.0;
    let mut windows = 0u64;
    for job in jobs {
        let ids = &job.token_ids;
        for i in 0..=(ids.len() - n - 1) {
            logp_sum += window_step(params, tree, job.slot, &ids[i..i + n], ids[i + n], lr, &mut bufs);
            windows += 1;
        }
    }
    (logp_sum, windows)
}

impl EmbeddingModel {
    /// Applies one stochastic update for a single context window and returns
    /// ln p(target | window) before the update. The parameter deltas divided
    /// by `lr` are exactly the analytic gradients of
    /// [`EmbeddingModel::window_loss`], which makes this the hook for online
    /// updates and gradient diagnostics.
    pub fn window_update(
        &mut self,
        slot: Option<usize>,
        context: &[usize],
        target: usize,
        lr: f64,
    ) -> f64 {
        let params = Params::from_model(self);
        let mut bufs = Buffers::new(self.dim);
        let ctx: Vec<u32> = context.iter().map(|&c| c as u32).collect();
        let logp = window_step(
            &params,
            &self.tree,
            slot.map(|s| s as u32),
            &ctx,
            target as u32,
            lr,
            &mut bufs,
        );
        params.write_back(self);
        logp
    }
}

/// Applies a single window update in place and returns ln p before the
/// update. The parameter deltas divided by `lr` are exactly the analytic
/// gradients of [`EmbeddingModel::window_loss`].
#[cfg(test)]
pub(crate) fn apply_window(
    model: &mut EmbeddingModel,
    slot: Option<u32>,
    context: &[u32],
    target: u32,
    lr: f64,
) -> f64 {
    let ctx: Vec<usize> = context.iter().map(|&c| c as usize).collect();
    model.window_update(slot.map(|s| s as usize), &ctx, target as usize, lr)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::CorpusStore;

    fn fd_gradient(
        model: &EmbeddingModel,
        read: impl Fn(&EmbeddingModel) -> f64,
        write: impl Fn(&mut EmbeddingModel, f64),
        loss: impl Fn(&EmbeddingModel) -> f64,
    ) -> f64 {
        let eps = 1e-5;
        let x0 = read(model);
        let mut m = model.clone();
        write(&mut m, x0 + eps);
        let up = loss(&m);
        write(&mut m, x0 - eps);
        let down = loss(&m);
        (up - down) / (2.0 * eps)
    }

    fn assert_close(analytic: f64, numeric: f64, what: &str) {
        let denom = analytic.abs().max(numeric.abs()).max(1e-8);
        let rel = (analytic - numeric).abs() / denom;
        assert!(
            rel < 1e-4 || (analytic - numeric).abs() < 1e-9,
            "{what}: analytic {analytic} vs numeric {numeric} (rel {rel})"
        );
    }

    /// Analytic gradients (extracted from one unit-rate update) match
    /// central finite differences for every parameter class.
    #[test]
    fn window_gradients_match_finite_differences() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(99);
        for point in 0..10 {
            let learn_projection = point % 2 == 0;
            let model =
                crate::embed::tests::random_model(12, 7, learn_projection, 1000 + point as u64);
            let dim = model.dim;
            let slot_idx = rng.random_range(0..2u32);
            let slot = Some(slot_idx);
            // Includes a duplicated context word every other point.
            let mut context: Vec<u32> =
                (0..3).map(|_| rng.random_range(0..12u32)).collect();
            if point % 2 == 1 {
                context[2] = context[0];
            }
            let target = rng.random_range(0..12u32);
            let loss =
                |m: &EmbeddingModel| m.window_loss(slot.map(|s| s as usize), &cast(&context), target as usize);

            let mut updated = model.clone();
            apply_window(&mut updated, slot, &context, target, 1.0);

            let sent_base = slot_idx as usize * dim;
            for j in 0..dim {
                let analytic = model.sent_vecs[sent_base + j] - updated.sent_vecs[sent_base + j];
                let numeric = fd_gradient(
                    &model,
                    |m| m.sent_vecs[sent_base + j],
                    |m, v| m.sent_vecs[sent_base + j] = v,
                    loss,
                );
                assert_close(analytic, numeric, &format!("sent[{j}] point {point}"));
            }
            for &w in context.iter() {
                for j in (0..dim).step_by(3) {
                    let idx = w as usize * dim + j;
                    let analytic = model.word_vecs[idx] - updated.word_vecs[idx];
                    let numeric = fd_gradient(
                        &model,
                        |m| m.word_vecs[idx],
                        |m, v| m.word_vecs[idx] = v,
                        loss,
                    );
                    assert_close(analytic, numeric, &format!("word[{w},{j}] point {point}"));
                }
            }
            for &node in model.tree.path(target as usize) {
                for j in (0..dim).step_by(2) {
                    let idx = node as usize * dim + j;
                    let analytic = model.node_vecs[idx] - updated.node_vecs[idx];
                    let numeric = fd_gradient(
                        &model,
                        |m| m.node_vecs[idx],
                        |m, v| m.node_vecs[idx] = v,
                        loss,
                    );
                    assert_close(analytic, numeric, &format!("node[{node},{j}] point {point}"));
                }
            }
            if learn_projection {
                for idx in (0..dim * dim).step_by(11) {
                    let analytic = model.proj[idx] - updated.proj[idx];
                    let numeric =
                        fd_gradient(&model, |m| m.proj[idx], |m, v| m.proj[idx] = v, loss);
                    assert_close(analytic, numeric, &format!("proj[{idx}] point {point}"));
                }
                for j in 0..dim {
                    let analytic = model.bias[j] - updated.bias[j];
                    let numeric =
                        fd_gradient(&model, |m| m.bias[j], |m, v| m.bias[j] = v, loss);
                    assert_close(analytic, numeric, &format!("bias[{j}] point {point}"));
                }
            }
        }
    }

    fn cast(v: &[u32]) -> Vec<usize> {
        v.iter().map(|&x| x as usize).collect()
    }

    fn repeated_corpus() -> CorpusStore {
        // Mention-bearing cyclic text: plenty of windows over a tiny vocab.
        let text = "Alpha beta gamma alpha beta gamma alpha beta gamma alpha beta gamma";
        let mut corpus = String::new();
        for i in 0..30 {
            corpus.push_str(&format!("d{i}\t2008-01-01\t{text}\n"));
        }
        CorpusStore::ingest_strings(&corpus, "ea\tg\talpha\n").unwrap()
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            dim: 16,
            context_n: 2,
            min_count: 1,
            epochs: 12,
            lr_initial: 0.05,
            lr_final: 0.001,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn objective_improves_and_beats_untrained_next_word_probability() {
        let store = repeated_corpus();
        let config = small_config();
        let outcome = train_dm(&store, &config).unwrap();
        assert!(outcome.windows_per_epoch >= 100);
        let first = outcome.epoch_mean_log_prob[0];
        let last = *outcome.epoch_mean_log_prob.last().unwrap();
        assert!(last > first, "objective should improve: first {first}, last {last}");

        let (untrained, _, _) = init_model(&store, &config).unwrap();
        let trained = &outcome.model;
        let vocab_size = trained.vocab.len() as f64;
        let ids: Vec<usize> = store.sentences[0]
            .tokens
            .iter()
            .filter_map(|t| trained.vocab.get(t))
            .collect();
        let n = config.context_n;
        for i in 0..=(ids.len() - n - 1) {
            let loss_trained = trained.window_loss(Some(0), &ids[i..i + n], ids[i + n]);
            let loss_untrained = untrained.window_loss(Some(0), &ids[i..i + n], ids[i + n]);
            let p_trained = (-loss_trained).exp();
            assert!(
                loss_trained < loss_untrained,
                "window {i}: trained loss {loss_trained} vs untrained {loss_untrained}"
            );
            assert!(
                p_trained > 1.0 / vocab_size,
                "window {i}: trained prob {p_trained} not above uniform"
            );
        }
    }

    #[test]
    fn same_seed_reproduces_bit_identical_models() {
        let store = repeated_corpus();
        let config = small_config();
        let a = train_dm(&store, &config).unwrap().model;
        let b = train_dm(&store, &config).unwrap().model;
        assert_eq!(a, b);
        let c = train_dm(&store, &TrainConfig { seed: 6, ..config }).unwrap().model;
        assert_ne!(a, c);
    }

    #[test]
    fn words_in_identical_contexts_converge() {
        // "north" and "south" substitute for each other inside one template;
        // "pepper" lives in an unrelated template.
        let mut corpus = String::new();
        for i in 0..60 {
            let w = if i % 2 == 0 { "north" } else { "south" };
            corpus.push_str(&format!(
                "da{i}\t2008-01-01\tAlpha wind from {w} ridge moved fast\n"
            ));
            corpus.push_str(&format!(
                "db{i}\t2008-01-01\tAlpha cook adds pepper sauce then salt\n"
            ));
        }
        let store = CorpusStore::ingest_strings(&corpus, "ea\tg\talpha\n").unwrap();
        let config = TrainConfig {
            dim: 24,
            context_n: 2,
            min_count: 1,
            epochs: 25,
            lr_initial: 0.05,
            lr_final: 0.001,
            seed: 9,
            ..TrainConfig::default()
        };
        let model = train_dm(&store, &config).unwrap().model;
        let vec_of = |w: &str| model.word_vec(model.vocab.get(w).unwrap()).to_vec();
        let cos = crate::embed::tests_support::cosine;
        let north = vec_of("north");
        assert!(
            cos(&north, &vec_of("south")) > cos(&north, &vec_of("pepper")),
            "synonym pair should be closer than an unrelated word"
        );
    }

    #[test]
    fn short_sentences_are_skipped_and_flagged() {
        let corpus = "d1\t2008-01-01\tAlpha beta gamma delta epsilon zeta\nd2\t2008-01-02\tAlpha beta\n";
        let store = CorpusStore::ingest_strings(corpus, "ea\tg\talpha\n").unwrap();
        let config = TrainConfig {
            dim: 8,
            context_n: 3,
            min_count: 1,
            epochs: 2,
            lr_initial: 0.05,
            lr_final: 0.001,
            seed: 1,
            ..TrainConfig::default()
        };
        let outcome = train_dm(&store, &config).unwrap();
        assert_eq!(outcome.short_sentences, 1);
        assert_eq!(outcome.model.no_window_ids, vec![1]);
        // The flagged sentence keeps its seeded init row.
        let (untrained, _, _) = init_model(&store, &config).unwrap();
        let slot = outcome.model.slot_of(1).unwrap();
        assert_eq!(outcome.model.sent_vec(slot), untrained.sent_vec(slot));
    }

    #[test]
    fn word_only_pass_changes_word_vectors_only_when_extra_sentences_exist() {
        let corpus = "d1\t2008-01-01\tAlpha beta gamma delta epsilon\n\
                      d2\t2008-01-02\tPlain beta gamma delta epsilon\n";
        let store = CorpusStore::ingest_strings(corpus, "ea\tg\talpha\n").unwrap();
        let config = TrainConfig {
            dim: 8,
            context_n: 2,
            min_count: 1,
            epochs: 3,
            lr_initial: 0.05,
            lr_final: 0.001,
            seed: 2,
            ..TrainConfig::default()
        };
        let with = train_dm(&store, &config).unwrap().model;
        let without =
            train_dm(&store, &TrainConfig { include_word_only_pass: false, ..config }).unwrap().model;
        assert_ne!(with.word_vecs, without.word_vecs);
    }

    #[test]
    fn inferred_vector_lands_near_its_trained_counterpart() {
        use rand::seq::IndexedRandom;
        // Two disjoint-topic templates; sentence 0 belongs to the first.
        let mut corpus = String::new();
        for i in 0..40 {
            corpus.push_str(&format!(
                "da{i}\t2008-01-01\tAlpha risk losses deepen this bad quarter\n"
            ));
            corpus.push_str(&format!(
                "db{i}\t2008-01-01\tAlpha garden flowers bloom in nice spring\n"
            ));
        }
        let store = CorpusStore::ingest_strings(&corpus, "ea\tg\talpha\n").unwrap();
        let config = TrainConfig {
            dim: 16,
            context_n: 2,
            min_count: 1,
            epochs: 20,
            lr_initial: 0.05,
            lr_final: 0.001,
            seed: 3,
            ..TrainConfig::default()
        };
        let model = train_dm(&store, &config).unwrap().model;
        let own = model.extract_vector(0).unwrap();
        let tokens = store.sentences[0].tokens.clone();
        let cos = crate::embed::tests_support::cosine;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let others: Vec<u64> = (0..20)
            .map(|_| *model.sent_ids[1..].choose(&mut rng).unwrap())
            .collect();
        let mut self_sim = 0.0;
        let mut other_sim = 0.0;
        for seed in 0..20u64 {
            let inferred = model.infer_vector(&tokens, 50, 0.025, seed).unwrap();
            self_sim += cos(&inferred, &own);
            other_sim += cos(&inferred, &model.extract_vector(others[seed as usize]).unwrap());
        }
        assert!(
            self_sim > other_sim,
            "mean cosine to own vector {self_sim} should beat random vectors {other_sim}"
        );
    }

    #[test]
    fn empty_vocabulary_is_an_error() {
        let corpus = "d1\t2008-01-01\tEach word appears once only here\n";
        let store = CorpusStore::ingest_strings(corpus, "ea\tg\teach\n").unwrap();
        let config = TrainConfig { min_count: 5, ..small_config() };
        assert!(train_dm(&store, &config).is_err());
    }

    #[test]
    fn invalid_learning_rates_are_rejected() {
        let config = TrainConfig { lr_initial: 0.001, lr_final: 0.01, ..TrainConfig::default() };
        assert!(config.validate().is_err());
    }

    #[test]
    fn parallel_mode_produces_a_usable_model() {
        let store = repeated_corpus();
        let config = TrainConfig { threads: 3, ..small_config() };
        let outcome = train_dm(&store, &config).unwrap();
        let first = outcome.epoch_mean_log_prob[0];
        let last = *outcome.epoch_mean_log_prob.last().unwrap();
        assert!(last > first);
    }
}
