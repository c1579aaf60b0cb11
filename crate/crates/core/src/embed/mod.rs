//! Distributed-memory sentence embeddings. A sliding window of `context_n`
//! word vectors plus a per-sentence vector predicts the following word
//! through a hierarchical softmax over a Huffman tree. Sentence vectors are
//! trained for mention-bearing sentences; other sentences can contribute a
//! word-only pass. Parameters live in f64 but persist at f32, so a loaded
//! model re-saves byte-identically.

mod huffman;
mod train;
mod vocab;

pub use huffman::{build_huffman, HuffmanTree};
pub use train::{train_dm, TrainOutcome};
pub use vocab::{build_vocab, Vocabulary};

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};
use crate::mathutil::{dot, ln_sigmoid, sigmoid};

const MODEL_MAGIC: &[u8; 4] = b"ESEM";
const MODEL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub dim: usize,
    /// Context words per window; the window predicts the following word.
    pub context_n: usize,
    pub min_count: u64,
    pub epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    /// Train word and output vectors on sentences without mentions too,
    /// omitting the sentence-vector term from the input mean.
    pub include_word_only_pass: bool,
    /// Learn an affine projection (U, beta) of the input mean; off by
    /// default, leaving U = identity and beta = 0.
    pub learn_projection: bool,
    pub infer_steps: usize,
    /// Learning rate for inference on unseen sentences.
    pub infer_lr: f64,
    pub seed: u64,
    /// Lock-free parallel training shards when > 1; single-threaded runs
    /// are bit-reproducible.
    pub threads: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dim: 600,
            context_n: 5,
            min_count: 5,
            epochs: 5,
            lr_initial: 0.025,
            lr_final: 0.0001,
            include_word_only_pass: true,
            learn_projection: false,
            infer_steps: 50,
            infer_lr: 0.0125,
            seed: 42,
            threads: 1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.context_n == 0 || self.epochs == 0 {
            return Err(Error::InvalidInput("dim, context_n, and epochs must be positive".into()));
        }
        if !(self.lr_initial > self.lr_final && self.lr_final > 0.0) {
            return Err(Error::InvalidInput(
                "learning rates must satisfy initial > final > 0".into(),
            ));
        }
        if self.infer_lr <= 0.0 {
            return Err(Error::InvalidInput("infer_lr must be positive".into()));
        }
        if self.threads == 0 {
            return Err(Error::InvalidInput("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub dim: usize,
    pub context_n: usize,
    pub learn_projection: bool,
    pub vocab: Vocabulary,
    pub tree: HuffmanTree,
    /// |V| x dim input word vectors, row-major.
    pub word_vecs: Vec<f64>,
    /// One row per trained sentence, aligned with `sent_ids`.
    pub sent_vecs: Vec<f64>,
    /// Sorted sentence ids owning a trained vector.
    pub sent_ids: Vec<u64>,
    /// dim x dim projection applied to the input mean.
    pub proj: Vec<f64>,
    /// dim projection bias.
    pub bias: Vec<f64>,
    /// (|V|-1) x dim hierarchical-softmax node vectors.
    pub node_vecs: Vec<f64>,
    /// Sentences that had no full window and keep their init vector.
    pub no_window_ids: Vec<u64>,
}

impl EmbeddingModel {
    pub fn slot_of(&self, sentence_id: u64) -> Option<usize> {
        self.sent_ids.binary_search(&sentence_id).ok()
    }

    pub fn word_vec(&self, word_id: usize) -> &[f64] {
        &self.word_vecs[word_id * self.dim..(word_id + 1) * self.dim]
    }

    pub fn sent_vec(&self, slot: usize) -> &[f64] {
        &self.sent_vecs[slot * self.dim..(slot + 1) * self.dim]
    }

    fn node_vec(&self, node: usize) -> &[f64] {
        &self.node_vecs[node * self.dim..(node + 1) * self.dim]
    }

    /// beta + U v; with the default identity configuration this is `v`
    /// itself, bit for bit.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        if !self.learn_projection {
            return v.to_vec();
        }
        let mut out = self.bias.clone();
        for (i, o) in out.iter_mut().enumerate() {
            *o += dot(&self.proj[i * self.dim..(i + 1) * self.dim], v);
        }
        out
    }

    /// U^T g, the input-space gradient of a projected-space gradient.
    pub(crate) fn project_transpose(&self, g: &[f64]) -> Vec<f64> {
        if !self.learn_projection {
            return g.to_vec();
        }
        let mut out = vec![0.0; self.dim];
        for (i, &gi) in g.iter().enumerate() {
            let row = &self.proj[i * self.dim..(i + 1) * self.dim];
            for (o, &r) in out.iter_mut().zip(row) {
                *o += gi * r;
            }
        }
        out
    }

    /// The trained representation of a sentence: beta + U * D_row.
    pub fn extract_vector(&self, sentence_id: u64) -> Result<Vec<f64>> {
        let slot = self.slot_of(sentence_id).ok_or_else(|| {
            Error::InvalidInput(format!("sentence {sentence_id} has no trained vector"))
        })?;
        Ok(self.project(self.sent_vec(slot)))
    }

    /// Probability of `word` given an input-space vector; probabilities over
    /// the whole vocabulary sum to 1.
    pub fn hs_prob(&self, input: &[f64], word: &str) -> Result<f64> {
        let wid = self
            .vocab
            .get(word)
            .ok_or_else(|| Error::InvalidInput(format!("word {word:?} not in vocabulary")))?;
        let h = self.project(input);
        Ok(self.log_prob_projected(&h, wid).exp())
    }

    /// ln p(word_id | h) for an already projected input.
    pub(crate) fn log_prob_projected(&self, h: &[f64], word_id: usize) -> f64 {
        let code = self.tree.code(word_id);
        let path = self.tree.path(word_id);
        let mut logp = 0.0;
        for (&b, &node) in code.iter().zip(path) {
            let f = dot(self.node_vec(node as usize), h);
            // bit 0 is the sigmoid branch, bit 1 its complement
            logp += ln_sigmoid(if b == 0 { f } else { -f });
        }
        logp
    }

    /// -ln p(target | window): the loss one training window minimizes.
    /// `slot` selects a sentence vector to include in the input mean.
    pub fn window_loss(&self, slot: Option<usize>, context: &[usize], target: usize) -> f64 {
        let mut m = vec![0.0; self.dim];
        let mut cnt = 0.0;
        if let Some(s) = slot {
            for (j, &x) in self.sent_vec(s).iter().enumerate() {
                m[j] += x;
            }
            cnt += 1.0;
        }
        for &w in context {
            for (j, &x) in self.word_vec(w).iter().enumerate() {
                m[j] += x;
            }
            cnt += 1.0;
        }
        for x in m.iter_mut() {
            *x /= cnt;
        }
        let h = self.project(&m);
        -self.log_prob_projected(&h, target)
    }

    /// Learns a vector for an unseen token sequence: seeded small-uniform
    /// init, then `steps` epochs of window updates with every stored
    /// parameter frozen. Errors when no token is in the vocabulary.
    pub fn infer_vector(
        &self,
        tokens: &[String],
        steps: usize,
        lr: f64,
        seed: u64,
    ) -> Result<Vec<f64>> {
        let ids: Vec<usize> = tokens.iter().filter_map(|t| self.vocab.get(t)).collect();
        if ids.is_empty() {
            return Err(Error::InvalidInput("all tokens are out of vocabulary".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 0.5 / self.dim as f64;
        let mut v: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-span..span)).collect();
        let n = self.context_n;
        if ids.len() > n {
            let cnt = (n + 1) as f64;
            for _ in 0..steps {
                for i in 0..=(ids.len() - n - 1) {
                    let context = &ids[i..i + n];
                    let target = ids[i + n];
                    let mut m = v.clone();
                    for &w in context {
                        for (j, &x) in self.word_vec(w).iter().enumerate() {
                            m[j] += x;
                        }
                    }
                    for x in m.iter_mut() {
                        *x /= cnt;
                    }
                    let h = self.project(&m);
                    let mut g = vec![0.0; self.dim];
                    for (&b, &node) in
                        self.tree.code(target).iter().zip(self.tree.path(target))
                    {
                        let nv = self.node_vec(node as usize);
                        let f = dot(nv, &h);
                        let gf = sigmoid(f) - (1.0 - b as f64);
                        for (gj, &nj) in g.iter_mut().zip(nv) {
                            *gj += gf * nj;
                        }
                    }
                    let gm = self.project_transpose(&g);
                    for (vj, &gj) in v.iter_mut().zip(&gm) {
                        *vj -= lr * gj / cnt;
                    }
                }
            }
        }
        Ok(self.project(&v))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BinWriter::new(BufWriter::new(file));
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.finish().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    fn write_to<W: Write>(&self, w: &mut BinWriter<W>) -> std::io::Result<()> {
        w.bytes(MODEL_MAGIC)?;
        w.u32(MODEL_VERSION)?;
        w.u32(self.dim as u32)?;
        w.u32(self.context_n as u32)?;
        w.u8(self.learn_projection as u8)?;
        w.u32(self.vocab.len() as u32)?;
        for id in 0..self.vocab.len() {
            w.string(self.vocab.word(id))?;
            w.u64(self.vocab.freq(id))?;
        }
        for id in 0..self.vocab.len() {
            let code = self.tree.code(id);
            let path = self.tree.path(id);
            w.u32(code.len() as u32)?;
            for (&b, &p) in code.iter().zip(path) {
                w.u8(b)?;
                w.u32(p)?;
            }
        }
        w.u64(self.sent_ids.len() as u64)?;
        for &id in &self.sent_ids {
            w.u64(id)?;
        }
        w.u64(self.no_window_ids.len() as u64)?;
        for &id in &self.no_window_ids {
            w.u64(id)?;
        }
        w.f32_slice(&self.word_vecs)?;
        w.f32_slice(&self.sent_vecs)?;
        w.f32_slice(&self.proj)?;
        w.f32_slice(&self.bias)?;
        w.f32_slice(&self.node_vecs)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BinReader::new(BufReader::new(file), path);
        r.expect_magic(MODEL_MAGIC, "embedding model")?;
        r.expect_version(MODEL_VERSION)?;
        let dim = r.u32()? as usize;
        let context_n = r.u32()? as usize;
        let learn_projection = r.u8()? != 0;
        let n_words = r.u32()? as usize;
        let mut entries = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let word = r.string()?;
            let freq = r.u64()?;
            entries.push((word, freq));
        }
        let vocab = Vocabulary::from_entries(entries.clone());
        // Ordering is part of the format: entries must already be in vocab order.
        for (id, (word, _)) in entries.iter().enumerate() {
            if vocab.word(id) != word {
                return Err(Error::format(path, "vocabulary not in canonical order"));
            }
        }
        let mut codes = Vec::with_capacity(n_words);
        let mut paths = Vec::with_capacity(n_words);
        for _ in 0..n_words {
            let len = r.u32()? as usize;
            let mut code = Vec::with_capacity(len);
            let mut p = Vec::with_capacity(len);
            for _ in 0..len {
                code.push(r.u8()?);
                p.push(r.u32()?);
            }
            codes.push(code);
            paths.push(p);
        }
        let tree = HuffmanTree::from_parts(codes, paths)
            .map_err(|e| Error::format(path, e.to_string()))?;
        let n_sent = r.u64()? as usize;
        let mut sent_ids = Vec::with_capacity(n_sent);
        for _ in 0..n_sent {
            sent_ids.push(r.u64()?);
        }
        let n_nw = r.u64()? as usize;
        let mut no_window_ids = Vec::with_capacity(n_nw);
        for _ in 0..n_nw {
            no_window_ids.push(r.u64()?);
        }
        let word_vecs = r.f32_slice(n_words * dim)?;
        let sent_vecs = r.f32_slice(n_sent * dim)?;
        let proj = r.f32_slice(dim * dim)?;
        let bias = r.f32_slice(dim)?;
        let node_vecs = r.f32_slice(n_words.saturating_sub(1) * dim)?;
        r.expect_eof()?;
        Ok(EmbeddingModel {
            dim,
            context_n,
            learn_projection,
            vocab,
            tree,
            word_vecs,
            sent_vecs,
            sent_ids,
            proj,
            bias,
            node_vecs,
            no_window_ids,
        })
    }
}

pub(crate) fn identity_matrix(dim: usize) -> Vec<f64> {
    let mut m = vec![0.0; dim * dim];
    for i in 0..dim {
        m[i * dim + i] = 1.0;
    }
    m
}


#[cfg(test)]
mod tests {
    use super::*;

    /// Model with given vocab size and seeded random parameters.
    pub(super) fn random_model(
        n_words: usize,
        dim: usize,
        learn_projection: bool,
        seed: u64,
    ) -> EmbeddingModel {
        let entries: Vec<(String, u64)> =
            (0..n_words).map(|i| (format!("w{i:03}"), (n_words - i) as u64 * 3 + 1)).collect();
        let vocab = Vocabulary::from_entries(entries);
        let tree = build_huffman(vocab.freqs()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut draw = |len: usize| -> Vec<f64> {
            (0..len).map(|_| rng.random_range(-0.8..0.8)).collect()
        };
        let word_vecs = draw(n_words * dim);
        let sent_vecs = draw(2 * dim);
        let node_vecs = draw((n_words - 1) * dim);
        let (proj, bias) = if learn_projection {
            (draw(dim * dim), draw(dim))
        } else {
            (identity_matrix(dim), vec![0.0; dim])
        };
        EmbeddingModel {
            dim,
            context_n: 3,
            learn_projection,
            vocab,
            tree,
            word_vecs,
            sent_vecs,
            sent_ids: vec![0, 1],
            proj,
            bias,
            node_vecs,
            no_window_ids: vec![],
        }
    }

    #[test]
    fn two_word_vocab_with_zero_vectors_is_uniform() {
        let mut model = random_model(2, 4, false, 1);
        model.node_vecs.iter_mut().for_each(|x| *x = 0.0);
        let input = vec![0.3, -0.2, 0.5, 0.1];
        assert_eq!(model.hs_prob(&input, "w000").unwrap(), 0.5);
        assert_eq!(model.hs_prob(&input, "w001").unwrap(), 0.5);
    }

    #[test]
    fn probabilities_sum_to_one_for_any_state() {
        for seed in 0..6u64 {
            for &n in &[2usize, 3, 17, 64] {
                let model = random_model(n, 8, seed % 2 == 0, seed);
                let input: Vec<f64> = (0..8).map(|i| (i as f64 - 3.0) / 4.0).collect();
                let total: f64 = (0..n)
                    .map(|w| model.hs_prob(&input, &format!("w{w:03}")).unwrap())
                    .sum();
                assert!((total - 1.0).abs() <= 1e-8, "sum {total} for n={n} seed={seed}");
            }
        }
    }

    #[test]
    fn unknown_word_is_an_error() {
        let model = random_model(4, 4, false, 2);
        assert!(model.hs_prob(&[0.0; 4], "nope").is_err());
    }

    #[test]
    fn large_magnitude_inputs_stay_finite() {
        let model = random_model(8, 4, false, 3);
        let input = vec![1e4, -1e4, 1e4, -1e4];
        for w in 0..8 {
            let p = model.hs_prob(&input, &format!("w{w:03}")).unwrap();
            assert!(p.is_finite() && (0.0..=1.0).contains(&p), "p={p}");
        }
    }

    #[test]
    fn extract_returns_stored_row_exactly_under_identity() {
        let model = random_model(6, 5, false, 4);
        assert_eq!(model.extract_vector(0).unwrap(), model.sent_vec(0));
        assert_eq!(model.extract_vector(1).unwrap(), model.sent_vec(1));
        assert!(model.extract_vector(99).is_err());
    }

    #[test]
    fn extract_applies_learned_projection() {
        let model = random_model(6, 5, true, 5);
        let row = model.sent_vec(0);
        // Plain matrix-vector product as the oracle.
        let mut expect = model.bias.clone();
        for i in 0..5 {
            for j in 0..5 {
                expect[i] += model.proj[i * 5 + j] * row[j];
            }
        }
        let got = model.extract_vector(0).unwrap();
        for (g, e) in got.iter().zip(&expect) {
            assert!((g - e).abs() < 1e-12);
        }
    }

    #[test]
    fn infer_is_seed_deterministic_and_seed_sensitive() {
        let model = random_model(10, 6, false, 6);
        let tokens: Vec<String> = ["w000", "w001", "w002", "w003", "w004"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        let a = model.infer_vector(&tokens, 10, 0.01, 7).unwrap();
        let b = model.infer_vector(&tokens, 10, 0.01, 7).unwrap();
        let c = model.infer_vector(&tokens, 10, 0.01, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn infer_with_zero_steps_returns_seeded_noise() {
        let model = random_model(10, 6, false, 6);
        let tokens = vec!["w000".to_string(), "w001".to_string()];
        let v = model.infer_vector(&tokens, 0, 0.01, 9).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let span = 0.5 / 6.0;
        let expect: Vec<f64> = (0..6).map(|_| rng.random_range(-span..span)).collect();
        assert_eq!(v, expect);
    }

    #[test]
    fn infer_rejects_fully_oov_input() {
        let model = random_model(4, 4, false, 2);
        let tokens = vec!["zzz".to_string()];
        assert!(model.infer_vector(&tokens, 5, 0.01, 1).is_err());
    }

    #[test]
    fn save_load_round_trip_is_byte_exact() {
        let model = random_model(12, 5, true, 10);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("m1.bin");
        let p2 = dir.path().join("m2.bin");
        model.save(&p1).unwrap();
        let loaded = EmbeddingModel::load(&p1).unwrap();
        loaded.save(&p2).unwrap();
        assert_eq!(std::fs::read(&p1).unwrap(), std::fs::read(&p2).unwrap());
        // And a loaded model is stable under another round trip.
        assert_eq!(loaded, EmbeddingModel::load(&p2).unwrap());
    }

    #[test]
    fn load_rejects_wrong_magic() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("bad.bin");
        std::fs::write(&p, b"NOPE0000").unwrap();
        assert!(EmbeddingModel::load(&p).is_err());
    }
}
