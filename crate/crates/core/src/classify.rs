//! Feed-forward relevance classifier over sentence vectors.
//!
//! A single hidden layer maps an input vector to two softmax logits; the
//! posterior for the positive class scores how event-relevant a sentence is.
//! Training uses minibatch Nesterov momentum and keeps the parameters from
//! the epoch with the lowest validation loss.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::binio::{BinReader, BinWriter};
use crate::embed::EmbeddingModel;
use crate::labeling::LabeledInstance;
use crate::{Error, Result};

const CLF_MAGIC: &[u8; 4] = b"ESCL";
const CLF_VERSION: u32 = 1;

/// Hidden-layer nonlinearity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Logistic,
    Tanh,
}

impl Activation {
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Logistic => crate::mathutil::sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    // Derivative expressed in terms of the pre-activation value.
    fn slope(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Logistic => {
                let s = crate::mathutil::sigmoid(x);
                s * (1.0 - s)
            }
            Activation::Tanh => 1.0 - x.tanh() * x.tanh(),
        }
    }

    fn as_u8(self) -> u8 {
        match self {
            Activation::Relu => 0,
            Activation::Logistic => 1,
            Activation::Tanh => 2,
        }
    }

    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(Activation::Relu),
            1 => Some(Activation::Logistic),
            2 => Some(Activation::Tanh),
            _ => None,
        }
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "relu" => Ok(Activation::Relu),
            "logistic" => Ok(Activation::Logistic),
            "tanh" => Ok(Activation::Tanh),
            _ => Err(Error::InvalidInput(format!(
                "unknown activation {s:?}, expected relu, logistic, or tanh"
            ))),
        }
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            Activation::Relu => "relu",
            Activation::Logistic => "logistic",
            Activation::Tanh => "tanh",
        };
        f.write_str(name)
    }
}

/// How the output layer produces logits for the softmax.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputForm {
    /// Softmax directly over the affine output layer.
    LinearLogits,
    /// The hidden nonlinearity is applied to the output layer first.
    LiteralSquashed,
}

impl OutputForm {
    fn as_u8(self) -> u8 {
        match self {
            OutputForm::LinearLogits => 0,
            OutputForm::LiteralSquashed => 1,
        }
    }

    fn from_u8(v: u8) -> Option<Self> {
        match v {
            0 => Some(OutputForm::LinearLogits),
            1 => Some(OutputForm::LiteralSquashed),
            _ => None,
        }
    }
}

impl FromStr for OutputForm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear-logits" => Ok(OutputForm::LinearLogits),
            "literal-squashed" => Ok(OutputForm::LiteralSquashed),
            _ => Err(Error::InvalidInput(format!(
                "unknown output form {s:?}, expected linear-logits or literal-squashed"
            ))),
        }
    }
}

impl fmt::Display for OutputForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            OutputForm::LinearLogits => "linear-logits",
            OutputForm::LiteralSquashed => "literal-squashed",
        };
        f.write_str(name)
    }
}

/// Classifier architecture and training hyperparameters.
#[derive(Debug, Clone)]
pub struct ClassifierConfig {
    pub input_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub output_form: OutputForm,
    pub lr: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl ClassifierConfig {
    /// Defaults for a given input width.
    pub fn new(input_dim: usize) -> Self {
        ClassifierConfig {
            input_dim,
            hidden: 50,
            activation: Activation::Relu,
            output_form: OutputForm::LinearLogits,
            lr: 0.01,
            momentum: 0.9,
            epochs: 100,
            batch_size: 32,
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::InvalidInput("input_dim must be positive".into()));
        }
        if self.hidden == 0 {
            return Err(Error::InvalidInput("hidden must be positive".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "learning rate must be positive and finite, got {}",
                self.lr
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidInput(format!(
                "momentum must be in [0, 1), got {}",
                self.momentum
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidInput("epochs must be positive".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidInput("batch_size must be positive".into()));
        }
        Ok(())
    }
}

/// Per-epoch losses and the epoch whose parameters were kept.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub valid_loss: Vec<f64>,
    pub best_epoch: usize,
}

/// Two-class feed-forward network with one hidden layer.
#[derive(Debug, Clone)]
pub struct RelevanceClassifier {
    pub input_dim: usize,
    pub hidden: usize,
    pub activation: Activation,
    pub output_form: OutputForm,
    /// Hidden weights, `hidden x input_dim` row-major.
    pub w1: Vec<f64>,
    pub b1: Vec<f64>,
    /// Output weights, `2 x hidden` row-major.
    pub w2: Vec<f64>,
    pub b2: Vec<f64>,
}

// Gradient or velocity storage shaped like the parameters.
#[derive(Clone)]
struct ParamSet {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl ParamSet {
    fn zeros(input_dim: usize, hidden: usize) -> Self {
        ParamSet {
            w1: vec![0.0; hidden * input_dim],
            b1: vec![0.0; hidden],
            w2: vec![0.0; 2 * hidden],
            b2: vec![0.0; 2],
        }
    }

    fn reset(&mut self) {
        self.w1.fill(0.0);
        self.b1.fill(0.0);
        self.w2.fill(0.0);
        self.b2.fill(0.0);
    }
}

impl RelevanceClassifier {
    /// Seeded uniform init in +-1/sqrt(fan_in) per layer, zero biases.
    pub fn init(config: &ClassifierConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let bound1 = 1.0 / (config.input_dim as f64).sqrt();
        let w1 = (0..config.hidden * config.input_dim)
            .map(|_| rng.random_range(-bound1..bound1))
            .collect();
        let bound2 = 1.0 / (config.hidden as f64).sqrt();
        let w2 = (0..2 * config.hidden)
            .map(|_| rng.random_range(-bound2..bound2))
            .collect();
        Ok(RelevanceClassifier {
            input_dim: config.input_dim,
            hidden: config.hidden,
            activation: config.activation,
            output_form: config.output_form,
            w1,
            b1: vec![0.0; config.hidden],
            w2,
            b2: vec![0.0; 2],
        })
    }

    // Fills hidden pre-activations and the two output logits for one input row.
    fn forward(&self, x: &[f64], hpre: &mut [f64], logits: &mut [f64; 2]) {
        for j in 0..self.hidden {
            let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
            hpre[j] = self.b1[j] + crate::mathutil::dot(row, x);
        }
        for c in 0..2 {
            let mut sum = self.b2[c];
            for j in 0..self.hidden {
                sum += self.w2[c * self.hidden + j] * self.activation.apply(hpre[j]);
            }
            logits[c] = match self.output_form {
                OutputForm::LinearLogits => sum,
                OutputForm::LiteralSquashed => self.activation.apply(sum),
            };
        }
    }

    // Log-softmax of the requested class, stabilized by max subtraction.
    fn log_posterior_of(logits: &[f64; 2], class: usize) -> f64 {
        let m = logits[0].max(logits[1]);
        let lse = ((logits[0] - m).exp() + (logits[1] - m).exp()).ln();
        logits[class] - m - lse
    }

    /// Posterior probability of the positive class for one input row.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.input_dim, "input width mismatch");
        let mut hpre = vec![0.0; self.hidden];
        let mut logits = [0.0; 2];
        self.forward(x, &mut hpre, &mut logits);
        Self::log_posterior_of(&logits, 1).exp()
    }

    /// Posterior for each row of a flat `n x input_dim` matrix.
    pub fn posteriors(&self, xs: &[f64]) -> Vec<f64> {
        assert_eq!(xs.len() % self.input_dim, 0, "input width mismatch");
        let mut hpre = vec![0.0; self.hidden];
        let mut logits = [0.0; 2];
        xs.chunks_exact(self.input_dim)
            .map(|x| {
                self.forward(x, &mut hpre, &mut logits);
                Self::log_posterior_of(&logits, 1).exp()
            })
            .collect()
    }

    /// Mean cross-entropy of labels under the current parameters.
    pub fn mean_loss(&self, xs: &[f64], ys: &[u8]) -> f64 {
        assert_eq!(xs.len(), ys.len() * self.input_dim, "input width mismatch");
        let mut hpre = vec![0.0; self.hidden];
        let mut logits = [0.0; 2];
        let mut sum = 0.0;
        for (x, &y) in xs.chunks_exact(self.input_dim).zip(ys) {
            self.forward(x, &mut hpre, &mut logits);
            sum -= Self::log_posterior_of(&logits, y as usize);
        }
        sum / ys.len() as f64
    }

    // Accumulates mean-loss gradients for the given rows into `grads`
    // (which must be zeroed) and returns the mean cross-entropy.
    fn batch_gradients(&self, xs: &[f64], ys: &[u8], rows: &[usize], grads: &mut ParamSet) -> f64 {
        let mut hpre = vec![0.0; self.hidden];
        let mut hact = vec![0.0; self.hidden];
        let mut logits = [0.0; 2];
        let mut opre = [0.0; 2];
        let scale = 1.0 / rows.len() as f64;
        let mut loss = 0.0;
        for &r in rows {
            let x = &xs[r * self.input_dim..(r + 1) * self.input_dim];
            let y = ys[r] as usize;
            for j in 0..self.hidden {
                let row = &self.w1[j * self.input_dim..(j + 1) * self.input_dim];
                hpre[j] = self.b1[j] + crate::mathutil::dot(row, x);
                hact[j] = self.activation.apply(hpre[j]);
            }
            for c in 0..2 {
                let mut sum = self.b2[c];
                for j in 0..self.hidden {
                    sum += self.w2[c * self.hidden + j] * hact[j];
                }
                opre[c] = sum;
                logits[c] = match self.output_form {
                    OutputForm::LinearLogits => sum,
                    OutputForm::LiteralSquashed => self.activation.apply(sum),
                };
            }
            loss -= Self::log_posterior_of(&logits, y);
            // Softmax cross-entropy: d logits = p - onehot(y).
            let m = logits[0].max(logits[1]);
            let e0 = (logits[0] - m).exp();
            let e1 = (logits[1] - m).exp();
            let z = e0 + e1;
            let mut dout = [e0 / z, e1 / z];
            dout[y] -= 1.0;
            if self.output_form == OutputForm::LiteralSquashed {
                for c in 0..2 {
                    dout[c] *= self.activation.slope(opre[c]);
                }
            }
            for c in 0..2 {
                let d = dout[c] * scale;
                grads.b2[c] += d;
                for j in 0..self.hidden {
                    grads.w2[c * self.hidden + j] += d * hact[j];
                }
            }
            for j in 0..self.hidden {
                let dh = (dout[0] * self.w2[j] + dout[1] * self.w2[self.hidden + j])
                    * self.activation.slope(hpre[j])
                    * scale;
                if dh == 0.0 {
                    continue;
                }
                grads.b1[j] += dh;
                let row = &mut grads.w1[j * self.input_dim..(j + 1) * self.input_dim];
                for (g, &xi) in row.iter_mut().zip(x) {
                    *g += dh * xi;
                }
            }
        }
        loss * scale
    }

    fn snapshot(&self) -> ParamSet {
        ParamSet {
            w1: self.w1.clone(),
            b1: self.b1.clone(),
            w2: self.w2.clone(),
            b2: self.b2.clone(),
        }
    }

    fn store_into(&self, out: &mut ParamSet) {
        out.w1.copy_from_slice(&self.w1);
        out.b1.copy_from_slice(&self.b1);
        out.w2.copy_from_slice(&self.w2);
        out.b2.copy_from_slice(&self.b2);
    }

    fn restore(&mut self, saved: &ParamSet) {
        self.w1.copy_from_slice(&saved.w1);
        self.b1.copy_from_slice(&saved.b1);
        self.w2.copy_from_slice(&saved.w2);
        self.b2.copy_from_slice(&saved.b2);
    }

    // Applies `f(theta, velocity, gradient, saved)` to each parameter group.
    fn for_each_group(
        &mut self,
        vel: &mut ParamSet,
        grads: &ParamSet,
        saved: &ParamSet,
        f: impl Fn(&mut [f64], &mut [f64], &[f64], &[f64]),
    ) {
        f(&mut self.w1, &mut vel.w1, &grads.w1, &saved.w1);
        f(&mut self.b1, &mut vel.b1, &grads.b1, &saved.b1);
        f(&mut self.w2, &mut vel.w2, &grads.w2, &saved.w2);
        f(&mut self.b2, &mut vel.b2, &grads.b2, &saved.b2);
    }

    /// Trains with minibatch Nesterov momentum. Keeps the parameters from
    /// the epoch with the lowest validation loss, or the final epoch when no
    /// validation set is given.
    pub fn train(
        &mut self,
        xs: &[f64],
        ys: &[u8],
        valid: Option<(&[f64], &[u8])>,
        config: &ClassifierConfig,
    ) -> Result<TrainReport> {
        config.validate()?;
        check_dataset(xs, ys, self.input_dim)?;
        if !ys.contains(&0) || !ys.contains(&1) {
            return Err(Error::Data(
                "training labels contain a single class".into(),
            ));
        }
        if let Some((vx, vy)) = valid {
            check_dataset(vx, vy, self.input_dim)?;
        }
        let n = ys.len();
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let mut vel = ParamSet::zeros(self.input_dim, self.hidden);
        let mut grads = vel.clone();
        let mut saved = self.snapshot();
        let mut report = TrainReport {
            train_loss: Vec::with_capacity(config.epochs),
            valid_loss: Vec::new(),
            best_epoch: config.epochs - 1,
        };
        let mut best: Option<(f64, ParamSet)> = None;
        let mu = config.momentum;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut epoch_loss = 0.0;
            for batch in order.chunks(config.batch_size) {
                // Nesterov lookahead: gradients at theta + mu * velocity.
                self.for_each_group(&mut vel, &grads, &saved, |theta, v, _, _| {
                    for i in 0..theta.len() {
                        theta[i] += mu * v[i];
                    }
                });
                grads.reset();
                let loss = self.batch_gradients(xs, ys, batch, &mut grads);
                epoch_loss += loss * batch.len() as f64;
                self.for_each_group(&mut vel, &grads, &saved, |theta, v, g, s| {
                    for i in 0..theta.len() {
                        v[i] = mu * v[i] - config.lr * g[i];
                        theta[i] = s[i] + v[i];
                    }
                });
                self.store_into(&mut saved);
            }
            report.train_loss.push(epoch_loss / n as f64);
            if let Some((vx, vy)) = valid {
                let vl = self.mean_loss(vx, vy);
                report.valid_loss.push(vl);
                if best.as_ref().is_none_or(|(b, _)| vl < *b) {
                    best = Some((vl, self.snapshot()));
                    report.best_epoch = epoch;
                }
            }
        }
        if let Some((_, params)) = best {
            self.restore(&params);
        }
        Ok(report)
    }

    fn write_to<W: std::io::Write>(&self, w: &mut BinWriter<W>) -> std::io::Result<()> {
        w.bytes(CLF_MAGIC)?;
        w.u32(CLF_VERSION)?;
        w.u32(self.input_dim as u32)?;
        w.u32(self.hidden as u32)?;
        w.u8(self.activation.as_u8())?;
        w.u8(self.output_form.as_u8())?;
        w.f32_slice(&self.w1)?;
        w.f32_slice(&self.b1)?;
        w.f32_slice(&self.w2)?;
        w.f32_slice(&self.b2)
    }

    /// Writes the classifier as a little-endian binary file.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BinWriter::new(BufWriter::new(file));
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.finish().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Reads a classifier written by [`RelevanceClassifier::save`].
    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BinReader::new(BufReader::new(file), path);
        r.expect_magic(CLF_MAGIC, "classifier")?;
        r.expect_version(CLF_VERSION)?;
        let input_dim = r.u32()? as usize;
        let hidden = r.u32()? as usize;
        let act = r.u8()?;
        let activation = Activation::from_u8(act)
            .ok_or_else(|| Error::format(path, format!("unknown activation code {act}")))?;
        let form = r.u8()?;
        let output_form = OutputForm::from_u8(form)
            .ok_or_else(|| Error::format(path, format!("unknown output form code {form}")))?;
        let clf = RelevanceClassifier {
            input_dim,
            hidden,
            activation,
            output_form,
            w1: r.f32_slice(hidden * input_dim)?,
            b1: r.f32_slice(hidden)?,
            w2: r.f32_slice(2 * hidden)?,
            b2: r.f32_slice(2)?,
        };
        r.expect_eof()?;
        Ok(clf)
    }
}

fn check_dataset(xs: &[f64], ys: &[u8], input_dim: usize) -> Result<()> {
    if ys.is_empty() {
        return Err(Error::Data("dataset is empty".into()));
    }
    if xs.len() != ys.len() * input_dim {
        return Err(Error::Data(format!(
            "feature matrix holds {} values, expected {} rows x {} dims",
            xs.len(),
            ys.len(),
            input_dim
        )));
    }
    if let Some(bad) = ys.iter().find(|&&y| y > 1) {
        return Err(Error::Data(format!("label {bad} is not 0 or 1")));
    }
    Ok(())
}

/// Extracts the trained sentence vector and label for each instance as a
/// flat feature matrix aligned with the instance order.
pub fn instance_features(
    model: &EmbeddingModel,
    instances: &[LabeledInstance],
) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut xs = Vec::with_capacity(instances.len() * model.dim);
    let mut ys = Vec::with_capacity(instances.len());
    for inst in instances {
        xs.extend_from_slice(&model.extract_vector(inst.sentence_id)?);
        ys.push(inst.label);
    }
    Ok((xs, ys))
}

/// Scores each instance's sentence vector with the classifier.
pub fn score_instances(
    clf: &RelevanceClassifier,
    model: &EmbeddingModel,
    instances: &[LabeledInstance],
) -> Result<Vec<f64>> {
    if clf.input_dim != model.dim {
        return Err(Error::InvalidInput(format!(
            "classifier expects {} dims but embedding model has {}",
            clf.input_dim, model.dim
        )));
    }
    instances
        .iter()
        .map(|inst| Ok(clf.posterior(&model.extract_vector(inst.sentence_id)?)))
        .collect()
}
