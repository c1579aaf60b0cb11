//! Flat `key = value` pipeline configuration. Every key has a default;
//! unknown keys and malformed values are rejected with their line number.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use eventscope::classify::{Activation, ClassifierConfig, OutputForm};
use eventscope::describe::DescribeConfig;
use eventscope::embed::TrainConfig;
use eventscope::evaluate::{default_mu_grid, EvalConfig, EvalLevel, FoldStrategy};
use eventscope::labeling::WindowConfig;
use eventscope::signal::{GroupMode, IndexConfig, PeriodKind};
use eventscope::synth::SynthConfig;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Everything the pipeline commands need, resolvable from defaults, a
/// config file, and command-line overrides, in that order.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    pub corpus: PathBuf,
    pub lexicon: PathBuf,
    pub events: PathBuf,
    pub model_dir: PathBuf,
    pub out_dir: PathBuf,

    pub w_in: (i64, i64),
    pub w_out: (i64, i64),
    pub coverage_pad: i64,

    pub dim: usize,
    pub context_n: usize,
    pub min_count: u64,
    pub embed_epochs: usize,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub word_only_pass: bool,
    pub learn_projection: bool,

    pub hidden: usize,
    pub activation: Activation,
    pub output_form: OutputForm,
    pub clf_lr: f64,
    pub momentum: f64,
    pub clf_epochs: usize,
    pub batch_size: usize,
    /// Held-out share used to pick the best classifier epoch; 0 keeps the
    /// final epoch.
    pub valid_fraction: f64,

    pub folds: usize,
    pub reshuffles: usize,
    pub fold_strategy: FoldStrategy,
    pub eval_level: EvalLevel,
    pub mu_grid: Vec<f64>,
    pub period: PeriodKind,
    pub period_split: bool,

    pub group_mode: GroupMode,
    pub percentile_step: u32,

    pub infer_samples: usize,
    pub infer_steps: usize,
    pub infer_lr: f64,
    pub excerpt_k: usize,

    pub synth_entities: usize,
    pub synth_events_rate: f64,
    pub synth_span_start: NaiveDate,
    pub synth_span_days: u32,
    pub synth_background_vocab: usize,
    pub synth_event_vocab: usize,
    pub synth_lambda: f64,
    pub synth_sentence_rate: f64,
    pub synth_len_min: usize,
    pub synth_len_max: usize,
    pub synth_context_rate: f64,
    pub synth_groups: usize,

    pub seed: u64,
    pub threads: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let windows = WindowConfig::default();
        let embed = TrainConfig::default();
        let clf = ClassifierConfig::new(embed.dim);
        let eval = EvalConfig::new(embed.dim);
        let index = IndexConfig::default();
        let describe = DescribeConfig::default();
        let synth = SynthConfig::default();
        PipelineConfig {
            corpus: "data/corpus.tsv".into(),
            lexicon: "data/lexicon.tsv".into(),
            events: "data/events.csv".into(),
            model_dir: "models".into(),
            out_dir: "out".into(),
            w_in: windows.inner,
            w_out: windows.outer,
            coverage_pad: windows.coverage_pad,
            dim: embed.dim,
            context_n: embed.context_n,
            min_count: embed.min_count,
            embed_epochs: embed.epochs,
            lr_initial: embed.lr_initial,
            lr_final: embed.lr_final,
            word_only_pass: embed.include_word_only_pass,
            learn_projection: embed.learn_projection,
            hidden: clf.hidden,
            activation: clf.activation,
            output_form: clf.output_form,
            clf_lr: clf.lr,
            momentum: clf.momentum,
            clf_epochs: clf.epochs,
            batch_size: clf.batch_size,
            valid_fraction: 0.15,
            folds: eval.k,
            reshuffles: eval.reshuffles,
            fold_strategy: eval.strategy,
            eval_level: eval.level,
            mu_grid: default_mu_grid(),
            period: eval.period,
            period_split: eval.period_split,
            group_mode: index.group_mode,
            percentile_step: index.percentile_step,
            infer_samples: describe.infer_samples,
            infer_steps: describe.infer_steps,
            infer_lr: describe.infer_lr,
            excerpt_k: describe.k,
            synth_entities: synth.entities,
            synth_events_rate: synth.events_per_entity,
            synth_span_start: synth.span_start,
            synth_span_days: synth.span_days,
            synth_background_vocab: synth.background_vocab,
            synth_event_vocab: synth.event_vocab,
            synth_lambda: synth.lambda,
            synth_sentence_rate: synth.sentences_per_day,
            synth_len_min: synth.sentence_len_min,
            synth_len_max: synth.sentence_len_max,
            synth_context_rate: synth.context_sentences,
            synth_groups: synth.groups,
            seed: 42,
            threads: 1,
        }
    }
}

fn parse_as<T: std::str::FromStr>(value: &str, what: &str) -> Result<T, String>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| format!("invalid {what} {value:?}: {e}"))
}

fn parse_pair(value: &str) -> Result<(i64, i64), String> {
    let (lo, hi) = value
        .split_once(',')
        .ok_or_else(|| format!("expected two comma-separated integers, got {value:?}"))?;
    Ok((parse_as(lo.trim(), "bound")?, parse_as(hi.trim(), "bound")?))
}

fn parse_bool(value: &str) -> Result<bool, String> {
    match value {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(format!("expected true or false, got {other:?}")),
    }
}

fn parse_grid(value: &str) -> Result<Vec<f64>, String> {
    let grid: Vec<f64> = value
        .split(',')
        .map(|v| parse_as(v.trim(), "preference"))
        .collect::<Result<_, _>>()?;
    if grid.is_empty() {
        return Err("mu_grid must not be empty".into());
    }
    Ok(grid)
}

impl PipelineConfig {
    /// Applies one `key = value` assignment; errors name the problem but
    /// not the line (the caller knows it).
    fn apply(&mut self, key: &str, value: &str) -> Result<(), String> {
        match key {
            "corpus" => self.corpus = value.into(),
            "lexicon" => self.lexicon = value.into(),
            "events" => self.events = value.into(),
            "model_dir" => self.model_dir = value.into(),
            "out_dir" => self.out_dir = value.into(),
            "w_in" => self.w_in = parse_pair(value)?,
            "w_out" => self.w_out = parse_pair(value)?,
            "coverage_pad" => self.coverage_pad = parse_as(value, "day count")?,
            "dim" => self.dim = parse_as(value, "dimension")?,
            "context_n" => self.context_n = parse_as(value, "context size")?,
            "min_count" => self.min_count = parse_as(value, "count")?,
            "embed_epochs" => self.embed_epochs = parse_as(value, "epoch count")?,
            "lr_initial" => self.lr_initial = parse_as(value, "learning rate")?,
            "lr_final" => self.lr_final = parse_as(value, "learning rate")?,
            "word_only_pass" => self.word_only_pass = parse_bool(value)?,
            "learn_projection" => self.learn_projection = parse_bool(value)?,
            "hidden" => self.hidden = parse_as(value, "layer width")?,
            "activation" => self.activation = value.parse().map_err(|e| format!("{e}"))?,
            "output_form" => self.output_form = value.parse().map_err(|e| format!("{e}"))?,
            "clf_lr" => self.clf_lr = parse_as(value, "learning rate")?,
            "momentum" => self.momentum = parse_as(value, "momentum")?,
            "clf_epochs" => self.clf_epochs = parse_as(value, "epoch count")?,
            "batch_size" => self.batch_size = parse_as(value, "batch size")?,
            "valid_fraction" => self.valid_fraction = parse_as(value, "fraction")?,
            "folds" => self.folds = parse_as(value, "fold count")?,
            "reshuffles" => self.reshuffles = parse_as(value, "reshuffle count")?,
            "fold_strategy" => self.fold_strategy = value.parse().map_err(|e| format!("{e}"))?,
            "eval_level" => self.eval_level = value.parse().map_err(|e| format!("{e}"))?,
            "mu_grid" => self.mu_grid = parse_grid(value)?,
            "period" => self.period = value.parse().map_err(|e| format!("{e}"))?,
            "period_split" => self.period_split = parse_bool(value)?,
            "group_mode" => self.group_mode = value.parse().map_err(|e| format!("{e}"))?,
            "percentile_step" => self.percentile_step = parse_as(value, "step")?,
            "infer_samples" => self.infer_samples = parse_as(value, "sample count")?,
            "infer_steps" => self.infer_steps = parse_as(value, "step count")?,
            "infer_lr" => self.infer_lr = parse_as(value, "learning rate")?,
            "excerpt_k" => self.excerpt_k = parse_as(value, "excerpt count")?,
            "synth_entities" => self.synth_entities = parse_as(value, "entity count")?,
            "synth_events_rate" => self.synth_events_rate = parse_as(value, "rate")?,
            "synth_span_start" => {
                self.synth_span_start = NaiveDate::parse_from_str(value, DATE_FORMAT)
                    .map_err(|e| format!("invalid date {value:?}: {e}"))?
            }
            "synth_span_days" => self.synth_span_days = parse_as(value, "day count")?,
            "synth_background_vocab" => {
                self.synth_background_vocab = parse_as(value, "vocabulary size")?
            }
            "synth_event_vocab" => self.synth_event_vocab = parse_as(value, "vocabulary size")?,
            "synth_lambda" => self.synth_lambda = parse_as(value, "mixing rate")?,
            "synth_sentence_rate" => self.synth_sentence_rate = parse_as(value, "rate")?,
            "synth_len_min" => self.synth_len_min = parse_as(value, "length")?,
            "synth_len_max" => self.synth_len_max = parse_as(value, "length")?,
            "synth_context_rate" => self.synth_context_rate = parse_as(value, "rate")?,
            "synth_groups" => self.synth_groups = parse_as(value, "group count")?,
            "seed" => self.seed = parse_as(value, "seed")?,
            "threads" => self.threads = parse_as(value, "thread count")?,
            other => return Err(format!("unknown key {other:?}")),
        }
        Ok(())
    }

    /// Parses a config file's text over the defaults. `#` starts a comment;
    /// blank lines are skipped. Errors carry the 1-based line number.
    pub fn parse(text: &str, path: &Path) -> Result<Self, String> {
        let mut config = PipelineConfig::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(format!(
                    "{}: line {}: expected `key = value`, got {raw:?}",
                    path.display(),
                    idx + 1
                ));
            };
            config
                .apply(key.trim(), value.trim())
                .map_err(|e| format!("{}: line {}: {e}", path.display(), idx + 1))?;
        }
        Ok(config)
    }

    /// The effective configuration, one deterministic `key = value` line
    /// per field; this is what gets hashed into manifests.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        let grid = self
            .mu_grid
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let mut put = |k: &str, v: String| writeln!(s, "{k} = {v}").expect("string write");
        put("corpus", self.corpus.display().to_string());
        put("lexicon", self.lexicon.display().to_string());
        put("events", self.events.display().to_string());
        put("model_dir", self.model_dir.display().to_string());
        put("out_dir", self.out_dir.display().to_string());
        put("w_in", format!("{},{}", self.w_in.0, self.w_in.1));
        put("w_out", format!("{},{}", self.w_out.0, self.w_out.1));
        put("coverage_pad", self.coverage_pad.to_string());
        put("dim", self.dim.to_string());
        put("context_n", self.context_n.to_string());
        put("min_count", self.min_count.to_string());
        put("embed_epochs", self.embed_epochs.to_string());
        put("lr_initial", self.lr_initial.to_string());
        put("lr_final", self.lr_final.to_string());
        put("word_only_pass", self.word_only_pass.to_string());
        put("learn_projection", self.learn_projection.to_string());
        put("hidden", self.hidden.to_string());
        put("activation", self.activation.to_string());
        put("output_form", self.output_form.to_string());
        put("clf_lr", self.clf_lr.to_string());
        put("momentum", self.momentum.to_string());
        put("clf_epochs", self.clf_epochs.to_string());
        put("batch_size", self.batch_size.to_string());
        put("valid_fraction", self.valid_fraction.to_string());
        put("folds", self.folds.to_string());
        put("reshuffles", self.reshuffles.to_string());
        put("fold_strategy", self.fold_strategy.to_string());
        put("eval_level", self.eval_level.to_string());
        put("mu_grid", grid);
        put("period", self.period.to_string());
        put("period_split", self.period_split.to_string());
        put("group_mode", self.group_mode.to_string());
        put("percentile_step", self.percentile_step.to_string());
        put("infer_samples", self.infer_samples.to_string());
        put("infer_steps", self.infer_steps.to_string());
        put("infer_lr", self.infer_lr.to_string());
        put("excerpt_k", self.excerpt_k.to_string());
        put("synth_entities", self.synth_entities.to_string());
        put("synth_events_rate", self.synth_events_rate.to_string());
        put("synth_span_start", self.synth_span_start.format(DATE_FORMAT).to_string());
        put("synth_span_days", self.synth_span_days.to_string());
        put("synth_background_vocab", self.synth_background_vocab.to_string());
        put("synth_event_vocab", self.synth_event_vocab.to_string());
        put("synth_lambda", self.synth_lambda.to_string());
        put("synth_sentence_rate", self.synth_sentence_rate.to_string());
        put("synth_len_min", self.synth_len_min.to_string());
        put("synth_len_max", self.synth_len_max.to_string());
        put("synth_context_rate", self.synth_context_rate.to_string());
        put("synth_groups", self.synth_groups.to_string());
        put("seed", self.seed.to_string());
        put("threads", self.threads.to_string());
        s
    }

    // ---------------------------------------------- typed view builders

    pub fn windows(&self) -> WindowConfig {
        WindowConfig { inner: self.w_in, outer: self.w_out, coverage_pad: self.coverage_pad }
    }

    pub fn embed_config(&self) -> TrainConfig {
        TrainConfig {
            dim: self.dim,
            context_n: self.context_n,
            min_count: self.min_count,
            epochs: self.embed_epochs,
            lr_initial: self.lr_initial,
            lr_final: self.lr_final,
            include_word_only_pass: self.word_only_pass,
            learn_projection: self.learn_projection,
            infer_steps: self.infer_steps,
            infer_lr: self.infer_lr,
            seed: self.seed,
            threads: self.threads,
        }
    }

    pub fn classifier_config(&self) -> ClassifierConfig {
        ClassifierConfig {
            input_dim: self.dim,
            hidden: self.hidden,
            activation: self.activation,
            output_form: self.output_form,
            lr: self.clf_lr,
            momentum: self.momentum,
            epochs: self.clf_epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            k: self.folds,
            reshuffles: self.reshuffles,
            strategy: self.fold_strategy,
            level: self.eval_level,
            mu_grid: self.mu_grid.clone(),
            period: self.period,
            period_split: self.period_split,
            classifier: self.classifier_config(),
            seed: self.seed,
        }
    }

    pub fn index_config(&self, event_span: Option<(NaiveDate, NaiveDate)>) -> IndexConfig {
        IndexConfig {
            period: self.period,
            group_mode: self.group_mode,
            percentile_step: self.percentile_step,
            event_span,
        }
    }

    pub fn describe_config(&self) -> DescribeConfig {
        DescribeConfig {
            infer_samples: self.infer_samples,
            infer_steps: self.infer_steps,
            infer_lr: self.infer_lr,
            seed: self.seed,
            k: self.excerpt_k,
        }
    }

    pub fn synth_config(&self) -> SynthConfig {
        SynthConfig {
            entities: self.synth_entities,
            events_per_entity: self.synth_events_rate,
            span_start: self.synth_span_start,
            span_days: self.synth_span_days,
            background_vocab: self.synth_background_vocab,
            event_vocab: self.synth_event_vocab,
            lambda: self.synth_lambda,
            sentences_per_day: self.synth_sentence_rate,
            sentence_len_min: self.synth_len_min,
            sentence_len_max: self.synth_len_max,
            context_sentences: self.synth_context_rate,
            groups: self.synth_groups,
            windows: self.windows(),
            seed: self.seed,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<PipelineConfig, String> {
        PipelineConfig::parse(text, Path::new("test.conf"))
    }

    #[test]
    fn defaults_survive_an_empty_config() {
        let config = parse("").unwrap();
        assert_eq!(config.dim, 600);
        assert_eq!(config.context_n, 5);
        assert_eq!(config.w_in, (-8, 45));
        assert_eq!(config.w_out, (-120, 120));
        assert_eq!(config.hidden, 50);
        assert_eq!(config.folds, 5);
        assert_eq!(config.reshuffles, 5);
        assert_eq!(config.infer_samples, 100);
        assert_eq!(config.infer_steps, 50);
        assert_eq!(config.mu_grid, default_mu_grid());
        assert_eq!(config.period, PeriodKind::Month);
    }

    #[test]
    fn comments_and_blanks_are_ignored() {
        let config = parse("# heading\n\ndim = 32  # inline\n  seed=7\n").unwrap();
        assert_eq!(config.dim, 32);
        assert_eq!(config.seed, 7);
    }

    #[test]
    fn unknown_keys_fail_with_line_number() {
        let err = parse("dim = 32\nnot_a_key = 1\n").unwrap_err();
        assert!(err.contains("line 2"), "{err}");
        assert!(err.contains("not_a_key"), "{err}");
    }

    #[test]
    fn bad_values_fail_with_line_number() {
        let err = parse("\n\ndim = banana\n").unwrap_err();
        assert!(err.contains("line 3"), "{err}");
        let err = parse("w_in = 5\n").unwrap_err();
        assert!(err.contains("line 1"), "{err}");
        let err = parse("dim 32\n").unwrap_err();
        assert!(err.contains("key = value"), "{err}");
    }

    #[test]
    fn typed_values_parse() {
        let config = parse(
            "w_in = -10,30\nmu_grid = 0.5,0.9\nactivation = tanh\nfold_strategy = entity\n\
             period = quarter\ngroup_mode = literal\nsynth_span_start = 2010-06-01\n\
             learn_projection = true\n",
        )
        .unwrap();
        assert_eq!(config.w_in, (-10, 30));
        assert_eq!(config.mu_grid, vec![0.5, 0.9]);
        assert_eq!(config.activation, Activation::Tanh);
        assert_eq!(config.fold_strategy, FoldStrategy::Entity);
        assert_eq!(config.period, PeriodKind::Quarter);
        assert_eq!(config.group_mode, GroupMode::Literal);
        assert_eq!(config.synth_span_start, NaiveDate::from_ymd_opt(2010, 6, 1).unwrap());
        assert!(config.learn_projection);
    }

    #[test]
    fn canonical_reflects_every_override_and_reparses() {
        let config = parse("dim = 48\nmu_grid = 0.5\nperiod = week\n").unwrap();
        let canon = config.canonical();
        assert!(canon.contains("dim = 48"));
        assert!(canon.contains("mu_grid = 0.5"));
        assert!(canon.contains("period = week"));
        // The canonical form is itself a valid config equal to the original.
        let reparsed = parse(&canon).unwrap();
        assert_eq!(reparsed.canonical(), canon);
    }

    #[test]
    fn last_assignment_wins() {
        let config = parse("dim = 32\ndim = 64\n").unwrap();
        assert_eq!(config.dim, 64);
    }
}
