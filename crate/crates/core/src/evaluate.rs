//! Cost-sensitive evaluation of relevance classifiers.
//!
//! Metrics center on usefulness: how much of the loss of the best constant
//! guess a model removes, under a preference weight `mu` that trades missed
//! events against false alarms. Cross-validation rotates test and
//! validation folds over reshuffled or entity-partitioned splits, picking
//! each fold's decision threshold on its validation set.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::NaiveDate;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::classify::{instance_features, ClassifierConfig, RelevanceClassifier};
use crate::corpus::CorpusStore;
use crate::embed::EmbeddingModel;
use crate::labeling::LabeledInstance;
use crate::signal::{Period, PeriodKind};
use crate::{Error, Result};

/// Binary confusion counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    /// True positive count.
    pub tpc: u64,
    /// False positive count.
    pub fpc: u64,
    /// True negative count.
    pub tnc: u64,
    /// False negative count.
    pub fnc: u64,
}

impl ConfusionMatrix {
    /// Counts predictions `score >= threshold` against the labels.
    pub fn from_scores(scores: &[f64], labels: &[u8], threshold: f64) -> ConfusionMatrix {
        assert_eq!(scores.len(), labels.len(), "score/label length mismatch");
        let mut cm = ConfusionMatrix::default();
        for (&s, &y) in scores.iter().zip(labels) {
            match (y == 1, s >= threshold) {
                (true, true) => cm.tpc += 1,
                (true, false) => cm.fnc += 1,
                (false, true) => cm.fpc += 1,
                (false, false) => cm.tnc += 1,
            }
        }
        cm
    }

    pub fn total(&self) -> u64 {
        self.tpc + self.fpc + self.tnc + self.fnc
    }

    /// Share of observations with a positive label.
    pub fn positive_rate(&self) -> f64 {
        (self.tpc + self.fnc) as f64 / self.total() as f64
    }
}

/// Loss and gain figures for one confusion matrix at one preference.
#[derive(Debug, Clone, Copy)]
pub struct Usefulness {
    /// Expected loss of the best constant prediction.
    pub loss_best_guess: f64,
    /// Expected loss of the model.
    pub loss_model: f64,
    /// Loss removed by the model.
    pub absolute: f64,
    /// Share of the available loss removed; 1 is a perfect model.
    pub relative: f64,
}

fn check_mu(mu: f64) -> Result<()> {
    if !(mu > 0.0 && mu < 1.0) {
        return Err(Error::InvalidInput(format!(
            "preference mu must lie strictly inside (0, 1), got {mu}"
        )));
    }
    Ok(())
}

/// How much loss the classifier removes relative to the best constant
/// guess, weighting missed positives by `mu` and false alarms by `1 - mu`.
pub fn usefulness(cm: &ConfusionMatrix, mu: f64) -> Result<Usefulness> {
    check_mu(mu)?;
    let total = cm.total();
    if total == 0 {
        return Err(Error::Data("empty confusion matrix".into()));
    }
    let n = total as f64;
    let p_pos = (cm.tpc + cm.fnc) as f64 / n;
    let p_neg = (cm.tnc + cm.fpc) as f64 / n;
    let loss_best_guess = (mu * p_pos).min((1.0 - mu) * p_neg);
    if loss_best_guess == 0.0 {
        return Err(Error::Data(
            "single-class data: the best constant guess has zero loss, usefulness undefined"
                .into(),
        ));
    }
    let loss_model = mu * (cm.fnc as f64 / n) + (1.0 - mu) * (cm.fpc as f64 / n);
    let absolute = loss_best_guess - loss_model;
    Ok(Usefulness {
        loss_best_guess,
        loss_model,
        absolute,
        relative: absolute / loss_best_guess,
    })
}

/// Recall weight equivalent to the preference `mu`.
pub fn mu_to_beta(mu: f64) -> f64 {
    mu / (1.0 - mu)
}

/// F-score weighting recall `beta` times as much as precision.
/// Degenerate cases (no true positives) score 0.
pub fn f_beta(cm: &ConfusionMatrix, beta: f64) -> f64 {
    if cm.tpc == 0 {
        return 0.0;
    }
    let tp = cm.tpc as f64;
    let b2 = beta * beta;
    (1.0 + b2) * tp / ((1.0 + b2) * tp + b2 * cm.fnc as f64 + cm.fpc as f64)
}

/// Area under the ROC curve by the rank statistic; tied scores contribute
/// one half through midranks.
pub fn roc_auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    assert_eq!(scores.len(), labels.len(), "score/label length mismatch");
    let n_pos = labels.iter().filter(|&&y| y == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::Data(
            "ROC area needs both classes in the sample".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Midranks: tied values share the mean of their 1-based positions.
    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let midrank = (i + 1 + j) as f64 / 2.0;
        for &ix in &order[i..j] {
            if labels[ix] == 1 {
                rank_sum_pos += midrank;
            }
        }
        i = j;
    }
    let n1 = n_pos as f64;
    Ok((rank_sum_pos - n1 * (n1 + 1.0) / 2.0) / (n1 * n_neg as f64))
}

/// A validation-chosen decision threshold and its validation performance.
#[derive(Debug, Clone, Copy)]
pub struct ThresholdChoice {
    pub threshold: f64,
    pub usefulness: Usefulness,
    pub cm: ConfusionMatrix,
}

/// Picks the threshold maximizing usefulness on the given sample.
///
/// Candidates are the midpoints between consecutive distinct scores plus 0
/// and 1; ties go to the smallest threshold, favoring sensitivity.
pub fn optimize_threshold(scores: &[f64], labels: &[u8], mu: f64) -> Result<ThresholdChoice> {
    check_mu(mu)?;
    if scores.is_empty() {
        return Err(Error::Data("no scores to threshold".into()));
    }
    let mut sorted: Vec<(f64, u8)> = scores.iter().copied().zip(labels.iter().copied()).collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut candidates = vec![0.0];
    for w in sorted.windows(2) {
        if w[0].0 < w[1].0 {
            candidates.push((w[0].0 + w[1].0) / 2.0);
        }
    }
    candidates.push(1.0);
    // Suffix label counts over the sorted scores turn each candidate into
    // confusion counts via one partition search.
    let n = sorted.len();
    let mut suffix_pos = vec![0u64; n + 1];
    for i in (0..n).rev() {
        suffix_pos[i] = suffix_pos[i + 1] + u64::from(sorted[i].1 == 1);
    }
    let total_pos = suffix_pos[0];
    let total_neg = n as u64 - total_pos;
    if total_pos == 0 || total_neg == 0 {
        return Err(Error::Data(
            "threshold selection needs both classes in the sample".into(),
        ));
    }
    let mut best: Option<ThresholdChoice> = None;
    for t in candidates {
        let start = sorted.partition_point(|&(s, _)| s < t);
        let predicted = (n - start) as u64;
        let tpc = suffix_pos[start];
        let cm = ConfusionMatrix {
            tpc,
            fpc: predicted - tpc,
            fnc: total_pos - tpc,
            tnc: total_neg - (predicted - tpc),
        };
        let u = usefulness(&cm, mu)?;
        // Strict improvement only: earlier (smaller) candidates win ties.
        if best.is_none_or(|b| u.absolute > b.usefulness.absolute) {
            best = Some(ThresholdChoice { threshold: t, usefulness: u, cm });
        }
    }
    Ok(best.expect("candidate list is never empty"))
}

/// How instances are partitioned into folds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FoldStrategy {
    /// Uniform shuffle of instances.
    Random,
    /// All of an entity's instances share one fold.
    Entity,
}

impl FromStr for FoldStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(FoldStrategy::Random),
            "entity" => Ok(FoldStrategy::Entity),
            _ => Err(Error::InvalidInput(format!(
                "unknown fold strategy {s:?}, expected random or entity"
            ))),
        }
    }
}

impl fmt::Display for FoldStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FoldStrategy::Random => "random",
            FoldStrategy::Entity => "entity",
        })
    }
}

/// Fold construction settings.
#[derive(Debug, Clone)]
pub struct FoldOptions {
    pub strategy: FoldStrategy,
    pub k: usize,
    pub seed: u64,
    /// With the entity strategy, split an entity holding more than 2/k of
    /// all instances into an early and a recent half by date, placing the
    /// recent half in the later fold.
    pub period_split: bool,
}

/// Assigns each instance a fold in `0..k`.
///
/// `dates` must align with `instances` when `period_split` is on.
pub fn make_folds(
    instances: &[LabeledInstance],
    dates: Option<&[NaiveDate]>,
    options: &FoldOptions,
) -> Result<Vec<usize>> {
    let k = options.k;
    if k < 3 {
        return Err(Error::InvalidInput(
            "need at least 3 folds for train, validation, and test roles".into(),
        ));
    }
    let n = instances.len();
    if n < k {
        return Err(Error::Data(format!("{n} instances cannot fill {k} folds")));
    }
    match options.strategy {
        FoldStrategy::Random => {
            let mut order: Vec<usize> = (0..n).collect();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(options.seed));
            let mut assignment = vec![0; n];
            let base = n / k;
            let extra = n % k;
            let mut cursor = 0;
            for fold in 0..k {
                let size = base + usize::from(fold < extra);
                for &row in &order[cursor..cursor + size] {
                    assignment[row] = fold;
                }
                cursor += size;
            }
            Ok(assignment)
        }
        FoldStrategy::Entity => {
            let mut by_entity: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
            for (row, inst) in instances.iter().enumerate() {
                by_entity.entry(inst.entity).or_default().push(row);
            }
            if by_entity.len() < k {
                return Err(Error::Data(format!(
                    "{} entities cannot fill {k} entity folds",
                    by_entity.len()
                )));
            }
            // Units are whole entities, or date-ordered halves of entities
            // too large to balance. pair_id links the halves.
            struct Unit {
                rows: Vec<usize>,
                entity: u32,
                part: u8,
                pair: Option<usize>,
            }
            let mut units = Vec::new();
            let mut pair_count = 0;
            for (entity, mut rows) in by_entity {
                let oversized = options.period_split && rows.len() * k > 2 * n;
                if oversized {
                    let dates = dates.ok_or_else(|| {
                        Error::InvalidInput("period_split needs instance dates".into())
                    })?;
                    rows.sort_by_key(|&r| (dates[r], r));
                    let recent_len = rows.len() / 2;
                    let recent = rows.split_off(rows.len() - recent_len);
                    units.push(Unit { rows, entity, part: 0, pair: Some(pair_count) });
                    units.push(Unit { rows: recent, entity, part: 1, pair: Some(pair_count) });
                    pair_count += 1;
                } else {
                    units.push(Unit { rows, entity, part: 0, pair: None });
                }
            }
            units.sort_by(|a, b| {
                b.rows.len().cmp(&a.rows.len()).then(a.entity.cmp(&b.entity)).then(a.part.cmp(&b.part))
            });
            let mut fold_sizes = vec![0usize; k];
            let mut fold_of_unit = Vec::with_capacity(units.len());
            for unit in &units {
                let fold = (0..k).min_by_key(|&f| (fold_sizes[f], f)).expect("k > 0");
                fold_sizes[fold] += unit.rows.len();
                fold_of_unit.push(fold);
            }
            // Keep the recent half of a split entity in the later fold.
            for pair in 0..pair_count {
                let ix: Vec<usize> = (0..units.len()).filter(|&u| units[u].pair == Some(pair)).collect();
                let (early, recent) = if units[ix[0]].part == 0 { (ix[0], ix[1]) } else { (ix[1], ix[0]) };
                if fold_of_unit[early] > fold_of_unit[recent] {
                    fold_of_unit.swap(early, recent);
                }
            }
            let mut assignment = vec![0; n];
            for (unit, &fold) in units.iter().zip(&fold_of_unit) {
                for &row in &unit.rows {
                    assignment[row] = fold;
                }
            }
            Ok(assignment)
        }
    }
}

/// Granularity at which observations are scored and labeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalLevel {
    /// One observation per (sentence, entity) instance.
    Vector,
    /// One observation per (entity, period): mean posterior, positive when
    /// any contained instance is positive.
    AggregatedEntity,
}

impl FromStr for EvalLevel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "vector" => Ok(EvalLevel::Vector),
            "aggregated-entity" => Ok(EvalLevel::AggregatedEntity),
            _ => Err(Error::InvalidInput(format!(
                "unknown evaluation level {s:?}, expected vector or aggregated-entity"
            ))),
        }
    }
}

impl fmt::Display for EvalLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EvalLevel::Vector => "vector",
            EvalLevel::AggregatedEntity => "aggregated-entity",
        })
    }
}

/// The preferences evaluated when none are configured.
pub fn default_mu_grid() -> Vec<f64> {
    vec![0.1, 0.3, 0.5, 0.6, 0.7, 0.8, 0.85, 0.875, 0.9, 0.925, 0.95]
}

/// Cross-validation settings.
#[derive(Debug, Clone)]
pub struct EvalConfig {
    pub k: usize,
    pub reshuffles: usize,
    pub strategy: FoldStrategy,
    pub level: EvalLevel,
    pub mu_grid: Vec<f64>,
    /// Period granularity for the aggregated level.
    pub period: PeriodKind,
    pub period_split: bool,
    pub classifier: ClassifierConfig,
    pub seed: u64,
}

impl EvalConfig {
    /// Defaults for a given feature width.
    pub fn new(input_dim: usize) -> Self {
        EvalConfig {
            k: 5,
            reshuffles: 5,
            strategy: FoldStrategy::Random,
            level: EvalLevel::Vector,
            mu_grid: default_mu_grid(),
            period: PeriodKind::Month,
            period_split: false,
            classifier: ClassifierConfig::new(input_dim),
            seed: 42,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 3 {
            return Err(Error::InvalidInput(
                "need at least 3 folds for train, validation, and test roles".into(),
            ));
        }
        if self.reshuffles == 0 {
            return Err(Error::InvalidInput("reshuffles must be positive".into()));
        }
        if self.mu_grid.is_empty() {
            return Err(Error::InvalidInput("mu grid is empty".into()));
        }
        for &mu in &self.mu_grid {
            check_mu(mu)?;
        }
        self.classifier.validate()
    }
}

/// Cross-run means for one preference value.
#[derive(Debug, Clone)]
pub struct MuReport {
    pub mu: f64,
    pub mean_ur: f64,
    pub std_ur: f64,
    pub mean_fbeta: f64,
    pub mean_tn: f64,
    pub mean_fn: f64,
    pub mean_fp: f64,
    pub mean_tp: f64,
    pub threshold_mean: f64,
}

/// Full cross-validation outcome.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub level: EvalLevel,
    pub strategy: FoldStrategy,
    pub k: usize,
    pub reshuffles: usize,
    /// Runs that produced metrics.
    pub runs: usize,
    /// Runs dropped because a fold held a single class.
    pub skipped_runs: usize,
    pub auc_mean: f64,
    pub auc_std: f64,
    pub per_mu: Vec<MuReport>,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    let m = crate::mathutil::mean(xs);
    if xs.len() < 2 {
        return (m, 0.0);
    }
    (m, crate::mathutil::std_dev(xs))
}

impl EvalReport {
    /// Writes one row per preference value.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(
                w,
                "mu,mean_Ur,std_Ur,mean_Fbeta,mean_TN,mean_FN,mean_FP,mean_TP,threshold_mean"
            )?;
            for row in &self.per_mu {
                writeln!(
                    w,
                    "{},{},{},{},{},{},{},{},{}",
                    row.mu,
                    row.mean_ur,
                    row.std_ur,
                    row.mean_fbeta,
                    row.mean_tn,
                    row.mean_fn,
                    row.mean_fp,
                    row.mean_tp,
                    row.threshold_mean,
                )?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    /// Table-style text rendering.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "Relevance evaluation: {} level, {} sampling, k={}, {} reshuffles\n",
            self.level, self.strategy, self.k, self.reshuffles
        ));
        out.push_str(&format!(
            "Runs evaluated: {} (skipped {})\n",
            self.runs, self.skipped_runs
        ));
        out.push_str(&format!(
            "AUC: mean {:.4}, std {:.4}\n\n",
            self.auc_mean, self.auc_std
        ));
        out.push_str(
            "    mu  mean_Ur   std_Ur  mean_Fbeta  mean_TN  mean_FN  mean_FP  mean_TP  threshold\n",
        );
        for row in &self.per_mu {
            out.push_str(&format!(
                "{:>6.3} {:>8.4} {:>8.4} {:>11.4} {:>8.1} {:>8.1} {:>8.1} {:>8.1} {:>10.4}\n",
                row.mu,
                row.mean_ur,
                row.std_ur,
                row.mean_fbeta,
                row.mean_tn,
                row.mean_fn,
                row.mean_fp,
                row.mean_tp,
                row.threshold_mean,
            ));
        }
        out
    }
}

// Per-run metrics for one preference value.
struct RunMetrics {
    ur: f64,
    fbeta: f64,
    cm: ConfusionMatrix,
    threshold: f64,
}

fn gather(xs: &[f64], rows: &[usize], dim: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * dim);
    for &r in rows {
        out.extend_from_slice(&xs[r * dim..(r + 1) * dim]);
    }
    out
}

fn has_both_classes(ys: &[u8]) -> bool {
    ys.contains(&0) && ys.contains(&1)
}

// Turns per-instance scores into evaluation observations at the requested
// level. `rows` indexes instances; `scores` aligns with `rows`.
fn observations(
    level: EvalLevel,
    rows: &[usize],
    scores: &[f64],
    instances: &[LabeledInstance],
    dates: &[NaiveDate],
    period: PeriodKind,
) -> (Vec<f64>, Vec<u8>) {
    match level {
        EvalLevel::Vector => (
            scores.to_vec(),
            rows.iter().map(|&r| instances[r].label).collect(),
        ),
        EvalLevel::AggregatedEntity => {
            let mut groups: BTreeMap<(u32, Period), (f64, u64, u8)> = BTreeMap::new();
            for (pos, &r) in rows.iter().enumerate() {
                let key = (instances[r].entity, Period::of(period, dates[r]));
                let slot = groups.entry(key).or_insert((0.0, 0, 0));
                slot.0 += scores[pos];
                slot.1 += 1;
                slot.2 |= instances[r].label;
            }
            groups
                .values()
                .map(|&(sum, count, label)| (sum / count as f64, label))
                .unzip()
        }
    }
}

/// Cross-validates a classifier over the labeled instances.
///
/// Every reshuffle re-splits the data; every rotation takes fold `j` as
/// test and fold `j+1` as validation. Thresholds are re-optimized per run
/// and preference. Runs whose validation or test observations hold a
/// single class are skipped and counted.
pub fn evaluate_run(
    store: &CorpusStore,
    model: &EmbeddingModel,
    instances: &[LabeledInstance],
    config: &EvalConfig,
) -> Result<EvalReport> {
    config.validate()?;
    if instances.is_empty() {
        return Err(Error::Data("no labeled instances to evaluate".into()));
    }
    let (xs, ys) = instance_features(model, instances)?;
    let dim = model.dim;
    let dates: Vec<NaiveDate> = instances
        .iter()
        .map(|inst| {
            store
                .sentence(inst.sentence_id)
                .map(|s| store.date_of(s))
                .ok_or_else(|| {
                    Error::Data(format!("instance references unknown sentence {}", inst.sentence_id))
                })
        })
        .collect::<Result<_>>()?;
    let mut aucs = Vec::new();
    let mut per_mu_runs: Vec<Vec<RunMetrics>> = config.mu_grid.iter().map(|_| Vec::new()).collect();
    let mut skipped = 0usize;
    for reshuffle in 0..config.reshuffles {
        let options = FoldOptions {
            strategy: config.strategy,
            k: config.k,
            seed: config.seed.wrapping_add(reshuffle as u64),
            period_split: config.period_split,
        };
        let assignment = make_folds(instances, Some(&dates), &options)?;
        for j in 0..config.k {
            let run_index = reshuffle * config.k + j;
            let valid_fold = (j + 1) % config.k;
            let mut test_rows = Vec::new();
            let mut valid_rows = Vec::new();
            let mut train_rows = Vec::new();
            for (row, &fold) in assignment.iter().enumerate() {
                if fold == j {
                    test_rows.push(row);
                } else if fold == valid_fold {
                    valid_rows.push(row);
                } else {
                    train_rows.push(row);
                }
            }
            let train_y: Vec<u8> = train_rows.iter().map(|&r| ys[r]).collect();
            if !has_both_classes(&train_y) {
                skipped += 1;
                continue;
            }
            let valid_x = gather(&xs, &valid_rows, dim);
            let valid_y: Vec<u8> = valid_rows.iter().map(|&r| ys[r]).collect();
            let clf_config = ClassifierConfig {
                input_dim: dim,
                seed: config.classifier.seed.wrapping_add(run_index as u64),
                ..config.classifier.clone()
            };
            let mut clf = RelevanceClassifier::init(&clf_config)?;
            let train_x = gather(&xs, &train_rows, dim);
            clf.train(&train_x, &train_y, Some((&valid_x, &valid_y)), &clf_config)?;
            let valid_scores = clf.posteriors(&valid_x);
            let test_x = gather(&xs, &test_rows, dim);
            let test_scores = clf.posteriors(&test_x);
            let (vobs_s, vobs_y) = observations(
                config.level, &valid_rows, &valid_scores, instances, &dates, config.period,
            );
            let (tobs_s, tobs_y) = observations(
                config.level, &test_rows, &test_scores, instances, &dates, config.period,
            );
            if !has_both_classes(&vobs_y) || !has_both_classes(&tobs_y) {
                skipped += 1;
                continue;
            }
            aucs.push(roc_auc(&tobs_s, &tobs_y)?);
            for (slot, &mu) in per_mu_runs.iter_mut().zip(&config.mu_grid) {
                let choice = optimize_threshold(&vobs_s, &vobs_y, mu)?;
                let cm = ConfusionMatrix::from_scores(&tobs_s, &tobs_y, choice.threshold);
                let u = usefulness(&cm, mu)?;
                slot.push(RunMetrics {
                    ur: u.relative,
                    fbeta: f_beta(&cm, mu_to_beta(mu)),
                    cm,
                    threshold: choice.threshold,
                });
            }
        }
    }
    if aucs.is_empty() {
        return Err(Error::Data(format!(
            "all {} evaluation runs were degenerate (single-class folds)",
            config.reshuffles * config.k
        )));
    }
    let (auc_mean, auc_std) = mean_std(&aucs);
    let per_mu = config
        .mu_grid
        .iter()
        .zip(&per_mu_runs)
        .map(|(&mu, runs)| {
            let urs: Vec<f64> = runs.iter().map(|r| r.ur).collect();
            let (mean_ur, std_ur) = mean_std(&urs);
            let avg = |f: &dyn Fn(&RunMetrics) -> f64| {
                crate::mathutil::mean(&runs.iter().map(f).collect::<Vec<f64>>())
            };
            MuReport {
                mu,
                mean_ur,
                std_ur,
                mean_fbeta: avg(&|r| r.fbeta),
                mean_tn: avg(&|r| r.cm.tnc as f64),
                mean_fn: avg(&|r| r.cm.fnc as f64),
                mean_fp: avg(&|r| r.cm.fpc as f64),
                mean_tp: avg(&|r| r.cm.tpc as f64),
                threshold_mean: avg(&|r| r.threshold),
            }
        })
        .collect();
    Ok(EvalReport {
        level: config.level,
        strategy: config.strategy,
        k: config.k,
        reshuffles: config.reshuffles,
        runs: aucs.len(),
        skipped_runs: skipped,
        auc_mean,
        auc_std,
        per_mu,
    })
}
