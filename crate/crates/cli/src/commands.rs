//! One function per subcommand. Each loads what it needs, does the work
//! through the library, writes its artifacts plus a manifest, and returns
//! a one-line summary for stdout.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use eventscope::classify::RelevanceClassifier;
use eventscope::corpus::CorpusStore;
use eventscope::embed::{train_dm, EmbeddingModel};
use eventscope::evaluate::evaluate_run;
use eventscope::labeling::{label_corpus, read_events, write_labels, read_labels};
use eventscope::signal::{build_indices, write_index_csv, Period};
use eventscope::describe::{rank_excerpts, render_excerpts_text, write_excerpt_csv};
use eventscope::synth;

use crate::config::PipelineConfig;
use crate::error::{require_artifact, CliError, CliResult};
use crate::manifest::Manifest;

fn store_path(config: &PipelineConfig) -> PathBuf {
    config.model_dir.join("store.bin")
}

fn embed_path(config: &PipelineConfig) -> PathBuf {
    config.model_dir.join("embed.bin")
}

fn clf_path(config: &PipelineConfig) -> PathBuf {
    config.model_dir.join("clf.bin")
}

fn labels_path(config: &PipelineConfig) -> PathBuf {
    config.out_dir.join("labels.csv")
}

fn ensure_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", dir.display())))
}

fn require_input(path: &Path, role: &str) -> CliResult<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(CliError::Data(format!(
            "{role} file {} not found; point the config at your data or generate some with `eventscope synth`",
            path.display()
        )))
    }
}

fn load_store(config: &PipelineConfig) -> CliResult<CorpusStore> {
    let path = store_path(config);
    require_artifact(&path, "corpus store", "ingest")?;
    Ok(CorpusStore::load(&path)?)
}

fn load_model(config: &PipelineConfig) -> CliResult<EmbeddingModel> {
    let path = embed_path(config);
    require_artifact(&path, "embedding model", "train-embed")?;
    Ok(EmbeddingModel::load(&path)?)
}

fn load_classifier(config: &PipelineConfig) -> CliResult<RelevanceClassifier> {
    let path = clf_path(config);
    require_artifact(&path, "classifier", "train-clf")?;
    Ok(RelevanceClassifier::load(&path)?)
}

fn load_instances(
    config: &PipelineConfig,
    store: &CorpusStore,
) -> CliResult<Vec<eventscope::labeling::LabeledInstance>> {
    let path = labels_path(config);
    require_artifact(&path, "label file", "label")?;
    Ok(read_labels(&path, store)?)
}

/// Posterior per mention-bearing sentence, the input to index building.
fn sentence_scores(
    store: &CorpusStore,
    model: &EmbeddingModel,
    clf: &RelevanceClassifier,
) -> CliResult<Vec<(u64, f64)>> {
    store
        .mention_bearing_ids()
        .into_iter()
        .map(|id| Ok((id, clf.posterior(&model.extract_vector(id)?))))
        .collect()
}

pub fn ingest(config: &PipelineConfig) -> CliResult<String> {
    require_input(&config.corpus, "corpus")?;
    require_input(&config.lexicon, "lexicon")?;
    let store = CorpusStore::ingest_files(&config.corpus, &config.lexicon)?;
    let stats = store.stats();
    ensure_dir(&config.model_dir)?;
    let out = store_path(config);
    store.save(&out)?;

    let mut manifest = Manifest::new("ingest", &config.canonical());
    manifest.record_input(&config.corpus)?;
    manifest.record_input(&config.lexicon)?;
    manifest.record_output(&out)?;
    manifest.write(&config.model_dir)?;
    Ok(format!(
        "ingested {} documents, {} sentences ({} mention-bearing) -> {}",
        stats.documents,
        stats.sentences,
        stats.mention_bearing,
        out.display()
    ))
}

pub fn label(config: &PipelineConfig) -> CliResult<String> {
    let store = load_store(config)?;
    require_input(&config.events, "events")?;
    let events = read_events(&config.events)?;
    let (instances, stats) = label_corpus(&store, &events, &config.windows())?;
    ensure_dir(&config.out_dir)?;
    let out = labels_path(config);
    write_labels(&out, &store, &instances)?;

    let mut manifest = Manifest::new("label", &config.canonical());
    manifest.record_input(&config.events)?;
    manifest.record_input(&store_path(config))?;
    manifest.record_output(&out)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "labeled {} of {} in-coverage pairs ({} positive, rate {:.4}) -> {}",
        stats.labeled,
        stats.pairs_in_coverage,
        stats.positives,
        stats.positive_rate(),
        out.display()
    ))
}

pub fn train_embed(config: &PipelineConfig) -> CliResult<String> {
    let store = load_store(config)?;
    let outcome = train_dm(&store, &config.embed_config())?;
    ensure_dir(&config.model_dir)?;
    let out = embed_path(config);
    outcome.model.save(&out)?;

    let mut manifest = Manifest::new("train-embed", &config.canonical());
    manifest.record_input(&store_path(config))?;
    manifest.record_output(&out)?;
    manifest.write(&config.model_dir)?;
    let final_logp = outcome.epoch_mean_log_prob.last().copied().unwrap_or(f64::NAN);
    Ok(format!(
        "trained {}-dim embeddings: {} epochs, {} windows/epoch, final mean ln p {:.4} -> {}",
        config.dim,
        config.embed_epochs,
        outcome.windows_per_epoch,
        final_logp,
        out.display()
    ))
}

pub fn train_clf(config: &PipelineConfig) -> CliResult<String> {
    let store = load_store(config)?;
    let model = load_model(config)?;
    let instances = load_instances(config, &store)?;
    if !(0.0..1.0).contains(&config.valid_fraction) {
        return Err(CliError::Usage(format!(
            "valid_fraction must be in [0, 1), got {}",
            config.valid_fraction
        )));
    }

    // Deterministic shuffle, then an optional tail split for validation.
    let mut order: Vec<usize> = (0..instances.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    order.shuffle(&mut rng);
    let n_valid = (instances.len() as f64 * config.valid_fraction).floor() as usize;
    let n_train = instances.len() - n_valid;

    let features = |idx: &[usize]| -> CliResult<(Vec<f64>, Vec<u8>)> {
        let mut xs = Vec::with_capacity(idx.len() * model.dim);
        let mut ys = Vec::with_capacity(idx.len());
        for &i in idx {
            xs.extend(model.extract_vector(instances[i].sentence_id)?);
            ys.push(instances[i].label);
        }
        Ok((xs, ys))
    };
    let (train_xs, train_ys) = features(&order[..n_train])?;
    let (valid_xs, valid_ys) = features(&order[n_train..])?;

    let clf_config = config.classifier_config();
    let mut clf = RelevanceClassifier::init(&clf_config)?;
    let valid = (n_valid > 0).then_some((valid_xs.as_slice(), valid_ys.as_slice()));
    let report = clf.train(&train_xs, &train_ys, valid, &clf_config)?;
    ensure_dir(&config.model_dir)?;
    let out = clf_path(config);
    clf.save(&out)?;

    let mut manifest = Manifest::new("train-clf", &config.canonical());
    manifest.record_input(&store_path(config))?;
    manifest.record_input(&embed_path(config))?;
    manifest.record_input(&labels_path(config))?;
    manifest.record_output(&out)?;
    manifest.write(&config.model_dir)?;
    Ok(format!(
        "trained classifier on {} instances ({} held out): best epoch {}, final train loss {:.4} -> {}",
        n_train,
        n_valid,
        report.best_epoch + 1,
        report.train_loss.last().copied().unwrap_or(f64::NAN),
        out.display()
    ))
}

pub fn evaluate(config: &PipelineConfig) -> CliResult<String> {
    let store = load_store(config)?;
    let model = load_model(config)?;
    let instances = load_instances(config, &store)?;
    let report = evaluate_run(&store, &model, &instances, &config.eval_config())?;
    ensure_dir(&config.out_dir)?;
    let csv = config.out_dir.join("eval_report.csv");
    let txt = config.out_dir.join("eval_report.txt");
    report.write_csv(&csv)?;
    fs::write(&txt, report.render_text())
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", txt.display())))?;

    let mut manifest = Manifest::new("evaluate", &config.canonical());
    manifest.record_input(&store_path(config))?;
    manifest.record_input(&embed_path(config))?;
    manifest.record_input(&labels_path(config))?;
    manifest.record_output(&csv)?;
    manifest.record_output(&txt)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "evaluated {} runs ({} skipped): AUC {:.4} +- {:.4} -> {}",
        report.runs,
        report.skipped_runs,
        report.auc_mean,
        report.auc_std,
        csv.display()
    ))
}

pub fn index(config: &PipelineConfig) -> CliResult<String> {
    let store = load_store(config)?;
    let model = load_model(config)?;
    let clf = load_classifier(config)?;
    let scores = sentence_scores(&store, &model, &clf)?;

    // Event coverage marks in-sample periods; absent events leave it unset.
    let event_span = match read_events(&config.events) {
        Ok(events) => {
            let lo = events.iter().map(|e| e.date).min();
            let hi = events.iter().map(|e| e.date).max();
            lo.zip(hi)
        }
        Err(_) => None,
    };
    let series = build_indices(&store, &scores, &config.index_config(event_span))?;
    ensure_dir(&config.out_dir)?;
    let out = config.out_dir.join("index.csv");
    write_index_csv(&out, &series, config.percentile_step)?;

    let mut manifest = Manifest::new("index", &config.canonical());
    manifest.record_input(&store_path(config))?;
    manifest.record_input(&embed_path(config))?;
    manifest.record_input(&clf_path(config))?;
    if config.events.is_file() {
        manifest.record_input(&config.events)?;
    }
    manifest.record_output(&out)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "indexed {} sentences into {} series -> {}",
        scores.len(),
        series.len(),
        out.display()
    ))
}

pub fn describe(config: &PipelineConfig, period: &str, entities: &str) -> CliResult<String> {
    let period: Period = period
        .parse()
        .map_err(|e: eventscope::Error| CliError::Usage(e.to_string()))?;
    let store = load_store(config)?;
    let model = load_model(config)?;
    let clf = load_classifier(config)?;

    let mut entity_ids = Vec::new();
    for id in entities.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let idx = store
            .lexicon
            .entity_index(id)
            .ok_or_else(|| CliError::Usage(format!("unknown entity id {id:?}")))?;
        entity_ids.push(idx as u32);
    }

    let (excerpts, removed) =
        rank_excerpts(&store, &clf, &model, period, &entity_ids, &config.describe_config())?;
    ensure_dir(&config.out_dir)?;
    let csv = config.out_dir.join("excerpts.csv");
    let txt = config.out_dir.join("excerpts.txt");
    write_excerpt_csv(&csv, &excerpts)?;
    let rendered = render_excerpts_text(&excerpts);
    fs::write(&txt, &rendered)
        .map_err(|e| CliError::Data(format!("cannot write {}: {e}", txt.display())))?;

    let mut manifest = Manifest::new("describe", &config.canonical());
    manifest.record_input(&store_path(config))?;
    manifest.record_input(&embed_path(config))?;
    manifest.record_input(&clf_path(config))?;
    manifest.record_output(&csv)?;
    manifest.record_output(&txt)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "{rendered}ranked {} excerpts for {period} ({} near-duplicates dropped) -> {}",
        excerpts.len(),
        removed.len(),
        csv.display()
    ))
}

pub fn synth(config: &PipelineConfig) -> CliResult<String> {
    let output = synth::generate(&config.synth_config())?;
    for path in [&config.corpus, &config.lexicon, &config.events] {
        if let Some(parent) = path.parent() {
            if !parent.as_os_str().is_empty() {
                ensure_dir(parent)?;
            }
        }
    }
    ensure_dir(&config.out_dir)?;
    let write = |path: &Path, text: &str| -> CliResult<()> {
        fs::write(path, text)
            .map_err(|e| CliError::Data(format!("cannot write {}: {e}", path.display())))
    };
    write(&config.corpus, &output.corpus)?;
    write(&config.lexicon, &output.lexicon)?;
    write(&config.events, &output.events)?;
    let truth = config.out_dir.join("synth_truth.csv");
    write(&truth, &output.manifest)?;

    let mut manifest = Manifest::new("synth", &config.canonical());
    manifest.record_output(&config.corpus)?;
    manifest.record_output(&config.lexicon)?;
    manifest.record_output(&config.events)?;
    manifest.record_output(&truth)?;
    manifest.write(&config.out_dir)?;
    Ok(format!(
        "generated {} sentences ({} planted) for {} entities -> {}, {}, {}",
        output.sentence_count,
        output.planted_count,
        config.synth_entities,
        config.corpus.display(),
        config.lexicon.display(),
        config.events.display()
    ))
}
