//! Synthetic corpus generation with planted, time-localized event language.
//!
//! Entities emit background chatter drawn from a Zipf-weighted vocabulary.
//! Near a planted event, a configurable fraction of each mention-bearing
//! sentence's words switches to a disjoint event vocabulary. The manifest
//! records which sentences were generated under event influence, giving
//! the pipeline a ground truth to recover.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, Zipf};

use crate::corpus::DATE_FORMAT;
use crate::labeling::WindowConfig;
use crate::{Error, Result};

/// Generator settings.
#[derive(Debug, Clone)]
pub struct SynthConfig {
    pub entities: usize,
    /// Poisson rate of events per entity; entities draw at least one event
    /// whenever the rate is positive.
    pub events_per_entity: f64,
    pub span_start: NaiveDate,
    pub span_days: u32,
    pub background_vocab: usize,
    pub event_vocab: usize,
    /// Probability that an in-window word comes from the event vocabulary.
    pub lambda: f64,
    /// Poisson rate of mention sentences per entity and day.
    pub sentences_per_day: f64,
    pub sentence_len_min: usize,
    pub sentence_len_max: usize,
    /// Poisson rate of surrounding no-mention sentences per document.
    pub context_sentences: f64,
    /// Entity groups, assigned round-robin; 0 leaves entities ungrouped.
    pub groups: usize,
    /// Event window used to decide which sentences are planted.
    pub windows: WindowConfig,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            entities: 8,
            events_per_entity: 2.5,
            span_start: NaiveDate::from_ymd_opt(2007, 1, 1).expect("valid date"),
            span_days: 730,
            background_vocab: 2000,
            event_vocab: 200,
            lambda: 0.85,
            sentences_per_day: 0.25,
            sentence_len_min: 8,
            sentence_len_max: 14,
            context_sentences: 1.2,
            groups: 2,
            windows: WindowConfig::default(),
            seed: 42,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.entities == 0 {
            return Err(Error::InvalidInput("entities must be positive".into()));
        }
        if self.span_days == 0 {
            return Err(Error::InvalidInput("span_days must be positive".into()));
        }
        if self.background_vocab == 0 || self.event_vocab == 0 {
            return Err(Error::InvalidInput("vocabulary sizes must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidInput(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        for (name, rate) in [
            ("events_per_entity", self.events_per_entity),
            ("sentences_per_day", self.sentences_per_day),
            ("context_sentences", self.context_sentences),
        ] {
            if !(rate >= 0.0 && rate.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "{name} must be a non-negative rate, got {rate}"
                )));
            }
        }
        if self.sentence_len_min < 2 || self.sentence_len_min > self.sentence_len_max {
            return Err(Error::InvalidInput(format!(
                "sentence length bounds [{}, {}] are invalid",
                self.sentence_len_min, self.sentence_len_max
            )));
        }
        self.windows.validate()
    }
}

/// One mention-bearing sentence's ground truth.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestRow {
    /// Sentence id as the ingest stage will assign it.
    pub sentence_id: u64,
    pub planted: bool,
    pub entity_id: String,
    /// The event that planted this sentence, when planted.
    pub event_date: Option<NaiveDate>,
}

/// Generated files as strings, plus summary counts.
#[derive(Debug, Clone)]
pub struct SynthOutput {
    pub corpus: String,
    pub lexicon: String,
    pub events: String,
    pub manifest: String,
    pub manifest_rows: Vec<ManifestRow>,
    pub sentence_count: u64,
    pub planted_count: usize,
}

impl SynthOutput {
    /// Writes corpus.tsv, lexicon.tsv, events.csv, and manifest.csv.
    pub fn write(&self, dir: &Path) -> Result<()> {
        for (name, text) in [
            ("corpus.tsv", &self.corpus),
            ("lexicon.tsv", &self.lexicon),
            ("events.csv", &self.events),
            ("manifest.csv", &self.manifest),
        ] {
            let path = dir.join(name);
            fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }
}

fn sample_count(rng: &mut ChaCha8Rng, rate: f64) -> usize {
    if rate <= 0.0 {
        return 0;
    }
    let poisson = Poisson::new(rate).expect("positive finite rate");
    poisson.sample(rng) as usize
}

fn entity_label(index: usize) -> String {
    format!("e{index:02}")
}

/// Generates a corpus, lexicon, event list, and ground-truth manifest.
pub fn generate(config: &SynthConfig) -> Result<SynthOutput> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    // Disjoint by prefix; 4+ character tokens keep the sentence splitter's
    // abbreviation guard out of play.
    let background: Vec<String> = (0..config.background_vocab).map(|i| format!("bg{i:04}")).collect();
    let event_words: Vec<String> = (0..config.event_vocab).map(|i| format!("ev{i:03}")).collect();
    let zipf = Zipf::new(config.background_vocab as f64, 1.07).expect("positive vocabulary");

    let mut lexicon = String::new();
    for e in 0..config.entities {
        let group = if config.groups == 0 {
            String::new()
        } else {
            format!("g{}", e % config.groups)
        };
        writeln!(lexicon, "{}\t{}\tEntity{e:02}", entity_label(e), group).expect("string write");
    }

    // Events per entity, at least one when the rate is positive so every
    // run yields a labelable corpus.
    let mut events: Vec<Vec<NaiveDate>> = Vec::with_capacity(config.entities);
    for _ in 0..config.entities {
        let count = match config.events_per_entity {
            rate if rate <= 0.0 => 0,
            rate => sample_count(&mut rng, rate).max(1),
        };
        let mut dates: Vec<NaiveDate> = (0..count)
            .map(|_| {
                config.span_start + Days::new(rng.random_range(0..config.span_days) as u64)
            })
            .collect();
        dates.sort();
        dates.dedup();
        events.push(dates);
    }
    let mut events_csv = String::from("entity_id,event_date\n");
    for (e, dates) in events.iter().enumerate() {
        for date in dates {
            writeln!(events_csv, "{},{}", entity_label(e), date.format(DATE_FORMAT))
                .expect("string write");
        }
    }

    let (inner_lo, inner_hi) = config.windows.inner;
    let planting_event = |entity: usize, date: NaiveDate| -> Option<NaiveDate> {
        events[entity].iter().copied().find(|&event| {
            let offset = (date - event).num_days();
            offset >= inner_lo && offset <= inner_hi
        })
    };

    let mut corpus = String::new();
    let mut manifest = String::from("sentence_id,planted,entity_id,event_date\n");
    let mut manifest_rows = Vec::new();
    let mut sentence_id = 0u64;
    let mut doc_counter = 0u64;
    let mut planted_count = 0usize;

    let mut filler = |rng: &mut ChaCha8Rng, eventful: bool| -> String {
        if eventful && config.lambda > 0.0 && rng.random_range(0.0..1.0) < config.lambda {
            event_words[rng.random_range(0..config.event_vocab)].clone()
        } else {
            let rank = zipf.sample(rng) as usize;
            background[rank - 1].clone()
        }
    };
    let capitalize = |word: &str| -> String {
        let mut chars = word.chars();
        match chars.next() {
            Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
            None => String::new(),
        }
    };

    for day in 0..config.span_days {
        let date = config.span_start + Days::new(day as u64);
        for entity in 0..config.entities {
            let mention_count = sample_count(&mut rng, config.sentences_per_day);
            if mention_count == 0 {
                continue;
            }
            let event = planting_event(entity, date);
            let eventful = event.is_some() && config.lambda > 0.0;
            let context_count = sample_count(&mut rng, config.context_sentences);
            let before = context_count.div_ceil(2);
            let mut doc_sentences: Vec<(String, bool)> = Vec::new();
            for _ in 0..before {
                doc_sentences.push((context_sentence(&mut rng, config, &mut filler), false));
            }
            for _ in 0..mention_count {
                let len = rng.random_range(config.sentence_len_min..=config.sentence_len_max);
                let slot = rng.random_range(0..len);
                let mut words = Vec::with_capacity(len);
                for pos in 0..len {
                    if pos == slot {
                        words.push(format!("Entity{entity:02}"));
                    } else {
                        words.push(filler(&mut rng, eventful));
                    }
                }
                words[0] = capitalize(&words[0]);
                doc_sentences.push((words.join(" ") + " .", true));
            }
            for _ in before..context_count {
                doc_sentences.push((context_sentence(&mut rng, config, &mut filler), false));
            }
            let text: Vec<&str> = doc_sentences.iter().map(|(s, _)| s.as_str()).collect();
            writeln!(
                corpus,
                "doc{doc_counter:06}\t{}\t{}",
                date.format(DATE_FORMAT),
                text.join(" ")
            )
            .expect("string write");
            doc_counter += 1;
            for (_, bears_mention) in &doc_sentences {
                if *bears_mention {
                    let planted = eventful;
                    let event_field = if planted {
                        planted_count += 1;
                        event.expect("eventful implies a covering event")
                            .format(DATE_FORMAT)
                            .to_string()
                    } else {
                        String::new()
                    };
                    writeln!(
                        manifest,
                        "{sentence_id},{},{},{event_field}",
                        u8::from(planted),
                        entity_label(entity),
                    )
                    .expect("string write");
                    manifest_rows.push(ManifestRow {
                        sentence_id,
                        planted,
                        entity_id: entity_label(entity),
                        event_date: if planted { event } else { None },
                    });
                }
                sentence_id += 1;
            }
        }
    }
    Ok(SynthOutput {
        corpus,
        lexicon,
        events: events_csv,
        manifest,
        manifest_rows,
        sentence_count: sentence_id,
        planted_count,
    })
}

fn context_sentence(
    rng: &mut ChaCha8Rng,
    config: &SynthConfig,
    filler: &mut impl FnMut(&mut ChaCha8Rng, bool) -> String,
) -> String {
    let len = rng.random_range(config.sentence_len_min..=config.sentence_len_max);
    let mut words: Vec<String> = (0..len).map(|_| filler(rng, false)).collect();
    let mut chars = words[0].chars();
    if let Some(c) = chars.next() {
        words[0] = c.to_uppercase().collect::<String>() + chars.as_str();
    }
    words.join(" ") + " ."
}
