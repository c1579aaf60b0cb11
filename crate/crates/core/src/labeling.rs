//! Event-coincidence labeling. A (sentence, entity) pair is labeled
//! coinciding (1) when the sentence date falls inside the inner window
//! around any of the entity's events, non-coinciding (0) when it falls
//! outside the outer window of all of them, and is dropped otherwise.
//! Entities with no events label all their pairs 0. Only sentences inside
//! the padded coverage span of the event list are labeled at all.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::corpus::{CorpusStore, DATE_FORMAT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Event {
    pub entity_id: String,
    pub date: NaiveDate,
}

/// Day-offset windows, inclusive at both ends, measured as
/// sentence date minus event date.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowConfig {
    pub inner: (i64, i64),
    pub outer: (i64, i64),
    /// Days added on both sides of the event span to form the coverage span.
    pub coverage_pad: i64,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig { inner: (-8, 45), outer: (-120, 120), coverage_pad: 120 }
    }
}

impl WindowConfig {
    pub fn validate(&self) -> Result<()> {
        let (il, ih) = self.inner;
        let (ol, oh) = self.outer;
        if il > ih || ol > oh {
            return Err(Error::InvalidInput("window bounds must satisfy lo <= hi".into()));
        }
        if il < ol || ih > oh {
            return Err(Error::InvalidInput(
                "inner window must lie inside the outer window".into(),
            ));
        }
        if self.coverage_pad < 0 {
            return Err(Error::InvalidInput("coverage_pad must be non-negative".into()));
        }
        Ok(())
    }
}

/// One labeled (sentence, entity) pair; `entity` is the lexicon index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledInstance {
    pub sentence_id: u64,
    pub entity: u32,
    pub label: u8,
}

/// Label for one pair: `Some(1)` when any event is inside the inner window,
/// `Some(0)` when every event is outside the outer window (vacuously with no
/// events), `None` otherwise.
pub fn label_pair(
    sentence_date: NaiveDate,
    event_dates: &[NaiveDate],
    windows: &WindowConfig,
) -> Option<u8> {
    let mut inside_outer = false;
    for &event in event_dates {
        let offset = (sentence_date - event).num_days();
        if offset >= windows.inner.0 && offset <= windows.inner.1 {
            return Some(1);
        }
        if offset >= windows.outer.0 && offset <= windows.outer.1 {
            inside_outer = true;
        }
    }
    if inside_outer {
        None
    } else {
        Some(0)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LabelStats {
    /// Mention pairs whose sentence date lies inside the coverage span.
    pub pairs_in_coverage: usize,
    pub labeled: usize,
    pub positives: usize,
    pub undefined_dropped: usize,
    pub pairs_out_of_coverage: usize,
}

impl LabelStats {
    pub fn positive_rate(&self) -> f64 {
        if self.labeled == 0 {
            0.0
        } else {
            self.positives as f64 / self.labeled as f64
        }
    }
}

/// Labels every (mention-bearing sentence, mentioned entity) pair inside the
/// coverage span. Instances are emitted in (sentence_id, entity) order and
/// never carry an undefined label.
pub fn label_corpus(
    store: &CorpusStore,
    events: &[Event],
    windows: &WindowConfig,
) -> Result<(Vec<LabeledInstance>, LabelStats)> {
    windows.validate()?;
    if events.is_empty() {
        return Err(Error::Data("event list is empty; nothing can be labeled".into()));
    }
    let mut by_entity: HashMap<u32, Vec<NaiveDate>> = HashMap::new();
    for ev in events {
        if let Some(idx) = store.lexicon.entity_index(&ev.entity_id) {
            by_entity.entry(idx as u32).or_default().push(ev.date);
        }
    }
    let span_lo = events.iter().map(|e| e.date).min().unwrap()
        - chrono::Duration::days(windows.coverage_pad);
    let span_hi = events.iter().map(|e| e.date).max().unwrap()
        + chrono::Duration::days(windows.coverage_pad);

    let mut instances = Vec::new();
    let mut stats = LabelStats::default();
    let empty: Vec<NaiveDate> = Vec::new();
    for sentence in &store.sentences {
        if sentence.mentions.is_empty() {
            continue;
        }
        let date = store.date_of(sentence);
        if date < span_lo || date > span_hi {
            stats.pairs_out_of_coverage += sentence.mentions.len();
            continue;
        }
        for &entity in &sentence.mentions {
            stats.pairs_in_coverage += 1;
            let dates = by_entity.get(&entity).unwrap_or(&empty);
            match label_pair(date, dates, windows) {
                Some(label) => {
                    stats.labeled += 1;
                    stats.positives += label as usize;
                    instances.push(LabeledInstance {
                        sentence_id: sentence.sentence_id,
                        entity,
                        label,
                    });
                }
                None => stats.undefined_dropped += 1,
            }
        }
    }
    Ok((instances, stats))
}

/// Reads an event CSV with header `entity_id,event_date`.
pub fn read_events(path: &Path) -> Result<Vec<Event>> {
    let label = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Data(format!("{label}: {e}")))?;
    {
        let headers = reader.headers().map_err(|e| Error::Data(format!("{label}: {e}")))?;
        if headers.iter().collect::<Vec<_>>() != ["entity_id", "event_date"] {
            return Err(Error::parse(&label, 1, "expected header entity_id,event_date"));
        }
    }
    let mut events = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Data(format!("{label}: {e}")))?;
        let lineno = record.position().map(|p| p.line() as usize).unwrap_or(0);
        if record.len() != 2 {
            return Err(Error::parse(&label, lineno, "expected entity_id,event_date"));
        }
        let date = NaiveDate::parse_from_str(&record[1], DATE_FORMAT).map_err(|_| {
            Error::parse(&label, lineno, format!("invalid date {:?}", &record[1]))
        })?;
        events.push(Event { entity_id: record[0].to_string(), date });
    }
    Ok(events)
}

pub fn write_events(path: &Path, events: &[Event]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "entity_id,event_date")?;
        for ev in events {
            writeln!(w, "{},{}", ev.entity_id, ev.date.format(DATE_FORMAT))?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

/// Writes labels as `sentence_id,entity_id,label` with a header line.
pub fn write_labels(
    path: &Path,
    store: &CorpusStore,
    instances: &[LabeledInstance],
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    (|| -> std::io::Result<()> {
        writeln!(w, "sentence_id,entity_id,label")?;
        for inst in instances {
            writeln!(
                w,
                "{},{},{}",
                inst.sentence_id,
                store.lexicon.entity_id(inst.entity as usize),
                inst.label
            )?;
        }
        w.flush()
    })()
    .map_err(|e| Error::io(path, e))
}

pub fn read_labels(path: &Path, store: &CorpusStore) -> Result<Vec<LabeledInstance>> {
    let label = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, "sentence_id,entity_id,label")) => {}
        _ => return Err(Error::parse(&label, 1, "expected header sentence_id,entity_id,label")),
    }
    let mut out = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(Error::parse(&label, lineno, "expected sentence_id,entity_id,label"));
        }
        let sentence_id: u64 = fields[0]
            .parse()
            .map_err(|_| Error::parse(&label, lineno, "invalid sentence_id"))?;
        if store.sentence(sentence_id).is_none() {
            return Err(Error::parse(&label, lineno, format!("unknown sentence_id {sentence_id}")));
        }
        let entity = store
            .lexicon
            .entity_index(fields[1])
            .ok_or_else(|| Error::parse(&label, lineno, format!("unknown entity_id {:?}", fields[1])))?
            as u32;
        let lab: u8 = match fields[2] {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(Error::parse(&label, lineno, format!("label must be 0 or 1, got {other:?}")))
            }
        };
        out.push(LabeledInstance { sentence_id, entity, label: lab });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn d(s: &str) -> NaiveDate {
        NaiveDate::parse_from_str(s, DATE_FORMAT).unwrap()
    }

    #[test]
    fn pair_inside_inner_window_is_positive() {
        let w = WindowConfig::default();
        assert_eq!(label_pair(d("2008-09-30"), &[d("2008-09-28")], &w), Some(1));
    }

    #[test]
    fn pair_far_from_all_events_is_negative() {
        let w = WindowConfig::default();
        assert_eq!(label_pair(d("2009-06-01"), &[d("2008-09-28")], &w), Some(0));
    }

    #[test]
    fn pair_between_windows_is_undefined() {
        let w = WindowConfig::default();
        assert_eq!(label_pair(d("2008-11-27"), &[d("2008-09-28")], &w), None);
    }

    #[test]
    fn window_boundaries_are_inclusive() {
        let w = WindowConfig::default();
        let event = d("2008-06-01");
        assert_eq!(label_pair(event - chrono::Duration::days(8), &[event], &w), Some(1));
        assert_eq!(label_pair(event + chrono::Duration::days(45), &[event], &w), Some(1));
        assert_eq!(label_pair(event - chrono::Duration::days(9), &[event], &w), None);
        assert_eq!(label_pair(event + chrono::Duration::days(120), &[event], &w), None);
        assert_eq!(label_pair(event + chrono::Duration::days(121), &[event], &w), Some(0));
    }

    #[test]
    fn no_events_is_vacuously_negative() {
        assert_eq!(label_pair(d("2008-09-30"), &[], &WindowConfig::default()), Some(0));
    }

    #[test]
    fn inner_window_must_lie_inside_outer() {
        let w = WindowConfig { inner: (-10, 130), ..WindowConfig::default() };
        assert!(w.validate().is_err());
    }

    const LEXICON: &str = "alpha\tg1\talpha corp\nbravo\tg1\tbravo\n";

    fn store_with_dates(dates: &[&str]) -> CorpusStore {
        let mut corpus = String::new();
        for (i, date) in dates.iter().enumerate() {
            corpus.push_str(&format!("d{i}\t{date}\tAlpha Corp did things. Bravo watched.\n"));
        }
        CorpusStore::ingest_strings(&corpus, LEXICON).unwrap()
    }

    #[test]
    fn label_corpus_emits_defined_pairs_only() {
        // Event for alpha on 2008-06-01; bravo has none.
        let store = store_with_dates(&["2008-06-03", "2008-08-15", "2009-03-01"]);
        let events = vec![Event { entity_id: "alpha".into(), date: d("2008-06-01") }];
        let (instances, stats) = label_corpus(&store, &events, &WindowConfig::default()).unwrap();
        // Doc dates: +2 (inner), +75 (between), +273 (outside coverage).
        // Bravo pairs inside coverage are all 0.
        assert_eq!(stats.pairs_out_of_coverage, 2);
        assert_eq!(stats.undefined_dropped, 1);
        let alpha = store.lexicon.entity_index("alpha").unwrap() as u32;
        let bravo = store.lexicon.entity_index("bravo").unwrap() as u32;
        let get = |sid: u64, e: u32| {
            instances.iter().find(|i| i.sentence_id == sid && i.entity == e).map(|i| i.label)
        };
        assert_eq!(get(0, alpha), Some(1));
        assert_eq!(get(1, bravo), Some(0));
        assert_eq!(get(3, bravo), Some(0), "zero-event entity labels 0 inside coverage");
        assert_eq!(get(2, alpha), None, "between-window pair must be dropped");
        assert_eq!(stats.positives, 1);
        assert!((stats.positive_rate() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn label_corpus_rejects_empty_events() {
        let store = store_with_dates(&["2008-06-03"]);
        assert!(label_corpus(&store, &[], &WindowConfig::default()).is_err());
    }

    /// Literal restatement of the labeling rule, kept independent of the
    /// implementation above.
    fn oracle(sentence: NaiveDate, events: &[NaiveDate], w: &WindowConfig) -> Option<u8> {
        let offsets: Vec<i64> = events.iter().map(|e| (sentence - *e).num_days()).collect();
        let coinciding = offsets.iter().any(|&o| w.inner.0 <= o && o <= w.inner.1);
        let all_far = offsets.iter().all(|&o| o < w.outer.0 || o > w.outer.1);
        if coinciding {
            Some(1)
        } else if all_far {
            Some(0)
        } else {
            None
        }
    }

    #[test]
    fn matches_brute_force_oracle_on_randomized_cases() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let base = d("2008-01-01");
        let w = WindowConfig::default();
        for _ in 0..1000 {
            let sentence = base + chrono::Duration::days(rng.random_range(0..400));
            let n_events = rng.random_range(0..4);
            let events: Vec<NaiveDate> = (0..n_events)
                .map(|_| base + chrono::Duration::days(rng.random_range(0..400)))
                .collect();
            assert_eq!(label_pair(sentence, &events, &w), oracle(sentence, &events, &w));
        }
    }

    proptest::proptest! {
        /// Widening the inner window never flips 1 -> 0; widening the outer
        /// window never flips 0 -> 1.
        #[test]
        fn window_widening_is_monotone(
            sentence_off in -200i64..200,
            event_offs in proptest::collection::vec(-200i64..200, 0..4),
            grow_in in 0i64..30,
            grow_out in 0i64..30,
        ) {
            let base = NaiveDate::from_ymd_opt(2008, 1, 1).unwrap();
            let sentence = base + chrono::Duration::days(sentence_off);
            let events: Vec<NaiveDate> =
                event_offs.iter().map(|&o| base + chrono::Duration::days(o)).collect();
            let small = WindowConfig::default();
            let wide_inner = WindowConfig {
                inner: (small.inner.0 - grow_in, small.inner.1 + grow_in),
                outer: (small.outer.0 - grow_in, small.outer.1 + grow_in),
                ..small
            };
            let wide_outer = WindowConfig {
                outer: (small.outer.0 - grow_out, small.outer.1 + grow_out),
                ..small
            };
            let before = label_pair(sentence, &events, &small);
            if before == Some(1) {
                proptest::prop_assert_eq!(label_pair(sentence, &events, &wide_inner), Some(1));
            }
            if label_pair(sentence, &events, &wide_outer) == Some(1) {
                proptest::prop_assert_eq!(before, Some(1));
            }
        }
    }

    #[test]
    fn labels_csv_round_trip() {
        let store = store_with_dates(&["2008-06-03", "2008-08-15"]);
        let events = vec![Event { entity_id: "alpha".into(), date: d("2008-06-01") }];
        let (instances, _) = label_corpus(&store, &events, &WindowConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("labels.csv");
        write_labels(&path, &store, &instances).unwrap();
        let back = read_labels(&path, &store).unwrap();
        assert_eq!(instances, back);
    }

    #[test]
    fn events_csv_round_trip_and_header_check() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("events.csv");
        let events = vec![
            Event { entity_id: "alpha".into(), date: d("2008-06-01") },
            Event { entity_id: "bravo".into(), date: d("2009-01-15") },
        ];
        write_events(&path, &events).unwrap();
        assert_eq!(read_events(&path).unwrap(), events);
        std::fs::write(&path, "entity,when\nalpha,2008-06-01\n").unwrap();
        assert!(read_events(&path).is_err());
    }
}
