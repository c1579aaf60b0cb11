//! Time-bucketed relevance indices over classifier posteriors.
//!
//! Sentence scores are grouped into calendar periods and averaged per
//! entity, per entity group, and globally. Periods without any scored
//! sentence are gaps rather than zeros: silence in the source data is not
//! evidence of calm.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use chrono::{Datelike, Days, NaiveDate, Weekday};

use crate::corpus::CorpusStore;
use crate::{Error, Result};

/// Calendar granularity of the index series.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PeriodKind {
    Month,
    Week,
    Quarter,
}

impl FromStr for PeriodKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "month" => Ok(PeriodKind::Month),
            "week" => Ok(PeriodKind::Week),
            "quarter" => Ok(PeriodKind::Quarter),
            _ => Err(Error::InvalidInput(format!(
                "unknown period kind {s:?}, expected month, week, or quarter"
            ))),
        }
    }
}

impl fmt::Display for PeriodKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            PeriodKind::Month => "month",
            PeriodKind::Week => "week",
            PeriodKind::Quarter => "quarter",
        };
        f.write_str(name)
    }
}

/// One calendar bucket: a month, an ISO week, or a quarter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Period {
    pub kind: PeriodKind,
    pub year: i32,
    pub index: u32,
}

impl Period {
    /// The period of `kind` containing `date`. Weeks use the ISO week year.
    pub fn of(kind: PeriodKind, date: NaiveDate) -> Period {
        match kind {
            PeriodKind::Month => Period { kind, year: date.year(), index: date.month() },
            PeriodKind::Week => {
                let iso = date.iso_week();
                Period { kind, year: iso.year(), index: iso.week() }
            }
            PeriodKind::Quarter => {
                Period { kind, year: date.year(), index: (date.month() - 1) / 3 + 1 }
            }
        }
    }

    /// First calendar day of the period.
    pub fn start(&self) -> NaiveDate {
        match self.kind {
            PeriodKind::Month => NaiveDate::from_ymd_opt(self.year, self.index, 1),
            PeriodKind::Week => NaiveDate::from_isoywd_opt(self.year, self.index, Weekday::Mon),
            PeriodKind::Quarter => NaiveDate::from_ymd_opt(self.year, (self.index - 1) * 3 + 1, 1),
        }
        .expect("period fields hold a valid calendar position")
    }

    /// Last calendar day of the period.
    pub fn end(&self) -> NaiveDate {
        let next_start = match self.kind {
            PeriodKind::Month => {
                let (y, m) = if self.index == 12 { (self.year + 1, 1) } else { (self.year, self.index + 1) };
                NaiveDate::from_ymd_opt(y, m, 1).expect("valid month")
            }
            PeriodKind::Week => self.start() + Days::new(7),
            PeriodKind::Quarter => {
                let (y, q) = if self.index == 4 { (self.year + 1, 1) } else { (self.year, self.index + 1) };
                NaiveDate::from_ymd_opt(y, (q - 1) * 3 + 1, 1).expect("valid quarter")
            }
        };
        next_start.pred_opt().expect("period end precedes date range limit")
    }
}

impl fmt::Display for Period {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            PeriodKind::Month => write!(f, "{:04}-{:02}", self.year, self.index),
            PeriodKind::Week => write!(f, "{:04}-W{:02}", self.year, self.index),
            PeriodKind::Quarter => write!(f, "{:04}-Q{}", self.year, self.index),
        }
    }
}

impl FromStr for Period {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidInput(format!(
            "unparseable period {s:?}, expected YYYY-MM, YYYY-Wnn, or YYYY-Qn"
        ));
        let (year_part, rest) = s.split_once('-').ok_or_else(bad)?;
        let year: i32 = year_part.parse().map_err(|_| bad())?;
        let (kind, index_part) = if let Some(w) = rest.strip_prefix('W') {
            (PeriodKind::Week, w)
        } else if let Some(q) = rest.strip_prefix('Q') {
            (PeriodKind::Quarter, q)
        } else {
            (PeriodKind::Month, rest)
        };
        let index: u32 = index_part.parse().map_err(|_| bad())?;
        let valid = match kind {
            PeriodKind::Month => (1..=12).contains(&index),
            PeriodKind::Week => {
                (1..=53).contains(&index)
                    && NaiveDate::from_isoywd_opt(year, index, Weekday::Mon).is_some()
            }
            PeriodKind::Quarter => (1..=4).contains(&index),
        };
        if !valid {
            return Err(bad());
        }
        Ok(Period { kind, year, index })
    }
}

/// How group values combine member entities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GroupMode {
    /// Sum of entity value times mention count, divided by group size.
    /// Can exceed 1; kept for fidelity with sources that define it this way.
    Literal,
    /// Mention-weighted mean of member scores, always in [0, 1].
    Normalized,
}

impl FromStr for GroupMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "literal" => Ok(GroupMode::Literal),
            "normalized" => Ok(GroupMode::Normalized),
            _ => Err(Error::InvalidInput(format!(
                "unknown group mode {s:?}, expected literal or normalized"
            ))),
        }
    }
}

impl fmt::Display for GroupMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GroupMode::Literal => "literal",
            GroupMode::Normalized => "normalized",
        })
    }
}

/// What an index series describes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Scope {
    Entity(String),
    Group(String),
    Global,
}

impl Scope {
    fn kind_name(&self) -> &'static str {
        match self {
            Scope::Entity(_) => "entity",
            Scope::Group(_) => "group",
            Scope::Global => "global",
        }
    }

    fn id(&self) -> &str {
        match self {
            Scope::Entity(id) | Scope::Group(id) => id,
            Scope::Global => "",
        }
    }
}

/// Aggregated value for one period of one series.
#[derive(Debug, Clone)]
pub struct PeriodStats {
    pub value: f64,
    /// Number of contributing (sentence, entity) pairs; sentences counted
    /// once for the global scope.
    pub count: u64,
    /// Percentiles of the contributing scores at the configured step.
    pub band: Vec<f64>,
    /// False when the period lies wholly outside the event-data span.
    pub in_sample: bool,
    /// True when a literal-mode group value exceeds 1.
    pub overflow: bool,
}

/// One scope's time series of index values.
#[derive(Debug, Clone)]
pub struct IndexSeries {
    pub scope: Scope,
    pub points: BTreeMap<Period, PeriodStats>,
}

/// Aggregation settings.
#[derive(Debug, Clone)]
pub struct IndexConfig {
    pub period: PeriodKind,
    pub group_mode: GroupMode,
    /// Percentile spacing for the band columns, 2 or 4.
    pub percentile_step: u32,
    /// Date span covered by event data; periods not overlapping it are
    /// marked out-of-sample. `None` marks everything in-sample.
    pub event_span: Option<(NaiveDate, NaiveDate)>,
}

impl Default for IndexConfig {
    fn default() -> Self {
        IndexConfig {
            period: PeriodKind::Month,
            group_mode: GroupMode::Normalized,
            percentile_step: 2,
            event_span: None,
        }
    }
}

impl IndexConfig {
    pub fn validate(&self) -> Result<()> {
        if self.percentile_step != 2 && self.percentile_step != 4 {
            return Err(Error::InvalidInput(format!(
                "percentile_step must be 2 or 4, got {}",
                self.percentile_step
            )));
        }
        if let Some((lo, hi)) = self.event_span {
            if lo > hi {
                return Err(Error::InvalidInput(format!(
                    "event span starts {lo} after it ends {hi}"
                )));
            }
        }
        Ok(())
    }

    fn in_sample(&self, period: Period) -> bool {
        match self.event_span {
            None => true,
            Some((lo, hi)) => period.start() <= hi && period.end() >= lo,
        }
    }
}

/// Percentiles of `scores` at multiples of `step` up to the 98th, by
/// linear interpolation over the sorted values.
pub fn percentile_band(scores: &[f64], step: u32) -> Vec<f64> {
    assert!(!scores.is_empty(), "percentiles of an empty sample");
    let mut sorted = scores.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut out = Vec::with_capacity((98 / step) as usize);
    let mut q = step;
    while q <= 98 {
        // Integer rank arithmetic keeps grid points exact.
        let num = q as usize * (n - 1);
        let lo = num / 100;
        let rem = num % 100;
        let v = if rem == 0 {
            sorted[lo]
        } else {
            sorted[lo] + (rem as f64 / 100.0) * (sorted[lo + 1] - sorted[lo])
        };
        out.push(v);
        q += step;
    }
    out
}

// Scores of one bucket plus the running sum for value computation.
#[derive(Default, Clone)]
struct Bucket {
    scores: Vec<f64>,
}

impl Bucket {
    fn push(&mut self, s: f64) {
        self.scores.push(s);
    }

    fn mean(&self) -> f64 {
        crate::mathutil::mean(&self.scores)
    }
}

/// Builds entity, group, and global index series from per-sentence scores.
///
/// `scores` pairs each mention-bearing sentence id with its classifier
/// posterior. A sentence mentioning several entities contributes to each
/// of their series; the global series counts it once.
pub fn build_indices(
    store: &CorpusStore,
    scores: &[(u64, f64)],
    config: &IndexConfig,
) -> Result<Vec<IndexSeries>> {
    config.validate()?;
    if scores.is_empty() {
        return Err(Error::Data("no sentence scores to aggregate".into()));
    }
    let mut entity_buckets: BTreeMap<u32, BTreeMap<Period, Bucket>> = BTreeMap::new();
    let mut global_buckets: BTreeMap<Period, Bucket> = BTreeMap::new();
    let mut seen = std::collections::BTreeSet::new();
    for &(sentence_id, score) in scores {
        let sentence = store
            .sentence(sentence_id)
            .ok_or_else(|| Error::Data(format!("unknown sentence id {sentence_id}")))?;
        if !seen.insert(sentence_id) {
            return Err(Error::Data(format!("sentence id {sentence_id} scored twice")));
        }
        if !(0.0..=1.0).contains(&score) {
            return Err(Error::Data(format!(
                "score {score} for sentence {sentence_id} is outside [0, 1]"
            )));
        }
        if sentence.mentions.is_empty() {
            return Err(Error::Data(format!(
                "sentence {sentence_id} mentions no entity"
            )));
        }
        let period = Period::of(config.period, store.date_of(sentence));
        for &entity in &sentence.mentions {
            entity_buckets
                .entry(entity)
                .or_default()
                .entry(period)
                .or_default()
                .push(score);
        }
        global_buckets.entry(period).or_default().push(score);
    }
    let step = config.percentile_step;
    let stats_of = |bucket: &Bucket, period: Period, value: f64| PeriodStats {
        value,
        count: bucket.scores.len() as u64,
        band: percentile_band(&bucket.scores, step),
        in_sample: config.in_sample(period),
        overflow: value > 1.0,
    };
    let mut series = Vec::new();
    for (&entity, buckets) in &entity_buckets {
        let points = buckets
            .iter()
            .map(|(&period, bucket)| (period, stats_of(bucket, period, bucket.mean())))
            .collect();
        series.push(IndexSeries {
            scope: Scope::Entity(store.lexicon.entity_id(entity as usize).to_string()),
            points,
        });
    }
    for group in store.lexicon.group_ids() {
        let members = store.lexicon.group_members(&group);
        let size = members.len() as f64;
        // Pool member buckets per period; the weighted sum follows the
        // value-times-count form so the two group modes share a numerator.
        let mut pooled: BTreeMap<Period, (f64, Bucket)> = BTreeMap::new();
        for &m in &members {
            let Some(buckets) = entity_buckets.get(&(m as u32)) else { continue };
            for (&period, bucket) in buckets {
                let slot = pooled.entry(period).or_insert((0.0, Bucket::default()));
                slot.0 += bucket.mean() * bucket.scores.len() as f64;
                slot.1.scores.extend_from_slice(&bucket.scores);
            }
        }
        if pooled.is_empty() {
            continue;
        }
        let points = pooled
            .iter()
            .map(|(&period, (weighted_sum, bucket))| {
                let value = match config.group_mode {
                    GroupMode::Literal => weighted_sum / size,
                    GroupMode::Normalized => weighted_sum / bucket.scores.len() as f64,
                };
                (period, stats_of(bucket, period, value))
            })
            .collect();
        series.push(IndexSeries { scope: Scope::Group(group), points });
    }
    let global_points = global_buckets
        .iter()
        .map(|(&period, bucket)| (period, stats_of(bucket, period, bucket.mean())))
        .collect();
    series.push(IndexSeries { scope: Scope::Global, points: global_points });
    Ok(series)
}

/// Writes index series as CSV with one row per (scope, period).
pub fn write_index_csv(path: &Path, series: &[IndexSeries], step: u32) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut write = || -> std::io::Result<()> {
        write!(w, "scope,scope_id,period,value,count,in_sample")?;
        let mut q = step;
        while q <= 98 {
            write!(w, ",p{q:02}")?;
            q += step;
        }
        writeln!(w)?;
        for s in series {
            for (period, stats) in &s.points {
                write!(
                    w,
                    "{},{},{},{},{},{}",
                    s.scope.kind_name(),
                    s.scope.id(),
                    period,
                    stats.value,
                    stats.count,
                    u8::from(stats.in_sample),
                )?;
                for v in &stats.band {
                    write!(w, ",{v}")?;
                }
                writeln!(w)?;
            }
        }
        w.flush()
    };
    write().map_err(|e| Error::io(path, e))
}
