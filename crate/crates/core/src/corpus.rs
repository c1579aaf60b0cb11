//! Corpus ingestion: documents are split into sentences, tokenized, and
//! scanned for entity mentions against a surface-form lexicon.
//!
//! Corpus files are UTF-8 with one document per line:
//! `doc_id<TAB>YYYY-MM-DD<TAB>text`, where tabs, newlines, and backslashes
//! inside the text are escaped as `\t`, `\n`, `\\`.
//!
//! Lexicon files have one entity per line:
//! `entity_id<TAB>group_ids<TAB>surface_form[<TAB>surface_form...]` with
//! comma-separated group ids. A surface form prefixed `cs:` is matched
//! case-sensitively; all other forms match case-folded tokens.

use std::collections::BTreeSet;
use std::collections::HashMap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use chrono::NaiveDate;

use crate::binio::{BinReader, BinWriter};
use crate::error::{Error, Result};

pub const DATE_FORMAT: &str = "%Y-%m-%d";

const STORE_MAGIC: &[u8; 4] = b"ESST";
const STORE_VERSION: u32 = 1;

fn is_terminal(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

/// Splits text into sentences. A sentence ends at `.`, `!`, or `?` followed
/// by whitespace and an uppercase letter, or at end of text. A period
/// preceded by a single uppercase letter ("A.") or by a token of at most
/// three characters containing another period ("U.S.") does not end a
/// sentence. Every non-whitespace character of the input appears in exactly
/// one output sentence.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize; // index into chars
    let mut i = 0usize;
    while i < chars.len() {
        let (_, c) = chars[i];
        if is_terminal(c) && !(c == '.' && abbreviation_guard(&chars, i)) {
            // Boundary requires at least one whitespace char, then uppercase.
            let mut k = i + 1;
            while k < chars.len() && chars[k].1.is_whitespace() {
                k += 1;
            }
            if k > i + 1 && k < chars.len() && chars[k].1.is_uppercase() {
                push_sentence(text, &chars, start, i + 1, &mut sentences);
                start = k;
                i = k;
                continue;
            }
        }
        i += 1;
    }
    push_sentence(text, &chars, start, chars.len(), &mut sentences);
    sentences
}

/// True when the period at `chars[i]` terminates an abbreviation rather
/// than a sentence.
fn abbreviation_guard(chars: &[(usize, char)], i: usize) -> bool {
    let mut j = i;
    while j > 0 && !chars[j - 1].1.is_whitespace() {
        j -= 1;
    }
    let token = &chars[j..i];
    if token.len() == 1 && token[0].1.is_uppercase() {
        return true;
    }
    token.len() <= 3 && !token.is_empty() && token.iter().any(|&(_, c)| c == '.')
}

fn push_sentence(
    text: &str,
    chars: &[(usize, char)],
    start: usize,
    end: usize,
    out: &mut Vec<String>,
) {
    if start >= end {
        return;
    }
    let lo = chars[start].0;
    let hi = if end == chars.len() { text.len() } else { chars[end].0 };
    let s = text[lo..hi].trim();
    if !s.is_empty() {
        out.push(s.to_string());
    }
}

fn split_token_chunks(s: &str) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in s.split_whitespace() {
        let chars: Vec<char> = chunk.chars().collect();
        let mut a = 0;
        let mut b = chars.len();
        while a < b && !chars[a].is_alphanumeric() {
            a += 1;
        }
        let mut trail = Vec::new();
        while b > a && !chars[b - 1].is_alphanumeric() {
            trail.push(chars[b - 1].to_string());
            b -= 1;
        }
        for c in &chars[..a] {
            out.push(c.to_string());
        }
        if b > a {
            out.push(chars[a..b].iter().collect());
        }
        trail.reverse();
        out.extend(trail);
    }
    out
}

/// Lowercased tokens: whitespace-split with leading and trailing
/// punctuation peeled off as separate tokens; interior punctuation and
/// digits are preserved ("11.2" stays one token).
pub fn tokenize(sentence: &str) -> Vec<String> {
    split_token_chunks(sentence).iter().map(|t| t.to_lowercase()).collect()
}

/// Same splitting as [`tokenize`] but case-preserving; positions align
/// one-to-one with the folded tokens.
pub fn tokenize_raw(sentence: &str) -> Vec<String> {
    split_token_chunks(sentence)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SurfaceForm {
    /// Token sequence; lowercased unless `case_sensitive`.
    pub tokens: Vec<String>,
    pub case_sensitive: bool,
}

/// Entity ids with their surface forms and group memberships. Entities are
/// indexed in sorted-id order; indices are stable across runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct EntityLexicon {
    entity_ids: Vec<String>,
    forms: Vec<Vec<SurfaceForm>>,
    groups: Vec<Vec<String>>,
}

impl EntityLexicon {
    pub fn parse(text: &str, path_label: &str) -> Result<Self> {
        let mut entries: Vec<(String, Vec<String>, Vec<SurfaceForm>)> = Vec::new();
        for (idx, line) in text.lines().enumerate() {
            let lineno = idx + 1;
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() < 3 {
                return Err(Error::parse(
                    path_label,
                    lineno,
                    "expected entity_id<TAB>group_ids<TAB>surface_form...",
                ));
            }
            let entity_id = fields[0].trim();
            if entity_id.is_empty() {
                return Err(Error::parse(path_label, lineno, "empty entity_id"));
            }
            if entries.iter().any(|(id, _, _)| id == entity_id) {
                return Err(Error::parse(
                    path_label,
                    lineno,
                    format!("duplicate entity_id {entity_id:?}"),
                ));
            }
            let mut groups: Vec<String> = fields[1]
                .split(',')
                .map(str::trim)
                .filter(|g| !g.is_empty())
                .map(String::from)
                .collect();
            groups.sort();
            groups.dedup();
            let mut forms = Vec::new();
            for &field in &fields[2..] {
                let (body, cs) = match field.strip_prefix("cs:") {
                    Some(rest) => (rest, true),
                    None => (field, false),
                };
                let tokens: Vec<String> = if cs {
                    body.split_whitespace().map(String::from).collect()
                } else {
                    body.split_whitespace().map(|t| t.to_lowercase()).collect()
                };
                if tokens.is_empty() {
                    return Err(Error::parse(path_label, lineno, "empty surface form"));
                }
                forms.push(SurfaceForm { tokens, case_sensitive: cs });
            }
            entries.push((entity_id.to_string(), groups, forms));
        }
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut lex = EntityLexicon::default();
        for (id, groups, forms) in entries {
            lex.entity_ids.push(id);
            lex.groups.push(groups);
            lex.forms.push(forms);
        }
        Ok(lex)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = read_to_string(path)?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn len(&self) -> usize {
        self.entity_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entity_ids.is_empty()
    }

    pub fn entity_ids(&self) -> &[String] {
        &self.entity_ids
    }

    pub fn entity_id(&self, index: usize) -> &str {
        &self.entity_ids[index]
    }

    pub fn entity_index(&self, id: &str) -> Option<usize> {
        self.entity_ids.binary_search_by(|e| e.as_str().cmp(id)).ok()
    }

    pub fn forms(&self, index: usize) -> &[SurfaceForm] {
        &self.forms[index]
    }

    pub fn groups_of(&self, index: usize) -> &[String] {
        &self.groups[index]
    }

    /// All distinct group ids, sorted.
    pub fn group_ids(&self) -> Vec<String> {
        let set: BTreeSet<&String> = self.groups.iter().flatten().collect();
        set.into_iter().cloned().collect()
    }

    /// Entity indices belonging to `group`, in index order.
    pub fn group_members(&self, group: &str) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.groups[i].iter().any(|g| g == group)).collect()
    }
}

fn contains_subsequence(hay: &[String], needle: &[String]) -> bool {
    !needle.is_empty()
        && hay.len() >= needle.len()
        && hay.windows(needle.len()).any(|w| w == needle)
}

/// Entity indices whose surface forms occur as a contiguous token
/// subsequence. Case-sensitive forms are matched against the raw tokens,
/// all others against the folded tokens.
pub fn match_entities(
    lexicon: &EntityLexicon,
    folded: &[String],
    raw: &[String],
) -> BTreeSet<usize> {
    let mut found = BTreeSet::new();
    for idx in 0..lexicon.len() {
        for form in lexicon.forms(idx) {
            let hay = if form.case_sensitive { raw } else { folded };
            if contains_subsequence(hay, &form.tokens) {
                found.insert(idx);
                break;
            }
        }
    }
    found
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DocMeta {
    pub doc_id: String,
    pub date: NaiveDate,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// Global id; equals the sentence's index in the store.
    pub sentence_id: u64,
    pub doc_index: u32,
    /// Position within the document, 0-based and strictly increasing.
    pub position: u32,
    pub text: String,
    /// Folded tokens; non-empty for every stored sentence.
    pub tokens: Vec<String>,
    /// Sorted entity indices mentioned in this sentence.
    pub mentions: Vec<u32>,
}

impl Sentence {
    pub fn mentions_entity(&self, entity: u32) -> bool {
        self.mentions.binary_search(&entity).is_ok()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IngestStats {
    pub documents: usize,
    pub sentences: usize,
    pub mention_bearing: usize,
}

/// Ingested corpus: documents, their sentences in order, and the lexicon
/// they were matched against. Sentences of one document occupy consecutive
/// ids, so neighbor lookup is index adjacency.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusStore {
    pub lexicon: EntityLexicon,
    pub docs: Vec<DocMeta>,
    pub sentences: Vec<Sentence>,
}

impl CorpusStore {
    pub fn ingest_files(corpus_path: &Path, lexicon_path: &Path) -> Result<Self> {
        let lexicon = EntityLexicon::from_file(lexicon_path)?;
        let corpus_text = read_to_string(corpus_path)?;
        Self::ingest(&corpus_text, lexicon, &corpus_path.display().to_string())
    }

    pub fn ingest_strings(corpus_text: &str, lexicon_text: &str) -> Result<Self> {
        let lexicon = EntityLexicon::parse(lexicon_text, "lexicon")?;
        Self::ingest(corpus_text, lexicon, "corpus")
    }

    fn ingest(corpus_text: &str, lexicon: EntityLexicon, path_label: &str) -> Result<Self> {
        let mut store = CorpusStore { lexicon, docs: Vec::new(), sentences: Vec::new() };
        let mut seen_ids: HashMap<String, usize> = HashMap::new();
        for (idx, line) in corpus_text.lines().enumerate() {
            let lineno = idx + 1;
            if line.is_empty() {
                continue;
            }
            let mut fields = line.splitn(3, '\t');
            let (doc_id, date_str, text_escaped) =
                match (fields.next(), fields.next(), fields.next()) {
                    (Some(a), Some(b), Some(c)) => (a, b, c),
                    _ => {
                        return Err(Error::parse(
                            path_label,
                            lineno,
                            "expected doc_id<TAB>date<TAB>text",
                        ))
                    }
                };
            if doc_id.is_empty() {
                return Err(Error::parse(path_label, lineno, "empty doc_id"));
            }
            if let Some(prev) = seen_ids.insert(doc_id.to_string(), lineno) {
                return Err(Error::parse(
                    path_label,
                    lineno,
                    format!("duplicate doc_id {doc_id:?} (first seen on line {prev})"),
                ));
            }
            let date = NaiveDate::parse_from_str(date_str, DATE_FORMAT).map_err(|_| {
                Error::parse(path_label, lineno, format!("invalid date {date_str:?}"))
            })?;
            let text = unescape_text(text_escaped)
                .map_err(|msg| Error::parse(path_label, lineno, msg))?;
            let doc_index = store.docs.len() as u32;
            store.docs.push(DocMeta { doc_id: doc_id.to_string(), date });
            let mut position = 0u32;
            for sentence_text in split_sentences(&text) {
                let folded = tokenize(&sentence_text);
                if folded.is_empty() {
                    continue;
                }
                let raw = tokenize_raw(&sentence_text);
                let mentions: Vec<u32> =
                    match_entities(&store.lexicon, &folded, &raw).into_iter().map(|m| m as u32).collect();
                store.sentences.push(Sentence {
                    sentence_id: store.sentences.len() as u64,
                    doc_index,
                    position,
                    text: sentence_text,
                    tokens: folded,
                    mentions,
                });
                position += 1;
            }
        }
        Ok(store)
    }

    pub fn stats(&self) -> IngestStats {
        IngestStats {
            documents: self.docs.len(),
            sentences: self.sentences.len(),
            mention_bearing: self.sentences.iter().filter(|s| !s.mentions.is_empty()).count(),
        }
    }

    pub fn sentence(&self, id: u64) -> Option<&Sentence> {
        self.sentences.get(id as usize)
    }

    pub fn date_of(&self, sentence: &Sentence) -> NaiveDate {
        self.docs[sentence.doc_index as usize].date
    }

    pub fn doc_id_of(&self, sentence: &Sentence) -> &str {
        &self.docs[sentence.doc_index as usize].doc_id
    }

    /// The sentence `offset` positions away inside the same document.
    pub fn neighbor(&self, id: u64, offset: i64) -> Option<&Sentence> {
        let here = self.sentence(id)?;
        let target = id as i64 + offset;
        if target < 0 {
            return None;
        }
        let cand = self.sentence(target as u64)?;
        (cand.doc_index == here.doc_index).then_some(cand)
    }

    /// Ids of sentences with at least one mention, ascending.
    pub fn mention_bearing_ids(&self) -> Vec<u64> {
        self.sentences
            .iter()
            .filter(|s| !s.mentions.is_empty())
            .map(|s| s.sentence_id)
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BinWriter::new(BufWriter::new(file));
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.finish().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    fn write_to<W: Write>(&self, w: &mut BinWriter<W>) -> std::io::Result<()> {
        w.bytes(STORE_MAGIC)?;
        w.u32(STORE_VERSION)?;
        w.u32(self.lexicon.len() as u32)?;
        for i in 0..self.lexicon.len() {
            w.string(self.lexicon.entity_id(i))?;
            let groups = self.lexicon.groups_of(i);
            w.u32(groups.len() as u32)?;
            for g in groups {
                w.string(g)?;
            }
            let forms = self.lexicon.forms(i);
            w.u32(forms.len() as u32)?;
            for f in forms {
                w.u8(f.case_sensitive as u8)?;
                w.u32(f.tokens.len() as u32)?;
                for t in &f.tokens {
                    w.string(t)?;
                }
            }
        }
        w.u32(self.docs.len() as u32)?;
        for d in &self.docs {
            w.string(&d.doc_id)?;
            w.i32(chrono::Datelike::num_days_from_ce(&d.date))?;
        }
        w.u64(self.sentences.len() as u64)?;
        for s in &self.sentences {
            w.u32(s.doc_index)?;
            w.u32(s.position)?;
            w.string(&s.text)?;
            w.u32(s.tokens.len() as u32)?;
            for t in &s.tokens {
                w.string(t)?;
            }
            w.u32(s.mentions.len() as u32)?;
            for &m in &s.mentions {
                w.u32(m)?;
            }
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BinReader::new(BufReader::new(file), path);
        r.expect_magic(STORE_MAGIC, "corpus store")?;
        r.expect_version(STORE_VERSION)?;
        let n_entities = r.u32()? as usize;
        let mut lexicon = EntityLexicon::default();
        for _ in 0..n_entities {
            lexicon.entity_ids.push(r.string()?);
            let n_groups = r.u32()? as usize;
            let mut groups = Vec::with_capacity(n_groups);
            for _ in 0..n_groups {
                groups.push(r.string()?);
            }
            lexicon.groups.push(groups);
            let n_forms = r.u32()? as usize;
            let mut forms = Vec::with_capacity(n_forms);
            for _ in 0..n_forms {
                let cs = r.u8()? != 0;
                let n_tokens = r.u32()? as usize;
                let mut tokens = Vec::with_capacity(n_tokens);
                for _ in 0..n_tokens {
                    tokens.push(r.string()?);
                }
                forms.push(SurfaceForm { tokens, case_sensitive: cs });
            }
            lexicon.forms.push(forms);
        }
        let n_docs = r.u32()? as usize;
        let mut docs = Vec::with_capacity(n_docs);
        for _ in 0..n_docs {
            let doc_id = r.string()?;
            let days = r.i32()?;
            let date = NaiveDate::from_num_days_from_ce_opt(days)
                .ok_or_else(|| Error::format(path, "date out of range"))?;
            docs.push(DocMeta { doc_id, date });
        }
        let n_sentences = r.u64()? as usize;
        let mut sentences = Vec::with_capacity(n_sentences);
        for id in 0..n_sentences {
            let doc_index = r.u32()?;
            let position = r.u32()?;
            let text = r.string()?;
            let n_tokens = r.u32()? as usize;
            let mut tokens = Vec::with_capacity(n_tokens);
            for _ in 0..n_tokens {
                tokens.push(r.string()?);
            }
            let n_mentions = r.u32()? as usize;
            let mut mentions = Vec::with_capacity(n_mentions);
            for _ in 0..n_mentions {
                mentions.push(r.u32()?);
            }
            sentences.push(Sentence {
                sentence_id: id as u64,
                doc_index,
                position,
                text,
                tokens,
                mentions,
            });
        }
        r.expect_eof()?;
        Ok(CorpusStore { lexicon, docs, sentences })
    }
}

/// Escapes text for a single corpus-file field.
pub fn escape_text(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out
}

fn unescape_text(escaped: &str) -> std::result::Result<String, String> {
    let mut out = String::with_capacity(escaped.len());
    let mut chars = escaped.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some(other) => return Err(format!("invalid escape \\{other}")),
            None => return Err("dangling backslash".to_string()),
        }
    }
    Ok(out)
}

fn read_to_string(path: &Path) -> Result<String> {
    let mut s = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut s))
        .map_err(|e| Error::io(path, e))?;
    Ok(s)
}
