//! Ingestion of training and evaluation records in a normalized JSONL
//! schema, sentence-respecting context windows, and coordinate-unification
//! patches for evaluation sets.
//!
//! Record schema (one JSON object per line): `context` (token array) or
//! `text` (string, run through [`crate::features::tokenize`]),
//! `toponym_spans` as `[[start,end], ...]` half-open token ranges,
//! `target_span` as `[start,end]`, `lat`, `lng`, and optional `entity_key`,
//! `dataset_id`, `doc_id`, `mention`.

use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::cellgrid::LatLng;
use crate::error::{Error, Result};
use crate::features::tokenize;

/// Half-open token index range `[start, end)`.
pub type Span = (usize, usize);

/// Default context-window budget in tokens.
pub const DEFAULT_MAX_CONTEXT: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingExample {
    pub context_tokens: Vec<String>,
    /// Sorted, deduplicated; always contains `target_span`.
    pub toponym_spans: Vec<Span>,
    pub target_span: Span,
    pub gold: LatLng,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalRecord {
    pub dataset_id: Option<String>,
    pub doc_id: Option<String>,
    pub mention: Option<String>,
    pub entity_key: Option<String>,
    pub context_tokens: Vec<String>,
    pub toponym_spans: Vec<Span>,
    pub target_span: Span,
    pub gold: LatLng,
}

impl EvalRecord {
    /// Mention string used for gazetteer lookups: the explicit field when
    /// present, otherwise the target-span tokens joined by spaces.
    pub fn mention_text(&self) -> String {
        match &self.mention {
            Some(m) => m.clone(),
            None => self.context_tokens[self.target_span.0..self.target_span.1].join(" "),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatePatch {
    pub entity_key: String,
    pub new: LatLng,
    pub expected_old: Option<LatLng>,
}

#[derive(Debug, Default, Clone)]
pub struct PatchReport {
    pub applied: usize,
    pub mismatched: usize,
    pub warnings: Vec<String>,
}

// ---- JSONL wire form ----

#[derive(Debug, Serialize, Deserialize)]
struct RawRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    context: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
    toponym_spans: Vec<[usize; 2]>,
    target_span: [usize; 2],
    lat: f64,
    lng: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    entity_key: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dataset_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    doc_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mention: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RawPatch {
    entity_key: String,
    lat: f64,
    lng: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    old_lat: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    old_lng: Option<f64>,
}

fn validation(line: usize, msg: impl Into<String>) -> Error {
    Error::Validation {
        line,
        msg: msg.into(),
    }
}

/// Sorts spans, drops duplicates, and guarantees the target is a member.
fn normalize_spans(mut spans: Vec<Span>, target: Span) -> Vec<Span> {
    if !spans.contains(&target) {
        spans.push(target);
    }
    spans.sort_unstable();
    spans.dedup();
    spans
}

fn check_span(span: Span, len: usize, what: &str, line: usize) -> Result<()> {
    let (start, end) = span;
    if start >= end || end > len {
        return Err(validation(
            line,
            format!("{what} [{start}, {end}) out of bounds for {len} tokens"),
        ));
    }
    Ok(())
}

fn parse_record(line_text: &str, line: usize) -> Result<RawRecord> {
    serde_json::from_str(line_text).map_err(|e| Error::Parse {
        line,
        msg: e.to_string(),
    })
}

fn record_tokens(raw: &mut RawRecord, line: usize) -> Result<Vec<String>> {
    match (raw.context.take(), raw.text.take()) {
        (Some(tokens), None) => Ok(tokens),
        (None, Some(text)) => Ok(tokenize(&text)),
        (Some(_), Some(_)) => Err(validation(line, "record has both `context` and `text`")),
        (None, None) => Err(validation(line, "record has neither `context` nor `text`")),
    }
}

fn finish_record(mut raw: RawRecord, line: usize) -> Result<EvalRecord> {
    let tokens = record_tokens(&mut raw, line)?;
    let target = (raw.target_span[0], raw.target_span[1]);
    check_span(target, tokens.len(), "target_span", line)?;
    let mut spans = Vec::with_capacity(raw.toponym_spans.len());
    for s in &raw.toponym_spans {
        let span = (s[0], s[1]);
        check_span(span, tokens.len(), "toponym span", line)?;
        spans.push(span);
    }
    let gold = LatLng::new(raw.lat, raw.lng)
        .map_err(|e| validation(line, format!("bad coordinates: {e}")))?;
    Ok(EvalRecord {
        dataset_id: raw.dataset_id,
        doc_id: raw.doc_id,
        mention: raw.mention,
        entity_key: raw.entity_key,
        toponym_spans: normalize_spans(spans, target),
        target_span: target,
        context_tokens: tokens,
        gold,
    })
}

/// Streaming reader over training examples; yields one validated example
/// (or an error naming the line) per input line.
pub struct TrainingReader {
    lines: std::io::Lines<BufReader<File>>,
    line_no: usize,
    max_context: usize,
}

impl Iterator for TrainingReader {
    type Item = Result<TrainingExample>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let line = match self.lines.next()? {
                Ok(l) => l,
                Err(e) => return Some(Err(e.into())),
            };
            self.line_no += 1;
            if line.trim().is_empty() {
                continue;
            }
            return Some(self.read_one(&line));
        }
    }
}

impl TrainingReader {
    fn read_one(&self, line_text: &str) -> Result<TrainingExample> {
        let record = finish_record(parse_record(line_text, self.line_no)?, self.line_no)?;
        if record.context_tokens.len() > self.max_context {
            return Err(validation(
                self.line_no,
                format!(
                    "context of {} tokens exceeds maximum {}",
                    record.context_tokens.len(),
                    self.max_context
                ),
            ));
        }
        Ok(TrainingExample {
            context_tokens: record.context_tokens,
            toponym_spans: record.toponym_spans,
            target_span: record.target_span,
            gold: record.gold,
        })
    }
}

/// Opens a training JSONL file for streaming reads.
pub fn load_training(path: &Path, max_context: usize) -> Result<TrainingReader> {
    let file = File::open(path)?;
    Ok(TrainingReader {
        lines: BufReader::new(file).lines(),
        line_no: 0,
        max_context,
    })
}

/// Loads and validates a full evaluation set.
pub fn load_eval(path: &Path) -> Result<Vec<EvalRecord>> {
    let file = File::open(path)?;
    let mut records = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        records.push(finish_record(parse_record(&line_text, line_no)?, line_no)?);
    }
    Ok(records)
}

/// Loads a patch file (`entity_key`, `lat`, `lng`, optional `old_lat`,
/// `old_lng`).
pub fn load_patches(path: &Path) -> Result<Vec<CoordinatePatch>> {
    let file = File::open(path)?;
    let mut patches = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_text = line?;
        if line_text.trim().is_empty() {
            continue;
        }
        let line_no = idx + 1;
        let raw: RawPatch = serde_json::from_str(&line_text).map_err(|e| Error::Parse {
            line: line_no,
            msg: e.to_string(),
        })?;
        if raw.entity_key.is_empty() {
            return Err(validation(line_no, "empty entity_key"));
        }
        let new = LatLng::new(raw.lat, raw.lng)
            .map_err(|e| validation(line_no, format!("bad coordinates: {e}")))?;
        let expected_old = match (raw.old_lat, raw.old_lng) {
            (Some(lat), Some(lng)) => Some(
                LatLng::new(lat, lng)
                    .map_err(|e| validation(line_no, format!("bad old coordinates: {e}")))?,
            ),
            (None, None) => None,
            _ => {
                return Err(validation(
                    line_no,
                    "old_lat and old_lng must be given together",
                ))
            }
        };
        patches.push(CoordinatePatch {
            entity_key: raw.entity_key,
            new,
            expected_old,
        });
    }
    Ok(patches)
}

fn to_raw(record: &EvalRecord) -> RawRecord {
    RawRecord {
        context: Some(record.context_tokens.clone()),
        text: None,
        toponym_spans: record.toponym_spans.iter().map(|&(s, e)| [s, e]).collect(),
        target_span: [record.target_span.0, record.target_span.1],
        lat: record.gold.lat(),
        lng: record.gold.lng(),
        entity_key: record.entity_key.clone(),
        dataset_id: record.dataset_id.clone(),
        doc_id: record.doc_id.clone(),
        mention: record.mention.clone(),
    }
}

/// Writes evaluation records back out as JSONL with materialized `context`
/// token arrays.
pub fn write_eval_records(records: &[EvalRecord], w: &mut impl Write) -> Result<()> {
    for record in records {
        serde_json::to_writer(&mut *w, &to_raw(record))?;
        writeln!(w)?;
    }
    Ok(())
}

/// Replaces gold coordinates of records whose `entity_key` matches a patch.
/// A present-but-mismatched `expected_old` (beyond 1e-6 degrees) is flagged
/// as a warning; the new coordinate is applied regardless.
pub fn apply_patches(records: &mut [EvalRecord], patches: &[CoordinatePatch]) -> PatchReport {
    let mut report = PatchReport::default();
    // later patches for the same key win
    let mut by_key: std::collections::HashMap<&str, &CoordinatePatch> = Default::default();
    for p in patches {
        by_key.insert(p.entity_key.as_str(), p);
    }
    for (idx, record) in records.iter_mut().enumerate() {
        let Some(key) = record.entity_key.as_deref() else {
            continue;
        };
        let Some(patch) = by_key.get(key) else {
            continue;
        };
        if let Some(old) = patch.expected_old {
            let off_by = (record.gold.lat() - old.lat())
                .abs()
                .max((record.gold.lng() - old.lng()).abs());
            if off_by > 1e-6 {
                report.mismatched += 1;
                report.warnings.push(format!(
                    "record {} ({key}): expected old ({}, {}) but found ({}, {})",
                    idx + 1,
                    old.lat(),
                    old.lng(),
                    record.gold.lat(),
                    record.gold.lng()
                ));
            }
        }
        record.gold = patch.new;
        report.applied += 1;
    }
    report
}

/// A context window built from a document, with spans re-indexed and a flag
/// for the oversized-sentence fallback.
#[derive(Debug, Clone)]
pub struct ContextWindow {
    pub example: TrainingExample,
    /// True when the target sentence alone exceeded the budget and had to
    /// be truncated around the target.
    pub truncated: bool,
}

/// Builds a window of at most `max_tokens` whole sentences containing the
/// target span. Growth alternates between the preceding and following
/// sentence, preceding first; a side that no longer fits is skipped and the
/// other side keeps growing until neither fits. When even the target
/// sentence exceeds the budget, the sentence is truncated around the target.
///
/// `sentence_ends` are strictly increasing end-exclusive token offsets; the
/// last entry must equal `doc_tokens.len()`.
pub fn make_context_windows(
    doc_tokens: &[String],
    sentence_ends: &[usize],
    toponym_spans: &[Span],
    target_span: Span,
    max_tokens: usize,
    gold: LatLng,
) -> Result<ContextWindow> {
    let n = doc_tokens.len();
    if sentence_ends.is_empty() || *sentence_ends.last().unwrap() != n {
        return Err(Error::InvalidArgument(
            "sentence_ends must cover the document".into(),
        ));
    }
    if sentence_ends.windows(2).any(|w| w[0] >= w[1]) || sentence_ends[0] == 0 {
        return Err(Error::InvalidArgument(
            "sentence_ends must be strictly increasing and non-empty".into(),
        ));
    }
    let (t_start, t_end) = target_span;
    if t_start >= t_end || t_end > n {
        return Err(Error::InvalidArgument(format!(
            "target_span [{t_start}, {t_end}) out of bounds for {n} tokens"
        )));
    }
    if t_end - t_start > max_tokens {
        return Err(Error::InvalidArgument(format!(
            "target span of {} tokens exceeds budget {max_tokens}",
            t_end - t_start
        )));
    }

    let sentence_start = |idx: usize| if idx == 0 { 0 } else { sentence_ends[idx - 1] };
    // seed: every sentence the target overlaps
    let mut lo = sentence_ends.partition_point(|&end| end <= t_start);
    let mut hi = lo;
    while sentence_ends[hi] < t_end {
        hi += 1;
    }

    let seed_start = sentence_start(lo);
    let seed_end = sentence_ends[hi];
    if seed_end - seed_start > max_tokens {
        // truncate around the target within the seed
        let t_len = t_end - t_start;
        let desired = t_start.saturating_sub((max_tokens - t_len) / 2);
        let start = desired.clamp(seed_start, seed_end - max_tokens);
        return Ok(ContextWindow {
            example: reindex(doc_tokens, toponym_spans, target_span, start, start + max_tokens, gold),
            truncated: true,
        });
    }

    let mut total = seed_end - seed_start;
    let mut prefer_prev = true;
    loop {
        let prev_len = if lo > 0 {
            Some(sentence_ends[lo - 1] - sentence_start(lo - 1))
        } else {
            None
        };
        let next_len = if hi + 1 < sentence_ends.len() {
            Some(sentence_ends[hi + 1] - sentence_ends[hi])
        } else {
            None
        };
        let prev_fits = prev_len.is_some_and(|l| total + l <= max_tokens);
        let next_fits = next_len.is_some_and(|l| total + l <= max_tokens);
        if !prev_fits && !next_fits {
            break;
        }
        let take_prev = if prev_fits && next_fits {
            prefer_prev
        } else {
            prev_fits
        };
        if take_prev {
            lo -= 1;
            total += prev_len.unwrap();
        } else {
            hi += 1;
            total += next_len.unwrap();
        }
        prefer_prev = !take_prev;
    }

    Ok(ContextWindow {
        example: reindex(
            doc_tokens,
            toponym_spans,
            target_span,
            sentence_start(lo),
            sentence_ends[hi],
            gold,
        ),
        truncated: false,
    })
}

fn reindex(
    doc_tokens: &[String],
    toponym_spans: &[Span],
    target_span: Span,
    window_start: usize,
    window_end: usize,
    gold: LatLng,
) -> TrainingExample {
    let context_tokens = doc_tokens[window_start..window_end].to_vec();
    let shift = |(s, e): Span| (s - window_start, e - window_start);
    let spans: Vec<Span> = toponym_spans
        .iter()
        .filter(|&&(s, e)| s >= window_start && e <= window_end)
        .map(|&sp| shift(sp))
        .collect();
    let target = shift(target_span);
    TrainingExample {
        context_tokens,
        toponym_spans: normalize_spans(spans, target),
        target_span: target,
        gold,
    }
}
