//! Streaming ingest of Wikidata JSON dumps and canonical JSONL fixtures.
//!
//! Both framings are line oriented: the official dump is a JSON array with
//! one entity per line (each line but the last ending in `,`), JSONL has one
//! object per line. A line may hold either a full Wikidata entity (`"id"`,
//! `"labels"`, `"claims"`) or a canonical record (`"qid"`, `"labels"`,
//! `"instance_of"`, `"subclass_of"`). Bad lines are counted and skipped.

use std::collections::BTreeMap;
use std::io::{self, BufRead};

use rayon::prelude::*;
use serde::Deserialize;
use serde_json::Value;
use thiserror::Error;

use crate::record::{EntityRecord, LanguageCode, Qid};

/// Default number of lines parsed together when parsing in parallel.
pub const DEFAULT_BATCH_LINES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputMode {
    /// Sniff the first non-whitespace byte: `[` means dump-array framing.
    #[default]
    Auto,
    DumpArray,
    Jsonl,
}

impl std::str::FromStr for InputMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(InputMode::Auto),
            "dump-array" => Ok(InputMode::DumpArray),
            "jsonl" => Ok(InputMode::Jsonl),
            other => Err(format!("unknown input mode {other:?} (auto|dump-array|jsonl)")),
        }
    }
}

impl InputMode {
    /// Resolve `Auto` by peeking at the buffered input without consuming it.
    pub fn resolve<R: BufRead>(self, reader: &mut R) -> io::Result<InputMode> {
        if self != InputMode::Auto {
            return Ok(self);
        }
        loop {
            let buf = reader.fill_buf()?;
            if buf.is_empty() {
                return Ok(InputMode::Jsonl);
            }
            match buf.iter().position(|b| !b.is_ascii_whitespace()) {
                Some(i) => {
                    let mode = if buf[i] == b'[' {
                        InputMode::DumpArray
                    } else {
                        InputMode::Jsonl
                    };
                    return Ok(mode);
                }
                None => {
                    let n = buf.len();
                    reader.consume(n);
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read input at line {line}")]
    Read {
        line: u64,
        #[source]
        source: io::Error,
    },
}

/// Why a single line was skipped.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LineError {
    #[error("line is not valid UTF-8")]
    Utf8,
    #[error("line is not valid JSON: {0}")]
    Json(String),
    #[error("entity has no \"id\"")]
    MissingId,
    #[error("entity {0} is not an item")]
    NotAnItem(String),
    #[error("malformed item identifier {0:?}")]
    BadId(String),
}

/// Per-run counters. `records + skipped() + structural == lines`.
#[derive(Debug, Clone, Default, PartialEq, Eq, serde::Serialize)]
pub struct IngestStats {
    pub lines: u64,
    pub structural: u64,
    pub records: u64,
    pub malformed: u64,
    pub missing_id: u64,
    pub non_item: u64,
    pub bad_id: u64,
    pub labels_dropped: u64,
    /// Labels passed through that contain zero-width or bidi control characters.
    pub labels_flagged: u64,
}

impl IngestStats {
    pub fn skipped(&self) -> u64 {
        self.malformed + self.missing_id + self.non_item + self.bad_id
    }

    fn record(&mut self, outcome: &LineOutcome) {
        match outcome {
            LineOutcome::Structural => self.structural += 1,
            LineOutcome::Entity(parsed) => {
                self.records += 1;
                self.labels_dropped += parsed.labels_dropped;
                self.labels_flagged += parsed.labels_flagged;
            }
            LineOutcome::Skipped(err) => match err {
                LineError::Utf8 | LineError::Json(_) => self.malformed += 1,
                LineError::MissingId => self.missing_id += 1,
                LineError::NotAnItem(_) => self.non_item += 1,
                LineError::BadId(_) => self.bad_id += 1,
            },
        }
    }
}

/// A parsed entity line plus its label-level diagnostics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedEntity {
    pub record: EntityRecord,
    pub labels_dropped: u64,
    pub labels_flagged: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LineOutcome {
    Structural,
    Entity(ParsedEntity),
    Skipped(LineError),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLabel {
    Full { value: String },
    Plain(String),
}

#[derive(Deserialize)]
struct RawSnak {
    snaktype: String,
    #[serde(default)]
    datavalue: Option<RawDataValue>,
}

#[derive(Deserialize)]
struct RawDataValue {
    value: Value,
}

#[derive(Deserialize)]
struct RawStatement {
    mainsnak: RawSnak,
    #[serde(default)]
    rank: Option<String>,
}

#[derive(Deserialize, Default)]
struct RawClaims {
    #[serde(rename = "P31", default)]
    instance_of: Vec<RawStatement>,
    #[serde(rename = "P279", default)]
    subclass_of: Vec<RawStatement>,
}

#[derive(Deserialize)]
struct RawEntity {
    #[serde(default)]
    id: Option<String>,
    #[serde(default)]
    qid: Option<String>,
    #[serde(default)]
    labels: BTreeMap<String, RawLabel>,
    #[serde(default)]
    claims: Option<RawClaims>,
    #[serde(default)]
    instance_of: Vec<String>,
    #[serde(default)]
    subclass_of: Vec<String>,
}

fn is_flagged_control(c: char) -> bool {
    matches!(c,
        '\u{200B}'..='\u{200F}'
        | '\u{202A}'..='\u{202E}'
        | '\u{2060}'..='\u{2064}'
        | '\u{2066}'..='\u{2069}'
        | '\u{FEFF}')
}

/// Target item of a statement, if it is a truthy item-valued claim.
fn statement_target(statement: &RawStatement) -> Option<Qid> {
    if statement.rank.as_deref() == Some("deprecated") || statement.mainsnak.snaktype != "value" {
        return None;
    }
    let value = &statement.mainsnak.datavalue.as_ref()?.value;
    if let Some(id) = value.get("id").and_then(Value::as_str) {
        return id.parse().ok();
    }
    if value.get("entity-type").and_then(Value::as_str) == Some("item") {
        return value
            .get("numeric-id")
            .and_then(Value::as_u64)
            .and_then(Qid::new);
    }
    None
}

fn entity_from_raw(raw: RawEntity) -> Result<ParsedEntity, LineError> {
    let id = raw.id.or(raw.qid).ok_or(LineError::MissingId)?;
    if !id.starts_with('Q') {
        return Err(LineError::NotAnItem(id));
    }
    let qid: Qid = id.parse().map_err(|_| LineError::BadId(id.clone()))?;

    let mut record = EntityRecord::new(qid);
    let mut labels_dropped = 0;
    let mut labels_flagged = 0;
    for (code, label) in raw.labels {
        let text = match label {
            RawLabel::Full { value } => value,
            RawLabel::Plain(value) => value,
        };
        let trimmed = text.trim();
        let Ok(code) = code.parse::<LanguageCode>() else {
            labels_dropped += 1;
            continue;
        };
        if trimmed.is_empty() {
            labels_dropped += 1;
            continue;
        }
        if trimmed.chars().any(is_flagged_control) {
            labels_flagged += 1;
        }
        record.labels.insert(code, trimmed.to_string());
    }

    let claims = raw.claims.unwrap_or_default();
    record
        .instance_of
        .extend(claims.instance_of.iter().filter_map(statement_target));
    record
        .subclass_of
        .extend(claims.subclass_of.iter().filter_map(statement_target));
    record
        .instance_of
        .extend(raw.instance_of.iter().filter_map(|s| s.parse::<Qid>().ok()));
    record
        .subclass_of
        .extend(raw.subclass_of.iter().filter_map(|s| s.parse::<Qid>().ok()));

    Ok(ParsedEntity {
        record,
        labels_dropped,
        labels_flagged,
    })
}

/// Parse one already-unframed entity object.
pub fn parse_entity_json(text: &str) -> Result<ParsedEntity, LineError> {
    let raw: RawEntity = serde_json::from_str(text).map_err(|e| LineError::Json(e.to_string()))?;
    entity_from_raw(raw)
}

/// Parse an entity from an already-decoded JSON value (used by the HTTP fetcher).
pub fn parse_entity_value(value: Value) -> Result<ParsedEntity, LineError> {
    let raw: RawEntity =
        serde_json::from_value(value).map_err(|e| LineError::Json(e.to_string()))?;
    entity_from_raw(raw)
}

fn parse_line(line: &[u8], mode: InputMode) -> LineOutcome {
    let Ok(text) = std::str::from_utf8(line) else {
        return LineOutcome::Skipped(LineError::Utf8);
    };
    let mut text = text.trim();
    if text.is_empty() {
        return LineOutcome::Structural;
    }
    if mode == InputMode::DumpArray {
        if text == "[" || text == "]" {
            return LineOutcome::Structural;
        }
        text = text.strip_suffix(',').unwrap_or(text);
    }
    match parse_entity_json(text) {
        Ok(parsed) => LineOutcome::Entity(parsed),
        Err(err) => LineOutcome::Skipped(err),
    }
}

/// Sequential reader yielding records in input order.
///
/// Memory use is one line buffer; skipped lines only bump counters in
/// [`DumpReader::stats`].
pub struct DumpReader<R> {
    reader: R,
    mode: InputMode,
    buf: Vec<u8>,
    stats: IngestStats,
    failed: bool,
}

impl<R: BufRead> DumpReader<R> {
    pub fn new(mut reader: R, mode: InputMode) -> Result<Self, IngestError> {
        let mode = mode
            .resolve(&mut reader)
            .map_err(|source| IngestError::Read { line: 1, source })?;
        Ok(DumpReader {
            reader,
            mode,
            buf: Vec::new(),
            stats: IngestStats::default(),
            failed: false,
        })
    }

    pub fn mode(&self) -> InputMode {
        self.mode
    }

    pub fn stats(&self) -> &IngestStats {
        &self.stats
    }

    pub fn into_stats(self) -> IngestStats {
        self.stats
    }

    /// Read the next raw line into the internal buffer. `Ok(false)` at EOF.
    fn fill_line(&mut self) -> Result<bool, IngestError> {
        self.buf.clear();
        match self.reader.read_until(b'\n', &mut self.buf) {
            Ok(0) => Ok(false),
            Ok(_) => {
                self.stats.lines += 1;
                Ok(true)
            }
            Err(source) => Err(IngestError::Read {
                line: self.stats.lines + 1,
                source,
            }),
        }
    }
}

impl<R: BufRead> Iterator for DumpReader<R> {
    type Item = Result<EntityRecord, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            match self.fill_line() {
                Ok(false) => return None,
                Ok(true) => {}
                Err(e) => {
                    self.failed = true;
                    return Some(Err(e));
                }
            }
            let outcome = parse_line(&self.buf, self.mode);
            self.stats.record(&outcome);
            match outcome {
                LineOutcome::Entity(parsed) => return Some(Ok(parsed.record)),
                LineOutcome::Skipped(err) => {
                    log::debug!("skipping line {}: {err}", self.stats.lines);
                }
                LineOutcome::Structural => {}
            }
        }
    }
}

/// Parse a dump with line batches parsed in parallel on the current rayon
/// pool, handing records to `sink` strictly in input order.
pub fn ingest_parallel<R, F, E>(
    reader: R,
    mode: InputMode,
    batch_lines: usize,
    mut sink: F,
) -> Result<IngestStats, E>
where
    R: BufRead,
    F: FnMut(EntityRecord) -> Result<(), E>,
    E: From<IngestError>,
{
    let mut dump = DumpReader::new(reader, mode)?;
    let batch_lines = batch_lines.max(1);
    let mut batch: Vec<Vec<u8>> = Vec::with_capacity(batch_lines);
    loop {
        batch.clear();
        while batch.len() < batch_lines {
            if !dump.fill_line()? {
                break;
            }
            batch.push(std::mem::take(&mut dump.buf));
        }
        if batch.is_empty() {
            break;
        }
        let mode = dump.mode;
        let outcomes: Vec<LineOutcome> = batch.par_iter().map(|l| parse_line(l, mode)).collect();
        for outcome in outcomes {
            dump.stats.record(&outcome);
            if let LineOutcome::Entity(parsed) = outcome {
                sink(parsed.record)?;
            }
        }
    }
    Ok(dump.into_stats())
}

/// Convenience wrapper collecting every record of a dump.
pub fn parse_dump<R: BufRead>(
    reader: R,
    mode: InputMode,
) -> Result<(Vec<EntityRecord>, IngestStats), IngestError> {
    let mut dump = DumpReader::new(reader, mode)?;
    let mut records = Vec::new();
    for rec in dump.by_ref() {
        records.push(rec?);
    }
    Ok((records, dump.into_stats()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::record::q;

    fn statement(target: &str, rank: &str) -> String {
        format!(
            r#"{{"mainsnak":{{"snaktype":"value","property":"P31","datavalue":{{"value":{{"entity-type":"item","numeric-id":{},"id":"{}"}},"type":"wikibase-entityid"}}}},"type":"statement","rank":"{}"}}"#,
            &target[1..],
            target,
            rank
        )
    }

    fn turing_line() -> String {
        format!(
            r#"{{"type":"item","id":"Q7251","labels":{{"en":{{"language":"en","value":"Alan Turing"}}}},"aliases":{{"en":[{{"language":"en","value":"Alan Mathison Turing"}}]}},"claims":{{"P31":[{}]}}}}"#,
            statement("Q5", "normal")
        )
    }

    #[test]
    fn parses_the_turing_entity() {
        let parsed = parse_entity_json(&turing_line()).unwrap();
        let expected = EntityRecord::new(q(7251))
            .with_label("en", "Alan Turing")
            .with_instance_of([q(5)]);
        assert_eq!(parsed.record, expected);
    }

    #[test]
    fn empty_input_yields_nothing() {
        let (records, stats) = parse_dump(&b""[..], InputMode::Auto).unwrap();
        assert!(records.is_empty());
        assert_eq!(stats.skipped(), 0);
    }

    #[test]
    fn dump_array_framing_is_unwrapped() {
        let input = format!("[\n{},\n{}\n]\n", turing_line(), r#"{"id":"Q2","labels":{}}"#);
        let (records, stats) = parse_dump(input.as_bytes(), InputMode::Auto).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(stats.structural, 2);
        assert_eq!(stats.skipped(), 0);
    }

    #[test]
    fn jsonl_mode_does_not_strip_commas() {
        let input = format!("{},\n", turing_line());
        let (records, stats) = parse_dump(input.as_bytes(), InputMode::Jsonl).unwrap();
        assert!(records.is_empty());
        assert_eq!(stats.malformed, 1);
    }

    #[test]
    fn deprecated_and_novalue_claims_are_ignored() {
        let novalue = r#"{"mainsnak":{"snaktype":"novalue","property":"P31"},"rank":"normal"}"#;
        let line = format!(
            r#"{{"id":"Q9","labels":{{}},"claims":{{"P31":[{},{},{}],"P279":[{}]}}}}"#,
            statement("Q5", "deprecated"),
            statement("Q43229", "preferred"),
            novalue,
            statement("Q82794", "normal"),
        );
        let rec = parse_entity_json(&line).unwrap().record;
        assert_eq!(rec.instance_of.into_iter().collect::<Vec<_>>(), vec![q(43229)]);
        assert_eq!(rec.subclass_of.into_iter().collect::<Vec<_>>(), vec![q(82794)]);
    }

    #[test]
    fn numeric_id_without_string_id_is_accepted() {
        let line = r#"{"id":"Q3","claims":{"P31":[{"mainsnak":{"snaktype":"value","datavalue":{"value":{"entity-type":"item","numeric-id":5}}},"rank":"normal"}]}}"#;
        let rec = parse_entity_json(line).unwrap().record;
        assert!(rec.instance_of.contains(&q(5)));
    }

    #[test]
    fn labels_are_trimmed_and_bad_ones_dropped() {
        let line = "{\"id\":\"Q1\",\"labels\":{\"en\":{\"value\":\"  Joe  Biden \"},\"ru\":{\"value\":\"   \"},\"EN-GB\":{\"value\":\"x\"},\"fa\":{\"value\":\"a\u{200C}b\"}}}";
        let parsed = parse_entity_json(line).unwrap();
        assert_eq!(parsed.record.labels.len(), 2);
        assert_eq!(parsed.record.english_label(), Some("Joe  Biden"));
        assert_eq!(parsed.labels_dropped, 2);
        assert_eq!(parsed.labels_flagged, 1);
    }

    #[test]
    fn skip_reasons_are_classified() {
        let input = "{\"labels\":{}}\n{\"id\":\"P31\"}\n{\"id\":\"Q0\"}\nnot json\n";
        let mut bytes = input.as_bytes().to_vec();
        bytes.extend_from_slice(&[0xff, 0xfe, b'\n']);
        let (records, stats) = parse_dump(&bytes[..], InputMode::Jsonl).unwrap();
        assert!(records.is_empty());
        assert_eq!(stats.missing_id, 1);
        assert_eq!(stats.non_item, 1);
        assert_eq!(stats.bad_id, 1);
        assert_eq!(stats.malformed, 2);
    }

    #[test]
    fn canonical_lines_are_accepted() {
        let rec = EntityRecord::new(q(42))
            .with_label("ru", "Дуглас Адамс")
            .with_instance_of([q(5)])
            .with_subclass_of([q(1)]);
        let line = rec.to_canonical_json();
        assert_eq!(parse_entity_json(&line).unwrap().record, rec);
    }

    #[test]
    fn parallel_matches_sequential_order() {
        let mut input = String::new();
        for i in 1..=500u64 {
            if i % 37 == 0 {
                input.push_str("{broken\n");
            }
            input.push_str(&format!("{{\"id\":\"Q{i}\",\"labels\":{{\"en\":{{\"value\":\"n{i}\"}}}}}}\n"));
        }
        let (seq, seq_stats) = parse_dump(input.as_bytes(), InputMode::Jsonl).unwrap();
        let mut par = Vec::new();
        let par_stats = ingest_parallel::<_, _, IngestError>(input.as_bytes(), InputMode::Jsonl, 7, |r| {
            par.push(r);
            Ok(())
        })
        .unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq_stats, par_stats);
        assert_eq!(par_stats.malformed, 13);
    }
}
