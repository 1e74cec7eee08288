//! Record ingestion.
//!
//! Two sources are supported: delimited text with a header row, and a
//! line-oriented subset of N-Triples. Both produce a stream of
//! [`ScenarioRecord`]s, which can then be narrowed with
//! [`filter_scenarios`].

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{BufRead, Read, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One scenario (e.g. a book) with the events observed in it.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScenarioRecord {
    pub scenario_id: String,
    pub events: BTreeSet<String>,
    pub attributes: BTreeMap<String, String>,
}

impl ScenarioRecord {
    pub fn new<I, S>(scenario_id: impl Into<String>, events: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let events = events
            .into_iter()
            .map(Into::into)
            .filter(|e: &String| !e.is_empty())
            .collect();
        Self {
            scenario_id: scenario_id.into(),
            events,
            attributes: BTreeMap::new(),
        }
    }

    pub fn with_attribute(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.attributes.insert(key.into(), value.into());
        self
    }
}

/// What a mapped N-Triples predicate contributes to a scenario.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredicateRole {
    /// The object is an event label.
    EventSource,
    /// The object is stored under the named attribute.
    Attribute(String),
    /// The object replaces the subject IRI as scenario id.
    ScenarioKey,
}

/// How triples are grouped into scenarios.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TriplesGrouping {
    /// Triples of one subject are adjacent; only the current subject is held
    /// in memory. A subject that reappears later is an error.
    #[default]
    Contiguous,
    /// Subjects may be interleaved; all groups are buffered before emission.
    Buffered,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    pub field_delimiter: char,
    pub multi_value_separator: char,
    pub event_columns: Vec<String>,
    pub attribute_columns: Vec<String>,
    pub predicate_map: BTreeMap<String, PredicateRole>,
    /// Use the IRI fragment after the last `/` or `#` as label.
    pub iri_suffix_labels: bool,
    pub triples_grouping: TriplesGrouping,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            field_delimiter: ';',
            multi_value_separator: '|',
            event_columns: Vec::new(),
            attribute_columns: Vec::new(),
            predicate_map: BTreeMap::new(),
            iri_suffix_labels: false,
            triples_grouping: TriplesGrouping::Contiguous,
        }
    }
}

impl IngestConfig {
    pub fn delimited<I, S>(event_columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            event_columns: event_columns.into_iter().map(Into::into).collect(),
            ..Self::default()
        }
    }

    pub fn with_attributes<I, S>(mut self, columns: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.attribute_columns = columns.into_iter().map(Into::into).collect();
        self
    }

    fn check_separators(&self) -> Result<()> {
        if self.field_delimiter == self.multi_value_separator {
            return Err(Error::Config(format!(
                "field delimiter and multi-value separator are both `{}`",
                self.field_delimiter
            )));
        }
        Ok(())
    }

    pub fn validate_delimited(&self) -> Result<()> {
        self.check_separators()?;
        if !self.field_delimiter.is_ascii() {
            return Err(Error::Config(format!(
                "field delimiter `{}` must be a single ASCII character",
                self.field_delimiter
            )));
        }
        if self.event_columns.is_empty() {
            return Err(Error::Config("event_columns is empty".into()));
        }
        Ok(())
    }

    pub fn validate_triples(&self) -> Result<()> {
        self.check_separators()?;
        if !self
            .predicate_map
            .values()
            .any(|r| *r == PredicateRole::EventSource)
        {
            return Err(Error::Config(
                "predicate_map maps no predicate to event_source".into(),
            ));
        }
        Ok(())
    }
}

fn split_multi(cell: &str, sep: char, out: &mut BTreeSet<String>) {
    for part in cell.split(sep) {
        let part = part.trim();
        if !part.is_empty() {
            out.insert(part.to_owned());
        }
    }
}

// ---------------------------------------------------------------------------
// Delimited text

/// Streaming reader over delimited text. The first column is the scenario id.
pub struct DelimitedRecords<R> {
    reader: csv::Reader<R>,
    event_idx: Vec<usize>,
    attr_idx: Vec<(String, usize)>,
    separator: char,
    seen: HashSet<String>,
    record: csv::StringRecord,
    done: bool,
}

/// Parse delimited text. The header is read and checked eagerly, so a
/// missing column is reported before any record is produced.
pub fn parse_delimited<R: Read>(input: R, config: &IngestConfig) -> Result<DelimitedRecords<R>> {
    config.validate_delimited()?;
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(config.field_delimiter as u8)
        .has_headers(true)
        .flexible(false)
        .from_reader(input);
    let headers = reader.headers().map_err(csv_error)?.clone();
    if headers.is_empty() {
        return Err(Error::Config("missing header row".into()));
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Config(format!("column `{name}` not found in header")))
    };
    let event_idx = config
        .event_columns
        .iter()
        .map(|c| find(c))
        .collect::<Result<Vec<_>>>()?;
    let attr_idx = config
        .attribute_columns
        .iter()
        .map(|c| find(c).map(|i| (c.clone(), i)))
        .collect::<Result<Vec<_>>>()?;
    Ok(DelimitedRecords {
        reader,
        event_idx,
        attr_idx,
        separator: config.multi_value_separator,
        seen: HashSet::new(),
        record: csv::StringRecord::new(),
        done: false,
    })
}

fn csv_error(err: csv::Error) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0);
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::Io(e),
        csv::ErrorKind::UnequalLengths {
            expected_len, len, ..
        } => Error::Record {
            line,
            message: format!("expected {expected_len} fields, found {len}"),
        },
        csv::ErrorKind::Utf8 { err, .. } => Error::Record {
            line,
            message: format!("invalid UTF-8: {err}"),
        },
        other => Error::Record {
            line,
            message: format!("{other:?}"),
        },
    }
}

impl<R: Read> DelimitedRecords<R> {
    fn next_record(&mut self) -> Result<Option<ScenarioRecord>> {
        if !self.reader.read_record(&mut self.record).map_err(csv_error)? {
            return Ok(None);
        }
        let line = self.record.position().map(|p| p.line()).unwrap_or(0);
        let id = self.record.get(0).unwrap_or("").trim();
        if id.is_empty() {
            return Err(Error::Record {
                line,
                message: "empty scenario id".into(),
            });
        }
        if !self.seen.insert(id.to_owned()) {
            return Err(Error::DuplicateScenario(id.to_owned()));
        }
        let mut events = BTreeSet::new();
        for &i in &self.event_idx {
            split_multi(&self.record[i], self.separator, &mut events);
        }
        let mut attributes = BTreeMap::new();
        for (name, i) in &self.attr_idx {
            let value = self.record[*i].trim();
            if !value.is_empty() {
                attributes.insert(name.clone(), value.to_owned());
            }
        }
        Ok(Some(ScenarioRecord {
            scenario_id: id.to_owned(),
            events,
            attributes,
        }))
    }
}

impl<R: Read> Iterator for DelimitedRecords<R> {
    type Item = Result<ScenarioRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        match self.next_record() {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                // Field-count errors are row-local; keep going after them.
                if !matches!(e, Error::Record { .. } | Error::DuplicateScenario(_)) {
                    self.done = true;
                }
                Some(Err(e))
            }
        }
    }
}

/// Write records as delimited text readable by [`parse_delimited`] with the
/// same config. All events go to the first event column.
pub fn write_delimited<W: Write>(
    out: W,
    records: &[ScenarioRecord],
    config: &IngestConfig,
) -> Result<()> {
    config.validate_delimited()?;
    let mut writer = csv::WriterBuilder::new()
        .delimiter(config.field_delimiter as u8)
        .from_writer(out);
    let sep = config.multi_value_separator.to_string();
    let mut header = vec!["id".to_owned()];
    header.extend(config.event_columns.iter().cloned());
    header.extend(config.attribute_columns.iter().cloned());
    writer.write_record(&header).map_err(csv_error)?;
    for r in records {
        let mut row = vec![r.scenario_id.clone()];
        for (k, _) in config.event_columns.iter().enumerate() {
            if k == 0 {
                row.push(r.events.iter().cloned().collect::<Vec<_>>().join(&sep));
            } else {
                row.push(String::new());
            }
        }
        for c in &config.attribute_columns {
            row.push(r.attributes.get(c).cloned().unwrap_or_default());
        }
        writer.write_record(&row).map_err(csv_error)?;
    }
    writer.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// N-Triples subset

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Object {
    Iri(String),
    Literal(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Object,
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += c.len_utf8();
        Some(c)
    }

    fn skip_ws(&mut self) -> bool {
        let start = self.pos;
        while matches!(self.peek(), Some(' ' | '\t')) {
            self.pos += 1;
        }
        self.pos > start
    }

    fn iri(&mut self) -> std::result::Result<String, String> {
        match self.peek() {
            Some('<') => {}
            Some('_') => return Err("blank nodes are not supported".into()),
            Some(c) => return Err(format!("expected `<`, found `{c}`")),
            None => return Err("unexpected end of line".into()),
        }
        self.pos += 1;
        let rest = &self.s[self.pos..];
        let end = rest.find('>').ok_or("unterminated IRI")?;
        let iri = &rest[..end];
        if iri.is_empty() || iri.contains(|c: char| c.is_whitespace() || c == '<' || c == '"') {
            return Err(format!("invalid IRI `{iri}`"));
        }
        self.pos += end + 1;
        Ok(iri.to_owned())
    }

    fn hex(&mut self, digits: usize) -> std::result::Result<char, String> {
        let start = self.pos;
        for _ in 0..digits {
            match self.bump() {
                Some(c) if c.is_ascii_hexdigit() => {}
                _ => return Err("invalid unicode escape".into()),
            }
        }
        let code = u32::from_str_radix(&self.s[start..self.pos], 16).map_err(|e| e.to_string())?;
        char::from_u32(code).ok_or_else(|| format!("invalid code point U+{code:X}"))
    }

    fn literal(&mut self) -> std::result::Result<String, String> {
        self.pos += 1; // opening quote
        let mut out = String::new();
        loop {
            match self.bump() {
                None => return Err("unterminated literal".into()),
                Some('"') => break,
                Some('\\') => {
                    let c = match self.bump() {
                        Some('t') => '\t',
                        Some('b') => '\u{8}',
                        Some('n') => '\n',
                        Some('r') => '\r',
                        Some('f') => '\u{c}',
                        Some('"') => '"',
                        Some('\'') => '\'',
                        Some('\\') => '\\',
                        Some('u') => self.hex(4)?,
                        Some('U') => self.hex(8)?,
                        Some(c) => return Err(format!("invalid escape `\\{c}`")),
                        None => return Err("unterminated escape".into()),
                    };
                    out.push(c);
                }
                Some(c) => out.push(c),
            }
        }
        match self.peek() {
            Some('@') => Err("language tags are not supported".into()),
            Some('^') => Err("datatyped literals are not supported".into()),
            _ => Ok(out),
        }
    }
}

/// Parse one N-Triples line. Returns `Ok(None)` for blank and comment lines.
pub fn parse_triple_line(line: &str) -> std::result::Result<Option<Triple>, String> {
    let trimmed = line.trim();
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let mut cur = Cursor { s: trimmed, pos: 0 };
    let subject = cur.iri()?;
    if !cur.skip_ws() {
        return Err("expected whitespace after subject".into());
    }
    let predicate = cur.iri()?;
    if !cur.skip_ws() {
        return Err("expected whitespace after predicate".into());
    }
    let object = match cur.peek() {
        Some('"') => Object::Literal(cur.literal()?),
        _ => Object::Iri(cur.iri()?),
    };
    cur.skip_ws();
    if cur.bump() != Some('.') {
        return Err("missing terminal ` .`".into());
    }
    cur.skip_ws();
    match cur.peek() {
        None | Some('#') => Ok(Some(Triple {
            subject,
            predicate,
            object,
        })),
        Some(c) => Err(format!("unexpected `{c}` after terminal `.`")),
    }
}

/// Label of an IRI under the suffix rule: the part after the last `/` or `#`.
pub fn iri_suffix(iri: &str) -> &str {
    match iri.rfind(['/', '#']) {
        Some(i) if i + 1 < iri.len() => &iri[i + 1..],
        _ => iri,
    }
}

#[derive(Debug, Default)]
struct Group {
    subject: String,
    key: Option<String>,
    events: BTreeSet<String>,
    attributes: BTreeMap<String, BTreeSet<String>>,
}

/// Streaming N-Triples reader grouping triples by subject.
///
/// Subjects whose triples all use unmapped predicates produce no record.
pub struct TriplesRecords<R> {
    input: R,
    config: IngestConfig,
    line_no: u64,
    buf: String,
    current: Option<Group>,
    emitted: HashSet<String>,
    buffered: Option<std::vec::IntoIter<Group>>,
    skipped: u64,
    done: bool,
}

pub fn parse_ntriples<R: BufRead>(input: R, config: &IngestConfig) -> Result<TriplesRecords<R>> {
    config.validate_triples()?;
    Ok(TriplesRecords {
        input,
        config: config.clone(),
        line_no: 0,
        buf: String::new(),
        current: None,
        emitted: HashSet::new(),
        buffered: None,
        skipped: 0,
        done: false,
    })
}

impl<R: BufRead> TriplesRecords<R> {
    /// Number of triples skipped because their predicate is unmapped.
    pub fn skipped(&self) -> u64 {
        self.skipped
    }

    fn label(&self, object: Object) -> String {
        match object {
            Object::Iri(iri) if self.config.iri_suffix_labels => iri_suffix(&iri).to_owned(),
            Object::Iri(iri) | Object::Literal(iri) => iri,
        }
    }

    fn next_triple(&mut self) -> Result<Option<(Triple, PredicateRole)>> {
        loop {
            self.buf.clear();
            if self.input.read_line(&mut self.buf)? == 0 {
                return Ok(None);
            }
            self.line_no += 1;
            let triple = parse_triple_line(&self.buf).map_err(|msg| Error::Record {
                line: self.line_no,
                message: format!("{msg}: `{}`", self.buf.trim_end()),
            })?;
            let Some(triple) = triple else { continue };
            match self.config.predicate_map.get(&triple.predicate).cloned() {
                Some(role) => return Ok(Some((triple, role))),
                None => self.skipped += 1,
            }
        }
    }

    fn add(&self, group: &mut Group, triple: Triple, role: PredicateRole) -> Result<()> {
        let value = self.label(triple.object);
        match role {
            PredicateRole::EventSource => {
                if !value.is_empty() {
                    group.events.insert(value);
                }
            }
            PredicateRole::Attribute(name) => {
                group.attributes.entry(name).or_default().insert(value);
            }
            PredicateRole::ScenarioKey => match &group.key {
                Some(k) if *k != value => {
                    return Err(Error::Record {
                        line: self.line_no,
                        message: format!("subject `{}` has two scenario keys", group.subject),
                    })
                }
                _ => group.key = Some(value),
            },
        }
        Ok(())
    }

    fn finish(&mut self, group: Group) -> Result<ScenarioRecord> {
        let sep = self.config.multi_value_separator.to_string();
        let id = group.key.unwrap_or(group.subject);
        if !self.emitted.insert(id.clone()) {
            return Err(match self.config.triples_grouping {
                TriplesGrouping::Contiguous => Error::Record {
                    line: self.line_no,
                    message: format!(
                        "scenario `{id}` is not contiguous; use buffered grouping for interleaved input"
                    ),
                },
                TriplesGrouping::Buffered => Error::DuplicateScenario(id),
            });
        }
        let attributes = group
            .attributes
            .into_iter()
            .map(|(k, v)| (k, v.into_iter().collect::<Vec<_>>().join(&sep)))
            .collect();
        Ok(ScenarioRecord {
            scenario_id: id,
            events: group.events,
            attributes,
        })
    }

    fn next_contiguous(&mut self) -> Result<Option<ScenarioRecord>> {
        loop {
            let Some((triple, role)) = self.next_triple()? else {
                return match self.current.take() {
                    Some(g) => self.finish(g).map(Some),
                    None => Ok(None),
                };
            };
            let same = self
                .current
                .as_ref()
                .is_some_and(|g| g.subject == triple.subject);
            if same {
                let mut g = self.current.take().unwrap();
                self.add(&mut g, triple, role)?;
                self.current = Some(g);
                continue;
            }
            let mut fresh = Group {
                subject: triple.subject.clone(),
                ..Group::default()
            };
            self.add(&mut fresh, triple, role)?;
            if let Some(prev) = self.current.replace(fresh) {
                return self.finish(prev).map(Some);
            }
        }
    }

    fn fill_buffer(&mut self) -> Result<()> {
        let mut order: Vec<Group> = Vec::new();
        let mut index: HashMap<String, usize> = HashMap::new();
        while let Some((triple, role)) = self.next_triple()? {
            let i = *index.entry(triple.subject.clone()).or_insert_with(|| {
                order.push(Group {
                    subject: triple.subject.clone(),
                    ..Group::default()
                });
                order.len() - 1
            });
            let mut g = std::mem::take(&mut order[i]);
            let res = self.add(&mut g, triple, role);
            order[i] = g;
            res?;
        }
        self.buffered = Some(order.into_iter());
        Ok(())
    }
}

impl<R: BufRead> Iterator for TriplesRecords<R> {
    type Item = Result<ScenarioRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let res = match self.config.triples_grouping {
            TriplesGrouping::Contiguous => self.next_contiguous(),
            TriplesGrouping::Buffered => {
                if self.buffered.is_none() {
                    if let Err(e) = self.fill_buffer() {
                        self.done = true;
                        return Some(Err(e));
                    }
                }
                match self.buffered.as_mut().and_then(Iterator::next) {
                    Some(g) => self.finish(g).map(Some),
                    None => Ok(None),
                }
            }
        };
        match res {
            Ok(Some(r)) => Some(Ok(r)),
            Ok(None) => {
                self.done = true;
                None
            }
            Err(e) => {
                self.done = true;
                Some(Err(e))
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario filters

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CompareOp {
    #[serde(rename = "=")]
    Eq,
    #[serde(rename = "!=")]
    Ne,
    #[serde(rename = "<")]
    Lt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = ">=")]
    Ge,
}

impl CompareOp {
    fn symbol(self) -> &'static str {
        match self {
            CompareOp::Eq => "=",
            CompareOp::Ne => "!=",
            CompareOp::Lt => "<",
            CompareOp::Le => "<=",
            CompareOp::Gt => ">",
            CompareOp::Ge => ">=",
        }
    }

    fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CompareOp::Eq => lhs == rhs,
            CompareOp::Ne => lhs != rhs,
            CompareOp::Lt => lhs < rhs,
            CompareOp::Le => lhs <= rhs,
            CompareOp::Gt => lhs > rhs,
            CompareOp::Ge => lhs >= rhs,
        }
    }
}

/// A condition a scenario must satisfy to be kept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioPredicate {
    NonEmptyEvents,
    HasAttribute(String),
    /// Numeric comparison; absent or non-numeric values are tallied as unparseable.
    Compare {
        attribute: String,
        op: CompareOp,
        value: f64,
    },
    /// At least one of the listed events occurs.
    AnyEvent(Vec<String>),
}

impl fmt::Display for ScenarioPredicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ScenarioPredicate::NonEmptyEvents => f.write_str("nonempty"),
            ScenarioPredicate::HasAttribute(a) => write!(f, "has:{a}"),
            ScenarioPredicate::Compare {
                attribute,
                op,
                value,
            } => write!(f, "{attribute}{}{value}", op.symbol()),
            ScenarioPredicate::AnyEvent(ev) => write!(f, "event:{}", ev.join("|")),
        }
    }
}

impl FromStr for ScenarioPredicate {
    type Err = Error;

    /// Accepts `nonempty`, `has:ATTR`, `event:A|B`, or `ATTR<op>NUMBER` with
    /// op one of `>=`, `<=`, `!=`, `=`, `<`, `>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if s == "nonempty" {
            return Ok(ScenarioPredicate::NonEmptyEvents);
        }
        if let Some(a) = s.strip_prefix("has:") {
            return Ok(ScenarioPredicate::HasAttribute(a.trim().to_owned()));
        }
        if let Some(ev) = s.strip_prefix("event:") {
            let events = ev
                .split('|')
                .map(str::trim)
                .filter(|e| !e.is_empty())
                .map(str::to_owned)
                .collect::<Vec<_>>();
            if events.is_empty() {
                return Err(Error::Parameter(format!("filter `{s}` lists no events")));
            }
            return Ok(ScenarioPredicate::AnyEvent(events));
        }
        const OPS: [(&str, CompareOp); 6] = [
            (">=", CompareOp::Ge),
            ("<=", CompareOp::Le),
            ("!=", CompareOp::Ne),
            ("=", CompareOp::Eq),
            ("<", CompareOp::Lt),
            (">", CompareOp::Gt),
        ];
        for (sym, op) in OPS {
            if let Some(i) = s.find(sym) {
                let attribute = s[..i].trim();
                let value = s[i + sym.len()..].trim();
                let value: f64 = value
                    .parse()
                    .map_err(|_| Error::Parameter(format!("filter `{s}`: `{value}` is not a number")))?;
                if attribute.is_empty() {
                    return Err(Error::Parameter(format!("filter `{s}` names no attribute")));
                }
                return Ok(ScenarioPredicate::Compare {
                    attribute: attribute.to_owned(),
                    op,
                    value,
                });
            }
        }
        Err(Error::Parameter(format!("unrecognized filter `{s}`")))
    }
}

enum Verdict {
    Pass,
    Fail,
    Unparseable,
}

impl ScenarioPredicate {
    fn check(&self, r: &ScenarioRecord) -> Verdict {
        let ok = match self {
            ScenarioPredicate::NonEmptyEvents => !r.events.is_empty(),
            ScenarioPredicate::HasAttribute(a) => r.attributes.contains_key(a),
            ScenarioPredicate::Compare {
                attribute,
                op,
                value,
            } => match r.attributes.get(attribute).map(|v| v.trim().parse::<f64>()) {
                Some(Ok(x)) if x.is_finite() => op.eval(x, *value),
                _ => return Verdict::Unparseable,
            },
            ScenarioPredicate::AnyEvent(ev) => ev.iter().any(|e| r.events.contains(e)),
        };
        if ok {
            Verdict::Pass
        } else {
            Verdict::Fail
        }
    }
}

/// Drop counts of a [`ScenarioFilter`]. A record is charged to the first
/// predicate it fails.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize)]
pub struct FilterReport {
    pub input: usize,
    pub passed: usize,
    pub dropped: Vec<(String, usize)>,
    pub unparseable: usize,
}

impl FilterReport {
    pub fn total_dropped(&self) -> usize {
        self.dropped.iter().map(|(_, n)| n).sum::<usize>() + self.unparseable
    }
}

pub struct ScenarioFilter<I> {
    inner: I,
    predicates: Vec<ScenarioPredicate>,
    report: FilterReport,
}

/// Keep records satisfying every predicate. Order is preserved and stream
/// errors pass through untouched.
pub fn filter_scenarios<I>(stream: I, predicates: Vec<ScenarioPredicate>) -> ScenarioFilter<I::IntoIter>
where
    I: IntoIterator<Item = Result<ScenarioRecord>>,
{
    let dropped = predicates.iter().map(|p| (p.to_string(), 0)).collect();
    ScenarioFilter {
        inner: stream.into_iter(),
        predicates,
        report: FilterReport {
            dropped,
            ..FilterReport::default()
        },
    }
}

impl<I> ScenarioFilter<I> {
    pub fn report(&self) -> &FilterReport {
        &self.report
    }
}

impl<I> Iterator for ScenarioFilter<I>
where
    I: Iterator<Item = Result<ScenarioRecord>>,
{
    type Item = Result<ScenarioRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        'records: loop {
            let record = match self.inner.next()? {
                Ok(r) => r,
                Err(e) => return Some(Err(e)),
            };
            self.report.input += 1;
            for (k, p) in self.predicates.iter().enumerate() {
                match p.check(&record) {
                    Verdict::Pass => {}
                    Verdict::Fail => {
                        self.report.dropped[k].1 += 1;
                        continue 'records;
                    }
                    Verdict::Unparseable => {
                        self.report.unparseable += 1;
                        continue 'records;
                    }
                }
            }
            self.report.passed += 1;
            return Some(Ok(record));
        }
    }
}
