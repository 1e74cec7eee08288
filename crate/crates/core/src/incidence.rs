//! Sparse binary incidence matrix and event-level data reduction.
//!
//! Rows are scenarios, columns are events. Event ids are dense and ordered
//! by descending frequency, ties broken by the byte order of the label, so
//! "most frequent k events" is always the id prefix `0..k`.

use std::collections::{BTreeSet, HashMap};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::ScenarioRecord;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventEntry {
    pub label: String,
    /// Number of scenarios in which the event occurs.
    pub frequency: u64,
    /// Synthetic bin event (e.g. a decade), drawn as a cross.
    pub marker: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct EventCatalog {
    entries: Vec<EventEntry>,
    index: HashMap<String, u32>,
}

impl EventCatalog {
    fn from_entries(entries: Vec<EventEntry>) -> Self {
        let index = entries
            .iter()
            .enumerate()
            .map(|(i, e)| (e.label.clone(), i as u32))
            .collect();
        Self { entries, index }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[EventEntry] {
        &self.entries
    }

    pub fn get(&self, id: u32) -> Option<&EventEntry> {
        self.entries.get(id as usize)
    }

    pub fn id_of(&self, label: &str) -> Option<u32> {
        self.index.get(label).copied()
    }

    pub fn label(&self, id: u32) -> &str {
        &self.entries[id as usize].label
    }

    pub fn frequency(&self, id: u32) -> u64 {
        self.entries[id as usize].frequency
    }

    pub fn total_frequency(&self) -> u64 {
        self.entries.iter().map(|e| e.frequency).sum()
    }

    /// Flag the given labels as marker events. Unknown labels are ignored.
    pub fn mark<'a>(&mut self, labels: impl IntoIterator<Item = &'a str>) {
        for l in labels {
            if let Some(&i) = self.index.get(l) {
                self.entries[i as usize].marker = true;
            }
        }
    }
}

/// Binary scenario × event matrix in compressed sparse row form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncidenceMatrix {
    scenario_ids: Vec<String>,
    offsets: Vec<usize>,
    indices: Vec<u32>,
    n_events: usize,
}

impl IncidenceMatrix {
    /// Build from explicit rows. Each row is sorted and deduplicated; ids
    /// must be below `n_events`.
    pub fn from_rows(
        scenario_ids: Vec<String>,
        rows: Vec<Vec<u32>>,
        n_events: usize,
    ) -> Result<Self> {
        if scenario_ids.len() != rows.len() {
            return Err(Error::Parameter(format!(
                "{} scenario ids for {} rows",
                scenario_ids.len(),
                rows.len()
            )));
        }
        let mut offsets = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        offsets.push(0);
        for mut row in rows {
            row.sort_unstable();
            row.dedup();
            if let Some(&last) = row.last() {
                if last as usize >= n_events {
                    return Err(Error::Parameter(format!(
                        "event id {last} out of range for {n_events} events"
                    )));
                }
            }
            indices.extend_from_slice(&row);
            offsets.push(indices.len());
        }
        Ok(Self {
            scenario_ids,
            offsets,
            indices,
            n_events,
        })
    }

    pub fn n_scenarios(&self) -> usize {
        self.scenario_ids.len()
    }

    pub fn n_events(&self) -> usize {
        self.n_events
    }

    /// Number of stored ones.
    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    pub fn scenario_ids(&self) -> &[String] {
        &self.scenario_ids
    }

    /// Sorted event ids present in scenario `i`.
    pub fn row(&self, i: usize) -> &[u32] {
        &self.indices[self.offsets[i]..self.offsets[i + 1]]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[u32]> + '_ {
        (0..self.n_scenarios()).map(move |i| self.row(i))
    }

    pub fn column_sums(&self) -> Vec<u64> {
        let mut sums = vec![0u64; self.n_events];
        for &j in &self.indices {
            sums[j as usize] += 1;
        }
        sums
    }

    /// Event → scenarios lists (the transpose), each sorted.
    pub fn columns(&self) -> Vec<Vec<u32>> {
        let mut cols = vec![Vec::new(); self.n_events];
        for (i, row) in self.rows().enumerate() {
            for &j in row {
                cols[j as usize].push(i as u32);
            }
        }
        cols
    }

    /// Keep only the listed columns (ascending old ids), renumbered densely.
    fn restrict(&self, keep: &[u32]) -> Self {
        let mut remap = vec![u32::MAX; self.n_events];
        for (new, &old) in keep.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        let mut offsets = Vec::with_capacity(self.offsets.len());
        let mut indices = Vec::new();
        offsets.push(0);
        for row in self.rows() {
            indices.extend(
                row.iter()
                    .map(|&j| remap[j as usize])
                    .filter(|&j| j != u32::MAX),
            );
            offsets.push(indices.len());
        }
        Self {
            scenario_ids: self.scenario_ids.clone(),
            offsets,
            indices,
            n_events: keep.len(),
        }
    }
}

/// Build the incidence matrix and catalog from a record stream.
///
/// Scenario order follows the stream. Records with no events still count
/// as scenarios.
pub fn build_incidence<I>(stream: I) -> Result<(IncidenceMatrix, EventCatalog)>
where
    I: IntoIterator<Item = Result<ScenarioRecord>>,
{
    let mut labels: Vec<String> = Vec::new();
    let mut first_seen: HashMap<String, u32> = HashMap::new();
    let mut counts: Vec<u64> = Vec::new();
    let mut scenario_ids = Vec::new();
    let mut offsets = vec![0usize];
    let mut indices: Vec<u32> = Vec::new();

    for record in stream {
        let record = record?;
        for label in record.events {
            let id = match first_seen.get(&label) {
                Some(&id) => id,
                None => {
                    let id = labels.len() as u32;
                    first_seen.insert(label.clone(), id);
                    labels.push(label);
                    counts.push(0);
                    id
                }
            };
            counts[id as usize] += 1;
            indices.push(id);
        }
        offsets.push(indices.len());
        scenario_ids.push(record.scenario_id);
    }
    if scenario_ids.is_empty() {
        return Err(Error::NoScenarios);
    }
    drop(first_seen);

    let mut order: Vec<u32> = (0..labels.len() as u32).collect();
    order.sort_by(|&a, &b| {
        counts[b as usize]
            .cmp(&counts[a as usize])
            .then_with(|| labels[a as usize].cmp(&labels[b as usize]))
    });
    let mut remap = vec![0u32; labels.len()];
    for (new, &old) in order.iter().enumerate() {
        remap[old as usize] = new as u32;
    }
    for id in indices.iter_mut() {
        *id = remap[*id as usize];
    }
    for w in offsets.windows(2) {
        indices[w[0]..w[1]].sort_unstable();
    }

    let mut labels: Vec<Option<String>> = labels.into_iter().map(Some).collect();
    let entries = order
        .iter()
        .map(|&old| EventEntry {
            label: labels[old as usize].take().unwrap_or_default(),
            frequency: counts[old as usize],
            marker: false,
        })
        .collect::<Vec<_>>();
    let m = entries.len();
    Ok((
        IncidenceMatrix {
            scenario_ids,
            offsets,
            indices,
            n_events: m,
        },
        EventCatalog::from_entries(entries),
    ))
}

/// Event-level reduction rule. Frequency ties break by label.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventSelection {
    /// Events occurring in at least `k` scenarios.
    MinCount(u64),
    /// The `k` most frequent events.
    TopK(usize),
    /// The most frequent `ceil(f · M)` events.
    TopFraction(f64),
    /// Shortest frequency-descending prefix holding at least `f` of the
    /// total occurrence mass.
    CoverageFraction(f64),
    /// Per group event, the coverage prefix of co-occurring events; the
    /// union of those plus the group events themselves.
    GroupedCoverage { groups: Vec<String>, fraction: f64 },
}

fn check_fraction(f: f64) -> Result<()> {
    if f > 0.0 && f <= 1.0 {
        Ok(())
    } else {
        Err(Error::Parameter(format!("fraction {f} outside (0, 1]")))
    }
}

impl EventSelection {
    pub fn validate(&self) -> Result<()> {
        match self {
            EventSelection::MinCount(_) => Ok(()),
            EventSelection::TopK(0) => Err(Error::Parameter("top_k requires k >= 1".into())),
            EventSelection::TopK(_) => Ok(()),
            EventSelection::TopFraction(f) | EventSelection::CoverageFraction(f) => {
                check_fraction(*f)
            }
            EventSelection::GroupedCoverage { groups, fraction } => {
                if groups.is_empty() {
                    return Err(Error::Parameter("grouped selection without groups".into()));
                }
                check_fraction(*fraction)
            }
        }
    }
}

fn finish_selection(
    x: &IncidenceMatrix,
    catalog: &EventCatalog,
    mut keep: Vec<u32>,
) -> (IncidenceMatrix, EventCatalog) {
    keep.sort_unstable();
    keep.dedup();
    let entries = keep
        .iter()
        .map(|&j| catalog.entries[j as usize].clone())
        .collect();
    (x.restrict(&keep), EventCatalog::from_entries(entries))
}

/// Restrict `x` and `catalog` to the events chosen by `selection`.
///
/// The scenario set is left untouched, so retained frequencies stay equal
/// to the column sums of the reduced matrix.
pub fn select_events(
    x: &IncidenceMatrix,
    catalog: &EventCatalog,
    selection: &EventSelection,
) -> Result<(IncidenceMatrix, EventCatalog)> {
    selection.validate()?;
    let m = catalog.len();
    let keep: Vec<u32> = match selection {
        EventSelection::MinCount(k) => (0..m as u32)
            .filter(|&j| catalog.frequency(j) >= *k)
            .collect(),
        EventSelection::TopK(k) => {
            if *k > m {
                log::warn!("top_k({k}) exceeds the {m} available events; keeping all");
            }
            (0..m.min(*k) as u32).collect()
        }
        EventSelection::TopFraction(f) => {
            let k = (f * m as f64).ceil() as usize;
            (0..m.min(k) as u32).collect()
        }
        EventSelection::CoverageFraction(f) => {
            let k = coverage_len(catalog.entries.iter().map(|e| e.frequency), *f);
            (0..k as u32).collect()
        }
        EventSelection::GroupedCoverage { groups, fraction } => {
            return select_events_grouped(x, catalog, groups, *fraction);
        }
    };
    Ok(finish_selection(x, catalog, keep))
}

/// Shortest prefix length whose cumulative sum is at least `fraction` of the
/// total. Frequencies must already be in descending order.
fn coverage_len(freqs: impl Iterator<Item = u64> + Clone, fraction: f64) -> usize {
    let total: u64 = freqs.clone().sum();
    let target = fraction * total as f64;
    let mut cum = 0u64;
    let mut len = 0;
    for f in freqs {
        if len > 0 && cum as f64 >= target {
            break;
        }
        cum += f;
        len += 1;
    }
    len
}

/// Grouped coverage selection.
///
/// For each group event `g`, only scenarios containing `g` are considered;
/// the other events are ranked by their count in those scenarios and the
/// coverage prefix at `fraction` is kept. The result is the union over all
/// groups plus the group events. Shared events are counted once.
pub fn select_events_grouped<S: AsRef<str>>(
    x: &IncidenceMatrix,
    catalog: &EventCatalog,
    groups: &[S],
    fraction: f64,
) -> Result<(IncidenceMatrix, EventCatalog)> {
    check_fraction(fraction)?;
    let group_ids = groups
        .iter()
        .map(|g| {
            catalog
                .id_of(g.as_ref())
                .ok_or_else(|| Error::Parameter(format!("unknown group event `{}`", g.as_ref())))
        })
        .collect::<Result<Vec<_>>>()?;
    let is_group: BTreeSet<u32> = group_ids.iter().copied().collect();

    let mut keep: Vec<u32> = group_ids.clone();
    let mut counts = vec![0u64; catalog.len()];
    for &g in &group_ids {
        counts.iter_mut().for_each(|c| *c = 0);
        for row in x.rows() {
            if row.binary_search(&g).is_ok() {
                for &j in row {
                    if !is_group.contains(&j) {
                        counts[j as usize] += 1;
                    }
                }
            }
        }
        let mut ranked: Vec<u32> = (0..catalog.len() as u32)
            .filter(|&j| counts[j as usize] > 0)
            .collect();
        ranked.sort_by(|&a, &b| {
            counts[b as usize]
                .cmp(&counts[a as usize])
                .then_with(|| catalog.label(a).cmp(catalog.label(b)))
        });
        let k = coverage_len(ranked.iter().map(|&j| counts[j as usize]), fraction);
        keep.extend_from_slice(&ranked[..k]);
    }
    Ok(finish_selection(x, catalog, keep))
}

/// Attribute-to-bin rule for synthetic marker events.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Binning {
    /// `10 * floor(year / 10)`, labelled `1960s`.
    Decade,
    /// Fixed-width integer bins labelled `lo-hi`.
    Width(i64),
}

impl Binning {
    pub fn label(self, value: f64) -> Option<String> {
        if !value.is_finite() {
            return None;
        }
        let v = value.floor() as i64;
        match self {
            Binning::Decade => Some(format!("{}s", v.div_euclid(10) * 10)),
            Binning::Width(w) if w > 0 => {
                let lo = v.div_euclid(w) * w;
                Some(format!("{lo}-{}", lo + w - 1))
            }
            Binning::Width(_) => None,
        }
    }
}

/// Iterator adapter adding one bin event per scenario from a numeric
/// attribute. Bin labels are collected so they can be flagged as markers
/// with [`EventCatalog::mark`].
pub struct AttributeBins<I> {
    inner: I,
    attribute: String,
    binning: Binning,
    markers: BTreeSet<String>,
    unparseable: usize,
}

pub fn partition_events_by_attribute<I>(
    stream: I,
    attribute: impl Into<String>,
    binning: Binning,
) -> AttributeBins<I::IntoIter>
where
    I: IntoIterator<Item = Result<ScenarioRecord>>,
{
    AttributeBins {
        inner: stream.into_iter(),
        attribute: attribute.into(),
        binning,
        markers: BTreeSet::new(),
        unparseable: 0,
    }
}

impl<I> AttributeBins<I> {
    pub fn markers(&self) -> &BTreeSet<String> {
        &self.markers
    }

    /// Scenarios whose attribute was missing or not numeric.
    pub fn unparseable(&self) -> usize {
        self.unparseable
    }
}

impl<I> Iterator for AttributeBins<I>
where
    I: Iterator<Item = Result<ScenarioRecord>>,
{
    type Item = Result<ScenarioRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut record = match self.inner.next()? {
            Ok(r) => r,
            Err(e) => return Some(Err(e)),
        };
        let bin = record
            .attributes
            .get(&self.attribute)
            .and_then(|v| v.trim().parse::<f64>().ok())
            .and_then(|v| self.binning.label(v));
        match bin {
            Some(label) => {
                if !self.markers.contains(&label) {
                    self.markers.insert(label.clone());
                }
                record.events.insert(label);
            }
            None => self.unparseable += 1,
        }
        Some(Ok(record))
    }
}

// ---------------------------------------------------------------------------
// Two-file text interchange

pub(crate) fn escape_field(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape_field(s: &str, line: u64) -> Result<String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        out.push(match chars.next() {
            Some('\\') => '\\',
            Some('t') => '\t',
            Some('n') => '\n',
            Some('r') => '\r',
            _ => {
                return Err(Error::Record {
                    line,
                    message: "invalid escape".into(),
                })
            }
        });
    }
    Ok(out)
}

/// Catalog file: header `id\tlabel\tfrequency`, then one line per event.
pub fn write_catalog<W: Write>(mut out: W, catalog: &EventCatalog) -> Result<()> {
    writeln!(out, "id\tlabel\tfrequency")?;
    for (id, e) in catalog.entries.iter().enumerate() {
        writeln!(out, "{id}\t{}\t{}", escape_field(&e.label), e.frequency)?;
    }
    Ok(())
}

/// Rows file: header `scenario_id\tevents`, then one line per scenario with
/// space-separated event ids.
pub fn write_rows<W: Write>(mut out: W, x: &IncidenceMatrix) -> Result<()> {
    writeln!(out, "scenario_id\tevents")?;
    for (id, row) in x.scenario_ids.iter().zip(x.rows()) {
        let ids = row.iter().map(u32::to_string).collect::<Vec<_>>().join(" ");
        writeln!(out, "{}\t{ids}", escape_field(id))?;
    }
    Ok(())
}

/// Read the two-file form back, checking ids and frequencies.
pub fn read_interchange<C: BufRead, R: BufRead>(
    catalog_in: C,
    rows_in: R,
) -> Result<(IncidenceMatrix, EventCatalog)> {
    let bad = |line: u64, message: &str| Error::Record {
        line,
        message: message.to_owned(),
    };
    let mut entries = Vec::new();
    for (n, line) in catalog_in.lines().enumerate().skip(1) {
        let line = line?;
        let ln = n as u64 + 1;
        let mut parts = line.split('\t');
        let (Some(id), Some(label), Some(freq), None) =
            (parts.next(), parts.next(), parts.next(), parts.next())
        else {
            return Err(bad(ln, "expected 3 tab-separated fields"));
        };
        if id.parse::<usize>().ok() != Some(entries.len()) {
            return Err(bad(ln, "event ids must be dense and ascending"));
        }
        let frequency = freq.parse().map_err(|_| bad(ln, "invalid frequency"))?;
        entries.push(EventEntry {
            label: unescape_field(label, ln)?,
            frequency,
            marker: false,
        });
    }
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for (n, line) in rows_in.lines().enumerate().skip(1) {
        let line = line?;
        let ln = n as u64 + 1;
        let (id, events) = line
            .split_once('\t')
            .ok_or_else(|| bad(ln, "expected 2 tab-separated fields"))?;
        let row = events
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| bad(ln, "invalid event id")))
            .collect::<Result<Vec<_>>>()?;
        if row.windows(2).any(|w| w[0] >= w[1]) {
            return Err(bad(ln, "event ids must be strictly increasing"));
        }
        ids.push(unescape_field(id, ln)?);
        rows.push(row);
    }
    let x = IncidenceMatrix::from_rows(ids, rows, entries.len())?;
    let catalog = EventCatalog::from_entries(entries);
    if x.column_sums()
        .iter()
        .zip(&catalog.entries)
        .any(|(s, e)| *s != e.frequency)
    {
        return Err(Error::Integrity(
            "catalog frequencies differ from row column sums".into(),
        ));
    }
    Ok((x, catalog))
}
