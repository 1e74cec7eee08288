//! End-to-end runs: ingest → filter → incidence → select → analyze → prune
//! → layout → export, driven by a JSON [`PipelineConfig`].

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::coincidence::{analyze, prune_edges, write_edge_table, AnalysisMode};
use crate::error::{Error, Result};
use crate::graphout::{assemble, GraphMeta, ViewerAssets, EPOCH_TIMESTAMP};
use crate::incidence::{
    build_incidence, partition_events_by_attribute, select_events, Binning, EventSelection,
};
use crate::ingest::{
    filter_scenarios, parse_delimited, parse_ntriples, DelimitedRecords, FilterReport,
    IngestConfig, ScenarioPredicate, ScenarioRecord, TriplesRecords,
};
use crate::layout::{
    classical_mds, fruchterman_reingold, ideal_distances, kamada_kawai_distances, LayoutAlgorithm,
    LayoutInput, Positions, FR_DEFAULT_ITERATIONS, KK_DEFAULT_MAX_ITERS, KK_DEFAULT_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    Delimited,
    Ntriples,
}

impl std::str::FromStr for InputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "delimited" | "csv" => Ok(InputFormat::Delimited),
            "ntriples" | "nt" => Ok(InputFormat::Ntriples),
            other => Err(Error::Config(format!("unknown input format `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct InputConfig {
    pub path: Option<PathBuf>,
    pub format: InputFormat,
    pub ingest: IngestConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinConfig {
    pub attribute: String,
    pub binning: Binning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LayoutConfig {
    pub algorithm: LayoutAlgorithm,
    pub seed: u64,
    /// FR iterations or KK move budget; defaults per algorithm.
    pub iterations: Option<usize>,
    pub width: f64,
    pub height: f64,
}

impl Default for LayoutConfig {
    fn default() -> Self {
        Self {
            algorithm: LayoutAlgorithm::Fr,
            seed: DEFAULT_SEED,
            iterations: None,
            width: 1.0,
            height: 1.0,
        }
    }
}

pub const DEFAULT_SEED: u64 = 42;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Outputs {
    pub json: Option<PathBuf>,
    pub graphml: Option<PathBuf>,
    pub html: Option<PathBuf>,
    pub edges: Option<PathBuf>,
}

impl Outputs {
    fn any(&self) -> bool {
        self.json.is_some() || self.graphml.is_some() || self.html.is_some() || self.edges.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputConfig,
    pub filters: Vec<ScenarioPredicate>,
    pub bins: Option<BinConfig>,
    pub selection: Option<EventSelection>,
    pub mode: AnalysisMode,
    pub min_d: f64,
    pub layout: Option<LayoutConfig>,
    /// Delimited file: first column event label, other columns attributes.
    pub node_attributes: Option<PathBuf>,
    /// Directory holding `viewer.js` / `viewer.css`; the built-in viewer is
    /// used when absent.
    pub viewer_assets: Option<PathBuf>,
    pub outputs: Outputs,
    /// Fixed timestamp so outputs are byte-reproducible.
    pub deterministic: bool,
    pub threads: Option<usize>,
}

impl PipelineConfig {
    /// Load a JSON config. Relative paths are resolved against the config
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read `{}`: {e}", path.display())))?;
        let mut cfg: PipelineConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("`{}`: {e}", path.display())))?;
        if let Some(base) = path.parent() {
            cfg.resolve_paths(base);
        }
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.input.path);
        fix(&mut self.node_attributes);
        fix(&mut self.viewer_assets);
        fix(&mut self.outputs.json);
        fix(&mut self.outputs.graphml);
        fix(&mut self.outputs.html);
        fix(&mut self.outputs.edges);
    }

    fn validate_input(&self) -> Result<()> {
        let path = self
            .input
            .path
            .as_ref()
            .ok_or_else(|| Error::Config("input.path is required".into()))?;
        if !path.is_file() {
            return Err(Error::Config(format!(
                "input.path `{}` does not exist",
                path.display()
            )));
        }
        match self.input.format {
            InputFormat::Delimited => self.input.ingest.validate_delimited(),
            InputFormat::Ntriples => self.input.ingest.validate_triples(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.outputs.any() {
            return Err(Error::Config(
                "outputs: at least one of json, graphml, html, edges is required".into(),
            ));
        }
        self.validate_input()?;
        let wrap = |e: Error| Error::Config(e.to_string());
        if let Some(sel) = &self.selection {
            sel.validate().map_err(|e| Error::Config(format!("selection: {e}")))?;
        }
        self.mode.validate().map_err(wrap)?;
        if self.min_d.is_nan() || self.min_d < 0.0 {
            return Err(Error::Config(format!("min_d: {} must be >= 0", self.min_d)));
        }
        if let Some(l) = &self.layout {
            if l.iterations == Some(0) {
                return Err(Error::Config("layout.iterations must be >= 1".into()));
            }
            if !(l.width > 0.0 && l.height > 0.0) {
                return Err(Error::Config("layout.width and layout.height must be > 0".into()));
            }
        }
        if let Some(Binning::Width(w)) = self.bins.as_ref().map(|b| b.binning) {
            if w <= 0 {
                return Err(Error::Config("bins.binning: width must be > 0".into()));
            }
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be >= 1".into()));
        }
        if let Some(dir) = &self.viewer_assets {
            if !dir.join("viewer.js").is_file() {
                return Err(ViewerAssets::load(dir).unwrap_err());
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config,
    Ingest,
    Incidence,
    Select,
    Analyze,
    Prune,
    Layout,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Incidence => "incidence",
            Stage::Select => "select",
            Stage::Analyze => "analyze",
            Stage::Prune => "prune",
            Stage::Layout => "layout",
            Stage::Export => "export",
        })
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {source}")]
pub struct PipelineError {
    pub stage: Stage,
    #[source]
    pub source: Error,
}

impl PipelineError {
    /// Usage and configuration problems map to exit code 2, the rest to 1.
    pub fn exit_code(&self) -> i32 {
        match (self.stage, &self.source) {
            (Stage::Config, _) | (_, Error::Config(_)) | (_, Error::MissingAssets(_)) => 2,
            _ => 1,
        }
    }
}

fn at(stage: Stage) -> impl Fn(Error) -> PipelineError {
    move |source| PipelineError { stage, source }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageReport {
    pub stage: String,
    pub unit: String,
    pub input: u64,
    pub output: u64,
    pub note: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct RunReport {
    pub stages: Vec<StageReport>,
    pub filter: FilterReport,
    pub outputs: Vec<PathBuf>,
}

impl RunReport {
    fn push(&mut self, stage: &str, unit: &str, input: u64, output: u64, note: String, seconds: f64) {
        self.stages.push(StageReport {
            stage: stage.into(),
            unit: unit.into(),
            input,
            output,
            note,
            seconds,
        });
    }

    pub fn stage(&self, name: &str) -> Option<&StageReport> {
        self.stages.iter().find(|s| s.stage == name)
    }
}

impl fmt::Display for RunReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "{:<10} {:<10} {:>10} {:>10} {:>9}  note",
            "stage", "unit", "in", "out", "seconds"
        )?;
        for s in &self.stages {
            writeln!(
                f,
                "{:<10} {:<10} {:>10} {:>10} {:>9.3}  {}",
                s.stage, s.unit, s.input, s.output, s.seconds, s.note
            )?;
        }
        for p in &self.outputs {
            writeln!(f, "wrote {}", p.display())?;
        }
        Ok(())
    }
}

enum Source {
    Delimited(DelimitedRecords<BufReader<File>>),
    Triples(TriplesRecords<BufReader<File>>),
}

impl Source {
    fn open(input: &InputConfig) -> Result<Self> {
        let path = input
            .path
            .as_ref()
            .ok_or_else(|| Error::Config("input.path is required".into()))?;
        let file = BufReader::new(File::open(path)?);
        Ok(match input.format {
            InputFormat::Delimited => Source::Delimited(parse_delimited(file, &input.ingest)?),
            InputFormat::Ntriples => Source::Triples(parse_ntriples(file, &input.ingest)?),
        })
    }

    fn skipped(&self) -> u64 {
        match self {
            Source::Delimited(_) => 0,
            Source::Triples(t) => t.skipped(),
        }
    }
}

impl Iterator for Source {
    type Item = Result<ScenarioRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        match self {
            Source::Delimited(r) => r.next(),
            Source::Triples(r) => r.next(),
        }
    }
}

fn stream_stage(e: &Error) -> Stage {
    match e {
        Error::NoScenarios => Stage::Incidence,
        _ => Stage::Ingest,
    }
}

/// Run the pipeline and write every requested artifact.
///
/// Artifacts are rendered in memory first and then written through
/// temporary files renamed into place; if any write fails the ones already
/// written by this run are removed.
pub fn run(config: &PipelineConfig) -> std::result::Result<RunReport, PipelineError> {
    config.validate().map_err(at(Stage::Config))?;
    match config.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| at(Stage::Config)(Error::Config(format!("threads: {e}"))))?
            .install(|| run_validated(config)),
        None => run_validated(config),
    }
}

fn run_validated(config: &PipelineConfig) -> std::result::Result<RunReport, PipelineError> {
    let mut report = RunReport::default();

    let t = Instant::now();
    let mut source = Source::open(&config.input).map_err(at(Stage::Ingest))?;
    let mut filter = filter_scenarios(&mut source, config.filters.clone());
    let (x, mut catalog, bin_note) = match &config.bins {
        Some(b) => {
            let mut bins = partition_events_by_attribute(&mut filter, b.attribute.clone(), b.binning);
            let (x, mut c) = build_incidence(&mut bins).map_err(|e| at(stream_stage(&e))(e))?;
            c.mark(bins.markers().iter().map(String::as_str));
            let note = format!(
                "{} bin events from `{}`, {} unbinned",
                bins.markers().len(),
                b.attribute,
                bins.unparseable()
            );
            (x, c, Some(note))
        }
        None => {
            let (x, c) = build_incidence(&mut filter).map_err(|e| at(stream_stage(&e))(e))?;
            (x, c, None)
        }
    };
    let filter_report = filter.report().clone();
    let elapsed = t.elapsed().as_secs_f64();
    let skipped = source.skipped();
    report.push(
        "ingest",
        "records",
        filter_report.input as u64,
        filter_report.input as u64,
        if skipped > 0 {
            format!("{skipped} triples with unmapped predicates skipped")
        } else {
            String::new()
        },
        elapsed,
    );
    let drops = filter_report
        .dropped
        .iter()
        .map(|(p, n)| format!("{p}: -{n}"))
        .chain((filter_report.unparseable > 0).then(|| format!("unparseable: -{}", filter_report.unparseable)))
        .collect::<Vec<_>>()
        .join(", ");
    report.push(
        "filter",
        "scenarios",
        filter_report.input as u64,
        filter_report.passed as u64,
        drops,
        0.0,
    );
    report.push(
        "incidence",
        "scenarios",
        filter_report.passed as u64,
        x.n_scenarios() as u64,
        format!(
            "M={} events, {} incidences{}",
            catalog.len(),
            x.nnz(),
            bin_note.map(|n| format!("; {n}")).unwrap_or_default()
        ),
        0.0,
    );
    report.filter = filter_report;

    let t = Instant::now();
    let before = catalog.len();
    let x = match &config.selection {
        Some(sel) => {
            let (x2, c2) = select_events(&x, &catalog, sel).map_err(at(Stage::Select))?;
            catalog = c2;
            x2
        }
        None => x,
    };
    report.push(
        "select",
        "events",
        before as u64,
        catalog.len() as u64,
        config
            .selection
            .as_ref()
            .map(|s| format!("{s:?}"))
            .unwrap_or_else(|| "none".into()),
        t.elapsed().as_secs_f64(),
    );

    let t = Instant::now();
    let analysis = analyze(&x, config.mode).map_err(at(Stage::Analyze))?;
    let adjacent = analysis.edges.iter().filter(|e| e.adjacent).count();
    report.push(
        "analyze",
        "pairs",
        analysis.edges.len() as u64,
        adjacent as u64,
        format!(
            "co-occurring pairs; {} mode, {} saturated event(s) excluded",
            config.mode.name(),
            analysis.saturated.len()
        ),
        t.elapsed().as_secs_f64(),
    );

    let t = Instant::now();
    let pruned = prune_edges(&analysis.edges, config.min_d).map_err(at(Stage::Prune))?;
    report.push(
        "prune",
        "edges",
        adjacent as u64,
        pruned.len() as u64,
        format!("min_d={}", config.min_d),
        t.elapsed().as_secs_f64(),
    );

    let t = Instant::now();
    let positions = match &config.layout {
        Some(l) => Some(compute_layout(catalog.len(), &pruned, l).map_err(at(Stage::Layout))?),
        None => None,
    };
    if let Some(l) = &config.layout {
        report.push(
            "layout",
            "nodes",
            catalog.len() as u64,
            catalog.len() as u64,
            format!("{} seed={}", l.algorithm, l.seed),
            t.elapsed().as_secs_f64(),
        );
    }

    let t = Instant::now();
    let meta = GraphMeta {
        n_scenarios: x.n_scenarios() as u64,
        n_events: catalog.len(),
        mode: config.mode.name().into(),
        alpha: config.mode.alpha(),
        min_d: config.min_d,
        layout: config.layout.as_ref().map(|l| l.algorithm.to_string()),
        seed: config.layout.as_ref().map(|l| l.seed),
        created: if config.deterministic {
            EPOCH_TIMESTAMP.into()
        } else {
            GraphMeta::timestamp_now()
        },
    };
    let mut graph = assemble(&catalog, &pruned, positions.as_ref(), meta).map_err(at(Stage::Export))?;
    if let Some(path) = &config.node_attributes {
        let attrs = read_node_attributes(path, config.input.ingest.field_delimiter)
            .map_err(at(Stage::Export))?;
        graph.set_node_attributes(&attrs);
    }

    let mut artifacts: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    if let Some(p) = &config.outputs.json {
        artifacts.push((p.clone(), graph.to_json()));
    }
    if let Some(p) = &config.outputs.graphml {
        artifacts.push((p.clone(), graph.to_graphml()));
    }
    if let Some(p) = &config.outputs.html {
        let assets = match &config.viewer_assets {
            Some(dir) => ViewerAssets::load(dir).map_err(at(Stage::Export))?,
            None => ViewerAssets::builtin(),
        };
        artifacts.push((p.clone(), graph.render_html(&assets).into_bytes()));
    }
    if let Some(p) = &config.outputs.edges {
        let mut buf = Vec::new();
        write_edge_table(&mut buf, &analysis.edges, &catalog).map_err(at(Stage::Export))?;
        artifacts.push((p.clone(), buf));
    }
    report.outputs = write_all_atomic(&artifacts).map_err(at(Stage::Export))?;
    report.push(
        "export",
        "files",
        artifacts.len() as u64,
        report.outputs.len() as u64,
        format!("{} nodes, {} edges", graph.nodes.len(), graph.edges.len()),
        t.elapsed().as_secs_f64(),
    );
    Ok(report)
}

fn compute_layout(
    m: usize,
    edges: &[crate::coincidence::EdgeStatistics],
    cfg: &LayoutConfig,
) -> Result<Positions> {
    let mut input = LayoutInput::new(m, edges.iter().map(|e| (e.i, e.j, e.haberman_d)).collect())
        .with_seed(cfg.seed);
    input.width = cfg.width;
    input.height = cfg.height;
    if m == 0 {
        return Ok(Positions(Vec::new()));
    }
    Ok(match cfg.algorithm {
        LayoutAlgorithm::Fr => {
            fruchterman_reingold(&input, cfg.iterations.unwrap_or(FR_DEFAULT_ITERATIONS))?
        }
        LayoutAlgorithm::Kk => {
            let d = ideal_distances(&input)?;
            kamada_kawai_distances(&d, cfg.iterations.unwrap_or(KK_DEFAULT_MAX_ITERS), KK_DEFAULT_TOL)
                .positions
                .fit_to_canvas(cfg.width, cfg.height)
        }
        LayoutAlgorithm::Mds => {
            let out = classical_mds(&ideal_distances(&input)?)?;
            if out.degenerate {
                log::warn!("all ideal distances are equal; the MDS embedding is not unique");
            }
            out.positions.fit_to_canvas(cfg.width, cfg.height)
        }
    })
}

fn read_node_attributes(path: &Path, delimiter: char) -> Result<HashMap<String, BTreeMap<String, String>>> {
    let mut reader = csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .from_path(path)
        .map_err(|e| Error::Config(format!("node_attributes `{}`: {e}", path.display())))?;
    let headers = reader
        .headers()
        .map_err(|e| Error::Config(format!("node_attributes: {e}")))?
        .clone();
    let mut out = HashMap::new();
    for row in reader.records() {
        let row = row.map_err(|e| Error::Record {
            line: e.position().map(|p| p.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let label = row.get(0).unwrap_or("").trim().to_owned();
        let attrs = headers
            .iter()
            .zip(row.iter())
            .skip(1)
            .filter(|(_, v)| !v.trim().is_empty())
            .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
            .collect();
        out.insert(label, attrs);
    }
    Ok(out)
}

/// Write each artifact through a temporary file in its target directory.
/// On failure, files already renamed into place are removed.
pub fn write_all_atomic(artifacts: &[(PathBuf, Vec<u8>)]) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (path, bytes) in artifacts {
        if let Err(e) = write_atomic(path, bytes) {
            for p in &written {
                let _ = std::fs::remove_file(p);
            }
            return Err(e);
        }
        written.push(path.clone());
    }
    Ok(written)
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyRow {
    pub label: String,
    pub frequency: u64,
    pub cumulative: u64,
    pub cumulative_fraction: f64,
}

/// Event frequencies in descending order, ties by label, with cumulative
/// occurrence mass.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct FrequencyTable {
    pub n_scenarios: u64,
    pub rows: Vec<FrequencyRow>,
}

impl FrequencyTable {
    pub fn from_records<I>(records: I) -> Result<Self>
    where
        I: IntoIterator<Item = Result<ScenarioRecord>>,
    {
        let mut counts: HashMap<String, u64> = HashMap::new();
        let mut n = 0u64;
        for r in records {
            let r = r?;
            n += 1;
            for e in r.events {
                *counts.entry(e).or_default() += 1;
            }
        }
        let mut pairs: Vec<(String, u64)> = counts.into_iter().collect();
        pairs.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let total: u64 = pairs.iter().map(|p| p.1).sum();
        let mut cum = 0;
        let rows = pairs
            .into_iter()
            .map(|(label, frequency)| {
                cum += frequency;
                FrequencyRow {
                    label,
                    frequency,
                    cumulative: cum,
                    cumulative_fraction: cum as f64 / total as f64,
                }
            })
            .collect();
        Ok(Self { n_scenarios: n, rows })
    }

    /// Tab-separated: `label frequency cumulative cumulative_fraction`.
    pub fn write_tsv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "label\tfrequency\tcumulative\tcumulative_fraction")?;
        for r in &self.rows {
            writeln!(
                out,
                "{}\t{}\t{}\t{:.6}",
                crate::incidence::escape_field(&r.label),
                r.frequency,
                r.cumulative,
                r.cumulative_fraction
            )?;
        }
        Ok(())
    }
}

/// Frequency table of the (filtered, binned) input of `config`. Outputs,
/// selection and analysis settings are ignored.
pub fn stats(config: &PipelineConfig) -> std::result::Result<FrequencyTable, PipelineError> {
    config.validate_input().map_err(at(Stage::Config))?;
    let mut source = Source::open(&config.input).map_err(at(Stage::Ingest))?;
    let filter = filter_scenarios(&mut source, config.filters.clone());
    let table = match &config.bins {
        Some(b) => FrequencyTable::from_records(partition_events_by_attribute(
            filter,
            b.attribute.clone(),
            b.binning,
        )),
        None => FrequencyTable::from_records(filter),
    };
    table.map_err(at(Stage::Ingest))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
        let p = dir.join(name);
        std::fs::write(&p, text).unwrap();
        p
    }

    fn base_config(dir: &Path) -> PipelineConfig {
        let input = write(
            dir,
            "in.csv",
            "id;subjects\nb1;A|B\nb2;A|B\nb3;C\nb4;C|D\nb5;D\n",
        );
        PipelineConfig {
            input: InputConfig {
                path: Some(input),
                format: InputFormat::Delimited,
                ingest: IngestConfig::delimited(["subjects"]),
            },
            ..PipelineConfig::default()
        }
    }

    #[test]
    fn requires_an_output() {
        let dir = tempfile::tempdir().unwrap();
        let err = run(&base_config(dir.path())).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("outputs"), "{err}");
    }

    #[test]
    fn missing_input_is_config_error() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(dir.path());
        cfg.input.path = Some(dir.path().join("nope.csv"));
        cfg.outputs.json = Some(dir.path().join("g.json"));
        assert_eq!(run(&cfg).unwrap_err().exit_code(), 2);
    }

    #[test]
    fn runtime_error_removes_nothing_and_exits_1() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(dir.path());
        write(dir.path(), "in.csv", "id;subjects\nb1;A\nb1;B\n");
        cfg.outputs.json = Some(dir.path().join("g.json"));
        let err = run(&cfg).unwrap_err();
        assert_eq!(err.stage, Stage::Ingest);
        assert_eq!(err.exit_code(), 1);
        assert!(!dir.path().join("g.json").exists());
    }

    #[test]
    fn failed_write_rolls_back() {
        let dir = tempfile::tempdir().unwrap();
        let ok = dir.path().join("a.json");
        let bad = dir.path().join("missing-dir").join("b.json");
        let res = write_all_atomic(&[(ok.clone(), b"{}".to_vec()), (bad, b"{}".to_vec())]);
        assert!(res.is_err());
        assert!(!ok.exists());
    }

    #[test]
    fn runs_and_reports() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = base_config(dir.path());
        cfg.outputs.json = Some(dir.path().join("g.json"));
        cfg.outputs.edges = Some(dir.path().join("edges.tsv"));
        cfg.deterministic = true;
        let report = run(&cfg).unwrap();
        let f = report.stage("filter").unwrap();
        assert_eq!((f.input, f.output), (5, 5));
        let graph = crate::CoincidenceGraph::from_json(&std::fs::read(dir.path().join("g.json")).unwrap()).unwrap();
        assert_eq!(graph.meta.created, EPOCH_TIMESTAMP);
        assert!(graph.nodes.iter().all(|n| n.x.is_none()));
        let text = report.to_string();
        assert!(text.contains("analyze"));
    }

    #[test]
    fn frequency_table_ties_and_mass() {
        let recs = vec![
            Ok(ScenarioRecord::new("1", ["b", "a"])),
            Ok(ScenarioRecord::new("2", ["a", "c"])),
            Ok(ScenarioRecord::new("3", ["b"])),
        ];
        let t = FrequencyTable::from_records(recs).unwrap();
        let got: Vec<(&str, u64, u64)> = t.rows.iter().map(|r| (r.label.as_str(), r.frequency, r.cumulative)).collect();
        assert_eq!(got, [("a", 2, 2), ("b", 2, 4), ("c", 1, 5)]);
        assert_eq!(t.rows[2].cumulative_fraction, 1.0);
        let empty = FrequencyTable::from_records(vec![Ok(ScenarioRecord::new("1", Vec::<String>::new()))]).unwrap();
        assert!(empty.rows.is_empty());
    }

    #[test]
    fn config_json_parses() {
        let cfg: PipelineConfig = serde_json::from_str(
            r#"{
                "input": {"path": "x.csv", "format": "delimited",
                          "ingest": {"event_columns": ["subjects"], "attribute_columns": ["year"]}},
                "filters": [{"compare": {"attribute": "year", "op": ">=", "value": 1960}}, "non_empty_events"],
                "bins": {"attribute": "year", "binning": "decade"},
                "selection": {"top_k": 6},
                "mode": {"kind": "sample", "alpha": 0.01},
                "layout": {"algorithm": "kk", "seed": 3},
                "outputs": {"json": "g.json"}
            }"#,
        )
        .unwrap();
        assert_eq!(cfg.selection, Some(EventSelection::TopK(6)));
        assert_eq!(cfg.mode, AnalysisMode::Sample { alpha: 0.01 });
        assert_eq!(cfg.layout.unwrap().algorithm, LayoutAlgorithm::Kk);
        assert_eq!(cfg.input.ingest.field_delimiter, ';');
        assert!(serde_json::from_str::<PipelineConfig>(r#"{"bogus": 1}"#).is_err());
    }
}
