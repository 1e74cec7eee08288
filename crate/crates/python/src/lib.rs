//! Python bindings for the `coinet` crate.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use coinet::coincidence::{self, AnalysisMode};
use coinet::graphout::{self, GraphMeta, ViewerAssets, EPOCH_TIMESTAMP};
use coinet::incidence::{self, EventSelection};
use coinet::ingest::{self, PredicateRole, TriplesGrouping};
use coinet::layout::{self, LayoutAlgorithm};
use coinet::pipeline::{self, PipelineConfig};
use coinet::{Error, EventCatalog, IngestConfig, LayoutInput};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        Error::Integrity(m) => PyRuntimeError::new_err(m),
        other => PyValueError::new_err(other.to_string()),
    }
}

fn parse_mode(mode: &str, alpha: Option<f64>) -> PyResult<AnalysisMode> {
    match (mode, alpha) {
        ("population", None) => Ok(AnalysisMode::Population),
        ("population", Some(_)) => Err(PyValueError::new_err("alpha only applies to sample mode")),
        ("sample", a) => AnalysisMode::sample(a.unwrap_or(AnalysisMode::DEFAULT_ALPHA)).map_err(py_err),
        (other, _) => Err(PyValueError::new_err(format!(
            "unknown mode `{other}` (expected population or sample)"
        ))),
    }
}

#[pyclass(name = "ScenarioRecord", from_py_object)]
#[derive(Clone)]
struct PyScenarioRecord {
    inner: ingest::ScenarioRecord,
}

#[pymethods]
impl PyScenarioRecord {
    #[new]
    #[pyo3(signature = (scenario_id, events, attributes = None))]
    fn new(scenario_id: String, events: Vec<String>, attributes: Option<BTreeMap<String, String>>) -> Self {
        let mut inner = ingest::ScenarioRecord::new(scenario_id, events);
        inner.attributes = attributes.unwrap_or_default();
        Self { inner }
    }

    #[getter]
    fn scenario_id(&self) -> String {
        self.inner.scenario_id.clone()
    }

    /// Sorted, deduplicated event labels.
    #[getter]
    fn events(&self) -> Vec<String> {
        self.inner.events.iter().cloned().collect()
    }

    #[getter]
    fn attributes(&self) -> BTreeMap<String, String> {
        self.inner.attributes.clone()
    }

    fn __repr__(&self) -> String {
        format!(
            "ScenarioRecord({:?}, events={:?})",
            self.inner.scenario_id, self.inner.events
        )
    }
}

fn wrap_records<I>(it: I) -> PyResult<Vec<PyScenarioRecord>>
where
    I: Iterator<Item = coinet::Result<ingest::ScenarioRecord>>,
{
    it.map(|r| r.map(|inner| PyScenarioRecord { inner }).map_err(py_err))
        .collect()
}

/// Parse delimited text with a header row; the first column is the id.
#[pyfunction]
#[pyo3(signature = (text, event_columns, attribute_columns = Vec::new(), delimiter = ';', separator = '|'))]
fn parse_delimited(
    text: &str,
    event_columns: Vec<String>,
    attribute_columns: Vec<String>,
    delimiter: char,
    separator: char,
) -> PyResult<Vec<PyScenarioRecord>> {
    let cfg = IngestConfig {
        field_delimiter: delimiter,
        multi_value_separator: separator,
        event_columns,
        attribute_columns,
        ..IngestConfig::default()
    };
    wrap_records(ingest::parse_delimited(text.as_bytes(), &cfg).map_err(py_err)?)
}

/// Parse N-Triples. `predicates` maps predicate IRIs to `event`, `key` or
/// `attr:NAME`.
#[pyfunction]
#[pyo3(signature = (text, predicates, iri_suffix = false, buffered = true))]
fn parse_ntriples(
    text: &str,
    predicates: BTreeMap<String, String>,
    iri_suffix: bool,
    buffered: bool,
) -> PyResult<Vec<PyScenarioRecord>> {
    let mut cfg = IngestConfig {
        iri_suffix_labels: iri_suffix,
        triples_grouping: if buffered {
            TriplesGrouping::Buffered
        } else {
            TriplesGrouping::Contiguous
        },
        ..IngestConfig::default()
    };
    for (iri, role) in predicates {
        let role = match role.as_str() {
            "event" => PredicateRole::EventSource,
            "key" => PredicateRole::ScenarioKey,
            r => match r.strip_prefix("attr:") {
                Some(name) => PredicateRole::Attribute(name.into()),
                None => return Err(PyValueError::new_err(format!("unknown predicate role `{r}`"))),
            },
        };
        cfg.predicate_map.insert(iri, role);
    }
    wrap_records(ingest::parse_ntriples(text.as_bytes(), &cfg).map_err(py_err)?)
}

#[pyclass(name = "EdgeStatistics", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyEdgeStatistics {
    inner: coincidence::EdgeStatistics,
}

#[pymethods]
impl PyEdgeStatistics {
    #[getter]
    fn i(&self) -> u32 {
        self.inner.i
    }
    #[getter]
    fn j(&self) -> u32 {
        self.inner.j
    }
    #[getter]
    fn c(&self) -> u64 {
        self.inner.c
    }
    #[getter]
    fn expected(&self) -> f64 {
        self.inner.expected
    }
    #[getter]
    fn e(&self) -> f64 {
        self.inner.pearson_e
    }
    #[getter]
    fn d(&self) -> f64 {
        self.inner.haberman_d
    }
    #[getter]
    fn p(&self) -> Option<f64> {
        self.inner.p_value
    }
    #[getter]
    fn adjacent(&self) -> bool {
        self.inner.adjacent
    }

    fn __repr__(&self) -> String {
        let s = &self.inner;
        format!(
            "EdgeStatistics(i={}, j={}, c={}, d={:.4}, adjacent={})",
            s.i, s.j, s.c, s.haberman_d, s.adjacent
        )
    }
}

/// Sparse scenario-by-event matrix together with its event catalog.
#[pyclass(name = "IncidenceMatrix", frozen, skip_from_py_object)]
struct PyIncidenceMatrix {
    x: incidence::IncidenceMatrix,
    catalog: EventCatalog,
}

#[pymethods]
impl PyIncidenceMatrix {
    #[staticmethod]
    fn from_records(records: Vec<PyScenarioRecord>) -> PyResult<Self> {
        let (x, catalog) =
            incidence::build_incidence(records.into_iter().map(|r| Ok(r.inner))).map_err(py_err)?;
        Ok(Self { x, catalog })
    }

    #[getter]
    fn n_scenarios(&self) -> usize {
        self.x.n_scenarios()
    }
    #[getter]
    fn n_events(&self) -> usize {
        self.x.n_events()
    }
    #[getter]
    fn nnz(&self) -> usize {
        self.x.nnz()
    }

    /// Event labels by id (descending frequency, ties by label).
    #[getter]
    fn labels(&self) -> Vec<String> {
        self.catalog.entries().iter().map(|e| e.label.clone()).collect()
    }

    #[getter]
    fn frequencies(&self) -> Vec<u64> {
        self.catalog.entries().iter().map(|e| e.frequency).collect()
    }

    fn rows(&self) -> Vec<Vec<u32>> {
        self.x.rows().map(<[u32]>::to_vec).collect()
    }

    /// Keep a subset of events. Exactly one criterion must be given;
    /// `groups` turns `coverage` into grouped coverage.
    #[pyo3(signature = (*, top_k = None, coverage = None, min_count = None, top_fraction = None, groups = None))]
    fn select(
        &self,
        top_k: Option<usize>,
        coverage: Option<f64>,
        min_count: Option<u64>,
        top_fraction: Option<f64>,
        groups: Option<Vec<String>>,
    ) -> PyResult<Self> {
        let given = [top_k.is_some(), coverage.is_some(), min_count.is_some(), top_fraction.is_some()]
            .iter()
            .filter(|&&b| b)
            .count();
        if given != 1 {
            return Err(PyValueError::new_err("give exactly one selection criterion"));
        }
        let sel = match (top_k, coverage, min_count, top_fraction, groups) {
            (_, Some(f), _, _, Some(groups)) => EventSelection::GroupedCoverage { groups, fraction: f },
            (_, _, _, _, Some(_)) => return Err(PyValueError::new_err("groups require coverage")),
            (Some(k), ..) => EventSelection::TopK(k),
            (_, Some(f), ..) => EventSelection::CoverageFraction(f),
            (_, _, Some(n), ..) => EventSelection::MinCount(n),
            (_, _, _, Some(f), _) => EventSelection::TopFraction(f),
            _ => unreachable!(),
        };
        let (x, catalog) = incidence::select_events(&self.x, &self.catalog, &sel).map_err(py_err)?;
        Ok(Self { x, catalog })
    }

    /// Dense coincidence matrix XᵀX.
    fn coincidence(&self) -> Vec<Vec<u64>> {
        coincidence::coincidence(&self.x).to_dense()
    }

    /// Statistics for every co-occurring pair.
    #[pyo3(signature = (mode = "population", alpha = None))]
    fn analyze(&self, py: Python<'_>, mode: &str, alpha: Option<f64>) -> PyResult<Vec<PyEdgeStatistics>> {
        let mode = parse_mode(mode, alpha)?;
        let analysis = py
            .detach(|| coincidence::analyze(&self.x, mode))
            .map_err(py_err)?;
        Ok(analysis
            .edges
            .into_iter()
            .map(|inner| PyEdgeStatistics { inner })
            .collect())
    }

    /// Build the network: analyze, prune, optionally lay out, assemble.
    #[pyo3(signature = (mode = "population", alpha = None, min_d = 0.0, layout = None, seed = 42))]
    fn graph(
        &self,
        py: Python<'_>,
        mode: &str,
        alpha: Option<f64>,
        min_d: f64,
        layout: Option<&str>,
        seed: u64,
    ) -> PyResult<PyCoincidenceGraph> {
        let mode = parse_mode(mode, alpha)?;
        let algorithm = layout
            .map(|l| l.parse::<LayoutAlgorithm>())
            .transpose()
            .map_err(py_err)?;
        let inner = py
            .detach(|| -> coinet::Result<_> {
                let analysis = coincidence::analyze(&self.x, mode)?;
                let pruned = coincidence::prune_edges(&analysis.edges, min_d)?;
                let positions = match algorithm {
                    Some(a) => Some(run_layout(
                        self.catalog.len(),
                        pruned.iter().map(|e| (e.i, e.j, e.haberman_d)).collect(),
                        a,
                        seed,
                        None,
                    )?),
                    None => None,
                };
                let meta = GraphMeta {
                    n_scenarios: self.x.n_scenarios() as u64,
                    n_events: self.catalog.len(),
                    mode: mode.name().into(),
                    alpha: mode.alpha(),
                    min_d,
                    layout: algorithm.map(|a| a.to_string()),
                    seed: algorithm.map(|_| seed),
                    created: EPOCH_TIMESTAMP.into(),
                };
                graphout::assemble(&self.catalog, &pruned, positions.as_ref(), meta)
            })
            .map_err(py_err)?;
        Ok(PyCoincidenceGraph { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "IncidenceMatrix(n_scenarios={}, n_events={}, nnz={})",
            self.x.n_scenarios(),
            self.x.n_events(),
            self.x.nnz()
        )
    }
}

fn run_layout(
    n: usize,
    edges: Vec<(u32, u32, f64)>,
    algorithm: LayoutAlgorithm,
    seed: u64,
    iterations: Option<usize>,
) -> coinet::Result<coinet::Positions> {
    if n == 0 {
        return Ok(coinet::Positions(Vec::new()));
    }
    let input = LayoutInput::new(n, edges).with_seed(seed);
    Ok(match algorithm {
        LayoutAlgorithm::Fr => {
            layout::fruchterman_reingold(&input, iterations.unwrap_or(layout::FR_DEFAULT_ITERATIONS))?
        }
        LayoutAlgorithm::Kk => layout::kamada_kawai(
            &input,
            iterations.unwrap_or(layout::KK_DEFAULT_MAX_ITERS),
            layout::KK_DEFAULT_TOL,
        )?
        .positions
        .fit_to_canvas(1.0, 1.0),
        LayoutAlgorithm::Mds => layout::mds(&input)?.positions.fit_to_canvas(1.0, 1.0),
    })
}

#[pyclass(name = "CoincidenceGraph", frozen, skip_from_py_object)]
struct PyCoincidenceGraph {
    inner: graphout::CoincidenceGraph,
}

#[pymethods]
impl PyCoincidenceGraph {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = graphout::CoincidenceGraph::from_json(text.as_bytes()).map_err(py_err)?;
        Ok(Self { inner })
    }

    fn to_json(&self) -> String {
        String::from_utf8(self.inner.to_json()).expect("JSON is UTF-8")
    }

    fn to_graphml(&self) -> String {
        String::from_utf8(self.inner.to_graphml()).expect("GraphML is UTF-8")
    }

    /// Self-contained HTML page; `assets_dir` overrides the built-in viewer.
    #[pyo3(signature = (assets_dir = None))]
    fn render_html(&self, assets_dir: Option<PathBuf>) -> PyResult<String> {
        let assets = match assets_dir {
            Some(d) => ViewerAssets::load(&d).map_err(py_err)?,
            None => ViewerAssets::builtin(),
        };
        Ok(self.inner.render_html(&assets))
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.nodes.iter().map(|n| n.label.clone()).collect()
    }

    /// `(source, target, d)` per edge, strongest first.
    #[getter]
    fn edges(&self) -> Vec<(u32, u32, f64)> {
        self.inner.edges.iter().map(|e| (e.source, e.target, e.d)).collect()
    }

    fn __len__(&self) -> usize {
        self.inner.nodes.len()
    }
}

#[pyfunction]
fn expected_count(c_ii: u64, c_jj: u64, n: u64) -> PyResult<f64> {
    coincidence::expected_count(c_ii, c_jj, n).map_err(py_err)
}

#[pyfunction]
fn coincide_in_probability(c_ij: u64, c_ii: u64, c_jj: u64, n: u64) -> PyResult<bool> {
    coincidence::coincide_in_probability(c_ij, c_ii, c_jj, n).map_err(py_err)
}

#[pyfunction]
fn pearson_residual(c_ij: u64, c_ii: u64, c_jj: u64, n: u64) -> PyResult<f64> {
    coincidence::pearson_residual(c_ij, c_ii, c_jj, n).map_err(py_err)
}

#[pyfunction]
fn haberman_residual(e_ij: f64, c_ii: u64, c_jj: u64, n: u64) -> PyResult<f64> {
    coincidence::haberman_residual(e_ij, c_ii, c_jj, n).map_err(py_err)
}

/// Node positions for a weighted edge list; `algorithm` is fr, kk or mds.
#[pyfunction]
#[pyo3(signature = (n_nodes, edges, algorithm = "fr", seed = 0, iterations = None))]
fn layout_positions(
    n_nodes: usize,
    edges: Vec<(u32, u32, f64)>,
    algorithm: &str,
    seed: u64,
    iterations: Option<usize>,
) -> PyResult<Vec<(f64, f64)>> {
    let algorithm: LayoutAlgorithm = algorithm.parse().map_err(py_err)?;
    let pos = run_layout(n_nodes, edges, algorithm, seed, iterations).map_err(py_err)?;
    Ok(pos.0.into_iter().map(|p| (p[0], p[1])).collect())
}

/// Run a pipeline from a JSON config string. Relative paths resolve against
/// `base_dir`. Returns the run report as text.
#[pyfunction]
#[pyo3(signature = (config_json, base_dir = None))]
fn run_pipeline(py: Python<'_>, config_json: &str, base_dir: Option<PathBuf>) -> PyResult<String> {
    let mut cfg: PipelineConfig = serde_json::from_str(config_json)
        .map_err(|e| PyValueError::new_err(format!("config: {e}")))?;
    if let Some(dir) = base_dir {
        cfg.resolve_paths(&dir);
    }
    let report = py.detach(|| pipeline::run(&cfg)).map_err(|e| {
        if e.exit_code() == 2 {
            PyValueError::new_err(e.to_string())
        } else {
            PyRuntimeError::new_err(e.to_string())
        }
    })?;
    Ok(report.to_string())
}

#[pymodule]
#[pyo3(name = "coinet")]
fn coinet_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenarioRecord>()?;
    m.add_class::<PyIncidenceMatrix>()?;
    m.add_class::<PyEdgeStatistics>()?;
    m.add_class::<PyCoincidenceGraph>()?;
    m.add_function(wrap_pyfunction!(parse_delimited, m)?)?;
    m.add_function(wrap_pyfunction!(parse_ntriples, m)?)?;
    m.add_function(wrap_pyfunction!(expected_count, m)?)?;
    m.add_function(wrap_pyfunction!(coincide_in_probability, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_residual, m)?)?;
    m.add_function(wrap_pyfunction!(haberman_residual, m)?)?;
    m.add_function(wrap_pyfunction!(layout_positions, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
