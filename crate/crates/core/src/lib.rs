//! Coincidence network analysis.
//!
//! Scenario records (books, articles, sessions...) carrying sets of event
//! labels are turned into a sparse binary incidence matrix, counted into a
//! coincidence matrix, scored with Pearson and Haberman adjusted residuals,
//! and reduced to a network of statistically coincident events. The network
//! can be laid out in the plane and exported as JSON, GraphML, or a
//! self-contained HTML page.
//!
//! The pipeline stages map onto modules:
//!
//! - [`ingest`]: delimited text and N-Triples parsing, scenario filters.
//! - [`incidence`]: incidence matrix, event catalog, event selection.
//! - [`coincidence`]: coincidence counts, residuals, adjacency, pruning.
//! - [`layout`]: Fruchterman-Reingold, Kamada-Kawai and classical MDS.
//! - [`graphout`]: graph assembly and serialization.
//! - [`pipeline`]: end-to-end runs driven by a JSON config.

pub mod coincidence;
pub mod error;
pub mod graphout;
pub mod incidence;
pub mod ingest;
pub mod layout;
pub mod normal;
pub mod pipeline;

pub use coincidence::{
    adjacency, analyze, coincide_in_probability, coincidence, expected_count, haberman_residual,
    pearson_residual, prune_edges, Analysis, AnalysisMode, CoincidenceMatrix, EdgeStatistics,
};
pub use error::{Error, Result};
pub use graphout::{CoincidenceGraph, GraphEdge, GraphMeta, GraphNode, ViewerAssets};
pub use incidence::{
    build_incidence, select_events, select_events_grouped, EventCatalog, EventSelection,
    IncidenceMatrix,
};
pub use ingest::{IngestConfig, ScenarioRecord};
pub use layout::{LayoutInput, Positions};
