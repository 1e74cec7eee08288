use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use coinet::incidence::{Binning, EventSelection};
use coinet::ingest::{PredicateRole, ScenarioPredicate, TriplesGrouping};
use coinet::layout::LayoutAlgorithm;
use coinet::pipeline::{self, BinConfig, InputFormat, LayoutConfig, PipelineConfig, DEFAULT_SEED};
use coinet::{AnalysisMode, Error};

#[derive(Parser)]
#[command(name = "coinet", version, about = "Coincidence networks from scenario/event data")]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the event frequency table with cumulative mass.
    Stats {
        #[command(flatten)]
        input: InputArgs,
        /// Write the table here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build the network and write the requested artifacts.
    Run(Box<RunArgs>),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Delimited,
    Ntriples,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum ModeArg {
    Population,
    Sample,
}

#[derive(Clone, Copy, ValueEnum)]
enum LayoutArg {
    Fr,
    Kk,
    Mds,
}

#[derive(Args)]
struct InputArgs {
    /// JSON config; flags given on the command line override it.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    /// Comma-separated event columns (delimited input).
    #[arg(long, value_delimiter = ',')]
    events: Vec<String>,
    /// Comma-separated attribute columns (delimited input).
    #[arg(long, value_delimiter = ',')]
    attributes: Vec<String>,
    #[arg(long)]
    delimiter: Option<char>,
    /// Separator for multi-valued cells.
    #[arg(long)]
    separator: Option<char>,
    /// Predicate mapping IRI=ROLE, ROLE one of `event`, `key`, `attr:NAME`.
    #[arg(long = "predicate")]
    predicates: Vec<String>,
    /// Use the last IRI segment as event label.
    #[arg(long)]
    iri_suffix: bool,
    /// Group triples in memory instead of requiring contiguous subjects.
    #[arg(long)]
    buffered: bool,
    /// Scenario filter: `nonempty`, `has:ATTR`, `event:A|B`, `ATTR>=NUM`.
    #[arg(long = "filter")]
    filters: Vec<String>,
    /// Add one event per decade of this numeric attribute.
    #[arg(long)]
    bin_decade: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    input: InputArgs,
    #[arg(long, group = "select")]
    top_k: Option<usize>,
    /// Keep the most frequent events covering this fraction of occurrences.
    #[arg(long, group = "select")]
    coverage: Option<f64>,
    #[arg(long, group = "select")]
    min_count: Option<u64>,
    /// Group event for grouped coverage selection (repeatable, needs --coverage).
    #[arg(long = "group", requires = "coverage")]
    groups: Vec<String>,
    #[arg(long, value_enum)]
    mode: Option<ModeArg>,
    /// Significance level for sample mode.
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    min_d: Option<f64>,
    #[arg(long, value_enum)]
    layout: Option<LayoutArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    iterations: Option<usize>,
    #[arg(long)]
    node_attributes: Option<PathBuf>,
    /// Directory with viewer.js and viewer.css for the HTML page.
    #[arg(long)]
    viewer_assets: Option<PathBuf>,
    #[arg(long)]
    out_json: Option<PathBuf>,
    #[arg(long)]
    out_graphml: Option<PathBuf>,
    #[arg(long)]
    out_html: Option<PathBuf>,
    #[arg(long)]
    out_edges: Option<PathBuf>,
    /// Fixed timestamp for byte-reproducible output.
    #[arg(long)]
    deterministic: bool,
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_role(s: &str) -> Result<PredicateRole, Error> {
    match s {
        "event" => Ok(PredicateRole::EventSource),
        "key" => Ok(PredicateRole::ScenarioKey),
        _ => match s.strip_prefix("attr:") {
            Some(name) if !name.is_empty() => Ok(PredicateRole::Attribute(name.into())),
            _ => Err(Error::Config(format!(
                "--predicate: unknown role `{s}` (expected event, key or attr:NAME)"
            ))),
        },
    }
}

impl InputArgs {
    fn config(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = match &self.config {
            Some(p) => PipelineConfig::from_file(p)?,
            None => PipelineConfig::default(),
        };
        let ingest = &mut cfg.input.ingest;
        if let Some(p) = &self.input {
            cfg.input.path = Some(p.clone());
        }
        if let Some(f) = self.format {
            cfg.input.format = match f {
                FormatArg::Delimited => InputFormat::Delimited,
                FormatArg::Ntriples => InputFormat::Ntriples,
            };
        }
        if !self.events.is_empty() {
            ingest.event_columns = self.events.clone();
        }
        if !self.attributes.is_empty() {
            ingest.attribute_columns = self.attributes.clone();
        }
        if let Some(d) = self.delimiter {
            ingest.field_delimiter = d;
        }
        if let Some(s) = self.separator {
            ingest.multi_value_separator = s;
        }
        for p in &self.predicates {
            let (iri, role) = p
                .rsplit_once('=')
                .ok_or_else(|| Error::Config(format!("--predicate `{p}`: expected IRI=ROLE")))?;
            ingest.predicate_map.insert(iri.to_owned(), parse_role(role)?);
        }
        if self.iri_suffix {
            ingest.iri_suffix_labels = true;
        }
        if self.buffered {
            ingest.triples_grouping = TriplesGrouping::Buffered;
        }
        for f in &self.filters {
            let pred: ScenarioPredicate = f
                .parse()
                .map_err(|e: Error| Error::Config(format!("--filter `{f}`: {e}")))?;
            cfg.filters.push(pred);
        }
        if let Some(attr) = &self.bin_decade {
            if !cfg.input.ingest.attribute_columns.contains(attr)
                && cfg.input.format == InputFormat::Delimited
            {
                cfg.input.ingest.attribute_columns.push(attr.clone());
            }
            cfg.bins = Some(BinConfig {
                attribute: attr.clone(),
                binning: Binning::Decade,
            });
        }
        Ok(cfg)
    }
}

impl RunArgs {
    fn config(&self) -> Result<PipelineConfig, Error> {
        let mut cfg = self.input.config()?;
        if let Some(k) = self.top_k {
            cfg.selection = Some(EventSelection::TopK(k));
        }
        if let Some(n) = self.min_count {
            cfg.selection = Some(EventSelection::MinCount(n));
        }
        if let Some(f) = self.coverage {
            cfg.selection = Some(if self.groups.is_empty() {
                EventSelection::CoverageFraction(f)
            } else {
                EventSelection::GroupedCoverage {
                    groups: self.groups.clone(),
                    fraction: f,
                }
            });
        }
        match (self.mode, self.alpha) {
            (Some(ModeArg::Population), Some(_)) => {
                return Err(Error::Config("--alpha only applies to --mode sample".into()))
            }
            (Some(ModeArg::Population), None) => cfg.mode = AnalysisMode::Population,
            (Some(ModeArg::Sample), a) => {
                cfg.mode = AnalysisMode::Sample {
                    alpha: a.or(cfg.mode.alpha()).unwrap_or(AnalysisMode::DEFAULT_ALPHA),
                }
            }
            (None, Some(a)) => match cfg.mode {
                AnalysisMode::Sample { .. } => cfg.mode = AnalysisMode::Sample { alpha: a },
                AnalysisMode::Population => {
                    return Err(Error::Config("--alpha requires --mode sample".into()))
                }
            },
            (None, None) => {}
        }
        if let Some(d) = self.min_d {
            cfg.min_d = d;
        }
        if self.layout.is_some() || self.seed.is_some() || self.iterations.is_some() {
            let l = cfg.layout.get_or_insert_with(LayoutConfig::default);
            if let Some(a) = self.layout {
                l.algorithm = match a {
                    LayoutArg::Fr => LayoutAlgorithm::Fr,
                    LayoutArg::Kk => LayoutAlgorithm::Kk,
                    LayoutArg::Mds => LayoutAlgorithm::Mds,
                };
            }
            l.seed = self.seed.unwrap_or(l.seed);
            if self.iterations.is_some() {
                l.iterations = self.iterations;
            }
        } else if cfg.layout.is_none() && (self.out_html.is_some() || cfg.outputs.html.is_some()) {
            // the viewer needs coordinates
            cfg.layout = Some(LayoutConfig {
                seed: DEFAULT_SEED,
                ..LayoutConfig::default()
            });
        }
        let set = |slot: &mut Option<PathBuf>, v: &Option<PathBuf>| {
            if v.is_some() {
                *slot = v.clone();
            }
        };
        set(&mut cfg.node_attributes, &self.node_attributes);
        set(&mut cfg.viewer_assets, &self.viewer_assets);
        set(&mut cfg.outputs.json, &self.out_json);
        set(&mut cfg.outputs.graphml, &self.out_graphml);
        set(&mut cfg.outputs.html, &self.out_html);
        set(&mut cfg.outputs.edges, &self.out_edges);
        cfg.deterministic |= self.deterministic;
        if self.threads.is_some() {
            cfg.threads = self.threads;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let code = match cli.command {
        Command::Stats { input, out } => stats(&input, out),
        Command::Run(args) => run(&args),
    };
    ExitCode::from(code)
}

fn stats(args: &InputArgs, out: Option<PathBuf>) -> u8 {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => return fail(2, &e),
    };
    let table = match pipeline::stats(&cfg) {
        Ok(t) => t,
        Err(e) => return fail(e.exit_code() as u8, &e),
    };
    let res = match out {
        Some(path) => {
            let mut buf = Vec::new();
            table
                .write_tsv(&mut buf)
                .and_then(|_| pipeline::write_all_atomic(&[(path, buf)]).map(|_| ()))
        }
        None => table.write_tsv(std::io::stdout().lock()),
    };
    match res {
        Ok(()) => 0,
        Err(e) => fail(1, &e),
    }
}

fn run(args: &RunArgs) -> u8 {
    let cfg = match args.config() {
        Ok(c) => c,
        Err(e) => return fail(2, &e),
    };
    match pipeline::run(&cfg) {
        Ok(report) => {
            let _ = write!(std::io::stdout().lock(), "{report}");
            0
        }
        Err(e) => fail(e.exit_code() as u8, &e),
    }
}

fn fail(code: u8, err: &dyn std::fmt::Display) -> u8 {
    eprintln!("coinet: error: {err}");
    code
}
