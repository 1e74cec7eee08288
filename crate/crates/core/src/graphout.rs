//! The final coincidence graph and its serializations: graph JSON, GraphML,
//! and a single-file HTML page embedding a viewer script.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coincidence::EdgeStatistics;
use crate::error::{Error, Result};
use crate::incidence::EventCatalog;
use crate::layout::Positions;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphNode {
    pub id: u32,
    pub label: String,
    pub frequency: u64,
    pub marker: bool,
    pub attrs: BTreeMap<String, String>,
    pub x: Option<f64>,
    pub y: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphEdge {
    pub source: u32,
    pub target: u32,
    pub c: u64,
    pub expected: f64,
    pub e: f64,
    pub d: f64,
    pub p: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphMeta {
    pub n_scenarios: u64,
    pub n_events: usize,
    pub mode: String,
    pub alpha: Option<f64>,
    pub min_d: f64,
    pub layout: Option<String>,
    pub seed: Option<u64>,
    pub created: String,
}

/// Timestamp written when `--deterministic` is in effect.
pub const EPOCH_TIMESTAMP: &str = "1970-01-01T00:00:00Z";

impl GraphMeta {
    pub fn timestamp_now() -> String {
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoincidenceGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<GraphEdge>,
    pub meta: GraphMeta,
}

/// Build the graph from the reduced catalog and pruned edges.
///
/// Nodes follow catalog order (descending frequency) and isolated nodes are
/// kept. Edges are ordered by descending `d`, then by endpoint ids.
pub fn assemble(
    catalog: &EventCatalog,
    edges: &[EdgeStatistics],
    positions: Option<&Positions>,
    mut meta: GraphMeta,
) -> Result<CoincidenceGraph> {
    let m = catalog.len();
    if let Some(p) = positions {
        if p.len() != m {
            return Err(Error::Integrity(format!(
                "{} positions for {m} nodes",
                p.len()
            )));
        }
    }
    let nodes = catalog
        .entries()
        .iter()
        .enumerate()
        .map(|(id, e)| GraphNode {
            id: id as u32,
            label: e.label.clone(),
            frequency: e.frequency,
            marker: e.marker,
            attrs: BTreeMap::new(),
            x: positions.map(|p| p.0[id][0]),
            y: positions.map(|p| p.0[id][1]),
        })
        .collect();
    let mut out_edges = edges
        .iter()
        .map(|e| GraphEdge {
            source: e.i.min(e.j),
            target: e.i.max(e.j),
            c: e.c,
            expected: e.expected,
            e: e.pearson_e,
            d: e.haberman_d,
            p: e.p_value,
        })
        .collect::<Vec<_>>();
    out_edges.sort_by(|a, b| {
        b.d.total_cmp(&a.d)
            .then_with(|| (a.source, a.target).cmp(&(b.source, b.target)))
    });
    meta.n_events = m;
    let graph = CoincidenceGraph {
        nodes,
        edges: out_edges,
        meta,
    };
    graph.validate()?;
    Ok(graph)
}

impl CoincidenceGraph {
    /// Attach attributes to nodes by label. Unknown labels are ignored.
    pub fn set_node_attributes(&mut self, attrs: &HashMap<String, BTreeMap<String, String>>) {
        for n in &mut self.nodes {
            if let Some(a) = attrs.get(&n.label) {
                n.attrs.extend(a.iter().map(|(k, v)| (k.clone(), v.clone())));
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let mut ids = HashSet::new();
        for n in &self.nodes {
            if !ids.insert(n.id) {
                return Err(Error::Integrity(format!("duplicate node id {}", n.id)));
            }
            if n.frequency == 0 {
                return Err(Error::Integrity(format!("node `{}` has frequency 0", n.label)));
            }
            match (n.x, n.y) {
                (None, None) => {}
                (Some(x), Some(y)) if x.is_finite() && y.is_finite() => {}
                _ => {
                    return Err(Error::Integrity(format!(
                        "node `{}` has an invalid position",
                        n.label
                    )))
                }
            }
        }
        for e in &self.edges {
            if !ids.contains(&e.source) || !ids.contains(&e.target) {
                return Err(Error::Integrity(format!(
                    "edge ({}, {}) references an unknown node",
                    e.source, e.target
                )));
            }
            if e.source == e.target {
                return Err(Error::Integrity(format!("self-loop on node {}", e.source)));
            }
            if e.d.is_nan() || e.d <= 0.0 || !e.d.is_finite() {
                return Err(Error::Integrity(format!(
                    "edge ({}, {}) has non-positive residual {}",
                    e.source, e.target, e.d
                )));
            }
        }
        Ok(())
    }

    /// Pretty-printed graph JSON with a trailing newline.
    pub fn to_json(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("graph values are serializable");
        out.push(b'\n');
        out
    }

    /// Parse and validate graph JSON.
    pub fn from_json(bytes: &[u8]) -> Result<Self> {
        let graph: CoincidenceGraph = serde_json::from_slice(bytes)?;
        graph.validate()?;
        Ok(graph)
    }

    /// GraphML 1.0 document with undirected edges.
    pub fn to_graphml(&self) -> Vec<u8> {
        let attr_keys: BTreeSet<&str> = self
            .nodes
            .iter()
            .flat_map(|n| n.attrs.keys().map(String::as_str))
            .collect();
        let attr_ids: BTreeMap<&str, String> = attr_keys
            .iter()
            .enumerate()
            .map(|(k, name)| (*name, format!("attr{k}")))
            .collect();
        let has_pos = self.nodes.iter().any(|n| n.x.is_some());
        let has_p = self.edges.iter().any(|e| e.p.is_some());

        let mut s = String::new();
        s.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
        s.push_str(concat!(
            "<graphml xmlns=\"http://graphml.graphdrawing.org/xmlns\"",
            " xmlns:xsi=\"http://www.w3.org/2001/XMLSchema-instance\"",
            " xsi:schemaLocation=\"http://graphml.graphdrawing.org/xmlns",
            " http://graphml.graphdrawing.org/xmlns/1.0/graphml.xsd\">\n"
        ));
        let mut key = |id: &str, target: &str, name: &str, ty: &str| {
            let _ = writeln!(
                s,
                "  <key id=\"{}\" for=\"{target}\" attr.name=\"{}\" attr.type=\"{ty}\"/>",
                xml_escape(id),
                xml_escape(name)
            );
        };
        key("label", "node", "label", "string");
        key("frequency", "node", "frequency", "long");
        key("marker", "node", "marker", "boolean");
        if has_pos {
            key("x", "node", "x", "double");
            key("y", "node", "y", "double");
        }
        for (name, id) in &attr_ids {
            key(id, "node", name, "string");
        }
        key("c", "edge", "c", "long");
        key("expected", "edge", "expected", "double");
        key("e", "edge", "e", "double");
        key("d", "edge", "d", "double");
        if has_p {
            key("p", "edge", "p", "double");
        }
        s.push_str("  <graph id=\"G\" edgedefault=\"undirected\">\n");
        for n in &self.nodes {
            let _ = writeln!(s, "    <node id=\"n{}\">", n.id);
            data(&mut s, "label", &xml_escape(&n.label));
            data(&mut s, "frequency", &n.frequency.to_string());
            data(&mut s, "marker", &n.marker.to_string());
            if let (Some(x), Some(y)) = (n.x, n.y) {
                data(&mut s, "x", &x.to_string());
                data(&mut s, "y", &y.to_string());
            }
            for (k, v) in &n.attrs {
                data(&mut s, &attr_ids[k.as_str()], &xml_escape(v));
            }
            s.push_str("    </node>\n");
        }
        for (k, e) in self.edges.iter().enumerate() {
            let _ = writeln!(
                s,
                "    <edge id=\"e{k}\" source=\"n{}\" target=\"n{}\">",
                e.source, e.target
            );
            data(&mut s, "c", &e.c.to_string());
            data(&mut s, "expected", &e.expected.to_string());
            data(&mut s, "e", &e.e.to_string());
            data(&mut s, "d", &e.d.to_string());
            if let Some(p) = e.p {
                data(&mut s, "p", &p.to_string());
            }
            s.push_str("    </edge>\n");
        }
        s.push_str("  </graph>\n</graphml>\n");
        s.into_bytes()
    }

    /// Single self-contained HTML page: the graph JSON is embedded in a
    /// `<script type="application/json">` block next to the viewer script.
    pub fn render_html(&self, assets: &ViewerAssets) -> String {
        let json = String::from_utf8(self.to_json()).expect("JSON is UTF-8");
        let mut s = String::with_capacity(json.len() + assets.script.len() + 1024);
        s.push_str("<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n");
        s.push_str("<meta name=\"viewport\" content=\"width=device-width, initial-scale=1\">\n");
        s.push_str("<title>Coincidence network</title>\n");
        if let Some(css) = &assets.style {
            s.push_str("<style>\n");
            s.push_str(&css.replace("</style", "<\\/style"));
            s.push_str("\n</style>\n");
        }
        s.push_str("</head>\n<body>\n<div id=\"coinet-app\"></div>\n");
        s.push_str("<script type=\"application/json\" id=\"coinet-graph\">\n");
        s.push_str(&embed_json(&json));
        s.push_str("</script>\n<script>\n");
        s.push_str(&assets.script.replace("</script", "<\\/script"));
        s.push_str("\n</script>\n</body>\n</html>\n");
        s
    }
}

fn data(s: &mut String, key: &str, value: &str) {
    let _ = writeln!(s, "      <data key=\"{key}\">{value}</data>");
}

pub fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

/// `<` only occurs inside JSON strings, where `\u003c` is equivalent. Only
/// the sequences that could end or confuse a script block are rewritten.
fn embed_json(json: &str) -> String {
    json.replace("</", "\\u003c/").replace("<!--", "\\u003c!--")
}

/// Viewer script (and optional stylesheet) inlined by
/// [`CoincidenceGraph::render_html`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ViewerAssets {
    pub script: String,
    pub style: Option<String>,
}

const BUILTIN_VIEWER_JS: &str = include_str!("../assets/viewer.js");
const BUILTIN_VIEWER_CSS: &str = include_str!("../assets/viewer.css");

impl ViewerAssets {
    /// Minimal viewer shipped with the crate.
    pub fn builtin() -> Self {
        Self {
            script: BUILTIN_VIEWER_JS.to_owned(),
            style: Some(BUILTIN_VIEWER_CSS.to_owned()),
        }
    }

    /// Load `viewer.js` (required) and `viewer.css` (optional) from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let js = dir.join("viewer.js");
        if !js.is_file() {
            return Err(Error::MissingAssets(format!(
                "`{}` not found; build the viewer bundle and copy viewer.js (and optionally viewer.css) into {}",
                js.display(),
                dir.display()
            )));
        }
        let css = dir.join("viewer.css");
        Ok(Self {
            script: std::fs::read_to_string(js)?,
            style: if css.is_file() {
                Some(std::fs::read_to_string(css)?)
            } else {
                None
            },
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coincidence::{analyze, prune_edges, AnalysisMode};
    use crate::incidence::build_incidence;
    use crate::ingest::ScenarioRecord;

    fn meta() -> GraphMeta {
        GraphMeta {
            n_scenarios: 4,
            n_events: 0,
            mode: "population".into(),
            alpha: None,
            min_d: 0.0,
            layout: None,
            seed: None,
            created: EPOCH_TIMESTAMP.into(),
        }
    }

    fn fixture() -> CoincidenceGraph {
        let rows: [&[&str]; 4] = [&["A", "B"], &["A", "B"], &[], &[]];
        let (x, c) = build_incidence(
            rows.iter()
                .enumerate()
                .map(|(k, r)| Ok(ScenarioRecord::new(format!("s{k}"), r.iter().copied()))),
        )
        .unwrap();
        let a = analyze(&x, AnalysisMode::Population).unwrap();
        let edges = prune_edges(&a.edges, 0.0).unwrap();
        assemble(&c, &edges, None, meta()).unwrap()
    }

    #[test]
    fn assemble_fixture() {
        let g = fixture();
        assert_eq!(g.nodes.len(), 2);
        assert_eq!(g.edges.len(), 1);
        assert_eq!(g.edges[0].d, 2.0);
        assert_eq!(g.meta.n_events, 2);
    }

    #[test]
    fn rejects_unknown_endpoint() {
        let (_, c) = build_incidence(vec![Ok(ScenarioRecord::new("s", ["A"]))]).unwrap();
        let bad = EdgeStatistics {
            i: 0,
            j: 5,
            c: 1,
            expected: 0.5,
            pearson_e: 1.0,
            haberman_d: 1.0,
            p_value: None,
            adjacent: true,
        };
        assert!(matches!(
            assemble(&c, &[bad], None, meta()),
            Err(Error::Integrity(_))
        ));
    }

    #[test]
    fn json_key_order() {
        let g = fixture();
        let text = String::from_utf8(g.to_json()).unwrap();
        let order = ["\"nodes\"", "\"edges\"", "\"meta\""];
        let pos: Vec<usize> = order.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let node_keys = ["\"id\"", "\"label\"", "\"frequency\"", "\"marker\"", "\"attrs\"", "\"x\"", "\"y\""];
        let pos: Vec<usize> = node_keys.iter().map(|k| text.find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
        let edges_at = text.find("\"edges\"").unwrap();
        let edge_keys = ["\"source\"", "\"target\"", "\"c\"", "\"expected\"", "\"e\"", "\"d\"", "\"p\""];
        let pos: Vec<usize> = edge_keys.iter().map(|k| edges_at + text[edges_at..].find(k).unwrap()).collect();
        assert!(pos.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn empty_edges_serialize_as_empty_array() {
        let (_, c) = build_incidence(vec![Ok(ScenarioRecord::new("s", ["A"]))]).unwrap();
        let g = assemble(&c, &[], None, meta()).unwrap();
        let text = String::from_utf8(g.to_json()).unwrap();
        assert!(text.contains("\"edges\": []"), "{text}");
        assert_eq!(CoincidenceGraph::from_json(text.as_bytes()).unwrap(), g);
    }

    #[test]
    fn from_json_validates() {
        let mut g = fixture();
        g.edges[0].d = -1.0;
        let bytes = serde_json::to_vec(&g).unwrap();
        assert!(CoincidenceGraph::from_json(&bytes).is_err());
    }

    #[test]
    fn graphml_escapes_labels() {
        let mut g = fixture();
        g.nodes[0].label = "Law & <Order>".into();
        let xml = String::from_utf8(g.to_graphml()).unwrap();
        assert!(xml.contains("Law &amp; &lt;Order&gt;"));
        let doc = roxmltree::Document::parse(&xml).unwrap();
        let label = doc
            .descendants()
            .find(|n| n.attribute("key") == Some("label"))
            .unwrap();
        assert_eq!(label.text(), Some("Law & <Order>"));
    }

    #[test]
    fn html_embeds_json() {
        let g = fixture();
        let html = g.render_html(&ViewerAssets::builtin());
        let json = String::from_utf8(g.to_json()).unwrap();
        assert!(html.contains(&json));
        assert!(html.starts_with("<!DOCTYPE html>"));
    }

    #[test]
    fn html_neutralizes_script_end_in_labels() {
        let mut g = fixture();
        g.nodes[0].label = "</script><b>".into();
        let html = g.render_html(&ViewerAssets::builtin());
        assert_eq!(html.matches("</script>").count(), 2);
        let start = html.find("id=\"coinet-graph\">").unwrap() + "id=\"coinet-graph\">".len();
        let end = start + html[start..].find("</script>").unwrap();
        let parsed = CoincidenceGraph::from_json(html[start..end].as_bytes()).unwrap();
        assert_eq!(parsed.nodes[0].label, "</script><b>");
    }

    #[test]
    fn missing_assets_explain_vendoring() {
        let dir = tempfile::tempdir().unwrap();
        let err = ViewerAssets::load(dir.path()).unwrap_err();
        assert!(err.to_string().contains("viewer.js"), "{err}");
        std::fs::write(dir.path().join("viewer.js"), "console.log(1)").unwrap();
        let a = ViewerAssets::load(dir.path()).unwrap();
        assert_eq!(a.style, None);
    }
}
