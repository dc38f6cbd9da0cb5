//! `.df.json` documents.
//!
//! ```json
//! {
//!   "name": "pipeline",
//!   "actors": [
//!     { "id": "a", "kind": "identity", "params": { "stages": 2 },
//!       "inputs": [{ "name": "in", "width_bits": 128 }],
//!       "outputs": [{ "name": "out", "width_bits": 128 }] }
//!   ],
//!   "edges": [{ "src": "a.out", "dst": "b.in", "capacity": 4 }],
//!   "inputs": [{ "name": "block", "port": "a.in" }],
//!   "outputs": [{ "name": "cipher", "port": "b.out" }]
//! }
//! ```
//!
//! Merged graphs add `max_threads`, `configs` and `sboxes`; switching boxes
//! are described only in `sboxes` and never appear under `actors`.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composer::{ConfigEntry, MergedGraph, SBoxKind, SBoxSpec, JOIN_KIND, SPLIT_KIND};
use crate::graph::{
    validate_graph, ActorSpec, BoundaryPort, DataflowGraph, EdgeSpec, Endpoint, Params, PortSpec,
    Violation, DEFAULT_CAPACITY,
};
use crate::token::ConfigId;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("schema error: {0}")]
    Schema(String),
    #[error("validation failed: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    Validation(Vec<Violation>),
    #[error("invalid merged graph: {}", .0.join("; "))]
    InvalidMerged(Vec<String>),
    #[error("expected a {expected} graph document")]
    WrongKind { expected: &'static str },
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PortDoc {
    name: String,
    width_bits: u32,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ActorDoc {
    id: String,
    kind: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    params: Params,
    #[serde(default)]
    inputs: Vec<PortDoc>,
    #[serde(default)]
    outputs: Vec<PortDoc>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EdgeDoc {
    src: String,
    dst: String,
    #[serde(default = "default_capacity")]
    capacity: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryDoc {
    name: String,
    port: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    capacity: Option<usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigDoc {
    id: ConfigId,
    name: String,
    actors: Vec<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SBoxDoc {
    id: String,
    kind: String,
    width_bits: u32,
    ports: usize,
    /// Configuration id (as a decimal string) to port index.
    routes: BTreeMap<String, usize>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GraphDoc {
    name: String,
    actors: Vec<ActorDoc>,
    #[serde(default)]
    edges: Vec<EdgeDoc>,
    #[serde(default)]
    inputs: Vec<BoundaryDoc>,
    #[serde(default)]
    outputs: Vec<BoundaryDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_threads: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    configs: Option<Vec<ConfigDoc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sboxes: Option<Vec<SBoxDoc>>,
}

fn default_capacity() -> usize {
    DEFAULT_CAPACITY
}

/// Either kind of graph document.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Document {
    Single(DataflowGraph),
    Merged(MergedGraph),
}

impl Document {
    /// The executable network: the graph itself, or a merged graph's base.
    pub fn graph(&self) -> &DataflowGraph {
        match self {
            Document::Single(g) => g,
            Document::Merged(m) => &m.base,
        }
    }
}

fn endpoint(text: &str, what: &str) -> Result<Endpoint, FormatError> {
    Endpoint::parse(text).ok_or_else(|| {
        FormatError::Schema(format!(
            "{what} {text:?} is not of the form \"actorId.portName\""
        ))
    })
}

fn ports(list: Vec<PortDoc>) -> Vec<PortSpec> {
    list.into_iter()
        .map(|p| PortSpec::new(p.name, p.width_bits))
        .collect()
}

/// Parses any `.df.json` document, validating it.
pub fn parse_document(text: &str) -> Result<Document, FormatError> {
    let doc: GraphDoc =
        serde_json::from_str(text).map_err(|e| FormatError::Schema(e.to_string()))?;

    let mut g = DataflowGraph::new(doc.name);
    for a in doc.actors {
        if a.kind == SPLIT_KIND || a.kind == JOIN_KIND {
            return Err(FormatError::Schema(format!(
                "actor {} uses reserved kind {}; switching boxes belong under \"sboxes\"",
                a.id, a.kind
            )));
        }
        g.actors.push(ActorSpec {
            id: a.id,
            kind: a.kind,
            params: a.params,
            inputs: ports(a.inputs),
            outputs: ports(a.outputs),
        });
    }
    for e in doc.edges {
        g.edges.push(
            EdgeSpec::new(endpoint(&e.src, "edge src")?, endpoint(&e.dst, "edge dst")?)
                .with_capacity(e.capacity),
        );
    }
    for b in doc.inputs {
        let mut port = BoundaryPort::new(b.name, endpoint(&b.port, "input port")?);
        port.capacity = b.capacity.unwrap_or(DEFAULT_CAPACITY);
        g.inputs.push(port);
    }
    for b in doc.outputs {
        if b.capacity.is_some() {
            return Err(FormatError::Schema(format!(
                "output {} cannot declare a capacity",
                b.name
            )));
        }
        g.outputs
            .push(BoundaryPort::new(b.name, endpoint(&b.port, "output port")?));
    }

    let merged = doc.configs.is_some() || doc.sboxes.is_some() || doc.max_threads.is_some();
    if !merged {
        let violations = validate_graph(&g);
        if !violations.is_empty() {
            return Err(FormatError::Validation(violations));
        }
        return Ok(Document::Single(g));
    }

    let (Some(configs), Some(max_threads)) = (doc.configs, doc.max_threads) else {
        return Err(FormatError::Schema(
            "merged graph needs both \"configs\" and \"max_threads\"".into(),
        ));
    };
    let mut sboxes = Vec::new();
    for sb in doc.sboxes.unwrap_or_default() {
        let kind = SBoxKind::parse(&sb.kind).ok_or_else(|| {
            FormatError::Schema(format!(
                "sbox {} has kind {:?}; expected \"split\" or \"join\"",
                sb.id, sb.kind
            ))
        })?;
        let mut routes = BTreeMap::new();
        for (k, v) in sb.routes {
            let cfg: ConfigId = k.parse().map_err(|_| {
                FormatError::Schema(format!("sbox {} route key {k:?} is not a config id", sb.id))
            })?;
            routes.insert(cfg, v);
        }
        let spec = SBoxSpec {
            id: sb.id,
            kind,
            width_bits: sb.width_bits,
            ports: sb.ports,
            routes,
        };
        g.actors.push(spec.actor_spec());
        sboxes.push(spec);
    }
    let violations = validate_graph(&g);
    if !violations.is_empty() {
        return Err(FormatError::Validation(violations));
    }
    let m = MergedGraph {
        base: g,
        configs: configs
            .into_iter()
            .map(|c| ConfigEntry {
                id: c.id,
                name: c.name,
                actors: c.actors.into_iter().collect::<BTreeSet<_>>(),
            })
            .collect(),
        sboxes,
        max_threads,
    };
    let problems = m.validate();
    if !problems.is_empty() {
        return Err(FormatError::InvalidMerged(problems));
    }
    Ok(Document::Merged(m))
}

/// Parses a single-application graph document.
pub fn parse_graph(text: &str) -> Result<DataflowGraph, FormatError> {
    match parse_document(text)? {
        Document::Single(g) => Ok(g),
        Document::Merged(_) => Err(FormatError::WrongKind { expected: "single" }),
    }
}

pub fn parse_merged(text: &str) -> Result<MergedGraph, FormatError> {
    match parse_document(text)? {
        Document::Merged(m) => Ok(m),
        Document::Single(_) => Err(FormatError::WrongKind { expected: "merged" }),
    }
}

fn graph_doc(g: &DataflowGraph, skip_sboxes: bool) -> GraphDoc {
    let port_docs = |ps: &[PortSpec]| {
        ps.iter()
            .map(|p| PortDoc {
                name: p.name.clone(),
                width_bits: p.width_bits,
            })
            .collect()
    };
    GraphDoc {
        name: g.name.clone(),
        actors: g
            .actors
            .iter()
            .filter(|a| !(skip_sboxes && (a.kind == SPLIT_KIND || a.kind == JOIN_KIND)))
            .map(|a| ActorDoc {
                id: a.id.clone(),
                kind: a.kind.clone(),
                params: a.params.clone(),
                inputs: port_docs(&a.inputs),
                outputs: port_docs(&a.outputs),
            })
            .collect(),
        edges: g
            .edges
            .iter()
            .map(|e| EdgeDoc {
                src: e.src.to_string(),
                dst: e.dst.to_string(),
                capacity: e.capacity,
            })
            .collect(),
        inputs: g
            .inputs
            .iter()
            .map(|b| BoundaryDoc {
                name: b.name.clone(),
                port: b.port.to_string(),
                capacity: (b.capacity != DEFAULT_CAPACITY).then_some(b.capacity),
            })
            .collect(),
        outputs: g
            .outputs
            .iter()
            .map(|b| BoundaryDoc {
                name: b.name.clone(),
                port: b.port.to_string(),
                capacity: None,
            })
            .collect(),
        max_threads: None,
        configs: None,
        sboxes: None,
    }
}

fn to_text(doc: &GraphDoc) -> String {
    let mut s = serde_json::to_string_pretty(doc).expect("graph documents always serialize");
    s.push('\n');
    s
}

/// Serializes a graph; `parse_graph` of the result is structurally equal.
pub fn serialize_graph(g: &DataflowGraph) -> String {
    to_text(&graph_doc(g, false))
}

pub fn serialize_merged(m: &MergedGraph) -> String {
    let mut doc = graph_doc(&m.base, true);
    doc.max_threads = Some(m.max_threads);
    doc.configs = Some(
        m.configs
            .iter()
            .map(|c| ConfigDoc {
                id: c.id,
                name: c.name.clone(),
                actors: c.actors.iter().cloned().collect(),
            })
            .collect(),
    );
    doc.sboxes = Some(
        m.sboxes
            .iter()
            .map(|sb| SBoxDoc {
                id: sb.id.clone(),
                kind: sb.kind.as_str().to_string(),
                width_bits: sb.width_bits,
                ports: sb.ports,
                routes: sb.routes.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
            })
            .collect(),
    );
    to_text(&doc)
}

pub fn serialize_document(doc: &Document) -> String {
    match doc {
        Document::Single(g) => serialize_graph(g),
        Document::Merged(m) => serialize_merged(m),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Rule;

    const MINIMAL: &str = r#"{
        "name": "one",
        "actors": [{ "id": "a", "kind": "identity" }]
    }"#;

    #[test]
    fn minimal_document() {
        let g = parse_graph(MINIMAL).unwrap();
        assert_eq!(g.actors.len(), 1);
        assert!(g.edges.is_empty());
        let back = parse_graph(&serialize_graph(&g)).unwrap();
        assert!(back.structurally_equal(&g));
    }

    #[test]
    fn capacity_defaults_to_four() {
        let text = r#"{
            "name": "two",
            "actors": [
              { "id": "a", "kind": "identity", "outputs": [{ "name": "out", "width_bits": 8 }] },
              { "id": "b", "kind": "identity", "inputs": [{ "name": "in", "width_bits": 8 }] }
            ],
            "edges": [{ "src": "a.out", "dst": "b.in" }]
        }"#;
        let g = parse_graph(text).unwrap();
        assert_eq!(g.edges[0].capacity, 4);
    }

    #[test]
    fn absent_actor_is_named() {
        let text = r#"{
            "name": "bad",
            "actors": [{ "id": "a", "kind": "identity", "inputs": [{ "name": "in", "width_bits": 8 }] }],
            "edges": [{ "src": "X.out", "dst": "a.in" }]
        }"#;
        match parse_graph(text) {
            Err(FormatError::Validation(v)) => {
                assert_eq!(v[0].rule, Rule::DanglingEdge);
                assert!(v[0].message.contains('X'));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(parse_graph("{"), Err(FormatError::Schema(_))));
        assert!(matches!(
            parse_graph(r#"{"name":"x","actors":[],"bogus":1}"#),
            Err(FormatError::Schema(_))
        ));
        assert!(matches!(
            parse_graph(r#"{"name":"x","actors":[],"edges":[{"src":"a","dst":"b.c"}]}"#),
            Err(FormatError::Schema(_))
        ));
        assert!(matches!(
            parse_graph(r#"{"name":"x","actors":[{"id":"s","kind":"sbox_split"}]}"#),
            Err(FormatError::Schema(_))
        ));
        assert!(matches!(
            parse_graph(r#"{"name":"x","actors":[],"configs":[]}"#),
            Err(FormatError::Schema(_))
        ));
    }

    #[test]
    fn params_accept_strings_and_ints() {
        let text = r#"{"name":"p","actors":[{"id":"a","kind":"k","params":{"n":3,"s":"aes128"}}]}"#;
        let g = parse_graph(text).unwrap();
        assert_eq!(g.actors[0].int_param("n"), Some(3));
        assert_eq!(g.actors[0].str_param("s"), Some("aes128"));
    }

    #[test]
    fn merged_document_checks_routes() {
        let text = r#"{
            "name": "m", "max_threads": 2,
            "actors": [
              { "id": "a", "kind": "identity", "outputs": [{ "name": "out", "width_bits": 8 }] },
              { "id": "b", "kind": "identity", "inputs": [{ "name": "in", "width_bits": 8 }] },
              { "id": "c", "kind": "identity", "inputs": [{ "name": "in", "width_bits": 8 }] }
            ],
            "edges": [
              { "src": "a.out", "dst": "sb.in" },
              { "src": "sb.out0", "dst": "b.in" },
              { "src": "sb.out1", "dst": "c.in" }
            ],
            "configs": [
              { "id": 0, "name": "x", "actors": ["a", "b"] },
              { "id": 1, "name": "y", "actors": ["a", "c"] }
            ],
            "sboxes": [{ "id": "sb", "kind": "split", "width_bits": 8, "ports": 2,
                         "routes": { "0": 0, "1": 5 } }]
        }"#;
        assert!(matches!(
            parse_merged(text),
            Err(FormatError::InvalidMerged(_))
        ));
        let fixed = text.replace("\"1\": 5", "\"1\": 1");
        let m = parse_merged(&fixed).unwrap();
        assert_eq!(m.sboxes.len(), 1);
        let back = parse_merged(&serialize_merged(&m)).unwrap();
        assert!(back.structurally_equal(&m));
        // Drop the route for config 1: the box is reached but cannot route.
        let partial = text.replace(", \"1\": 5", "");
        assert!(matches!(
            parse_merged(&partial),
            Err(FormatError::InvalidMerged(_))
        ));
    }
}
