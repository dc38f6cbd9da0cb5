//! Dataflow graph descriptions: actors, ports, edges and boundary ports.
//!
//! Graphs are plain values. [`validate_graph`] reports every broken
//! structural rule as data; [`crate::format`] turns documents into graphs
//! and back.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

/// FIFO depth used when an edge does not state one.
pub const DEFAULT_CAPACITY: usize = 4;

/// Actor parameter value. Documents only carry strings and integers.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Int(i64),
    Str(String),
}

impl ParamValue {
    pub fn as_int(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            ParamValue::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Str(s) => Some(s),
            ParamValue::Int(_) => None,
        }
    }
}

impl From<i64> for ParamValue {
    fn from(v: i64) -> Self {
        ParamValue::Int(v)
    }
}

impl From<&str> for ParamValue {
    fn from(v: &str) -> Self {
        ParamValue::Str(v.to_string())
    }
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Str(s) => write!(f, "{s:?}"),
        }
    }
}

pub type Params = BTreeMap<String, ParamValue>;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct PortSpec {
    pub name: String,
    pub width_bits: u32,
}

impl PortSpec {
    pub fn new(name: impl Into<String>, width_bits: u32) -> Self {
        Self {
            name: name.into(),
            width_bits,
        }
    }

    /// Payload size carried by this port, in bytes.
    pub fn width_bytes(&self) -> usize {
        (self.width_bits / 8) as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ActorSpec {
    pub id: String,
    /// Name of the kernel (or switching-box kind) that implements the actor.
    pub kind: String,
    pub params: Params,
    pub inputs: Vec<PortSpec>,
    pub outputs: Vec<PortSpec>,
}

impl ActorSpec {
    pub fn new(id: impl Into<String>, kind: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            kind: kind.into(),
            params: Params::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn param(mut self, key: &str, value: impl Into<ParamValue>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }

    pub fn input(mut self, name: &str, width_bits: u32) -> Self {
        self.inputs.push(PortSpec::new(name, width_bits));
        self
    }

    pub fn output(mut self, name: &str, width_bits: u32) -> Self {
        self.outputs.push(PortSpec::new(name, width_bits));
        self
    }

    pub fn input_index(&self, port: &str) -> Option<usize> {
        self.inputs.iter().position(|p| p.name == port)
    }

    pub fn output_index(&self, port: &str) -> Option<usize> {
        self.outputs.iter().position(|p| p.name == port)
    }

    pub fn int_param(&self, key: &str) -> Option<i64> {
        self.params.get(key).and_then(ParamValue::as_int)
    }

    pub fn str_param(&self, key: &str) -> Option<&str> {
        self.params.get(key).and_then(ParamValue::as_str)
    }

    /// Pipeline depth of the actor, taken from the `stages` parameter.
    pub fn stages(&self) -> usize {
        self.int_param("stages")
            .filter(|s| *s >= 1)
            .map(|s| s as usize)
            .unwrap_or(1)
    }
}

/// `actor.port` reference.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Endpoint {
    pub actor: String,
    pub port: String,
}

impl Endpoint {
    pub fn new(actor: impl Into<String>, port: impl Into<String>) -> Self {
        Self {
            actor: actor.into(),
            port: port.into(),
        }
    }

    /// Parses `actorId.portName`.
    pub fn parse(text: &str) -> Option<Self> {
        let (actor, port) = text.split_once('.')?;
        if !is_identifier(actor) || !is_identifier(port) {
            return None;
        }
        Some(Self::new(actor, port))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.actor, self.port)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeSpec {
    pub src: Endpoint,
    pub dst: Endpoint,
    pub capacity: usize,
}

impl EdgeSpec {
    pub fn new(src: Endpoint, dst: Endpoint) -> Self {
        Self {
            src,
            dst,
            capacity: DEFAULT_CAPACITY,
        }
    }

    pub fn with_capacity(mut self, capacity: usize) -> Self {
        self.capacity = capacity;
        self
    }
}

/// A named port on the graph boundary, bound to exactly one actor port.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct BoundaryPort {
    pub name: String,
    pub port: Endpoint,
    /// Depth of the injection FIFO (graph inputs only).
    pub capacity: usize,
}

impl BoundaryPort {
    pub fn new(name: impl Into<String>, port: Endpoint) -> Self {
        Self {
            name: name.into(),
            port,
            capacity: DEFAULT_CAPACITY,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DataflowGraph {
    pub name: String,
    pub actors: Vec<ActorSpec>,
    pub edges: Vec<EdgeSpec>,
    pub inputs: Vec<BoundaryPort>,
    pub outputs: Vec<BoundaryPort>,
}

impl DataflowGraph {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            ..Self::default()
        }
    }

    pub fn actor(&self, id: &str) -> Option<&ActorSpec> {
        self.actors.iter().find(|a| a.id == id)
    }

    pub fn add_actor(&mut self, actor: ActorSpec) -> &mut Self {
        self.actors.push(actor);
        self
    }

    pub fn connect(&mut self, src: (&str, &str), dst: (&str, &str)) -> &mut Self {
        self.edges.push(EdgeSpec::new(
            Endpoint::new(src.0, src.1),
            Endpoint::new(dst.0, dst.1),
        ));
        self
    }

    pub fn connect_with_capacity(
        &mut self,
        src: (&str, &str),
        dst: (&str, &str),
        capacity: usize,
    ) -> &mut Self {
        self.edges.push(
            EdgeSpec::new(Endpoint::new(src.0, src.1), Endpoint::new(dst.0, dst.1))
                .with_capacity(capacity),
        );
        self
    }

    pub fn add_input(&mut self, name: &str, dst: (&str, &str)) -> &mut Self {
        self.inputs
            .push(BoundaryPort::new(name, Endpoint::new(dst.0, dst.1)));
        self
    }

    pub fn add_output(&mut self, name: &str, src: (&str, &str)) -> &mut Self {
        self.outputs
            .push(BoundaryPort::new(name, Endpoint::new(src.0, src.1)));
        self
    }

    pub fn input_port(&self, ep: &Endpoint) -> Option<&PortSpec> {
        let actor = self.actor(&ep.actor)?;
        actor.inputs.iter().find(|p| p.name == ep.port)
    }

    pub fn output_port(&self, ep: &Endpoint) -> Option<&PortSpec> {
        let actor = self.actor(&ep.actor)?;
        actor.outputs.iter().find(|p| p.name == ep.port)
    }

    /// Order-insensitive copy: actors, edges and boundary ports sorted.
    pub fn canonical(&self) -> DataflowGraph {
        let mut g = self.clone();
        g.actors.sort_by(|a, b| a.id.cmp(&b.id));
        g.edges.sort();
        g.inputs.sort();
        g.outputs.sort();
        g
    }

    /// Structural equality: same actors (kind, params, ports), same edge
    /// set and same boundary ports, regardless of list order.
    pub fn structurally_equal(&self, other: &DataflowGraph) -> bool {
        self.canonical() == other.canonical()
    }
}

/// Rule broken by a graph element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    InvalidIdentifier,
    DuplicateActorId,
    DuplicatePortName,
    InvalidWidth,
    DanglingEdge,
    WidthMismatch,
    InvalidCapacity,
    MultipleDrivers,
    MultipleReaders,
    DuplicateBoundaryName,
    DanglingBoundary,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub element: String,
    pub rule: Rule,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {:?}: {}", self.element, self.rule, self.message)
    }
}

pub fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

/// Checks every structural rule and returns the list of violations.
///
/// An empty list means the graph is well formed. Output ports may feed at
/// most one edge: fan-out is expressed with explicit actor outputs.
pub fn validate_graph(g: &DataflowGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |element: String, rule: Rule, message: String| {
        out.push(Violation {
            element,
            rule,
            message,
        })
    };

    if !is_identifier(&g.name) {
        push(
            format!("graph {:?}", g.name),
            Rule::InvalidIdentifier,
            format!("graph name {:?} is not an identifier", g.name),
        );
    }

    let mut seen = BTreeSet::new();
    for actor in &g.actors {
        if !is_identifier(&actor.id) {
            push(
                format!("actor {:?}", actor.id),
                Rule::InvalidIdentifier,
                format!("actor id {:?} is not an identifier", actor.id),
            );
        }
        if !seen.insert(actor.id.as_str()) {
            push(
                format!("actor {}", actor.id),
                Rule::DuplicateActorId,
                format!("actor id {} is declared more than once", actor.id),
            );
        }
        // An input and an output may share a name; edges always name an
        // output as source and an input as destination.
        let mut names = BTreeSet::new();
        let ports = actor
            .inputs
            .iter()
            .map(|p| (true, p))
            .chain(actor.outputs.iter().map(|p| (false, p)));
        for (is_input, port) in ports {
            if !is_identifier(&port.name) {
                push(
                    format!("port {}.{}", actor.id, port.name),
                    Rule::InvalidIdentifier,
                    format!("port name {:?} is not an identifier", port.name),
                );
            }
            if !names.insert((is_input, port.name.as_str())) {
                push(
                    format!("port {}.{}", actor.id, port.name),
                    Rule::DuplicatePortName,
                    format!("port {} is declared twice on actor {}", port.name, actor.id),
                );
            }
            if port.width_bits == 0 || port.width_bits % 8 != 0 {
                push(
                    format!("port {}.{}", actor.id, port.name),
                    Rule::InvalidWidth,
                    format!(
                        "width {} bits must be a positive multiple of 8",
                        port.width_bits
                    ),
                );
            }
        }
    }

    let mut drivers: BTreeMap<Endpoint, usize> = BTreeMap::new();
    let mut readers: BTreeMap<Endpoint, usize> = BTreeMap::new();

    for edge in &g.edges {
        let label = format!("edge {} -> {}", edge.src, edge.dst);
        let src = g.output_port(&edge.src);
        let dst = g.input_port(&edge.dst);
        for (ep, found, dir) in [(&edge.src, src, "output"), (&edge.dst, dst, "input")] {
            if found.is_none() {
                let msg = if g.actor(&ep.actor).is_none() {
                    format!("references absent actor {}", ep.actor)
                } else {
                    format!("actor {} has no {} port {}", ep.actor, dir, ep.port)
                };
                push(label.clone(), Rule::DanglingEdge, msg);
            }
        }
        if let (Some(s), Some(d)) = (src, dst) {
            if s.width_bits != d.width_bits {
                push(
                    label.clone(),
                    Rule::WidthMismatch,
                    format!(
                        "{} is {} bits but {} is {} bits",
                        edge.src, s.width_bits, edge.dst, d.width_bits
                    ),
                );
            }
        }
        if edge.capacity == 0 {
            push(
                label.clone(),
                Rule::InvalidCapacity,
                "capacity must be at least 1".into(),
            );
        }
        *readers.entry(edge.src.clone()).or_default() += 1;
        *drivers.entry(edge.dst.clone()).or_default() += 1;
    }

    let mut boundary_names = BTreeSet::new();
    for (list, is_input) in [(&g.inputs, true), (&g.outputs, false)] {
        for b in list.iter() {
            let label = format!("{} {}", if is_input { "input" } else { "output" }, b.name);
            if !is_identifier(&b.name) {
                push(
                    label.clone(),
                    Rule::InvalidIdentifier,
                    format!("boundary name {:?} is not an identifier", b.name),
                );
            }
            if !boundary_names.insert((is_input, b.name.as_str())) {
                push(
                    label.clone(),
                    Rule::DuplicateBoundaryName,
                    format!("boundary port {} is declared twice", b.name),
                );
            }
            let found = if is_input {
                g.input_port(&b.port)
            } else {
                g.output_port(&b.port)
            };
            if found.is_none() {
                push(
                    label.clone(),
                    Rule::DanglingBoundary,
                    format!("bound to missing port {}", b.port),
                );
            }
            if is_input {
                if b.capacity == 0 {
                    push(
                        label.clone(),
                        Rule::InvalidCapacity,
                        "capacity must be at least 1".into(),
                    );
                }
                *drivers.entry(b.port.clone()).or_default() += 1;
            } else {
                *readers.entry(b.port.clone()).or_default() += 1;
            }
        }
    }

    for (ep, n) in drivers.iter().filter(|(_, n)| **n > 1) {
        push(
            format!("port {ep}"),
            Rule::MultipleDrivers,
            format!("input port {ep} has {n} incoming connections"),
        );
    }
    for (ep, n) in readers.iter().filter(|(_, n)| **n > 1) {
        push(
            format!("port {ep}"),
            Rule::MultipleReaders,
            format!("output port {ep} has {n} outgoing connections"),
        );
    }

    out
}
