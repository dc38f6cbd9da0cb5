//! Multi-dataflow composition.
//!
//! [`merge`] combines several application graphs into one graph that
//! instantiates every shared actor once. Wherever the applications disagree
//! about where a shared port's tokens go (or come from), a switching box is
//! inserted whose route depends on the configuration selected for the
//! token's tag.
//!
//! Sharing is by actor id: two graphs share an actor exactly when they both
//! declare it under the same id, with the same kind, params and ports.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::graph::{
    validate_graph, ActorSpec, BoundaryPort, DataflowGraph, EdgeSpec, Endpoint, Violation,
};
use crate::token::{ConfigId, ConfigRegisterFile, TagId};

pub const SPLIT_KIND: &str = "sbox_split";
pub const JOIN_KIND: &str = "sbox_join";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SBoxKind {
    /// One input, `ports` outputs.
    Split,
    /// `ports` inputs, one output.
    Join,
}

impl SBoxKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SBoxKind::Split => "split",
            SBoxKind::Join => "join",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "split" => Some(SBoxKind::Split),
            "join" => Some(SBoxKind::Join),
            _ => None,
        }
    }
}

impl fmt::Display for SBoxKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Switching box: routes a token to (split) or takes it from (join) the
/// port selected by its thread's configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SBoxSpec {
    pub id: String,
    pub kind: SBoxKind,
    pub width_bits: u32,
    /// Number of fan-out (split) or fan-in (join) ports.
    pub ports: usize,
    pub routes: BTreeMap<ConfigId, usize>,
}

impl SBoxSpec {
    /// The runtime actor standing in for this box. Split ports are
    /// `in`, `out0..`; join ports are `in0..`, `out`.
    pub fn actor_spec(&self) -> ActorSpec {
        let mut a = ActorSpec::new(
            self.id.clone(),
            match self.kind {
                SBoxKind::Split => SPLIT_KIND,
                SBoxKind::Join => JOIN_KIND,
            },
        );
        match self.kind {
            SBoxKind::Split => {
                a = a.input("in", self.width_bits);
                for i in 0..self.ports {
                    a = a.output(&format!("out{i}"), self.width_bits);
                }
            }
            SBoxKind::Join => {
                for i in 0..self.ports {
                    a = a.input(&format!("in{i}"), self.width_bits);
                }
                a = a.output("out", self.width_bits);
            }
        }
        a
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigEntry {
    pub id: ConfigId,
    /// Name of the source graph this configuration reproduces.
    pub name: String,
    /// Ordinary actors active under this configuration.
    pub actors: BTreeSet<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MergedGraph {
    /// Actors (switching boxes included) and edges of the merged network.
    pub base: DataflowGraph,
    pub configs: Vec<ConfigEntry>,
    pub sboxes: Vec<SBoxSpec>,
    pub max_threads: u32,
}

impl MergedGraph {
    pub fn tag_width(&self) -> u32 {
        tag_width(self.max_threads)
    }

    pub fn config(&self, id: ConfigId) -> Option<&ConfigEntry> {
        self.configs.iter().find(|c| c.id == id)
    }

    pub fn config_by_name(&self, name: &str) -> Option<&ConfigEntry> {
        self.configs.iter().find(|c| c.name == name)
    }

    pub fn sbox(&self, id: &str) -> Option<&SBoxSpec> {
        self.sboxes.iter().find(|s| s.id == id)
    }

    /// Actor count excluding switching boxes.
    pub fn actor_count(&self) -> usize {
        self.base
            .actors
            .iter()
            .filter(|a| self.sbox(&a.id).is_none())
            .count()
    }

    /// Ordinary actors used by more than one configuration.
    pub fn shared_actors(&self) -> Vec<&str> {
        self.base
            .actors
            .iter()
            .filter(|a| self.sbox(&a.id).is_none())
            .filter(|a| {
                self.configs
                    .iter()
                    .filter(|c| c.actors.contains(&a.id))
                    .count()
                    > 1
            })
            .map(|a| a.id.as_str())
            .collect()
    }

    /// Whether `actor` (ordinary actor or switching box) takes part in `config`.
    pub fn is_active(&self, actor: &str, config: ConfigId) -> bool {
        match self.sbox(actor) {
            Some(sb) => sb.routes.contains_key(&config),
            None => self
                .config(config)
                .map(|c| c.actors.contains(actor))
                .unwrap_or(false),
        }
    }

    /// Structural equality, order-insensitive over lists.
    pub fn structurally_equal(&self, other: &MergedGraph) -> bool {
        let mut a = self.sboxes.clone();
        let mut b = other.sboxes.clone();
        a.sort_by(|x, y| x.id.cmp(&y.id));
        b.sort_by(|x, y| x.id.cmp(&y.id));
        let mut ca = self.configs.clone();
        let mut cb = other.configs.clone();
        ca.sort_by_key(|c| c.id);
        cb.sort_by_key(|c| c.id);
        self.max_threads == other.max_threads
            && a == b
            && ca == cb
            && self.base.structurally_equal(&other.base)
    }

    /// Structural problems of the merged form on top of [`validate_graph`].
    pub fn validate(&self) -> Vec<String> {
        let mut out: Vec<String> = validate_graph(&self.base)
            .into_iter()
            .map(|v| v.to_string())
            .collect();
        if self.max_threads == 0 {
            out.push("max_threads must be at least 1".into());
        }
        let ids: BTreeSet<ConfigId> = self.configs.iter().map(|c| c.id).collect();
        if ids.len() != self.configs.len() {
            out.push("configuration ids are not unique".into());
        }
        for c in &self.configs {
            for a in &c.actors {
                match self.base.actor(a) {
                    None => out.push(format!("config {} lists absent actor {a}", c.name)),
                    Some(spec) if spec.kind == SPLIT_KIND || spec.kind == JOIN_KIND => {
                        out.push(format!("config {} lists switching box {a}", c.name))
                    }
                    Some(_) => {}
                }
            }
        }
        for sb in &self.sboxes {
            match self.base.actor(&sb.id) {
                Some(a) if *a == sb.actor_spec() => {}
                Some(_) => out.push(format!("switching box {} does not match its actor", sb.id)),
                None => out.push(format!("switching box {} has no actor", sb.id)),
            }
            for (cfg, port) in &sb.routes {
                if !ids.contains(cfg) {
                    out.push(format!(
                        "switching box {} routes unknown config {cfg}",
                        sb.id
                    ));
                }
                if *port >= sb.ports {
                    out.push(format!(
                        "switching box {} routes config {cfg} to port {port} of {}",
                        sb.id, sb.ports
                    ));
                }
            }
        }
        for a in &self.base.actors {
            if (a.kind == SPLIT_KIND || a.kind == JOIN_KIND) && self.sbox(&a.id).is_none() {
                out.push(format!(
                    "actor {} has switching-box kind but no sbox entry",
                    a.id
                ));
            }
        }
        if out.is_empty() {
            for c in &self.configs {
                if let Err(e) = check_route_totality(self, c.id) {
                    out.push(e.to_string());
                }
            }
        }
        out
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ComposeError {
    #[error("merge needs at least two graphs, got {0}")]
    TooFewGraphs(usize),
    #[error("max_threads must be at least 1")]
    NoThreads,
    #[error("graph {graph} is invalid: {}", .violations.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    InvalidInput {
        graph: String,
        violations: Vec<Violation>,
    },
    #[error("two input graphs are both named {0}")]
    DuplicateGraphName(String),
    #[error("actor {id} differs between {first} and {second}: {detail}")]
    MergeConflict {
        id: String,
        first: String,
        second: String,
        detail: String,
    },
    #[error("cannot merge port structure of {element}: {detail}")]
    ArityConflict { element: String, detail: String },
    #[error("token of {tag} cannot be routed through {sbox}: {reason}")]
    UnroutableToken {
        sbox: String,
        tag: TagId,
        reason: String,
    },
    #[error("unknown configuration {0}")]
    UnknownConfig(ConfigId),
}

/// Bits needed to tag `max_threads` concurrent threads (at least one).
pub fn tag_width(max_threads: u32) -> u32 {
    let t = max_threads.max(1);
    let bits = u32::BITS - (t - 1).leading_zeros();
    bits.max(1)
}

/// Port chosen by `sb` for a token of `tag` under the configuration held in
/// `regs`. The token itself is never touched.
pub fn route(sb: &SBoxSpec, tag: TagId, regs: &ConfigRegisterFile) -> Result<usize, ComposeError> {
    let cfg = regs
        .read(tag)
        .ok_or_else(|| ComposeError::UnroutableToken {
            sbox: sb.id.clone(),
            tag,
            reason: "no configuration selected for this tag".into(),
        })?;
    sb.routes
        .get(&cfg)
        .copied()
        .ok_or_else(|| ComposeError::UnroutableToken {
            sbox: sb.id.clone(),
            tag,
            reason: format!("configuration {cfg} has no route here"),
        })
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Src {
    Actor(Endpoint),
    GraphIn(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
enum Dst {
    Actor(Endpoint),
    GraphOut(String),
}

fn sanitize(s: &str) -> String {
    s.replace('.', "_")
}

/// Merges `graphs` into a single multi-configuration graph serving up to
/// `max_threads` concurrent threads. Configuration `i` reproduces
/// `graphs[i]`.
pub fn merge(graphs: &[DataflowGraph], max_threads: u32) -> Result<MergedGraph, ComposeError> {
    if graphs.len() < 2 {
        return Err(ComposeError::TooFewGraphs(graphs.len()));
    }
    if max_threads == 0 {
        return Err(ComposeError::NoThreads);
    }
    let mut names = BTreeSet::new();
    for g in graphs {
        let violations = validate_graph(g);
        if !violations.is_empty() {
            return Err(ComposeError::InvalidInput {
                graph: g.name.clone(),
                violations,
            });
        }
        if !names.insert(g.name.as_str()) {
            return Err(ComposeError::DuplicateGraphName(g.name.clone()));
        }
    }

    // Union of actors, first occurrence wins the position.
    let mut actors: Vec<ActorSpec> = Vec::new();
    let mut owner: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    for (gi, g) in graphs.iter().enumerate() {
        for a in &g.actors {
            match owner.get(&a.id) {
                None => {
                    owner.insert(a.id.clone(), (gi, actors.len()));
                    actors.push(a.clone());
                }
                Some(&(first, idx)) => {
                    let existing = &actors[idx];
                    let conflict = |detail: String| ComposeError::MergeConflict {
                        id: a.id.clone(),
                        first: graphs[first].name.clone(),
                        second: g.name.clone(),
                        detail,
                    };
                    if existing.kind != a.kind {
                        return Err(conflict(format!("kind {} vs {}", existing.kind, a.kind)));
                    }
                    if existing.params != a.params {
                        return Err(conflict("params differ".into()));
                    }
                    if existing.inputs != a.inputs || existing.outputs != a.outputs {
                        return Err(ComposeError::ArityConflict {
                            element: format!("actor {}", a.id),
                            detail: format!(
                                "ports differ between {} and {}",
                                graphs[first].name, g.name
                            ),
                        });
                    }
                }
            }
        }
    }

    let mut boundary_width: BTreeMap<(bool, String), u32> = BTreeMap::new();
    let mut input_capacity: BTreeMap<String, usize> = BTreeMap::new();
    // Per config: wires (src, dst, capacity).
    let mut wires: Vec<Vec<(Src, Dst, usize)>> = Vec::new();
    for g in graphs {
        let mut list = Vec::new();
        for b in &g.inputs {
            let w = g.input_port(&b.port).map(|p| p.width_bits).unwrap_or(0);
            check_boundary_width(&mut boundary_width, true, &b.name, w)?;
            let cap = input_capacity.entry(b.name.clone()).or_insert(0);
            *cap = (*cap).max(b.capacity);
            list.push((
                Src::GraphIn(b.name.clone()),
                Dst::Actor(b.port.clone()),
                b.capacity,
            ));
        }
        for e in &g.edges {
            list.push((
                Src::Actor(e.src.clone()),
                Dst::Actor(e.dst.clone()),
                e.capacity,
            ));
        }
        for b in &g.outputs {
            let w = g.output_port(&b.port).map(|p| p.width_bits).unwrap_or(0);
            check_boundary_width(&mut boundary_width, false, &b.name, w)?;
            list.push((Src::Actor(b.port.clone()), Dst::GraphOut(b.name.clone()), 0));
        }
        wires.push(list);
    }

    // Distinct destinations per source, distinct sources per destination,
    // each in order of first appearance.
    let mut dests: BTreeMap<Src, Vec<Dst>> = BTreeMap::new();
    let mut srcs: BTreeMap<Dst, Vec<Src>> = BTreeMap::new();
    let mut pair_cap: BTreeMap<(Src, Dst), usize> = BTreeMap::new();
    let mut src_order: Vec<Src> = Vec::new();
    let mut dst_order: Vec<Dst> = Vec::new();
    for list in &wires {
        for (s, d, cap) in list {
            let ds = dests.entry(s.clone()).or_insert_with(|| {
                src_order.push(s.clone());
                Vec::new()
            });
            if !ds.contains(d) {
                ds.push(d.clone());
            }
            let ss = srcs.entry(d.clone()).or_insert_with(|| {
                dst_order.push(d.clone());
                Vec::new()
            });
            if !ss.contains(s) {
                ss.push(s.clone());
            }
            let c = pair_cap.entry((s.clone(), d.clone())).or_insert(0);
            *c = (*c).max(*cap);
        }
    }

    let width_of_src = |s: &Src| -> u32 {
        match s {
            Src::GraphIn(n) => boundary_width[&(true, n.clone())],
            Src::Actor(ep) => {
                let (_, idx) = owner[&ep.actor];
                let a = &actors[idx];
                a.outputs[a.output_index(&ep.port).unwrap()].width_bits
            }
        }
    };

    let mut sboxes: Vec<SBoxSpec> = Vec::new();
    let mut split_of: BTreeMap<Src, usize> = BTreeMap::new();
    let mut join_of: BTreeMap<Dst, usize> = BTreeMap::new();

    for s in &src_order {
        let ds = &dests[s];
        if ds.len() < 2 {
            continue;
        }
        let id = match s {
            Src::Actor(ep) => format!("sb_split_{}_{}", sanitize(&ep.actor), ep.port),
            Src::GraphIn(n) => format!("sb_split_in_{n}"),
        };
        let mut routes = BTreeMap::new();
        for (c, list) in wires.iter().enumerate() {
            if let Some((_, d, _)) = list.iter().find(|(ws, _, _)| ws == s) {
                routes.insert(c as ConfigId, ds.iter().position(|x| x == d).unwrap());
            }
        }
        split_of.insert(s.clone(), sboxes.len());
        sboxes.push(SBoxSpec {
            id,
            kind: SBoxKind::Split,
            width_bits: width_of_src(s),
            ports: ds.len(),
            routes,
        });
    }
    for d in &dst_order {
        let ss = &srcs[d];
        if ss.len() < 2 {
            continue;
        }
        let id = match d {
            Dst::Actor(ep) => format!("sb_join_{}_{}", sanitize(&ep.actor), ep.port),
            Dst::GraphOut(n) => format!("sb_join_out_{n}"),
        };
        let mut routes = BTreeMap::new();
        for (c, list) in wires.iter().enumerate() {
            if let Some((s, _, _)) = list.iter().find(|(_, wd, _)| wd == d) {
                routes.insert(c as ConfigId, ss.iter().position(|x| x == s).unwrap());
            }
        }
        join_of.insert(d.clone(), sboxes.len());
        sboxes.push(SBoxSpec {
            id,
            kind: SBoxKind::Join,
            width_bits: width_of_src(&ss[0]),
            ports: ss.len(),
            routes,
        });
    }

    let taken: BTreeSet<&str> = actors.iter().map(|a| a.id.as_str()).collect();
    if let Some(sb) = sboxes.iter().find(|sb| taken.contains(sb.id.as_str())) {
        return Err(ComposeError::ArityConflict {
            element: format!("actor {}", sb.id),
            detail: "id collides with a generated switching box".into(),
        });
    }

    let mut base = DataflowGraph::new(
        graphs
            .iter()
            .map(|g| g.name.as_str())
            .collect::<Vec<_>>()
            .join("_"),
    );
    base.actors = actors;
    base.actors.extend(sboxes.iter().map(SBoxSpec::actor_spec));

    // Wiring. `None` on the source side stands for a graph input, on the
    // destination side for a graph output.
    enum From {
        Port(Endpoint),
        Input(String),
    }
    enum To {
        Port(Endpoint),
        Output(String),
    }
    let mut link = |from: From, to: To, cap: usize| match (from, to) {
        (From::Port(s), To::Port(d)) => base.edges.push(EdgeSpec::new(s, d).with_capacity(cap)),
        (From::Input(n), To::Port(d)) => {
            let mut b = BoundaryPort::new(n.clone(), d);
            b.capacity = input_capacity[&n];
            base.inputs.push(b);
        }
        (From::Port(s), To::Output(n)) => base.outputs.push(BoundaryPort::new(n, s)),
        (From::Input(n), To::Output(_)) => unreachable!("graph input {n} wired to an output"),
    };
    let plain_from = |s: &Src| match s {
        Src::Actor(ep) => From::Port(ep.clone()),
        Src::GraphIn(n) => From::Input(n.clone()),
    };
    let plain_to = |d: &Dst| match d {
        Dst::Actor(ep) => To::Port(ep.clone()),
        Dst::GraphOut(n) => To::Output(n.clone()),
    };

    for s in &src_order {
        if let Some(&i) = split_of.get(s) {
            let cap = dests[s]
                .iter()
                .map(|d| pair_cap[&(s.clone(), d.clone())])
                .max()
                .unwrap_or(1)
                .max(1);
            link(
                plain_from(s),
                To::Port(Endpoint::new(&sboxes[i].id, "in")),
                cap,
            );
        }
        for d in &dests[s] {
            let cap = pair_cap[&(s.clone(), d.clone())].max(1);
            let from = match split_of.get(s) {
                Some(&i) => From::Port(Endpoint::new(
                    &sboxes[i].id,
                    format!("out{}", dests[s].iter().position(|x| x == d).unwrap()),
                )),
                None => plain_from(s),
            };
            let to = match join_of.get(d) {
                Some(&j) => To::Port(Endpoint::new(
                    &sboxes[j].id,
                    format!("in{}", srcs[d].iter().position(|x| x == s).unwrap()),
                )),
                None => plain_to(d),
            };
            link(from, to, cap);
        }
    }
    for d in &dst_order {
        if let Some(&j) = join_of.get(d) {
            let cap = srcs[d]
                .iter()
                .map(|s| pair_cap[&(s.clone(), d.clone())])
                .max()
                .unwrap_or(1)
                .max(1);
            link(
                From::Port(Endpoint::new(&sboxes[j].id, "out")),
                plain_to(d),
                cap,
            );
        }
    }

    let configs = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| ConfigEntry {
            id: i as ConfigId,
            name: g.name.clone(),
            actors: g.actors.iter().map(|a| a.id.clone()).collect(),
        })
        .collect();

    let merged = MergedGraph {
        base,
        configs,
        sboxes,
        max_threads,
    };
    for c in &merged.configs {
        check_route_totality(&merged, c.id)?;
    }
    Ok(merged)
}

fn check_boundary_width(
    seen: &mut BTreeMap<(bool, String), u32>,
    input: bool,
    name: &str,
    width: u32,
) -> Result<(), ComposeError> {
    match seen.get(&(input, name.to_string())) {
        Some(&w) if w != width => Err(ComposeError::ArityConflict {
            element: format!("{} {name}", if input { "input" } else { "output" }),
            detail: format!("width {w} vs {width} bits"),
        }),
        Some(_) => Ok(()),
        None => {
            seen.insert((input, name.to_string()), width);
            Ok(())
        }
    }
}

/// Every switching box fed by an active actor under `config` must route it.
fn check_route_totality(m: &MergedGraph, config: ConfigId) -> Result<(), ComposeError> {
    let g = &m.base;
    for e in &g.edges {
        let Some(sb) = m.sbox(&e.dst.actor) else {
            continue;
        };
        let src_active = match m.sbox(&e.src.actor) {
            Some(up) => up.routes.contains_key(&config),
            None => m.is_active(&e.src.actor, config),
        };
        if src_active && !sb.routes.contains_key(&config) {
            return Err(ComposeError::UnroutableToken {
                sbox: sb.id.clone(),
                tag: TagId(0),
                reason: format!("configuration {config} reaches it but has no route"),
            });
        }
    }
    Ok(())
}

/// Recovers the application graph run by `config`: the active actors, with
/// every switching box on an active path collapsed into a plain wire.
pub fn extract_config(m: &MergedGraph, config: ConfigId) -> Result<DataflowGraph, ComposeError> {
    let entry = m
        .config(config)
        .ok_or(ComposeError::UnknownConfig(config))?;
    let g = &m.base;
    let by_src: BTreeMap<&Endpoint, &EdgeSpec> = g.edges.iter().map(|e| (&e.src, e)).collect();
    let out_by_src: BTreeMap<&Endpoint, &BoundaryPort> =
        g.outputs.iter().map(|b| (&b.port, b)).collect();

    // Follows a wire forward through active switching boxes. Returns the
    // final destination and the capacity of the wire it stands for.
    let follow = |start: &Endpoint, start_cap: Option<usize>| -> Option<(Dst, usize)> {
        let mut at = start.clone();
        let mut cap = start_cap;
        loop {
            if let Some(b) = out_by_src.get(&at) {
                return Some((Dst::GraphOut(b.name.clone()), cap.unwrap_or(0)));
            }
            let e = by_src.get(&at)?;
            let from_join = m
                .sbox(&e.src.actor)
                .map(|s| s.kind == SBoxKind::Join)
                .unwrap_or(false);
            let to_split = m
                .sbox(&e.dst.actor)
                .map(|s| s.kind == SBoxKind::Split)
                .unwrap_or(false);
            if !from_join && !to_split {
                cap = Some(e.capacity);
            }
            match m.sbox(&e.dst.actor) {
                None => return Some((Dst::Actor(e.dst.clone()), cap.unwrap_or(e.capacity))),
                Some(sb) => {
                    let port = *sb.routes.get(&config)?;
                    match sb.kind {
                        SBoxKind::Split => {
                            at = Endpoint::new(&sb.id, format!("out{port}"));
                        }
                        SBoxKind::Join => {
                            if e.dst.port != format!("in{port}") {
                                return None;
                            }
                            at = Endpoint::new(&sb.id, "out");
                        }
                    }
                }
            }
        }
    };

    let mut out = DataflowGraph::new(entry.name.clone());
    out.actors = g
        .actors
        .iter()
        .filter(|a| entry.actors.contains(&a.id))
        .cloned()
        .collect();

    for b in &g.inputs {
        let mut at = b.port.clone();
        // An input bound straight to a switching box: step through it first.
        let target = match m.sbox(&at.actor) {
            Some(sb) => {
                let Some(&port) = sb.routes.get(&config) else {
                    continue;
                };
                if sb.kind == SBoxKind::Join {
                    if at.port != format!("in{port}") {
                        continue;
                    }
                    at = Endpoint::new(&sb.id, "out");
                } else {
                    at = Endpoint::new(&sb.id, format!("out{port}"));
                }
                follow(&at, None)
            }
            None if entry.actors.contains(&at.actor) => Some((Dst::Actor(at.clone()), 0)),
            None => None,
        };
        if let Some((Dst::Actor(ep), _)) = target {
            let mut nb = BoundaryPort::new(b.name.clone(), ep);
            nb.capacity = b.capacity;
            out.inputs.push(nb);
        }
    }

    for a in &out.actors {
        for p in &a.outputs {
            let ep = Endpoint::new(&a.id, &p.name);
            match follow(&ep, None) {
                Some((Dst::Actor(d), cap)) => {
                    if entry.actors.contains(&d.actor) {
                        out.edges.push(EdgeSpec::new(ep, d).with_capacity(cap));
                    }
                }
                Some((Dst::GraphOut(name), _)) => out.outputs.push(BoundaryPort::new(name, ep)),
                None => {}
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pass(id: &str) -> ActorSpec {
        ActorSpec::new(id, "identity")
            .input("in", 8)
            .output("out", 8)
    }

    fn alpha() -> DataflowGraph {
        let mut g = DataflowGraph::new("alpha");
        g.add_actor(pass("A")).add_actor(pass("B"));
        g.connect(("A", "out"), ("B", "in"));
        g.add_input("x", ("A", "in")).add_output("yb", ("B", "out"));
        g
    }

    fn beta() -> DataflowGraph {
        let mut g = DataflowGraph::new("beta");
        g.add_actor(pass("A")).add_actor(pass("C"));
        g.connect(("A", "out"), ("C", "in"));
        g.add_input("x", ("A", "in")).add_output("yc", ("C", "out"));
        g
    }

    #[test]
    fn tag_width_values() {
        assert_eq!(tag_width(1), 1);
        assert_eq!(tag_width(2), 1);
        assert_eq!(tag_width(3), 2);
        assert_eq!(tag_width(4), 2);
        assert_eq!(tag_width(5), 3);
        assert_eq!(tag_width(256), 8);
        assert_eq!(tag_width(257), 9);
    }

    #[test]
    fn minimal_split() {
        let m = merge(&[alpha(), beta()], 2).unwrap();
        assert_eq!(m.base.actors.len(), 4);
        assert_eq!(m.sboxes.len(), 1);
        let sb = &m.sboxes[0];
        assert_eq!(sb.kind, SBoxKind::Split);
        assert_eq!(sb.routes, BTreeMap::from([(0, 0), (1, 1)]));
        assert!(m.validate().is_empty(), "{:?}", m.validate());
    }

    #[test]
    fn extraction_recovers_sources() {
        let m = merge(&[alpha(), beta()], 2).unwrap();
        assert!(extract_config(&m, 0).unwrap().structurally_equal(&alpha()));
        assert!(extract_config(&m, 1).unwrap().structurally_equal(&beta()));
        assert_eq!(extract_config(&m, 7), Err(ComposeError::UnknownConfig(7)));
    }

    #[test]
    fn identical_graphs_share_everything() {
        let mut b = alpha();
        b.name = "alpha2".into();
        let m = merge(&[alpha(), b], 2).unwrap();
        assert_eq!(m.base.actors.len(), 2);
        assert!(m.sboxes.is_empty());
    }

    #[test]
    fn join_inserted_for_divergent_sources() {
        // alpha: A -> B ; gamma: C -> B
        let mut gamma = DataflowGraph::new("gamma");
        gamma.add_actor(pass("C")).add_actor(pass("B"));
        gamma.connect(("C", "out"), ("B", "in"));
        gamma
            .add_input("x", ("C", "in"))
            .add_output("yb", ("B", "out"));
        let m = merge(&[alpha(), gamma.clone()], 2).unwrap();
        let kinds: Vec<_> = m.sboxes.iter().map(|s| s.kind).collect();
        assert!(kinds.contains(&SBoxKind::Join));
        assert!(kinds.contains(&SBoxKind::Split));
        assert!(extract_config(&m, 1).unwrap().structurally_equal(&gamma));
        assert!(extract_config(&m, 0).unwrap().structurally_equal(&alpha()));
    }

    #[test]
    fn kind_conflict() {
        let mut b = beta();
        b.actors[0].kind = "other".into();
        assert!(matches!(
            merge(&[alpha(), b], 2),
            Err(ComposeError::MergeConflict { .. })
        ));
        let mut b = beta();
        b.actors[0].params.insert("p".into(), 1.into());
        assert!(matches!(
            merge(&[alpha(), b], 2),
            Err(ComposeError::MergeConflict { .. })
        ));
    }

    #[test]
    fn port_conflict() {
        let mut b = beta();
        b.actors[0] = b.actors[0].clone().output("extra", 8);
        assert!(matches!(
            merge(&[alpha(), b], 2),
            Err(ComposeError::ArityConflict { .. })
        ));
    }

    #[test]
    fn needs_two_graphs() {
        assert_eq!(merge(&[alpha()], 2), Err(ComposeError::TooFewGraphs(1)));
        let mut b = alpha();
        b.actors.clear();
        b.name = "beta".into();
        assert!(matches!(
            merge(&[alpha(), b], 2),
            Err(ComposeError::InvalidInput { .. })
        ));
    }

    #[test]
    fn route_lookup() {
        let sb = SBoxSpec {
            id: "sb".into(),
            kind: SBoxKind::Split,
            width_bits: 8,
            ports: 2,
            routes: BTreeMap::from([(0, 0), (1, 1)]),
        };
        let regs: ConfigRegisterFile = [(TagId(0), 1)].into_iter().collect();
        assert_eq!(route(&sb, TagId(0), &regs), Ok(1));
        let regs: ConfigRegisterFile = [(TagId(0), 0), (TagId(1), 1)].into_iter().collect();
        assert_eq!(route(&sb, TagId(0), &regs), Ok(0));
        assert_eq!(route(&sb, TagId(1), &regs), Ok(1));
        let regs: ConfigRegisterFile = [(TagId(0), 5)].into_iter().collect();
        assert!(matches!(
            route(&sb, TagId(0), &regs),
            Err(ComposeError::UnroutableToken { .. })
        ));
    }
}
