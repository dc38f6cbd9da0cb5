//! Cycle-level execution of tagged-token dataflow graphs.
//!
//! "Thread" in this module always means a logical stream of tokens sharing
//! a tag. The engine itself is single-threaded and deterministic.
//!
//! # Cycle model
//!
//! Every cycle has two phases. First each actor decides, looking only at the
//! state at the start of the cycle, whether it fires and for which tag.
//! Then all pops, pipeline shifts and pushes are applied; pushed tokens are
//! visible from the next cycle. An actor with `stages = n` accepts one
//! firing per cycle and delivers its outputs at the end of the `n`-th cycle
//! after the firing cycle counting it as the first. A full output fifo
//! freezes the actor's pipeline.
//!
//! Firing rules:
//! * every input consumed must offer a token of the chosen tag, and every
//!   output produced carries that tag;
//! * inputs are read semi-out-of-order: the oldest token of the chosen tag,
//!   not necessarily the oldest token overall ([`ReadMode`]);
//! * when several tags could fire, the actor serves them round-robin,
//!   starting from the tag after the one it served last.
//!
//! Switching boxes are single-stage actors; a split forwards the token to
//! the output selected by the tag's configuration, a join only accepts a
//! tag from the input its configuration selects.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::sync::Arc;

use serde::Serialize;
use thiserror::Error;

use crate::aes_graph::fit_key;
use crate::composer::{route, ComposeError, ConfigEntry, MergedGraph, SBoxKind, SBoxSpec};
use crate::fifo::{FifoStatus, TaggedFifo};
use crate::graph::{validate_graph, ActorSpec, DataflowGraph, Endpoint};
use crate::kernel::{Kernel, KernelError, KernelRegistry};
use crate::token::{ConfigId, ConfigRegisterFile, TagId, Token};
use crate::workload::{ConfigRef, Workload};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("graph is invalid: {}", .0.join("; "))]
    InvalidGraph(Vec<String>),
    #[error("actor {actor}: no kernel registered for kind {kind}")]
    UnknownKernel { actor: String, kind: String },
    #[error("unknown actor {0}")]
    UnknownActor(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Route(#[from] ComposeError),
    #[error("configuration error for {tag}: {message}")]
    Config { tag: TagId, message: String },
    #[error("{tag} is outside the supported range 0..{max}")]
    TagOutOfRange { tag: TagId, max: u32 },
    #[error("workload error: {0}")]
    Workload(String),
}

/// How readers pick tokens out of their input fifos.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ReadMode {
    /// Oldest token of any chosen tag.
    #[default]
    SemiOutOfOrder,
    /// Only the globally oldest token may be read. Exists to show the
    /// deadlocks that semi-out-of-order reads avoid; not a hardware mode.
    StrictGlobalOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EngineOptions {
    pub read_mode: ReadMode,
    /// Number of concurrent tags for single-application graphs. Merged
    /// graphs use their own `max_threads`.
    pub max_threads: u32,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            read_mode: ReadMode::SemiOutOfOrder,
            max_threads: 2,
        }
    }
}

enum Behavior {
    Kernel(Arc<dyn Kernel>),
    Split(usize),
    Join(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Target {
    Fifo(usize),
    Sink(usize),
    Drop,
}

#[derive(Debug)]
struct InFlight {
    tag: TagId,
    outs: Vec<(usize, Vec<u8>)>,
}

struct ActorRt {
    spec: ActorSpec,
    behavior: Behavior,
    stages: usize,
    inputs: Vec<Option<usize>>,
    outputs: Vec<Target>,
    /// Tokens that have completed 1..stages-1 stages, youngest first.
    pipe: VecDeque<Option<InFlight>>,
    last_served: Option<u32>,
}

struct Sink {
    name: String,
    source: Endpoint,
    records: Vec<(Token, u64)>,
}

struct GraphInput {
    name: String,
    fifo: usize,
    width_bytes: usize,
}

#[derive(Debug, Clone, Copy, Default)]
struct Decision {
    fire: Option<TagId>,
    advance: bool,
}

pub struct Engine {
    actors: Vec<ActorRt>,
    index: BTreeMap<String, usize>,
    fifos: Vec<TaggedFifo>,
    inputs: Vec<GraphInput>,
    sinks: Vec<Sink>,
    sboxes: Vec<SBoxSpec>,
    configs: Vec<ConfigEntry>,
    regs: ConfigRegisterFile,
    max_threads: u32,
    read_mode: ReadMode,
    cycle: u64,
    firings: u64,
}

/// Per-thread results of a run. Cycle numbers count from 1 at the first
/// cycle of the run.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TagMetrics {
    pub blocks_in: usize,
    pub blocks_out: usize,
    pub first_output_cycle: Option<u64>,
    pub last_output_cycle: Option<u64>,
    /// Cycles from injection to the last output of each block, inclusive.
    pub latencies: Vec<u64>,
}

impl TagMetrics {
    /// Completed blocks per cycle between the first and last completion.
    pub fn steady_state_rate(&self) -> Option<f64> {
        match (self.first_output_cycle, self.last_output_cycle) {
            (Some(f), Some(l)) if l > f => Some((self.blocks_out - 1) as f64 / (l - f) as f64),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EngineMetrics {
    pub per_tag: BTreeMap<TagId, TagMetrics>,
    pub total_cycles: u64,
    pub deadlock: bool,
    pub timed_out: bool,
    pub firings: u64,
}

impl EngineMetrics {
    pub fn blocks_out(&self) -> usize {
        self.per_tag.values().map(|m| m.blocks_out).sum()
    }

    /// Completed blocks per cycle over all tags, between the first and last
    /// completion of the run.
    pub fn aggregate_rate(&self) -> Option<f64> {
        let first = self
            .per_tag
            .values()
            .filter_map(|m| m.first_output_cycle)
            .min()?;
        let last = self
            .per_tag
            .values()
            .filter_map(|m| m.last_output_cycle)
            .max()?;
        (last > first).then(|| (self.blocks_out() - 1) as f64 / (last - first) as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct BlockRecord {
    pub inject_cycle: u64,
    pub complete_cycle: Option<u64>,
    pub outputs: BTreeMap<String, Vec<u8>>,
    #[serde(skip)]
    pending: BTreeSet<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RunReport {
    pub metrics: EngineMetrics,
    pub blocks: BTreeMap<TagId, Vec<BlockRecord>>,
}

impl RunReport {
    /// Payloads emitted on graph output `name` for `tag`, in block order.
    pub fn outputs(&self, tag: TagId, name: &str) -> Vec<Vec<u8>> {
        self.blocks
            .get(&tag)
            .map(|bs| {
                bs.iter()
                    .filter_map(|b| b.outputs.get(name).cloned())
                    .collect()
            })
            .unwrap_or_default()
    }
}

struct ResolvedItem {
    data: Vec<u8>,
    key: Option<Vec<u8>>,
    config: Option<ConfigId>,
}

struct ThreadRun {
    tag: TagId,
    start: u64,
    items: Vec<ResolvedItem>,
    next: usize,
    blocks: Vec<BlockRecord>,
    completed: usize,
}

impl Engine {
    /// Engine for a single-application graph (no switching boxes).
    pub fn new(
        graph: &DataflowGraph,
        registry: &KernelRegistry,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let violations = validate_graph(graph);
        if !violations.is_empty() {
            return Err(EngineError::InvalidGraph(
                violations.iter().map(|v| v.to_string()).collect(),
            ));
        }
        Self::build(
            graph,
            &[],
            Vec::new(),
            options.max_threads.max(1),
            registry,
            options,
        )
    }

    /// Engine for a merged graph; tags need a configuration before running.
    pub fn new_merged(
        merged: &MergedGraph,
        registry: &KernelRegistry,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let problems = merged.validate();
        if !problems.is_empty() {
            return Err(EngineError::InvalidGraph(problems));
        }
        Self::build(
            &merged.base,
            &merged.sboxes,
            merged.configs.clone(),
            merged.max_threads,
            registry,
            options,
        )
    }

    fn build(
        g: &DataflowGraph,
        sboxes: &[SBoxSpec],
        configs: Vec<ConfigEntry>,
        max_threads: u32,
        registry: &KernelRegistry,
        options: EngineOptions,
    ) -> Result<Self, EngineError> {
        let mut actors = Vec::with_capacity(g.actors.len());
        let mut index = BTreeMap::new();
        for spec in &g.actors {
            let behavior = match sboxes.iter().position(|s| s.id == spec.id) {
                Some(i) if sboxes[i].kind == SBoxKind::Split => Behavior::Split(i),
                Some(i) => Behavior::Join(i),
                None => Behavior::Kernel(registry.get(&spec.kind).ok_or_else(|| {
                    EngineError::UnknownKernel {
                        actor: spec.id.clone(),
                        kind: spec.kind.clone(),
                    }
                })?),
            };
            // Switching boxes always take one cycle.
            let stages = match behavior {
                Behavior::Kernel(_) => spec.stages(),
                _ => 1,
            };
            index.insert(spec.id.clone(), actors.len());
            actors.push(ActorRt {
                spec: spec.clone(),
                behavior,
                stages,
                inputs: vec![None; spec.inputs.len()],
                outputs: vec![Target::Drop; spec.outputs.len()],
                pipe: (0..stages - 1).map(|_| None).collect(),
                last_served: None,
            });
        }

        let mut fifos = Vec::new();
        for e in &g.edges {
            let f = fifos.len();
            fifos.push(TaggedFifo::new(e.capacity));
            let src = index[&e.src.actor];
            let dst = index[&e.dst.actor];
            let op = actors[src]
                .spec
                .output_index(&e.src.port)
                .expect("validated");
            let ip = actors[dst]
                .spec
                .input_index(&e.dst.port)
                .expect("validated");
            actors[src].outputs[op] = Target::Fifo(f);
            actors[dst].inputs[ip] = Some(f);
        }
        let mut inputs = Vec::new();
        for b in &g.inputs {
            let f = fifos.len();
            fifos.push(TaggedFifo::new(b.capacity));
            let dst = index[&b.port.actor];
            let ip = actors[dst]
                .spec
                .input_index(&b.port.port)
                .expect("validated");
            actors[dst].inputs[ip] = Some(f);
            inputs.push(GraphInput {
                name: b.name.clone(),
                fifo: f,
                width_bytes: actors[dst].spec.inputs[ip].width_bytes(),
            });
        }
        let mut sinks = Vec::new();
        for b in &g.outputs {
            let src = index[&b.port.actor];
            let op = actors[src]
                .spec
                .output_index(&b.port.port)
                .expect("validated");
            actors[src].outputs[op] = Target::Sink(sinks.len());
            sinks.push(Sink {
                name: b.name.clone(),
                source: b.port.clone(),
                records: Vec::new(),
            });
        }

        Ok(Self {
            actors,
            index,
            fifos,
            inputs,
            sinks,
            sboxes: sboxes.to_vec(),
            configs,
            regs: ConfigRegisterFile::new(),
            max_threads,
            read_mode: options.read_mode,
            cycle: 0,
            firings: 0,
        })
    }

    pub fn cycle(&self) -> u64 {
        self.cycle
    }

    pub fn max_threads(&self) -> u32 {
        self.max_threads
    }

    pub fn registers(&self) -> &ConfigRegisterFile {
        &self.regs
    }

    fn check_tag(&self, tag: TagId) -> Result<(), EngineError> {
        if tag.0 >= self.max_threads {
            return Err(EngineError::TagOutOfRange {
                tag,
                max: self.max_threads,
            });
        }
        Ok(())
    }

    /// Selects the configuration used by `tag` from now on.
    pub fn write_config(&mut self, tag: TagId, config: ConfigId) -> Result<(), EngineError> {
        self.check_tag(tag)?;
        if !self.configs.iter().any(|c| c.id == config) {
            return Err(EngineError::Config {
                tag,
                message: format!("configuration {config} does not exist"),
            });
        }
        self.regs.write(tag, config);
        Ok(())
    }

    pub fn resolve_config(&self, r: &ConfigRef) -> Option<ConfigId> {
        match r {
            ConfigRef::Id(i) => self.configs.iter().find(|c| c.id == *i).map(|c| c.id),
            ConfigRef::Name(n) => self.configs.iter().find(|c| &c.name == n).map(|c| c.id),
        }
    }

    /// Pushes `token` into graph input `name`; false when the fifo is full.
    pub fn inject(&mut self, name: &str, token: Token) -> Result<bool, EngineError> {
        self.check_tag(token.tag)?;
        let gi = self
            .inputs
            .iter()
            .find(|i| i.name == name)
            .ok_or_else(|| EngineError::Workload(format!("no graph input named {name}")))?;
        if token.payload.len() != gi.width_bytes {
            return Err(EngineError::Workload(format!(
                "input {name} takes {} bytes, got {}",
                gi.width_bytes,
                token.payload.len()
            )));
        }
        Ok(self.fifos[gi.fifo].push(token))
    }

    /// Tokens delivered so far on graph output `name`, with their cycle.
    pub fn output_tokens(&self, name: &str) -> &[(Token, u64)] {
        self.sinks
            .iter()
            .find(|s| s.name == name)
            .map(|s| s.records.as_slice())
            .unwrap_or(&[])
    }

    /// Status of the fifo feeding `actor.port`.
    pub fn input_fifo_status(&self, actor: &str, port: &str) -> Option<FifoStatus> {
        let a = &self.actors[*self.index.get(actor)?];
        let ip = a.spec.input_index(port)?;
        a.inputs[ip].map(|f| self.fifos[f].status())
    }

    /// Tokens waiting in fifos or travelling through actor pipelines.
    pub fn pending_tokens(&self) -> usize {
        self.fifos.iter().map(TaggedFifo::len).sum::<usize>()
            + self
                .actors
                .iter()
                .map(|a| a.pipe.iter().filter(|s| s.is_some()).count())
                .sum::<usize>()
    }

    /// Whether `actor` could fire for `tag` in the current cycle.
    pub fn can_fire(&self, actor: &str, tag: TagId) -> Result<bool, EngineError> {
        let a = *self
            .index
            .get(actor)
            .ok_or_else(|| EngineError::UnknownActor(actor.to_string()))?;
        self.check_tag(tag)?;
        if !self.advance_ok(a) {
            return Ok(false);
        }
        self.can_fire_at(a, tag)
    }

    fn target_free(&self, t: Target) -> bool {
        match t {
            Target::Fifo(f) => self.fifos[f].free_slots() > 0,
            Target::Sink(_) | Target::Drop => true,
        }
    }

    fn readable(&self, fifo: usize, tag: TagId) -> bool {
        let f = &self.fifos[fifo];
        match self.read_mode {
            ReadMode::SemiOutOfOrder => f.has_head(tag),
            ReadMode::StrictGlobalOrder => f.front().map(|t| t.tag) == Some(tag),
        }
    }

    /// The pipeline can shift: its oldest token (if any) has room downstream.
    fn advance_ok(&self, a: usize) -> bool {
        let rt = &self.actors[a];
        match rt.pipe.back() {
            Some(Some(f)) => f.outs.iter().all(|(p, _)| self.target_free(rt.outputs[*p])),
            _ => true,
        }
    }

    fn can_fire_at(&self, a: usize, tag: TagId) -> Result<bool, EngineError> {
        let rt = &self.actors[a];
        let single = rt.stages == 1;
        match &rt.behavior {
            Behavior::Kernel(_) => {
                let inputs_ok = rt
                    .inputs
                    .iter()
                    .all(|f| f.map(|f| self.readable(f, tag)).unwrap_or(false));
                Ok(inputs_ok && (!single || rt.outputs.iter().all(|t| self.target_free(*t))))
            }
            Behavior::Split(i) => {
                let Some(f) = rt.inputs[0] else {
                    return Ok(false);
                };
                if !self.readable(f, tag) {
                    return Ok(false);
                }
                let port = route(&self.sboxes[*i], tag, &self.regs)?;
                Ok(self.target_free(rt.outputs[port]))
            }
            Behavior::Join(i) => {
                let present = rt
                    .inputs
                    .iter()
                    .flatten()
                    .any(|f| self.fifos[*f].has_head(tag));
                if !present {
                    return Ok(false);
                }
                let port = route(&self.sboxes[*i], tag, &self.regs)?;
                let Some(f) = rt.inputs[port] else {
                    return Ok(false);
                };
                Ok(self.readable(f, tag) && self.target_free(rt.outputs[0]))
            }
        }
    }

    /// Tokens sitting at a switching box they cannot pass halt the engine.
    fn check_routable(&self, a: usize) -> Result<(), EngineError> {
        let rt = &self.actors[a];
        let (Behavior::Split(i) | Behavior::Join(i)) = rt.behavior else {
            return Ok(());
        };
        let sb = &self.sboxes[i];
        for (j, f) in rt.inputs.iter().enumerate() {
            let Some(f) = f else { continue };
            let tags: BTreeSet<TagId> = self.fifos[*f].tokens().map(|t| t.tag).collect();
            for tag in tags {
                let port = route(sb, tag, &self.regs)?;
                if sb.kind == SBoxKind::Join && port != j {
                    return Err(ComposeError::UnroutableToken {
                        sbox: sb.id.clone(),
                        tag,
                        reason: format!("arrived on in{j} but its configuration selects in{port}"),
                    }
                    .into());
                }
            }
        }
        Ok(())
    }

    fn decide(&self, a: usize) -> Result<Decision, EngineError> {
        self.check_routable(a)?;
        if !self.advance_ok(a) {
            return Ok(Decision::default());
        }
        let rt = &self.actors[a];
        let t = self.max_threads;
        let start = rt.last_served.map(|l| (l + 1) % t).unwrap_or(0);
        let mut fire = None;
        for k in 0..t {
            let tag = TagId((start + k) % t);
            if self.can_fire_at(a, tag)? {
                fire = Some(tag);
                break;
            }
        }
        let in_flight = rt.pipe.iter().any(Option::is_some);
        Ok(Decision {
            fire,
            advance: fire.is_some() || in_flight,
        })
    }

    fn fire(&mut self, a: usize, tag: TagId) -> Result<InFlight, EngineError> {
        let outs = match self.actors[a].behavior {
            Behavior::Kernel(ref k) => {
                let k = Arc::clone(k);
                let mut payloads = Vec::with_capacity(self.actors[a].inputs.len());
                for f in self.actors[a].inputs.clone() {
                    let f = f.expect("can_fire checked every input is connected");
                    payloads.push(self.pop(f, tag).payload);
                }
                let refs: Vec<&[u8]> = payloads.iter().map(Vec::as_slice).collect();
                let spec = &self.actors[a].spec;
                let outs = k.apply(spec, &refs)?;
                if outs.len() != spec.outputs.len() {
                    return Err(KernelError::new(
                        spec,
                        format!(
                            "produced {} outputs for {} ports",
                            outs.len(),
                            spec.outputs.len()
                        ),
                    )
                    .into());
                }
                for (o, p) in outs.iter().zip(&spec.outputs) {
                    if o.len() != p.width_bytes() {
                        return Err(KernelError::new(
                            spec,
                            format!(
                                "output {} is {} bytes, port takes {}",
                                p.name,
                                o.len(),
                                p.width_bytes()
                            ),
                        )
                        .into());
                    }
                }
                outs.into_iter().enumerate().collect()
            }
            Behavior::Split(i) => {
                let port = route(&self.sboxes[i], tag, &self.regs)?;
                let f = self.actors[a].inputs[0].expect("checked");
                vec![(port, self.pop(f, tag).payload)]
            }
            Behavior::Join(i) => {
                let port = route(&self.sboxes[i], tag, &self.regs)?;
                let f = self.actors[a].inputs[port].expect("checked");
                vec![(0, self.pop(f, tag).payload)]
            }
        };
        self.actors[a].last_served = Some(tag.0);
        self.firings += 1;
        Ok(InFlight { tag, outs })
    }

    fn pop(&mut self, fifo: usize, tag: TagId) -> Token {
        let f = &mut self.fifos[fifo];
        match self.read_mode {
            ReadMode::SemiOutOfOrder => f.pop(tag).expect("head checked before firing"),
            ReadMode::StrictGlobalOrder => {
                debug_assert_eq!(f.front().map(|t| t.tag), Some(tag));
                f.pop(tag).expect("head checked before firing")
            }
        }
    }

    /// Simulates one cycle. Returns whether anything fired or moved.
    pub fn step(&mut self) -> Result<bool, EngineError> {
        let decisions = (0..self.actors.len())
            .map(|a| self.decide(a))
            .collect::<Result<Vec<_>, _>>()?;
        self.cycle += 1;
        let mut pushes: Vec<(Target, Token)> = Vec::new();
        let mut progress = false;
        for (a, d) in decisions.iter().enumerate() {
            if !d.advance {
                continue;
            }
            progress = true;
            let fresh = match d.fire {
                Some(tag) => Some(self.fire(a, tag)?),
                None => None,
            };
            let rt = &mut self.actors[a];
            rt.pipe.push_front(fresh);
            if let Some(Some(done)) = rt.pipe.pop_back() {
                for (p, payload) in done.outs {
                    pushes.push((rt.outputs[p], Token::new(payload, done.tag)));
                }
            }
        }
        for (target, tok) in pushes {
            match target {
                Target::Fifo(f) => {
                    let ok = self.fifos[f].push(tok);
                    debug_assert!(ok, "free slot checked at cycle start");
                }
                Target::Sink(s) => self.sinks[s].records.push((tok, self.cycle)),
                Target::Drop => {}
            }
        }
        Ok(progress)
    }

    fn data_input(&self) -> Result<usize, EngineError> {
        if let Some(i) = self.inputs.iter().position(|i| i.name == "block") {
            return Ok(i);
        }
        match self.inputs.len() {
            1 => Ok(0),
            0 => Err(EngineError::Workload("graph has no inputs".into())),
            _ => Err(EngineError::Workload(
                "graph has several inputs and none is named \"block\"".into(),
            )),
        }
    }

    fn active_sinks(&self, config: Option<ConfigId>) -> BTreeSet<usize> {
        self.sinks
            .iter()
            .enumerate()
            .filter(|(_, s)| match config {
                None => true,
                Some(c) => match self.sboxes.iter().find(|sb| sb.id == s.source.actor) {
                    Some(sb) => sb.routes.contains_key(&c),
                    None => self
                        .configs
                        .iter()
                        .find(|e| e.id == c)
                        .map(|e| e.actors.contains(&s.source.actor))
                        .unwrap_or(false),
                },
            })
            .map(|(i, _)| i)
            .collect()
    }

    fn resolve_workload(&self, w: &Workload) -> Result<Vec<ThreadRun>, EngineError> {
        let data = self.data_input()?;
        let merged = !self.configs.is_empty();
        let mut runs = Vec::new();
        for (&tag, t) in &w.threads {
            self.check_tag(tag)?;
            let mut items = Vec::with_capacity(t.items.len());
            for (n, item) in t.items.iter().enumerate() {
                let config = match &item.config {
                    None => None,
                    Some(r) if merged => {
                        Some(self.resolve_config(r).ok_or_else(|| EngineError::Config {
                            tag,
                            message: format!("configuration {r} does not exist"),
                        })?)
                    }
                    Some(r) => {
                        return Err(EngineError::Config {
                            tag,
                            message: format!(
                                "configuration {r} selected but the graph has no configurations"
                            ),
                        })
                    }
                };
                if merged && n == 0 && config.is_none() && self.regs.read(tag).is_none() {
                    return Err(EngineError::Config {
                        tag,
                        message: "no configuration set".into(),
                    });
                }
                if item.data.len() != self.inputs[data].width_bytes {
                    return Err(EngineError::Workload(format!(
                        "{tag} block {n}: input {} takes {} bytes, got {}",
                        self.inputs[data].name,
                        self.inputs[data].width_bytes,
                        item.data.len()
                    )));
                }
                if self.inputs.len() > 1 && item.key.is_none() {
                    return Err(EngineError::Workload(format!(
                        "{tag} block {n}: no key given"
                    )));
                }
                items.push(ResolvedItem {
                    data: item.data.clone(),
                    key: item.key.clone(),
                    config,
                });
            }
            runs.push(ThreadRun {
                tag,
                start: t.start_cycle,
                items,
                next: 0,
                blocks: Vec::new(),
                completed: 0,
            });
        }
        Ok(runs)
    }

    /// Runs `workload` to completion, deadlock or `max_cycles`.
    ///
    /// Each cycle, before the actors step, every thread (lowest tag first)
    /// injects its next block if all graph inputs have room: the block goes
    /// to the input named `block` (or the only input) and the thread's key,
    /// truncated or zero-padded to fit, to every other input. A thread whose
    /// configuration changes waits until its earlier blocks have left the
    /// graph, then writes the register.
    pub fn run(&mut self, workload: &Workload, max_cycles: u64) -> Result<RunReport, EngineError> {
        let mut threads = self.resolve_workload(workload)?;
        let data = self.data_input()?;
        let base = self.cycle;
        let mut seen: Vec<usize> = self.sinks.iter().map(|s| s.records.len()).collect();
        let mut deadlock = false;
        let mut timed_out = false;

        loop {
            let done = threads
                .iter()
                .all(|t| t.next == t.items.len() && t.completed == t.blocks.len());
            if done {
                break;
            }
            if self.cycle - base >= max_cycles {
                timed_out = true;
                break;
            }
            let now = self.cycle + 1 - base;
            let mut injected = false;
            let mut waiting = false;
            for th in threads.iter_mut() {
                if th.next >= th.items.len() {
                    continue;
                }
                if now < th.start {
                    waiting = true;
                    continue;
                }
                let item = &th.items[th.next];
                if let Some(c) = item.config {
                    if self.regs.read(th.tag) != Some(c) {
                        if th.completed < th.blocks.len() {
                            continue;
                        }
                        self.regs.write(th.tag, c);
                    }
                }
                if !self
                    .inputs
                    .iter()
                    .all(|i| self.fifos[i.fifo].free_slots() > 0)
                {
                    continue;
                }
                for (k, gi) in self.inputs.iter().enumerate() {
                    let payload = if k == data {
                        item.data.clone()
                    } else {
                        fit_key(item.key.as_deref().unwrap_or(&[]), gi.width_bytes)
                    };
                    self.fifos[gi.fifo].push(Token::new(payload, th.tag));
                }
                let cfg = self.regs.read(th.tag).filter(|_| !self.configs.is_empty());
                let pending = self.active_sinks(cfg);
                let complete = pending.is_empty().then_some(now);
                if complete.is_some() {
                    th.completed += 1;
                }
                th.blocks.push(BlockRecord {
                    inject_cycle: now,
                    complete_cycle: complete,
                    outputs: BTreeMap::new(),
                    pending,
                });
                th.next += 1;
                injected = true;
            }

            let progress = self.step()?;

            for (s, sink) in self.sinks.iter().enumerate() {
                for (tok, cyc) in &sink.records[seen[s]..] {
                    let Some(th) = threads.iter_mut().find(|t| t.tag == tok.tag) else {
                        continue;
                    };
                    let Some(b) = th.blocks.iter_mut().find(|b| b.pending.contains(&s)) else {
                        continue;
                    };
                    b.pending.remove(&s);
                    b.outputs.insert(sink.name.clone(), tok.payload.clone());
                    if b.pending.is_empty() {
                        b.complete_cycle = Some(cyc - base);
                        th.completed += 1;
                    }
                }
                seen[s] = sink.records.len();
            }

            if !progress && !injected && !waiting && self.pending_tokens() > 0 {
                deadlock = true;
                break;
            }
        }

        let mut per_tag = BTreeMap::new();
        let mut blocks = BTreeMap::new();
        for th in threads {
            let done: Vec<&BlockRecord> = th
                .blocks
                .iter()
                .filter(|b| b.complete_cycle.is_some())
                .collect();
            per_tag.insert(
                th.tag,
                TagMetrics {
                    blocks_in: th.blocks.len(),
                    blocks_out: done.len(),
                    first_output_cycle: done.iter().filter_map(|b| b.complete_cycle).min(),
                    last_output_cycle: done.iter().filter_map(|b| b.complete_cycle).max(),
                    latencies: done
                        .iter()
                        .map(|b| b.complete_cycle.unwrap() - b.inject_cycle + 1)
                        .collect(),
                },
            );
            blocks.insert(th.tag, th.blocks);
        }
        Ok(RunReport {
            metrics: EngineMetrics {
                per_tag,
                total_cycles: self.cycle - base,
                deadlock,
                timed_out,
                firings: self.firings,
            },
            blocks,
        })
    }
}
