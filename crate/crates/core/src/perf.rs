//! Latency and throughput models.
//!
//! Everything the engine measures is in cycles. Nanoseconds only appear
//! once a [`ClockModel`] is applied, so changing the clock never changes a
//! cycle count.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::aes::AesStandard;
use crate::composer::{MergedGraph, SBoxKind};
use crate::graph::DataflowGraph;
use crate::token::ConfigId;

/// Bits per AES block.
pub const BLOCK_BITS: f64 = 128.0;

/// AES-128 latency of the single-standard reference design, in ns.
pub const REFERENCE_LATENCY_NS: f64 = 250.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PerfError {
    #[error("clock period must be a positive number of ns, got {0}")]
    InvalidClock(f64),
    #[error("graph has a cycle through actor {0}")]
    Cyclic(String),
    #[error("configuration {0} does not exist")]
    UnknownConfig(ConfigId),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClockModel {
    pub period_ns: f64,
}

impl ClockModel {
    pub fn new(period_ns: f64) -> Result<Self, PerfError> {
        if period_ns.is_finite() && period_ns > 0.0 {
            Ok(Self { period_ns })
        } else {
            Err(PerfError::InvalidClock(period_ns))
        }
    }

    /// Clock at which the default AES-128 pipeline (4 stages per round)
    /// takes [`REFERENCE_LATENCY_NS`].
    pub fn calibrated() -> Self {
        let cycles = latency_cycles(AesStandard::Aes128, 4, 0);
        Self {
            period_ns: REFERENCE_LATENCY_NS / cycles as f64,
        }
    }

    pub fn ns(&self, cycles: u64) -> f64 {
        cycles as f64 * self.period_ns
    }
}

/// Cycles from injection to ciphertext: one whitening stage, `Nr` rounds and
/// one cycle per switching box on the path.
pub fn latency_cycles(std: AesStandard, stages_per_round: usize, sbox_stages: usize) -> u64 {
    (1 + std.rounds() * stages_per_round + sbox_stages) as u64
}

pub fn latency_ns(
    std: AesStandard,
    stages_per_round: usize,
    clock: ClockModel,
    sbox_stages: usize,
) -> f64 {
    clock.ns(latency_cycles(std, stages_per_round, sbox_stages))
}

/// Longest input-to-output path of an empty pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct PathTiming {
    /// Sum of actor stages along the path; the latency of a lone block.
    pub cycles: u64,
    /// Switching boxes on that path.
    pub sbox_stages: usize,
}

fn longest_path(
    g: &DataflowGraph,
    active: impl Fn(&str) -> bool,
    is_sbox: impl Fn(&str) -> bool,
) -> Result<PathTiming, PerfError> {
    let ids: Vec<&str> = g
        .actors
        .iter()
        .map(|a| a.id.as_str())
        .filter(|id| active(id))
        .collect();
    let stages: BTreeMap<&str, u64> = g
        .actors
        .iter()
        .filter(|a| active(&a.id))
        .map(|a| {
            (
                a.id.as_str(),
                if is_sbox(&a.id) { 1 } else { a.stages() as u64 },
            )
        })
        .collect();
    let mut preds: BTreeMap<&str, Vec<&str>> = ids.iter().map(|id| (*id, Vec::new())).collect();
    for e in &g.edges {
        if active(&e.src.actor) && active(&e.dst.actor) {
            preds
                .get_mut(e.dst.actor.as_str())
                .unwrap()
                .push(e.src.actor.as_str());
        }
    }

    // best[id] = (cycles, sboxes) of the longest path ending with `id`.
    let mut best: BTreeMap<&str, (u64, usize)> = BTreeMap::new();
    let mut state: BTreeMap<&str, u8> = BTreeMap::new();
    fn visit<'a>(
        id: &'a str,
        preds: &BTreeMap<&'a str, Vec<&'a str>>,
        stages: &BTreeMap<&'a str, u64>,
        is_sbox: &dyn Fn(&str) -> bool,
        best: &mut BTreeMap<&'a str, (u64, usize)>,
        state: &mut BTreeMap<&'a str, u8>,
    ) -> Result<(u64, usize), PerfError> {
        match state.get(id) {
            Some(2) => return Ok(best[id]),
            Some(1) => return Err(PerfError::Cyclic(id.to_string())),
            _ => {}
        }
        state.insert(id, 1);
        let mut upstream = (0, 0);
        for p in &preds[id] {
            upstream = upstream.max(visit(p, preds, stages, is_sbox, best, state)?);
        }
        let here = (upstream.0 + stages[id], upstream.1 + is_sbox(id) as usize);
        best.insert(id, here);
        state.insert(id, 2);
        Ok(here)
    }

    let mut result = (0, 0);
    for b in &g.outputs {
        if active(&b.port.actor) {
            result = result.max(visit(
                &b.port.actor,
                &preds,
                &stages,
                &is_sbox,
                &mut best,
                &mut state,
            )?);
        }
    }
    Ok(PathTiming {
        cycles: result.0,
        sbox_stages: result.1,
    })
}

pub fn critical_path(g: &DataflowGraph) -> Result<PathTiming, PerfError> {
    longest_path(g, |_| true, |_| false)
}

/// Critical path of configuration `config` inside a merged graph, counting
/// one cycle per switching box that configuration passes through.
pub fn merged_critical_path(m: &MergedGraph, config: ConfigId) -> Result<PathTiming, PerfError> {
    if m.config(config).is_none() {
        return Err(PerfError::UnknownConfig(config));
    }
    longest_path(
        &m.base,
        |id| m.is_active(id, config),
        |id| m.sbox(id).is_some(),
    )
}

/// Number of split/join boxes in a merged graph.
pub fn sbox_counts(m: &MergedGraph) -> (usize, usize) {
    let splits = m
        .sboxes
        .iter()
        .filter(|s| s.kind == SBoxKind::Split)
        .count();
    (splits, m.sboxes.len() - splits)
}

/// A named accelerator design built from one or more pipelines.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DesignModel {
    pub name: String,
    pub pipelines: Vec<PipelineModel>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PipelineModel {
    /// Standards the pipeline can run.
    pub standards: Vec<AesStandard>,
    /// Tags it serves at once.
    pub concurrency: u32,
    /// Switching-box cycles on each standard's path.
    pub sbox_stages: usize,
}

impl DesignModel {
    fn single(name: &str, std: AesStandard) -> Self {
        Self {
            name: name.to_string(),
            pipelines: vec![PipelineModel {
                standards: vec![std],
                concurrency: 1,
                sbox_stages: 0,
            }],
        }
    }

    pub fn aes128_st() -> Self {
        Self::single("AES-128-ST", AesStandard::Aes128)
    }

    pub fn aes256_st() -> Self {
        Self::single("AES-256-ST", AesStandard::Aes256)
    }

    /// Both single designs side by side, nothing shared.
    pub fn aes_parall() -> Self {
        let mut d = Self::aes128_st();
        d.name = "AES-PARALL".into();
        d.pipelines.extend(Self::aes256_st().pipelines);
        d
    }

    /// One merged pipeline serving two tags. `sbox_stages` comes from the
    /// composed graph (4 for the merged AES graph).
    pub fn aes_reconf(sbox_stages: usize) -> Self {
        Self {
            name: "AES-RECONF".into(),
            pipelines: vec![PipelineModel {
                standards: vec![AesStandard::Aes128, AesStandard::Aes256],
                concurrency: 2,
                sbox_stages,
            }],
        }
    }

    pub fn all(reconf_sbox_stages: usize) -> Vec<Self> {
        vec![
            Self::aes128_st(),
            Self::aes256_st(),
            Self::aes_parall(),
            Self::aes_reconf(reconf_sbox_stages),
        ]
    }

    /// Latency of each standard the design supports.
    pub fn latencies_ns(
        &self,
        stages_per_round: usize,
        clock: ClockModel,
    ) -> BTreeMap<AesStandard, f64> {
        let mut out = BTreeMap::new();
        for p in &self.pipelines {
            for &s in &p.standards {
                out.insert(s, latency_ns(s, stages_per_round, clock, p.sbox_stages));
            }
        }
        out
    }
}

/// Aggregate steady-state throughput: every pipeline completes one block
/// per cycle, however many tags share it.
pub fn throughput_gbps(design: &DesignModel, clock: ClockModel) -> f64 {
    BLOCK_BITS / clock.period_ns * design.pipelines.len() as f64
}

/// `(value - reference) / reference`, in percent.
pub fn percent_delta(value: f64, reference: f64) -> f64 {
    (value - reference) / reference * 100.0
}

/// One line of a resource/performance table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerfRow {
    pub design: String,
    pub latency_ns: BTreeMap<AesStandard, f64>,
    pub throughput_gbps: f64,
}

pub fn performance_table(
    designs: &[DesignModel],
    stages_per_round: usize,
    clock: ClockModel,
) -> Vec<PerfRow> {
    designs
        .iter()
        .map(|d| PerfRow {
            design: d.name.clone(),
            latency_ns: d.latencies_ns(stages_per_round, clock),
            throughput_gbps: throughput_gbps(d, clock),
        })
        .collect()
}
