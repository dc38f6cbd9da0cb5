//! The five power test cases run on the four AES designs.

use std::collections::BTreeMap;
use std::fmt::Write;

use clap::ValueEnum;
use serde::Serialize;

use tagflow::aes_graph::{build_aes_graph, build_merged_aes};
use tagflow::energy::{
    compose_parall, Mode, PowerProfile, AES128_ST, AES256_ST, AES_PARALL, AES_RECONF,
};
use tagflow::perf::{merged_critical_path, performance_table, ClockModel, DesignModel, PerfRow};
use tagflow::{AesStandard, Engine, EngineError, EngineOptions, KernelRegistry, TagId, Workload};

/// Blocks per stream in the high-load cases.
pub const HIGH_BLOCKS: usize = 100;

const KEY: [u8; 32] = [
    0x00, 0x01, 0x02, 0x03, 0x04, 0x05, 0x06, 0x07, 0x08, 0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x0e, 0x0f,
    0x10, 0x11, 0x12, 0x13, 0x14, 0x15, 0x16, 0x17, 0x18, 0x19, 0x1a, 0x1b, 0x1c, 0x1d, 0x1e, 0x1f,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CaseArg {
    Idle,
    Low,
    High128,
    High256,
    HighBoth,
    All,
}

impl CaseArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            CaseArg::Idle => vec![Mode::Idle],
            CaseArg::Low => vec![Mode::Low],
            CaseArg::High128 => vec![Mode::High128],
            CaseArg::High256 => vec![Mode::High256],
            CaseArg::HighBoth => vec![Mode::HighBoth],
            CaseArg::All => Mode::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Pipe {
    Single(AesStandard),
    Merged,
}

struct Design {
    name: &'static str,
    pipes: Vec<Pipe>,
}

fn designs() -> Vec<Design> {
    use AesStandard::*;
    vec![
        Design {
            name: AES128_ST,
            pipes: vec![Pipe::Single(Aes128)],
        },
        Design {
            name: AES256_ST,
            pipes: vec![Pipe::Single(Aes256)],
        },
        Design {
            name: AES_PARALL,
            pipes: vec![Pipe::Single(Aes128), Pipe::Single(Aes256)],
        },
        Design {
            name: AES_RECONF,
            pipes: vec![Pipe::Merged],
        },
    ]
}

fn supports(pipe: Pipe, std: AesStandard) -> bool {
    match pipe {
        Pipe::Single(s) => s == std,
        Pipe::Merged => std != AesStandard::Aes192,
    }
}

/// Streams of a test case: (standard, blocks).
fn streams(mode: Mode, d: &Design) -> Option<Vec<(AesStandard, usize)>> {
    use AesStandard::*;
    let can = |s| d.pipes.iter().any(|p| supports(*p, s));
    let want = match mode {
        Mode::Idle => vec![],
        // A single block through the design's first standard.
        Mode::Low => vec![(if can(Aes128) { Aes128 } else { Aes256 }, 1)],
        Mode::High128 => vec![(Aes128, HIGH_BLOCKS)],
        Mode::High256 => vec![(Aes256, HIGH_BLOCKS)],
        Mode::HighBoth => vec![(Aes128, HIGH_BLOCKS), (Aes256, HIGH_BLOCKS)],
    };
    want.iter().all(|(s, _)| can(*s)).then_some(want)
}

fn blocks(n: usize, salt: u8) -> Vec<Vec<u8>> {
    (0..n)
        .map(|i| {
            let mut b: Vec<u8> = (0u8..16).map(|j| j.wrapping_mul(0x11) ^ salt).collect();
            b[8..].copy_from_slice(&(i as u64).to_be_bytes());
            b
        })
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct PipeResult {
    pub graph: String,
    pub cycles: u64,
    pub blocks_out: usize,
    pub blocks_per_cycle: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CaseResult {
    pub design: String,
    pub case: Mode,
    /// Cycles until the busiest pipeline drained.
    pub cycles: u64,
    pub blocks_out: usize,
    pub pipelines: Vec<PipeResult>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PowerRow {
    pub design: String,
    pub mw: BTreeMap<Mode, Option<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub clock_ns: f64,
    pub stages_per_round: usize,
    pub cases: Vec<CaseResult>,
    /// Measured single-block latency per design and standard.
    pub latency_cycles: BTreeMap<String, BTreeMap<AesStandard, u64>>,
    pub performance: Vec<PerfRow>,
    pub power: Option<Vec<PowerRow>>,
    /// Rounded change of AES-RECONF power against AES-PARALL per mode.
    pub power_delta_pct: Option<BTreeMap<Mode, i64>>,
}

fn run_pipe(
    pipe: Pipe,
    spr: usize,
    streams: &[(AesStandard, usize)],
) -> Result<PipeResult, EngineError> {
    let reg = KernelRegistry::with_builtins();
    let mut w = Workload::new();
    let (mut engine, graph) = match pipe {
        Pipe::Single(s) => (
            Engine::new(&build_aes_graph(s, spr), &reg, EngineOptions::default())?,
            s.name().to_string(),
        ),
        Pipe::Merged => {
            let m = build_merged_aes(spr, 2)?;
            (
                Engine::new_merged(&m, &reg, EngineOptions::default())?,
                m.base.name.clone(),
            )
        }
    };
    for (i, (s, n)) in streams
        .iter()
        .filter(|(s, _)| supports(pipe, *s))
        .enumerate()
    {
        let config = match pipe {
            Pipe::Single(_) => None,
            Pipe::Merged => Some(u32::from(*s == AesStandard::Aes256)),
        };
        w.add_blocks(
            TagId(i as u32),
            config,
            &KEY[..s.key_bytes()],
            blocks(*n, i as u8),
        );
    }
    let r = engine.run(&w, 1_000_000)?;
    Ok(PipeResult {
        graph,
        cycles: r.metrics.total_cycles,
        blocks_out: r.metrics.blocks_out(),
        blocks_per_cycle: r.metrics.aggregate_rate(),
    })
}

/// Parallel pipelines each get the streams they support; a stream is never
/// split across pipelines.
fn assign(d: &Design, streams: &[(AesStandard, usize)]) -> Vec<Vec<(AesStandard, usize)>> {
    let mut out = vec![Vec::new(); d.pipes.len()];
    for st in streams {
        let p = d
            .pipes
            .iter()
            .position(|p| supports(*p, st.0))
            .expect("checked");
        out[p].push(*st);
    }
    out
}

pub fn run(
    case: CaseArg,
    spr: usize,
    clock: ClockModel,
    profiles: Option<&[PowerProfile]>,
) -> Result<Report, EngineError> {
    let mut cases = Vec::new();
    let mut latency_cycles = BTreeMap::new();
    for d in designs() {
        for mode in case.modes() {
            let Some(st) = streams(mode, &d) else {
                continue;
            };
            let mut pipelines = Vec::new();
            for (pipe, s) in d.pipes.iter().zip(assign(&d, &st)) {
                pipelines.push(run_pipe(*pipe, spr, &s)?);
            }
            cases.push(CaseResult {
                design: d.name.to_string(),
                case: mode,
                cycles: pipelines.iter().map(|p| p.cycles).max().unwrap_or(0),
                blocks_out: pipelines.iter().map(|p| p.blocks_out).sum(),
                pipelines,
            });
        }
        let mut lat = BTreeMap::new();
        for std in [AesStandard::Aes128, AesStandard::Aes256] {
            let Some(p) = d.pipes.iter().find(|p| supports(**p, std)) else {
                continue;
            };
            lat.insert(std, run_pipe(*p, spr, &[(std, 1)])?.cycles);
        }
        latency_cycles.insert(d.name.to_string(), lat);
    }

    let reconf_sboxes = merged_critical_path(&build_merged_aes(spr, 2)?, 0)
        .map(|t| t.sbox_stages)
        .unwrap_or(0);
    let performance = performance_table(&DesignModel::all(reconf_sboxes), spr, clock);

    let (power, power_delta_pct) = match profiles {
        None => (None, None),
        Some(ps) => power_table(ps),
    };
    Ok(Report {
        clock_ns: clock.period_ns,
        stages_per_round: spr,
        cases,
        latency_cycles,
        performance,
        power,
        power_delta_pct,
    })
}

fn power_table(ps: &[PowerProfile]) -> (Option<Vec<PowerRow>>, Option<BTreeMap<Mode, i64>>) {
    let find = |n: &str| ps.iter().find(|p| p.design == n);
    let composed = match (find(AES128_ST), find(AES256_ST)) {
        (Some(a), Some(b)) => compose_parall(a, b).ok(),
        _ => None,
    };
    let mut rows = Vec::new();
    for name in [AES128_ST, AES256_ST, AES_PARALL, AES_RECONF] {
        let p = if name == AES_PARALL && composed.is_some() {
            composed.as_ref()
        } else {
            find(name)
        };
        rows.push(PowerRow {
            design: name.to_string(),
            mw: Mode::ALL
                .iter()
                .map(|m| (*m, p.and_then(|p| p.mw.get(m).copied())))
                .collect(),
        });
    }
    let deltas = (|| {
        let mut d = BTreeMap::new();
        for m in Mode::ALL {
            let p = rows[2].mw[&m]?;
            let r = rows[3].mw[&m]?;
            d.insert(m, tagflow::energy::power_delta_pct(r, p).round() as i64);
        }
        Some(d)
    })();
    (Some(rows), deltas)
}

pub fn csv(r: &Report) -> String {
    let mut s = String::from("design,case,cycles,blocks_out,blocks_per_cycle\n");
    for c in &r.cases {
        let rate: Option<f64> = c
            .pipelines
            .iter()
            .filter_map(|p| p.blocks_per_cycle)
            .reduce(|a, b| a + b);
        let _ = writeln!(
            s,
            "{},{},{},{},{}",
            c.design,
            c.case,
            c.cycles,
            c.blocks_out,
            rate.map(|x| format!("{x:.6}")).unwrap_or_default()
        );
    }
    s
}

pub fn text(r: &Report) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "clock {:.4} ns, {} stages per round",
        r.clock_ns, r.stages_per_round
    );
    let _ = writeln!(
        s,
        "\n{:<12}{:<10}{:>8}{:>8}{:>14}",
        "design", "case", "cycles", "blocks", "blocks/cycle"
    );
    for c in &r.cases {
        let rate: Option<f64> = c
            .pipelines
            .iter()
            .filter_map(|p| p.blocks_per_cycle)
            .reduce(|a, b| a + b);
        let _ = writeln!(
            s,
            "{:<12}{:<10}{:>8}{:>8}{:>14}",
            c.design,
            c.case.as_str(),
            c.cycles,
            c.blocks_out,
            rate.map(|x| format!("{x:.3}"))
                .unwrap_or_else(|| "-".into())
        );
    }
    let _ = writeln!(
        s,
        "\n{:<12}{:>22}{:>22}{:>10}",
        "design", "latency 128 cyc/ns", "latency 256 cyc/ns", "Gbps"
    );
    for p in &r.performance {
        let cell = |std: AesStandard| match (
            r.latency_cycles.get(&p.design).and_then(|l| l.get(&std)),
            p.latency_ns.get(&std),
        ) {
            (Some(c), Some(ns)) => format!("{c} / {ns:.1}"),
            _ => "-".into(),
        };
        let _ = writeln!(
            s,
            "{:<12}{:>22}{:>22}{:>10.2}",
            p.design,
            cell(AesStandard::Aes128),
            cell(AesStandard::Aes256),
            p.throughput_gbps
        );
    }
    if let Some(rows) = &r.power {
        let _ = write!(s, "\n{:<12}", "mW");
        for m in Mode::ALL {
            let _ = write!(s, "{:>10}", m.as_str());
        }
        let _ = writeln!(s);
        for row in rows {
            let _ = write!(s, "{:<12}", row.design);
            for m in Mode::ALL {
                let v = row.mw[&m]
                    .map(|v| format!("{v}"))
                    .unwrap_or_else(|| "-".into());
                let _ = write!(s, "{v:>10}");
            }
            let _ = writeln!(s);
        }
        if let Some(d) = &r.power_delta_pct {
            let _ = write!(s, "{:<12}", "%");
            for m in Mode::ALL {
                let _ = write!(s, "{:>9}%", d[&m]);
            }
            let _ = writeln!(s);
        }
    }
    s
}
