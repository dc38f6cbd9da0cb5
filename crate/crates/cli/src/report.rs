//! Rendering of run and energy results.

use std::fmt::Write;

use serde_json::{json, Map, Value};

use tagflow::energy::Comparison;
use tagflow::perf::ClockModel;
use tagflow::{DataflowGraph, ReadMode, RunReport};

pub fn run_json(
    g: &DataflowGraph,
    mode: ReadMode,
    r: &RunReport,
    clock: Option<ClockModel>,
) -> Value {
    let m = &r.metrics;
    let mut per_tag = Map::new();
    for (tag, t) in &m.per_tag {
        let mut v = json!({
            "blocks_in": t.blocks_in,
            "blocks_out": t.blocks_out,
            "first_output_cycle": t.first_output_cycle,
            "last_output_cycle": t.last_output_cycle,
            "latency_cycles": t.latencies,
            "steady_state_blocks_per_cycle": t.steady_state_rate(),
        });
        if let Some(c) = clock {
            v["latency_ns"] = json!(t.latencies.iter().map(|l| c.ns(*l)).collect::<Vec<_>>());
        }
        per_tag.insert(tag.0.to_string(), v);
    }
    let mut metrics = json!({
        "total_cycles": m.total_cycles,
        "deadlock": m.deadlock,
        "timed_out": m.timed_out,
        "firings": m.firings,
        "blocks_out": m.blocks_out(),
        "aggregate_blocks_per_cycle": m.aggregate_rate(),
        "per_tag": per_tag,
    });
    if let Some(c) = clock {
        metrics["clock_ns"] = json!(c.period_ns);
        metrics["total_ns"] = json!(c.ns(m.total_cycles));
    }

    let mut outputs = Map::new();
    for tag in r.blocks.keys() {
        let mut by_port = Map::new();
        for name in g.outputs.iter().map(|o| &o.name) {
            let hexes: Vec<String> = r.outputs(*tag, name).iter().map(hex::encode).collect();
            if !hexes.is_empty() {
                by_port.insert(name.clone(), json!(hexes));
            }
        }
        outputs.insert(tag.0.to_string(), Value::Object(by_port));
    }
    json!({
        "graph": g.name,
        "read_mode": mode,
        "metrics": metrics,
        "outputs": outputs,
    })
}

/// One row per delivered output token.
pub fn run_csv(r: &RunReport) -> String {
    let mut s =
        String::from("tag,block,output,inject_cycle,complete_cycle,latency_cycles,payload\n");
    for (tag, blocks) in &r.blocks {
        for (i, b) in blocks.iter().enumerate() {
            let (done, lat) = match b.complete_cycle {
                Some(c) => (c.to_string(), (c - b.inject_cycle + 1).to_string()),
                None => (String::new(), String::new()),
            };
            for (name, payload) in &b.outputs {
                let _ = writeln!(
                    s,
                    "{},{i},{name},{},{done},{lat},{}",
                    tag.0,
                    b.inject_cycle,
                    hex::encode(payload)
                );
            }
        }
    }
    s
}

pub fn run_text(r: &RunReport, clock: Option<ClockModel>) -> String {
    let m = &r.metrics;
    let mut s = String::new();
    let status = if m.deadlock {
        "DEADLOCK"
    } else if m.timed_out {
        "TIMED OUT"
    } else {
        "completed"
    };
    let _ = writeln!(
        s,
        "{status} in {} cycles, {} blocks out",
        m.total_cycles,
        m.blocks_out()
    );
    for (tag, t) in &m.per_tag {
        let lat = match (t.latencies.iter().min(), t.latencies.iter().max()) {
            (Some(a), Some(b)) if a == b => format!("latency {a} cycles"),
            (Some(a), Some(b)) => format!("latency {a}..{b} cycles"),
            _ => "no output".to_string(),
        };
        let ns = match (clock, t.latencies.first()) {
            (Some(c), Some(l)) => format!(" (first {:.2} ns)", c.ns(*l)),
            _ => String::new(),
        };
        let _ = writeln!(
            s,
            "  {tag}: {}/{} blocks, {lat}{ns}",
            t.blocks_out, t.blocks_in
        );
        for (name, _) in r.blocks[tag]
            .first()
            .map(|b| b.outputs.clone())
            .unwrap_or_default()
        {
            for p in r.outputs(*tag, &name) {
                let _ = writeln!(s, "    {name} {}", hex::encode(p));
            }
        }
    }
    s
}

pub fn energy_text(c: &Comparison) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "battery {} mAh at {} V; AES-PARALL {}",
        c.battery.capacity_mah,
        c.battery.voltage_v,
        if c.parall_composed {
            "composed from the single designs"
        } else {
            "as supplied"
        }
    );
    let _ = writeln!(
        s,
        "{:<10}{:>12}{:>12}{:>8}",
        "mode", "PARALL mW", "RECONF mW", "%"
    );
    for m in &c.modes {
        let _ = writeln!(
            s,
            "{:<10}{:>12.2}{:>12.2}{:>7}%",
            m.mode.as_str(),
            m.parall_mw,
            m.reconf_mw,
            m.delta_pct_rounded
        );
    }
    let _ = writeln!(
        s,
        "{:<10}{:>12}{:>12}{:>12}{:>12}{:>9}",
        "scenario", "PARALL mW", "RECONF mW", "PARALL h", "RECONF h", "%"
    );
    for r in &c.scenarios {
        let _ = writeln!(
            s,
            "{:<10}{:>12.2}{:>12.2}{:>12.1}{:>12.1}{:>+8.1}%",
            r.id, r.parall_mw, r.reconf_mw, r.parall_h, r.reconf_h, r.lifetime_delta_pct
        );
    }
    let _ = writeln!(
        s,
        "average lifetime change {:+.1}%",
        c.average_lifetime_delta_pct
    );
    s
}
