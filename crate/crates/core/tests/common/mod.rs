#![allow(dead_code)]

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tagflow::aes::aes_encrypt_reference;
use tagflow::{ActorSpec, AesStandard, DataflowGraph};

pub fn random_blocks(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<u8>> {
    (0..n).map(|_| rng.gen::<[u8; 16]>().to_vec()).collect()
}

pub fn random_key(rng: &mut ChaCha8Rng, std: AesStandard) -> Vec<u8> {
    (0..std.key_bytes()).map(|_| rng.gen()).collect()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn reference(std: AesStandard, key: &[u8], data: &[Vec<u8>]) -> Vec<Vec<u8>> {
    data.iter()
        .map(|b| aes_encrypt_reference(b, key, std).unwrap().to_vec())
        .collect()
}

/// Shape of one random actor: (inputs, outputs, stages, capacity of each
/// input edge).
type ActorShape = (usize, usize, i64, Vec<usize>);

/// Valid acyclic graphs of identity actors with 128-bit ports. Every input
/// is driven by an earlier actor's free output or by a graph input, and
/// free outputs become graph outputs.
pub fn arb_graph(name: &'static str) -> impl Strategy<Value = DataflowGraph> {
    let actor = (
        1usize..=2,
        1usize..=2,
        1i64..=4,
        prop::collection::vec(1usize..=6, 2),
    );
    (prop::collection::vec(actor, 1..6), any::<u64>())
        .prop_map(move |(shapes, seed)| build(name, &shapes, seed))
}

fn build(name: &str, shapes: &[ActorShape], seed: u64) -> DataflowGraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut g = DataflowGraph::new(name);
    let mut free: Vec<(String, String)> = Vec::new();
    let mut n_in = 0;
    for (i, (ins, outs, stages, caps)) in shapes.iter().enumerate() {
        // Same number of inputs and outputs: identity copies i to i.
        let k = (*ins).max(*outs);
        let id = format!("a{i}");
        let mut a = ActorSpec::new(&id, "identity").param("stages", *stages);
        if rng.gen_bool(0.3) {
            a = a.param("note", "x");
        }
        for p in 0..k {
            a = a.input(&format!("i{p}"), 128);
        }
        for p in 0..k {
            a = a.output(&format!("o{p}"), 128);
        }
        g.add_actor(a);
        for (p, cap) in caps.iter().cycle().take(k).enumerate() {
            let port = format!("i{p}");
            if !free.is_empty() && rng.gen_bool(0.7) {
                let (src, sp) = free.swap_remove(rng.gen_range(0..free.len()));
                g.connect_with_capacity((&src, &sp), (&id, &port), *cap);
            } else {
                let name = if n_in == 0 {
                    "block".to_string()
                } else {
                    format!("in{n_in}")
                };
                g.add_input(&name, (&id, &port));
                n_in += 1;
            }
        }
        for p in 0..k {
            free.push((id.clone(), format!("o{p}")));
        }
    }
    free.sort();
    for (n, (a, p)) in free.iter().enumerate() {
        g.add_output(&format!("out{n}"), (a, p));
    }
    g
}

/// Copy of `g` under another name with the actors in `renamed` given new ids,
/// so that merging the two shares every other actor.
pub fn variant(g: &DataflowGraph, name: &str, renamed: &[bool]) -> DataflowGraph {
    let rename = |id: &str| -> String {
        let i: usize = id[1..].parse().unwrap();
        if renamed.get(i).copied().unwrap_or(false) {
            format!("{id}_v")
        } else {
            id.to_string()
        }
    };
    let mut v = g.clone();
    v.name = name.to_string();
    for a in &mut v.actors {
        a.id = rename(&a.id);
    }
    for e in &mut v.edges {
        e.src.actor = rename(&e.src.actor);
        e.dst.actor = rename(&e.dst.actor);
    }
    for b in v.inputs.iter_mut().chain(v.outputs.iter_mut()) {
        b.port.actor = rename(&b.port.actor);
    }
    v
}
