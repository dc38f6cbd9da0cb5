//! Unrolled AES encryption pipelines as dataflow graphs.
//!
//! Every graph has the same outline:
//!
//! ```text
//!   block ──► ark0 ──► round1 ──► … ──► round{Nr-1} ──► final ──► cipher
//!   key0  ──►  ┘         ▲                  ▲             ▲
//!   key ──► kx{std}_1 ───┴─► kx{std}_2 … ───┴─► kx{std}_Nr┘
//! ```
//!
//! `ark0` whitens the block with the first 16 key bytes. Each key-expansion
//! actor carries a 256-bit key register (the newest Nk schedule words,
//! zero-padded) and emits the round key for its round. Round actors are the
//! same kernel for every standard, so composing two standards shares them.
//!
//! The first expansion actor is single-stage; the others have as many
//! stages as a round so that round keys arrive exactly when needed.

use crate::aes::{self, AesStandard, Block};
use crate::composer::{merge, ComposeError, MergedGraph};
use crate::graph::{ActorSpec, DataflowGraph};
use crate::kernel::{KernelError, KernelRegistry};

pub const ADD_ROUND_KEY: &str = "add_round_key";
pub const ROUND: &str = "aes_round";
pub const KEY_EXPAND: &str = "aes_key_expand";

/// Width of the key register travelling along the expansion chain.
pub const KEY_REGISTER_BITS: u32 = 256;

pub const DEFAULT_STAGES_PER_ROUND: usize = 4;

pub fn round_actor_id(std: AesStandard, round: usize) -> String {
    if round == std.rounds() {
        "final".to_string()
    } else {
        format!("round{round}")
    }
}

pub fn key_actor_id(std: AesStandard, round: usize) -> String {
    format!("kx{}_{round}", &std.name()[3..])
}

/// Builds the unrolled encryption graph for `std`.
pub fn build_aes_graph(std: AesStandard, stages_per_round: usize) -> DataflowGraph {
    assert!(stages_per_round >= 1, "a round needs at least one stage");
    let spr = stages_per_round as i64;
    let nr = std.rounds();
    let mut g = DataflowGraph::new(std.name());

    g.add_actor(
        ActorSpec::new("ark0", ADD_ROUND_KEY)
            .param("stages", 1)
            .input("state", 128)
            .input("key", 128)
            .output("state", 128),
    );
    for r in 1..=nr {
        let is_final = r == nr;
        let mut a = ActorSpec::new(round_actor_id(std, r), ROUND);
        if !is_final {
            a = a.param("round", r as i64);
        }
        g.add_actor(
            a.param("is_final", is_final as i64)
                .param("stages", spr)
                .input("state", 128)
                .input("key", 128)
                .output("state", 128),
        );
    }
    for r in 1..=nr {
        let mut a = ActorSpec::new(key_actor_id(std, r), KEY_EXPAND)
            .param("standard", std.name())
            .param("round", r as i64)
            .param("stages", if r == 1 { 1 } else { spr })
            .input("key", KEY_REGISTER_BITS)
            .output("rk", 128);
        if r < nr {
            a = a.output("next", KEY_REGISTER_BITS);
        }
        g.add_actor(a);
    }

    let rounds: Vec<String> = (1..=nr).map(|r| round_actor_id(std, r)).collect();
    let keys: Vec<String> = (1..=nr).map(|r| key_actor_id(std, r)).collect();
    g.connect(("ark0", "state"), (&rounds[0], "state"));
    for w in rounds.windows(2) {
        g.connect((&w[0], "state"), (&w[1], "state"));
    }
    for (k, r) in keys.iter().zip(&rounds) {
        g.connect((k, "rk"), (r, "key"));
    }
    for w in keys.windows(2) {
        g.connect((&w[0], "next"), (&w[1], "key"));
    }
    g.add_input("block", ("ark0", "state"))
        .add_input("key0", ("ark0", "key"))
        .add_input("key", (&keys[0], "key"))
        .add_output("cipher", (&rounds[nr - 1], "state"));
    g
}

/// AES-128 and AES-256 merged into one two-configuration graph
/// (configuration 0 is AES-128, 1 is AES-256).
pub fn build_merged_aes(
    stages_per_round: usize,
    max_threads: u32,
) -> Result<MergedGraph, ComposeError> {
    merge(
        &[
            build_aes_graph(AesStandard::Aes128, stages_per_round),
            build_aes_graph(AesStandard::Aes256, stages_per_round),
        ],
        max_threads,
    )
}

pub fn register_kernels(r: &mut KernelRegistry) {
    r.register(ADD_ROUND_KEY, add_round_key_kernel);
    r.register(ROUND, round_kernel);
    r.register(KEY_EXPAND, key_expand_kernel);
}

fn block(actor: &ActorSpec, what: &str, p: &[u8]) -> Result<Block, KernelError> {
    aes::block_from_slice(p)
        .map_err(|_| KernelError::new(actor, format!("{what} must be 16 bytes, got {}", p.len())))
}

fn expect_inputs(actor: &ActorSpec, inputs: &[&[u8]], n: usize) -> Result<(), KernelError> {
    if inputs.len() != n {
        return Err(KernelError::new(
            actor,
            format!("expected {n} inputs, got {}", inputs.len()),
        ));
    }
    Ok(())
}

fn add_round_key_kernel(actor: &ActorSpec, inputs: &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError> {
    expect_inputs(actor, inputs, 2)?;
    let s = block(actor, "state", inputs[0])?;
    let k = block(actor, "key", inputs[1])?;
    Ok(vec![aes::add_round_key(&s, &k).to_vec()])
}

fn round_kernel(actor: &ActorSpec, inputs: &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError> {
    expect_inputs(actor, inputs, 2)?;
    let s = block(actor, "state", inputs[0])?;
    let k = block(actor, "key", inputs[1])?;
    let is_final = actor.int_param("is_final").unwrap_or(0) != 0;
    Ok(vec![aes::round(&s, &k, is_final).to_vec()])
}

/// Advances the key register to round `round` and emits that round key.
///
/// On entry the register holds schedule words ending at index
/// `max(Nk, 4*round) - 1`; on exit it ends at `max(Nk, 4*round + 4) - 1`.
fn key_expand_kernel(actor: &ActorSpec, inputs: &[&[u8]]) -> Result<Vec<Vec<u8>>, KernelError> {
    expect_inputs(actor, inputs, 1)?;
    let std: AesStandard = actor
        .str_param("standard")
        .ok_or_else(|| KernelError::new(actor, "missing standard param"))?
        .parse()
        .map_err(|e: aes::AesError| KernelError::new(actor, e.to_string()))?;
    let round = actor
        .int_param("round")
        .filter(|r| (1..=std.rounds() as i64).contains(r))
        .ok_or_else(|| KernelError::new(actor, "round param missing or out of range"))?
        as usize;
    let reg = inputs[0];
    if reg.len() != (KEY_REGISTER_BITS / 8) as usize {
        return Err(KernelError::new(
            actor,
            format!("key register must be 32 bytes, got {}", reg.len()),
        ));
    }
    let nk = std.key_words();
    let newest = nk.max(4 * round) - 1;
    let base = newest + 1 - nk;
    let mut words: Vec<u32> = reg[..4 * nk]
        .chunks_exact(4)
        .map(|c| u32::from_be_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    let target = 4 * round + 3;
    for i in newest + 1..=target {
        let w = aes::next_word(i, nk, words[words.len() - 1], words[words.len() - nk]);
        words.push(w);
    }
    let rk: Vec<u8> = words[4 * round - base..4 * round - base + 4]
        .iter()
        .flat_map(|w| w.to_be_bytes())
        .collect();
    let mut out = vec![rk];
    if actor.outputs.len() > 1 {
        let mut next = vec![0u8; (KEY_REGISTER_BITS / 8) as usize];
        for (j, w) in words[words.len() - nk..].iter().enumerate() {
            next[4 * j..4 * j + 4].copy_from_slice(&w.to_be_bytes());
        }
        out.push(next);
    }
    Ok(out)
}

/// Fits key material to a port: truncated or zero-padded to `width_bytes`.
pub fn fit_key(key: &[u8], width_bytes: usize) -> Vec<u8> {
    let mut v = key[..key.len().min(width_bytes)].to_vec();
    v.resize(width_bytes, 0);
    v
}
