mod common;

use proptest::prelude::*;
use tagflow::aes_graph::{build_aes_graph, build_merged_aes};
use tagflow::composer::tag_width;
use tagflow::{
    extract_config, merge, AesStandard, DataflowGraph, Engine, EngineOptions, KernelRegistry,
    MergedGraph, RunReport, TagId, Workload,
};

fn outputs_by_name(g: &DataflowGraph, r: &RunReport, tag: TagId) -> Vec<(String, Vec<Vec<u8>>)> {
    g.outputs
        .iter()
        .map(|o| (o.name.clone(), r.outputs(tag, &o.name)))
        .collect()
}

fn run_single(g: &DataflowGraph, key: &[u8], data: &[Vec<u8>]) -> RunReport {
    let reg = KernelRegistry::with_builtins();
    let mut e = Engine::new(g, &reg, EngineOptions::default()).unwrap();
    let mut w = Workload::new();
    w.add_blocks(TagId(0), None, key, data.to_vec());
    e.run(&w, 100_000).unwrap()
}

/// (configuration and tag, key, blocks)
type Stream<'a> = (u32, &'a [u8], &'a [Vec<u8>]);

fn run_merged(m: &MergedGraph, streams: &[Stream]) -> RunReport {
    let reg = KernelRegistry::with_builtins();
    let mut e = Engine::new_merged(m, &reg, EngineOptions::default()).unwrap();
    let mut w = Workload::new();
    for (cfg, key, data) in streams {
        w.add_blocks(TagId(*cfg), Some(*cfg), key, data.to_vec());
    }
    e.run(&w, 100_000).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn merge_then_extract_gives_back_the_inputs(
        g in common::arb_graph("g"),
        renamed in prop::collection::vec(any::<bool>(), 6),
    ) {
        let v = common::variant(&g, "v", &renamed);
        let m = merge(&[g.clone(), v.clone()], 2).unwrap();
        prop_assert!(m.validate().is_empty(), "{:?}", m.validate());
        prop_assert!(extract_config(&m, 0).unwrap().structurally_equal(&g));
        prop_assert!(extract_config(&m, 1).unwrap().structurally_equal(&v));

        let sum = g.actors.len() + v.actors.len();
        prop_assert!(m.actor_count() <= sum);
        let shared = m.shared_actors().len();
        prop_assert_eq!(m.actor_count(), sum - shared);
        let all_renamed = g.actors.iter().all(|a| renamed[a.id[1..].parse::<usize>().unwrap()]);
        prop_assert_eq!(m.actor_count() == sum, all_renamed);
    }

    #[test]
    fn each_configuration_computes_what_its_source_computes(
        g in common::arb_graph("g"),
        renamed in prop::collection::vec(any::<bool>(), 6),
        seed in any::<u64>(),
        n in 0usize..12,
    ) {
        let v = common::variant(&g, "v", &renamed);
        let m = merge(&[g.clone(), v.clone()], 2).unwrap();
        let mut rng = common::rng(seed);
        let key = common::random_blocks(&mut rng, 1).remove(0);
        let data = common::random_blocks(&mut rng, n);
        for (cfg, src) in [(0u32, &g), (1, &v)] {
            let alone = run_single(src, &key, &data);
            let merged = run_merged(&m, &[(cfg, &key, &data)]);
            prop_assert!(!alone.metrics.deadlock && !merged.metrics.deadlock);
            prop_assert_eq!(outputs_by_name(src, &merged, TagId(cfg)), outputs_by_name(src, &alone, TagId(0)));
        }
    }

    /// Two threads share fifo capacity, so reconvergent paths with shallow
    /// fifos can still stall them; whatever does come out matches the
    /// isolated run.
    #[test]
    fn concurrent_configurations_emit_prefixes_of_isolated_runs(
        g in common::arb_graph("g"),
        renamed in prop::collection::vec(any::<bool>(), 6),
        seed in any::<u64>(),
        n0 in 0usize..12,
        n1 in 0usize..12,
    ) {
        let v = common::variant(&g, "v", &renamed);
        let m = merge(&[g.clone(), v.clone()], 2).unwrap();
        let mut rng = common::rng(seed);
        let k0 = common::random_blocks(&mut rng, 1).remove(0);
        let k1 = common::random_blocks(&mut rng, 1).remove(0);
        let d0 = common::random_blocks(&mut rng, n0);
        let d1 = common::random_blocks(&mut rng, n1);

        let alone0 = run_single(&g, &k0, &d0);
        let alone1 = run_single(&v, &k1, &d1);
        let both = run_merged(&m, &[(0, &k0, &d0), (1, &k1, &d1)]);
        prop_assert!(!both.metrics.timed_out);
        for (src, tag, alone) in [(&g, TagId(0), &alone0), (&v, TagId(1), &alone1)] {
            let got = outputs_by_name(src, &both, tag);
            let want = outputs_by_name(src, alone, TagId(0));
            for ((name, got), (_, want)) in got.iter().zip(&want) {
                prop_assert!(want.starts_with(got), "{}", name);
                if !both.metrics.deadlock {
                    prop_assert_eq!(got, want);
                }
            }
        }
    }

    #[test]
    fn tag_width_covers_thread_count(n in 1u32..100_000) {
        let w = tag_width(n);
        prop_assert!(w >= 1);
        prop_assert!(1u64 << w >= n as u64);
        if w > 1 {
            prop_assert!(1u64 << (w - 1) < n as u64);
        }
    }
}

#[test]
fn merging_a_graph_with_itself_shares_everything() {
    let g = build_aes_graph(AesStandard::Aes128, 4);
    let mut twin = g.clone();
    twin.name = "twin".into();
    let m = merge(&[g.clone(), twin], 2).unwrap();
    assert!(m.sboxes.is_empty());
    assert_eq!(m.actor_count(), g.actors.len());
}

#[test]
fn aes_merge_counts() {
    let m = build_merged_aes(4, 2).unwrap();
    assert_eq!(m.actor_count(), 39);
    assert_eq!(m.shared_actors().len(), 11);
    assert_eq!(m.sboxes.len(), 13);
    assert_eq!(m.config(0).unwrap().name, "aes128");
    assert_eq!(m.config(1).unwrap().name, "aes256");
    assert_eq!(m.tag_width(), 1);
}

#[test]
fn aes_merge_preserves_function() {
    let m = build_merged_aes(4, 2).unwrap();
    let mut rng = common::rng(50);
    for (cfg, std) in [(0, AesStandard::Aes128), (1, AesStandard::Aes256)] {
        let key = common::random_key(&mut rng, std);
        let data = common::random_blocks(&mut rng, 50);
        let merged = run_merged(&m, &[(cfg, &key, &data)]);
        let alone = run_single(&build_aes_graph(std, 4), &key, &data);
        let want = common::reference(std, &key, &data);
        assert_eq!(merged.outputs(TagId(cfg), "cipher"), want, "{std}");
        assert_eq!(alone.outputs(TagId(0), "cipher"), want, "{std}");
    }
}
