mod common;

use proptest::prelude::*;
use tagflow::composer::merge;
use tagflow::format::{
    parse_document, parse_graph, parse_merged, serialize_graph, serialize_merged, FormatError,
};
use tagflow::graph::{validate_graph, Rule};

proptest! {
    #[test]
    fn graph_round_trip(g in common::arb_graph("g")) {
        prop_assert!(validate_graph(&g).is_empty(), "{:?}", validate_graph(&g));
        let text = serialize_graph(&g);
        let back = parse_graph(&text).unwrap();
        prop_assert!(back.structurally_equal(&g));
        prop_assert_eq!(serialize_graph(&back), text);
    }

    #[test]
    fn merged_round_trip(g in common::arb_graph("g"), renamed in prop::collection::vec(any::<bool>(), 6)) {
        let v = common::variant(&g, "v", &renamed);
        let m = merge(&[g, v], 2).unwrap();
        let text = serialize_merged(&m);
        let back = parse_merged(&text).unwrap();
        prop_assert!(back.structurally_equal(&m));
        prop_assert_eq!(serialize_merged(&back), text);
    }
}

const SMALL: &str = r#"{
  "name": "g",
  "actors": [
    {"id": "a", "kind": "identity", "params": {"stages": 2},
     "inputs": [{"name": "in", "width_bits": 128}],
     "outputs": [{"name": "out", "width_bits": 128}]}
  ],
  "edges": [],
  "inputs": [{"name": "x", "port": "a.in"}],
  "outputs": [{"name": "y", "port": "a.out"}]
}"#;

fn rules(text: &str) -> Vec<Rule> {
    match parse_document(text) {
        Err(FormatError::Validation(v)) => v.into_iter().map(|v| v.rule).collect(),
        other => panic!("expected validation error, got {other:?}"),
    }
}

#[test]
fn small_document_parses() {
    let g = parse_graph(SMALL).unwrap();
    assert_eq!(g.actors[0].stages(), 2);
}

#[test]
fn schema_errors() {
    for bad in [
        SMALL.replace("\"edges\": [],", "\"edges\": [], \"extra\": 1,"),
        SMALL.replace("\"port\": \"a.in\"", "\"port\": \"a_in\""),
        SMALL.replace("\"stages\": 2", "\"stages\": 2.5"),
        SMALL.replace(
            "\"width_bits\": 128}],\n     \"outputs\"",
            "\"width_bits\": -8}],\n     \"outputs\"",
        ),
        "not json".to_string(),
    ] {
        assert!(
            matches!(parse_document(&bad), Err(FormatError::Schema(_))),
            "{bad}"
        );
    }
}

#[test]
fn each_rule_is_rejected_at_parse_time() {
    let cases = [
        (
            SMALL.replace("{\"name\": \"x\"", "{\"name\": \"x y\""),
            Rule::InvalidIdentifier,
        ),
        (
            SMALL.replace(
                "\"width_bits\": 128}],\n     \"outputs\"",
                "\"width_bits\": 12}],\n     \"outputs\"",
            ),
            Rule::InvalidWidth,
        ),
        (
            SMALL.replace(
                "\"outputs\": [{\"name\": \"out\"",
                "\"outputs\": [{\"name\": \"out\", \"width_bits\": 8}, {\"name\": \"out\"",
            ),
            Rule::DuplicatePortName,
        ),
        (
            SMALL.replace(
                "\"edges\": []",
                "\"edges\": [{\"src\": \"a.out\", \"dst\": \"b.in\"}]",
            ),
            Rule::DanglingEdge,
        ),
        (
            SMALL.replace("\"port\": \"a.in\"", "\"port\": \"b.in\""),
            Rule::DanglingBoundary,
        ),
        (
            SMALL.replace(
                "{\"name\": \"x\", \"port\": \"a.in\"}",
                "{\"name\": \"x\", \"port\": \"a.in\"}, {\"name\": \"x2\", \"port\": \"a.in\"}",
            ),
            Rule::MultipleDrivers,
        ),
        (
            SMALL.replace(
                "{\"name\": \"y\", \"port\": \"a.out\"}",
                "{\"name\": \"y\", \"port\": \"a.out\"}, {\"name\": \"y2\", \"port\": \"a.out\"}",
            ),
            Rule::MultipleReaders,
        ),
        (
            SMALL.replace(
                "{\"name\": \"x\", \"port\": \"a.in\"}",
                "{\"name\": \"x\", \"port\": \"a.in\"}, {\"name\": \"x\", \"port\": \"b.in\"}",
            ),
            Rule::DuplicateBoundaryName,
        ),
        (
            SMALL.replace(
                "{\"name\": \"x\", \"port\": \"a.in\"}",
                "{\"name\": \"x\", \"port\": \"a.in\", \"capacity\": 0}",
            ),
            Rule::InvalidCapacity,
        ),
    ];
    for (text, rule) in cases {
        let got = rules(&text);
        assert!(got.contains(&rule), "{rule:?} not in {got:?}\n{text}");
    }
}

#[test]
fn duplicate_actor_and_width_mismatch() {
    let two = SMALL.replace(
        "\"edges\": [],",
        "\"edges\": [{\"src\": \"a.out\", \"dst\": \"b.in\"}],",
    )
    .replace(
        "  ],\n  \"edges\"",
        "  ,{\"id\": \"b\", \"kind\": \"identity\", \"inputs\": [{\"name\": \"in\", \"width_bits\": 64}], \"outputs\": []}\n  ],\n  \"edges\"",
    );
    assert!(rules(&two).contains(&Rule::WidthMismatch), "{two}");
    let dup = two.replace("\"id\": \"b\"", "\"id\": \"a\"");
    assert!(rules(&dup).contains(&Rule::DuplicateActorId));
}

fn shipped(path: &str) -> String {
    std::fs::read_to_string(format!("{}/../../data/{path}", env!("CARGO_MANIFEST_DIR"))).unwrap()
}

#[test]
fn shipped_graphs_match_the_builders() {
    use tagflow::aes_graph::{build_aes_graph, build_merged_aes};
    use tagflow::AesStandard;
    let g = parse_graph(&shipped("graphs/aes128.df.json")).unwrap();
    assert!(g.structurally_equal(&build_aes_graph(AesStandard::Aes128, 4)));
    let g = parse_graph(&shipped("graphs/aes256.df.json")).unwrap();
    assert!(g.structurally_equal(&build_aes_graph(AesStandard::Aes256, 4)));
    let m = parse_merged(&shipped("graphs/aes_merged.df.json")).unwrap();
    assert!(m.structurally_equal(&build_merged_aes(4, 2).unwrap()));
}

#[test]
fn shipped_skew_merge_is_reproducible() {
    let fast = parse_graph(&shipped("graphs/skew_fast.df.json")).unwrap();
    let slow = parse_graph(&shipped("graphs/skew_slow.df.json")).unwrap();
    let m = parse_merged(&shipped("graphs/skew_merged.df.json")).unwrap();
    assert!(m.structurally_equal(&merge(&[fast, slow], m.max_threads).unwrap()));
}

#[test]
fn shipped_workloads_parse() {
    for name in [
        "idle",
        "low",
        "high_both",
        "skew_interleaved",
        "strict_deadlock",
    ] {
        tagflow::parse_workload(&shipped(&format!("workloads/{name}.wl"))).unwrap();
    }
}
