//! Small instances whose graphs, patterns and optima are known by hand.

use std::collections::BTreeSet;

use arcflow::builder::{build_baseline_merged, build_graph, BuildOptions};
use arcflow::graph::{enumerate_paths, to_dot, valid_item_patterns, DotOptions, NodeId, Pattern, DEFAULT_PATH_LIMIT};
use arcflow::instance::{parse_mvp, parse_vbp, ItemRef, WeightVec};
use arcflow::miplite::{solve_ip, IpStatus, SolverOptions};
use arcflow::model::{build_full_model, decompose_solution, ExactSet};
use arcflow::oracle::{enumerate_patterns, solve_exact_covering, DEFAULT_PATTERN_LIMIT, DEFAULT_STATE_LIMIT};

const E1: &str = "1\n7\n3\n5 1\n3 1\n2 1\n";
const E2: &str = "1 2\n5 3\n3 2\n2\n2 1\n3\n1 2\n2\n1\n";

fn pattern(bin: usize, uses: &[(u32, u32, u32)]) -> Pattern {
    Pattern::with_uses(bin, uses.iter().map(|&(i, j, n)| (ItemRef::new(i, j), n)))
}

#[test]
fn e1_graph_encodes_five_patterns() {
    let inst = parse_vbp(E1).unwrap();
    let g = build_graph(&inst, &BuildOptions::default()).unwrap();
    let expected: BTreeSet<Pattern> = [
        pattern(0, &[(1, 1, 1)]),
        pattern(0, &[(2, 1, 1)]),
        pattern(0, &[(3, 1, 1)]),
        pattern(0, &[(1, 1, 1), (3, 1, 1)]),
        pattern(0, &[(2, 1, 1), (3, 1, 1)]),
    ]
    .into();
    assert_eq!(enumerate_paths(&g, DEFAULT_PATH_LIMIT).unwrap(), expected);
    assert_eq!(enumerate_patterns(&inst, 0, DEFAULT_PATTERN_LIMIT).unwrap(), expected);
}

#[test]
fn repeated_item_has_two_patterns() {
    let inst = parse_vbp("1\n7\n1\n3 2\n").unwrap();
    let g = build_graph(&inst, &BuildOptions::default()).unwrap();
    let expected: BTreeSet<Pattern> = [pattern(0, &[(1, 1, 1)]), pattern(0, &[(1, 1, 2)])].into();
    assert_eq!(enumerate_paths(&g, DEFAULT_PATH_LIMIT).unwrap(), expected);
}

#[test]
fn one_item_graph_and_dot() {
    let inst = parse_mvp("1 1\n7 1\n1\n1 1\n7\n").unwrap();
    let g = build_graph(&inst, &BuildOptions::default()).unwrap();
    assert_eq!(g.num_nodes(), 3);
    assert_eq!(g.num_arcs(), 3);
    let seven = NodeId::internal(WeightVec::new(vec![7]));
    let arcs = g.arc_triples();
    assert!(arcs.contains(&(NodeId::Source, seven.clone(), ItemRef::new(1, 1))));
    assert!(arcs.contains(&(seven, NodeId::Target(0), ItemRef::LOSS)));
    assert!(arcs.contains(&(NodeId::Target(0), NodeId::Source, ItemRef::LOSS)));

    let plain = to_dot(&g, DotOptions::default());
    assert!(plain.starts_with("digraph"));
    assert_eq!(plain.matches("->").count(), 2);
    assert_eq!(plain.matches("dashed").count(), 1);
    let with_feedback = to_dot(&g, DotOptions { include_feedback: true });
    assert_eq!(with_feedback.matches("->").count(), 3);
    assert!(with_feedback.contains("dotted"));
}

#[test]
fn e2_solves_to_five_and_matches_baseline() {
    let inst = parse_mvp(E2).unwrap();
    assert_eq!(solve_exact_covering(&inst, DEFAULT_STATE_LIMIT).unwrap().0, 5);
    let g = build_graph(&inst, &BuildOptions::default()).unwrap();
    let ip = solve_ip(
        &build_full_model(&g, &inst, &ExactSet::unit_demand(&inst)).unwrap().program,
        &SolverOptions::default(),
    )
    .unwrap();
    assert_eq!(ip.status, IpStatus::Optimal);
    assert_eq!(ip.objective, Some(5.0));
    let cost: i64 = decompose_solution(&g, &ip.values)
        .unwrap()
        .iter()
        .map(|(p, n)| inst.bins()[p.bin].cost * *n as i64)
        .sum();
    assert_eq!(cost, 5);

    let baseline = build_baseline_merged(&inst, &BuildOptions::default()).unwrap();
    assert_eq!(
        valid_item_patterns(&baseline, &inst, DEFAULT_PATH_LIMIT).unwrap(),
        valid_item_patterns(&g, &inst, DEFAULT_PATH_LIMIT).unwrap()
    );
}

#[test]
fn identical_bin_types_duplicate_baseline_structure() {
    let inst = parse_mvp("1 2\n6 1\n6 1\n2\n1 1\n4\n2 1\n2\n").unwrap();
    let g = build_graph(&inst, &BuildOptions::default()).unwrap();
    let baseline = build_baseline_merged(&inst, &BuildOptions::default()).unwrap();
    assert!(baseline.num_nodes() >= g.num_nodes());
    assert_eq!(
        valid_item_patterns(&baseline, &inst, DEFAULT_PATH_LIMIT).unwrap(),
        valid_item_patterns(&g, &inst, DEFAULT_PATH_LIMIT).unwrap()
    );
}
