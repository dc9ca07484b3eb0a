//! Graph post-processing: relabelling by longest paths from the source,
//! target connection with dominance-based transitive reduction, and removal
//! of parallel arcs that differ only in the incarnation.

use std::collections::{BTreeMap, HashSet};

use indexmap::IndexSet;

use crate::graph::{topo_order, ArcFlowGraph, GraphError, NodeId};
use crate::instance::{BinType, Instance, ItemRef, WeightVec};

/// Relabels every node with its per-dimension longest path from the source,
/// then drops self-loops and merges duplicate arcs (the smallest id wins).
///
/// Nodes are visited in forward topological order of `g`, which is the same
/// sequence as reverse topological order of the transpose graph. A node whose
/// new label is the zero vector becomes the source.
pub fn final_compression(g: &ArcFlowGraph, inst: &Instance) -> Result<ArcFlowGraph, GraphError> {
    let labels = longest_from_source(g, inst)?;
    let relabel = |idx: usize| -> NodeId {
        if labels[idx].is_zero() {
            NodeId::Source
        } else {
            NodeId::internal(labels[idx].clone())
        }
    };
    let mut arcs: IndexSet<(NodeId, NodeId, ItemRef)> = IndexSet::new();
    for a in g.arcs() {
        let (u, v) = (relabel(a.u), relabel(a.v));
        if u != v {
            arcs.insert((u, v, a.item));
        }
    }
    ArcFlowGraph::from_arcs([NodeId::Source], arcs)
}

/// `ψ(v)`: per-dimension longest path length from the source to each node.
pub fn longest_from_source(g: &ArcFlowGraph, inst: &Instance) -> Result<Vec<WeightVec>, GraphError> {
    let order = topo_order(g)?;
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); g.num_nodes()];
    for a in g.arcs() {
        if !g.is_feedback(a) {
            incoming[a.v].push(a.id);
        }
    }
    let zero = WeightVec::zeros(inst.dims());
    let mut psi = vec![zero.clone(); g.num_nodes()];
    for &v in &order {
        if v == g.source() {
            continue;
        }
        let mut best = zero.clone();
        for &id in &incoming[v] {
            let a = &g.arcs()[id];
            best = best.max_with(&psi[a.u].add(&inst.weight(a.item)));
        }
        psi[v] = best;
    }
    Ok(psi)
}

/// `t1 ≺ t2`: bin type `t1` dominates `t2` when its capacity is
/// coordinate-wise no larger (equal capacities: the lower index dominates).
pub fn dominates(t1: usize, t2: usize, bins: &[BinType]) -> bool {
    let (w1, w2) = (&bins[t1].capacity, &bins[t2].capacity);
    if w1 == w2 {
        t1 < t2
    } else {
        w1.fits_in(w2)
    }
}

/// Removes from `set` (in index order) every member dominated by a surviving
/// member, leaving the minimal elements.
fn reduce(mut set: Vec<bool>, bins: &[BinType]) -> Vec<bool> {
    for t in 0..bins.len() {
        if set[t] {
            for (t2, member) in set.iter_mut().enumerate() {
                if *member && dominates(t, t2, bins) {
                    *member = false;
                }
            }
        }
    }
    set
}

/// Connects internal nodes to the non-dominated targets they fit, links each
/// target to the targets it directly dominates, and adds one feedback arc
/// per bin type. Existing arcs keep their ids; new arcs are appended.
pub fn connect_targets(g: &ArcFlowGraph, bins: &[BinType]) -> ArcFlowGraph {
    let q = bins.len();
    let mut arcs = g.arc_triples();
    for v in g.nodes() {
        let NodeId::Internal { label, .. } = v else { continue };
        let fitting = bins.iter().map(|b| label.fits_in(&b.capacity)).collect();
        for (t, keep) in reduce(fitting, bins).into_iter().enumerate() {
            if keep {
                arcs.push((v.clone(), NodeId::Target(t), ItemRef::LOSS));
            }
        }
    }
    for t in 0..q {
        let dominated = (0..q).map(|t2| dominates(t, t2, bins)).collect();
        for (t2, keep) in reduce(dominated, bins).into_iter().enumerate() {
            if keep {
                arcs.push((NodeId::Target(t), NodeId::Target(t2), ItemRef::LOSS));
            }
        }
    }
    for t in 0..q {
        arcs.push((NodeId::Target(t), NodeId::Source, ItemRef::LOSS));
    }
    let targets = (0..q).map(NodeId::Target);
    ArcFlowGraph::from_arcs(g.nodes().iter().cloned().chain(targets), arcs).expect("input graph has a source")
}

/// Keeps an item arc `(u, v, i, j)` only if no `(u, v, i, j')` with `j' < j`
/// exists; exact duplicates collapse onto the first occurrence.
pub fn remove_parallel_arcs(g: &ArcFlowGraph) -> ArcFlowGraph {
    let mut min_j: BTreeMap<(usize, usize, u32), u32> = BTreeMap::new();
    for a in g.arcs() {
        let e = min_j.entry((a.u, a.v, a.item.i)).or_insert(a.item.j);
        *e = (*e).min(a.item.j);
    }
    let mut seen = HashSet::new();
    let arcs: Vec<_> = g
        .arcs()
        .iter()
        .filter(|a| min_j[&(a.u, a.v, a.item.i)] == a.item.j && seen.insert((a.u, a.v, a.item)))
        .map(|a| (g.node(a.u).clone(), g.node(a.v).clone(), a.item))
        .collect();
    ArcFlowGraph::from_arcs(g.nodes().iter().cloned(), arcs).expect("input graph has a source")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_paths, Pattern, DEFAULT_PATH_LIMIT};
    use crate::instance::parse_mvp;

    fn lbl(v: &[i64]) -> NodeId {
        NodeId::internal(WeightVec::new(v.to_vec()))
    }

    fn bins(caps: &[&[i64]]) -> Vec<BinType> {
        caps.iter()
            .map(|c| BinType {
                capacity: WeightVec::new(c.to_vec()),
                cost: 1,
            })
            .collect()
    }

    #[test]
    fn dominance_relation() {
        let b = bins(&[&[5], &[7]]);
        assert!(dominates(0, 1, &b));
        assert!(!dominates(1, 0, &b));
        let b = bins(&[&[4, 4], &[4, 4]]);
        assert!(dominates(0, 1, &b));
        assert!(!dominates(1, 0, &b));
        let b = bins(&[&[5, 2], &[3, 4]]);
        assert!(!dominates(0, 1, &b));
        assert!(!dominates(1, 0, &b));
        assert!(!dominates(0, 0, &b));
    }

    #[test]
    fn dominance_is_a_strict_partial_order() {
        let b = bins(&[&[5, 2], &[3, 4], &[5, 4], &[5, 4], &[2, 2], &[6, 1]]);
        let q = b.len();
        for x in 0..q {
            assert!(!dominates(x, x, &b));
            for y in 0..q {
                if dominates(x, y, &b) {
                    assert!(!dominates(y, x, &b));
                }
                for z in 0..q {
                    if dominates(x, y, &b) && dominates(y, z, &b) {
                        assert!(dominates(x, z, &b));
                    }
                }
            }
        }
    }

    #[test]
    fn chain_relabelling() {
        let inst = parse_mvp("1 1\n10 1\n2\n1 1\n3\n1 1\n2\n").unwrap();
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[6]), ItemRef::new(1, 1)),
                (lbl(&[6]), lbl(&[9]), ItemRef::new(2, 1)),
            ],
        )
        .unwrap();
        let psi = longest_from_source(&g, &inst).unwrap();
        assert_eq!(psi[g.source()], WeightVec::zeros(1));
        let c = final_compression(&g, &inst).unwrap();
        assert!(c.node_index(&lbl(&[3])).is_some());
        assert!(c.node_index(&lbl(&[5])).is_some());
        assert_eq!(c.num_arcs(), 2);
    }

    #[test]
    fn collapsed_loss_arc_is_dropped_without_losing_patterns() {
        // S -(1,1)-> a, a -loss-> b; both a and b get label (3).
        let inst = parse_mvp("1 1\n10 1\n1\n1 1\n3\n").unwrap();
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[5]), ItemRef::new(1, 1)),
                (lbl(&[5]), lbl(&[8]), ItemRef::LOSS),
            ],
        )
        .unwrap();
        let before = enumerate_paths(&connect_targets(&g, inst.bins()), DEFAULT_PATH_LIMIT).unwrap();
        let c = final_compression(&g, &inst).unwrap();
        assert_eq!(c.num_arcs(), 1);
        assert!(c.num_nodes() <= g.num_nodes());
        let after = enumerate_paths(&connect_targets(&c, inst.bins()), DEFAULT_PATH_LIMIT).unwrap();
        assert_eq!(before, after);
    }

    fn target_arcs_of(g: &ArcFlowGraph, node: &NodeId) -> Vec<NodeId> {
        let idx = g.node_index(node).unwrap();
        g.arcs()
            .iter()
            .filter(|a| a.u == idx && g.node(a.v).is_target())
            .map(|a| g.node(a.v).clone())
            .collect()
    }

    #[test]
    fn connect_targets_one_dimension() {
        let b = bins(&[&[5], &[7]]);
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[4]), ItemRef::new(1, 1)),
                (NodeId::Source, lbl(&[6]), ItemRef::new(2, 1)),
            ],
        )
        .unwrap();
        let c = connect_targets(&g, &b);
        assert_eq!(target_arcs_of(&c, &lbl(&[4])), vec![NodeId::Target(0)]);
        assert_eq!(target_arcs_of(&c, &lbl(&[6])), vec![NodeId::Target(1)]);
        assert_eq!(target_arcs_of(&c, &NodeId::Target(0)), vec![NodeId::Target(1)]);
        assert!(target_arcs_of(&c, &NodeId::Target(1)).is_empty());
        assert_eq!(c.feedback_arcs().len(), 2);
    }

    #[test]
    fn connect_targets_single_bin() {
        let b = bins(&[&[9]]);
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[4]), ItemRef::new(1, 1)),
                (lbl(&[4]), lbl(&[8]), ItemRef::new(1, 1)),
            ],
        )
        .unwrap();
        let c = connect_targets(&g, &b);
        assert_eq!(target_arcs_of(&c, &lbl(&[4])).len(), 1);
        assert_eq!(target_arcs_of(&c, &lbl(&[8])).len(), 1);
        assert_eq!(c.feedback_arcs().len(), 1);
        assert_eq!(c.targets().len(), 1);
    }

    #[test]
    fn connect_targets_incomparable_bins() {
        let b = bins(&[&[5, 2], &[3, 4]]);
        let g = ArcFlowGraph::from_arcs([], [(NodeId::Source, lbl(&[3, 2]), ItemRef::new(1, 1))]).unwrap();
        let c = connect_targets(&g, &b);
        assert_eq!(target_arcs_of(&c, &lbl(&[3, 2])), vec![NodeId::Target(0), NodeId::Target(1)]);
        let tt = c
            .arcs()
            .iter()
            .filter(|a| c.node(a.u).is_target() && c.node(a.v).is_target())
            .count();
        assert_eq!(tt, 0);
    }

    #[test]
    fn target_chain_is_transitively_reduced() {
        let b = bins(&[&[3], &[5], &[7]]);
        let g = ArcFlowGraph::from_arcs([], [(NodeId::Source, lbl(&[2]), ItemRef::new(1, 1))]).unwrap();
        let c = connect_targets(&g, &b);
        assert_eq!(target_arcs_of(&c, &NodeId::Target(0)), vec![NodeId::Target(1)]);
        assert_eq!(target_arcs_of(&c, &NodeId::Target(1)), vec![NodeId::Target(2)]);
        let pats = enumerate_paths(&c, DEFAULT_PATH_LIMIT).unwrap();
        assert_eq!(pats.len(), 3);
    }

    #[test]
    fn parallel_arcs_keep_lowest_incarnation() {
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[4]), ItemRef::new(2, 2)),
                (NodeId::Source, lbl(&[4]), ItemRef::new(2, 1)),
                (NodeId::Source, lbl(&[4]), ItemRef::new(1, 2)),
                (lbl(&[4]), lbl(&[6]), ItemRef::LOSS),
                (lbl(&[4]), lbl(&[6]), ItemRef::LOSS),
            ],
        )
        .unwrap();
        let r = remove_parallel_arcs(&g);
        let items: Vec<_> = r.arcs().iter().map(|a| a.item).collect();
        assert_eq!(items, vec![ItemRef::new(2, 1), ItemRef::new(1, 2), ItemRef::LOSS]);
        assert_eq!(r.arcs().iter().map(|a| a.id).collect::<Vec<_>>(), vec![0, 1, 2]);
    }

    #[test]
    fn parallel_arc_removal_preserves_item_type_patterns() {
        let inst = parse_mvp("1 1\n10 1\n1\n1 2\n3\n4\n").unwrap();
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[4]), ItemRef::new(1, 1)),
                (NodeId::Source, lbl(&[4]), ItemRef::new(1, 2)),
            ],
        )
        .unwrap();
        let g = connect_targets(&g, inst.bins());
        let agg = |g: &ArcFlowGraph| {
            enumerate_paths(g, DEFAULT_PATH_LIMIT)
                .unwrap()
                .iter()
                .map(Pattern::by_item_type)
                .collect::<std::collections::BTreeSet<_>>()
        };
        let r = remove_parallel_arcs(&g);
        assert_eq!(agg(&g), agg(&r));
        assert!(enumerate_paths(&r, DEFAULT_PATH_LIMIT).unwrap().len() < enumerate_paths(&g, DEFAULT_PATH_LIMIT).unwrap().len());
    }
}
