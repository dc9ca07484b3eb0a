//! Arc-flow multigraph representation, traversal, path patterns and
//! serialization.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::instance::{Instance, ItemRef, WeightVec};

/// Default cap on distinct partial patterns tracked by [`enumerate_paths`].
pub const DEFAULT_PATH_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph has a cycle that does not go through a feedback arc")]
    Cycle,
    #[error("path enumeration exceeded {0} partial patterns")]
    TooManyPaths(usize),
    #[error("graph has no source node")]
    NoSource,
    #[error("malformed graph json: {0}")]
    Json(String),
}

/// Node identity. Derived ordering is the canonical node order: the source,
/// internal nodes by `(scope, label)`, then targets by bin type.
///
/// `scope` is 0 for graphs built in one pass; the merged per-bin-type
/// baseline puts the nodes of bin type `t` in scope `t + 1`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeId {
    Source,
    Internal {
        scope: u32,
        label: WeightVec,
    },
    /// Target of bin type `t` (0-based).
    Target(usize),
}

impl NodeId {
    pub fn internal(label: WeightVec) -> NodeId {
        NodeId::Internal { scope: 0, label }
    }

    pub fn is_target(&self) -> bool {
        matches!(self, NodeId::Target(_))
    }

    /// Identifier-safe name used for model rows: `S`, `T<t>`, or the label
    /// coordinates joined by `_`.
    pub fn name(&self) -> String {
        match self {
            NodeId::Source => "S".into(),
            NodeId::Target(t) => format!("T{}", t + 1),
            NodeId::Internal { scope, label } => {
                let coords = label.iter().map(|c| c.to_string()).collect::<Vec<_>>().join("_");
                if *scope == 0 {
                    coords
                } else {
                    format!("g{scope}_{coords}")
                }
            }
        }
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NodeId::Source => write!(f, "S"),
            NodeId::Target(t) => write!(f, "T{}", t + 1),
            NodeId::Internal { scope: 0, label } => write!(f, "{label}"),
            NodeId::Internal { scope, label } => write!(f, "g{scope}:{label}"),
        }
    }
}

/// An arc between node indices of its graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Arc {
    pub id: usize,
    pub u: usize,
    pub v: usize,
    pub item: ItemRef,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ArcFlowGraph {
    nodes: Vec<NodeId>,
    arcs: Vec<Arc>,
    source: usize,
    targets: Vec<usize>,
}

impl ArcFlowGraph {
    /// Assembles a graph from arcs given by endpoint identity. Nodes are the
    /// arc endpoints plus `extra_nodes`, stored in canonical order; arc ids
    /// follow the order of `arcs`. A source node is required.
    pub fn from_arcs(
        extra_nodes: impl IntoIterator<Item = NodeId>,
        arcs: impl IntoIterator<Item = (NodeId, NodeId, ItemRef)>,
    ) -> Result<ArcFlowGraph, GraphError> {
        let arcs: Vec<_> = arcs.into_iter().collect();
        let mut set: BTreeSet<NodeId> = extra_nodes.into_iter().collect();
        for (u, v, _) in &arcs {
            set.insert(u.clone());
            set.insert(v.clone());
        }
        let nodes: Vec<NodeId> = set.into_iter().collect();
        let index = |n: &NodeId| nodes.binary_search(n).expect("node collected above");
        let arcs = arcs
            .iter()
            .enumerate()
            .map(|(id, (u, v, item))| Arc {
                id,
                u: index(u),
                v: index(v),
                item: *item,
            })
            .collect();
        let source = nodes.binary_search(&NodeId::Source).map_err(|_| GraphError::NoSource)?;
        let targets = (0..nodes.len()).filter(|&n| nodes[n].is_target()).collect();
        Ok(ArcFlowGraph {
            nodes,
            arcs,
            source,
            targets,
        })
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn node(&self, idx: usize) -> &NodeId {
        &self.nodes[idx]
    }

    pub fn arcs(&self) -> &[Arc] {
        &self.arcs
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    pub fn source(&self) -> usize {
        self.source
    }

    /// Target node indices, ordered by bin type.
    pub fn targets(&self) -> &[usize] {
        &self.targets
    }

    pub fn node_index(&self, node: &NodeId) -> Option<usize> {
        self.nodes.binary_search(node).ok()
    }

    pub fn is_feedback(&self, arc: &Arc) -> bool {
        arc.item.is_loss() && self.nodes[arc.u].is_target() && arc.v == self.source
    }

    /// Feedback arc of each bin type, indexed by bin type.
    pub fn feedback_arcs(&self) -> BTreeMap<usize, usize> {
        self.arcs
            .iter()
            .filter(|a| self.is_feedback(a))
            .filter_map(|a| match self.nodes[a.u] {
                NodeId::Target(t) => Some((t, a.id)),
                _ => None,
            })
            .collect()
    }

    /// Arc endpoints as node identities, in id order.
    pub fn arc_triples(&self) -> Vec<(NodeId, NodeId, ItemRef)> {
        self.arcs
            .iter()
            .map(|a| (self.nodes[a.u].clone(), self.nodes[a.v].clone(), a.item))
            .collect()
    }

    /// Internal node labels (scope ignored).
    pub fn label(&self, idx: usize) -> Option<&WeightVec> {
        match &self.nodes[idx] {
            NodeId::Internal { label, .. } => Some(label),
            _ => None,
        }
    }
}

/// Topological order of node indices ignoring feedback arcs; ties go to the
/// canonically smallest node.
pub fn topo_order(g: &ArcFlowGraph) -> Result<Vec<usize>, GraphError> {
    let n = g.num_nodes();
    let mut indeg = vec![0usize; n];
    let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
    for a in g.arcs() {
        if g.is_feedback(a) {
            continue;
        }
        indeg[a.v] += 1;
        out[a.u].push(a.v);
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..n).filter(|&v| indeg[v] == 0).map(Reverse).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(Reverse(u)) = ready.pop() {
        order.push(u);
        for &v in &out[u] {
            indeg[v] -= 1;
            if indeg[v] == 0 {
                ready.push(Reverse(v));
            }
        }
    }
    if order.len() != n {
        return Err(GraphError::Cycle);
    }
    Ok(order)
}

/// A bin type together with a multiset of incarnations packed into it.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Pattern {
    /// 0-based bin type.
    pub bin: usize,
    pub uses: BTreeMap<ItemRef, u32>,
}

impl Pattern {
    pub fn new(bin: usize) -> Pattern {
        Pattern {
            bin,
            uses: BTreeMap::new(),
        }
    }

    pub fn with_uses(bin: usize, uses: impl IntoIterator<Item = (ItemRef, u32)>) -> Pattern {
        let mut p = Pattern::new(bin);
        for (item, n) in uses {
            p.add(item, n);
        }
        p
    }

    pub fn add(&mut self, item: ItemRef, count: u32) {
        if count > 0 && !item.is_loss() {
            *self.uses.entry(item).or_insert(0) += count;
        }
    }

    pub fn is_empty(&self) -> bool {
        self.uses.is_empty()
    }

    pub fn item_count(&self, i: u32) -> u32 {
        self.uses.iter().filter(|(r, _)| r.i == i).map(|(_, &n)| n).sum()
    }

    pub fn weight(&self, inst: &Instance) -> WeightVec {
        self.uses.iter().fold(WeightVec::zeros(inst.dims()), |acc, (&item, &n)| {
            acc.add(&inst.weight(item).scaled(n as i64))
        })
    }

    pub fn fits(&self, inst: &Instance) -> bool {
        self.weight(inst).fits_in(&inst.bins()[self.bin].capacity)
    }

    /// At most `b_i` units of each item type, summed over incarnations.
    pub fn within_demand(&self, inst: &Instance) -> bool {
        let mut per_item: BTreeMap<u32, i64> = BTreeMap::new();
        for (item, &n) in &self.uses {
            *per_item.entry(item.i).or_insert(0) += n as i64;
        }
        per_item.iter().all(|(&i, &n)| n <= inst.demand(i))
    }

    /// Non-empty, capacity-feasible and within demand.
    pub fn is_valid(&self, inst: &Instance) -> bool {
        !self.is_empty() && self.fits(inst) && self.within_demand(inst)
    }

    /// The same packing with incarnations collapsed onto item types.
    pub fn by_item_type(&self) -> ItemPattern {
        let mut counts = BTreeMap::new();
        for (item, &n) in &self.uses {
            *counts.entry(item.i).or_insert(0) += n;
        }
        ItemPattern { bin: self.bin, counts }
    }
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "bin={} items=", self.bin + 1)?;
        for (k, (item, n)) in self.uses.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{item}x{n}")?;
        }
        Ok(())
    }
}

/// A pattern aggregated at item-type granularity.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ItemPattern {
    pub bin: usize,
    pub counts: BTreeMap<u32, u32>,
}

/// All distinct non-empty patterns realized by source-to-target paths.
///
/// A path reaching `Target(t)` yields a pattern for bin type `t`, and keeps
/// yielding patterns for every target reached further along target-to-target
/// arcs. Partial multisets are propagated in topological order, so the work
/// is bounded by the number of distinct `(node, multiset)` pairs rather than
/// the number of paths; `limit` caps that number.
pub fn enumerate_paths(g: &ArcFlowGraph, limit: usize) -> Result<BTreeSet<Pattern>, GraphError> {
    type Multiset = BTreeMap<ItemRef, u32>;
    let order = topo_order(g)?;
    let mut out_arcs: Vec<Vec<&Arc>> = vec![Vec::new(); g.num_nodes()];
    for a in g.arcs() {
        if !g.is_feedback(a) {
            out_arcs[a.u].push(a);
        }
    }
    let mut reach: Vec<BTreeSet<Multiset>> = vec![BTreeSet::new(); g.num_nodes()];
    reach[g.source()].insert(Multiset::new());
    let mut tracked = 1usize;
    let mut patterns = BTreeSet::new();
    for &u in &order {
        let here = std::mem::take(&mut reach[u]);
        if let NodeId::Target(t) = g.node(u) {
            for uses in here.iter().filter(|m| !m.is_empty()) {
                patterns.insert(Pattern {
                    bin: *t,
                    uses: uses.clone(),
                });
            }
        }
        for a in &out_arcs[u] {
            for m in &here {
                let mut next = m.clone();
                if !a.item.is_loss() {
                    *next.entry(a.item).or_insert(0) += 1;
                }
                if reach[a.v].insert(next) {
                    tracked += 1;
                    if tracked > limit {
                        return Err(GraphError::TooManyPaths(limit));
                    }
                }
            }
        }
    }
    Ok(patterns)
}

/// Valid patterns (see [`Pattern::is_valid`]) realized by paths, aggregated by
/// item type.
pub fn valid_item_patterns(g: &ArcFlowGraph, inst: &Instance, limit: usize) -> Result<BTreeSet<ItemPattern>, GraphError> {
    Ok(enumerate_paths(g, limit)?
        .into_iter()
        .filter(|p| p.is_valid(inst))
        .map(|p| p.by_item_type())
        .collect())
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum JsonNode {
    Source,
    Internal {
        #[serde(default, skip_serializing_if = "is_zero")]
        scope: u32,
        label: Vec<i64>,
    },
    Target {
        t: usize,
    },
}

fn is_zero(v: &u32) -> bool {
    *v == 0
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonArc {
    id: usize,
    u: usize,
    v: usize,
    i: u32,
    j: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonGraph {
    nodes: Vec<JsonNode>,
    arcs: Vec<JsonArc>,
    source: usize,
    targets: Vec<usize>,
}

/// Deterministic JSON: nodes in canonical order (targets 1-based), arcs in
/// id order referring to node positions, one trailing newline.
pub fn to_canonical_json(g: &ArcFlowGraph) -> String {
    let doc = JsonGraph {
        nodes: g
            .nodes()
            .iter()
            .map(|n| match n {
                NodeId::Source => JsonNode::Source,
                NodeId::Internal { scope, label } => JsonNode::Internal {
                    scope: *scope,
                    label: label.as_slice().to_vec(),
                },
                NodeId::Target(t) => JsonNode::Target { t: t + 1 },
            })
            .collect(),
        arcs: g
            .arcs()
            .iter()
            .map(|a| JsonArc {
                id: a.id,
                u: a.u,
                v: a.v,
                i: a.item.i,
                j: a.item.j,
            })
            .collect(),
        source: g.source(),
        targets: g.targets().to_vec(),
    };
    let mut s = serde_json::to_string(&doc).expect("graph serialization cannot fail");
    s.push('\n');
    s
}

pub fn from_canonical_json(text: &str) -> Result<ArcFlowGraph, GraphError> {
    let bad = |m: String| GraphError::Json(m);
    let doc: JsonGraph = serde_json::from_str(text).map_err(|e| bad(e.to_string()))?;
    let mut nodes = Vec::with_capacity(doc.nodes.len());
    for n in doc.nodes {
        nodes.push(match n {
            JsonNode::Source => NodeId::Source,
            JsonNode::Internal { scope, label } => NodeId::Internal {
                scope,
                label: WeightVec::new(label),
            },
            JsonNode::Target { t } if t >= 1 => NodeId::Target(t - 1),
            JsonNode::Target { .. } => return Err(bad("target index must be ≥ 1".into())),
        });
    }
    if nodes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(bad("nodes are not in canonical order".into()));
    }
    let mut arcs = Vec::with_capacity(doc.arcs.len());
    for (pos, a) in doc.arcs.into_iter().enumerate() {
        if a.id != pos {
            return Err(bad(format!("arc ids must be dense, found {} at position {pos}", a.id)));
        }
        if a.u >= nodes.len() || a.v >= nodes.len() {
            return Err(bad(format!("arc {} refers to a missing node", a.id)));
        }
        arcs.push((nodes[a.u].clone(), nodes[a.v].clone(), ItemRef::new(a.i, a.j)));
    }
    let g = ArcFlowGraph::from_arcs(nodes, arcs)?;
    if g.source() != doc.source || g.targets() != doc.targets.as_slice() {
        return Err(bad("source/targets disagree with the node list".into()));
    }
    Ok(g)
}

#[derive(Clone, Copy, Debug, Default)]
pub struct DotOptions {
    pub include_feedback: bool,
}

/// GraphViz rendering: item arcs labelled `i,j`, loss arcs dashed, feedback
/// arcs dotted and only drawn when requested.
pub fn to_dot(g: &ArcFlowGraph, opts: DotOptions) -> String {
    let mut s = String::from("digraph arcflow {\n  rankdir=LR;\n");
    for (idx, n) in g.nodes().iter().enumerate() {
        s.push_str(&format!("  n{idx} [label=\"{n}\"];\n"));
    }
    for a in g.arcs() {
        if g.is_feedback(a) {
            if opts.include_feedback {
                s.push_str(&format!("  n{} -> n{} [style=dotted];\n", a.u, a.v));
            }
        } else if a.item.is_loss() {
            s.push_str(&format!("  n{} -> n{} [style=dashed];\n", a.u, a.v));
        } else {
            s.push_str(&format!("  n{} -> n{} [label=\"{},{}\"];\n", a.u, a.v, a.item.i, a.item.j));
        }
    }
    s.push_str("}\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lbl(v: &[i64]) -> NodeId {
        NodeId::internal(WeightVec::new(v.to_vec()))
    }

    fn one_item_graph() -> ArcFlowGraph {
        ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[7]), ItemRef::new(1, 1)),
                (lbl(&[7]), NodeId::Target(0), ItemRef::LOSS),
                (NodeId::Target(0), NodeId::Source, ItemRef::LOSS),
            ],
        )
        .unwrap()
    }

    #[test]
    fn topo_order_chain() {
        let g = one_item_graph();
        let order: Vec<_> = topo_order(&g).unwrap().into_iter().map(|i| g.node(i).clone()).collect();
        assert_eq!(order, vec![NodeId::Source, lbl(&[7]), NodeId::Target(0)]);
    }

    #[test]
    fn topo_order_diamond() {
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[1]), ItemRef::new(1, 1)),
                (NodeId::Source, lbl(&[2]), ItemRef::new(2, 1)),
                (lbl(&[1]), lbl(&[3]), ItemRef::new(2, 1)),
                (lbl(&[2]), lbl(&[3]), ItemRef::new(1, 1)),
            ],
        )
        .unwrap();
        let order = topo_order(&g).unwrap();
        assert_eq!(order.len(), g.num_nodes());
        assert_eq!(g.node(order[0]), &NodeId::Source);
        assert_eq!(g.node(*order.last().unwrap()), &lbl(&[3]));
    }

    #[test]
    fn topo_order_rejects_cycles() {
        let g = ArcFlowGraph::from_arcs(
            [NodeId::Source],
            [(lbl(&[1]), lbl(&[2]), ItemRef::LOSS), (lbl(&[2]), lbl(&[1]), ItemRef::LOSS)],
        )
        .unwrap();
        assert_eq!(topo_order(&g), Err(GraphError::Cycle));
    }

    #[test]
    fn single_path_single_pattern() {
        let g = one_item_graph();
        let pats = enumerate_paths(&g, DEFAULT_PATH_LIMIT).unwrap();
        assert_eq!(
            pats.into_iter().collect::<Vec<_>>(),
            vec![Pattern::with_uses(0, [(ItemRef::new(1, 1), 1)])]
        );
    }

    #[test]
    fn target_chains_yield_patterns_for_each_bin() {
        let g = ArcFlowGraph::from_arcs(
            [],
            [
                (NodeId::Source, lbl(&[4]), ItemRef::new(1, 1)),
                (lbl(&[4]), NodeId::Target(0), ItemRef::LOSS),
                (NodeId::Target(0), NodeId::Target(1), ItemRef::LOSS),
                (NodeId::Target(0), NodeId::Source, ItemRef::LOSS),
                (NodeId::Target(1), NodeId::Source, ItemRef::LOSS),
            ],
        )
        .unwrap();
        let pats = enumerate_paths(&g, DEFAULT_PATH_LIMIT).unwrap();
        let bins: Vec<_> = pats.iter().map(|p| p.bin).collect();
        assert_eq!(bins, vec![0, 1]);
    }

    #[test]
    fn enumeration_guard() {
        let g = one_item_graph();
        assert_eq!(enumerate_paths(&g, 1), Err(GraphError::TooManyPaths(1)));
    }

    #[test]
    fn json_is_deterministic_and_round_trips() {
        let g = one_item_graph();
        let a = to_canonical_json(&g);
        assert_eq!(a, to_canonical_json(&g));
        assert_eq!(
            a,
            "{\"nodes\":[{\"kind\":\"source\"},{\"kind\":\"internal\",\"label\":[7]},{\"kind\":\"target\",\"t\":1}],\
             \"arcs\":[{\"id\":0,\"u\":0,\"v\":1,\"i\":1,\"j\":1},{\"id\":1,\"u\":1,\"v\":2,\"i\":0,\"j\":0},\
             {\"id\":2,\"u\":2,\"v\":0,\"i\":0,\"j\":0}],\"source\":0,\"targets\":[2]}\n"
        );
        assert_eq!(from_canonical_json(&a).unwrap(), g);

        let mut triples = g.arc_triples();
        triples[0].2 = ItemRef::new(1, 2);
        let h = ArcFlowGraph::from_arcs([], triples).unwrap();
        assert_ne!(to_canonical_json(&h), a);
    }

    #[test]
    fn json_rejects_malformed_documents() {
        assert!(from_canonical_json("{}").is_err());
        let g = one_item_graph();
        let bad = to_canonical_json(&g).replace("\"id\":1", "\"id\":5");
        assert!(matches!(from_canonical_json(&bad), Err(GraphError::Json(_))));
    }

    #[test]
    fn dot_rendering() {
        let g = one_item_graph();
        let dot = to_dot(&g, DotOptions::default());
        assert_eq!(dot.matches(" -> ").count(), 2);
        assert!(dot.contains("n0 -> n1 [label=\"1,1\"];"));
        assert!(dot.contains("n1 -> n2 [style=dashed];"));
        assert!(!dot.contains("dotted"));
        let with_fb = to_dot(&g, DotOptions { include_feedback: true });
        assert!(with_fb.contains("n2 -> n0 [style=dotted];"));
        assert!(dot.starts_with("digraph arcflow {") && dot.trim_end().ends_with('}'));
    }

    #[test]
    fn node_names() {
        assert_eq!(NodeId::Source.name(), "S");
        assert_eq!(NodeId::Target(2).name(), "T3");
        assert_eq!(lbl(&[3, 2]).name(), "3_2");
        assert_eq!(
            NodeId::Internal {
                scope: 2,
                label: WeightVec::new(vec![0])
            }
            .name(),
            "g2_0"
        );
    }
}
