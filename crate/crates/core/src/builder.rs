//! Direct construction of the compressed arc-flow graph.
//!
//! The builder walks the level structure of the knapsack recursion without
//! materializing it: each state `(x, k, c)` (space used, current incarnation
//! in builder order, copies of it already used) is first lifted, then
//! labelled with the per-dimension longest-path-to-target value computed
//! from its two successors. States that share a label share a node, which is
//! where the compression comes from. The result is then relabelled from the
//! source, connected to the targets and stripped of redundant parallel arcs.

use std::collections::HashMap;

use indexmap::IndexSet;
use thiserror::Error;

use crate::graph::{ArcFlowGraph, GraphError, NodeId};
use crate::instance::{sort_items, sort_items_with_scale, BinType, Instance, ItemRef, OrderedEntry, OrderedIncarnations, WeightVec};
use crate::postprocess::{connect_targets, final_compression, remove_parallel_arcs};

pub const DEFAULT_MAX_STATES: usize = 10_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BuildError {
    #[error("instance too large: more than {0} dynamic programming states")]
    TooLarge(usize),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug)]
pub struct BuildOptions {
    pub max_states: usize,
    /// Keep every state passed to the recursion (before lifting) in the report.
    pub record_states: bool,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            max_states: DEFAULT_MAX_STATES,
            record_states: false,
        }
    }
}

/// A dynamic programming state. `k` is a 0-based position in the builder
/// order.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct DpState {
    pub x: WeightVec,
    pub k: usize,
    pub c: i64,
}

/// Solves the per-dimension bounded knapsacks used for lifting. Reachable
/// sums are tabulated per `(dimension, bin type)` over item suffixes and
/// cached per `(dimension, bin type, k, remaining copies of k)`.
pub struct Lifter<'a> {
    bins: &'a [BinType],
    order: &'a [OrderedEntry],
    suffix: HashMap<(usize, usize), Vec<Vec<bool>>>,
    best: HashMap<(usize, usize, usize, i64), Vec<i64>>,
}

impl<'a> Lifter<'a> {
    pub fn new(bins: &'a [BinType], order: &'a [OrderedEntry]) -> Self {
        Lifter {
            bins,
            order,
            suffix: HashMap::new(),
            best: HashMap::new(),
        }
    }

    fn suffix_tables(&mut self, d: usize, t: usize) -> &Vec<Vec<bool>> {
        let (bins, order) = (self.bins, self.order);
        self.suffix.entry((d, t)).or_insert_with(|| {
            let cap = bins[t].capacity[d] as usize;
            let n = order.len();
            let mut tables = vec![Vec::new(); n + 1];
            let mut base = vec![false; cap + 1];
            base[0] = true;
            tables[n] = base;
            for k in (0..n).rev() {
                tables[k] = add_copies(&tables[k + 1], order[k].weight[d], order[k].demand);
            }
            tables
        })
    }

    fn best_sums(&mut self, d: usize, t: usize, k: usize, copies: i64) -> &Vec<i64> {
        if !self.best.contains_key(&(d, t, k, copies)) {
            let w = self.order[k].weight[d];
            let reach = add_copies(&self.suffix_tables(d, t)[k + 1], w, copies);
            let mut best = vec![0i64; reach.len()];
            for s in 1..reach.len() {
                best[s] = if reach[s] { s as i64 } else { best[s - 1] };
            }
            self.best.insert((d, t, k, copies), best);
        }
        &self.best[&(d, t, k, copies)]
    }

    /// `W_t^d` minus the largest `d`-weight the remaining incarnations
    /// (`k..`, with `b_k - c` copies of `k` left) can add within
    /// `W_t^d - x^d`.
    pub fn highest_position(&mut self, d: usize, t: usize, x: &WeightVec, k: usize, c: i64) -> i64 {
        let cap = self.bins[t].capacity[d];
        if k >= self.order.len() {
            return cap;
        }
        let copies = (self.order[k].demand - c).max(0);
        let room = (cap - x[d]).max(0) as usize;
        cap - self.best_sums(d, t, k, copies)[room]
    }

    /// Raises `x` in every dimension to the minimum, over bin types it fits,
    /// of the highest position compatible with the remaining items.
    pub fn lift(&mut self, x: &WeightVec, k: usize, c: i64) -> WeightVec {
        let fitting: Vec<usize> = (0..self.bins.len()).filter(|&t| x.fits_in(&self.bins[t].capacity)).collect();
        debug_assert!(!fitting.is_empty(), "lifting a state that fits no bin type");
        let coords = (0..x.len())
            .map(|d| fitting.iter().map(|&t| self.highest_position(d, t, x, k, c)).min().unwrap_or(x[d]))
            .collect();
        WeightVec::new(coords)
    }
}

/// Reachability after adding `0..=copies` copies of an item of weight `w`.
fn add_copies(base: &[bool], w: i64, copies: i64) -> Vec<bool> {
    if w == 0 || copies == 0 {
        return base.to_vec();
    }
    let w = w as usize;
    let mut out = base.to_vec();
    for y in 1..=copies as usize {
        let shift = y * w;
        if shift >= base.len() {
            break;
        }
        for s in shift..base.len() {
            if base[s - shift] {
                out[s] = true;
            }
        }
    }
    out
}

/// [`Lifter::highest_position`] without a cache.
pub fn highest_position(d: usize, t: usize, x: &WeightVec, k: usize, c: i64, bins: &[BinType], order: &OrderedIncarnations) -> i64 {
    Lifter::new(bins, order.entries()).highest_position(d, t, x, k, c)
}

/// [`Lifter::lift`] without a cache.
pub fn lift(x: &WeightVec, k: usize, c: i64, bins: &[BinType], order: &OrderedIncarnations) -> WeightVec {
    Lifter::new(bins, order.entries()).lift(x, k, c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Step {
    Start,
    AwaitUp,
    AwaitUse,
}

struct Frame {
    state: DpState,
    step: Step,
    u: WeightVec,
    up: Option<WeightVec>,
}

enum Next {
    Call(WeightVec, usize, i64),
    Return(WeightVec),
}

enum Entered {
    Memo(WeightVec),
    Fresh(Frame),
}

/// The memoized recursion producing the uncompressed-target ("Step-3")
/// graph: nodes are labels, arcs are `(u, v, item)` between labels.
pub struct Step3Builder<'a> {
    bins: &'a [BinType],
    order: &'a [OrderedEntry],
    lifter: Lifter<'a>,
    memo: HashMap<DpState, WeightVec>,
    arcs: IndexSet<(WeightVec, WeightVec, ItemRef)>,
    max_states: usize,
    recorded: Option<Vec<DpState>>,
    virtual_labels: usize,
}

impl<'a> Step3Builder<'a> {
    pub fn new(bins: &'a [BinType], order: &'a OrderedIncarnations, opts: &BuildOptions) -> Self {
        Step3Builder {
            bins,
            order: order.entries(),
            lifter: Lifter::new(bins, order.entries()),
            memo: HashMap::new(),
            arcs: IndexSet::new(),
            max_states: opts.max_states,
            recorded: opts.record_states.then(Vec::new),
            virtual_labels: 0,
        }
    }

    fn fits_some(&self, x: &WeightVec) -> bool {
        self.bins.iter().any(|b| x.fits_in(&b.capacity))
    }

    /// Per-dimension minimum capacity over the bin types `x` fits.
    fn base_label(&mut self, x: &WeightVec) -> WeightVec {
        let fitting: Vec<&WeightVec> = self.bins.iter().map(|b| &b.capacity).filter(|w| x.fits_in(w)).collect();
        let label = fitting.iter().skip(1).fold(fitting[0].clone(), |acc, w| acc.min_with(w));
        if !fitting.iter().any(|w| **w == label) {
            self.virtual_labels += 1;
        }
        label
    }

    fn enter(&mut self, x: WeightVec, k: usize, c: i64) -> Result<Entered, BuildError> {
        if let Some(rec) = self.recorded.as_mut() {
            rec.push(DpState { x: x.clone(), k, c });
        }
        let x = self.lifter.lift(&x, k, c);
        let state = DpState { x, k, c };
        if let Some(u) = self.memo.get(&state) {
            return Ok(Entered::Memo(u.clone()));
        }
        if self.memo.len() >= self.max_states {
            return Err(BuildError::TooLarge(self.max_states));
        }
        let u = WeightVec::zeros(state.x.len());
        Ok(Entered::Fresh(Frame {
            state,
            step: Step::Start,
            u,
            up: None,
        }))
    }

    fn advance(&mut self, f: &mut Frame, mut child: Option<WeightVec>) -> Next {
        let order = self.order;
        let n = order.len();
        let entry = &order[f.state.k];
        match f.step {
            Step::Start => {
                f.u = self.base_label(&f.state.x);
                if f.state.k + 1 < n {
                    f.step = Step::AwaitUp;
                    return Next::Call(f.state.x.clone(), f.state.k + 1, 0);
                }
            }
            Step::AwaitUp => {
                let up = child.take().expect("level-above value");
                f.u = up.clone();
                f.up = Some(up);
            }
            Step::AwaitUse => {
                let v = child.take().expect("same-level value");
                f.u = f.u.min_with(&v.sub(&entry.weight));
                self.arcs.insert((f.u.clone(), v, entry.item));
                return self.finish(f);
            }
        }
        // option 2: one more copy of the current incarnation
        let next_x = f.state.x.add(&entry.weight);
        if f.state.c < entry.demand && self.fits_some(&next_x) {
            f.step = Step::AwaitUse;
            return Next::Call(next_x, f.state.k, f.state.c + 1);
        }
        self.finish(f)
    }

    fn finish(&mut self, f: &Frame) -> Next {
        if let Some(up) = &f.up {
            if f.u != *up {
                self.arcs.insert((f.u.clone(), up.clone(), ItemRef::LOSS));
            }
        }
        Next::Return(f.u.clone())
    }

    /// Label of state `(x, k, c)`, building every arc below it.
    pub fn phi(&mut self, x: WeightVec, k: usize, c: i64) -> Result<WeightVec, BuildError> {
        let mut stack = match self.enter(x, k, c)? {
            Entered::Memo(u) => return Ok(u),
            Entered::Fresh(f) => vec![f],
        };
        let mut pending: Option<WeightVec> = None;
        loop {
            let top = stack.last_mut().expect("non-empty stack");
            match self.advance(top, pending.take()) {
                Next::Call(x, k, c) => match self.enter(x, k, c)? {
                    Entered::Memo(u) => pending = Some(u),
                    Entered::Fresh(f) => stack.push(f),
                },
                Next::Return(u) => {
                    let done = stack.pop().expect("non-empty stack");
                    self.memo.insert(done.state, u.clone());
                    if stack.is_empty() {
                        return Ok(u);
                    }
                    pending = Some(u);
                }
            }
        }
    }

    pub fn memo(&self) -> &HashMap<DpState, WeightVec> {
        &self.memo
    }

    pub fn num_arcs(&self) -> usize {
        self.arcs.len()
    }

    /// Runs the recursion from the empty state and returns the graph, with
    /// the node carrying the root label as source and no targets.
    pub fn run(&mut self, dims: usize) -> Result<ArcFlowGraph, BuildError> {
        if self.order.is_empty() {
            return Ok(ArcFlowGraph::from_arcs([NodeId::Source], [])?);
        }
        let root = self.phi(WeightVec::zeros(dims), 0, 0)?;
        let node = |l: &WeightVec| if *l == root { NodeId::Source } else { NodeId::internal(l.clone()) };
        let arcs: Vec<_> = self.arcs.iter().map(|(u, v, item)| (node(u), node(v), *item)).collect();
        Ok(ArcFlowGraph::from_arcs([NodeId::Source], arcs)?)
    }
}

#[derive(Clone, Debug)]
pub struct BuildReport {
    pub graph: ArcFlowGraph,
    /// Graph right after the recursion (labels are longest paths to target).
    pub step3: ArcFlowGraph,
    /// Graph after relabelling from the source, before targets are connected.
    pub compressed: ArcFlowGraph,
    pub states: usize,
    /// States whose base label matched no single bin capacity.
    pub virtual_labels: usize,
    pub recorded_states: Vec<DpState>,
    pub order: OrderedIncarnations,
}

fn build_with_order(inst: &Instance, order: OrderedIncarnations, opts: &BuildOptions) -> Result<BuildReport, BuildError> {
    let mut b = Step3Builder::new(inst.bins(), &order, opts);
    let step3 = b.run(inst.dims())?;
    let states = b.memo.len();
    let virtual_labels = b.virtual_labels;
    let recorded_states = b.recorded.take().unwrap_or_default();
    drop(b);
    let compressed = final_compression(&step3, inst)?;
    let graph = remove_parallel_arcs(&connect_targets(&compressed, inst.bins()));
    Ok(BuildReport {
        graph,
        step3,
        compressed,
        states,
        virtual_labels,
        recorded_states,
        order,
    })
}

/// Builds the graph and keeps the intermediate stages.
pub fn build(inst: &Instance, opts: &BuildOptions) -> Result<BuildReport, BuildError> {
    build_with_order(inst, sort_items(inst), opts)
}

/// Builds the finished graph of a normalized instance.
pub fn build_graph(inst: &Instance, opts: &BuildOptions) -> Result<ArcFlowGraph, BuildError> {
    Ok(build(inst, opts)?.graph)
}

/// One graph per bin type joined under a super source: the older
/// multi-bin-type construction, kept for comparison. A single per-type graph
/// has nothing to merge and is returned as built.
pub fn build_baseline_merged(inst: &Instance, opts: &BuildOptions) -> Result<ArcFlowGraph, BuildError> {
    let global = sort_items_with_scale(inst, &inst.max_capacity());
    let mut arcs = Vec::new();
    for t in 0..inst.num_bins() {
        let sub = inst.restricted_to_bin(t);
        let cap = &inst.bins()[t].capacity;
        let order = global.filtered(|e| e.weight.fits_in(cap));
        if order.is_empty() {
            continue;
        }
        let g = build_with_order(&sub, order, opts)?.graph;
        if inst.num_bins() == 1 {
            return Ok(g);
        }
        let scope = t as u32 + 1;
        let rename = |n: &NodeId| match n {
            NodeId::Source => NodeId::Internal {
                scope,
                label: WeightVec::zeros(inst.dims()),
            },
            NodeId::Internal { label, .. } => NodeId::Internal {
                scope,
                label: label.clone(),
            },
            NodeId::Target(_) => NodeId::Target(t),
        };
        arcs.push((NodeId::Source, rename(&NodeId::Source), ItemRef::LOSS));
        for a in g.arcs().iter().filter(|a| !g.is_feedback(a)) {
            arcs.push((rename(g.node(a.u)), rename(g.node(a.v)), a.item));
        }
    }
    for t in 0..inst.num_bins() {
        arcs.push((NodeId::Target(t), NodeId::Source, ItemRef::LOSS));
    }
    Ok(ArcFlowGraph::from_arcs([NodeId::Source], arcs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_paths, to_canonical_json, Pattern, DEFAULT_PATH_LIMIT};
    use crate::instance::{normalize, parse_mvp, parse_vbp};

    fn w(v: &[i64]) -> WeightVec {
        WeightVec::new(v.to_vec())
    }

    /// Brute force: max Σ w_j y_j ≤ room over all bounded y.
    fn brute_max(weights: &[(i64, i64)], room: i64) -> i64 {
        fn go(rest: &[(i64, i64)], room: i64) -> i64 {
            let Some((&(w, b), tail)) = rest.split_first() else { return 0 };
            (0..=b)
                .filter(|y| y * w <= room)
                .map(|y| y * w + go(tail, room - y * w))
                .max()
                .unwrap()
        }
        go(weights, room)
    }

    #[test]
    fn brute_force_oracle_values() {
        // items 3 (b=2) and 5 (b=1), room 10
        assert_eq!(brute_max(&[(3, 2), (5, 1)], 10), 8);
        assert_eq!(brute_max(&[(2, 1)], 3), 2);
    }

    #[test]
    fn highest_position_examples() {
        let inst = parse_vbp("1\n10\n2\n5 1\n3 2\n").unwrap();
        let order = sort_items(&inst);
        // order: 5 then 3; start at k of the 3s to match "w=3 (b=2), then w=5"
        assert_eq!(order.entries()[0].weight, w(&[5]));
        assert_eq!(highest_position(0, 0, &w(&[0]), 0, 0, inst.bins(), &order), 10 - 8);
        assert_eq!(highest_position(0, 0, &w(&[0]), 2, 0, inst.bins(), &order), 10);

        let inst = parse_vbp("1\n10\n1\n2 1\n").unwrap();
        let order = sort_items(&inst);
        assert_eq!(highest_position(0, 0, &w(&[7]), 0, 0, inst.bins(), &order), 8);
    }

    #[test]
    fn lift_examples() {
        let inst = parse_vbp("1\n10\n2\n5 1\n3 2\n").unwrap();
        let order = sort_items(&inst);
        let lifted = lift(&w(&[0]), 0, 0, inst.bins(), &order);
        assert_eq!(lifted, w(&[2]));
        assert_eq!(lift(&lifted, 0, 0, inst.bins(), &order), lifted);

        let inst = parse_mvp("1 2\n10 1\n6 1\n1\n1 1\n1\n").unwrap();
        let order = sort_items(&inst);
        assert_eq!(lift(&w(&[3]), 1, 0, inst.bins(), &order), w(&[6]));
    }

    #[test]
    fn one_item_hand_trace() {
        let inst = parse_vbp("1\n7\n1\n7 1\n").unwrap();
        let g = build_graph(&inst, &BuildOptions::default()).unwrap();
        let triples = g.arc_triples();
        assert_eq!(
            triples,
            vec![
                (NodeId::Source, NodeId::internal(w(&[7])), ItemRef::new(1, 1)),
                (NodeId::internal(w(&[7])), NodeId::Target(0), ItemRef::LOSS),
                (NodeId::Target(0), NodeId::Source, ItemRef::LOSS),
            ]
        );
        assert_eq!(g.num_nodes(), 3);
    }

    #[test]
    fn e1_patterns() {
        let inst = parse_vbp("1\n7\n3\n5 1\n3 1\n2 1\n").unwrap();
        let g = build_graph(&inst, &BuildOptions::default()).unwrap();
        let pats: Vec<Vec<i64>> = enumerate_paths(&g, DEFAULT_PATH_LIMIT)
            .unwrap()
            .iter()
            .map(|p| p.uses.keys().map(|r| inst.weight(*r)[0]).collect())
            .collect();
        let mut pats = pats;
        pats.sort();
        assert_eq!(pats, vec![vec![2], vec![3], vec![3, 2], vec![5], vec![5, 2]]);
    }

    #[test]
    fn repeated_item_patterns() {
        let inst = parse_vbp("1\n7\n1\n3 2\n").unwrap();
        let g = build_graph(&inst, &BuildOptions::default()).unwrap();
        let pats = enumerate_paths(&g, DEFAULT_PATH_LIMIT).unwrap();
        let expect: std::collections::BTreeSet<_> = [
            Pattern::with_uses(0, [(ItemRef::new(1, 1), 1)]),
            Pattern::with_uses(0, [(ItemRef::new(1, 1), 2)]),
        ]
        .into_iter()
        .collect();
        assert_eq!(pats, expect);
    }

    #[test]
    fn build_is_deterministic() {
        let inst = parse_mvp("2 2\n10 6 2\n7 9 3\n3\n2 2\n3 2\n2 4\n1 1\n5 5\n3 1\n2 3\n").unwrap();
        let a = to_canonical_json(&build_graph(&inst, &BuildOptions::default()).unwrap());
        let b = to_canonical_json(&build_graph(&inst, &BuildOptions::default()).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn state_guard() {
        let inst = parse_vbp("1\n100\n3\n5 10\n3 10\n2 10\n").unwrap();
        let opts = BuildOptions {
            max_states: 5,
            ..Default::default()
        };
        assert_eq!(build_graph(&inst, &opts).unwrap_err(), BuildError::TooLarge(5));
    }

    #[test]
    fn arcs_respect_label_invariants() {
        let inst = parse_mvp("2 2\n10 6 2\n7 9 3\n3\n2 2\n3 2\n2 4\n1 1\n5 5\n3 1\n2 3\n").unwrap();
        let (inst, _) = normalize(&inst).unwrap();
        let report = build(&inst, &BuildOptions::default()).unwrap();
        let g = &report.step3;
        for a in g.arcs() {
            let (Some(u), Some(v)) = (g.label(a.u), g.label(a.v)) else {
                continue;
            };
            if a.item.is_loss() {
                assert!(u.fits_in(v));
            } else {
                assert!(u.fits_in(&v.sub(&inst.weight(a.item))));
            }
        }
    }

    #[test]
    fn memoized_states_are_stable() {
        let inst = parse_mvp("2 2\n10 6 2\n7 9 3\n2\n2 2\n3 2\n2 4\n1 1\n5 5\n").unwrap();
        let order = sort_items(&inst);
        let mut b = Step3Builder::new(inst.bins(), &order, &BuildOptions::default());
        b.run(2).unwrap();
        let arcs_before = b.num_arcs();
        let memo: Vec<_> = b.memo().iter().map(|(s, u)| (s.clone(), u.clone())).collect();
        for (s, u) in memo {
            assert_eq!(b.phi(s.x, s.k, s.c).unwrap(), u);
        }
        assert_eq!(b.num_arcs(), arcs_before);
    }

    #[test]
    fn baseline_matches_single_bin_build() {
        let inst = parse_vbp("1\n7\n3\n5 1\n3 1\n2 1\n").unwrap();
        let opts = BuildOptions::default();
        assert_eq!(
            to_canonical_json(&build_graph(&inst, &opts).unwrap()),
            to_canonical_json(&build_baseline_merged(&inst, &opts).unwrap())
        );
    }

    #[test]
    fn baseline_duplicates_structure_for_identical_bins() {
        let inst = parse_mvp("1 2\n7 1\n7 1\n3\n1 1\n5\n1 1\n3\n1 1\n2\n").unwrap();
        let opts = BuildOptions::default();
        let g = build_graph(&inst, &opts).unwrap();
        let base = build_baseline_merged(&inst, &opts).unwrap();
        assert!(base.num_nodes() >= g.num_nodes());
        let by_type = |g: &ArcFlowGraph| {
            enumerate_paths(g, DEFAULT_PATH_LIMIT)
                .unwrap()
                .iter()
                .map(Pattern::by_item_type)
                .collect::<std::collections::BTreeSet<_>>()
        };
        assert_eq!(by_type(&g), by_type(&base));
    }
}
