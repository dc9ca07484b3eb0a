//! Multiple-choice vector packing instances: parsing, validation,
//! normalization and the canonical incarnation order used by the builder.

use std::cmp::Ordering;
use std::fmt;
use std::ops::Deref;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// A vector of non-negative integer capacity units, one per dimension.
///
/// Also used for node labels, which share the same coordinate space.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct WeightVec(Vec<i64>);

impl WeightVec {
    pub fn new(coords: Vec<i64>) -> Self {
        WeightVec(coords)
    }

    pub fn zeros(dims: usize) -> Self {
        WeightVec(vec![0; dims])
    }

    pub fn as_slice(&self) -> &[i64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i64> {
        self.0
    }

    /// Coordinate-wise `self <= other`.
    pub fn fits_in(&self, other: &WeightVec) -> bool {
        debug_assert_eq!(self.0.len(), other.0.len());
        self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }

    pub fn add(&self, other: &WeightVec) -> WeightVec {
        WeightVec(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &WeightVec) -> WeightVec {
        WeightVec(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    pub fn min_with(&self, other: &WeightVec) -> WeightVec {
        WeightVec(self.0.iter().zip(&other.0).map(|(a, b)| *a.min(b)).collect())
    }

    pub fn max_with(&self, other: &WeightVec) -> WeightVec {
        WeightVec(self.0.iter().zip(&other.0).map(|(a, b)| *a.max(b)).collect())
    }

    pub fn scaled(&self, factor: i64) -> WeightVec {
        WeightVec(self.0.iter().map(|a| a * factor).collect())
    }
}

impl Deref for WeightVec {
    type Target = [i64];

    fn deref(&self) -> &[i64] {
        &self.0
    }
}

impl From<Vec<i64>> for WeightVec {
    fn from(coords: Vec<i64>) -> Self {
        WeightVec(coords)
    }
}

impl fmt::Display for WeightVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (d, c) in self.0.iter().enumerate() {
            if d > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// Reference to incarnation `j` of item type `i`, both 1-based.
/// `(0, 0)` is the artificial zero-weight item labelling loss arcs.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ItemRef {
    pub i: u32,
    pub j: u32,
}

impl ItemRef {
    pub const LOSS: ItemRef = ItemRef { i: 0, j: 0 };

    pub fn new(i: u32, j: u32) -> Self {
        ItemRef { i, j }
    }

    pub fn is_loss(self) -> bool {
        self.i == 0
    }
}

impl fmt::Display for ItemRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.i, self.j)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinType {
    pub capacity: WeightVec,
    pub cost: i64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Incarnation {
    /// 1-based index `j` as given in the input; normalization may leave gaps.
    pub index: u32,
    pub weight: WeightVec,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ItemType {
    pub demand: i64,
    pub incarnations: Vec<Incarnation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum InstanceError {
    #[error("{0}")]
    Invalid(String),
    #[error("item {0} has no feasible incarnation")]
    NoFeasibleIncarnation(u32),
}

/// A validated instance. Bin types are indexed `0..q` internally and
/// reported 1-based; item types and incarnations use 1-based [`ItemRef`]s.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Instance {
    dims: usize,
    bins: Vec<BinType>,
    items: Vec<ItemType>,
}

impl Instance {
    pub fn new(dims: usize, bins: Vec<BinType>, items: Vec<ItemType>) -> Result<Self, InstanceError> {
        let invalid = |msg: String| Err(InstanceError::Invalid(msg));
        if dims < 1 {
            return invalid("p must be ≥ 1".into());
        }
        if bins.is_empty() {
            return invalid("q must be ≥ 1".into());
        }
        if items.is_empty() {
            return invalid("m must be ≥ 1".into());
        }
        for (t, bin) in bins.iter().enumerate() {
            if bin.capacity.len() != dims {
                return invalid(format!("bin type {} has {} capacities, expected {dims}", t + 1, bin.capacity.len()));
            }
            if bin.capacity.iter().any(|&c| c < 0) || bin.cost < 0 {
                return invalid(format!("bin type {} has a negative capacity or cost", t + 1));
            }
            if bin.capacity.is_zero() {
                return invalid(format!("bin type {} has zero capacity in every dimension", t + 1));
            }
        }
        for (i, item) in items.iter().enumerate() {
            let i = i + 1;
            if item.demand < 1 {
                return invalid(format!("item {i}: b_i must be ≥ 1"));
            }
            if item.incarnations.is_empty() {
                return invalid(format!("item {i}: J_i must be ≥ 1"));
            }
            for inc in &item.incarnations {
                if inc.weight.len() != dims {
                    return invalid(format!("item {i} incarnation {} has wrong dimension", inc.index));
                }
                if inc.weight.iter().any(|&w| w < 0) {
                    return invalid(format!("item {i} incarnation {} has a negative weight", inc.index));
                }
                if inc.weight.is_zero() {
                    return invalid(format!("item {i} incarnation {} has zero weight in every dimension", inc.index));
                }
            }
        }
        Ok(Instance { dims, bins, items })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn bins(&self) -> &[BinType] {
        &self.bins
    }

    pub fn items(&self) -> &[ItemType] {
        &self.items
    }

    pub fn num_bins(&self) -> usize {
        self.bins.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    /// Demand of item type `i` (1-based).
    pub fn demand(&self, i: u32) -> i64 {
        self.items[i as usize - 1].demand
    }

    /// Total number of items, `Σ b_i`.
    pub fn total_demand(&self) -> i64 {
        self.items.iter().map(|it| it.demand).sum()
    }

    /// Weight of an incarnation; the zero vector for [`ItemRef::LOSS`].
    pub fn weight(&self, item: ItemRef) -> WeightVec {
        if item.is_loss() {
            return WeightVec::zeros(self.dims);
        }
        self.items[item.i as usize - 1]
            .incarnations
            .iter()
            .find(|inc| inc.index == item.j)
            .map(|inc| inc.weight.clone())
            .unwrap_or_else(|| panic!("unknown incarnation {item}"))
    }

    pub fn has_incarnation(&self, item: ItemRef) -> bool {
        item.i >= 1
            && (item.i as usize) <= self.items.len()
            && self.items[item.i as usize - 1].incarnations.iter().any(|inc| inc.index == item.j)
    }

    /// All incarnation references in input order.
    pub fn incarnation_refs(&self) -> impl Iterator<Item = (ItemRef, &WeightVec)> {
        self.items.iter().enumerate().flat_map(|(i, item)| {
            item.incarnations
                .iter()
                .map(move |inc| (ItemRef::new(i as u32 + 1, inc.index), &inc.weight))
        })
    }

    /// Per-dimension maximum capacity over all bin types.
    pub fn max_capacity(&self) -> WeightVec {
        self.bins
            .iter()
            .skip(1)
            .fold(self.bins[0].capacity.clone(), |acc, b| acc.max_with(&b.capacity))
    }

    pub fn fits_some_bin(&self, x: &WeightVec) -> bool {
        self.bins.iter().any(|b| x.fits_in(&b.capacity))
    }

    /// The instance restricted to a single bin type. Incarnations that do not
    /// fit it are dropped; items left without incarnations keep their slot
    /// (and index) with an empty incarnation list, so the result bypasses
    /// validation and is only meant for graph construction.
    pub fn restricted_to_bin(&self, t: usize) -> Instance {
        let bin = self.bins[t].clone();
        let items = self
            .items
            .iter()
            .map(|item| ItemType {
                demand: item.demand,
                incarnations: item
                    .incarnations
                    .iter()
                    .filter(|inc| inc.weight.fits_in(&bin.capacity))
                    .cloned()
                    .collect(),
            })
            .collect();
        Instance {
            dims: self.dims,
            bins: vec![bin],
            items,
        }
    }

    /// Canonical `.mvp` text; `parse_mvp` of the result reproduces the
    /// instance up to renumbering of incarnation indices.
    pub fn to_mvp_text(&self) -> String {
        let join = |v: &WeightVec| v.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(" ");
        let mut out = format!("{} {}\n", self.dims, self.bins.len());
        for bin in &self.bins {
            out.push_str(&format!("{} {}\n", join(&bin.capacity), bin.cost));
        }
        out.push_str(&format!("{}\n", self.items.len()));
        for item in &self.items {
            out.push_str(&format!("{} {}\n", item.demand, item.incarnations.len()));
            for inc in &item.incarnations {
                out.push_str(&join(&inc.weight));
                out.push('\n');
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}, token {token}: {message}")]
pub struct ParseError {
    pub message: String,
    /// 1-based index of the offending token (one past the last token at end of input).
    pub token: usize,
    pub line: usize,
}

struct Tokens<'a> {
    toks: Vec<(&'a str, usize)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    fn new(text: &'a str) -> Self {
        let mut toks = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("");
            toks.extend(line.split_ascii_whitespace().map(|t| (t, n + 1)));
        }
        Tokens { toks, pos: 0 }
    }

    fn err_here(&self, message: impl Into<String>) -> ParseError {
        let (token, line) = if self.pos == 0 {
            (1, self.toks.first().map_or(1, |t| t.1))
        } else {
            (self.pos, self.toks[self.pos - 1].1)
        };
        ParseError {
            message: message.into(),
            token,
            line,
        }
    }

    fn next_int(&mut self) -> Result<i64, ParseError> {
        let Some(&(tok, line)) = self.toks.get(self.pos) else {
            let line = self.toks.last().map_or(1, |t| t.1);
            return Err(ParseError {
                message: "unexpected end of input".into(),
                token: self.pos + 1,
                line,
            });
        };
        self.pos += 1;
        tok.parse::<i64>().map_err(|_| ParseError {
            message: format!("expected an integer, found `{tok}`"),
            token: self.pos,
            line,
        })
    }

    fn next_count(&mut self, name: &str) -> Result<i64, ParseError> {
        let v = self.next_int()?;
        if v < 1 {
            return Err(self.err_here(format!("{name} must be ≥ 1")));
        }
        Ok(v)
    }

    fn next_nonneg(&mut self, name: &str) -> Result<i64, ParseError> {
        let v = self.next_int()?;
        if v < 0 {
            return Err(self.err_here(format!("{name} must be non-negative")));
        }
        Ok(v)
    }

    fn next_vec(&mut self, dims: usize, name: &str) -> Result<WeightVec, ParseError> {
        (0..dims)
            .map(|_| self.next_nonneg(name))
            .collect::<Result<Vec<_>, _>>()
            .map(WeightVec)
    }

    fn finish(&self) -> Result<(), ParseError> {
        match self.toks.get(self.pos) {
            None => Ok(()),
            Some(&(tok, line)) => Err(ParseError {
                message: format!("trailing token `{tok}`"),
                token: self.pos + 1,
                line,
            }),
        }
    }
}

fn check_nonzero(toks: &Tokens, v: &WeightVec, what: &str) -> Result<(), ParseError> {
    if v.is_zero() {
        return Err(toks.err_here(format!("{what} is zero in every dimension")));
    }
    Ok(())
}

fn finish_instance(toks: &Tokens, dims: usize, bins: Vec<BinType>, items: Vec<ItemType>) -> Result<Instance, ParseError> {
    toks.finish()?;
    Instance::new(dims, bins, items).map_err(|e| toks.err_here(e.to_string()))
}

/// Parses the multiple-choice `.mvp` format.
pub fn parse_mvp(text: &str) -> Result<Instance, ParseError> {
    let mut toks = Tokens::new(text);
    let dims = toks.next_count("p")? as usize;
    let q = toks.next_count("q")?;
    let mut bins = Vec::with_capacity(q as usize);
    for _ in 0..q {
        let capacity = toks.next_vec(dims, "capacity")?;
        check_nonzero(&toks, &capacity, "bin capacity")?;
        let cost = toks.next_nonneg("cost")?;
        bins.push(BinType { capacity, cost });
    }
    let m = toks.next_count("m")?;
    let mut items = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let demand = toks.next_count("b_i")?;
        let count = toks.next_count("J_i")?;
        let mut incarnations = Vec::with_capacity(count as usize);
        for j in 1..=count {
            let weight = toks.next_vec(dims, "weight")?;
            check_nonzero(&toks, &weight, "item weight")?;
            incarnations.push(Incarnation { index: j as u32, weight });
        }
        items.push(ItemType { demand, incarnations });
    }
    finish_instance(&toks, dims, bins, items)
}

/// Parses the single-bin-type `.vbp` format (one bin of cost 1, one
/// incarnation per item).
pub fn parse_vbp(text: &str) -> Result<Instance, ParseError> {
    let mut toks = Tokens::new(text);
    let dims = toks.next_count("p")? as usize;
    let capacity = toks.next_vec(dims, "capacity")?;
    check_nonzero(&toks, &capacity, "bin capacity")?;
    let m = toks.next_count("m")?;
    let mut items = Vec::with_capacity(m as usize);
    for _ in 0..m {
        let weight = toks.next_vec(dims, "weight")?;
        check_nonzero(&toks, &weight, "item weight")?;
        let demand = toks.next_count("b_i")?;
        items.push(ItemType {
            demand,
            incarnations: vec![Incarnation { index: 1, weight }],
        });
    }
    finish_instance(&toks, dims, vec![BinType { capacity, cost: 1 }], items)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Diagnostic {
    /// Incarnation fits no bin type.
    Oversized { item: ItemRef },
    /// Incarnation repeats the weight vector of a lower-indexed one.
    Duplicate { item: ItemRef, kept: u32 },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::Oversized { item } => {
                write!(f, "dropped incarnation {} of item {}: fits no bin type", item.j, item.i)
            }
            Diagnostic::Duplicate { item, kept } => write!(
                f,
                "dropped incarnation {} of item {}: duplicate of incarnation {kept}",
                item.j, item.i
            ),
        }
    }
}

/// Drops incarnations that fit no bin type and duplicate incarnations within
/// an item (keeping the lowest index).
pub fn normalize(inst: &Instance) -> Result<(Instance, Vec<Diagnostic>), InstanceError> {
    let mut diags = Vec::new();
    let mut items = Vec::with_capacity(inst.items.len());
    for (i, item) in inst.items.iter().enumerate() {
        let i = i as u32 + 1;
        let mut kept: Vec<Incarnation> = Vec::new();
        for inc in &item.incarnations {
            let item_ref = ItemRef::new(i, inc.index);
            if !inst.fits_some_bin(&inc.weight) {
                diags.push(Diagnostic::Oversized { item: item_ref });
            } else if let Some(prev) = kept.iter().find(|k| k.weight == inc.weight) {
                diags.push(Diagnostic::Duplicate {
                    item: item_ref,
                    kept: prev.index,
                });
            } else {
                kept.push(inc.clone());
            }
        }
        if kept.is_empty() {
            return Err(InstanceError::NoFeasibleIncarnation(i));
        }
        items.push(ItemType {
            demand: item.demand,
            incarnations: kept,
        });
    }
    Ok((
        Instance {
            dims: inst.dims,
            bins: inst.bins.clone(),
            items,
        },
        diags,
    ))
}

/// The sort key `Σ_d w^d / max_t W_t^d`, kept as an exact fraction. All keys
/// of one instance share the denominator.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Alpha {
    pub numer: BigUint,
    pub denom: BigUint,
}

impl Alpha {
    fn compute(weight: &WeightVec, max_cap: &WeightVec) -> Alpha {
        let denom: BigUint = max_cap.iter().filter(|&&m| m > 0).map(|&m| BigUint::from(m as u64)).product();
        let mut numer = BigUint::from(0u32);
        for (d, &w) in weight.iter().enumerate() {
            if max_cap[d] == 0 {
                continue;
            }
            let others: BigUint = max_cap
                .iter()
                .enumerate()
                .filter(|&(e, &m)| e != d && m > 0)
                .map(|(_, &m)| BigUint::from(m as u64))
                .product();
            numer += BigUint::from(w as u64) * others;
        }
        Alpha { numer, denom }
    }
}

impl PartialOrd for Alpha {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Alpha {
    fn cmp(&self, other: &Self) -> Ordering {
        (&self.numer * &other.denom).cmp(&(&other.numer * &self.denom))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedEntry {
    pub item: ItemRef,
    pub weight: WeightVec,
    pub demand: i64,
    pub alpha: Alpha,
}

/// Precedence of two incarnations: larger key first, then lexicographically
/// larger weight, then ascending `(i, j)`.
pub fn precedence(a: &OrderedEntry, b: &OrderedEntry) -> Ordering {
    b.alpha
        .cmp(&a.alpha)
        .then_with(|| b.weight.cmp(&a.weight))
        .then_with(|| a.item.cmp(&b.item))
}

/// Incarnations in builder order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OrderedIncarnations {
    entries: Vec<OrderedEntry>,
}

impl OrderedIncarnations {
    pub fn entries(&self) -> &[OrderedEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Keeps the entries satisfying `keep`, preserving order.
    pub fn filtered(&self, keep: impl Fn(&OrderedEntry) -> bool) -> OrderedIncarnations {
        OrderedIncarnations {
            entries: self.entries.iter().filter(|e| keep(e)).cloned().collect(),
        }
    }
}

/// Sorts all incarnations by decreasing normalized weight sum, comparing the
/// keys exactly.
pub fn sort_items(inst: &Instance) -> OrderedIncarnations {
    sort_items_with_scale(inst, &inst.max_capacity())
}

/// As [`sort_items`], normalizing by the given per-dimension maxima.
pub fn sort_items_with_scale(inst: &Instance, max_cap: &WeightVec) -> OrderedIncarnations {
    let mut entries: Vec<OrderedEntry> = inst
        .incarnation_refs()
        .map(|(item, weight)| OrderedEntry {
            item,
            weight: weight.clone(),
            demand: inst.demand(item.i),
            alpha: Alpha::compute(weight, max_cap),
        })
        .collect();
    entries.sort_by(precedence);
    OrderedIncarnations { entries }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w(v: &[i64]) -> WeightVec {
        WeightVec::new(v.to_vec())
    }

    #[test]
    fn parse_mvp_transcribes_tokens() {
        let inst = parse_mvp("1 2\n5 3\n3 2\n2\n2 1\n3\n1 2\n2\n1\n").unwrap();
        assert_eq!(inst.dims(), 1);
        assert_eq!(
            inst.bins(),
            &[
                BinType {
                    capacity: w(&[5]),
                    cost: 3
                },
                BinType {
                    capacity: w(&[3]),
                    cost: 2
                }
            ]
        );
        assert_eq!(inst.items().len(), 2);
        assert_eq!(inst.items()[0].demand, 2);
        assert_eq!(inst.items()[0].incarnations, vec![Incarnation { index: 1, weight: w(&[3]) }]);
        assert_eq!(inst.items()[1].demand, 1);
        let weights: Vec<_> = inst.items()[1].incarnations.iter().map(|i| i.weight.clone()).collect();
        assert_eq!(weights, vec![w(&[2]), w(&[1])]);
        assert_eq!(inst.total_demand(), 3);
    }

    #[test]
    fn parse_mvp_rejects_zero_bin_types() {
        let err = parse_mvp("1 0\n").unwrap_err();
        assert_eq!(err.message, "q must be ≥ 1");
        assert_eq!(err.token, 2);
        assert_eq!(err.line, 1);
    }

    #[test]
    fn comments_are_ignored() {
        let plain = parse_mvp("1 2\n5 3\n3 2\n2\n2 1\n3\n1 2\n2\n1\n").unwrap();
        let commented = parse_mvp("1 2 # dims and bins\n5 3\n3 2\n# items follow\n2\n2 1\n3\n1 2\n2\n1\n").unwrap();
        assert_eq!(plain, commented);
    }

    #[test]
    fn parse_vbp_examples() {
        let inst = parse_vbp("1\n7\n3\n5 1\n3 1\n2 1\n").unwrap();
        assert_eq!(
            inst.bins(),
            &[BinType {
                capacity: w(&[7]),
                cost: 1
            }]
        );
        let weights: Vec<_> = inst.items().iter().map(|it| it.incarnations[0].weight.clone()).collect();
        assert_eq!(weights, vec![w(&[5]), w(&[3]), w(&[2])]);
        assert!(inst.items().iter().all(|it| it.demand == 1));

        let inst = parse_vbp("2\n10 10\n1\n6 2 4\n").unwrap();
        assert_eq!(inst.items()[0].incarnations[0].weight, w(&[6, 2]));
        assert_eq!(inst.items()[0].demand, 4);

        let err = parse_vbp("").unwrap_err();
        assert_eq!(err.message, "unexpected end of input");
    }

    #[test]
    fn parse_errors_carry_position() {
        let err = parse_mvp("1 1\n5 1\n1\n1 1\nx\n").unwrap_err();
        assert_eq!(err.line, 5);
        assert_eq!(err.token, 8);
        assert!(err.message.contains("`x`"));

        let err = parse_mvp("1 1\n5 1\n1\n0 1\n3\n").unwrap_err();
        assert_eq!(err.message, "b_i must be ≥ 1");
        let err = parse_mvp("1 1\n5 1\n1\n1 0\n").unwrap_err();
        assert_eq!(err.message, "J_i must be ≥ 1");
        let err = parse_mvp("1 1\n-5 1\n1\n1 1\n3\n").unwrap_err();
        assert_eq!(err.message, "capacity must be non-negative");
        let err = parse_mvp("1 1\n5 -1\n1\n1 1\n3\n").unwrap_err();
        assert_eq!(err.message, "cost must be non-negative");
        let err = parse_mvp("1 1\n5 1\n1\n1 1\n2.5\n").unwrap_err();
        assert!(err.message.starts_with("expected an integer"));
        let err = parse_mvp("1 1\n5 1\n1\n1 1\n3 9\n").unwrap_err();
        assert!(err.message.starts_with("trailing token"));
        let err = parse_vbp("1\n7\n1\n0 1\n").unwrap_err();
        assert!(err.message.contains("zero in every dimension"));
    }

    #[test]
    fn normalize_drops_oversized_and_duplicates() {
        let inst = parse_mvp("1 1\n7 1\n2\n1 2\n8\n3\n1 2\n3\n3\n").unwrap();
        let (norm, diags) = normalize(&inst).unwrap();
        assert_eq!(norm.items()[0].incarnations, vec![Incarnation { index: 2, weight: w(&[3]) }]);
        assert_eq!(norm.items()[1].incarnations, vec![Incarnation { index: 1, weight: w(&[3]) }]);
        assert_eq!(
            diags,
            vec![
                Diagnostic::Oversized { item: ItemRef::new(1, 1) },
                Diagnostic::Duplicate {
                    item: ItemRef::new(2, 2),
                    kept: 1
                },
            ]
        );
        assert_eq!(norm.bins(), inst.bins());
        assert_eq!(norm.dims(), inst.dims());
    }

    #[test]
    fn normalize_rejects_items_without_feasible_incarnation() {
        let inst = parse_mvp("1 1\n7 1\n1\n1 1\n9\n").unwrap();
        assert_eq!(normalize(&inst).unwrap_err(), InstanceError::NoFeasibleIncarnation(1));
    }

    fn order_weights(inst: &Instance) -> Vec<WeightVec> {
        sort_items(inst).entries().iter().map(|e| e.weight.clone()).collect()
    }

    #[test]
    fn sort_by_normalized_weight_sum() {
        let inst = parse_vbp("1\n10\n3\n3 1\n5 1\n2 1\n").unwrap();
        assert_eq!(order_weights(&inst), vec![w(&[5]), w(&[3]), w(&[2])]);
        let alphas: Vec<_> = sort_items(&inst).entries().iter().map(|e| e.alpha.clone()).collect();
        assert_eq!(
            alphas[0],
            Alpha {
                numer: 5u32.into(),
                denom: 10u32.into()
            }
        );
    }

    #[test]
    fn sort_ties_break_lexicographically() {
        let inst = parse_vbp("2\n10 10\n2\n4 4 1\n6 2 1\n").unwrap();
        assert_eq!(order_weights(&inst), vec![w(&[6, 2]), w(&[4, 4])]);
    }

    #[test]
    fn sort_normalizes_by_per_dimension_maximum() {
        let inst = parse_mvp("2 2\n10 4 1\n8 8 1\n1\n1 1\n5 4\n").unwrap();
        let order = sort_items(&inst);
        let a = &order.entries()[0].alpha;
        // 5/10 + 4/8 = 1
        assert_eq!(a.numer, a.denom);
    }

    #[test]
    fn identical_weights_order_by_item_reference() {
        let inst = parse_vbp("1\n10\n3\n4 1\n4 2\n4 1\n").unwrap();
        let refs: Vec<_> = sort_items(&inst).entries().iter().map(|e| e.item).collect();
        assert_eq!(refs, vec![ItemRef::new(1, 1), ItemRef::new(2, 1), ItemRef::new(3, 1)]);
    }

    #[test]
    fn text_round_trip() {
        let text = "2 2\n10 4 3\n8 8 2\n2\n2 2\n5 4\n1 1\n1 1\n3 3\n";
        let inst = parse_mvp(text).unwrap();
        assert_eq!(inst.to_mvp_text(), text);
        assert_eq!(parse_mvp(&inst.to_mvp_text()).unwrap(), inst);
    }
}
