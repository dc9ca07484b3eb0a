//! Brute-force ground truth: pattern enumeration, exact covering and the
//! knapsack pricing recursion. Shares no code with the builder or the solver.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_rational::BigRational;
use num_traits::Zero;
use thiserror::Error;

use crate::graph::Pattern;
use crate::instance::{Instance, ItemRef, WeightVec};

pub const DEFAULT_PATTERN_LIMIT: usize = 1_000_000;
pub const DEFAULT_STATE_LIMIT: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OracleError {
    #[error("pattern enumeration exceeded {0} patterns")]
    TooManyPatterns(usize),
    #[error("demand state space exceeds {0} states")]
    TooManyStates(usize),
    #[error("demand cannot be covered by any pattern")]
    Uncoverable,
}

fn incarnations(inst: &Instance) -> Vec<(ItemRef, WeightVec)> {
    let mut out = Vec::new();
    for (i, item) in inst.items().iter().enumerate() {
        for inc in &item.incarnations {
            out.push((ItemRef::new(i as u32 + 1, inc.index), inc.weight.clone()));
        }
    }
    out
}

/// Every non-empty pattern for bin type `t` (0-based) that fits its capacity
/// and uses at most `b_i` units of each item type.
pub fn enumerate_patterns(inst: &Instance, t: usize, limit: usize) -> Result<BTreeSet<Pattern>, OracleError> {
    struct Search<'a> {
        incs: Vec<(ItemRef, WeightVec)>,
        inst: &'a Instance,
        cap: &'a WeightVec,
        counts: Vec<u32>,
        used: Vec<i64>,
        out: BTreeSet<Pattern>,
        t: usize,
        limit: usize,
    }

    impl Search<'_> {
        fn go(&mut self, k: usize, load: &WeightVec) -> Result<(), OracleError> {
            if k == self.incs.len() {
                if self.counts.iter().any(|&n| n > 0) {
                    let uses = self.incs.iter().zip(&self.counts).map(|((r, _), &n)| (*r, n));
                    self.out.insert(Pattern::with_uses(self.t, uses));
                    if self.out.len() > self.limit {
                        return Err(OracleError::TooManyPatterns(self.limit));
                    }
                }
                return Ok(());
            }
            let (item, w) = self.incs[k].clone();
            let type_idx = item.i as usize - 1;
            let mut load = load.clone();
            let mut n = 0;
            loop {
                self.counts[k] = n;
                self.go(k + 1, &load)?;
                if self.used[type_idx] >= self.inst.demand(item.i) {
                    break;
                }
                load = load.add(&w);
                if !load.fits_in(self.cap) {
                    break;
                }
                n += 1;
                self.used[type_idx] += 1;
            }
            self.used[type_idx] -= n as i64;
            self.counts[k] = 0;
            Ok(())
        }
    }

    let incs = incarnations(inst);
    let mut search = Search {
        counts: vec![0; incs.len()],
        used: vec![0; inst.num_items()],
        incs,
        inst,
        cap: &inst.bins()[t].capacity,
        out: BTreeSet::new(),
        t,
        limit,
    };
    search.go(0, &WeightVec::zeros(inst.dims()))?;
    Ok(search.out)
}

/// Minimum total bin cost of a multiset of patterns covering every demand
/// (over-covering allowed), with one optimal cover.
pub fn solve_exact_covering(inst: &Instance, limit: usize) -> Result<(i64, Vec<(Pattern, u32)>), OracleError> {
    inst.items()
        .iter()
        .try_fold(1usize, |acc, it| acc.checked_mul(it.demand as usize + 1))
        .filter(|&n| n <= limit)
        .ok_or(OracleError::TooManyStates(limit))?;

    // Cheapest witness per item-count vector, over all bin types.
    let mut cheapest: BTreeMap<Vec<i64>, (i64, Pattern)> = BTreeMap::new();
    for t in 0..inst.num_bins() {
        let cost = inst.bins()[t].cost;
        for p in enumerate_patterns(inst, t, DEFAULT_PATTERN_LIMIT)? {
            let counts: Vec<i64> = (1..=inst.num_items() as u32).map(|i| p.item_count(i) as i64).collect();
            match cheapest.get(&counts) {
                Some((c, _)) if *c <= cost => {}
                _ => {
                    cheapest.insert(counts, (cost, p));
                }
            }
        }
    }
    let moves: Vec<(Vec<i64>, i64, Pattern)> = cheapest.into_iter().map(|(a, (c, p))| (a, c, p)).collect();

    struct Cover<'a> {
        moves: &'a [(Vec<i64>, i64, Pattern)],
        memo: HashMap<Vec<i64>, Option<(i64, usize)>>,
    }

    impl Cover<'_> {
        fn best(&mut self, rest: &[i64]) -> Option<i64> {
            let Some(first) = rest.iter().position(|&r| r > 0) else {
                return Some(0);
            };
            if let Some(v) = self.memo.get(rest) {
                return v.map(|(c, _)| c);
            }
            let mut best: Option<(i64, usize)> = None;
            for (idx, (a, cost, _)) in self.moves.iter().enumerate() {
                if a[first] == 0 {
                    continue;
                }
                let next: Vec<i64> = rest.iter().zip(a).map(|(r, a)| (r - a).max(0)).collect();
                if let Some(sub) = self.best(&next) {
                    let total = cost + sub;
                    if best.is_none_or(|(b, _)| total < b) {
                        best = Some((total, idx));
                    }
                }
            }
            self.memo.insert(rest.to_vec(), best);
            best.map(|(c, _)| c)
        }
    }

    let demand: Vec<i64> = inst.items().iter().map(|it| it.demand).collect();
    let mut cover = Cover {
        moves: &moves,
        memo: HashMap::new(),
    };
    let total = cover.best(&demand).ok_or(OracleError::Uncoverable)?;

    let mut chosen: BTreeMap<Pattern, u32> = BTreeMap::new();
    let mut rest = demand;
    while rest.iter().any(|&r| r > 0) {
        let (_, idx) = cover.memo[&rest].expect("reachable state is coverable");
        let (a, _, p) = &moves[idx];
        *chosen.entry(p.clone()).or_insert(0) += 1;
        rest = rest.iter().zip(a).map(|(r, a)| (r - a).max(0)).collect();
    }
    Ok((total, chosen.into_iter().collect()))
}

/// Most negative reduced cost `C_t - Σ π_i a_i` over all patterns, by the
/// knapsack recursion over states `(load, incarnation, copies)`.
///
/// `duals[i - 1]` is the dual of item type `i`, shared by its incarnations.
/// The copy counter carries across incarnations of one item type, so at most
/// `b_i` units of type `i` enter a pattern. Skipping every item leaves an
/// empty bin priced at the cheapest bin cost; that case returns `None`.
pub fn price_pattern(inst: &Instance, duals: &[BigRational]) -> (BigRational, Option<Pattern>) {
    assert_eq!(duals.len(), inst.num_items(), "one dual per item type");
    let incs = incarnations(inst);
    let mut pricer = Pricer {
        inst,
        duals,
        incs: &incs,
        memo: HashMap::new(),
    };
    let zero = WeightVec::zeros(inst.dims());
    let value = pricer.value(&zero, 0, 0);

    let mut uses = Vec::new();
    let (mut x, mut k, mut c) = (zero, 0usize, 0i64);
    while k < incs.len() {
        if pricer.memo[&(x.clone(), k, c)].1 {
            let (item, w) = &incs[k];
            uses.push(*item);
            x = x.add(w);
            c += 1;
        } else {
            let same = k + 1 < incs.len() && incs[k + 1].0.i == incs[k].0.i;
            k += 1;
            c = if same { c } else { 0 };
        }
    }
    if uses.is_empty() {
        return (value, None);
    }
    let bin = pricer.cheapest_fitting(&x).expect("traced load fits").1;
    (value, Some(Pattern::with_uses(bin, uses.into_iter().map(|r| (r, 1)))))
}

struct Pricer<'a> {
    inst: &'a Instance,
    duals: &'a [BigRational],
    incs: &'a [(ItemRef, WeightVec)],
    /// Value and whether the optimum uses incarnation `k` once more.
    memo: HashMap<(WeightVec, usize, i64), (BigRational, bool)>,
}

impl Pricer<'_> {
    fn cheapest_fitting(&self, x: &WeightVec) -> Option<(i64, usize)> {
        self.inst
            .bins()
            .iter()
            .enumerate()
            .filter(|(_, b)| x.fits_in(&b.capacity))
            .map(|(t, b)| (b.cost, t))
            .min()
    }

    fn value(&mut self, x: &WeightVec, k: usize, c: i64) -> BigRational {
        if k == self.incs.len() {
            let cost = self.cheapest_fitting(x).expect("load fits some bin").0;
            return BigRational::from_integer(cost.into());
        }
        let key = (x.clone(), k, c);
        if let Some((v, _)) = self.memo.get(&key) {
            return v.clone();
        }
        let (item, w) = &self.incs[k];
        let same = k + 1 < self.incs.len() && self.incs[k + 1].0.i == item.i;
        let mut best = self.value(x, k + 1, if same { c } else { 0 });
        let mut take = false;
        let next = x.add(w);
        if c < self.inst.demand(item.i) && self.cheapest_fitting(&next).is_some() {
            let used = self.value(&next, k, c + 1) - &self.duals[item.i as usize - 1];
            if used < best {
                best = used;
                take = true;
            }
        }
        self.memo.insert(key, (best.clone(), take));
        best
    }
}

/// Reduced cost of a pattern: `C_t - Σ π_i a_i`.
pub fn reduced_cost(inst: &Instance, p: &Pattern, duals: &[BigRational]) -> BigRational {
    let mut r = BigRational::from_integer(inst.bins()[p.bin].cost.into());
    for (item, &n) in &p.uses {
        r -= &duals[item.i as usize - 1] * BigRational::from_integer(n.into());
    }
    r
}

/// Brute-force minimum reduced cost over every enumerated pattern of every
/// bin type, including the empty bin.
pub fn brute_force_price(inst: &Instance, duals: &[BigRational], limit: usize) -> Result<BigRational, OracleError> {
    let min_cost = inst.bins().iter().map(|b| b.cost).min().expect("q ≥ 1");
    let mut best = BigRational::from_integer(min_cost.into());
    for t in 0..inst.num_bins() {
        for p in enumerate_patterns(inst, t, limit)? {
            let r = reduced_cost(inst, &p, duals);
            if r < best {
                best = r;
            }
        }
    }
    Ok(best)
}

/// Zero duals for every item type.
pub fn zero_duals(inst: &Instance) -> Vec<BigRational> {
    vec![BigRational::zero(); inst.num_items()]
}
