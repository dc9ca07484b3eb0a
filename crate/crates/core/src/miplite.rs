//! Small dense LP/IP solver: two-phase bounded primal simplex with Bland's
//! rule, and best-first branch-and-bound on top of it.

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap};

use thiserror::Error;

use crate::graph::{ItemPattern, Pattern};
use crate::instance::Instance;
use crate::model::{LinearProgram, Row, RowSense, Variable};

pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;
pub const INTEGRALITY_TOLERANCE: f64 = 1e-6;
pub const PIVOT_TOLERANCE: f64 = 1e-11;
pub const DEFAULT_MAX_VARIABLES: usize = 5_000;
pub const DEFAULT_NODE_LIMIT: usize = 100_000;

const COST_TOLERANCE: f64 = 1e-9;
const TIE_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct SolverOptions {
    pub max_variables: usize,
    pub node_limit: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_variables: DEFAULT_MAX_VARIABLES,
            node_limit: DEFAULT_NODE_LIMIT,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SolveError {
    #[error("model has {vars} variables, above the limit of {limit}")]
    TooLarge { vars: usize, limit: usize },
    #[error("numerical instability: {0}")]
    NumericalInstability(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LpResult {
    pub status: LpStatus,
    /// Meaningful only when optimal.
    pub objective: f64,
    /// One value per variable; empty unless optimal.
    pub values: Vec<f64>,
    pub iterations: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NodeLimit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct IpResult {
    pub status: IpStatus,
    /// Objective of the incumbent, if any.
    pub objective: Option<f64>,
    /// Incumbent assignment; empty if none.
    pub values: Vec<f64>,
    pub nodes: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Basic(usize),
    AtLower,
    AtUpper,
}

enum Outcome {
    Optimal,
    Unbounded,
}

/// Dense tableau `B⁻¹A` over structural, slack and artificial columns.
struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    /// The original constraint matrix, kept for recomputing basic values.
    orig: Vec<f64>,
    rhs: Vec<f64>,
    beta: Vec<f64>,
    basis: Vec<usize>,
    status: Vec<Status>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    cost: Vec<f64>,
    reduced: Vec<f64>,
    can_enter: Vec<bool>,
    artificial_from: usize,
    iterations: usize,
    max_iterations: usize,
}

impl Tableau {
    fn new(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Tableau {
        let n = lp.num_variables();
        let m = lp.num_rows();
        let slack_rows: Vec<usize> = (0..m).filter(|&i| lp.rows[i].sense != RowSense::Eq).collect();
        let structural_and_slack = n + slack_rows.len();
        let mut dense = vec![vec![0.0; structural_and_slack]; m];
        for (i, row) in lp.rows.iter().enumerate() {
            for &(v, c) in &row.terms {
                dense[i][v] += c as f64;
            }
        }
        for (k, &i) in slack_rows.iter().enumerate() {
            dense[i][n + k] = if lp.rows[i].sense == RowSense::Le { 1.0 } else { -1.0 };
        }
        let mut lo: Vec<f64> = lower.to_vec();
        let mut up: Vec<f64> = upper.to_vec();
        lo.extend(std::iter::repeat_n(0.0, slack_rows.len()));
        up.extend(std::iter::repeat_n(f64::INFINITY, slack_rows.len()));

        let rhs: Vec<f64> = lp.rows.iter().map(|r| r.rhs as f64).collect();
        let residual: Vec<f64> = (0..m)
            .map(|i| rhs[i] - (0..structural_and_slack).map(|j| dense[i][j] * lo[j]).sum::<f64>())
            .collect();

        // Each row starts with its slack basic when that is feasible, else an artificial.
        let mut basic_col = vec![usize::MAX; m];
        let mut sign = vec![1.0; m];
        for (k, &i) in slack_rows.iter().enumerate() {
            let s = dense[i][n + k];
            if residual[i] * s >= 0.0 {
                basic_col[i] = n + k;
                sign[i] = s;
            }
        }
        let artificial_rows: Vec<usize> = (0..m).filter(|&i| basic_col[i] == usize::MAX).collect();
        let cols = structural_and_slack + artificial_rows.len();
        for (k, &i) in artificial_rows.iter().enumerate() {
            basic_col[i] = structural_and_slack + k;
            sign[i] = if residual[i] < 0.0 { -1.0 } else { 1.0 };
            lo.push(0.0);
            up.push(f64::INFINITY);
        }
        let mut orig = vec![0.0; m * cols];
        for i in 0..m {
            orig[i * cols..i * cols + structural_and_slack].copy_from_slice(&dense[i]);
        }
        for (k, &i) in artificial_rows.iter().enumerate() {
            orig[i * cols + structural_and_slack + k] = sign[i];
        }
        let mut a = orig.clone();
        for i in 0..m {
            for x in &mut a[i * cols..(i + 1) * cols] {
                *x /= sign[i];
            }
        }
        let mut status = vec![Status::AtLower; cols];
        for (i, &c) in basic_col.iter().enumerate() {
            status[c] = Status::Basic(i);
        }
        let beta = (0..m).map(|i| residual[i] / sign[i]).collect();
        Tableau {
            rows: m,
            cols,
            a,
            orig,
            rhs,
            beta,
            basis: basic_col,
            status,
            lower: lo,
            upper: up,
            cost: vec![0.0; cols],
            reduced: vec![0.0; cols],
            can_enter: vec![true; cols],
            artificial_from: structural_and_slack,
            iterations: 0,
            max_iterations: 20_000 + 200 * (m + cols),
        }
    }

    fn set_costs(&mut self, cost: Vec<f64>) {
        self.cost = cost;
        for j in 0..self.cols {
            let mut d = self.cost[j];
            for i in 0..self.rows {
                d -= self.cost[self.basis[i]] * self.a[i * self.cols + j];
            }
            self.reduced[j] = d;
        }
    }

    fn value(&self, j: usize) -> f64 {
        match self.status[j] {
            Status::Basic(i) => self.beta[i],
            Status::AtLower => self.lower[j],
            Status::AtUpper => self.upper[j],
        }
    }

    fn entering(&self) -> Option<usize> {
        (0..self.cols).find(|&j| {
            self.can_enter[j]
                && match self.status[j] {
                    Status::AtLower => self.reduced[j] < -COST_TOLERANCE && self.upper[j] > self.lower[j],
                    Status::AtUpper => self.reduced[j] > COST_TOLERANCE,
                    Status::Basic(_) => false,
                }
        })
    }

    fn iterate(&mut self) -> Result<Outcome, SolveError> {
        loop {
            let Some(j) = self.entering() else { return Ok(Outcome::Optimal) };
            self.iterations += 1;
            if self.iterations > self.max_iterations {
                return Err(SolveError::NumericalInstability("simplex iteration limit reached".into()));
            }
            let dir = if self.status[j] == Status::AtLower { 1.0 } else { -1.0 };
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..self.rows {
                let entry = self.a[i * self.cols + j];
                if entry.abs() <= PIVOT_TOLERANCE {
                    continue;
                }
                let rate = dir * entry;
                let b = self.basis[i];
                let limit = if rate > 0.0 {
                    (self.beta[i] - self.lower[b]) / rate
                } else if self.upper[b].is_finite() {
                    (self.upper[b] - self.beta[i]) / -rate
                } else {
                    continue;
                };
                let limit = limit.max(0.0);
                let better = match leave {
                    None => true,
                    Some((r, best)) => limit < best - TIE_TOLERANCE || (limit <= best + TIE_TOLERANCE && b < self.basis[r]),
                };
                if better {
                    leave = Some((i, limit));
                }
            }
            let flip = self.upper[j] - self.lower[j];
            let (theta, pivot_row) = match leave {
                Some((r, lim)) if lim < flip => (lim, Some(r)),
                _ if flip.is_finite() => (flip, None),
                _ => return Ok(Outcome::Unbounded),
            };
            for i in 0..self.rows {
                self.beta[i] -= dir * self.a[i * self.cols + j] * theta;
            }
            match pivot_row {
                None => {
                    self.status[j] = if dir > 0.0 { Status::AtUpper } else { Status::AtLower };
                }
                Some(r) => {
                    let entering_value = if dir > 0.0 { self.lower[j] + theta } else { self.upper[j] - theta };
                    let out = self.basis[r];
                    self.status[out] = if dir * self.a[r * self.cols + j] > 0.0 {
                        Status::AtLower
                    } else {
                        Status::AtUpper
                    };
                    self.pivot(r, j);
                    self.beta[r] = entering_value;
                }
            }
        }
    }

    fn pivot(&mut self, r: usize, j: usize) {
        let cols = self.cols;
        let p = self.a[r * cols + j];
        for x in &mut self.a[r * cols..(r + 1) * cols] {
            *x /= p;
        }
        let (before, rest) = self.a.split_at_mut(r * cols);
        let (pivot_row, after) = rest.split_at_mut(cols);
        for row in before.chunks_mut(cols).chain(after.chunks_mut(cols)) {
            let f = row[j];
            if f != 0.0 {
                for (x, &y) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * y;
                }
                row[j] = 0.0;
            }
        }
        let f = self.reduced[j];
        if f != 0.0 {
            for (x, &y) in self.reduced.iter_mut().zip(pivot_row.iter()) {
                *x -= f * y;
            }
            self.reduced[j] = 0.0;
        }
        self.basis[r] = j;
        self.status[j] = Status::Basic(r);
    }

    /// Re-solves `B x_B = b - N x_N` from the original matrix by Gaussian
    /// elimination with partial pivoting, discarding accumulated drift.
    fn refresh_basic_values(&mut self) -> Result<(), SolveError> {
        let (m, cols) = (self.rows, self.cols);
        if m == 0 {
            return Ok(());
        }
        let mut mat = vec![0.0; m * (m + 1)];
        for i in 0..m {
            let mut rhs = self.rhs[i];
            for j in 0..cols {
                if !matches!(self.status[j], Status::Basic(_)) {
                    rhs -= self.orig[i * cols + j] * self.value(j);
                }
            }
            for (k, &b) in self.basis.iter().enumerate() {
                mat[i * (m + 1) + k] = self.orig[i * cols + b];
            }
            mat[i * (m + 1) + m] = rhs;
        }
        let w = m + 1;
        for k in 0..m {
            let p = (k..m)
                .max_by(|&x, &y| mat[x * w + k].abs().partial_cmp(&mat[y * w + k].abs()).unwrap_or(Ordering::Equal))
                .expect("non-empty range");
            if mat[p * w + k].abs() <= PIVOT_TOLERANCE {
                return Err(SolveError::NumericalInstability("basis matrix is singular".into()));
            }
            if p != k {
                for c in 0..w {
                    mat.swap(k * w + c, p * w + c);
                }
            }
            for i in (k + 1)..m {
                let f = mat[i * w + k] / mat[k * w + k];
                if f != 0.0 {
                    for c in k..w {
                        mat[i * w + c] -= f * mat[k * w + c];
                    }
                }
            }
        }
        for k in (0..m).rev() {
            let mut s = mat[k * w + m];
            for c in (k + 1)..m {
                s -= mat[k * w + c] * self.beta[c];
            }
            self.beta[k] = s / mat[k * w + k];
        }
        Ok(())
    }
}

fn scaled(tol: f64, magnitude: f64) -> f64 {
    tol * magnitude.abs().max(1.0)
}

fn check_size(lp: &LinearProgram, opts: &SolverOptions) -> Result<(), SolveError> {
    if lp.num_variables() > opts.max_variables {
        return Err(SolveError::TooLarge {
            vars: lp.num_variables(),
            limit: opts.max_variables,
        });
    }
    Ok(())
}

fn row_activity(row: &Row, x: &[f64]) -> f64 {
    row.terms.iter().map(|&(v, c)| c as f64 * x[v]).sum()
}

/// Checks `x` against every row and bound with the feasibility tolerance.
pub fn is_feasible(lp: &LinearProgram, x: &[f64]) -> bool {
    x.len() == lp.num_variables()
        && lp.variables.iter().zip(x).all(|(v, &xv)| {
            xv >= -FEASIBILITY_TOLERANCE && v.upper.is_none_or(|u| xv <= u as f64 + scaled(FEASIBILITY_TOLERANCE, u as f64))
        })
        && lp.rows.iter().all(|row| {
            let act = row_activity(row, x);
            let tol = scaled(FEASIBILITY_TOLERANCE, row.rhs as f64);
            match row.sense {
                RowSense::Eq => (act - row.rhs as f64).abs() <= tol,
                RowSense::Ge => act >= row.rhs as f64 - tol,
                RowSense::Le => act <= row.rhs as f64 + tol,
            }
        })
}

pub fn objective_value(lp: &LinearProgram, x: &[f64]) -> f64 {
    lp.objective.iter().map(|&(v, c)| c as f64 * x[v]).sum()
}

fn solve_bounded(lp: &LinearProgram, lower: &[f64], upper: &[f64]) -> Result<LpResult, SolveError> {
    let n = lp.num_variables();
    if lower.iter().zip(upper).any(|(l, u)| l > u) {
        return Ok(LpResult {
            status: LpStatus::Infeasible,
            objective: 0.0,
            values: Vec::new(),
            iterations: 0,
        });
    }
    let mut tab = Tableau::new(lp, lower, upper);
    let art = tab.artificial_from;
    if art < tab.cols {
        let phase1 = (0..tab.cols).map(|j| if j >= art { 1.0 } else { 0.0 }).collect();
        tab.set_costs(phase1);
        tab.iterate()?;
        tab.refresh_basic_values()?;
        let rhs_scale = lp.rows.iter().map(|r| (r.rhs as f64).abs()).fold(1.0, f64::max);
        let infeasibility: f64 = (art..tab.cols).map(|j| tab.value(j).max(0.0)).sum();
        if infeasibility > scaled(FEASIBILITY_TOLERANCE, rhs_scale) {
            return Ok(LpResult {
                status: LpStatus::Infeasible,
                objective: 0.0,
                values: Vec::new(),
                iterations: tab.iterations,
            });
        }
        for j in art..tab.cols {
            tab.upper[j] = 0.0;
            tab.can_enter[j] = false;
            if let Status::Basic(i) = tab.status[j] {
                tab.beta[i] = 0.0;
            }
        }
    }
    let mut cost = vec![0.0; tab.cols];
    for &(v, c) in &lp.objective {
        cost[v] = c as f64;
    }
    tab.set_costs(cost);
    if let Outcome::Unbounded = tab.iterate()? {
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            objective: 0.0,
            values: Vec::new(),
            iterations: tab.iterations,
        });
    }
    tab.refresh_basic_values()?;
    let mut x: Vec<f64> = (0..n).map(|j| tab.value(j)).collect();
    for (j, xj) in x.iter_mut().enumerate() {
        let (l, u) = (lower[j], upper[j]);
        if *xj < l - scaled(FEASIBILITY_TOLERANCE, l) || *xj > u + scaled(FEASIBILITY_TOLERANCE, u) {
            return Err(SolveError::NumericalInstability(format!(
                "variable {} leaves its bounds",
                lp.variables[j].name
            )));
        }
        *xj = xj.clamp(l, u);
        if xj.abs() < TIE_TOLERANCE {
            *xj = 0.0;
        }
    }
    let rows_ok = lp.rows.iter().all(|row| {
        let act = row_activity(row, &x);
        let tol = scaled(FEASIBILITY_TOLERANCE, row.rhs as f64);
        match row.sense {
            RowSense::Eq => (act - row.rhs as f64).abs() <= tol,
            RowSense::Ge => act >= row.rhs as f64 - tol,
            RowSense::Le => act <= row.rhs as f64 + tol,
        }
    });
    if !rows_ok {
        return Err(SolveError::NumericalInstability("final point violates a row".into()));
    }
    Ok(LpResult {
        status: LpStatus::Optimal,
        objective: objective_value(lp, &x),
        values: x,
        iterations: tab.iterations,
    })
}

fn declared_bounds(lp: &LinearProgram) -> (Vec<f64>, Vec<f64>) {
    let lower = vec![0.0; lp.num_variables()];
    let upper = lp.variables.iter().map(|v| v.upper.map_or(f64::INFINITY, |u| u as f64)).collect();
    (lower, upper)
}

/// Solves the LP relaxation (integrality is ignored).
pub fn solve_lp(lp: &LinearProgram, opts: &SolverOptions) -> Result<LpResult, SolveError> {
    check_size(lp, opts)?;
    let (lower, upper) = declared_bounds(lp);
    solve_bounded(lp, &lower, &upper)
}

struct Node {
    bound: f64,
    seq: usize,
    lower: Vec<f64>,
    upper: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    /// Reversed so the max-heap pops the lowest bound, then the oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Integer variable whose value is furthest from integral, lowest index on ties.
fn branching_variable(lp: &LinearProgram, x: &[f64]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for (j, v) in lp.variables.iter().enumerate() {
        if !v.integer {
            continue;
        }
        let frac = x[j] - x[j].floor();
        let dist = frac.min(1.0 - frac);
        if dist > INTEGRALITY_TOLERANCE && best.is_none_or(|(_, d)| dist > d) {
            best = Some((j, dist));
        }
    }
    best.map(|(j, _)| j)
}

/// Branch-and-bound over the LP relaxation: best-first by parent bound, floor
/// branch first.
pub fn solve_ip(lp: &LinearProgram, opts: &SolverOptions) -> Result<IpResult, SolveError> {
    check_size(lp, opts)?;
    let integral_objective = lp.objective.iter().all(|&(v, _)| lp.variables[v].integer);
    let prunes = |bound: f64, incumbent: Option<f64>| match incumbent {
        None => false,
        Some(z) if integral_objective => (bound - INTEGRALITY_TOLERANCE).ceil() >= z - INTEGRALITY_TOLERANCE,
        Some(z) => bound >= z - FEASIBILITY_TOLERANCE,
    };
    let (lower, upper) = declared_bounds(lp);
    let mut heap = BinaryHeap::new();
    heap.push(Node {
        bound: f64::NEG_INFINITY,
        seq: 0,
        lower,
        upper,
    });
    let mut seq = 1;
    let mut nodes = 0;
    let mut incumbent: Option<(f64, Vec<f64>)> = None;
    let mut unbounded = false;
    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map(|(z, _)| *z);
        if prunes(node.bound, best) {
            continue;
        }
        if nodes >= opts.node_limit {
            let (objective, values) = incumbent.map_or((None, Vec::new()), |(z, x)| (Some(z), x));
            return Ok(IpResult {
                status: IpStatus::NodeLimit,
                objective,
                values,
                nodes,
            });
        }
        nodes += 1;
        let relax = solve_bounded(lp, &node.lower, &node.upper)?;
        match relax.status {
            LpStatus::Infeasible => continue,
            LpStatus::Unbounded => {
                unbounded = true;
                break;
            }
            LpStatus::Optimal => {}
        }
        if prunes(relax.objective, best) {
            continue;
        }
        match branching_variable(lp, &relax.values) {
            None => {
                let x: Vec<f64> = relax
                    .values
                    .iter()
                    .zip(&lp.variables)
                    .map(|(&v, var)| if var.integer { v.round() } else { v })
                    .collect();
                let z = objective_value(lp, &x);
                if best.is_none_or(|b| z < b) {
                    incumbent = Some((z, x));
                }
            }
            Some(j) => {
                let v = relax.values[j];
                let mut down = Node {
                    bound: relax.objective,
                    seq,
                    lower: node.lower.clone(),
                    upper: node.upper.clone(),
                };
                down.upper[j] = v.floor();
                let mut up = Node {
                    bound: relax.objective,
                    seq: seq + 1,
                    lower: node.lower,
                    upper: node.upper,
                };
                up.lower[j] = v.ceil();
                seq += 2;
                heap.push(down);
                heap.push(up);
            }
        }
    }
    if unbounded {
        return Ok(IpResult {
            status: IpStatus::Unbounded,
            objective: None,
            values: Vec::new(),
            nodes,
        });
    }
    Ok(match incumbent {
        Some((z, x)) => IpResult {
            status: IpStatus::Optimal,
            objective: Some(z),
            values: x,
            nodes,
        },
        None => IpResult {
            status: IpStatus::Infeasible,
            objective: None,
            values: Vec::new(),
            nodes,
        },
    })
}

/// Covering LP over a fixed pattern set: one non-negative variable per
/// distinct column at its bin cost, one `≥ b_i` row per item type. Patterns
/// of one bin type that differ only in incarnations give identical columns
/// and share a variable.
pub fn pattern_program<'a>(patterns: impl IntoIterator<Item = &'a Pattern>, inst: &Instance) -> LinearProgram {
    let mut seen = BTreeSet::new();
    let columns: Vec<ItemPattern> = patterns
        .into_iter()
        .map(Pattern::by_item_type)
        .filter(|c| seen.insert(c.clone()))
        .collect();
    let variables = (0..columns.len())
        .map(|k| Variable {
            name: format!("P{k}"),
            upper: None,
            integer: false,
        })
        .collect();
    let objective = columns
        .iter()
        .enumerate()
        .map(|(k, c)| (k, inst.bins()[c.bin].cost))
        .filter(|&(_, c)| c != 0)
        .collect();
    let rows = (1..=inst.num_items() as u32)
        .map(|i| Row {
            name: format!("dem_{i}"),
            terms: columns
                .iter()
                .enumerate()
                .filter_map(|(k, c)| c.counts.get(&i).map(|&n| (k, n as i64)))
                .filter(|&(_, n)| n != 0)
                .collect(),
            sense: RowSense::Ge,
            rhs: inst.demand(i),
        })
        .collect();
    LinearProgram {
        variables,
        objective,
        rows,
    }
}

pub fn solve_pattern_lp<'a>(
    patterns: impl IntoIterator<Item = &'a Pattern>,
    inst: &Instance,
    opts: &SolverOptions,
) -> Result<LpResult, SolveError> {
    solve_lp(&pattern_program(patterns, inst), opts)
}
