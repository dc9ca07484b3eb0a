//! Arc-flow integer programs: model construction, LP/MPS text in both
//! directions, the variable-to-arc sidecar, and flow decomposition.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graph::{ArcFlowGraph, NodeId, Pattern};
use crate::instance::Instance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ModelError {
    #[error("graph has no feedback arc for bin type {0}")]
    MissingFeedback(usize),
    #[error("graph has no feedback arcs")]
    NoFeedback,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("line {line}: {message}")]
pub struct ReadError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecomposeError {
    #[error("expected {expected} flow values, got {got}")]
    Length { expected: usize, got: usize },
    #[error("flow on arc {0} is negative")]
    Negative(usize),
    #[error("flow on arc {0} is fractional")]
    Fractional(usize),
    #[error("flow is not conserved at node {0}")]
    NotConserved(String),
    #[error("flow remains on arcs that close no feedback cycle")]
    Residual,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum RowSense {
    Eq,
    Ge,
    Le,
}

impl RowSense {
    fn lp_op(self) -> &'static str {
        match self {
            RowSense::Eq => "=",
            RowSense::Ge => ">=",
            RowSense::Le => "<=",
        }
    }

    fn mps_code(self) -> &'static str {
        match self {
            RowSense::Eq => "E",
            RowSense::Ge => "G",
            RowSense::Le => "L",
        }
    }
}

/// Non-negative variable with an optional integer upper bound.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Variable {
    pub name: String,
    pub upper: Option<i64>,
    pub integer: bool,
}

/// `Σ coef · x  sense  rhs`; terms sorted by variable index, no zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Row {
    pub name: String,
    pub terms: Vec<(usize, i64)>,
    pub sense: RowSense,
    pub rhs: i64,
}

/// A minimization problem over non-negative variables with integer data.
#[derive(Clone, Debug, PartialEq, Eq, Default)]
pub struct LinearProgram {
    pub variables: Vec<Variable>,
    /// Objective terms sorted by variable index, no zeros.
    pub objective: Vec<(usize, i64)>,
    pub rows: Vec<Row>,
}

impl LinearProgram {
    pub fn num_variables(&self) -> usize {
        self.variables.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }
}

/// Decoding record for one model variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarRecord {
    pub name: String,
    pub u: String,
    pub v: String,
    pub i: u32,
    pub j: u32,
}

#[derive(Serialize, Deserialize)]
struct VarMapDoc {
    vars: Vec<VarRecord>,
}

/// An arc-flow program: one integer variable `F<id>` per arc.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FlowModel {
    pub program: LinearProgram,
    pub vars: Vec<VarRecord>,
}

/// Item types whose demand row is an equality.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExactSet(pub BTreeSet<u32>);

impl ExactSet {
    /// Items with unit demand.
    pub fn unit_demand(inst: &Instance) -> ExactSet {
        ExactSet((1..=inst.num_items() as u32).filter(|&i| inst.demand(i) == 1).collect())
    }

    pub fn contains(&self, i: u32) -> bool {
        self.0.contains(&i)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ModelKind {
    Full,
    Simple,
}

pub fn build_full_model(g: &ArcFlowGraph, inst: &Instance, exact: &ExactSet) -> Result<FlowModel, ModelError> {
    build_model(g, inst, ModelKind::Full, exact)
}

/// The full model without equality demand rows and without upper bounds.
pub fn build_simple_model(g: &ArcFlowGraph, inst: &Instance) -> Result<FlowModel, ModelError> {
    build_model(g, inst, ModelKind::Simple, &ExactSet(BTreeSet::new()))
}

fn build_model(g: &ArcFlowGraph, inst: &Instance, kind: ModelKind, exact: &ExactSet) -> Result<FlowModel, ModelError> {
    let feedback = g.feedback_arcs();
    if feedback.is_empty() {
        return Err(ModelError::NoFeedback);
    }
    for &node in g.targets() {
        let NodeId::Target(t) = g.node(node) else { unreachable!() };
        if !feedback.contains_key(t) {
            return Err(ModelError::MissingFeedback(t + 1));
        }
    }
    let total = inst.total_demand();
    let variables = g
        .arcs()
        .iter()
        .map(|a| Variable {
            name: format!("F{}", a.id),
            upper: match kind {
                ModelKind::Simple => None,
                ModelKind::Full if a.item.is_loss() => Some(total),
                ModelKind::Full => Some(inst.demand(a.item.i)),
            },
            integer: true,
        })
        .collect();
    let mut objective: Vec<(usize, i64)> = feedback
        .iter()
        .map(|(&t, &id)| (id, inst.bins()[t].cost))
        .filter(|&(_, c)| c != 0)
        .collect();
    objective.sort_unstable();

    let mut flow: Vec<Vec<(usize, i64)>> = vec![Vec::new(); g.num_nodes()];
    let mut demand: Vec<Vec<(usize, i64)>> = vec![Vec::new(); inst.num_items()];
    for a in g.arcs() {
        flow[a.v].push((a.id, 1));
        flow[a.u].push((a.id, -1));
        if !a.item.is_loss() {
            demand[a.item.i as usize - 1].push((a.id, 1));
        }
    }
    let mut rows = Vec::with_capacity(g.num_nodes() + inst.num_items());
    for (idx, terms) in flow.into_iter().enumerate() {
        rows.push(Row {
            name: format!("flow_{}", g.node(idx).name()),
            terms,
            sense: RowSense::Eq,
            rhs: 0,
        });
    }
    for (k, terms) in demand.into_iter().enumerate() {
        let i = k as u32 + 1;
        let sense = if exact.contains(i) { RowSense::Eq } else { RowSense::Ge };
        rows.push(Row {
            name: format!("dem_{i}"),
            terms,
            sense,
            rhs: inst.demand(i),
        });
    }
    let vars = g
        .arcs()
        .iter()
        .map(|a| VarRecord {
            name: format!("F{}", a.id),
            u: g.node(a.u).name(),
            v: g.node(a.v).name(),
            i: a.item.i,
            j: a.item.j,
        })
        .collect();
    Ok(FlowModel {
        program: LinearProgram {
            variables,
            objective,
            rows,
        },
        vars,
    })
}

pub fn var_map_json(mdl: &FlowModel) -> String {
    let mut s = serde_json::to_string(&VarMapDoc { vars: mdl.vars.clone() }).expect("serializable");
    s.push('\n');
    s
}

pub fn read_var_map(text: &str) -> Result<Vec<VarRecord>, serde_json::Error> {
    Ok(serde_json::from_str::<VarMapDoc>(text)?.vars)
}

fn push_terms(out: &mut String, lp: &LinearProgram, terms: &[(usize, i64)]) {
    for (pos, &(var, coef)) in terms.iter().enumerate() {
        let name = &lp.variables[var].name;
        let sign = if coef < 0 { "-" } else { "+" };
        let mag = coef.abs();
        if pos > 0 {
            write!(out, " {sign} ").unwrap();
        } else if coef < 0 {
            out.push_str("- ");
        }
        if mag == 1 {
            out.push_str(name);
        } else {
            write!(out, "{mag} {name}").unwrap();
        }
    }
}

/// CPLEX LP text.
pub fn emit_lp(lp: &LinearProgram) -> String {
    let mut out = String::from("Minimize\nobj:");
    for &(var, coef) in &lp.objective {
        let sign = if coef < 0 {
            " -"
        } else if out.ends_with(':') {
            ""
        } else {
            " +"
        };
        write!(out, "{sign} {} {}", coef.abs(), lp.variables[var].name).unwrap();
    }
    out.push_str("\nSubject To\n");
    for row in &lp.rows {
        write!(out, "{}: ", row.name).unwrap();
        if row.terms.is_empty() {
            write!(out, "0 {}", lp.variables.first().map_or("F0", |v| v.name.as_str())).unwrap();
        } else {
            push_terms(&mut out, lp, &row.terms);
        }
        writeln!(out, " {} {}", row.sense.lp_op(), row.rhs).unwrap();
    }
    out.push_str("Bounds\n");
    for v in &lp.variables {
        if let Some(ub) = v.upper {
            writeln!(out, "0 <= {} <= {ub}", v.name).unwrap();
        }
    }
    out.push_str("Generals\n");
    for v in lp.variables.iter().filter(|v| v.integer) {
        writeln!(out, "{}", v.name).unwrap();
    }
    out.push_str("End\n");
    out
}

/// Free-format MPS text. Integer columns sit between one marker pair; an
/// integer column without an upper bound gets an explicit `PL` bound.
pub fn emit_mps(lp: &LinearProgram) -> String {
    let mut out = String::from("NAME arcflow\nROWS\n N obj\n");
    for row in &lp.rows {
        writeln!(out, " {} {}", row.sense.mps_code(), row.name).unwrap();
    }
    let mut entries: Vec<Vec<(&str, i64)>> = vec![Vec::new(); lp.variables.len()];
    for &(var, coef) in &lp.objective {
        entries[var].push(("obj", coef));
    }
    for row in &lp.rows {
        for &(var, coef) in &row.terms {
            entries[var].push((&row.name, coef));
        }
    }
    out.push_str("COLUMNS\n");
    let mut in_int = false;
    let mut marker = 0;
    for (v, col) in lp.variables.iter().zip(&entries) {
        if v.integer != in_int {
            let kind = if v.integer { "INTORG" } else { "INTEND" };
            writeln!(out, " MARKER{marker} 'MARKER' '{kind}'").unwrap();
            marker += 1;
            in_int = v.integer;
        }
        for (row, coef) in col {
            writeln!(out, " {} {row} {coef}", v.name).unwrap();
        }
    }
    if in_int {
        writeln!(out, " MARKER{marker} 'MARKER' 'INTEND'").unwrap();
    }
    out.push_str("RHS\n");
    for row in lp.rows.iter().filter(|r| r.rhs != 0) {
        writeln!(out, " RHS {} {}", row.name, row.rhs).unwrap();
    }
    out.push_str("BOUNDS\n");
    for v in &lp.variables {
        match v.upper {
            Some(ub) => writeln!(out, " UP BND {} {ub}", v.name).unwrap(),
            None if v.integer => writeln!(out, " PL BND {}", v.name).unwrap(),
            None => {}
        }
    }
    out.push_str("ENDATA\n");
    out
}

struct Assembler {
    index: HashMap<String, usize>,
    variables: Vec<Variable>,
}

impl Assembler {
    fn new() -> Self {
        Assembler {
            index: HashMap::new(),
            variables: Vec::new(),
        }
    }

    fn var(&mut self, name: &str) -> usize {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        self.index.insert(name.to_string(), self.variables.len());
        self.variables.push(Variable {
            name: name.to_string(),
            upper: None,
            integer: false,
        });
        self.variables.len() - 1
    }
}

fn normalize_terms(terms: Vec<(usize, i64)>) -> Vec<(usize, i64)> {
    let mut merged: BTreeMap<usize, i64> = BTreeMap::new();
    for (v, c) in terms {
        *merged.entry(v).or_insert(0) += c;
    }
    merged.into_iter().filter(|&(_, c)| c != 0).collect()
}

fn parse_int(tok: &str, line: usize) -> Result<i64, ReadError> {
    tok.parse().map_err(|_| ReadError {
        line,
        message: format!("expected an integer, found `{tok}`"),
    })
}

/// Parses a linear expression of the form `[-] [coef] var (± [coef] var)*`.
fn parse_expr(tokens: &[&str], line: usize, asm: &mut Assembler) -> Result<Vec<(usize, i64)>, ReadError> {
    let mut terms = Vec::new();
    let mut sign = 1;
    let mut coef: Option<i64> = None;
    for &tok in tokens {
        match tok {
            "+" => sign = 1,
            "-" => sign = -1,
            _ if tok.starts_with(|c: char| c.is_ascii_digit()) => coef = Some(parse_int(tok, line)?),
            _ => {
                terms.push((asm.var(tok), sign * coef.unwrap_or(1)));
                sign = 1;
                coef = None;
            }
        }
    }
    if coef.is_some() {
        return Err(ReadError {
            line,
            message: "coefficient without a variable".into(),
        });
    }
    Ok(terms)
}

/// Reads the LP dialect written by [`emit_lp`]. Variables are numbered in
/// `Generals` order, followed by any others in order of appearance.
pub fn read_lp(text: &str) -> Result<LinearProgram, ReadError> {
    #[derive(PartialEq)]
    enum Section {
        None,
        Objective,
        Constraints,
        Bounds,
        Generals,
        End,
    }
    let mut section = Section::None;
    let mut objective_lines: Vec<(usize, &str)> = Vec::new();
    let mut row_lines: Vec<(usize, &str)> = Vec::new();
    let mut bound_lines: Vec<(usize, &str)> = Vec::new();
    let mut generals: Vec<&str> = Vec::new();
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        let body = raw.split('\\').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let next = match body.to_ascii_lowercase().as_str() {
            "minimize" => Some(Section::Objective),
            "subject to" => Some(Section::Constraints),
            "bounds" => Some(Section::Bounds),
            "generals" => Some(Section::Generals),
            "end" => Some(Section::End),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            continue;
        }
        match section {
            Section::Objective => objective_lines.push((line, body)),
            Section::Constraints => row_lines.push((line, body)),
            Section::Bounds => bound_lines.push((line, body)),
            Section::Generals => generals.extend(body.split_whitespace()),
            Section::None | Section::End => {
                return Err(ReadError {
                    line,
                    message: format!("unexpected content `{body}`"),
                })
            }
        }
    }
    if section != Section::End {
        return Err(ReadError {
            line: text.lines().count(),
            message: "missing End".into(),
        });
    }
    let mut asm = Assembler::new();
    for name in &generals {
        let v = asm.var(name);
        asm.variables[v].integer = true;
    }
    let mut objective = Vec::new();
    for (line, body) in objective_lines {
        let body = body.split_once(':').map_or(body, |(_, rest)| rest);
        let tokens: Vec<&str> = body.split_whitespace().collect();
        objective.extend(parse_expr(&tokens, line, &mut asm)?);
    }
    let mut rows = Vec::new();
    for (line, body) in row_lines {
        let (name, rest) = body.split_once(':').ok_or(ReadError {
            line,
            message: "constraint without a name".into(),
        })?;
        let tokens: Vec<&str> = rest.split_whitespace().collect();
        let [expr @ .., op, rhs] = tokens.as_slice() else {
            return Err(ReadError {
                line,
                message: "constraint too short".into(),
            });
        };
        let sense = match *op {
            "=" => RowSense::Eq,
            ">=" => RowSense::Ge,
            "<=" => RowSense::Le,
            _ => {
                return Err(ReadError {
                    line,
                    message: format!("unknown operator `{op}`"),
                })
            }
        };
        let terms = normalize_terms(parse_expr(expr, line, &mut asm)?);
        rows.push(Row {
            name: name.trim().to_string(),
            terms,
            sense,
            rhs: parse_int(rhs, line)?,
        });
    }
    for (line, body) in bound_lines {
        let tokens: Vec<&str> = body.split_whitespace().collect();
        match tokens.as_slice() {
            ["0", "<=", var, "<=", ub] => {
                let v = asm.var(var);
                asm.variables[v].upper = Some(parse_int(ub, line)?);
            }
            [var, ">=", "0"] => {
                asm.var(var);
            }
            _ => {
                return Err(ReadError {
                    line,
                    message: format!("unsupported bound `{body}`"),
                })
            }
        }
    }
    Ok(LinearProgram {
        variables: asm.variables,
        objective: normalize_terms(objective),
        rows,
    })
}

/// Reads the free MPS dialect written by [`emit_mps`].
pub fn read_mps(text: &str) -> Result<LinearProgram, ReadError> {
    let mut section = "";
    let mut objective_row: Option<String> = None;
    let mut rows: Vec<Row> = Vec::new();
    let mut row_index: HashMap<String, usize> = HashMap::new();
    let mut asm = Assembler::new();
    let mut objective = Vec::new();
    let mut in_int = false;
    let mut ended = false;
    for (n, raw) in text.lines().enumerate() {
        let line = n + 1;
        if raw.trim().is_empty() || raw.starts_with('*') {
            continue;
        }
        let tokens: Vec<&str> = raw.split_whitespace().collect();
        let err = |m: String| ReadError { line, message: m };
        if !raw.starts_with(' ') {
            section = match tokens[0] {
                "NAME" => "NAME",
                "ROWS" => "ROWS",
                "COLUMNS" => "COLUMNS",
                "RHS" => "RHS",
                "BOUNDS" => "BOUNDS",
                "ENDATA" => {
                    ended = true;
                    "ENDATA"
                }
                other => return Err(err(format!("unknown section `{other}`"))),
            };
            continue;
        }
        match (section, tokens.as_slice()) {
            ("ROWS", ["N", name]) => objective_row = Some(name.to_string()),
            ("ROWS", [code, name]) => {
                let sense = match *code {
                    "E" => RowSense::Eq,
                    "G" => RowSense::Ge,
                    "L" => RowSense::Le,
                    _ => return Err(err(format!("unknown row type `{code}`"))),
                };
                row_index.insert(name.to_string(), rows.len());
                rows.push(Row {
                    name: name.to_string(),
                    terms: Vec::new(),
                    sense,
                    rhs: 0,
                });
            }
            ("COLUMNS", [_, "'MARKER'", "'INTORG'"]) => in_int = true,
            ("COLUMNS", [_, "'MARKER'", "'INTEND'"]) => in_int = false,
            ("COLUMNS", [var, pairs @ ..]) if !pairs.is_empty() && pairs.len() % 2 == 0 => {
                let v = asm.var(var);
                asm.variables[v].integer = in_int;
                for pair in pairs.chunks(2) {
                    let coef = parse_int(pair[1], line)?;
                    if Some(pair[0]) == objective_row.as_deref() {
                        objective.push((v, coef));
                    } else {
                        let r = *row_index.get(pair[0]).ok_or_else(|| err(format!("unknown row `{}`", pair[0])))?;
                        rows[r].terms.push((v, coef));
                    }
                }
            }
            ("RHS", [_, pairs @ ..]) if !pairs.is_empty() && pairs.len() % 2 == 0 => {
                for pair in pairs.chunks(2) {
                    let r = *row_index.get(pair[0]).ok_or_else(|| err(format!("unknown row `{}`", pair[0])))?;
                    rows[r].rhs = parse_int(pair[1], line)?;
                }
            }
            ("BOUNDS", ["UP", _, var, ub]) => {
                let v = asm.var(var);
                asm.variables[v].upper = Some(parse_int(ub, line)?);
            }
            ("BOUNDS", ["PL", _, var]) => {
                asm.var(var);
            }
            ("NAME", _) => {}
            _ => return Err(err(format!("unexpected line in {section}: `{}`", raw.trim()))),
        }
    }
    if !ended {
        return Err(ReadError {
            line: text.lines().count(),
            message: "missing ENDATA".into(),
        });
    }
    for row in &mut rows {
        row.terms = normalize_terms(std::mem::take(&mut row.terms));
    }
    Ok(LinearProgram {
        variables: asm.variables,
        objective: normalize_terms(objective),
        rows,
    })
}

const INTEGRAL_TOLERANCE: f64 = 1e-6;

/// Splits an integral circulation into bin patterns with multiplicities.
///
/// Each round takes the lowest bin type whose feedback arc still carries
/// flow, walks back from its target to the source along positive-flow arcs
/// (lowest arc id first), and removes the bottleneck flow of that cycle.
/// Equal patterns are merged; cycles without items are dropped.
pub fn decompose_solution(g: &ArcFlowGraph, flows: &[f64]) -> Result<Vec<(Pattern, u64)>, DecomposeError> {
    if flows.len() != g.num_arcs() {
        return Err(DecomposeError::Length {
            expected: g.num_arcs(),
            got: flows.len(),
        });
    }
    let mut flow = Vec::with_capacity(flows.len());
    for (id, &f) in flows.iter().enumerate() {
        let r = f.round();
        if (f - r).abs() > INTEGRAL_TOLERANCE {
            return Err(DecomposeError::Fractional(id));
        }
        if r < 0.0 {
            return Err(DecomposeError::Negative(id));
        }
        flow.push(r as u64);
    }
    let mut balance = vec![0i128; g.num_nodes()];
    for a in g.arcs() {
        balance[a.v] += flow[a.id] as i128;
        balance[a.u] -= flow[a.id] as i128;
    }
    if let Some(n) = balance.iter().position(|&b| b != 0) {
        return Err(DecomposeError::NotConserved(g.node(n).to_string()));
    }
    let mut incoming: Vec<Vec<usize>> = vec![Vec::new(); g.num_nodes()];
    for a in g.arcs() {
        if !g.is_feedback(a) {
            incoming[a.v].push(a.id);
        }
    }
    let feedback = g.feedback_arcs();
    let mut found: BTreeMap<Pattern, u64> = BTreeMap::new();
    while let Some((&t, &fb)) = feedback.iter().find(|(_, &id)| flow[id] > 0) {
        let mut cycle = vec![fb];
        let mut node = g.arcs()[fb].u;
        while node != g.source() {
            let id = *incoming[node].iter().find(|&&id| flow[id] > 0).ok_or(DecomposeError::Residual)?;
            cycle.push(id);
            node = g.arcs()[id].u;
        }
        let amount = cycle.iter().map(|&id| flow[id]).min().expect("non-empty cycle");
        let mut pattern = Pattern::new(t);
        for &id in &cycle {
            flow[id] -= amount;
            pattern.add(g.arcs()[id].item, 1);
        }
        if !pattern.is_empty() {
            *found.entry(pattern).or_insert(0) += amount;
        }
    }
    if flow.iter().any(|&f| f > 0) {
        return Err(DecomposeError::Residual);
    }
    Ok(found.into_iter().collect())
}

/// Items delivered by a decomposition, per item type (index `i - 1`).
pub fn delivered(inst: &Instance, parts: &[(Pattern, u64)]) -> Vec<u64> {
    let mut out = vec![0u64; inst.num_items()];
    for (p, n) in parts {
        for (item, &k) in &p.uses {
            out[item.i as usize - 1] += k as u64 * n;
        }
    }
    out
}
