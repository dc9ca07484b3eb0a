//! Command implementations behind the `arcflow` binary. Every command
//! returns its standard output, diagnostics and exit code instead of
//! printing, so the same code paths are testable in-process.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::Zero;
use rayon::prelude::*;

use arcflow::builder::{build, build_baseline_merged, BuildError, BuildOptions, BuildReport, DEFAULT_MAX_STATES};
use arcflow::gen::{random_instance, RandomParams};
use arcflow::graph::{
    enumerate_paths, to_canonical_json, to_dot, valid_item_patterns, ArcFlowGraph, DotOptions, GraphError, ItemPattern, Pattern,
    DEFAULT_PATH_LIMIT,
};
use arcflow::instance::{normalize, parse_mvp, parse_vbp, Instance};
use arcflow::miplite::{
    solve_ip, solve_lp, solve_pattern_lp, IpStatus, LpStatus, SolveError, SolverOptions, DEFAULT_MAX_VARIABLES, DEFAULT_NODE_LIMIT,
};
use arcflow::model::{
    build_full_model, build_simple_model, decompose_solution, delivered, emit_lp, emit_mps, var_map_json, ExactSet, FlowModel,
};
use arcflow::oracle::{enumerate_patterns, price_pattern, solve_exact_covering, OracleError, DEFAULT_PATTERN_LIMIT, DEFAULT_STATE_LIMIT};
use arcflow::postprocess::connect_targets;

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_GUARD: u8 = 2;
pub const EXIT_VERIFY: u8 = 3;

const LP_TOLERANCE: f64 = 1e-6;

#[derive(Parser, Debug)]
#[command(
    name = "arcflow",
    version,
    about = "Compressed arc-flow graphs for multiple-choice vector bin packing"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Build the arc-flow graph of an instance.
    Build(BuildArgs),
    /// Write the arc-flow integer program as LP or MPS, plus a variable map.
    Model(ModelArgs),
    /// Solve an instance exactly and print the packing.
    Solve(SolveArgs),
    /// Check the graph against brute-force references.
    Verify(VerifyArgs),
    /// Compare the graph with the per-bin-type baseline construction.
    Compare(CompareArgs),
    /// Find the column of least reduced cost for given item duals.
    Price(PriceArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InstanceFormat {
    Vbp,
    Mvp,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelVariant {
    Full,
    Simple,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelFormat {
    Lp,
    Mps,
}

#[derive(Args, Debug, Clone)]
pub struct InstanceArgs {
    /// Instance file (`.vbp` or `.mvp`).
    pub instance: PathBuf,
    /// Instance format; taken from the file extension when omitted.
    #[arg(long = "instance-format", value_enum)]
    pub instance_format: Option<InstanceFormat>,
    /// Limit on distinct DP states while building.
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    pub max_states: usize,
}

#[derive(Args, Debug, Clone)]
pub struct SolverArgs {
    /// Largest model the built-in solver accepts.
    #[arg(long, default_value_t = DEFAULT_MAX_VARIABLES)]
    pub max_vars: usize,
    /// Branch-and-bound node limit.
    #[arg(long, default_value_t = DEFAULT_NODE_LIMIT)]
    pub node_limit: usize,
}

impl SolverArgs {
    fn options(&self) -> SolverOptions {
        SolverOptions {
            max_variables: self.max_vars,
            node_limit: self.node_limit,
        }
    }
}

#[derive(Args, Debug)]
pub struct BuildArgs {
    /// Instance file (`.vbp` or `.mvp`).
    pub instance: PathBuf,
    /// Instance format; taken from the file extension when omitted.
    #[arg(long, value_enum)]
    pub format: Option<InstanceFormat>,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    pub max_states: usize,
    /// Write the canonical graph JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Write a GraphViz rendering here.
    #[arg(long)]
    pub dot: Option<PathBuf>,
    /// Draw feedback arcs in the DOT output.
    #[arg(long)]
    pub dot_feedback: bool,
}

#[derive(Args, Debug)]
pub struct ModelArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[arg(long, value_enum, default_value_t = ModelVariant::Full)]
    pub model: ModelVariant,
    #[arg(long, value_enum, default_value_t = ModelFormat::Lp)]
    pub format: ModelFormat,
    /// Model file; defaults to the instance path with the model extension.
    #[arg(short = 'o', long = "output")]
    pub output: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct SolveArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Instance file; may be omitted when `--seeds` is given.
    pub instance: Option<PathBuf>,
    #[arg(long = "instance-format", value_enum)]
    pub instance_format: Option<InstanceFormat>,
    /// Also check this many random instances.
    #[arg(long, default_value_t = 0)]
    pub seeds: u64,
    /// First random seed.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = DEFAULT_MAX_STATES)]
    pub max_states: usize,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
}

#[derive(Args, Debug)]
pub struct PriceArgs {
    #[command(flatten)]
    pub input: InstanceArgs,
    /// Duals file: one `i value` line per item type.
    pub duals: PathBuf,
}

/// Captured result of one command.
#[derive(Debug, Default, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub code: u8,
    pub stdout: String,
    pub stderr: String,
}

#[derive(Debug)]
enum Failure {
    Input(String),
    Guard(String),
}

impl From<BuildError> for Failure {
    fn from(e: BuildError) -> Self {
        match e {
            BuildError::TooLarge(_) => Failure::Guard(e.to_string()),
            BuildError::Graph(_) => Failure::Input(e.to_string()),
        }
    }
}

impl From<GraphError> for Failure {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::TooManyPaths(_) => Failure::Guard(e.to_string()),
            _ => Failure::Input(e.to_string()),
        }
    }
}

impl From<OracleError> for Failure {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Uncoverable => Failure::Input(e.to_string()),
            _ => Failure::Guard(e.to_string()),
        }
    }
}

impl From<SolveError> for Failure {
    fn from(e: SolveError) -> Self {
        Failure::Guard(e.to_string())
    }
}

/// Accumulates standard output and diagnostics for one command.
#[derive(Default)]
struct Sink {
    out: String,
    err: String,
}

impl Sink {
    fn line(&mut self, s: impl AsRef<str>) {
        self.out.push_str(s.as_ref());
        self.out.push('\n');
    }

    fn warn(&mut self, s: impl AsRef<str>) {
        self.err.push_str(s.as_ref());
        self.err.push('\n');
    }

    fn finish(self, code: u8) -> Outcome {
        Outcome {
            code,
            stdout: self.out,
            stderr: self.err,
        }
    }
}

pub fn run(cli: Cli) -> Outcome {
    let mut sink = Sink::default();
    let result = match cli.command {
        Command::Build(a) => cmd_build(&a, &mut sink),
        Command::Model(a) => cmd_model(&a, &mut sink),
        Command::Solve(a) => cmd_solve(&a, &mut sink),
        Command::Verify(a) => cmd_verify(&a, &mut sink),
        Command::Compare(a) => cmd_compare(&a, &mut sink),
        Command::Price(a) => cmd_price(&a, &mut sink),
    };
    match result {
        Ok(code) => sink.finish(code),
        Err(Failure::Input(msg)) => {
            sink.warn(format!("error: {msg}"));
            sink.finish(EXIT_INPUT)
        }
        Err(Failure::Guard(msg)) => {
            sink.warn(format!("error: {msg}"));
            sink.finish(EXIT_GUARD)
        }
    }
}

fn read_text(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    fs::write(path, text).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))
}

/// Reads, parses and normalizes an instance; normalization notes go to
/// standard error.
fn load_instance(path: &Path, format: Option<InstanceFormat>, sink: &mut Sink) -> Result<Instance, Failure> {
    let format = match format {
        Some(f) => f,
        None => match path.extension().and_then(|e| e.to_str()) {
            Some("vbp") => InstanceFormat::Vbp,
            Some("mvp") => InstanceFormat::Mvp,
            _ => {
                return Err(Failure::Input(format!(
                    "{}: cannot tell the format from the extension; pass --instance-format",
                    path.display()
                )))
            }
        },
    };
    let text = read_text(path)?;
    let parsed = match format {
        InstanceFormat::Vbp => parse_vbp(&text),
        InstanceFormat::Mvp => parse_mvp(&text),
    }
    .map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let (inst, diags) = normalize(&parsed).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    for d in diags {
        sink.warn(format!("warning: {d}"));
    }
    Ok(inst)
}

fn build_options(max_states: usize) -> BuildOptions {
    BuildOptions {
        max_states,
        ..Default::default()
    }
}

fn format_number(x: f64) -> String {
    let r = x.round();
    if (x - r).abs() <= LP_TOLERANCE {
        format!("{}", r as i64)
    } else {
        format!("{x:.6}")
    }
}

fn format_rational(r: &BigRational) -> String {
    if r.is_integer() {
        r.to_integer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// `bin=<t> count=<c> items=<(i,j)xn,...>`.
pub fn pattern_line(p: &Pattern, count: u64) -> String {
    let items = p.uses.iter().map(|(r, n)| format!("{r}x{n}")).collect::<Vec<_>>().join(",");
    format!("bin={} count={count} items={items}", p.bin + 1)
}

fn cmd_build(a: &BuildArgs, sink: &mut Sink) -> Result<u8, Failure> {
    let inst = load_instance(&a.instance, a.format, sink)?;
    let start = Instant::now();
    let g = build(&inst, &build_options(a.max_states))?.graph;
    let ms = start.elapsed().as_millis();
    if let Some(out) = &a.out {
        write_text(out, &to_canonical_json(&g))?;
    }
    if let Some(dot) = &a.dot {
        write_text(
            dot,
            &to_dot(
                &g,
                DotOptions {
                    include_feedback: a.dot_feedback,
                },
            ),
        )?;
    }
    sink.line(format!("nodes={} arcs={} build_ms={ms}", g.num_nodes(), g.num_arcs()));
    Ok(EXIT_OK)
}

fn model_for(g: &ArcFlowGraph, inst: &Instance, variant: ModelVariant) -> Result<FlowModel, Failure> {
    match variant {
        ModelVariant::Full => build_full_model(g, inst, &ExactSet::unit_demand(inst)),
        ModelVariant::Simple => build_simple_model(g, inst),
    }
    .map_err(|e| Failure::Input(e.to_string()))
}

/// `model.lp` → `model.map.json`.
pub fn sidecar_path(model: &Path) -> PathBuf {
    model.with_extension("map.json")
}

fn cmd_model(a: &ModelArgs, sink: &mut Sink) -> Result<u8, Failure> {
    let inst = load_instance(&a.input.instance, a.input.instance_format, sink)?;
    let g = build(&inst, &build_options(a.input.max_states))?.graph;
    let mdl = model_for(&g, &inst, a.model)?;
    let (text, ext) = match a.format {
        ModelFormat::Lp => (emit_lp(&mdl.program), "lp"),
        ModelFormat::Mps => (emit_mps(&mdl.program), "mps"),
    };
    let path = a.output.clone().unwrap_or_else(|| a.input.instance.with_extension(ext));
    write_text(&path, &text)?;
    write_text(&sidecar_path(&path), &var_map_json(&mdl))?;
    sink.line(format!(
        "variables={} rows={} file={}",
        mdl.program.num_variables(),
        mdl.program.num_rows(),
        path.display()
    ));
    Ok(EXIT_OK)
}

fn cmd_solve(a: &SolveArgs, sink: &mut Sink) -> Result<u8, Failure> {
    let inst = load_instance(&a.input.instance, a.input.instance_format, sink)?;
    let g = build(&inst, &build_options(a.input.max_states))?.graph;
    let mdl = model_for(&g, &inst, ModelVariant::Full)?;
    let ip = solve_ip(&mdl.program, &a.solver.options())?;
    let code = match ip.status {
        IpStatus::Optimal => EXIT_OK,
        IpStatus::NodeLimit => {
            sink.warn(format!("error: node limit of {} reached", a.solver.node_limit));
            EXIT_GUARD
        }
        IpStatus::Infeasible | IpStatus::Unbounded => {
            sink.line(format!(
                "status={}",
                if ip.status == IpStatus::Infeasible {
                    "infeasible"
                } else {
                    "unbounded"
                }
            ));
            return Ok(EXIT_INPUT);
        }
    };
    let Some(z) = ip.objective else {
        sink.line("status=no-incumbent");
        return Ok(code);
    };
    sink.line(format!("objective={}", format_number(z)));
    let parts = decompose_solution(&g, &ip.values).map_err(|e| Failure::Guard(e.to_string()))?;
    for (p, n) in &parts {
        sink.line(pattern_line(p, *n));
    }
    Ok(code)
}

/// Names of the checks run by `verify`, in report order.
pub const CHECKS: [&str; 4] = ["patterns", "lp_bound", "ip_optimum", "compression"];

/// Outcome of every check on one instance; `Err` carries a failure reason.
pub type CheckResults = [Result<(), String>; 4];

fn oracle_item_patterns(inst: &Instance) -> Result<BTreeSet<ItemPattern>, OracleError> {
    let mut all = BTreeSet::new();
    for t in 0..inst.num_bins() {
        all.extend(
            enumerate_patterns(inst, t, DEFAULT_PATTERN_LIMIT)?
                .iter()
                .map(Pattern::by_item_type),
        );
    }
    Ok(all)
}

fn check_patterns(report: &BuildReport, inst: &Instance) -> Result<Result<(), String>, Failure> {
    let paths = enumerate_paths(&report.graph, DEFAULT_PATH_LIMIT)?;
    if let Some(p) = paths.iter().find(|p| !p.fits(inst)) {
        return Ok(Err(format!("path pattern exceeds capacity: {p}")));
    }
    let graph = valid_item_patterns(&report.graph, inst, DEFAULT_PATH_LIMIT)?;
    let oracle = oracle_item_patterns(inst)?;
    if graph == oracle {
        Ok(Ok(()))
    } else {
        let missing = oracle.difference(&graph).count();
        let extra = graph.difference(&oracle).count();
        Ok(Err(format!("{missing} oracle patterns missing, {extra} extra")))
    }
}

fn check_lp_bound(report: &BuildReport, inst: &Instance, opts: &SolverOptions) -> Result<Result<(), String>, Failure> {
    let simple = model_for(&report.graph, inst, ModelVariant::Simple)?;
    let arc_flow = solve_lp(&simple.program, opts)?;
    let paths = enumerate_paths(&report.graph, DEFAULT_PATH_LIMIT)?;
    let pattern = solve_pattern_lp(&paths, inst, opts)?;
    if arc_flow.status != LpStatus::Optimal || pattern.status != LpStatus::Optimal {
        return Ok(Err(format!("statuses {:?} and {:?}", arc_flow.status, pattern.status)));
    }
    if (arc_flow.objective - pattern.objective).abs() <= LP_TOLERANCE {
        Ok(Ok(()))
    } else {
        Ok(Err(format!("arc-flow {} vs pattern {}", arc_flow.objective, pattern.objective)))
    }
}

fn check_ip_optimum(report: &BuildReport, inst: &Instance, opts: &SolverOptions) -> Result<Result<(), String>, Failure> {
    let full = model_for(&report.graph, inst, ModelVariant::Full)?;
    let ip = solve_ip(&full.program, opts)?;
    if ip.status == IpStatus::NodeLimit {
        return Err(Failure::Guard("node limit reached".into()));
    }
    let (best, _) = solve_exact_covering(inst, DEFAULT_STATE_LIMIT)?;
    let Some(z) = ip.objective.filter(|_| ip.status == IpStatus::Optimal) else {
        return Ok(Err(format!("solver status {:?}", ip.status)));
    };
    if (z - best as f64).abs() > LP_TOLERANCE {
        return Ok(Err(format!("solver {z} vs oracle {best}")));
    }
    let parts = match decompose_solution(&report.graph, &ip.values) {
        Ok(parts) => parts,
        Err(e) => return Ok(Err(e.to_string())),
    };
    if let Some((p, _)) = parts.iter().find(|(p, _)| !p.fits(inst)) {
        return Ok(Err(format!("decomposed pattern exceeds capacity: {p}")));
    }
    let got = delivered(inst, &parts);
    if inst.items().iter().zip(&got).any(|(it, &n)| (n as i64) < it.demand) {
        return Ok(Err("decomposition misses demand".into()));
    }
    Ok(Ok(()))
}

/// Relabelling from the source must not grow the graph, must keep the valid
/// path patterns once targets are attached, and must not create a path that
/// overflows a bin.
pub fn compression_check(report: &BuildReport, inst: &Instance) -> Result<Result<(), String>, GraphError> {
    let (before, after) = (&report.step3, &report.compressed);
    if after.num_nodes() > before.num_nodes() || after.num_arcs() > before.num_arcs() {
        return Ok(Err(format!(
            "grew from {}/{} to {}/{} nodes/arcs",
            before.num_nodes(),
            before.num_arcs(),
            after.num_nodes(),
            after.num_arcs()
        )));
    }
    let p_before = enumerate_paths(&connect_targets(before, inst.bins()), DEFAULT_PATH_LIMIT)?;
    let p_after = enumerate_paths(&connect_targets(after, inst.bins()), DEFAULT_PATH_LIMIT)?;
    if let Some(p) = p_after.iter().find(|p| !p.fits(inst)) {
        return Ok(Err(format!("compressed path exceeds capacity: {p}")));
    }
    let valid = |ps: BTreeSet<Pattern>| ps.into_iter().filter(|p| p.is_valid(inst)).collect::<BTreeSet<_>>();
    if valid(p_before) == valid(p_after) {
        Ok(Ok(()))
    } else {
        Ok(Err("valid pattern sets differ".into()))
    }
}

/// Runs every verification check on one normalized instance.
pub fn verify_instance(inst: &Instance, max_states: usize, opts: &SolverOptions) -> Result<CheckResults, String> {
    let run = || -> Result<CheckResults, Failure> {
        let report = build(inst, &build_options(max_states))?;
        Ok([
            check_patterns(&report, inst)?,
            check_lp_bound(&report, inst, opts)?,
            check_ip_optimum(&report, inst, opts)?,
            compression_check(&report, inst)?,
        ])
    };
    run().map_err(|f| match f {
        Failure::Input(m) | Failure::Guard(m) => m,
    })
}

fn cmd_verify(a: &VerifyArgs, sink: &mut Sink) -> Result<u8, Failure> {
    let mut cases: Vec<(String, Instance)> = Vec::new();
    if let Some(path) = &a.instance {
        cases.push((path.display().to_string(), load_instance(path, a.instance_format, sink)?));
    }
    let params = RandomParams::default();
    for seed in a.seed..a.seed + a.seeds {
        cases.push((format!("seed {seed}"), random_instance(seed, &params)));
    }
    if cases.is_empty() {
        return Err(Failure::Input("nothing to verify: give an instance or --seeds".into()));
    }
    let opts = a.solver.options();
    let results: Vec<Result<CheckResults, String>> = cases
        .par_iter()
        .map(|(_, inst)| verify_instance(inst, a.max_states, &opts))
        .collect();
    let mut guard = false;
    let mut failed = false;
    let mut passed = [0usize; 4];
    for ((name, _), res) in cases.iter().zip(&results) {
        match res {
            Err(msg) => {
                guard = true;
                sink.warn(format!("{name}: {msg}"));
            }
            Ok(checks) => {
                for (k, c) in checks.iter().enumerate() {
                    match c {
                        Ok(()) => passed[k] += 1,
                        Err(why) => {
                            failed = true;
                            sink.warn(format!("{name}: {} failed: {why}", CHECKS[k]));
                        }
                    }
                }
            }
        }
    }
    for (k, name) in CHECKS.iter().enumerate() {
        let verdict = if passed[k] == cases.len() { "PASS" } else { "FAIL" };
        if cases.len() == 1 {
            sink.line(format!("{verdict} {name}"));
        } else {
            sink.line(format!("{verdict} {name} {}/{}", passed[k], cases.len()));
        }
    }
    Ok(if failed {
        EXIT_VERIFY
    } else if guard {
        EXIT_GUARD
    } else {
        EXIT_OK
    })
}

fn graph_stats(g: &ArcFlowGraph) -> String {
    format!("nodes={} arcs={}", g.num_nodes(), g.num_arcs())
}

fn cmd_compare(a: &CompareArgs, sink: &mut Sink) -> Result<u8, Failure> {
    let inst = load_instance(&a.input.instance, a.input.instance_format, sink)?;
    let opts = build_options(a.input.max_states);
    let new = build(&inst, &opts).map(|r| r.graph);
    let baseline = build_baseline_merged(&inst, &opts);
    let mut code = EXIT_OK;
    let mut side = |label: &str, g: &Result<ArcFlowGraph, BuildError>, sink: &mut Sink| match g {
        Ok(g) => sink.line(format!("{label}: {}", graph_stats(g))),
        Err(e) => {
            code = EXIT_GUARD;
            sink.line(format!("{label}: error={e}"));
        }
    };
    side("new", &new, sink);
    side("baseline", &baseline, sink);
    match (&new, &baseline) {
        (Ok(n), Ok(b)) => {
            let equal = valid_item_patterns(n, &inst, DEFAULT_PATH_LIMIT)? == valid_item_patterns(b, &inst, DEFAULT_PATH_LIMIT)?;
            sink.line(format!("patterns_equal={equal}"));
        }
        _ => sink.line("patterns_equal=unknown"),
    }
    Ok(code)
}

/// Parses `-1`, `0.25`, `3/4` and similar into an exact rational.
pub fn parse_rational(s: &str) -> Option<BigRational> {
    if let Some((n, d)) = s.split_once('/') {
        let d = BigInt::from_str(d).ok()?;
        if d.is_zero() {
            return None;
        }
        return Some(BigRational::new(BigInt::from_str(n).ok()?, d));
    }
    let (neg, body) = match s.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, s.strip_prefix('+').unwrap_or(s)),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if (int.is_empty() && frac.is_empty()) || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) {
        return None;
    }
    let digits = format!("{int}{frac}");
    let numer = BigInt::from_str(if digits.is_empty() { "0" } else { &digits }).ok()?;
    let denom = num_traits::pow(BigInt::from(10), frac.len());
    let r = BigRational::new(numer, denom);
    Some(if neg { -r } else { r })
}

/// Reads one `i value` line per item type; `#` starts a comment.
pub fn parse_duals(text: &str, items: usize) -> Result<Vec<BigRational>, String> {
    let mut duals: Vec<Option<BigRational>> = vec![None; items];
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |m: String| format!("duals line {}: {m}", n + 1);
        let tokens: Vec<&str> = line.split_whitespace().collect();
        let [i, value] = tokens.as_slice() else {
            return Err(at("expected `i value`".into()));
        };
        let i: usize = i.parse().map_err(|_| at(format!("bad item index `{i}`")))?;
        if i == 0 || i > items {
            return Err(at(format!("item {i} out of range 1..={items}")));
        }
        let value = parse_rational(value).ok_or_else(|| at(format!("bad number `{value}`")))?;
        if duals[i - 1].replace(value).is_some() {
            return Err(at(format!("item {i} given twice")));
        }
    }
    duals
        .into_iter()
        .enumerate()
        .map(|(k, d)| d.ok_or_else(|| format!("no dual for item {}", k + 1)))
        .collect()
}

fn cmd_price(a: &PriceArgs, sink: &mut Sink) -> Result<u8, Failure> {
    let inst = load_instance(&a.input.instance, a.input.instance_format, sink)?;
    let duals = parse_duals(&read_text(&a.duals)?, inst.num_items()).map_err(Failure::Input)?;
    let (r, p) = price_pattern(&inst, &duals);
    sink.line(format!("reduced_cost={}", format_rational(&r)));
    match p {
        Some(p) => sink.line(pattern_line(&p, 1)),
        None => sink.line("pattern=none"),
    }
    Ok(EXIT_OK)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn rationals() {
        assert_eq!(parse_rational("3"), Some(q(3, 1)));
        assert_eq!(parse_rational("-0.25"), Some(q(-1, 4)));
        assert_eq!(parse_rational("+.5"), Some(q(1, 2)));
        assert_eq!(parse_rational("2/6"), Some(q(1, 3)));
        assert_eq!(parse_rational("1e3"), None);
        assert_eq!(parse_rational("1/0"), None);
        assert_eq!(parse_rational("-"), None);
        assert_eq!(format_rational(&q(-3, 1)), "-3");
        assert_eq!(format_rational(&q(1, -3)), "-1/3");
    }

    #[test]
    fn duals_files() {
        assert_eq!(parse_duals("1 1\n# c\n2 -0.5\n", 2).unwrap(), vec![q(1, 1), q(-1, 2)]);
        assert!(parse_duals("1 1\n", 2).unwrap_err().contains("no dual for item 2"));
        assert!(parse_duals("1 1\n1 2\n", 1).unwrap_err().contains("twice"));
        assert!(parse_duals("3 1\n", 2).is_err());
        assert!(parse_duals("1 x\n", 1).is_err());
    }

    #[test]
    fn numbers() {
        assert_eq!(format_number(2.0000000001), "2");
        assert_eq!(format_number(2.5), "2.500000");
    }
}
