//! `pfnet`: command-line analyzer for layered product-form Petri nets.
//!
//! Every command prints a report, as a short text summary (default) or as a
//! JSON document described by `report.schema.json`. Exit codes: 0 success or
//! positive verdict, 1 negative verdict, 2 input error, 3 precondition
//! violated (for example a non-live initial marking).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use pfnet::bags::{check_pi2, infer_pi3};
use pfnet::ergodicity::{is_ergodic, ErgodicityError};
use pfnet::net::{parse_net, serialize_net, validate_net, Marking, NetFile};
use pfnet::normalizer::{normalizing_constant, steady_prob, NormError};
use pfnet::oracle::{constant_bracketed, enumerate_reachable, gillespie, weight_sum};
use pfnet::qualitative::{gen_independent_set_net, is_bounded, is_reachable, reachset_description, Graph, QualError};
use pfnet::rational::{parse_rational, to_decimal, Q};
use pfnet::stochastic::weight;
use pfnet::Model;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

const SCHEMA_VERSION: &str = "1";

#[derive(Parser, Debug)]
#[command(name = "pfnet", version, about = "Exact analysis of layered product-form Petri nets")]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, global = true, default_value_t = Format::Text)]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Check the structural assumptions and print the layered structure.
    Validate { file: PathBuf },
    /// Decide liveness of the initial marking, layer by layer.
    Live { file: PathBuf },
    /// Decide reachability of a marking, or describe the reachability set.
    Reach {
        file: PathBuf,
        /// Target marking, e.g. `p0=1,q3=2`.
        #[arg(long)]
        marking: Option<String>,
        /// Print the constraints describing the reachability set.
        #[arg(long)]
        describe: bool,
        /// For a non-live initial marking, search markings up to this norm.
        #[arg(long)]
        cutoff: Option<u64>,
    },
    /// Decide boundedness and report a token bound.
    Bounded { file: PathBuf },
    /// Decide ergodicity and list the violating generators.
    Ergodic { file: PathBuf },
    /// Compute the exact normalizing constant.
    Constant {
        file: PathBuf,
        /// Also compute an independent certified bracket of this width.
        #[arg(long, value_name = "EPS")]
        oracle: Option<String>,
    },
    /// Compute the exact steady-state probability of a marking.
    Prob {
        file: PathBuf,
        #[arg(long)]
        marking: String,
    },
    /// Compare a seeded simulation with the analytic steady state.
    Simulate {
        file: PathBuf,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        seed: u64,
        /// Number of markings in the comparison table.
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Emit the independent-set reduction net for a graph file.
    Genhard { graph: PathBuf, k: usize },
}

/// A failed command, mapped onto the exit-code contract.
#[derive(Debug)]
enum Failure {
    Input(String),
    Precondition(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Input(_) => 2,
            Failure::Precondition(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Input(m) | Failure::Precondition(m) => m,
        }
    }
}

/// Result of a successful command: exit code, verdicts, payload and a text
/// summary.
struct Outcome {
    code: u8,
    verdicts: Map<String, Value>,
    result: Map<String, Value>,
    text: Vec<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { code: 0, verdicts: Map::new(), result: Map::new(), text: Vec::new() }
    }

    /// Records a verdict; a negative one sets exit code 1.
    fn verdict(&mut self, name: &str, value: bool) {
        if !value {
            self.code = 1;
        }
        self.verdicts.insert(name.into(), Value::Bool(value));
        self.text.push(format!("{name}: {value}"));
    }

    fn put(&mut self, key: &str, value: Value) {
        self.result.insert(key.into(), value);
    }

    fn line(&mut self, s: impl Into<String>) {
        self.text.push(s.into());
    }
}

fn rational(x: &Q) -> Value {
    json!({ "num": x.numer().to_string(), "den": x.denom().to_string() })
}

fn approx(x: &Q) -> Value {
    Value::String(to_decimal(x, 15))
}

fn read_input(path: &Path) -> Result<(String, String), Failure> {
    let bytes = std::fs::read(path).map_err(|e| Failure::Input(format!("{}: {e}", path.display())))?;
    let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
    let digest = format!("sha256:{hex}");
    let text = String::from_utf8(bytes).map_err(|_| Failure::Input(format!("{}: not UTF-8", path.display())))?;
    Ok((text, digest))
}

fn load_model(text: &str) -> Result<Model, Failure> {
    let file = parse_net(text).map_err(|e| Failure::Input(e.to_string()))?;
    Model::new(&file).map_err(|e| Failure::Input(e.to_string()))
}

fn parse_target(model: &Model, literal: &str) -> Result<Marking, Failure> {
    model.marking(literal).map_err(|e| Failure::Input(e.to_string()))
}

fn require_live(model: &Model) -> Result<(), Failure> {
    if model.is_live() {
        Ok(())
    } else {
        Err(Failure::Precondition("initial marking is not live".into()))
    }
}

fn cmd_validate(text: &str) -> Result<Outcome, Failure> {
    let file = parse_net(text).map_err(|e| Failure::Input(e.to_string()))?;
    let mut out = Outcome::new();
    let violations: Vec<String> = validate_net(&file.net).iter().map(ToString::to_string).collect();
    let pi2 = check_pi2(&file.net);
    let structure = infer_pi3(&file.net, None);
    let model = Model::new(&file);
    out.put("violations", json!(violations));
    out.put("weakly_reversible", json!(pi2.weakly_reversible));
    out.put("bags_without_witness", json!(pi2.bags_without_witness));
    for v in &violations {
        out.line(format!("violation: {v}"));
    }
    match (&structure, &model) {
        (Ok(s), Ok(m)) => {
            out.put("layers", json!(s.layers().iter().map(|l| l.iter().map(|&p| &file.net.places()[p]).collect::<Vec<_>>()).collect::<Vec<_>>()));
            out.put("structure", json!(m.structure.describe(&m.net)));
            out.line(m.structure.describe(&m.net));
        }
        (Err(e), _) => {
            out.put("reason", json!(e.to_string()));
            out.line(format!("rejected: {e}"));
        }
        (_, Err(e)) => {
            out.put("reason", json!(e.to_string()));
            out.line(format!("rejected: {e}"));
        }
    }
    out.verdict("product_form", pi2.is_pi2());
    out.verdict("layered", violations.is_empty() && model.is_ok());
    Ok(out)
}

fn cmd_live(model: &Model) -> Outcome {
    let mut out = Outcome::new();
    let report = model.live_report();
    out.put("per_layer", json!(report.per_layer));
    out.put(
        "violations",
        Value::Array(
            report
                .violations
                .iter()
                .map(|v| json!({ "layer": v.layer, "tokens": v.tokens, "required": v.required }))
                .collect(),
        ),
    );
    for v in &report.violations {
        out.line(format!("layer {}: {} tokens, at least {} required", v.layer, v.tokens, v.required));
    }
    out.verdict("live", report.live);
    out
}

fn cmd_reach(model: &Model, marking: Option<&str>, describe: bool, cutoff: Option<u64>) -> Result<Outcome, Failure> {
    if marking.is_none() && !describe {
        return Err(Failure::Input("reach needs --marking or --describe".into()));
    }
    let target = marking.map(|m| parse_target(model, m)).transpose()?;
    let mut out = Outcome::new();
    if !model.is_live() {
        // The invariant characterization needs a live marking; fall back to
        // an explicit bounded search only when asked to.
        let (Some(cutoff), Some(target), false) = (cutoff, &target, describe) else {
            return Err(Failure::Precondition(
                "initial marking is not live; pass --cutoff to search markings up to a given norm".into(),
            ));
        };
        let r = enumerate_reachable(&model.net, &model.m0, cutoff);
        let found = r.markings.contains(target);
        out.put("method", json!("search"));
        out.put("cutoff", json!(cutoff));
        out.put("explored", json!(r.markings.len()));
        out.put("complete", json!(!r.frontier_truncated));
        out.line(format!("searched {} markings up to norm {cutoff}", r.markings.len()));
        if !found && r.frontier_truncated {
            out.line("not found; the search was cut off, so the answer is only up to the cutoff");
        }
        out.verdict("reachable", found);
        return Ok(out);
    }
    if describe {
        let d = reachset_description(&model.structure, &model.m0).map_err(|e| Failure::Precondition(e.to_string()))?;
        let lines = d.render(&model.net);
        out.put("constraints", json!(lines));
        for l in &lines {
            out.line(l.clone());
        }
    }
    if let Some(t) = &target {
        let r = is_reachable(&model.structure, &model.m0, t).map_err(|e| Failure::Precondition(e.to_string()))?;
        out.put("method", json!("invariants"));
        out.verdict("reachable", r);
    }
    Ok(out)
}

fn cmd_bounded(model: &Model) -> Result<Outcome, Failure> {
    let b = is_bounded(&model.structure, &model.m0).map_err(|e| Failure::Precondition(e.to_string()))?;
    let mut out = Outcome::new();
    out.put("bound", json!(b.bound));
    if let Some(k) = b.bound {
        out.line(format!("at most {k} tokens"));
    }
    out.verdict("bounded", b.bounded);
    Ok(out)
}

fn cmd_ergodic(model: &Model) -> Result<Outcome, Failure> {
    let r = is_ergodic(&model.pf, &model.structure, &model.m0).map_err(|e| match e {
        ErgodicityError::NotLive => Failure::Precondition(e.to_string()),
        ErgodicityError::ClosedNet => Failure::Input(e.to_string()),
    })?;
    let mut out = Outcome::new();
    let violations: Vec<Value> = r
        .violations
        .iter()
        .map(|(g, w)| {
            json!({ "generator": model.net.format_marking(&Marking(g.vector.clone())), "weight": rational(w), "weight_approx": approx(w) })
        })
        .collect();
    for (g, w) in &r.violations {
        out.line(format!("{} has weight {} >= 1", model.net.format_marking(&Marking(g.vector.clone())), to_decimal(w, 6)));
    }
    out.put("violations", Value::Array(violations));
    out.verdict("ergodic", r.ergodic);
    Ok(out)
}

fn norm_failure(e: NormError, out: &mut Outcome) -> Result<(), Failure> {
    match e {
        NormError::NotLive => Err(Failure::Precondition(e.to_string())),
        NormError::NotErgodic(_) => {
            out.line(e.to_string());
            out.verdict("ergodic", false);
            Ok(())
        }
        NormError::Unreachable => {
            out.put("probability", rational(&Q::default()));
            out.put("probability_approx", approx(&Q::default()));
            out.verdict("reachable", false);
            Ok(())
        }
        NormError::MonomialMismatch(..) => Err(Failure::Input(e.to_string())),
    }
}

fn cmd_constant(model: &Model, oracle: Option<&str>) -> Result<Outcome, Failure> {
    let eps = oracle.map(|s| parse_rational(s).map_err(|e| Failure::Input(format!("--oracle: {e}")))).transpose()?;
    let mut out = Outcome::new();
    let z = match normalizing_constant(&model.structure, &model.net, &model.pf, &model.m0) {
        Ok(z) => z,
        Err(e) => {
            norm_failure(e, &mut out)?;
            return Ok(out);
        }
    };
    out.put("constant", rational(&z));
    out.put("constant_approx", approx(&z));
    out.line(format!("constant = {z} (~{})", to_decimal(&z, 15)));
    if let Some(eps) = eps {
        let (lower, upper) = if model.is_open() {
            let b = constant_bracketed(&model.net, &model.structure, &model.pf, &model.m0, &eps)
                .map_err(|e| Failure::Input(format!("oracle: {e}")))?;
            (b.lower, b.upper)
        } else {
            let w = weight_sum(&model.pf, &enumerate_reachable(&model.net, &model.m0, u64::MAX).markings);
            (w.clone(), w)
        };
        out.put(
            "oracle",
            json!({
                "eps": rational(&eps),
                "lower": rational(&lower), "lower_approx": approx(&lower),
                "upper": rational(&upper), "upper_approx": approx(&upper),
            }),
        );
        out.line(format!("oracle bracket [{}, {}]", to_decimal(&lower, 15), to_decimal(&upper, 15)));
        out.verdict("oracle_contains", lower <= z && z <= upper);
    }
    Ok(out)
}

fn cmd_prob(model: &Model, literal: &str) -> Result<Outcome, Failure> {
    let target = parse_target(model, literal)?;
    let mut out = Outcome::new();
    match steady_prob(&model.structure, &model.net, &model.pf, &model.m0, &target) {
        Ok(p) => {
            out.put("probability", rational(&p));
            out.put("probability_approx", approx(&p));
            out.line(format!("probability = {p} (~{})", to_decimal(&p, 15)));
            out.verdict("reachable", true);
        }
        Err(e) => norm_failure(e, &mut out)?,
    }
    Ok(out)
}

fn cmd_simulate(model: &Model, steps: u64, seed: u64, top: usize) -> Result<Outcome, Failure> {
    let mut out = Outcome::new();
    let z = match normalizing_constant(&model.structure, &model.net, &model.pf, &model.m0) {
        Ok(z) => z,
        Err(NormError::NotErgodic(w)) => return Err(Failure::Precondition(format!("not ergodic: {w}"))),
        Err(e) => {
            norm_failure(e, &mut out)?;
            return Ok(out);
        }
    };
    let occupancy =
        gillespie(&model.net, &model.rates, &model.m0, steps, seed).map_err(|e| Failure::Input(e.to_string()))?;
    let mut rows: Vec<(Q, &Marking, f64)> =
        occupancy.iter().map(|(m, &f)| (weight(&model.pf, &m.0) / &z, m, f)).collect();
    rows.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(b.1)));
    rows.truncate(top);
    let mut tv = 0.0;
    let mut table = Vec::new();
    out.line(format!("{:<24} {:>17} {:>17}", "marking", "analytic", "simulated"));
    for (p, m, f) in &rows {
        let a: f64 = to_decimal(p, 17).parse().unwrap_or(f64::NAN);
        tv += (a - f).abs();
        let name = model.net.format_marking(m);
        out.line(format!("{name:<24} {:>17} {f:>17.15}", to_decimal(p, 15)));
        table.push(json!({ "marking": name, "analytic": rational(p), "analytic_approx": approx(p), "simulated_approx": format!("{f:.15e}") }));
    }
    out.put("steps", json!(steps));
    out.put("seed", json!(seed));
    out.put("table", Value::Array(table));
    out.put("total_variation_approx", json!(format!("{:.15e}", tv / 2.0)));
    out.line(format!("total variation over the table: {:.6}", tv / 2.0));
    Ok(out)
}

/// Graph files: the vertex count on the first line, then one edge `a b` per
/// line (0-based). `#` starts a comment.
fn parse_graph(text: &str) -> Result<Graph, Failure> {
    let mut lines = text.lines().map(|l| l.split('#').next().unwrap_or("").trim()).filter(|l| !l.is_empty());
    let n = lines
        .next()
        .ok_or_else(|| Failure::Input("empty graph file".into()))?
        .parse()
        .map_err(|_| Failure::Input("first line must be the vertex count".into()))?;
    let mut edges = Vec::new();
    for l in lines {
        let v: Vec<usize> = l
            .split_whitespace()
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|_| Failure::Input(format!("bad edge line `{l}`")))?;
        let [a, b] = v[..] else { return Err(Failure::Input(format!("bad edge line `{l}`"))) };
        edges.push((a, b));
    }
    Ok(Graph { n, edges })
}

fn cmd_genhard(text: &str, k: usize) -> Result<(Outcome, NetFile), Failure> {
    let graph = parse_graph(text)?;
    let file = gen_independent_set_net(&graph, k).map_err(|e: QualError| Failure::Input(e.to_string()))?;
    let mut out = Outcome::new();
    out.put("net", json!(serialize_net(&file)));
    out.put("has_independent_set", json!(graph.has_independent_set(k)));
    Ok((out, file))
}

fn execute(cmd: &Command) -> Result<(Outcome, String), Failure> {
    let path = match cmd {
        Command::Validate { file }
        | Command::Live { file }
        | Command::Reach { file, .. }
        | Command::Bounded { file }
        | Command::Ergodic { file }
        | Command::Constant { file, .. }
        | Command::Prob { file, .. }
        | Command::Simulate { file, .. } => file,
        Command::Genhard { graph, .. } => graph,
    };
    let (text, digest) = read_input(path)?;
    let out = match cmd {
        Command::Validate { .. } => cmd_validate(&text)?,
        Command::Genhard { k, .. } => cmd_genhard(&text, *k)?.0,
        _ => {
            let model = load_model(&text)?;
            match cmd {
                Command::Live { .. } => cmd_live(&model),
                Command::Reach { marking, describe, cutoff, .. } => {
                    cmd_reach(&model, marking.as_deref(), *describe, *cutoff)?
                }
                Command::Bounded { .. } => cmd_bounded(&model)?,
                Command::Ergodic { .. } => {
                    if !model.is_open() {
                        require_live(&model)?;
                    }
                    cmd_ergodic(&model)?
                }
                Command::Constant { oracle, .. } => cmd_constant(&model, oracle.as_deref())?,
                Command::Prob { marking, .. } => cmd_prob(&model, marking)?,
                Command::Simulate { steps, seed, top, .. } => cmd_simulate(&model, *steps, *seed, *top)?,
                Command::Validate { .. } | Command::Genhard { .. } => unreachable!(),
            }
        }
    };
    Ok((out, digest))
}

fn command_name(cmd: &Command) -> &'static str {
    match cmd {
        Command::Validate { .. } => "validate",
        Command::Live { .. } => "live",
        Command::Reach { .. } => "reach",
        Command::Bounded { .. } => "bounded",
        Command::Ergodic { .. } => "ergodic",
        Command::Constant { .. } => "constant",
        Command::Prob { .. } => "prob",
        Command::Simulate { .. } => "simulate",
        Command::Genhard { .. } => "genhard",
    }
}

/// Runs one command and returns the exit code with the rendered report.
fn run(cli: &Cli, argv: &[String]) -> (u8, String) {
    let start = Instant::now();
    let outcome = execute(&cli.command);
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;
    let (code, digest, verdicts, result, text, error) = match outcome {
        Ok((o, d)) => (o.code, Some(d), o.verdicts, o.result, o.text, None),
        Err(f) => (f.code(), None, Map::new(), Map::new(), Vec::new(), Some(f.message().to_string())),
    };
    let rendered = match cli.format {
        Format::Json => {
            let report = json!({
                "schema_version": SCHEMA_VERSION,
                "command": command_name(&cli.command),
                "argv": argv,
                "input_digest": digest,
                "exit_code": code,
                "verdicts": verdicts,
                "result": result,
                "error": error,
                "timing": { "elapsed_ms_approx": format!("{elapsed_ms:.3}") },
            });
            serde_json::to_string_pretty(&report).expect("reports serialize")
        }
        Format::Text => match (&cli.command, &error) {
            (_, Some(e)) => format!("error: {e}"),
            (Command::Genhard { .. }, None) => result["net"].as_str().unwrap_or_default().trim_end().to_string(),
            _ => text.join("\n"),
        },
    };
    (code, rendered)
}

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (code, rendered) = run(&cli, &argv);
    if code >= 2 && cli.format == Format::Text {
        eprintln!("{rendered}");
    } else {
        println!("{rendered}");
    }
    ExitCode::from(code)
}
