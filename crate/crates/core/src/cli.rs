//! The `spanflow` command line.
//!
//! Every command prints a schema-versioned [`Report`] as JSON or as a plain
//! table. Exit codes: 0 when all checked properties hold, 1 when one fails,
//! 2 on malformed input.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};

use crate::catalog::{self, ProblemSpec};
use crate::decomp;
use crate::error::{Error, Result};
use crate::frameworks;
use crate::graphcomp::{compose, CompositionGraph, Program};
use crate::io::{read_json, CompositionFile, ConvertSpec, NetworkFile, Report};
use crate::linalg;
use crate::netlab::{self, Resistance};
use crate::quantsim::{self, SimConfig};
use crate::spanprog::{binary_inputs, Sign};
use crate::verify::{self, Suite, VerifyConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Output {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "spanflow", version, about = "Span programs, graph composition and electrical networks")]
pub struct Cli {
    /// Relative tolerance for numerical checks, in (0, 1e-3].
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tolerance: f64,
    /// Seed for randomized suites.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Largest state-space dimension that will be materialized.
    #[arg(long, global = true, default_value_t = 4096)]
    pub max_dim: usize,
    /// Largest number of rounds a simulation may run.
    #[arg(long = "max-k", global = true, default_value_t = 4096)]
    pub max_k: usize,
    #[arg(long, global = true, value_enum, default_value_t = Output::Json)]
    pub output: Output,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Effective resistance, minimum-energy flow and circulation dimension of a network.
    Resistance {
        network: PathBuf,
        /// Source vertex name, overriding the file.
        #[arg(long)]
        s: Option<String>,
        /// Sink vertex name, overriding the file.
        #[arg(long)]
        t: Option<String>,
    },
    /// Witness size of a composition on one input, by resistance and by direct solve.
    Witness { composition: PathBuf, input: String },
    /// Materializes a composition and reports the composed program.
    Compose { composition: PathBuf },
    /// Tree-parallel decomposition of a network's circulation space.
    Decompose { network: PathBuf },
    /// Exact simulation of the span program algorithm on one input.
    Simulate {
        composition: PathBuf,
        input: String,
        /// Witness bounds `W+,W-`.
        #[arg(long, value_parser = parse_bounds)]
        bounds: Option<(f64, f64)>,
        /// Compute the bounds over all binary inputs of this length instead.
        #[arg(long)]
        bits: Option<usize>,
    },
    /// Converts a classical model into a composition.
    Convert {
        spec: PathBuf,
        /// Also write the composition file here.
        #[arg(long)]
        emit: Option<PathBuf>,
    },
    /// Builds a catalog construction and checks it against its oracle.
    Catalog {
        /// A problem file, or the problem JSON itself.
        spec: String,
        /// Random inputs to use when the exhaustive domain exceeds 2^14 strings.
        #[arg(long, default_value_t = 2000)]
        samples: usize,
    },
    /// Runs a property suite.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Network fixtures with expected resistances for the netlab suite.
        #[arg(long)]
        fixture: Vec<PathBuf>,
        /// Random cases per property.
        #[arg(long, default_value_t = 20)]
        cases: usize,
    },
}

fn parse_bounds(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected W+,W-")?;
    let a: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let b: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(a > 0.0 && b > 0.0 && a.is_finite() && b.is_finite()) {
        return Err("bounds must be positive and finite".into());
    }
    Ok((a, b))
}

/// What a command produced: its report payload and whether its checks held.
struct Outcome {
    command: &'static str,
    ok: bool,
    data: Value,
}

fn outcome(command: &'static str, ok: bool, data: impl Serialize) -> Result<Outcome> {
    Ok(Outcome { command, ok, data: serde_json::to_value(data)? })
}

fn resistance_value(r: Resistance) -> Value {
    match r {
        Resistance::Finite(v) => json!(v),
        Resistance::Infinite => json!("inf"),
    }
}

fn load_composition(path: &Path) -> Result<CompositionGraph> {
    read_json::<CompositionFile>(path)?.to_graph()
}

fn cmd_resistance(path: &Path, s: Option<String>, t: Option<String>) -> Result<Outcome> {
    let file: NetworkFile = read_json(path)?;
    let net = file.to_network()?;
    let find = |name: Option<String>, fallback: Option<usize>, which: &str| -> Result<usize> {
        match name {
            Some(n) => net.vertex_index(&n).ok_or_else(|| Error::Invalid(format!("unknown vertex {n:?}"))),
            None => fallback.ok_or_else(|| Error::Invalid(format!("no {which} terminal given"))),
        }
    };
    let (s, t) = (find(s, net.source(), "source")?, find(t, net.sink(), "sink")?);
    let r = netlab::effective_resistance(&net, s, t)?;
    let flow = netlab::min_energy_unit_flow(&net, s, t)?;
    let flow_values: Option<Vec<f64>> = flow.flow.map(|f| f.flow_values(&net).iter().copied().collect());
    let circ = netlab::circulation_basis(&net).len();
    outcome(
        "resistance",
        true,
        json!({
            "s": net.vertex_names()[s], "t": net.vertex_names()[t],
            "resistance": resistance_value(r),
            "flow": flow_values,
            "circulation_dimension": circ,
        }),
    )
}

fn cmd_witness(cli: &Cli, path: &Path, input: &str) -> Result<Outcome> {
    let g = load_composition(path)?;
    let x = input.as_bytes();
    let lazy = Program::graph(g.clone())?.evaluate(x)?;
    let direct = compose(&g, cli.max_dim).and_then(|c| c.program.witness(x));
    let (direct_size, discrepancy, ok) = match &direct {
        Ok(w) => {
            let d = linalg::rel_diff(lazy.size, w.size);
            let same_sign = (w.sign == Sign::Positive) == lazy.positive;
            (Some(w.size), Some(d), same_sign && d <= 1e-6_f64.max(cli.tolerance))
        }
        Err(Error::TooLarge { .. }) => (None, None, true),
        Err(e) => return Err(Error::Invalid(e.to_string())),
    };
    outcome(
        "witness",
        ok,
        json!({
            "input": input,
            "positive": lazy.positive,
            "w_plus": if lazy.positive { Some(lazy.size) } else { None },
            "w_minus": if lazy.positive { None } else { Some(lazy.size) },
            "resistance_size": lazy.size,
            "direct_size": direct_size,
            "discrepancy": discrepancy,
        }),
    )
}

fn cmd_compose(cli: &Cli, path: &Path) -> Result<Outcome> {
    let g = load_composition(path)?;
    let c = compose(&g, cli.max_dim)?;
    outcome(
        "compose",
        true,
        json!({
            "vertices": g.vertex_count(),
            "edges": g.edge_count(),
            "dimension": c.program.dim(),
            "w0_norm_squared": c.program.w0().norm_squared(),
            "k_dimension": c.program.k_basis().ncols(),
            "circulation_dimension": c.circulations.ncols(),
            "edge_dimensions": c.parts.iter().map(|p| p.dim()).collect::<Vec<_>>(),
        }),
    )
}

fn cmd_decompose(cli: &Cli, path: &Path) -> Result<Outcome> {
    let net = read_json::<NetworkFile>(path)?.to_network()?;
    let tree = decomp::auto_decompose(&net)?;
    let violations = decomp::validate_decomposition(&net, &tree);
    let (_, proj) = decomp::reflection_from_decomposition(&net, &tree)?;
    let err = linalg::op_norm(&(proj - decomp::circulation_projector_direct(&net)));
    let cost = decomp::decomposition_cost(&tree);
    let ok = violations.is_empty() && err <= cli.tolerance.max(1e-9);
    outcome(
        "decompose",
        ok,
        json!({
            "depth": cost.depth,
            "branching": cost.branching,
            "k": cost.k.to_string(),
            "qrom_bits": cost.qrom_bits.to_string(),
            "gates": cost.gates,
            "projector_error": err,
            "violations": violations.iter().map(|v| format!("{}: {}", v.node, v.condition)).collect::<Vec<_>>(),
        }),
    )
}

fn cmd_simulate(cli: &Cli, path: &Path, input: &str, bounds: Option<(f64, f64)>, bits: Option<usize>) -> Result<Outcome> {
    let g = load_composition(path)?;
    let p = Program::graph(g.clone())?;
    let x = input.as_bytes();
    let (w_plus, w_minus) = match (bounds, bits) {
        (Some(b), _) => b,
        (None, Some(n)) => {
            let c = p.complexity(binary_inputs(n).iter().map(|x| x.as_slice()))?;
            (c.w_plus.max(f64::MIN_POSITIVE), c.w_minus.max(f64::MIN_POSITIVE))
        }
        (None, None) => return Err(Error::Invalid("give --bounds W+,W- or --bits n".into())),
    };
    let e = p.evaluate(x)?;
    let undersized = if e.positive { e.size > w_plus * (1.0 + 1e-12) } else { e.size > w_minus * (1.0 + 1e-12) };
    let cfg = SimConfig { max_k: cli.max_k, max_dim: cli.max_dim };
    let r = quantsim::run_algorithm1(&g, w_plus, w_minus, x, &cfg)?;
    let ok = r.success_probability >= 2.0 / 3.0;
    outcome(
        "simulate",
        ok,
        json!({
            "input": input,
            "w_plus_bound": w_plus,
            "w_minus_bound": w_minus,
            "k": r.iterations,
            "p_one": r.p_one,
            "success_probability": r.success_probability,
            "verdict": r.p_one > 0.5,
            "positive": r.positive,
            "undersized_bounds": undersized,
        }),
    )
}

fn cmd_convert(cli: &Cli, path: &Path, emit: Option<PathBuf>) -> Result<Outcome> {
    let spec: ConvertSpec = read_json(path)?;
    let (g, inputs, f, bound): (CompositionGraph, Vec<Vec<u8>>, Box<dyn Fn(&[u8]) -> bool>, Value) = match &spec {
        ConvertSpec::Tree { tree } => {
            tree.validate()?;
            let n = max_query(tree) + 1;
            let inputs = binary_inputs(n);
            let wdt = frameworks::wdt_value(tree, &inputs);
            let t = tree.clone();
            (frameworks::tree_to_st(tree)?, inputs, Box::new(move |x| t.eval(x) == frameworks::Label::One), json!({"wdt": wdt}))
        }
        ConvertSpec::ZeroErrorFamily { n, family } => {
            let fam = family.clone();
            let f = move |x: &[u8]| fam.label_probabilities(x)[1] > 0.0;
            let inputs = binary_inputs(*n);
            (frameworks::zero_error_family_to_st(family, &inputs, &f)?, inputs, Box::new(f), Value::Null)
        }
        ConvertSpec::RandomizedFamily { n, family } => {
            let fam = family.clone();
            let f = move |x: &[u8]| fam.label_probabilities(x)[1] >= 0.5;
            let inputs = binary_inputs(*n);
            let conv = frameworks::randomized_to_st(family, &inputs, &f)?;
            let info = json!({"copies": conv.copies, "total": conv.total, "approximation_error": conv.approximation_error});
            (conv.graph, inputs, Box::new(f), info)
        }
        ConvertSpec::Formula { n, formula, leaves } => {
            let progs = leaves.iter().map(|l| l.to_program()).collect::<Result<Vec<_>>>()?;
            let inputs = binary_inputs(*n);
            let g = frameworks::formula_to_composition(formula, &progs, &inputs)?;
            let (phi, ps) = (formula.clone(), progs.clone());
            let f = move |x: &[u8]| phi.eval(&|j| ps[j].accepts(x).unwrap_or(false));
            (g, inputs, Box::new(f), Value::Null)
        }
        ConvertSpec::LearningGraph { graph } => {
            let lg = graph.clone();
            let f = move |x: &[u8]| lg.flows.contains_key(&String::from_utf8_lossy(x).into_owned());
            let inputs = binary_inputs(graph.n);
            (frameworks::learning_graph_to_st(graph, &inputs, &f)?, inputs, Box::new(f), Value::Null)
        }
    };
    let p = Program::graph(g.clone())?;
    let mut disagreements = 0;
    for x in &inputs {
        if p.accepts(x)? != f(x) {
            disagreements += 1;
        }
    }
    let c = p.complexity(inputs.iter().map(|x| x.as_slice()))?;
    let file = CompositionFile::from_graph(&g)?;
    if let Some(out) = emit {
        std::fs::write(out, serde_json::to_string_pretty(&file)?)?;
    }
    let _ = cli;
    outcome(
        "convert",
        disagreements == 0,
        json!({
            "vertices": g.vertex_count(),
            "edges": g.edge_count(),
            "w_plus": c.w_plus,
            "w_minus": c.w_minus,
            "complexity": c.c(),
            "disagreements": disagreements,
            "inputs": inputs.len(),
            "source_measure": bound,
        }),
    )
}

fn max_query(t: &frameworks::DecisionTree) -> usize {
    match t {
        frameworks::DecisionTree::Leaf { .. } => 0,
        frameworks::DecisionTree::Query { query, c0, c1, .. } => (*query).max(max_query(c0)).max(max_query(c1)),
    }
}

fn cmd_catalog(cli: &Cli, spec: &str, samples: usize) -> Result<Outcome> {
    let text = if Path::new(spec).exists() { std::fs::read_to_string(spec)? } else { spec.to_string() };
    let spec: ProblemSpec = serde_json::from_str(&text)?;
    let g = spec.build()?;
    let p = Program::graph(g.clone())?;
    let alphabet = spec.alphabet();
    let exhaustive = (alphabet.len() as f64).powi(spec.len() as i32) <= 16384.0;
    let domain: Vec<Vec<u8>> = if exhaustive {
        catalog::all_strings(&alphabet, spec.len())
    } else {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cli.seed);
        (0..samples).map(|_| (0..spec.len()).map(|_| alphabet[rng.gen_range(0..alphabet.len())]).collect()).collect()
    };
    let mut rows = Vec::new();
    let (mut disagreements, mut w_plus, mut w_minus) = (0, 0.0f64, 0.0f64);
    for x in domain.iter().filter(|x| spec.in_domain(x)) {
        let e = p.evaluate(x)?;
        let want = spec.oracle(x);
        if e.positive != want {
            disagreements += 1;
        }
        if e.positive {
            w_plus = w_plus.max(e.size);
        } else {
            w_minus = w_minus.max(e.size);
        }
        if rows.len() < 64 {
            rows.push(json!({"input": String::from_utf8_lossy(x), "positive": e.positive, "size": e.size, "oracle": want}));
        }
    }
    outcome(
        "catalog",
        disagreements == 0,
        json!({
            "spec": spec,
            "vertices": g.vertex_count(),
            "edges": g.edge_count(),
            "flattened_edges": g.flatten().edge_count(),
            "exhaustive": exhaustive,
            "inputs_checked": domain.iter().filter(|x| spec.in_domain(x)).count(),
            "disagreements": disagreements,
            "w_plus": w_plus,
            "w_minus": w_minus,
            "witness_table": rows,
        }),
    )
}

fn cmd_verify(cli: &Cli, suite: Suite, fixtures: Vec<PathBuf>, cases: usize) -> Result<Outcome> {
    let cfg = VerifyConfig { tolerance: cli.tolerance, seed: cli.seed, max_dim: cli.max_dim, cases, fixtures };
    let checks = verify::run_suite(suite, &cfg)?;
    let failures: Vec<String> = checks.iter().filter(|c| !c.ok).map(|c| format!("{}: {}", c.suite, c.name)).collect();
    outcome("verify", failures.is_empty(), json!({"checks": checks, "failures": failures}))
}

fn dispatch(cli: &Cli) -> Result<Outcome> {
    if !(cli.tolerance > 0.0 && cli.tolerance <= 1e-3) {
        return Err(Error::Range(format!("tolerance {} must be in (0, 1e-3]", cli.tolerance)));
    }
    if cli.max_dim < 2 {
        return Err(Error::Range("max-dim must be at least 2".into()));
    }
    match &cli.command {
        Command::Resistance { network, s, t } => cmd_resistance(network, s.clone(), t.clone()),
        Command::Witness { composition, input } => cmd_witness(cli, composition, input),
        Command::Compose { composition } => cmd_compose(cli, composition),
        Command::Decompose { network } => cmd_decompose(cli, network),
        Command::Simulate { composition, input, bounds, bits } => cmd_simulate(cli, composition, input, *bounds, *bits),
        Command::Convert { spec, emit } => cmd_convert(cli, spec, emit.clone()),
        Command::Catalog { spec, samples } => cmd_catalog(cli, spec, *samples),
        Command::Verify { suite, fixture, cases } => cmd_verify(cli, *suite, fixture.clone(), *cases),
    }
}

/// Renders a JSON value as indented `key: value` lines.
pub fn render_table(v: &Value) -> String {
    fn go(v: &Value, indent: usize, out: &mut String) {
        let pad = "  ".repeat(indent);
        match v {
            Value::Object(m) => {
                for (k, x) in m {
                    match x {
                        Value::Object(_) | Value::Array(_) if !is_flat(x) => {
                            out.push_str(&format!("{pad}{k}:\n"));
                            go(x, indent + 1, out);
                        }
                        _ => out.push_str(&format!("{pad}{k}: {}\n", scalar(x))),
                    }
                }
            }
            Value::Array(items) => {
                for x in items {
                    match x {
                        Value::Object(m) if m.values().all(|y| !matches!(y, Value::Object(_) | Value::Array(_))) => {
                            let cells: Vec<String> = m.iter().map(|(k, y)| format!("{k}={}", scalar(y))).collect();
                            out.push_str(&format!("{pad}- {}\n", cells.join("  ")));
                        }
                        _ => {
                            out.push_str(&format!("{pad}-\n"));
                            go(x, indent + 1, out);
                        }
                    }
                }
            }
            _ => out.push_str(&format!("{pad}{}\n", scalar(v))),
        }
    }
    fn is_flat(v: &Value) -> bool {
        match v {
            Value::Array(a) => a.iter().all(|x| !matches!(x, Value::Object(_) | Value::Array(_))),
            _ => false,
        }
    }
    fn scalar(v: &Value) -> String {
        match v {
            Value::String(s) => s.clone(),
            Value::Array(a) => format!("[{}]", a.iter().map(scalar).collect::<Vec<_>>().join(", ")),
            other => other.to_string(),
        }
    }
    let mut out = String::new();
    go(v, 0, &mut out);
    out
}

/// Parses arguments, runs the command, prints the report and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli) {
        Ok(o) => {
            let report = Report::new(o.command, o.ok, o.data);
            let text = match cli.output {
                Output::Json => serde_json::to_string_pretty(&report).expect("reports serialize"),
                Output::Table => render_table(&serde_json::to_value(&report).expect("reports serialize")),
            };
            println!("{text}");
            if report.ok {
                0
            } else {
                1
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bounds_parse() {
        assert_eq!(parse_bounds("1,2.5").unwrap(), (1.0, 2.5));
        assert!(parse_bounds("1").is_err());
        assert!(parse_bounds("0,1").is_err());
    }

    #[test]
    fn bad_tolerance_is_input_error() {
        assert_eq!(run(["spanflow", "--tolerance", "0.5", "verify", "netlab"]), 2);
    }

    #[test]
    fn table_rendering() {
        let t = render_table(&json!({"a": 1, "b": {"c": [1, 2]}, "d": [{"x": 1}]}));
        assert!(t.contains("a: 1") && t.contains("c: [1, 2]") && t.contains("- x=1"));
    }
}
