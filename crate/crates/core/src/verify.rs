//! Seeded property suites behind the `verify` command.
//!
//! Every suite returns one [`Check`] per property, with the worst observed
//! discrepancy, so a failing run names the property that broke.
//!
//! ```
//! use spanflow::verify::{run_suite, Suite, VerifyConfig};
//!
//! let checks = run_suite(Suite::Netlab, &VerifyConfig::default()).unwrap();
//! assert!(checks.iter().all(|c| c.ok));
//! ```

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::catalog::{self, ProblemSpec};
use crate::decomp;
use crate::error::Result;
use crate::frameworks::{self, DecisionTree, Label};
use crate::graphcomp::{compose, CompositionGraph, Program};
use crate::io::{read_json, NetworkFile};
use crate::linalg;
use crate::netlab::{self, Resistance, ResistanceMethod, ResistorNetwork};
use crate::quantsim::{self, SimConfig};
use crate::spanprog::{binary_inputs, Predicate};

/// Names of the property suites.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Netlab,
    Witnesses,
    Decomp,
    Simulate,
    Converters,
    Catalog,
    All,
}

/// Settings shared by all suites.
#[derive(Clone, Debug)]
pub struct VerifyConfig {
    pub tolerance: f64,
    pub seed: u64,
    pub max_dim: usize,
    /// Number of random cases per randomized property.
    pub cases: usize,
    /// Network fixtures with an expected resistance, checked by the netlab suite.
    pub fixtures: Vec<PathBuf>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig { tolerance: 1e-9, seed: 0, max_dim: 4096, cases: 20, fixtures: Vec::new() }
    }
}

/// Outcome of one property.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub suite: String,
    pub name: String,
    pub ok: bool,
    /// Largest discrepancy seen, or the number of failures for exact checks.
    pub worst: f64,
    pub detail: String,
}

/// A network with the resistance it is expected to have between its terminals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkFixture {
    pub network: NetworkFile,
    pub expected_resistance: crate::io::ResistanceValue,
}

struct Collector {
    suite: &'static str,
    checks: Vec<Check>,
}

impl Collector {
    fn tol(&mut self, name: &str, worst: f64, tol: f64) {
        let ok = worst <= tol;
        self.checks.push(Check {
            suite: self.suite.into(),
            name: name.into(),
            ok,
            worst,
            detail: format!("max discrepancy {worst:.3e}, tolerance {tol:.1e}"),
        });
    }

    fn exact(&mut self, name: &str, failures: usize, total: usize) {
        self.checks.push(Check {
            suite: self.suite.into(),
            name: name.into(),
            ok: failures == 0,
            worst: failures as f64,
            detail: format!("{failures} of {total} cases failed"),
        });
    }
}

/// A random connected multigraph with resistances in `[0.5, 3)`.
pub fn random_network(rng: &mut impl Rng, vertices: usize, extra_edges: usize) -> ResistorNetwork {
    let mut net = ResistorNetwork::new(vertices);
    for v in 1..vertices {
        let u = rng.gen_range(0..v);
        net.add_edge(u, v, Resistance::Finite(rng.gen_range(0.5..3.0)));
    }
    for _ in 0..extra_edges {
        let (u, v) = (rng.gen_range(0..vertices), rng.gen_range(0..vertices));
        if u != v {
            net.add_edge(u, v, Resistance::Finite(rng.gen_range(0.5..3.0)));
        }
    }
    net
}

/// A random composition over `bits` input bits with scaled trivial edges.
pub fn random_composition(rng: &mut impl Rng, vertices: usize, edges: usize, bits: usize) -> CompositionGraph {
    let mut g = CompositionGraph::new(vertices, 0, vertices - 1);
    for k in 0..edges {
        let (u, v) = if k < vertices - 1 { (k, k + 1) } else { (rng.gen_range(0..vertices), rng.gen_range(0..vertices)) };
        let i = rng.gen_range(0..bits);
        let pred = if rng.gen_bool(0.5) { Predicate::bit(i) } else { Predicate::not_bit(i) };
        g.add_edge(u, v, Program::trivial(pred).scaled(rng.gen_range(0.25..4.0)));
    }
    g
}

/// A random decision tree on `n` bits with depth at most `depth`.
pub fn random_tree(rng: &mut impl Rng, n: usize, depth: usize) -> DecisionTree {
    fn go(rng: &mut impl Rng, free: &mut Vec<usize>, depth: usize) -> DecisionTree {
        if depth == 0 || free.is_empty() || rng.gen_bool(0.2) {
            return DecisionTree::leaf(if rng.gen_bool(0.5) { Label::One } else { Label::Zero });
        }
        let k = rng.gen_range(0..free.len());
        let q = free.swap_remove(k);
        let (w0, w1) = (rng.gen_range(0.25..4.0), rng.gen_range(0.25..4.0));
        let c0 = go(rng, &mut free.clone(), depth - 1);
        let c1 = go(rng, &mut free.clone(), depth - 1);
        DecisionTree::weighted(q, w0, w1, c0, c1)
    }
    go(rng, &mut (0..n).collect(), depth)
}

fn rel(a: f64, b: f64) -> f64 {
    linalg::rel_diff(a, b)
}

fn netlab_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut c = Collector { suite: "netlab", checks: Vec::new() };
    let mut worst: f64 = 0.0;
    for _ in 0..cfg.cases {
        let v = rng.gen_range(2..8);
        let net = { let extra = rng.gen_range(0..8); random_network(rng, v, extra) };
        let (s, t) = (0, v - 1);
        let a = netlab::effective_resistance_with(&net, s, t, ResistanceMethod::Reduction)?.value();
        for m in [ResistanceMethod::MinNormFlow, ResistanceMethod::LaplacianPinv] {
            worst = worst.max(rel(a, netlab::effective_resistance_with(&net, s, t, m)?.value()));
        }
    }
    c.tol("three resistance solvers agree", worst, 1e-6_f64.max(cfg.tolerance));
    let mut failures = 0;
    for path in &cfg.fixtures {
        let fx: NetworkFixture = read_json(path)?;
        let net = fx.network.to_network()?;
        let (s, t) = (net.source().unwrap_or(0), net.sink().unwrap_or(net.vertex_count() - 1));
        let got = netlab::effective_resistance(&net, s, t)?;
        let want: Resistance = fx.expected_resistance.into();
        let bad = match (got, want) {
            (Resistance::Infinite, Resistance::Infinite) => false,
            (Resistance::Finite(a), Resistance::Finite(b)) => rel(a, b) > 1e-6_f64.max(cfg.tolerance),
            _ => true,
        };
        if bad {
            failures += 1;
            c.checks.push(Check {
                suite: "netlab".into(),
                name: format!("fixture {}", path.display()),
                ok: false,
                worst: f64::NAN,
                detail: format!("expected {want}, computed {got}"),
            });
        }
    }
    c.exact("fixtures match their expected resistance", failures, cfg.fixtures.len());
    Ok(c.checks)
}

fn witnesses_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut c = Collector { suite: "witnesses", checks: Vec::new() };
    let (mut w_comp, mut w_neg, mut w_scale) = (0.0f64, 0.0f64, 0.0f64);
    let mut sign_failures = 0;
    let mut total = 0;
    for _ in 0..cfg.cases {
        let v = rng.gen_range(2..5);
        let g = { let m = rng.gen_range(v - 1..v + 4); random_composition(rng, v, m, 3) };
        let lazy = Program::graph(g.clone())?;
        let dense = compose(&g, cfg.max_dim)?.program;
        let alpha = rng.gen_range(0.25..4.0);
        for x in binary_inputs(3) {
            total += 1;
            let (a, b) = (lazy.evaluate(&x)?, dense.witness(&x)?);
            if a.positive != (b.sign == crate::spanprog::Sign::Positive) {
                sign_failures += 1;
                continue;
            }
            w_comp = w_comp.max(rel(a.size, b.size));
            let n = lazy.negated().evaluate(&x)?;
            w_neg = w_neg.max(rel(n.size, a.size)).max(if n.positive == a.positive { 1.0 } else { 0.0 });
            let s = lazy.scaled(alpha).evaluate(&x)?;
            let want = if a.positive { alpha * a.size } else { a.size / alpha };
            w_scale = w_scale.max(rel(s.size, want));
        }
    }
    c.exact("resistance and direct solve give the same sign", sign_failures, total);
    c.tol("resistance formula equals direct min-norm witness", w_comp, 1e-6);
    c.tol("negation swaps witness sizes", w_neg, 1e-8);
    c.tol("scaling multiplies w+ and divides w-", w_scale, 1e-8);
    Ok(c.checks)
}

fn decomp_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut c = Collector { suite: "decomp", checks: Vec::new() };
    let (mut worst, mut invalid) = (0.0f64, 0);
    for _ in 0..cfg.cases {
        let v = rng.gen_range(2..7);
        let net = { let extra = rng.gen_range(0..7); random_network(rng, v, extra) };
        let tree = decomp::auto_decompose(&net)?;
        if !decomp::validate_decomposition(&net, &tree).is_empty() {
            invalid += 1;
        }
        let (_, proj) = decomp::reflection_from_decomposition(&net, &tree)?;
        worst = worst.max(linalg::op_norm(&(proj - decomp::circulation_projector_direct(&net))));
    }
    c.exact("automatic decompositions are valid", invalid, cfg.cases);
    c.tol("decomposed projector equals direct projector", worst, cfg.tolerance.max(1e-9));
    Ok(c.checks)
}

fn simulate_suite(cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut c = Collector { suite: "simulate", checks: Vec::new() };
    let sim = SimConfig { max_dim: cfg.max_dim, ..SimConfig::default() };
    let bits = |n: usize| (0..n).map(|i| Program::trivial(Predicate::bit(i))).collect::<Vec<_>>();
    let cases = [
        ("OR2", crate::graphcomp::or_compose(&bits(2)), 2),
        ("AND2", crate::graphcomp::and_compose(&bits(2)), 2),
        ("Th3^2", catalog::threshold(3, 2)?, 3),
    ];
    for (name, g, n) in cases {
        let p = Program::graph(g.clone())?;
        let inputs = binary_inputs(n);
        let cx = p.complexity(inputs.iter().map(|x| x.as_slice()))?;
        let mut worst: f64 = 1.0;
        for x in &inputs {
            let r = quantsim::run_algorithm1(&g, cx.w_plus, cx.w_minus, x, &sim)?;
            worst = worst.min(r.success_probability);
        }
        c.checks.push(Check {
            suite: "simulate".into(),
            name: format!("{name} succeeds with probability at least 2/3"),
            ok: worst >= 2.0 / 3.0,
            worst,
            detail: format!("smallest success probability {worst:.6}"),
        });
    }
    Ok(c.checks)
}

fn converters_suite(cfg: &VerifyConfig, rng: &mut ChaCha8Rng) -> Result<Vec<Check>> {
    let mut c = Collector { suite: "converters", checks: Vec::new() };
    let n = 5;
    let inputs = binary_inputs(n);
    let (mut wrong, mut over, mut total) = (0, 0.0f64, 0);
    for _ in 0..cfg.cases {
        let t = random_tree(rng, n, 4);
        let Ok(g) = frameworks::tree_to_st(&t) else { continue };
        let p = Program::graph(g)?;
        for x in &inputs {
            total += 1;
            if p.accepts(x)? != (t.eval(x) == Label::One) {
                wrong += 1;
            }
        }
        let wdt = frameworks::wdt_value(&t, &inputs);
        let cx = p.complexity(inputs.iter().map(|x| x.as_slice()))?;
        if cx.has_positive && cx.has_negative {
            over = over.max(cx.c() - wdt.value);
        }
    }
    c.exact("tree compositions agree with their trees", wrong, total);
    c.tol("C is at most WDT", over.max(0.0), 1e-6);
    let lg = frameworks::parity2_learning_graph();
    let dom = binary_inputs(2);
    let f = |x: &[u8]| x[0] != x[1];
    let g = frameworks::learning_graph_to_st(&lg, &dom, &f)?;
    let p = Program::graph(g)?;
    let mut bad = 0;
    for x in &dom {
        let e = p.evaluate(x)?;
        let bound = if f(x) { lg.ell_plus(x)? } else { lg.ell_minus(x) };
        if e.positive != f(x) || e.size > bound + 1e-9 {
            bad += 1;
        }
    }
    c.exact("parity learning graph meets its witness bounds", bad, dom.len());
    let mut bad = 0;
    for _ in 0..cfg.cases.min(10) {
        let adj: Vec<u8> = (0..16).map(|_| if rng.gen_bool(0.3) { b'1' } else { b'0' }).collect();
        let got = frameworks::savitch_formula(4, &adj, 0, 3)?.reachable;
        if got != reachable(&adj, 4, 0, 3) {
            bad += 1;
        }
    }
    c.exact("reachability formula agrees with search", bad, cfg.cases.min(10));
    Ok(c.checks)
}

/// Breadth-first reachability on a row-major adjacency string.
pub fn reachable(adj: &[u8], n: usize, s: usize, t: usize) -> bool {
    let mut seen = vec![false; n];
    let mut queue = std::collections::VecDeque::from([s]);
    seen[s] = true;
    while let Some(u) = queue.pop_front() {
        for v in 0..n {
            if adj[u * n + v] == b'1' && !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen[t]
}

fn catalog_suite() -> Result<Vec<Check>> {
    let mut c = Collector { suite: "catalog", checks: Vec::new() };
    let specs = [
        ProblemSpec::Threshold { n: 5, k: 3 },
        ProblemSpec::ExactWeight { n: 5, k: 2 },
        ProblemSpec::PatternMatching { n: 8, pattern: "011".into() },
        ProblemSpec::PatternMatching { n: 8, pattern: "0101".into() },
        ProblemSpec::Sigma202 { n: 6 },
        ProblemSpec::Dyck { n: 8, depth: 1 },
        ProblemSpec::Dyck { n: 8, depth: 2 },
        ProblemSpec::Dyck { n: 8, depth: 3 },
        ProblemSpec::IncSubseq3 { n: 5 },
    ];
    for spec in &specs {
        let p = Program::graph(spec.build()?)?;
        let dom = catalog::all_strings(&spec.alphabet(), spec.len());
        let mut bad = 0;
        for x in &dom {
            if p.accepts(x)? != spec.oracle(x) {
                bad += 1;
            }
        }
        c.exact(&format!("{} agrees with its oracle", serde_json::to_string(spec)?), bad, dom.len());
    }
    let mut bad = 0;
    let dom = catalog::all_strings(b"()", 10);
    for x in &dom {
        if catalog::dyck_oracle(x, 3) == catalog::dyck3_conditions(x).iter().any(|&b| b) {
            bad += 1;
        }
    }
    c.exact("depth-3 Dyck characterization", bad, dom.len());
    let (mut bad, mut total) = (0, 0);
    for m in 1..=8 {
        for y in catalog::all_strings(b"01", m) {
            if catalog::is_aperiodic(&y) {
                total += 1;
                if catalog::deterministic_sample(&y).is_err() {
                    bad += 1;
                }
            }
        }
    }
    c.exact("deterministic samples of size log2(m) exist", bad, total);
    Ok(c.checks)
}

/// Runs one suite, or all of them.
pub fn run_suite(suite: Suite, cfg: &VerifyConfig) -> Result<Vec<Check>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    Ok(match suite {
        Suite::Netlab => netlab_suite(cfg, &mut rng)?,
        Suite::Witnesses => witnesses_suite(cfg, &mut rng)?,
        Suite::Decomp => decomp_suite(cfg, &mut rng)?,
        Suite::Simulate => simulate_suite(cfg)?,
        Suite::Converters => converters_suite(cfg, &mut rng)?,
        Suite::Catalog => catalog_suite()?,
        Suite::All => {
            let mut out = Vec::new();
            for s in [Suite::Netlab, Suite::Witnesses, Suite::Decomp, Suite::Simulate, Suite::Converters, Suite::Catalog] {
                out.extend(run_suite(s, cfg)?);
            }
            out
        }
    })
}
