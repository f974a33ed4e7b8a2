//! Graph composition of span programs.
//!
//! A [`CompositionGraph`] places a span program on every edge of a network
//! with terminals `s` and `t`. The composed program accepts `x` exactly when
//! `s` and `t` are joined by edges whose programs accept `x`. Its witness
//! sizes are effective resistances: the positive size uses `r_e = w+(x, P_e)`
//! on accepting edges, and the negative size is the reciprocal resistance
//! with conductance `w-(x, P_e)` on rejecting edges.
//!
//! Programs are represented lazily by [`Program`], a shared tree of trivial,
//! dense, scaled, negated and graph nodes. Evaluating a witness size walks the
//! tree once per input and never builds a matrix; [`Program::materialize`]
//! builds the explicit span program when it is small enough.
//!
//! ```
//! use spanflow::graphcomp::{or_compose, and_compose, Program};
//! use spanflow::spanprog::Predicate;
//!
//! let bits: Vec<Program> = (0..2).map(|i| Program::trivial(Predicate::bit(i))).collect();
//! let or2 = Program::graph(or_compose(&bits)).unwrap();
//! let and2 = Program::graph(and_compose(&bits)).unwrap();
//! let e = or2.evaluate(b"11").unwrap();
//! assert!(e.positive && (e.size - 0.5).abs() < 1e-12);
//! let e = and2.evaluate(b"11").unwrap();
//! assert!(e.positive && (e.size - 2.0).abs() < 1e-12);
//! let e = or2.evaluate(b"00").unwrap();
//! assert!(!e.positive && (e.size - 2.0).abs() < 1e-12);
//! ```

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::netlab::{self, Resistance, ResistorNetwork, UnionFind};
use crate::spanprog::{InputSpaces, Predicate, Sign, SpanProgram};

/// Outcome of evaluating a program on one input.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub positive: bool,
    /// Positive or negative witness size, matching `positive`.
    pub size: f64,
}

impl Evaluation {
    pub fn sign(&self) -> Sign {
        if self.positive {
            Sign::Positive
        } else {
            Sign::Negative
        }
    }

    /// Positive witness size, `inf` on negative inputs.
    pub fn w_plus(&self) -> f64 {
        if self.positive {
            self.size
        } else {
            f64::INFINITY
        }
    }

    /// Negative witness size, `inf` on positive inputs.
    pub fn w_minus(&self) -> f64 {
        if self.positive {
            f64::INFINITY
        } else {
            self.size
        }
    }
}

enum Node {
    Dense(SpanProgram),
    Trivial(Predicate),
    Scaled(f64, Program),
    Negated(Program),
    Graph(CompositionGraph),
}

/// A lazily evaluated span program. Cloning shares the underlying node.
#[derive(Clone)]
pub struct Program(Arc<Node>);

impl fmt::Debug for Program {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Dense(p) => write!(f, "Dense(dim={})", p.dim()),
            Node::Trivial(p) => write!(f, "Trivial({p:?})"),
            Node::Scaled(a, p) => write!(f, "{a}*{p:?}"),
            Node::Negated(p) => write!(f, "not({p:?})"),
            Node::Graph(g) => write!(f, "Graph(|V|={}, |E|={})", g.vertex_count(), g.edge_count()),
        }
    }
}

/// The structural kind of a program node.
#[derive(Clone, Debug)]
pub enum ProgramKind<'a> {
    Dense(&'a SpanProgram),
    Trivial(&'a Predicate),
    Scaled(f64, &'a Program),
    Negated(&'a Program),
    Graph(&'a CompositionGraph),
}

type Memo = HashMap<usize, Evaluation>;

impl Program {
    /// Wraps an explicit span program.
    pub fn dense(p: SpanProgram) -> Program {
        Program(Arc::new(Node::Dense(p)))
    }

    /// The trivial program of a predicate (both witness sizes 1).
    pub fn trivial(p: Predicate) -> Program {
        Program(Arc::new(Node::Trivial(p)))
    }

    /// Constant program.
    pub fn constant(b: bool) -> Program {
        Program::trivial(Predicate::Const(b))
    }

    /// The `alpha`-scalar multiple. Panics unless `alpha` is positive and finite.
    pub fn scaled(&self, alpha: f64) -> Program {
        assert!(alpha > 0.0 && alpha.is_finite(), "scale factor must be positive, got {alpha}");
        if alpha == 1.0 {
            return self.clone();
        }
        match &*self.0 {
            Node::Scaled(b, inner) => inner.scaled(alpha * b),
            _ => Program(Arc::new(Node::Scaled(alpha, self.clone()))),
        }
    }

    /// The negated program. Double negation returns the original node and
    /// negated trivial programs are trivial programs of the complement.
    pub fn negated(&self) -> Program {
        match &*self.0 {
            Node::Negated(inner) => inner.clone(),
            Node::Trivial(p) => Program::trivial(p.not()),
            Node::Scaled(a, inner) => inner.negated().scaled(1.0 / a),
            _ => Program(Arc::new(Node::Negated(self.clone()))),
        }
    }

    /// The graph composition of `g`, after checking its invariants.
    pub fn graph(g: CompositionGraph) -> Result<Program> {
        g.validate()?;
        Ok(Program(Arc::new(Node::Graph(g))))
    }

    pub fn kind(&self) -> ProgramKind<'_> {
        match &*self.0 {
            Node::Dense(p) => ProgramKind::Dense(p),
            Node::Trivial(p) => ProgramKind::Trivial(p),
            Node::Scaled(a, p) => ProgramKind::Scaled(*a, p),
            Node::Negated(p) => ProgramKind::Negated(p),
            Node::Graph(g) => ProgramKind::Graph(g),
        }
    }

    /// The composition graph when this is a graph node.
    pub fn as_graph(&self) -> Option<&CompositionGraph> {
        match &*self.0 {
            Node::Graph(g) => Some(g),
            _ => None,
        }
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Address of the shared node, stable while any handle is alive.
    pub fn node_id(&self) -> usize {
        self.key()
    }

    /// True when both handles share one node.
    pub fn ptr_eq(&self, other: &Program) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }

    /// Sign and witness size on `x`, computed through effective resistances.
    pub fn evaluate(&self, x: &[u8]) -> Result<Evaluation> {
        self.eval_memo(x, &mut HashMap::new())
    }

    fn eval_memo(&self, x: &[u8], memo: &mut Memo) -> Result<Evaluation> {
        if let Some(e) = memo.get(&self.key()) {
            return Ok(*e);
        }
        let e = match &*self.0 {
            Node::Trivial(p) => Evaluation { positive: p.eval(x), size: 1.0 },
            Node::Dense(p) => {
                let w = p.witness(x)?;
                Evaluation { positive: w.sign == Sign::Positive, size: w.size }
            }
            Node::Scaled(a, p) => {
                let e = p.eval_memo(x, memo)?;
                Evaluation { positive: e.positive, size: if e.positive { e.size * a } else { e.size / a } }
            }
            Node::Negated(p) => {
                let e = p.eval_memo(x, memo)?;
                Evaluation { positive: !e.positive, size: e.size }
            }
            Node::Graph(g) => {
                let edges = g.edges.iter().map(|e| e.program.eval_memo(x, memo)).collect::<Result<Vec<_>>>()?;
                g.combine(&edges)
            }
        };
        memo.insert(self.key(), e);
        Ok(e)
    }

    /// Sign only, without computing witness sizes of graph nodes.
    pub fn accepts(&self, x: &[u8]) -> Result<bool> {
        self.accepts_memo(x, &mut HashMap::new())
    }

    fn accepts_memo(&self, x: &[u8], memo: &mut HashMap<usize, bool>) -> Result<bool> {
        if let Some(b) = memo.get(&self.key()) {
            return Ok(*b);
        }
        let b = match &*self.0 {
            Node::Trivial(p) => p.eval(x),
            Node::Dense(p) => p.classify(x)?,
            Node::Scaled(_, p) => p.accepts_memo(x, memo)?,
            Node::Negated(p) => !p.accepts_memo(x, memo)?,
            Node::Graph(g) => {
                let on = g.edges.iter().map(|e| e.program.accepts_memo(x, memo)).collect::<Result<Vec<_>>>()?;
                g.connects(&on)
            }
        };
        memo.insert(self.key(), b);
        Ok(b)
    }

    /// `||w0||^2` of the (possibly unmaterialized) program.
    pub fn w0_norm_squared(&self) -> f64 {
        self.w0_memo(&mut HashMap::new())
    }

    fn w0_memo(&self, memo: &mut HashMap<usize, f64>) -> f64 {
        if let Some(v) = memo.get(&self.key()) {
            return *v;
        }
        let v = match &*self.0 {
            Node::Trivial(_) => 1.0,
            Node::Dense(p) => p.w0().norm_squared(),
            Node::Scaled(a, p) => a * p.w0_memo(memo),
            Node::Negated(p) => 1.0 / p.w0_memo(memo),
            Node::Graph(g) => {
                let r: Vec<(usize, usize, Resistance)> =
                    g.edges.iter().map(|e| (e.tail, e.head, Resistance::Finite(e.program.w0_memo(memo)))).collect();
                netlab::two_terminal_resistance(g.vertex_count(), &r, g.s, g.t).value()
            }
        };
        memo.insert(self.key(), v);
        v
    }

    /// Dimension of the materialized state space, saturating on overflow.
    pub fn dim(&self) -> usize {
        self.dim_memo(&mut HashMap::new())
    }

    fn dim_memo(&self, memo: &mut HashMap<usize, usize>) -> usize {
        if let Some(v) = memo.get(&self.key()) {
            return *v;
        }
        let v = match &*self.0 {
            Node::Trivial(_) => 1,
            Node::Dense(p) => p.dim(),
            Node::Scaled(_, p) | Node::Negated(p) => p.dim_memo(memo),
            Node::Graph(g) => g.edges.iter().fold(0usize, |acc, e| acc.saturating_add(e.program.dim_memo(memo))),
        };
        memo.insert(self.key(), v);
        v
    }

    /// Builds the explicit span program, refusing dimensions above `max_dim`.
    pub fn materialize(&self, max_dim: usize) -> Result<SpanProgram> {
        let dim = self.dim();
        if dim > max_dim {
            return Err(Error::TooLarge { dim, cap: max_dim });
        }
        self.materialize_memo(&mut HashMap::new())
    }

    fn materialize_memo(&self, memo: &mut HashMap<usize, SpanProgram>) -> Result<SpanProgram> {
        if let Some(p) = memo.get(&self.key()) {
            return Ok(p.clone());
        }
        let p = match &*self.0 {
            Node::Trivial(p) => SpanProgram::trivial(p.clone()),
            Node::Dense(p) => p.clone(),
            Node::Scaled(a, p) => p.materialize_memo(memo)?.scale(*a)?,
            Node::Negated(p) => p.materialize_memo(memo)?.negate(),
            Node::Graph(g) => {
                let parts = g.edges.iter().map(|e| e.program.materialize_memo(memo)).collect::<Result<Vec<_>>>()?;
                compose_parts(g, parts)?.program
            }
        };
        memo.insert(self.key(), p.clone());
        Ok(p)
    }

    /// `(W+, W-)` over a list of inputs.
    pub fn complexity<'a>(&self, inputs: impl IntoIterator<Item = &'a [u8]>) -> Result<crate::spanprog::Complexity> {
        let mut c = crate::spanprog::Complexity::default();
        for x in inputs {
            let e = self.evaluate(x)?;
            c.record(e.sign(), e.size);
        }
        Ok(c)
    }
}

/// An edge of a composition graph.
#[derive(Clone, Debug)]
pub struct CompEdge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub program: Program,
}

/// A network whose edges carry span programs, with source `s` and sink `t`.
///
/// Edge resistances are not set independently: the resistance of an edge is
/// `||w0||^2` of its program, so an edge is made heavier by scaling its program.
#[derive(Clone, Debug)]
pub struct CompositionGraph {
    vertex_names: Vec<String>,
    edges: Vec<CompEdge>,
    s: usize,
    t: usize,
}

impl CompositionGraph {
    /// An edgeless graph on `n` vertices named `v0..`.
    pub fn new(n: usize, s: usize, t: usize) -> CompositionGraph {
        Self::with_names((0..n).map(|i| format!("v{i}")).collect(), s, t)
    }

    pub fn with_names(vertex_names: Vec<String>, s: usize, t: usize) -> CompositionGraph {
        CompositionGraph { vertex_names, edges: Vec::new(), s, t }
    }

    /// Adds a vertex and returns its index.
    pub fn add_vertex(&mut self) -> usize {
        self.vertex_names.push(format!("v{}", self.vertex_names.len()));
        self.vertex_names.len() - 1
    }

    /// Adds an edge with id `e{index}` and returns its index.
    pub fn add_edge(&mut self, tail: usize, head: usize, program: Program) -> usize {
        let id = format!("e{}", self.edges.len());
        self.add_named_edge(id, tail, head, program)
    }

    pub fn add_named_edge(&mut self, id: impl Into<String>, tail: usize, head: usize, program: Program) -> usize {
        assert!(tail < self.vertex_names.len() && head < self.vertex_names.len(), "edge endpoint out of range");
        self.edges.push(CompEdge { id: id.into(), tail, head, program });
        self.edges.len() - 1
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_names.len()
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.vertex_names
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edges(&self) -> &[CompEdge] {
        &self.edges
    }

    pub fn source(&self) -> usize {
        self.s
    }

    pub fn sink(&self) -> usize {
        self.t
    }

    /// Checks terminals and that `s` and `t` are connected.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertex_count();
        if self.s >= n || self.t >= n {
            return invalid("terminal is not a vertex");
        }
        if self.s == self.t {
            return invalid("source equals sink");
        }
        let mut uf = UnionFind::new(n);
        for e in &self.edges {
            uf.union(e.tail, e.head);
        }
        if uf.find(self.s) != uf.find(self.t) {
            return Err(Error::Disconnected);
        }
        Ok(())
    }

    /// The underlying network with `r_e = ||w0^e||^2` and terminals set.
    pub fn network(&self) -> ResistorNetwork {
        let mut memo = HashMap::new();
        let mut net = ResistorNetwork::with_names(self.vertex_names.clone());
        for e in &self.edges {
            net.add_named_edge(e.id.clone(), e.tail, e.head, Resistance::Finite(e.program.w0_memo(&mut memo)));
        }
        net.set_terminals(self.s, self.t);
        net
    }

    fn connects(&self, on: &[bool]) -> bool {
        let mut uf = UnionFind::new(self.vertex_count());
        for (e, &b) in self.edges.iter().zip(on) {
            if b {
                uf.union(e.tail, e.head);
            }
        }
        uf.find(self.s) == uf.find(self.t)
    }

    /// Combines per-edge evaluations by the resistance formulas.
    fn combine(&self, parts: &[Evaluation]) -> Evaluation {
        let on: Vec<bool> = parts.iter().map(|e| e.positive).collect();
        let n = self.vertex_count();
        if self.connects(&on) {
            let r: Vec<(usize, usize, Resistance)> = self
                .edges
                .iter()
                .zip(parts)
                .map(|(e, ev)| (e.tail, e.head, if ev.positive { Resistance::Finite(ev.size) } else { Resistance::Infinite }))
                .collect();
            Evaluation { positive: true, size: netlab::two_terminal_resistance(n, &r, self.s, self.t).value() }
        } else {
            let r: Vec<(usize, usize, Resistance)> = self
                .edges
                .iter()
                .zip(parts)
                .map(|(e, ev)| (e.tail, e.head, Resistance::Finite(if ev.positive { 0.0 } else { 1.0 / ev.size })))
                .collect();
            let rr = netlab::two_terminal_resistance(n, &r, self.s, self.t).value();
            Evaluation { positive: false, size: 1.0 / rr }
        }
    }

    /// Inlines every nested graph edge, including scaled ones, recursively.
    /// Negated graph edges are kept as single edges.
    pub fn flatten(&self) -> CompositionGraph {
        let mut out = CompositionGraph::with_names(self.vertex_names.clone(), self.s, self.t);
        for e in &self.edges {
            inline_edge(&mut out, e.tail, e.head, &e.program, 1.0, &e.id);
        }
        out
    }
}

fn inline_edge(out: &mut CompositionGraph, u: usize, v: usize, p: &Program, alpha: f64, id: &str) {
    match &*p.0 {
        Node::Scaled(a, inner) if inner.as_graph().is_some() => inline_edge(out, u, v, inner, alpha * a, id),
        Node::Graph(g) => {
            let map: Vec<usize> = (0..g.vertex_count())
                .map(|w| {
                    if w == g.s {
                        u
                    } else if w == g.t {
                        v
                    } else {
                        out.add_vertex()
                    }
                })
                .collect();
            for e in &g.edges {
                let sub = format!("{id}/{}", e.id);
                inline_edge(out, map[e.tail], map[e.head], &e.program, alpha, &sub);
            }
        }
        _ => {
            out.add_named_edge(id.to_string(), u, v, if alpha == 1.0 { p.clone() } else { p.scaled(alpha) });
        }
    }
}

/// Explicit composed program together with the pieces of its construction.
#[derive(Clone, Debug)]
pub struct Composed {
    pub program: SpanProgram,
    /// Materialized edge programs in edge order.
    pub parts: Vec<SpanProgram>,
    /// Offset of each edge block in the composed state space.
    pub offsets: Vec<usize>,
    /// The isometry `|e> -> w0^e / ||w0^e||`, `dim x |E|`.
    pub embedding: DMatrix<f64>,
    /// Network with `r_e = ||w0^e||^2`.
    pub network: ResistorNetwork,
    /// Orthonormal circulation basis of `network`, `|E| x c`.
    pub circulations: DMatrix<f64>,
}

/// The explicit graph composition: `K = ⊕K^e ⊕ ℰ(C)` and `w0 = ℰ(f_min)`.
pub fn compose(cg: &CompositionGraph, max_dim: usize) -> Result<Composed> {
    cg.validate()?;
    let dim = cg.edges.iter().fold(0usize, |a, e| a.saturating_add(e.program.dim()));
    if dim > max_dim {
        return Err(Error::TooLarge { dim, cap: max_dim });
    }
    let mut memo = HashMap::new();
    let parts = cg.edges.iter().map(|e| e.program.materialize_memo(&mut memo)).collect::<Result<Vec<_>>>()?;
    compose_parts(cg, parts)
}

fn compose_parts(cg: &CompositionGraph, parts: Vec<SpanProgram>) -> Result<Composed> {
    cg.validate()?;
    let m = parts.len();
    let mut offsets = Vec::with_capacity(m);
    let mut dim = 0;
    for p in &parts {
        offsets.push(dim);
        dim += p.dim();
    }
    let mut net = ResistorNetwork::with_names(cg.vertex_names.clone());
    let mut embedding = DMatrix::zeros(dim, m);
    for (j, (e, p)) in cg.edges.iter().zip(&parts).enumerate() {
        let w = p.w0();
        let nrm = w.norm();
        net.add_named_edge(e.id.clone(), e.tail, e.head, Resistance::Finite(nrm * nrm));
        embedding.view_mut((offsets[j], j), (p.dim(), 1)).copy_from(&(w / nrm));
    }
    net.set_terminals(cg.s, cg.t);
    let circulations = netlab::circulation_matrix(&net);
    let flow = netlab::min_energy_unit_flow(&net, cg.s, cg.t)?.flow.ok_or(Error::Disconnected)?;
    let w0 = &embedding * &flow.coeffs;
    let k_blocks: Vec<DMatrix<f64>> = parts.iter().map(|p| p.k_basis().clone()).collect();
    let k_edges = pad_block_diag(&k_blocks, &parts);
    let k_circ = if circulations.ncols() > 0 { &embedding * &circulations } else { DMatrix::zeros(dim, 0) };
    let k_basis = linalg::hstack(dim, &[&k_edges, &k_circ]);
    let shared: Arc<Vec<SpanProgram>> = Arc::new(parts.clone());
    let offs = offsets.clone();
    let h = InputSpaces::Lazy(Arc::new(move |x: &[u8]| {
        let gens = shared.iter().map(|p| p.h_generators(x)).collect::<Result<Vec<_>>>()?;
        let cols: usize = gens.iter().map(|g| g.ncols()).sum();
        let mut out = DMatrix::zeros(dim, cols);
        let mut c = 0;
        for (g, &o) in gens.iter().zip(offs.iter()) {
            if g.ncols() > 0 {
                out.view_mut((o, c), g.shape()).copy_from(g);
                c += g.ncols();
            }
        }
        Ok(out)
    }));
    let program = SpanProgram::from_parts(dim, w0, k_basis, h)?;
    Ok(Composed { program, parts, offsets, embedding, network: net, circulations })
}

fn pad_block_diag(blocks: &[DMatrix<f64>], parts: &[SpanProgram]) -> DMatrix<f64> {
    let fixed: Vec<DMatrix<f64>> =
        blocks.iter().zip(parts).map(|(b, p)| if b.ncols() == 0 { DMatrix::zeros(p.dim(), 0) } else { b.clone() }).collect();
    linalg::block_diag(&fixed)
}

/// Both witness sizes of the composition on `x` through effective
/// resistances; the infeasible one is `inf`.
pub fn witness_sizes_via_resistance(cg: &CompositionGraph, x: &[u8]) -> Result<(f64, f64)> {
    cg.validate()?;
    let mut memo = HashMap::new();
    let parts = cg.edges.iter().map(|e| e.program.eval_memo(x, &mut memo)).collect::<Result<Vec<_>>>()?;
    let e = cg.combine(&parts);
    Ok((e.w_plus(), e.w_minus()))
}

/// Series composition `s - v1 - ... - t` (the AND of the programs).
pub fn and_compose(programs: &[Program]) -> CompositionGraph {
    assert!(!programs.is_empty(), "AND of an empty list");
    let n = programs.len();
    let mut g = CompositionGraph::new(n + 1, 0, n);
    for (i, p) in programs.iter().enumerate() {
        g.add_edge(i, i + 1, p.clone());
    }
    g
}

/// Parallel composition between two vertices (the OR of the programs).
pub fn or_compose(programs: &[Program]) -> CompositionGraph {
    assert!(!programs.is_empty(), "OR of an empty list");
    let mut g = CompositionGraph::new(2, 0, 1);
    for p in programs {
        g.add_edge(0, 1, p.clone());
    }
    g
}

/// OR of `P_j / W+(P_j)`, which keeps `W+ <= 1` and `W- <= Σ C(P_j)^2`.
pub fn variable_time_or(programs: &[(Program, f64)]) -> Result<CompositionGraph> {
    let mut scaled = Vec::with_capacity(programs.len());
    for (p, wp) in programs {
        if !(*wp > 0.0) || !wp.is_finite() {
            return Err(Error::Range(format!("W+ must be finite and positive, got {wp}")));
        }
        scaled.push(p.scaled(1.0 / wp));
    }
    Ok(or_compose(&scaled))
}

/// Certificate accepted by [`path_cut_bound`].
#[derive(Clone, Debug)]
pub enum Certificate {
    /// Edge indices forming an `s`-`t` path of accepting edges, in order.
    Path(Vec<usize>),
    /// Edge indices of rejecting edges whose removal separates `s` from `t`.
    Cut(Vec<usize>),
}

/// Upper bound on the witness size from a path or cut certificate.
pub fn path_cut_bound(cg: &CompositionGraph, x: &[u8], cert: &Certificate) -> Result<f64> {
    let mut memo = HashMap::new();
    match cert {
        Certificate::Path(path) => {
            let mut at = cg.s;
            let mut total = 0.0;
            for &j in path {
                let e = cg.edges.get(j).ok_or_else(|| Error::Certificate(format!("edge {j} does not exist")))?;
                at = if e.tail == at {
                    e.head
                } else if e.head == at {
                    e.tail
                } else {
                    return Err(Error::Certificate(format!("edge {} does not continue the path", e.id)));
                };
                let ev = e.program.eval_memo(x, &mut memo)?;
                if !ev.positive {
                    return Err(Error::Certificate(format!("edge {} rejects the input", e.id)));
                }
                total += ev.size;
            }
            if at != cg.t {
                return Err(Error::Certificate("path does not end at t".into()));
            }
            Ok(total)
        }
        Certificate::Cut(cut) => {
            let mut removed = vec![false; cg.edge_count()];
            let mut total = 0.0;
            for &j in cut {
                let e = cg.edges.get(j).ok_or_else(|| Error::Certificate(format!("edge {j} does not exist")))?;
                let ev = e.program.eval_memo(x, &mut memo)?;
                if ev.positive {
                    return Err(Error::Certificate(format!("edge {} accepts the input", e.id)));
                }
                if !removed[j] {
                    removed[j] = true;
                    total += ev.size;
                }
            }
            let keep: Vec<bool> = removed.iter().map(|r| !r).collect();
            if cg.connects(&keep) {
                return Err(Error::Certificate("edges do not separate s from t".into()));
            }
            Ok(total)
        }
    }
}

/// An st-connectivity instance: each edge is switched on by one input symbol.
#[derive(Clone, Debug)]
pub struct StConnInstance {
    /// Network with finite positive resistances and terminals set.
    pub net: ResistorNetwork,
    /// Queried input index per edge.
    pub j: Vec<usize>,
    /// Expected bit per edge: the edge is present when `x_j == b`.
    pub b: Vec<bool>,
}

impl StConnInstance {
    pub fn validate(&self) -> Result<()> {
        self.net.validate()?;
        if !self.net.is_normalized() {
            return invalid("instance resistances must be finite and positive");
        }
        if self.j.len() != self.net.edge_count() || self.b.len() != self.net.edge_count() {
            return invalid("j and b must have one entry per edge");
        }
        if self.net.source().is_none() || self.net.sink().is_none() {
            return invalid("instance needs terminals");
        }
        Ok(())
    }

    fn present(&self, x: &[u8]) -> Vec<bool> {
        self.j.iter().zip(&self.b).map(|(&j, &b)| (crate::spanprog::symbol_at(x, j) == b'1') == b).collect()
    }

    /// Witness size computed on the network itself: resistance of the present
    /// subgraph, or the reciprocal resistance with present edges contracted.
    pub fn witness_size(&self, x: &[u8]) -> Result<Evaluation> {
        let (s, t) = (self.net.source().unwrap(), self.net.sink().unwrap());
        let on = self.present(x);
        let pos: Vec<Resistance> = self.net.edges().iter().zip(&on).map(|(e, &o)| if o { e.r } else { Resistance::Infinite }).collect();
        let rp = netlab::effective_resistance(&self.net.with_resistances(&pos), s, t)?;
        if !rp.is_infinite() {
            return Ok(Evaluation { positive: true, size: rp.value() });
        }
        let neg: Vec<Resistance> =
            self.net.edges().iter().zip(&on).map(|(e, &o)| if o { Resistance::Finite(0.0) } else { e.r }).collect();
        let g = netlab::inverse_resistance_via_potentials(&self.net.with_resistances(&neg), s, t)?;
        Ok(Evaluation { positive: false, size: g.value() })
    }
}

/// Edge `e` carries `r_e` times the trivial program of `[x_j = b]`.
pub fn from_st_instance(inst: &StConnInstance) -> Result<CompositionGraph> {
    inst.validate()?;
    let net = &inst.net;
    let mut g = CompositionGraph::with_names(net.vertex_names().to_vec(), net.source().unwrap(), net.sink().unwrap());
    for (k, e) in net.edges().iter().enumerate() {
        let pred = if inst.b[k] { Predicate::bit(inst.j[k]) } else { Predicate::not_bit(inst.j[k]) };
        g.add_named_edge(e.id.clone(), e.tail, e.head, Program::trivial(pred).scaled(e.r.value()));
    }
    Ok(g)
}

/// Result of [`planar_dual_negation_check`].
#[derive(Clone, Debug)]
pub struct DualReport {
    /// Operator-norm distance between the two projectors onto `K`.
    pub k_distance: f64,
    /// Distance between the two initial vectors.
    pub w0_distance: f64,
    /// Largest relative witness-size difference over the test inputs.
    pub witness_distance: f64,
    /// Inputs on which the two programs disagree in sign.
    pub sign_mismatches: usize,
}

impl DualReport {
    pub fn holds(&self, tol: f64) -> bool {
        self.k_distance <= tol && self.w0_distance <= tol && self.witness_distance <= tol && self.sign_mismatches == 0
    }
}

/// Compares `negate(compose(cg))` with `compose(dual)`, where `pairing[e]` is
/// the dual edge of `e` and dual edge programs are the negated originals.
pub fn planar_dual_negation_check(
    cg: &CompositionGraph,
    dual: &CompositionGraph,
    pairing: &[usize],
    inputs: &[Vec<u8>],
    max_dim: usize,
) -> Result<DualReport> {
    let m = cg.edge_count();
    if pairing.len() != m || dual.edge_count() != m {
        return invalid("pairing must match both edge sets");
    }
    let mut seen = vec![false; m];
    for &d in pairing {
        if d >= m || std::mem::replace(&mut seen[d], true) {
            return invalid("pairing is not a bijection");
        }
    }
    let primal_net = cg.network();
    let dual_net = dual.network();
    for (e, &d) in pairing.iter().enumerate() {
        let prod = primal_net.edges()[e].r.value() * dual_net.edges()[d].r.value();
        if (prod - 1.0).abs() > 1e-9 {
            return invalid(format!("dual resistance of edge {} is not reciprocal", cg.edges[e].id));
        }
    }
    let neg = compose(cg, max_dim)?.program.negate();
    let du = compose(dual, max_dim)?;
    // Reorder the dual state space so block e† sits where block e does.
    let dim = neg.dim();
    let mut perm = vec![0usize; dim];
    let mut at = 0;
    for &d in pairing {
        let size = du.parts[d].dim();
        for i in 0..size {
            perm[at + i] = du.offsets[d] + i;
        }
        at += size;
    }
    if at != dim {
        return invalid("dual edge programs have different dimensions");
    }
    let permute_rows = |m: &DMatrix<f64>| DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(perm[r], c)]);
    let dk = permute_rows(du.program.k_basis());
    let dw0 = DVector::from_fn(dim, |r, _| du.program.w0()[perm[r]]);
    let k_distance = linalg::op_norm(&(linalg::projector(neg.k_basis()) - linalg::projector(&dk)));
    let w0_distance = (neg.w0() - &dw0).norm();
    let mut witness_distance: f64 = 0.0;
    let mut sign_mismatches = 0;
    for x in inputs {
        let a = neg.witness(x)?;
        let b = du.program.witness(x)?;
        if a.sign != b.sign {
            sign_mismatches += 1;
        } else {
            witness_distance = witness_distance.max(linalg::rel_diff(a.size, b.size));
        }
    }
    Ok(DualReport { k_distance, w0_distance, witness_distance, sign_mismatches })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanprog::binary_inputs;

    fn bits(n: usize) -> Vec<Program> {
        (0..n).map(|i| Program::trivial(Predicate::bit(i))).collect()
    }

    #[test]
    fn single_edge_is_identity() {
        let p = Program::trivial(Predicate::bit(0)).scaled(3.0);
        let g = Program::graph(and_compose(std::slice::from_ref(&p))).unwrap();
        for x in binary_inputs(1) {
            assert_eq!(p.evaluate(&x).unwrap(), g.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn and_or_formulas() {
        let and3 = Program::graph(and_compose(&bits(3))).unwrap();
        assert!((and3.evaluate(b"111").unwrap().size - 3.0).abs() < 1e-12);
        let or4 = Program::graph(or_compose(&bits(4))).unwrap();
        assert!((or4.evaluate(b"1100").unwrap().size - 0.5).abs() < 1e-12);
        let e = or4.evaluate(b"0000").unwrap();
        assert!(!e.positive && (e.size - 4.0).abs() < 1e-12);
    }

    #[test]
    fn dense_and_lazy_agree_on_or2() {
        let g = or_compose(&bits(2));
        let dense = compose(&g, 64).unwrap().program;
        let lazy = Program::graph(g).unwrap();
        for x in binary_inputs(2) {
            let a = dense.witness(&x).unwrap();
            let b = lazy.evaluate(&x).unwrap();
            assert_eq!(a.sign == Sign::Positive, b.positive);
            assert!(linalg::rel_diff(a.size, b.size) < 1e-9);
        }
    }

    #[test]
    fn path_and_cut_certificates() {
        let g = and_compose(&bits(2));
        assert!((path_cut_bound(&g, b"11", &Certificate::Path(vec![0, 1])).unwrap() - 2.0).abs() < 1e-12);
        assert!(path_cut_bound(&g, b"10", &Certificate::Path(vec![0, 1])).is_err());
        let o = or_compose(&bits(3));
        assert!((path_cut_bound(&o, b"000", &Certificate::Cut(vec![0, 1, 2])).unwrap() - 3.0).abs() < 1e-12);
        assert!(path_cut_bound(&o, b"000", &Certificate::Cut(vec![0, 1])).is_err());
    }

    #[test]
    fn disconnected_graph_is_rejected() {
        let mut g = CompositionGraph::new(3, 0, 2);
        g.add_edge(0, 1, Program::constant(true));
        assert!(matches!(Program::graph(g), Err(Error::Disconnected)));
    }

    #[test]
    fn series_pair_dual_is_parallel_pair() {
        let p = bits(2);
        let series = and_compose(&p);
        let dual = or_compose(&p.iter().map(|q| q.negated()).collect::<Vec<_>>());
        let r = planar_dual_negation_check(&series, &dual, &[0, 1], &binary_inputs(2), 64).unwrap();
        assert!(r.holds(1e-9), "{r:?}");
    }

    #[test]
    fn flatten_inlines_nested_graphs() {
        let inner = Program::graph(and_compose(&bits(2))).unwrap();
        let outer = or_compose(&[inner.scaled(2.0), Program::trivial(Predicate::bit(2))]);
        let flat = outer.flatten();
        assert_eq!(flat.edge_count(), 3);
        assert_eq!(flat.vertex_count(), 3);
        let a = Program::graph(outer).unwrap();
        let b = Program::graph(flat).unwrap();
        for x in binary_inputs(3) {
            let (ea, eb) = (a.evaluate(&x).unwrap(), b.evaluate(&x).unwrap());
            assert_eq!(ea.positive, eb.positive);
            assert!(linalg::rel_diff(ea.size, eb.size) < 1e-12);
        }
    }
}
