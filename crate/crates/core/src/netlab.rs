//! Electrical networks: circulation spaces, potential flows, minimum-energy
//! unit flows and effective resistances on resistor multigraphs.
//!
//! Every edge has a fixed orientation `tail -> head`. The signed incidence
//! matrix `B` has `B[tail, e] = +1` and `B[head, e] = -1`, and a flow `f` is
//! represented by its *flow state* with coefficients `f_e * sqrt(r_e)`. In
//! that basis the circulations are the null space of `B * diag(1/sqrt(r))`,
//! and the potential states are its orthogonal complement.
//!
//! ```
//! use spanflow::netlab::{ResistorNetwork, Resistance, effective_resistance};
//!
//! // A Wheatstone bridge with unit resistors: the bridge carries no current.
//! let mut net = ResistorNetwork::new(4);
//! let (s, a, t, b) = (0, 1, 2, 3);
//! for (u, v) in [(s, a), (a, t), (s, b), (b, t), (a, b)] {
//!     net.add_edge(u, v, Resistance::Finite(1.0));
//! }
//! let r = effective_resistance(&net, s, t).unwrap();
//! assert!((r.value() - 1.0).abs() < 1e-12);
//! ```

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Result};
use crate::linalg;

/// A resistance in `[0, inf]`. Infinity is a distinct value, never a large float.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Resistance {
    Finite(f64),
    Infinite,
}

impl Resistance {
    /// The finite value, or `f64::INFINITY` for display and comparisons.
    pub fn value(self) -> f64 {
        match self {
            Resistance::Finite(r) => r,
            Resistance::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Resistance::Infinite)
    }

    /// `1/r` with `1/0 = inf` and `1/inf = 0`.
    pub fn reciprocal(self) -> Resistance {
        match self {
            Resistance::Infinite => Resistance::Finite(0.0),
            Resistance::Finite(0.0) => Resistance::Infinite,
            Resistance::Finite(r) => Resistance::Finite(1.0 / r),
        }
    }

    /// Builds a resistance from a float, mapping `f64::INFINITY` to `Infinite`.
    pub fn from_f64(r: f64) -> Resistance {
        if r.is_infinite() {
            Resistance::Infinite
        } else {
            Resistance::Finite(r)
        }
    }
}

impl fmt::Display for Resistance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resistance::Finite(r) => write!(f, "{r}"),
            Resistance::Infinite => write!(f, "inf"),
        }
    }
}

/// An oriented edge of a resistor network.
#[derive(Clone, Debug, PartialEq)]
pub struct Edge {
    pub id: String,
    pub tail: usize,
    pub head: usize,
    pub r: Resistance,
}

/// An undirected multigraph with oriented edges, resistances and optional terminals.
#[derive(Clone, Debug, PartialEq)]
pub struct ResistorNetwork {
    vertices: Vec<String>,
    edges: Vec<Edge>,
    s: Option<usize>,
    t: Option<usize>,
}

impl ResistorNetwork {
    /// A network with `n` vertices named `v0..v{n-1}` and no edges.
    pub fn new(n: usize) -> Self {
        Self::with_names((0..n).map(|i| format!("v{i}")).collect())
    }

    /// A network with the given vertex names and no edges.
    pub fn with_names(vertices: Vec<String>) -> Self {
        ResistorNetwork { vertices, edges: Vec::new(), s: None, t: None }
    }

    /// Adds an edge with an automatic id `e{index}` and returns its index.
    pub fn add_edge(&mut self, tail: usize, head: usize, r: Resistance) -> usize {
        let id = format!("e{}", self.edges.len());
        self.add_named_edge(id, tail, head, r)
    }

    /// Adds an edge with an explicit id and returns its index.
    pub fn add_named_edge(&mut self, id: impl Into<String>, tail: usize, head: usize, r: Resistance) -> usize {
        assert!(tail < self.vertices.len() && head < self.vertices.len(), "edge endpoint out of range");
        self.edges.push(Edge { id: id.into(), tail, head, r });
        self.edges.len() - 1
    }

    /// Sets the source and sink.
    pub fn set_terminals(&mut self, s: usize, t: usize) {
        self.s = Some(s);
        self.t = Some(t);
    }

    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn vertex_names(&self) -> &[String] {
        &self.vertices
    }

    pub fn vertex_index(&self, name: &str) -> Option<usize> {
        self.vertices.iter().position(|v| v == name)
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn source(&self) -> Option<usize> {
        self.s
    }

    pub fn sink(&self) -> Option<usize> {
        self.t
    }

    /// Replaces every resistance, in edge order.
    pub fn with_resistances(&self, r: &[Resistance]) -> ResistorNetwork {
        assert_eq!(r.len(), self.edges.len());
        let mut out = self.clone();
        for (e, &re) in out.edges.iter_mut().zip(r) {
            e.r = re;
        }
        out
    }

    /// Checks endpoints, terminals, resistance ranges and id uniqueness.
    pub fn validate(&self) -> Result<()> {
        let n = self.vertices.len();
        let mut ids = std::collections::BTreeSet::new();
        for e in &self.edges {
            if e.tail >= n || e.head >= n {
                return invalid(format!("edge {} has an undeclared endpoint", e.id));
            }
            if let Resistance::Finite(r) = e.r {
                if !(r >= 0.0) || !r.is_finite() {
                    return invalid(format!("edge {} has resistance {r}", e.id));
                }
            }
            if !ids.insert(e.id.as_str()) {
                return invalid(format!("duplicate edge id {}", e.id));
            }
        }
        for v in [self.s, self.t].into_iter().flatten() {
            if v >= n {
                return invalid("terminal is not a declared vertex");
            }
        }
        if self.s.is_some() && self.s == self.t {
            return invalid("source equals sink");
        }
        Ok(())
    }

    /// True when every resistance is finite and strictly positive.
    pub fn is_normalized(&self) -> bool {
        self.edges.iter().all(|e| matches!(e.r, Resistance::Finite(r) if r > 0.0))
    }

    /// Signed incidence matrix, `|V| x |E|`. Self-loops give a zero column.
    pub fn incidence(&self) -> DMatrix<f64> {
        let mut b = DMatrix::zeros(self.vertices.len(), self.edges.len());
        for (j, e) in self.edges.iter().enumerate() {
            if e.tail != e.head {
                b[(e.tail, j)] = 1.0;
                b[(e.head, j)] = -1.0;
            }
        }
        b
    }

    /// The map `g -> B diag(1/sqrt(r)) g` whose kernel is the circulation space.
    pub fn weighted_incidence(&self) -> DMatrix<f64> {
        let mut b = self.incidence();
        for (j, e) in self.edges.iter().enumerate() {
            let w = 1.0 / finite(e.r).sqrt();
            b.column_mut(j).scale_mut(w);
        }
        b
    }

    /// Weighted Laplacian `B diag(1/r) B^T`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let n = self.vertices.len();
        let mut l = DMatrix::zeros(n, n);
        for e in &self.edges {
            if e.tail == e.head {
                continue;
            }
            let g = 1.0 / finite(e.r);
            l[(e.tail, e.tail)] += g;
            l[(e.head, e.head)] += g;
            l[(e.tail, e.head)] -= g;
            l[(e.head, e.tail)] -= g;
        }
        l
    }

    /// Number of connected components of the underlying graph.
    pub fn component_count(&self) -> usize {
        let mut uf = UnionFind::new(self.vertices.len());
        for e in &self.edges {
            uf.union(e.tail, e.head);
        }
        (0..self.vertices.len()).filter(|&v| uf.find(v) == v).count()
    }

    /// True when `s` and `t` lie in one component of the underlying graph.
    pub fn connected(&self, s: usize, t: usize) -> bool {
        let mut uf = UnionFind::new(self.vertices.len());
        for e in &self.edges {
            uf.union(e.tail, e.head);
        }
        uf.find(s) == uf.find(t)
    }
}

fn finite(r: Resistance) -> f64 {
    match r {
        Resistance::Finite(r) if r > 0.0 => r,
        _ => panic!("operation requires a normalized network (finite positive resistances)"),
    }
}

/// Flow-state coefficients `f_e * sqrt(r_e)` in edge order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowState {
    pub coeffs: DVector<f64>,
}

impl FlowState {
    pub fn norm_squared(&self) -> f64 {
        self.coeffs.norm_squared()
    }

    /// Recovers the flow values `f_e` from the state on a normalized network.
    pub fn flow_values(&self, net: &ResistorNetwork) -> DVector<f64> {
        DVector::from_fn(self.coeffs.len(), |j, _| {
            match net.edges[j].r {
                Resistance::Finite(r) if r > 0.0 => self.coeffs[j] / r.sqrt(),
                _ => 0.0,
            }
        })
    }
}

/// Vertex potentials `U_v` in vertex order.
#[derive(Clone, Debug, PartialEq)]
pub struct Potential {
    pub values: DVector<f64>,
}

/// A network with all infinite edges deleted and all zero edges contracted.
#[derive(Clone, Debug)]
pub struct NormalizedNetwork {
    pub network: ResistorNetwork,
    /// Original vertex index to representative index in `network`.
    pub vertex_map: Vec<usize>,
    /// Original edge index to its index in `network`, if it survived.
    pub edge_map: Vec<Option<usize>>,
}

/// Result of [`normalize_network`].
#[derive(Clone, Debug)]
pub enum Normalized {
    Network(NormalizedNetwork),
    /// Contraction merged the source into the sink.
    ShortCircuit { vertex_map: Vec<usize> },
}

/// Deletes `r = inf` edges and contracts `r = 0` edges, remapping terminals.
///
/// Merged vertices are named by concatenating the original names.
pub fn normalize_network(net: &ResistorNetwork) -> Result<Normalized> {
    net.validate()?;
    let n = net.vertex_count();
    let mut uf = UnionFind::new(n);
    for e in &net.edges {
        if e.r == Resistance::Finite(0.0) {
            uf.union(e.tail, e.head);
        }
    }
    let mut rep_index = vec![usize::MAX; n];
    let mut names: Vec<String> = Vec::new();
    let mut vertex_map = vec![0; n];
    for v in 0..n {
        let root = uf.find(v);
        if rep_index[root] == usize::MAX {
            rep_index[root] = names.len();
            names.push(String::new());
        }
        vertex_map[v] = rep_index[root];
        names[rep_index[root]].push_str(&net.vertices[v]);
    }
    if let (Some(s), Some(t)) = (net.s, net.t) {
        if vertex_map[s] == vertex_map[t] {
            return Ok(Normalized::ShortCircuit { vertex_map });
        }
    }
    let mut out = ResistorNetwork::with_names(names);
    let mut edge_map = vec![None; net.edge_count()];
    for (j, e) in net.edges.iter().enumerate() {
        if let Resistance::Finite(r) = e.r {
            if r > 0.0 {
                edge_map[j] = Some(out.add_named_edge(e.id.clone(), vertex_map[e.tail], vertex_map[e.head], e.r));
            }
        }
    }
    out.s = net.s.map(|s| vertex_map[s]);
    out.t = net.t.map(|t| vertex_map[t]);
    Ok(Normalized::Network(NormalizedNetwork { network: out, vertex_map, edge_map }))
}

/// Orthonormal basis of the circulation space as the columns of a matrix.
pub fn circulation_matrix(net: &ResistorNetwork) -> DMatrix<f64> {
    if net.edge_count() == 0 {
        return DMatrix::zeros(0, 0);
    }
    linalg::null_space(&net.weighted_incidence())
}

/// Orthonormal basis of the circulation space of a normalized network.
pub fn circulation_basis(net: &ResistorNetwork) -> Vec<FlowState> {
    let c = circulation_matrix(net);
    c.column_iter().map(|col| FlowState { coeffs: col.into_owned() }).collect()
}

/// Minimum-energy unit flow and its energy.
#[derive(Clone, Debug)]
pub struct MinEnergyFlow {
    /// Flow state on the original edges; `None` when `s` and `t` are disconnected.
    pub flow: Option<FlowState>,
    pub energy: Resistance,
}

/// Minimum-energy unit `s`-`t` flow, computed as the minimum-norm solution of
/// `B diag(1/sqrt(r)) c = e_s - e_t`.
///
/// Infinite edges carry nothing and zero edges have zero state coefficient,
/// so the network is normalized internally and the state mapped back.
pub fn min_energy_unit_flow(net: &ResistorNetwork, s: usize, t: usize) -> Result<MinEnergyFlow> {
    let (norm, s2, t2) = match normalize_for(net, s, t)? {
        None => {
            return Ok(MinEnergyFlow {
                flow: Some(FlowState { coeffs: DVector::zeros(net.edge_count()) }),
                energy: Resistance::Finite(0.0),
            })
        }
        Some(x) => x,
    };
    let inner = &norm.network;
    if !inner.connected(s2, t2) {
        return Ok(MinEnergyFlow { flow: None, energy: Resistance::Infinite });
    }
    let a = inner.weighted_incidence();
    let mut rhs = DVector::zeros(inner.vertex_count());
    rhs[s2] = 1.0;
    rhs[t2] = -1.0;
    let c = linalg::min_norm_solve(&a, &rhs);
    let mut coeffs = DVector::zeros(net.edge_count());
    for (j, m) in norm.edge_map.iter().enumerate() {
        if let Some(k) = m {
            coeffs[j] = c[*k];
        }
    }
    let energy = c.norm_squared();
    Ok(MinEnergyFlow { flow: Some(FlowState { coeffs }), energy: Resistance::Finite(energy) })
}

/// Solver used by [`effective_resistance_with`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ResistanceMethod {
    /// Series-parallel reductions followed by a grounded Cholesky solve.
    Reduction,
    /// Energy of the minimum-norm unit flow.
    MinNormFlow,
    /// Quadratic form `(e_s - e_t)^T L^+ (e_s - e_t)` with `L^+` from an eigendecomposition.
    LaplacianPinv,
}

/// Effective resistance between `s` and `t`, `inf` when disconnected.
pub fn effective_resistance(net: &ResistorNetwork, s: usize, t: usize) -> Result<Resistance> {
    effective_resistance_with(net, s, t, ResistanceMethod::Reduction)
}

/// Effective resistance using a chosen solver.
pub fn effective_resistance_with(
    net: &ResistorNetwork,
    s: usize,
    t: usize,
    method: ResistanceMethod,
) -> Result<Resistance> {
    match method {
        ResistanceMethod::MinNormFlow => Ok(min_energy_unit_flow(net, s, t)?.energy),
        ResistanceMethod::Reduction => {
            net.validate()?;
            check_terminals(net, s, t)?;
            let edges: Vec<(usize, usize, Resistance)> = net.edges.iter().map(|e| (e.tail, e.head, e.r)).collect();
            Ok(two_terminal_resistance(net.vertex_count(), &edges, s, t))
        }
        ResistanceMethod::LaplacianPinv => {
            let (norm, s2, t2) = match normalize_for(net, s, t)? {
                None => return Ok(Resistance::Finite(0.0)),
                Some(x) => x,
            };
            let inner = &norm.network;
            if !inner.connected(s2, t2) {
                return Ok(Resistance::Infinite);
            }
            let lp = laplacian_pinv(&inner.laplacian());
            let r = lp[(s2, s2)] + lp[(t2, t2)] - 2.0 * lp[(s2, t2)];
            Ok(Resistance::Finite(r))
        }
    }
}

/// Moore-Penrose pseudoinverse of a symmetric Laplacian via its eigendecomposition.
pub fn laplacian_pinv(l: &DMatrix<f64>) -> DMatrix<f64> {
    let n = l.nrows();
    if n == 0 {
        return DMatrix::zeros(0, 0);
    }
    let eig = SymmetricEigen::new(l.clone());
    let max = eig.eigenvalues.amax();
    let tol = (linalg::RANK_RTOL * max).max(1e-13);
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        let lam = eig.eigenvalues[i];
        if lam > tol {
            let v = eig.eigenvectors.column(i);
            out += (v * v.transpose()) / lam;
        }
    }
    out
}

/// Flow state induced by a potential: coefficient `(U_tail - U_head) / sqrt(r_e)`.
///
/// Infinite edges get 0. Zero edges must have equal endpoint potentials and
/// also get 0.
pub fn potential_flow(net: &ResistorNetwork, u: &Potential) -> Result<FlowState> {
    net.validate()?;
    if u.values.len() != net.vertex_count() {
        return invalid("potential length does not match vertex count");
    }
    let mut coeffs = DVector::zeros(net.edge_count());
    for (j, e) in net.edges.iter().enumerate() {
        let du = u.values[e.tail] - u.values[e.head];
        coeffs[j] = match e.r {
            Resistance::Infinite => 0.0,
            Resistance::Finite(0.0) => {
                if du.abs() > 1e-9 {
                    return invalid(format!("potential differs across zero-resistance edge {}", e.id));
                }
                0.0
            }
            Resistance::Finite(r) => du / r.sqrt(),
        };
    }
    Ok(FlowState { coeffs })
}

/// Minimum of `||f_U||^2` over potentials with `U_s - U_t = 1`, which equals
/// the reciprocal effective resistance. Solved as a Dirichlet problem with
/// `U_s = 1`, `U_t = 0`.
pub fn inverse_resistance_via_potentials(net: &ResistorNetwork, s: usize, t: usize) -> Result<Resistance> {
    let (norm, s2, t2) = match normalize_for(net, s, t)? {
        None => return Ok(Resistance::Infinite),
        Some(x) => x,
    };
    let inner = &norm.network;
    let n = inner.vertex_count();
    let l = inner.laplacian();
    let interior: Vec<usize> = (0..n).filter(|&v| v != s2 && v != t2).collect();
    let mut u = DVector::zeros(n);
    u[s2] = 1.0;
    if !interior.is_empty() {
        let lii = DMatrix::from_fn(interior.len(), interior.len(), |a, b| l[(interior[a], interior[b])]);
        let rhs = DVector::from_fn(interior.len(), |a, _| -l[(interior[a], s2)]);
        let ui = linalg::min_norm_solve(&lii, &rhs);
        for (a, &v) in interior.iter().enumerate() {
            u[v] = ui[a];
        }
    }
    let f = potential_flow(inner, &Potential { values: u })?;
    Ok(Resistance::Finite(f.norm_squared()))
}

fn check_terminals(net: &ResistorNetwork, s: usize, t: usize) -> Result<()> {
    if s >= net.vertex_count() || t >= net.vertex_count() {
        return invalid("terminal is not a declared vertex");
    }
    if s == t {
        return invalid("source equals sink");
    }
    Ok(())
}

/// Normalizes with the given terminals. `None` means a short circuit.
fn normalize_for(net: &ResistorNetwork, s: usize, t: usize) -> Result<Option<(NormalizedNetwork, usize, usize)>> {
    check_terminals(net, s, t)?;
    let mut with_st = net.clone();
    with_st.set_terminals(s, t);
    match normalize_network(&with_st)? {
        Normalized::ShortCircuit { .. } => Ok(None),
        Normalized::Network(n) => {
            let (s2, t2) = (n.vertex_map[s], n.vertex_map[t]);
            Ok(Some((n, s2, t2)))
        }
    }
}

/// Disjoint-set forest with path halving.
#[derive(Clone, Debug)]
pub(crate) struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    pub(crate) fn new(n: usize) -> Self {
        UnionFind { parent: (0..n).collect() }
    }

    pub(crate) fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        self.parent[ra.max(rb)] = ra.min(rb);
        true
    }
}

/// Effective resistance of an edge list by graph surgery.
///
/// Zero edges are contracted and infinite edges dropped. Then dangling
/// vertices are removed, parallel edges merged and degree-two vertices
/// replaced by a series edge, and whatever remains is solved with a grounded
/// Laplacian.
pub(crate) fn two_terminal_resistance(n: usize, edges: &[(usize, usize, Resistance)], s: usize, t: usize) -> Resistance {
    let mut uf = UnionFind::new(n);
    for &(u, v, r) in edges {
        if r == Resistance::Finite(0.0) {
            uf.union(u, v);
        }
    }
    let (s, t) = (uf.find(s), uf.find(t));
    if s == t {
        return Resistance::Finite(0.0);
    }
    let mut adj: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
    for &(u, v, r) in edges {
        if let Resistance::Finite(r) = r {
            if r > 0.0 {
                let (a, b) = (uf.find(u), uf.find(v));
                if a != b {
                    *adj[a].entry(b).or_insert(0.0) += 1.0 / r;
                    *adj[b].entry(a).or_insert(0.0) += 1.0 / r;
                }
            }
        }
    }
    // Keep only the component of s.
    let mut seen = vec![false; n];
    let mut stack = vec![s];
    seen[s] = true;
    while let Some(v) = stack.pop() {
        for &w in adj[v].keys() {
            if !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    if !seen[t] {
        return Resistance::Infinite;
    }
    let mut alive = seen;
    let mut work: Vec<usize> = (0..n).filter(|&v| alive[v]).collect();
    while let Some(v) = work.pop() {
        if !alive[v] || v == s || v == t {
            continue;
        }
        match adj[v].len() {
            0 | 1 => {
                alive[v] = false;
                let nbrs: Vec<usize> = adj[v].keys().copied().collect();
                for u in nbrs {
                    adj[u].remove(&v);
                    work.push(u);
                }
                adj[v].clear();
            }
            2 => {
                let mut it = adj[v].iter();
                let (&a, &ga) = it.next().unwrap();
                let (&b, &gb) = it.next().unwrap();
                alive[v] = false;
                adj[v].clear();
                adj[a].remove(&v);
                adj[b].remove(&v);
                let g = ga * gb / (ga + gb);
                *adj[a].entry(b).or_insert(0.0) += g;
                *adj[b].entry(a).or_insert(0.0) += g;
                work.push(a);
                work.push(b);
            }
            _ => {}
        }
    }
    let rest: Vec<usize> = (0..n).filter(|&v| alive[v] && v != t).collect();
    if rest.len() == 1 {
        return Resistance::Finite(1.0 / adj[s][&t]);
    }
    let mut index = vec![usize::MAX; n];
    for (i, &v) in rest.iter().enumerate() {
        index[v] = i;
    }
    let m = rest.len();
    let mut l = DMatrix::zeros(m, m);
    for &v in &rest {
        let i = index[v];
        for (&w, &g) in &adj[v] {
            l[(i, i)] += g;
            if w != t {
                l[(i, index[w])] -= g;
            }
        }
    }
    let mut rhs = DVector::zeros(m);
    rhs[index[s]] = 1.0;
    let x = match l.clone().cholesky() {
        Some(ch) => ch.solve(&rhs),
        None => l.lu().solve(&rhs).unwrap_or_else(|| DVector::from_element(m, f64::NAN)),
    };
    Resistance::Finite(x[index[s]])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit(n: usize, edges: &[(usize, usize)]) -> ResistorNetwork {
        let mut net = ResistorNetwork::new(n);
        for &(u, v) in edges {
            net.add_edge(u, v, Resistance::Finite(1.0));
        }
        net
    }

    fn all_methods(net: &ResistorNetwork, s: usize, t: usize) -> [f64; 3] {
        [ResistanceMethod::Reduction, ResistanceMethod::MinNormFlow, ResistanceMethod::LaplacianPinv]
            .map(|m| effective_resistance_with(net, s, t, m).unwrap().value())
    }

    #[test]
    fn normalize_deletes_infinite_edges() {
        let mut net = ResistorNetwork::new(3);
        net.add_edge(0, 1, Resistance::Finite(1.0));
        net.add_edge(1, 2, Resistance::Finite(1.0));
        net.add_edge(2, 0, Resistance::Infinite);
        let Normalized::Network(n) = normalize_network(&net).unwrap() else { panic!() };
        assert_eq!(n.network.edge_count(), 2);
        assert_eq!(n.network.vertex_count(), 3);
        assert_eq!(n.edge_map[2], None);
    }

    #[test]
    fn normalize_contracts_zero_edges() {
        let mut net = ResistorNetwork::with_names(vec!["s".into(), "a".into(), "t".into()]);
        net.add_edge(0, 1, Resistance::Finite(0.0));
        net.add_edge(1, 2, Resistance::Finite(1.0));
        net.set_terminals(0, 2);
        let Normalized::Network(n) = normalize_network(&net).unwrap() else { panic!() };
        assert_eq!(n.network.vertex_names(), &["sa".to_string(), "t".to_string()]);
        assert_eq!(n.vertex_map, vec![0, 0, 1]);
        assert_eq!(n.network.edge_count(), 1);
    }

    #[test]
    fn normalize_reports_short_circuit() {
        let mut net = ResistorNetwork::new(2);
        net.add_edge(0, 1, Resistance::Finite(0.0));
        net.set_terminals(0, 1);
        assert!(matches!(normalize_network(&net).unwrap(), Normalized::ShortCircuit { .. }));
    }

    #[test]
    fn circulation_of_tree_is_empty() {
        assert!(circulation_basis(&unit(2, &[(0, 1)])).is_empty());
    }

    #[test]
    fn circulation_of_parallel_pair() {
        let basis = circulation_basis(&unit(2, &[(0, 1), (0, 1)]));
        assert_eq!(basis.len(), 1);
        let c = &basis[0].coeffs;
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((c[0].abs() - h).abs() < 1e-12 && (c[0] + c[1]).abs() < 1e-12);
    }

    #[test]
    fn circulation_of_weighted_four_cycle() {
        let mut net = ResistorNetwork::new(4);
        for (i, r) in [1.0, 2.0, 3.0, 4.0].into_iter().enumerate() {
            net.add_edge(i, (i + 1) % 4, Resistance::Finite(r));
        }
        let basis = circulation_basis(&net);
        assert_eq!(basis.len(), 1);
        let c = &basis[0].coeffs;
        // Unit circulation around the cycle has state sqrt(r_e) on each edge.
        let expected = DVector::from_vec(vec![1.0, 2f64.sqrt(), 3f64.sqrt(), 2.0]).normalize();
        assert!((c - &expected).norm() < 1e-10 || (c + &expected).norm() < 1e-10);
        assert!((net.weighted_incidence() * c).norm() < 1e-12);
    }

    #[test]
    fn series_and_parallel_laws() {
        let mut net = ResistorNetwork::new(3);
        net.add_edge(0, 1, Resistance::Finite(1.0));
        net.add_edge(1, 2, Resistance::Finite(2.0));
        for r in all_methods(&net, 0, 2) {
            assert!((r - 3.0).abs() < 1e-10);
        }
        let pair = unit(2, &[(0, 1), (0, 1)]);
        let flow = min_energy_unit_flow(&pair, 0, 1).unwrap();
        assert!((flow.energy.value() - 0.5).abs() < 1e-12);
        let f = flow.flow.unwrap().coeffs;
        assert!((f[0] - 0.5).abs() < 1e-12 && (f[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn wheatstone_bridge_carries_no_current() {
        let net = unit(4, &[(0, 1), (1, 2), (0, 3), (3, 2), (1, 3)]);
        let flow = min_energy_unit_flow(&net, 0, 2).unwrap();
        assert!(flow.flow.unwrap().coeffs[4].abs() < 1e-12);
        for r in all_methods(&net, 0, 2) {
            assert!((r - 1.0).abs() < 1e-10);
        }
        let g = inverse_resistance_via_potentials(&net, 0, 2).unwrap().value();
        assert!((g - 1.0).abs() < 1e-10);
    }

    #[test]
    fn paths_and_bundles() {
        for n in 1..6 {
            let path = unit(n + 1, &(0..n).map(|i| (i, i + 1)).collect::<Vec<_>>());
            for r in all_methods(&path, 0, n) {
                assert!((r - n as f64).abs() < 1e-9);
            }
            let bundle = unit(2, &vec![(0, 1); n]);
            for r in all_methods(&bundle, 0, 1) {
                assert!((r - 1.0 / n as f64).abs() < 1e-12);
            }
        }
        let split = unit(4, &[(0, 1), (2, 3)]);
        for r in all_methods(&split, 0, 3) {
            assert!(r.is_infinite());
        }
    }

    #[test]
    fn potential_flows() {
        let edge = unit(2, &[(0, 1)]);
        let f = potential_flow(&edge, &Potential { values: DVector::from_vec(vec![1.0, 0.0]) }).unwrap();
        assert_eq!(f.coeffs[0], 1.0);
        let path = unit(4, &[(0, 1), (1, 2), (2, 3)]);
        let u = Potential { values: DVector::from_vec(vec![1.0, 2.0 / 3.0, 1.0 / 3.0, 0.0]) };
        let f = potential_flow(&path, &u).unwrap();
        for j in 0..3 {
            assert!((f.coeffs[j] - 1.0 / 3.0).abs() < 1e-12);
        }
        let flat = potential_flow(&path, &Potential { values: DVector::from_element(4, 2.5) }).unwrap();
        assert_eq!(flat.coeffs.norm(), 0.0);
    }

    #[test]
    fn inverse_resistance_simple_cases() {
        let g = inverse_resistance_via_potentials(&unit(2, &[(0, 1)]), 0, 1).unwrap().value();
        assert!((g - 1.0).abs() < 1e-12);
        let g = inverse_resistance_via_potentials(&unit(3, &[(0, 1), (1, 2)]), 0, 2).unwrap().value();
        assert!((g - 0.5).abs() < 1e-12);
    }
}
