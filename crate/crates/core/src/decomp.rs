//! Tree-parallel decompositions of circulation spaces.
//!
//! A decomposition recursively splits an edge set in one of two ways:
//!
//! * a **tree split** into parts that meet in at most one vertex pairwise and
//!   whose incidence structure has no cycles, so the circulation space is the
//!   direct sum of the parts' circulation spaces;
//! * a **parallel split** into parts that all run between the same pair
//!   `(s, t)` and meet nowhere else, so the circulation space gains the
//!   combinations of the parts' unit `s`-`t` flows that carry no net current.
//!
//! Each parallel node contributes one projector, nodes on the same level have
//! disjoint support, and the reflection through the circulation space is the
//! product of one reflection per level.
//!
//! ```
//! use spanflow::decomp::{auto_decompose, circulation_projector_direct, reflection_from_decomposition};
//! use spanflow::netlab::{ResistorNetwork, Resistance};
//!
//! let mut net = ResistorNetwork::new(3);
//! net.add_edge(0, 1, Resistance::Finite(1.0));
//! net.add_edge(1, 2, Resistance::Finite(2.0));
//! net.add_edge(0, 2, Resistance::Finite(3.0));
//! let tree = auto_decompose(&net).unwrap();
//! let (_reflection, projector) = reflection_from_decomposition(&net, &tree).unwrap();
//! let direct = circulation_projector_direct(&net);
//! assert!((projector - direct).norm() < 1e-10);
//! ```

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{invalid, Error, Result};
use crate::linalg;
use crate::netlab::{self, ResistorNetwork, UnionFind};

/// How a decomposition node splits its edge set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SplitKind {
    Leaf,
    Tree,
    /// All parts run between the same two vertices.
    Parallel { s: usize, t: usize },
}

/// A node of a tree-parallel decomposition. Labels are edge indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecompositionTree {
    pub label: Vec<usize>,
    pub kind: SplitKind,
    pub children: Vec<DecompositionTree>,
}

impl DecompositionTree {
    pub fn leaf(e: usize) -> Self {
        DecompositionTree { label: vec![e], kind: SplitKind::Leaf, children: vec![] }
    }

    /// Number of levels that contain a split node.
    pub fn depth(&self) -> usize {
        if self.children.is_empty() {
            0
        } else {
            1 + self.children.iter().map(|c| c.depth()).max().unwrap_or(0)
        }
    }

    fn levels<'a>(&'a self, level: usize, out: &mut Vec<Vec<&'a DecompositionTree>>) {
        if out.len() <= level {
            out.push(Vec::new());
        }
        out[level].push(self);
        for c in &self.children {
            c.levels(level + 1, out);
        }
    }

    /// Nodes grouped by distance from the root.
    pub fn nodes_by_level(&self) -> Vec<Vec<&DecompositionTree>> {
        let mut out = Vec::new();
        self.levels(0, &mut out);
        out
    }
}

/// A broken structural condition, located by the path of child indices from the root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub node: String,
    pub condition: String,
}

fn vertices_of(net: &ResistorNetwork, edges: &[usize]) -> BTreeSet<usize> {
    edges.iter().flat_map(|&e| [net.edges()[e].tail, net.edges()[e].head]).collect()
}

/// Checks the partition, leaf and per-split conditions of every node.
pub fn validate_decomposition(net: &ResistorNetwork, tree: &DecompositionTree) -> Vec<Violation> {
    let mut out = Vec::new();
    let all: BTreeSet<usize> = (0..net.edge_count()).collect();
    let root: BTreeSet<usize> = tree.label.iter().copied().collect();
    if root != all || root.len() != tree.label.len() {
        out.push(Violation { node: "root".into(), condition: "root label must be the full edge set".into() });
    }
    check_node(net, tree, "root".to_string(), &mut out);
    out
}

fn check_node(net: &ResistorNetwork, node: &DecompositionTree, path: String, out: &mut Vec<Violation>) {
    let mut fail = |c: &str| out.push(Violation { node: path.clone(), condition: c.to_string() });
    if node.label.iter().any(|&e| e >= net.edge_count()) {
        fail("label references a missing edge");
        return;
    }
    let label: BTreeSet<usize> = node.label.iter().copied().collect();
    if label.is_empty() || label.len() != node.label.len() {
        fail("label must be a nonempty set");
    }
    match &node.kind {
        SplitKind::Leaf => {
            if node.label.len() != 1 {
                fail("leaf label must be a single edge");
            }
            if !node.children.is_empty() {
                fail("leaf must not have children");
            }
            return;
        }
        _ if node.children.len() < 2 => fail("split must have at least two parts"),
        _ => {}
    }
    let mut union = BTreeSet::new();
    let mut total = 0;
    for c in &node.children {
        if c.label.is_empty() {
            fail("children must be nonempty");
        }
        total += c.label.len();
        union.extend(c.label.iter().copied());
    }
    if union != label || total != label.len() {
        fail("children must partition the label");
    }
    let parts: Vec<BTreeSet<usize>> = node.children.iter().map(|c| vertices_of(net, &c.label)).collect();
    match &node.kind {
        SplitKind::Tree => {
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    if parts[i].intersection(&parts[j]).count() > 1 {
                        fail(&format!("tree-split parts {i} and {j} share more than one vertex"));
                    }
                }
            }
            // Parts and the vertices they share form a bipartite incidence graph,
            // which must be acyclic for the circulation space to split.
            let mut count: BTreeMap<usize, usize> = BTreeMap::new();
            for p in &parts {
                for &v in p {
                    *count.entry(v).or_default() += 1;
                }
            }
            let shared: Vec<usize> = count.iter().filter(|(_, &c)| c >= 2).map(|(&v, _)| v).collect();
            let mut uf = UnionFind::new(parts.len() + shared.len());
            let mut cyclic = false;
            for (si, v) in shared.iter().enumerate() {
                for (pi, p) in parts.iter().enumerate() {
                    if p.contains(v) && !uf.union(pi, parts.len() + si) {
                        cyclic = true;
                    }
                }
            }
            if cyclic {
                fail("tree-split parts contract to a graph with a cycle");
            }
        }
        SplitKind::Parallel { s, t } => {
            let st: BTreeSet<usize> = [*s, *t].into_iter().collect();
            if s == t {
                fail("parallel split needs two distinct terminals");
            }
            for i in 0..parts.len() {
                for j in i + 1..parts.len() {
                    let common: BTreeSet<usize> = parts[i].intersection(&parts[j]).copied().collect();
                    if common != st {
                        fail(&format!("parallel-split parts {i} and {j} must share exactly their terminals"));
                    }
                }
            }
            for (i, c) in node.children.iter().enumerate() {
                let mut uf = UnionFind::new(net.vertex_count());
                for &e in &c.label {
                    uf.union(net.edges()[e].tail, net.edges()[e].head);
                }
                if *s >= net.vertex_count() || *t >= net.vertex_count() || uf.find(*s) != uf.find(*t) {
                    fail(&format!("parallel-split part {i} does not connect its terminals"));
                }
            }
        }
        SplitKind::Leaf => unreachable!(),
    }
    for (i, c) in node.children.iter().enumerate() {
        check_node(net, c, format!("{path}/{i}"), out);
    }
}

/// Builds a valid decomposition of any network.
///
/// Edge sets with several biconnected blocks become tree splits over the
/// blocks. A single block becomes a parallel split over the bridges of the
/// vertex pair whose largest bridge is smallest, so balanced graphs get
/// logarithmic depth.
pub fn auto_decompose(net: &ResistorNetwork) -> Result<DecompositionTree> {
    if net.edge_count() == 0 {
        return invalid("cannot decompose an empty edge set");
    }
    Ok(decompose_edges(net, (0..net.edge_count()).collect()))
}

fn decompose_edges(net: &ResistorNetwork, edges: Vec<usize>) -> DecompositionTree {
    if edges.len() == 1 {
        return DecompositionTree::leaf(edges[0]);
    }
    let blocks = biconnected_blocks(net, &edges);
    if blocks.len() > 1 {
        let children = blocks.into_iter().map(|b| decompose_edges(net, b)).collect();
        return DecompositionTree { label: edges, kind: SplitKind::Tree, children };
    }
    let verts: Vec<usize> = vertices_of(net, &edges).into_iter().collect();
    let mut best: Option<(usize, usize, usize, Vec<Vec<usize>>)> = None;
    for (i, &s) in verts.iter().enumerate() {
        for &t in &verts[i + 1..] {
            let parts = bridges(net, &edges, s, t);
            if parts.len() < 2 {
                continue;
            }
            let largest = parts.iter().map(|p| p.len()).max().unwrap();
            if best.as_ref().is_none_or(|b| largest < b.0) {
                best = Some((largest, s, t, parts));
            }
        }
    }
    let (_, s, t, parts) = best.expect("a biconnected block with two or more edges has a splitting pair");
    let children = parts.into_iter().map(|p| decompose_edges(net, p)).collect();
    DecompositionTree { label: edges, kind: SplitKind::Parallel { s, t }, children }
}

/// Bridges of `{s, t}`: each direct `s`-`t` edge alone, and each component of
/// the graph minus `s` and `t` together with its attaching edges. Parts that
/// touch only one of `s`, `t` are rejected by returning no split.
fn bridges(net: &ResistorNetwork, edges: &[usize], s: usize, t: usize) -> Vec<Vec<usize>> {
    let mut uf = UnionFind::new(net.vertex_count());
    for &e in edges {
        let (a, b) = (net.edges()[e].tail, net.edges()[e].head);
        if a != s && a != t && b != s && b != t {
            uf.union(a, b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut direct = Vec::new();
    for &e in edges {
        let (a, b) = (net.edges()[e].tail, net.edges()[e].head);
        let inner = [a, b].into_iter().find(|&v| v != s && v != t);
        match inner {
            Some(v) => groups.entry(uf.find(v)).or_default().push(e),
            None => direct.push(vec![e]),
        }
    }
    let mut parts = direct;
    parts.extend(groups.into_values());
    for p in &parts {
        let vs = vertices_of(net, p);
        if !vs.contains(&s) || !vs.contains(&t) {
            return Vec::new();
        }
    }
    parts
}

/// Biconnected blocks of the subgraph on `edges`, self-loops as their own blocks.
fn biconnected_blocks(net: &ResistorNetwork, edges: &[usize]) -> Vec<Vec<usize>> {
    let n = net.vertex_count();
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut blocks = Vec::new();
    for &e in edges {
        let (a, b) = (net.edges()[e].tail, net.edges()[e].head);
        if a == b {
            blocks.push(vec![e]);
        } else {
            adj[a].push((b, e));
            adj[b].push((a, e));
        }
    }
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0; n];
    let mut timer = 0;
    let mut stack: Vec<usize> = Vec::new();
    for root in vertices_of(net, edges) {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: frames of (vertex, parent edge, next adjacency index).
        let mut frames: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (v, pe, ref mut idx)) = frames.last_mut() {
            if *idx < adj[v].len() {
                let (w, e) = adj[v][*idx];
                *idx += 1;
                if e == pe {
                    continue;
                }
                if disc[w] == usize::MAX {
                    stack.push(e);
                    disc[w] = timer;
                    low[w] = timer;
                    timer += 1;
                    frames.push((w, e, 0));
                } else if disc[w] < disc[v] {
                    stack.push(e);
                    low[v] = low[v].min(disc[w]);
                }
            } else {
                frames.pop();
                if let Some(&(u, _, _)) = frames.last() {
                    low[u] = low[u].min(low[v]);
                    if low[v] >= disc[u] {
                        let mut block = Vec::new();
                        while let Some(e) = stack.pop() {
                            block.push(e);
                            if e == pe {
                                break;
                            }
                        }
                        block.sort_unstable();
                        blocks.push(block);
                    }
                }
            }
        }
    }
    blocks.sort();
    blocks
}

/// `Σ |c_i><c_i|` over an orthonormal circulation basis.
pub fn circulation_projector_direct(net: &ResistorNetwork) -> DMatrix<f64> {
    let m = net.edge_count();
    let c = netlab::circulation_matrix(net);
    if c.ncols() == 0 {
        return DMatrix::zeros(m, m);
    }
    linalg::projector(&c)
}

/// Projector contributed by one node on the full edge space.
fn node_projector(net: &ResistorNetwork, node: &DecompositionTree) -> Result<Option<DMatrix<f64>>> {
    let m = net.edge_count();
    match &node.kind {
        SplitKind::Leaf => {
            let e = &net.edges()[node.label[0]];
            if e.tail == e.head {
                let mut p = DMatrix::zeros(m, m);
                p[(node.label[0], node.label[0])] = 1.0;
                return Ok(Some(p));
            }
            Ok(None)
        }
        SplitKind::Tree => Ok(None),
        SplitKind::Parallel { s, t } => {
            let k = node.children.len();
            // Columns g_j = f_j / ||f_j||: normalized unit s-t flows of each part.
            let mut g = DMatrix::zeros(m, k);
            let mut psi = DVector::zeros(k);
            for (j, c) in node.children.iter().enumerate() {
                let mut sub = ResistorNetwork::new(net.vertex_count());
                for &e in &c.label {
                    let ed = &net.edges()[e];
                    sub.add_edge(ed.tail, ed.head, ed.r);
                }
                let flow = netlab::min_energy_unit_flow(&sub, *s, *t)?;
                let f = flow.flow.ok_or_else(|| Error::Invalid(format!("parallel part {j} does not connect its terminals")))?;
                let norm = f.coeffs.norm();
                for (i, &e) in c.label.iter().enumerate() {
                    g[(e, j)] = f.coeffs[i] / norm;
                }
                psi[j] = 1.0 / norm;
            }
            let psi = psi.normalize();
            let inner = DMatrix::identity(k, k) - &psi * psi.transpose();
            Ok(Some(&g * inner * g.transpose()))
        }
    }
}

/// Reflection `Π_ℓ (I - 2 P_ℓ)` with one projector `P_ℓ` per level, and the
/// circulation projector `Σ_ℓ P_ℓ`, so that `(I - R)/2` is that projector.
pub fn reflection_from_decomposition(net: &ResistorNetwork, tree: &DecompositionTree) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if !net.is_normalized() {
        return invalid("reflection synthesis needs finite positive resistances");
    }
    let violations = validate_decomposition(net, tree);
    if let Some(v) = violations.first() {
        return invalid(format!("invalid decomposition at {}: {}", v.node, v.condition));
    }
    let m = net.edge_count();
    let mut reflection = DMatrix::identity(m, m);
    let mut projector = DMatrix::zeros(m, m);
    for level in tree.nodes_by_level() {
        let mut p = DMatrix::zeros(m, m);
        for node in level {
            if let Some(q) = node_projector(net, node)? {
                p += q;
            }
        }
        let r = DMatrix::identity(m, m) - &p * 2.0;
        reflection = r * reflection;
        projector += p;
    }
    Ok((reflection, projector))
}

/// Symbolic resource count of a decomposition.
#[derive(Clone, Debug, PartialEq)]
pub struct DecompositionCost {
    /// Number of levels containing a split node.
    pub depth: usize,
    /// Largest number of parts of a split on each level.
    pub branching: Vec<usize>,
    /// `Π (k_ℓ + 1)`.
    pub k: u128,
    /// `|E| K` bits of lookup table.
    pub qrom_bits: u128,
    /// `d log2 K`.
    pub gates: f64,
}

pub fn decomposition_cost(tree: &DecompositionTree) -> DecompositionCost {
    let branching: Vec<usize> = tree
        .nodes_by_level()
        .iter()
        .map(|lvl| lvl.iter().map(|n| n.children.len()).max().unwrap_or(0))
        .filter(|&k| k > 0)
        .collect();
    let k: u128 = branching.iter().fold(1u128, |a, &b| a.saturating_mul(b as u128 + 1));
    let depth = branching.len();
    DecompositionCost { depth, k, qrom_bits: (tree.label.len() as u128).saturating_mul(k), gates: depth as f64 * (k as f64).log2(), branching }
}

/// Smallest nonzero eigenvalue of `I - D^{-1/2} A D^{-1/2}`, where `A` sums
/// edge conductances between distinct vertices and `D` is its row sum.
pub fn spectral_gap(net: &ResistorNetwork) -> Result<f64> {
    if !net.is_normalized() {
        return invalid("spectral gap needs finite positive resistances");
    }
    let n = net.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for e in net.edges() {
        if e.tail != e.head {
            let g = 1.0 / e.r.value();
            a[(e.tail, e.head)] += g;
            a[(e.head, e.tail)] += g;
        }
    }
    let d: Vec<f64> = (0..n).map(|v| a.row(v).sum()).collect();
    if d.contains(&0.0) {
        return invalid("spectral gap needs every vertex to have an edge");
    }
    let l = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - a[(i, j)] / (d[i] * d[j]).sqrt()
    });
    let eig = SymmetricEigen::new(l);
    let max = eig.eigenvalues.amax();
    let tol = (linalg::RANK_RTOL * max).max(1e-12);
    eig.eigenvalues
        .iter()
        .copied()
        .filter(|&x| x > tol)
        .fold(None, |acc: Option<f64>, x| Some(acc.map_or(x, |a| a.min(x))))
        .ok_or_else(|| Error::Invalid("graph has no nonzero Laplacian eigenvalue".into()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlab::Resistance;

    fn unit(n: usize, edges: &[(usize, usize)]) -> ResistorNetwork {
        let mut net = ResistorNetwork::new(n);
        for &(u, v) in edges {
            net.add_edge(u, v, Resistance::Finite(1.0));
        }
        net
    }

    #[test]
    fn single_edge_leaf_is_valid() {
        let net = unit(2, &[(0, 1)]);
        let t = auto_decompose(&net).unwrap();
        assert_eq!(t, DecompositionTree::leaf(0));
        assert!(validate_decomposition(&net, &t).is_empty());
    }

    #[test]
    fn path_is_one_tree_split() {
        let net = unit(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let t = auto_decompose(&net).unwrap();
        assert_eq!(t.kind, SplitKind::Tree);
        assert_eq!(t.depth(), 1);
        let cost = decomposition_cost(&t);
        assert_eq!((cost.depth, cost.k), (1, 5));
    }

    #[test]
    fn bundle_is_one_parallel_split() {
        let net = unit(2, &[(0, 1), (0, 1), (0, 1)]);
        let t = auto_decompose(&net).unwrap();
        assert_eq!(t.kind, SplitKind::Parallel { s: 0, t: 1 });
        assert_eq!(t.depth(), 1);
        let (r, p) = reflection_from_decomposition(&net, &t).unwrap();
        assert!((p - circulation_projector_direct(&net)).norm() < 1e-12);
        assert!((&r * &r - DMatrix::identity(3, 3)).norm() < 1e-12);
    }

    #[test]
    fn parallel_split_sharing_three_vertices_is_rejected() {
        // Triangle plus a chord-like edge: parts {01,12} and {02,12'} share 3 vertices.
        let net = unit(3, &[(0, 1), (1, 2), (0, 2), (1, 2)]);
        let t = DecompositionTree {
            label: vec![0, 1, 2, 3],
            kind: SplitKind::Parallel { s: 0, t: 2 },
            children: vec![
                DecompositionTree { label: vec![0, 1], kind: SplitKind::Tree, children: vec![DecompositionTree::leaf(0), DecompositionTree::leaf(1)] },
                DecompositionTree { label: vec![2, 3], kind: SplitKind::Tree, children: vec![DecompositionTree::leaf(2), DecompositionTree::leaf(3)] },
            ],
        };
        assert!(!validate_decomposition(&net, &t).is_empty());
    }

    #[test]
    fn self_loops_are_circulations() {
        let net = unit(2, &[(0, 1), (1, 1)]);
        let t = auto_decompose(&net).unwrap();
        let (_, p) = reflection_from_decomposition(&net, &t).unwrap();
        assert!((p - circulation_projector_direct(&net)).norm() < 1e-12);
    }

    #[test]
    fn spectral_gaps() {
        assert!((spectral_gap(&unit(2, &[(0, 1)])).unwrap() - 2.0).abs() < 1e-12);
        let k4 = unit(4, &[(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]);
        assert!((spectral_gap(&k4).unwrap() - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_parallel_cost() {
        // Two levels of binary parallel splits: K = 3^2.
        let net = unit(4, &[(0, 1), (1, 3), (0, 2), (2, 3)]);
        let t = DecompositionTree {
            label: vec![0, 1, 2, 3],
            kind: SplitKind::Parallel { s: 0, t: 3 },
            children: vec![
                DecompositionTree { label: vec![0, 1], kind: SplitKind::Tree, children: vec![DecompositionTree::leaf(0), DecompositionTree::leaf(1)] },
                DecompositionTree { label: vec![2, 3], kind: SplitKind::Tree, children: vec![DecompositionTree::leaf(2), DecompositionTree::leaf(3)] },
            ],
        };
        assert!(validate_decomposition(&net, &t).is_empty());
        assert_eq!(decomposition_cost(&t).k, 9);
    }
}
