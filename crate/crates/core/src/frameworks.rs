//! Converters from classical query models into graph compositions.
//!
//! Weighted decision trees, zero-error and bounded-error families of trees,
//! boolean formulas over span programs, divide-and-conquer strategies and
//! extended learning graphs all become [`CompositionGraph`]s whose witness
//! sizes are bounded by the cost measure of the source model.
//!
//! ```
//! use spanflow::frameworks::{tree_to_st, wdt_value, DecisionTree, Label};
//! use spanflow::graphcomp::Program;
//! use spanflow::spanprog::binary_inputs;
//!
//! // x0 AND x1 as a decision tree with unit weights.
//! let t = DecisionTree::query(0, DecisionTree::leaf(Label::Zero),
//!     DecisionTree::query(1, DecisionTree::leaf(Label::Zero), DecisionTree::leaf(Label::One)));
//! let inputs = binary_inputs(2);
//! let wdt = wdt_value(&t, &inputs);
//! assert_eq!(wdt.plus, 2.0);
//! let p = Program::graph(tree_to_st(&t).unwrap()).unwrap();
//! assert!((p.evaluate(b"11").unwrap().size - 2.0).abs() < 1e-12);
//! ```

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::catalog;
use crate::error::{invalid, Error, Result};
use crate::graphcomp::{and_compose, or_compose, CompositionGraph, Program, ProgramKind};
use crate::spanprog::{symbol_at, Complexity, Predicate};

fn bit(x: &[u8], i: usize) -> bool {
    symbol_at(x, i) == b'1'
}

/// Output label of a decision-tree leaf.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1")]
    One,
    #[serde(rename = "?")]
    Unknown,
}

/// A decision tree over binary inputs with positive edge weights `w0`, `w1`
/// on the outcome-0 and outcome-1 legs of every query.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DecisionTree {
    Query { query: usize, w0: f64, w1: f64, c0: Box<DecisionTree>, c1: Box<DecisionTree> },
    Leaf { leaf: Label },
}

impl DecisionTree {
    pub fn leaf(label: Label) -> DecisionTree {
        DecisionTree::Leaf { leaf: label }
    }

    /// Query of `x_i` with unit weights.
    pub fn query(i: usize, c0: DecisionTree, c1: DecisionTree) -> DecisionTree {
        DecisionTree::weighted(i, 1.0, 1.0, c0, c1)
    }

    pub fn weighted(i: usize, w0: f64, w1: f64, c0: DecisionTree, c1: DecisionTree) -> DecisionTree {
        DecisionTree::Query { query: i, w0, w1, c0: Box::new(c0), c1: Box::new(c1) }
    }

    /// Checks positive finite weights and distinct queries on every path.
    pub fn validate(&self) -> Result<()> {
        fn go(t: &DecisionTree, seen: &mut Vec<usize>) -> Result<()> {
            if let DecisionTree::Query { query, w0, w1, c0, c1 } = t {
                if seen.contains(query) {
                    return invalid(format!("x{query} is queried twice on one path"));
                }
                for w in [w0, w1] {
                    if !(*w > 0.0 && w.is_finite()) {
                        return invalid(format!("edge weight {w} is not positive and finite"));
                    }
                }
                seen.push(*query);
                go(c0, seen)?;
                go(c1, seen)?;
                seen.pop();
            }
            Ok(())
        }
        go(self, &mut Vec::new())
    }

    pub fn eval(&self, x: &[u8]) -> Label {
        let mut t = self;
        loop {
            match t {
                DecisionTree::Leaf { leaf } => return *leaf,
                DecisionTree::Query { query, c0, c1, .. } => t = if bit(x, *query) { c1 } else { c0 },
            }
        }
    }

    /// Number of edges on the longest root-leaf path.
    pub fn depth(&self) -> usize {
        match self {
            DecisionTree::Leaf { .. } => 0,
            DecisionTree::Query { c0, c1, .. } => 1 + c0.depth().max(c1.depth()),
        }
    }

    /// True when some leaf is labelled 1.
    pub fn has_one_leaf(&self) -> bool {
        match self {
            DecisionTree::Leaf { leaf } => *leaf == Label::One,
            DecisionTree::Query { c0, c1, .. } => c0.has_one_leaf() || c1.has_one_leaf(),
        }
    }

    /// Number of internal nodes.
    pub fn size(&self) -> usize {
        match self {
            DecisionTree::Leaf { .. } => 0,
            DecisionTree::Query { c0, c1, .. } => 1 + c0.size() + c1.size(),
        }
    }
}

/// The weighted-decision-tree measures of a tree on a set of inputs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct WdtValue {
    /// Largest weight sum along the path of an accepted input.
    pub plus: f64,
    /// Largest inverse-weight sum over the legs leaving the path of a rejected input.
    pub minus: f64,
    /// `sqrt(plus * minus)`.
    pub value: f64,
}

/// WDT measures over `inputs`. Leaves labelled `0` and `?` count as rejecting.
pub fn wdt_value(t: &DecisionTree, inputs: &[Vec<u8>]) -> WdtValue {
    let (mut plus, mut minus) = (0.0f64, 0.0f64);
    for x in inputs {
        let (mut on, mut off) = (0.0, 0.0);
        let mut node = t;
        while let DecisionTree::Query { query, w0, w1, c0, c1 } = node {
            if bit(x, *query) {
                on += w1;
                off += 1.0 / w0;
                node = c1;
            } else {
                on += w0;
                off += 1.0 / w1;
                node = c0;
            }
        }
        if *node == DecisionTree::leaf(Label::One) {
            plus = plus.max(on);
        } else {
            minus = minus.max(off);
        }
    }
    WdtValue { plus, minus, value: (plus * minus).sqrt() }
}

/// `WDT(T)` minimized over weights, by the recurrence
/// `(a + b + sqrt((a - b)^2 + 4)) / 2` on the values of the two subtrees.
pub fn optimal_wdt(t: &DecisionTree) -> f64 {
    match t {
        DecisionTree::Leaf { .. } => 0.0,
        DecisionTree::Query { c0, c1, .. } => {
            let (a, b) = (optimal_wdt(c0), optimal_wdt(c1));
            wdt_combine(a, b)
        }
    }
}

/// The root recurrence of [`optimal_wdt`].
pub fn wdt_combine(a: f64, b: f64) -> f64 {
    (a + b + ((a - b) * (a - b) + 4.0).sqrt()) / 2.0
}

/// Converts a weighted tree into a composition that accepts exactly the
/// inputs reaching a 1-leaf. The root becomes `s`, every 1-leaf is merged
/// into `t`, and legs leading only to 0- or ?-leaves are dropped. The
/// outcome-1 leg of a query of `x_j` carries `w1 [x_j = 1]`, the outcome-0 leg
/// `w0 [x_j = 0]`.
pub fn tree_to_st(t: &DecisionTree) -> Result<CompositionGraph> {
    t.validate()?;
    if !t.has_one_leaf() {
        return invalid("tree has no 1-leaf and computes the constant-0 function");
    }
    if *t == DecisionTree::leaf(Label::One) {
        return Ok(or_compose(&[Program::constant(true)]));
    }
    let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
    fn go(g: &mut CompositionGraph, t: &DecisionTree, at: usize) {
        if let DecisionTree::Query { query, w0, w1, c0, c1 } = t {
            for (child, w, pred) in [(c0, w0, Predicate::not_bit(*query)), (c1, w1, Predicate::bit(*query))] {
                if !child.has_one_leaf() {
                    continue;
                }
                let p = Program::trivial(pred).scaled(*w);
                if matches!(**child, DecisionTree::Leaf { .. }) {
                    g.add_edge(at, 1, p);
                } else {
                    let v = g.add_vertex();
                    g.add_edge(at, v, p);
                    go(g, child, v);
                }
            }
        }
    }
    go(&mut g, t, 0);
    Ok(g)
}

/// Guessing complexity of a tree together with its depth.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Guessing {
    /// Largest number of unguessed legs on a root-leaf path.
    pub g: usize,
    /// Depth.
    pub t: usize,
    pub sqrt_gt: f64,
}

/// `guess(path)` names the guessed outcome at the node reached by the
/// outcomes in `path`, so exactly one leg per query is guessed.
pub fn guessing_complexity(t: &DecisionTree, guess: &dyn Fn(&[bool]) -> bool) -> Guessing {
    fn go(t: &DecisionTree, path: &mut Vec<bool>, guess: &dyn Fn(&[bool]) -> bool) -> usize {
        match t {
            DecisionTree::Leaf { .. } => 0,
            DecisionTree::Query { c0, c1, .. } => {
                let gb = guess(path);
                let mut best = 0;
                for (b, c) in [(false, c0), (true, c1)] {
                    path.push(b);
                    let miss = usize::from(b != gb);
                    best = best.max(miss + go(c, path, guess));
                    path.pop();
                }
                best
            }
        }
    }
    let g = go(t, &mut Vec::new(), guess);
    let depth = t.depth();
    Guessing { g, t: depth, sqrt_gt: ((g * depth) as f64).sqrt() }
}

/// A probability distribution over decision trees.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeFamily {
    pub trees: Vec<DecisionTree>,
    pub probs: Vec<f64>,
}

impl TreeFamily {
    pub fn validate(&self) -> Result<()> {
        if self.trees.is_empty() || self.trees.len() != self.probs.len() {
            return invalid("a family needs one probability per tree");
        }
        if self.probs.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
            return invalid("probabilities must be nonnegative");
        }
        let total: f64 = self.probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return invalid(format!("probabilities sum to {total}"));
        }
        for t in &self.trees {
            t.validate()?;
        }
        Ok(())
    }

    /// Probability of each label on `x`, in the order 0, 1, ?.
    pub fn label_probabilities(&self, x: &[u8]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (t, p) in self.trees.iter().zip(&self.probs) {
            let k = match t.eval(x) {
                Label::Zero => 0,
                Label::One => 1,
                Label::Unknown => 2,
            };
            out[k] += p;
        }
        out
    }

    /// Checks that no tree outputs `!f(x)` and `?` has probability at most 1/2.
    pub fn check_zero_error(&self, inputs: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<()> {
        for x in inputs {
            let pr = self.label_probabilities(x);
            let wrong = if f(x) { pr[0] } else { pr[1] };
            if wrong > 0.0 || pr[2] > 0.5 + 1e-12 {
                return Err(Error::Promise(format!("family is not zero-error on {}", String::from_utf8_lossy(x))));
            }
        }
        Ok(())
    }

    /// Checks that every input is answered correctly with probability at least 2/3.
    pub fn check_bounded_error(&self, inputs: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<()> {
        for x in inputs {
            let pr = self.label_probabilities(x);
            let right = if f(x) { pr[1] } else { pr[0] };
            if right < 2.0 / 3.0 - 1e-12 {
                return Err(Error::Promise(format!(
                    "family is correct with probability {right} < 2/3 on {}",
                    String::from_utf8_lossy(x)
                )));
            }
        }
        Ok(())
    }
}

/// `(W+, W-)` of a program over a set of inputs.
pub fn complexity_over(p: &Program, inputs: &[Vec<u8>]) -> Result<Complexity> {
    p.complexity(inputs.iter().map(|x| x.as_slice()))
}

/// Rescales `p` so that `W+ = W- = C` on `inputs`, when both are positive.
pub fn balance(p: &Program, inputs: &[Vec<u8>]) -> Result<Program> {
    let c = complexity_over(p, inputs)?;
    if c.w_plus > 0.0 && c.w_minus > 0.0 {
        Ok(p.scaled((c.w_minus / c.w_plus).sqrt()))
    } else {
        Ok(p.clone())
    }
}

/// Parallel composition of the balanced tree programs `P_j / p_j`.
/// Trees without a 1-leaf never accept and are left out.
pub fn zero_error_family_to_st(fam: &TreeFamily, inputs: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<CompositionGraph> {
    fam.validate()?;
    fam.check_zero_error(inputs, f)?;
    let mut edges = Vec::new();
    for (t, &p) in fam.trees.iter().zip(&fam.probs) {
        if p <= 0.0 || !t.has_one_leaf() {
            continue;
        }
        let prog = balance(&Program::graph(tree_to_st(t)?)?, inputs)?;
        edges.push(prog.scaled(1.0 / p));
    }
    if edges.is_empty() {
        edges.push(Program::constant(false));
    }
    Ok(or_compose(&edges))
}

/// Result of [`randomized_to_st`].
#[derive(Clone, Debug)]
pub struct RandomizedConversion {
    pub graph: CompositionGraph,
    /// Distinct trees after merging identical ones.
    pub trees: Vec<DecisionTree>,
    /// Number of copies of each distinct tree.
    pub copies: Vec<usize>,
    /// Total number of copies `N`, which is even.
    pub total: usize,
    /// Largest `|copies_j / N - p_j|`.
    pub approximation_error: f64,
}

const MAX_COPIES: usize = 64;

/// Multiplicities `m_j` with `Σ m_j = n` closest to `p_j n`, by largest remainder.
fn apportion(probs: &[f64], n: usize) -> Vec<usize> {
    let raw: Vec<f64> = probs.iter().map(|p| p * n as f64).collect();
    let mut m: Vec<usize> = raw.iter().map(|r| r.floor() as usize).collect();
    let mut order: Vec<usize> = (0..probs.len()).collect();
    order.sort_by(|&a, &b| (raw[b] - raw[b].floor()).total_cmp(&(raw[a] - raw[a].floor())).then(a.cmp(&b)));
    let mut left = n - m.iter().sum::<usize>();
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        m[j] += 1;
        left -= 1;
    }
    m
}

/// Bounded-error family to composition: the gapped-majority threshold at
/// `k = N/2` over `N` tree outputs, each computed by its balanced tree program.
///
/// Identical trees are merged. The distribution is replaced by multiplicities
/// over the smallest even `N <= 64` that represents it best, and a block of
/// `m_j` identical parallel branches is realized as one branch scaled by `1/m_j`.
pub fn randomized_to_st(fam: &TreeFamily, inputs: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<RandomizedConversion> {
    fam.validate()?;
    fam.check_bounded_error(inputs, f)?;
    let mut trees: Vec<DecisionTree> = Vec::new();
    let mut probs: Vec<f64> = Vec::new();
    for (t, &p) in fam.trees.iter().zip(&fam.probs) {
        if p <= 0.0 {
            continue;
        }
        match trees.iter().position(|u| u == t) {
            Some(j) => probs[j] += p,
            None => {
                trees.push(t.clone());
                probs.push(p);
            }
        }
    }
    let mut best: Option<(f64, usize, Vec<usize>)> = None;
    for n in (2..=MAX_COPIES).step_by(2) {
        let m = apportion(&probs, n);
        let err = m.iter().zip(&probs).map(|(&mj, &p)| (mj as f64 / n as f64 - p).abs()).fold(0.0, f64::max);
        if best.as_ref().is_none_or(|b| err < b.0 - 1e-15) {
            best = Some((err, n, m));
        }
        if err < 1e-12 {
            break;
        }
    }
    let (approximation_error, total, copies) = best.expect("at least one candidate size");
    for x in inputs {
        let ones: usize = trees.iter().zip(&copies).filter(|(t, _)| t.eval(x) == Label::One).map(|(_, m)| m).sum();
        if (2 * ones >= total) != f(x) {
            return Err(Error::Promise(format!(
                "rational approximation breaks the majority on {}",
                String::from_utf8_lossy(x)
            )));
        }
    }
    let mut programs = Vec::new();
    for (t, &m) in trees.iter().zip(&copies) {
        if m == 0 {
            continue;
        }
        let p = if t.has_one_leaf() { balance(&Program::graph(tree_to_st(t)?)?, inputs)? } else { Program::constant(false) };
        programs.push((p, m));
    }
    let graph = catalog::threshold_multiset(&programs, total / 2)?;
    Ok(RandomizedConversion { graph, trees, copies, total, approximation_error })
}

/// A boolean formula over numbered leaves.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Formula {
    Const(bool),
    Var(usize),
    Not(Arc<Formula>),
    And(Vec<Arc<Formula>>),
    Or(Vec<Arc<Formula>>),
}

impl Formula {
    pub fn var(j: usize) -> Arc<Formula> {
        Arc::new(Formula::Var(j))
    }

    pub fn not(f: Arc<Formula>) -> Arc<Formula> {
        Arc::new(Formula::Not(f))
    }

    pub fn and(fs: Vec<Arc<Formula>>) -> Arc<Formula> {
        Arc::new(Formula::And(fs))
    }

    pub fn or(fs: Vec<Arc<Formula>>) -> Arc<Formula> {
        Arc::new(Formula::Or(fs))
    }

    /// Value under the leaf assignment `leaf`.
    pub fn eval(&self, leaf: &dyn Fn(usize) -> bool) -> bool {
        match self {
            Formula::Const(b) => *b,
            Formula::Var(j) => leaf(*j),
            Formula::Not(f) => !f.eval(leaf),
            Formula::And(fs) => fs.iter().all(|f| f.eval(leaf)),
            Formula::Or(fs) => fs.iter().any(|f| f.eval(leaf)),
        }
    }

    /// Multiset of leaf occurrences, as a count per leaf index.
    pub fn occurrences(&self) -> BTreeMap<usize, usize> {
        fn go(f: &Formula, out: &mut BTreeMap<usize, usize>) {
            match f {
                Formula::Const(_) => {}
                Formula::Var(j) => *out.entry(*j).or_insert(0) += 1,
                Formula::Not(g) => go(g, out),
                Formula::And(gs) | Formula::Or(gs) => gs.iter().for_each(|g| go(g, out)),
            }
        }
        let mut out = BTreeMap::new();
        go(self, &mut out);
        out
    }

    /// Depth of the AND/OR tree, not counting negations.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Const(_) | Formula::Var(_) => 0,
            Formula::Not(g) => g.depth(),
            Formula::And(gs) | Formula::Or(gs) => 1 + gs.iter().map(|g| g.depth()).max().unwrap_or(0),
        }
    }

    fn validate(&self, leaves: usize) -> Result<()> {
        match self {
            Formula::Const(_) => Ok(()),
            Formula::Var(j) if *j < leaves => Ok(()),
            Formula::Var(j) => invalid(format!("formula refers to leaf {j} of {leaves}")),
            Formula::Not(g) => g.validate(leaves),
            Formula::And(gs) | Formula::Or(gs) if gs.is_empty() => invalid("empty AND/OR in formula"),
            Formula::And(gs) | Formula::Or(gs) => gs.iter().try_for_each(|g| g.validate(leaves)),
        }
    }
}

/// Negation through the dual graph: series and parallel swap and every
/// edge program is negated. Graphs on two vertices are treated as parallel
/// compositions and all other graphs as series chains, which covers every
/// graph built by [`formula_to_composition`]; other programs are negated
/// directly.
pub fn dual_negation(p: &Program) -> Result<Program> {
    dual_memo(p, &mut HashMap::new())
}

/// Keyed by node address; the source program is kept alive with its dual
/// so that addresses stay unique for the lifetime of the memo.
type DualMemo = HashMap<usize, (Program, Program)>;

fn dual_memo(p: &Program, memo: &mut DualMemo) -> Result<Program> {
    let key = p.node_id();
    if let Some((_, q)) = memo.get(&key) {
        return Ok(q.clone());
    }
    let q = match p.kind() {
        ProgramKind::Trivial(_) | ProgramKind::Dense(_) => p.negated(),
        ProgramKind::Negated(inner) => inner.clone(),
        ProgramKind::Scaled(a, inner) => dual_memo(inner, memo)?.scaled(1.0 / a),
        ProgramKind::Graph(g) => {
            let kids = g.edges().iter().map(|e| dual_memo(&e.program, memo)).collect::<Result<Vec<_>>>()?;
            if is_parallel(g) {
                Program::graph(and_compose(&kids))?
            } else if is_series(g) {
                Program::graph(or_compose(&kids))?
            } else {
                p.negated()
            }
        }
    };
    memo.insert(key, (p.clone(), q.clone()));
    Ok(q)
}

fn is_parallel(g: &CompositionGraph) -> bool {
    g.vertex_count() == 2
}

fn is_series(g: &CompositionGraph) -> bool {
    let n = g.edge_count();
    g.vertex_count() == n + 1
        && g.source() == 0
        && g.sink() == n
        && g.edges().iter().enumerate().all(|(i, e)| e.tail == i && e.head == i + 1)
}

fn w_plus_over(p: &Program, domain: &[Vec<u8>]) -> Result<f64> {
    let mut w: f64 = 0.0;
    for x in domain {
        let e = p.evaluate(x)?;
        if e.positive {
            w = w.max(e.size);
        }
    }
    Ok(w)
}

/// Builds a series-parallel composition computing `formula`, with leaf `j`
/// evaluated by `leaves[j]`.
///
/// Every OR becomes a parallel composition of `P_i / W+(P_i)` with `W+`
/// taken over `domain`, an AND is the dual of the OR of the negations, and a
/// negation is the dual graph. On `domain` this gives
/// `C^2 <= Σ_{j in J} C(P_j)^2` over the leaf occurrences `J`.
pub fn formula_to_composition(formula: &Arc<Formula>, leaves: &[Program], domain: &[Vec<u8>]) -> Result<CompositionGraph> {
    formula.validate(leaves.len())?;
    let mut b = FormulaBuilder { leaves, domain, memo: HashMap::new(), duals: HashMap::new() };
    let p = b.build(formula)?;
    match p.as_graph() {
        Some(g) => Ok(g.clone()),
        None => Ok(or_compose(&[p])),
    }
}

struct FormulaBuilder<'a> {
    leaves: &'a [Program],
    domain: &'a [Vec<u8>],
    memo: HashMap<*const Formula, Program>,
    duals: DualMemo,
}

impl FormulaBuilder<'_> {
    fn build(&mut self, f: &Arc<Formula>) -> Result<Program> {
        let key = Arc::as_ptr(f);
        if let Some(p) = self.memo.get(&key) {
            return Ok(p.clone());
        }
        let p = match &**f {
            Formula::Const(b) => Program::constant(*b),
            Formula::Var(j) => self.leaves[*j].clone(),
            Formula::Not(g) => {
                let inner = self.build(g)?;
                dual_memo(&inner, &mut self.duals)?
            }
            Formula::Or(gs) => {
                let kids = gs.iter().map(|g| self.build(g)).collect::<Result<Vec<_>>>()?;
                self.or_of(kids)?
            }
            Formula::And(gs) => {
                let mut kids = Vec::new();
                for g in gs {
                    let inner = self.build(g)?;
                    kids.push(dual_memo(&inner, &mut self.duals)?);
                }
                let or = self.or_of(kids)?;
                dual_memo(&or, &mut self.duals)?
            }
        };
        self.memo.insert(key, p.clone());
        Ok(p)
    }

    fn or_of(&self, kids: Vec<Program>) -> Result<Program> {
        let mut scaled = Vec::with_capacity(kids.len());
        for k in kids {
            let w = w_plus_over(&k, self.domain)?;
            scaled.push(if w > 0.0 && w.is_finite() { k.scaled(1.0 / w) } else { k });
        }
        Program::graph(or_compose(&scaled))
    }
}

/// One division step: `combine` reads leaf `j < parts.len()` as the value of
/// subproblem `parts[j]` and leaf `parts.len()` as the auxiliary function.
pub struct Split<K> {
    pub parts: Vec<K>,
    /// Auxiliary function as a formula over the global leaves.
    pub aux: Option<Arc<Formula>>,
    pub combine: Arc<Formula>,
}

type BaseFn<'a, K> = Box<dyn Fn(&K) -> Option<Arc<Formula>> + 'a>;
type SplitFn<'a, K> = Box<dyn Fn(&K) -> Split<K> + 'a>;

/// A divide-and-conquer strategy over subproblem keys `K`.
pub struct Strategy<'a, K> {
    /// Formula over the global leaves for subproblems below the cutoff.
    pub base: BaseFn<'a, K>,
    pub split: SplitFn<'a, K>,
}

/// Per-subproblem check of the recurrence `C(P_m)^2 <= Σ C(P_mj)^2 + C(aux)^2`.
#[derive(Clone, Debug)]
pub struct DcLevel<K> {
    pub key: K,
    pub c_squared: f64,
    pub bound: f64,
}

pub struct DcResult<K> {
    /// The fully expanded formula.
    pub formula: Arc<Formula>,
    pub program: Program,
    pub levels: Vec<DcLevel<K>>,
}

struct DcNode {
    formula: Arc<Formula>,
    program: Program,
    c2: f64,
}

/// Unrolls a strategy from `root`, composing every level with
/// [`formula_to_composition`] and recording the recurrence at each step.
pub fn divide_and_conquer<K: Ord + Clone>(
    st: &Strategy<'_, K>,
    root: K,
    leaves: &[Program],
    domain: &[Vec<u8>],
) -> Result<DcResult<K>> {
    let mut memo: BTreeMap<K, Arc<DcNode>> = BTreeMap::new();
    let mut levels = Vec::new();
    let node = dc_node(st, &root, leaves, domain, &mut memo, &mut levels)?;
    Ok(DcResult { formula: node.formula.clone(), program: node.program.clone(), levels })
}

fn c_squared(p: &Program, domain: &[Vec<u8>]) -> Result<f64> {
    let c = complexity_over(p, domain)?;
    Ok(c.w_plus * c.w_minus)
}

fn graph_program(g: CompositionGraph) -> Result<Program> {
    Program::graph(g)
}

fn dc_node<K: Ord + Clone>(
    st: &Strategy<'_, K>,
    key: &K,
    leaves: &[Program],
    domain: &[Vec<u8>],
    memo: &mut BTreeMap<K, Arc<DcNode>>,
    levels: &mut Vec<DcLevel<K>>,
) -> Result<Arc<DcNode>> {
    if let Some(n) = memo.get(key) {
        return Ok(n.clone());
    }
    let node = if let Some(f) = (st.base)(key) {
        let program = graph_program(formula_to_composition(&f, leaves, domain)?)?;
        let c2 = c_squared(&program, domain)?;
        DcNode { formula: f, program, c2 }
    } else {
        let split = (st.split)(key);
        let mut kids = Vec::new();
        for part in &split.parts {
            kids.push(dc_node(st, part, leaves, domain, memo, levels)?);
        }
        let mut local: Vec<Program> = kids.iter().map(|k| k.program.clone()).collect();
        let mut subst: Vec<Arc<Formula>> = kids.iter().map(|k| k.formula.clone()).collect();
        let mut bound: f64 = kids.iter().map(|k| k.c2).sum();
        if let Some(aux) = &split.aux {
            let p = graph_program(formula_to_composition(aux, leaves, domain)?)?;
            bound += c_squared(&p, domain)?;
            local.push(p);
            subst.push(aux.clone());
        }
        let program = graph_program(formula_to_composition(&split.combine, &local, domain)?)?;
        let c2 = c_squared(&program, domain)?;
        levels.push(DcLevel { key: key.clone(), c_squared: c2, bound });
        DcNode { formula: substitute(&split.combine, &subst), program, c2 }
    };
    let node = Arc::new(node);
    memo.insert(key.clone(), node.clone());
    Ok(node)
}

/// Replaces every `Var(j)` of `f` by `subst[j]`.
pub fn substitute(f: &Arc<Formula>, subst: &[Arc<Formula>]) -> Arc<Formula> {
    match &**f {
        Formula::Const(_) => f.clone(),
        Formula::Var(j) => subst[*j].clone(),
        Formula::Not(g) => Formula::not(substitute(g, subst)),
        Formula::And(gs) => Formula::and(gs.iter().map(|g| substitute(g, subst)).collect()),
        Formula::Or(gs) => Formula::or(gs.iter().map(|g| substitute(g, subst)).collect()),
    }
}

/// Leaf index of the directed edge `(u, v)` in an `n`-vertex adjacency string.
pub fn edge_index(n: usize, u: usize, v: usize) -> usize {
    u * n + v
}

/// The recursive reachability formula for paths of length at most `l`
/// between `s` and `t`; leaves are [`edge_index`] positions.
pub fn savitch_subformula(n: usize, l: usize, s: usize, t: usize, memo: &mut HashMap<(usize, usize, usize), Arc<Formula>>) -> Arc<Formula> {
    if let Some(f) = memo.get(&(l, s, t)) {
        return f.clone();
    }
    let f = if l == 1 {
        if s == t {
            Arc::new(Formula::Const(true))
        } else {
            Formula::var(edge_index(n, s, t))
        }
    } else {
        Formula::or(
            (0..n)
                .map(|v| Formula::and(vec![savitch_subformula(n, l / 2, s, v, memo), savitch_subformula(n, l / 2, v, t, memo)]))
                .collect(),
        )
    };
    memo.insert((l, s, t), f.clone());
    f
}

/// Result of [`savitch_formula`].
pub struct Savitch {
    pub formula: Arc<Formula>,
    pub graph: CompositionGraph,
    /// Classification of the adjacency string by the composition.
    pub reachable: bool,
}

/// Builds the reachability formula of an `n`-vertex digraph (`n` a power of
/// two) and classifies `adjacency` (`n^2` ASCII bits, row-major) with it.
pub fn savitch_formula(n: usize, adjacency: &[u8], s: usize, t: usize) -> Result<Savitch> {
    if !n.is_power_of_two() || s >= n || t >= n || adjacency.len() != n * n {
        return invalid("need a power-of-two vertex count, terminals in range and n^2 adjacency bits");
    }
    let formula = savitch_subformula(n, n, s, t, &mut HashMap::new());
    let leaves: Vec<Program> = (0..n * n).map(|i| Program::trivial(Predicate::bit(i))).collect();
    let domain = [adjacency.to_vec()];
    let graph = formula_to_composition(&formula, &leaves, &domain)?;
    let reachable = Program::graph(graph.clone())?.accepts(adjacency)?;
    Ok(Savitch { formula, graph, reachable })
}

/// Savitch's recursion as a divide-and-conquer strategy on keys `(l, s, t)`.
pub fn savitch_strategy<'a>(n: usize) -> Strategy<'a, (usize, usize, usize)> {
    Strategy {
        base: Box::new(move |&(l, s, t)| {
            (l == 1).then(|| if s == t { Arc::new(Formula::Const(true)) } else { Formula::var(edge_index(n, s, t)) })
        }),
        split: Box::new(move |&(l, s, t)| Split {
            parts: (0..n).flat_map(|v| [(l / 2, s, v), (l / 2, v, t)]).collect(),
            aux: None,
            combine: Formula::or((0..n).map(|v| Formula::and(vec![Formula::var(2 * v), Formula::var(2 * v + 1)])).collect()),
        }),
    }
}

/// An extended learning graph over `n`-bit inputs.
///
/// Weights are stored per edge and per assignment `z'` to the label of the
/// edge's head, written as a bit string in increasing index order, as the
/// pair `[w(·, e, 0), w(·, e, 1)]`. Missing entries are zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LearningGraph {
    pub n: usize,
    /// Sorted label `S(v)` per vertex.
    pub labels: Vec<Vec<usize>>,
    pub edges: Vec<(usize, usize)>,
    pub weights: Vec<BTreeMap<String, [f64; 2]>>,
    /// Unit flow per positive input, one value per edge.
    pub flows: BTreeMap<String, Vec<f64>>,
}

fn restrict(x: &[u8], s: &[usize]) -> String {
    s.iter().map(|&i| if bit(x, i) { '1' } else { '0' }).collect()
}

/// Certificate status of a partial assignment relative to a finite domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Status {
    Unsatisfiable,
    Positive,
    Negative,
    Open,
}

impl LearningGraph {
    fn root(&self) -> Result<usize> {
        let roots: Vec<usize> = (0..self.labels.len()).filter(|&v| self.labels[v].is_empty()).collect();
        match roots.as_slice() {
            [r] => Ok(*r),
            _ => invalid("a learning graph needs exactly one vertex with an empty label"),
        }
    }

    /// Index added along each edge.
    fn added(&self) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(self.edges.len());
        for &(u, v) in &self.edges {
            if u >= self.labels.len() || v >= self.labels.len() {
                return invalid("edge endpoint out of range");
            }
            let su: BTreeSet<usize> = self.labels[u].iter().copied().collect();
            let sv: BTreeSet<usize> = self.labels[v].iter().copied().collect();
            let extra: Vec<usize> = sv.difference(&su).copied().collect();
            if !su.is_subset(&sv) || extra.len() != 1 || extra[0] >= self.n {
                return invalid(format!("edge ({u}, {v}) does not add exactly one index"));
            }
            out.push(extra[0]);
        }
        Ok(out)
    }

    /// `w(x, e, b)`.
    pub fn weight(&self, x: &[u8], e: usize, b: bool) -> f64 {
        let z = restrict(x, &self.labels[self.edges[e].1]);
        self.weights[e].get(&z).map_or(0.0, |w| w[usize::from(b)])
    }

    fn status(z: &[(usize, bool)], domain: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Status {
        let (mut pos, mut neg) = (false, false);
        for x in domain {
            if z.iter().all(|&(i, b)| bit(x, i) == b) {
                if f(x) {
                    pos = true;
                } else {
                    neg = true;
                }
            }
        }
        match (pos, neg) {
            (false, false) => Status::Unsatisfiable,
            (true, false) => Status::Positive,
            (false, true) => Status::Negative,
            (true, true) => Status::Open,
        }
    }

    fn assignment(&self, v: usize, x: &[u8]) -> Vec<(usize, bool)> {
        self.labels[v].iter().map(|&i| (i, bit(x, i))).collect()
    }

    /// Checks the label structure, weight consistency against `domain` and
    /// the unit flows of all positive inputs.
    pub fn validate(&self, domain: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<()> {
        let root = self.root()?;
        let added = self.added()?;
        if self.weights.len() != self.edges.len() {
            return invalid("one weight table per edge is required");
        }
        for (e, table) in self.weights.iter().enumerate() {
            let len = self.labels[self.edges[e].1].len();
            for (z, w) in table {
                if z.len() != len || !z.bytes().all(|c| c == b'0' || c == b'1') {
                    return invalid(format!("weight key {z:?} on edge {e} is not an assignment to the head label"));
                }
                if w.iter().any(|v| !(*v >= 0.0) || !v.is_finite()) {
                    return invalid(format!("weights on edge {e} must be nonnegative"));
                }
            }
        }
        let (pos, neg): (Vec<&Vec<u8>>, Vec<&Vec<u8>>) = domain.iter().partition(|x| f(x));
        for (e, &(u, _)) in self.edges.iter().enumerate() {
            let j = added[e];
            for x in &neg {
                for y in &pos {
                    if bit(x, j) != bit(y, j) && restrict(x, &self.labels[u]) == restrict(y, &self.labels[u]) {
                        let (a, b) = (self.weight(x, e, false), self.weight(y, e, true));
                        if (a - b).abs() > 1e-12 * a.abs().max(b.abs()).max(1.0) {
                            return Err(Error::Certificate(format!(
                                "weight consistency fails on edge {e}: w(x,e,0) = {a} but w(y,e,1) = {b}"
                            )));
                        }
                    }
                }
            }
        }
        for y in &pos {
            let key = String::from_utf8_lossy(y).into_owned();
            let flow = self.flows.get(&key).ok_or_else(|| Error::Certificate(format!("no flow for positive input {key}")))?;
            if flow.len() != self.edges.len() {
                return invalid(format!("flow for {key} needs one value per edge"));
            }
            let mut net = vec![0.0; self.labels.len()];
            for (e, &(u, v)) in self.edges.iter().enumerate() {
                if !(flow[e] >= 0.0) {
                    return invalid(format!("flow for {key} is negative on edge {e}"));
                }
                if flow[e] > 0.0 && self.weight(y, e, true) == 0.0 {
                    return Err(Error::Certificate(format!("flow for {key} uses edge {e} of zero weight")));
                }
                net[u] -= flow[e];
                net[v] += flow[e];
            }
            for (v, &d) in net.iter().enumerate() {
                let sink = Self::status(&self.assignment(v, y), domain, f) == Status::Positive;
                let expected = if v == root { -1.0 } else { 0.0 };
                if !sink && (d - expected).abs() > 1e-9 {
                    return Err(Error::Certificate(format!("flow for {key} is not conserved at vertex {v}")));
                }
                if sink && v == root && (d + 1.0).abs() > 1e-9 {
                    return Err(Error::Certificate(format!("flow for {key} does not leave the root")));
                }
            }
        }
        Ok(())
    }

    /// `ℓ+(y) = Σ p_y(e)^2 / w(y, e, 1)` for a positive input `y`.
    pub fn ell_plus(&self, y: &[u8]) -> Result<f64> {
        let key = String::from_utf8_lossy(y).into_owned();
        let flow = self.flows.get(&key).ok_or_else(|| Error::UnknownInput(key.clone()))?;
        Ok(flow
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(e, p)| p * p / self.weight(y, e, true))
            .sum())
    }

    /// `ℓ-(x) = Σ w(x, e, 0)` for a negative input `x`.
    pub fn ell_minus(&self, x: &[u8]) -> f64 {
        (0..self.edges.len()).map(|e| self.weight(x, e, false)).sum()
    }
}

/// Learning graph to composition on the vertices `(v, z)` for satisfiable
/// assignments `z` to `S(v)`. Negative certificates are dropped, positive
/// certificates are merged into `t`, and the edge to `(v, z')` adding index
/// `j` carries `[x_j = z'_j] / w(z', e, 1)`.
pub fn learning_graph_to_st(lg: &LearningGraph, domain: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<CompositionGraph> {
    lg.validate(domain, f)?;
    let root = lg.root()?;
    let added = lg.added()?;
    let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
    let mut ids: HashMap<(usize, String), usize> = HashMap::new();
    let mut vertex = |g: &mut CompositionGraph, v: usize, x: &[u8]| -> Option<usize> {
        let z = lg.assignment(v, x);
        match LearningGraph::status(&z, domain, f) {
            Status::Positive => Some(1),
            Status::Negative | Status::Unsatisfiable => None,
            Status::Open => {
                if v == root {
                    return Some(0);
                }
                let key = (v, restrict(x, &lg.labels[v]));
                Some(*ids.entry(key).or_insert_with(|| g.add_vertex()))
            }
        }
    };
    if LearningGraph::status(&[], domain, f) == Status::Positive {
        return Ok(or_compose(&[Program::constant(true)]));
    }
    let mut done: BTreeSet<(usize, String)> = BTreeSet::new();
    for (e, &(u, v)) in lg.edges.iter().enumerate() {
        for x in domain {
            let zp = restrict(x, &lg.labels[v]);
            if !done.insert((e, zp.clone())) {
                continue;
            }
            let (Some(a), Some(b)) = (vertex(&mut g, u, x), vertex(&mut g, v, x)) else { continue };
            if a == b {
                continue;
            }
            let w = lg.weight(x, e, true);
            if w <= 0.0 {
                continue;
            }
            let j = added[e];
            let pred = if bit(x, j) { Predicate::bit(j) } else { Predicate::not_bit(j) };
            g.add_named_edge(format!("e{e}:{zp}"), a, b, Program::trivial(pred).scaled(1.0 / w));
        }
    }
    if g.validate().is_err() {
        return Ok(or_compose(&[Program::constant(false)]));
    }
    Ok(g)
}

/// The learning graph of the parity of two bits: two orders of querying,
/// unit weights and the flow split evenly between them.
pub fn parity2_learning_graph() -> LearningGraph {
    let labels = vec![vec![], vec![0], vec![1], vec![0, 1], vec![0, 1]];
    let edges = vec![(0, 1), (0, 2), (1, 3), (2, 4)];
    let unit = |keys: &[&str]| keys.iter().map(|k| (k.to_string(), [1.0, 1.0])).collect::<BTreeMap<_, _>>();
    let weights = vec![unit(&["0", "1"]), unit(&["0", "1"]), unit(&["00", "01", "10", "11"]), unit(&["00", "01", "10", "11"])];
    let half = vec![0.5; 4];
    let flows = [("01".to_string(), half.clone()), ("10".to_string(), half)].into_iter().collect();
    LearningGraph { n: 2, labels, edges, weights, flows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spanprog::binary_inputs;

    fn leaf(l: Label) -> DecisionTree {
        DecisionTree::leaf(l)
    }

    #[test]
    fn single_query_wdt() {
        let t = DecisionTree::query(0, leaf(Label::Zero), leaf(Label::One));
        let v = wdt_value(&t, &binary_inputs(1));
        assert_eq!((v.plus, v.minus), (1.0, 1.0));
        assert_eq!(optimal_wdt(&t), 1.0);
    }

    #[test]
    fn optimal_wdt_of_full_tree_is_depth() {
        fn full(d: usize, i: usize) -> DecisionTree {
            if d == 0 {
                leaf(Label::One)
            } else {
                DecisionTree::query(i, full(d - 1, i + 1), full(d - 1, i + 1))
            }
        }
        for d in 0..6 {
            assert!((optimal_wdt(&full(d, 0)) - d as f64).abs() < 1e-12);
        }
    }

    #[test]
    fn figure_tree_conversion() {
        // x1 ? 1 : (x2 ? 1 : (x3 ? 1 : 0)) with weights w1..w6.
        let w = [1.5, 2.0, 0.5, 3.0, 1.0, 0.25];
        let t = DecisionTree::weighted(
            0,
            w[1],
            w[0],
            DecisionTree::weighted(1, w[3], w[2], DecisionTree::weighted(2, w[5], w[4], leaf(Label::Zero), leaf(Label::One)), leaf(Label::One)),
            leaf(Label::One),
        );
        let g = tree_to_st(&t).unwrap();
        assert_eq!(g.vertex_count(), 4);
        assert_eq!(g.edge_count(), 5);
        let p = Program::graph(g).unwrap();
        let e = p.evaluate(b"001").unwrap();
        assert!(e.positive && (e.size - (w[1] + w[3] + w[4])).abs() < 1e-12);
    }

    #[test]
    fn or_single_path_guessing() {
        let n = 5;
        let mut t = leaf(Label::Zero);
        for i in (0..n).rev() {
            t = DecisionTree::query(i, t, leaf(Label::One));
        }
        let g = guessing_complexity(&t, &|_| false);
        assert_eq!((g.g, g.t), (1, n));
    }

    #[test]
    fn parity2_learning_graph_shape() {
        let lg = parity2_learning_graph();
        let dom = binary_inputs(2);
        let f = |x: &[u8]| bit(x, 0) != bit(x, 1);
        let g = learning_graph_to_st(&lg, &dom, &f).unwrap();
        assert_eq!(g.vertex_count(), 6);
        assert_eq!(g.edge_count(), 8);
        let p = Program::graph(g).unwrap();
        for x in &dom {
            let e = p.evaluate(x).unwrap();
            assert_eq!(e.positive, f(x));
            if f(x) {
                assert!(e.size <= lg.ell_plus(x).unwrap() + 1e-9);
            } else {
                assert!(e.size <= lg.ell_minus(x) + 1e-9);
            }
        }
        assert_eq!(lg.ell_plus(b"01").unwrap(), 1.0);
        assert_eq!(lg.ell_minus(b"00"), 4.0);
    }

    #[test]
    fn formula_and_or() {
        let leaves: Vec<Program> = (0..4).map(|i| Program::trivial(Predicate::bit(i))).collect();
        let v = Formula::var;
        let phi = Formula::or(vec![Formula::and(vec![v(0), v(1)]), Formula::and(vec![v(2), v(3)])]);
        let dom = binary_inputs(4);
        let g = formula_to_composition(&phi, &leaves, &dom).unwrap();
        let p = Program::graph(g).unwrap();
        let c = complexity_over(&p, &dom).unwrap();
        assert!(c.w_plus * c.w_minus <= 4.0 + 1e-9);
        for x in &dom {
            assert_eq!(p.accepts(x).unwrap(), phi.eval(&|j| bit(x, j)));
        }
    }

    #[test]
    fn savitch_small() {
        let adj = b"0100000100010000";
        assert!(savitch_formula(4, adj, 0, 3).unwrap().reachable);
        let rev = b"0000100001000010";
        assert!(!savitch_formula(4, rev, 0, 3).unwrap().reachable);
        assert!(savitch_formula(2, b"0100", 0, 1).unwrap().reachable);
    }

    #[test]
    fn apportion_sums() {
        assert_eq!(apportion(&[0.5, 0.25, 0.25], 4), vec![2, 1, 1]);
        assert_eq!(apportion(&[1.0 / 3.0; 3], 6), vec![2, 2, 2]);
    }
}
