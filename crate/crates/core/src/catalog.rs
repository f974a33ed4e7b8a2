//! Ready-made compositions: symmetric functions and string problems, each
//! paired with a brute-force oracle.
//!
//! Positions in the constructions below are 1-based in the documentation
//! and 0-based in the inputs, so `[x_j = c]` reads byte `j - 1`.
//!
//! ```
//! use spanflow::catalog::{threshold, threshold_closed_form};
//! use spanflow::graphcomp::Program;
//!
//! let th = Program::graph(threshold(4, 3).unwrap()).unwrap();
//! let e = th.evaluate(b"0111").unwrap();
//! assert!(e.positive && (e.size - 1.0).abs() < 1e-12);
//! assert_eq!(threshold_closed_form(4, 3, 3).size, 1.0);
//! ```

use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graphcomp::{and_compose, or_compose, CompositionGraph, Evaluation, Program};
use crate::spanprog::{Predicate, PAD};

/// Largest input length for which symmetric functions are materialized.
pub const MAX_MATERIALIZED: usize = 16;

fn lit(pos: isize, c: u8) -> Program {
    // `pos` is 1-based; positions before the string never match.
    if pos < 1 {
        Program::constant(false)
    } else {
        Program::trivial(Predicate::equals(pos as usize - 1, c))
    }
}

fn graph(g: CompositionGraph) -> Program {
    Program::graph(g).expect("catalog graphs are well formed")
}

fn or_of(programs: Vec<Program>) -> CompositionGraph {
    if programs.is_empty() {
        or_compose(&[Program::constant(false)])
    } else {
        or_compose(&programs)
    }
}

fn and_of(programs: Vec<Program>) -> Program {
    if programs.is_empty() {
        Program::constant(true)
    } else {
        graph(and_compose(&programs))
    }
}

// ---------------------------------------------------------------------------
// Symmetric functions

/// `Th_n^k`: accepts binary strings of Hamming weight at least `k`.
///
/// Built by `Th^1_S = OR_{j in S} x_j` and
/// `Th^{k+1}_S = OR_{j in S} (x_j AND k Th^k_{S - j})`, sharing the
/// subprogram of every pair `(S, k)`.
pub fn threshold(n: usize, k: usize) -> Result<CompositionGraph> {
    if k < 1 || k > n {
        return Err(Error::Range(format!("threshold needs 1 <= k <= n, got n = {n}, k = {k}")));
    }
    if n > MAX_MATERIALIZED {
        return Err(Error::TooLarge { dim: n, cap: MAX_MATERIALIZED });
    }
    let full = (1u32 << n) - 1;
    let p = threshold_memo(full, k, &mut HashMap::new());
    Ok(p.as_graph().cloned().unwrap_or_else(|| or_compose(&[p])))
}

fn threshold_memo(s: u32, k: usize, memo: &mut HashMap<(u32, usize), Program>) -> Program {
    if k == 0 {
        return Program::constant(true);
    }
    if (s.count_ones() as usize) < k {
        return Program::constant(false);
    }
    if let Some(p) = memo.get(&(s, k)) {
        return p.clone();
    }
    let members: Vec<usize> = (0..32).filter(|j| s >> j & 1 == 1).collect();
    let branches = members
        .iter()
        .map(|&j| {
            let bit = Program::trivial(Predicate::bit(j));
            if k == 1 {
                bit
            } else {
                let rest = threshold_memo(s & !(1 << j), k - 1, memo).scaled((k - 1) as f64);
                graph(and_compose(&[bit, rest]))
            }
        })
        .collect::<Vec<_>>();
    let p = graph(or_compose(&branches));
    memo.insert((s, k), p.clone());
    p
}

/// Threshold over a multiset of programs: accepts when at least `k` of the
/// `Σ m_j` copies accept, where `programs[j] = (Q_j, m_j)`.
///
/// Identical copies give identical parallel branches, and `m` parallel
/// copies of a program compute the same witness sizes as one copy scaled
/// by `1/m`, so the recursion only tracks multiplicity vectors.
pub fn threshold_multiset(programs: &[(Program, usize)], k: usize) -> Result<CompositionGraph> {
    let total: usize = programs.iter().map(|(_, m)| m).sum();
    if k == 0 {
        return Ok(or_compose(&[Program::constant(true)]));
    }
    if programs.is_empty() || k > total {
        return Ok(or_compose(&[Program::constant(false)]));
    }
    let qs: Vec<Program> = programs.iter().map(|(p, _)| p.clone()).collect();
    let m: Vec<usize> = programs.iter().map(|(_, m)| *m).collect();
    let p = multiset_memo(&qs, m, k, &mut HashMap::new());
    Ok(p.as_graph().cloned().unwrap_or_else(|| or_compose(&[p])))
}

fn multiset_memo(qs: &[Program], m: Vec<usize>, k: usize, memo: &mut HashMap<(Vec<usize>, usize), Program>) -> Program {
    if k == 0 {
        return Program::constant(true);
    }
    if m.iter().sum::<usize>() < k {
        return Program::constant(false);
    }
    if let Some(p) = memo.get(&(m.clone(), k)) {
        return p.clone();
    }
    let mut branches = Vec::new();
    for j in 0..qs.len() {
        if m[j] == 0 {
            continue;
        }
        let b = if k == 1 {
            qs[j].clone()
        } else {
            let mut rest = m.clone();
            rest[j] -= 1;
            let sub = multiset_memo(qs, rest, k - 1, memo).scaled((k - 1) as f64);
            graph(and_compose(&[qs[j].clone(), sub]))
        };
        branches.push(if m[j] == 1 { b } else { b.scaled(1.0 / m[j] as f64) });
    }
    let p = graph(or_compose(&branches));
    memo.insert((m, k), p.clone());
    p
}

/// Closed-form witness size of `Th_n^k` on inputs of weight `h`:
/// `1/(h - k + 1)` when `h >= k`, `k(n - k + 1)/(k - h)` otherwise.
pub fn threshold_closed_form(n: usize, k: usize, h: usize) -> Evaluation {
    let (n, k, h) = (n as f64, k as f64, h as f64);
    if h >= k {
        Evaluation { positive: true, size: 1.0 / (h - k + 1.0) }
    } else {
        Evaluation { positive: false, size: k * (n - k + 1.0) / (k - h) }
    }
}

/// `C(Th_n^k) = sqrt(k (n - k + 1))`.
pub fn threshold_complexity(n: usize, k: usize) -> f64 {
    ((k * (n - k + 1)) as f64).sqrt()
}

/// Witness size of the threshold composition on an input of weight `h`,
/// evaluated through the symmetry of the construction: the subprogram for
/// `(S, k)` only depends on `|S|`, `|S ∩ x|` and `k`. This reproduces
/// [`threshold`] exactly and stays polynomial for any `n`.
pub fn threshold_symmetric(n: usize, k: usize, h: usize) -> Evaluation {
    fn go(s: usize, h: usize, k: usize, memo: &mut HashMap<(usize, usize, usize), Evaluation>) -> Evaluation {
        if k == 0 {
            return Evaluation { positive: true, size: 1.0 };
        }
        if s < k {
            return Evaluation { positive: false, size: 1.0 };
        }
        if let Some(e) = memo.get(&(s, h, k)) {
            return *e;
        }
        let one = Evaluation { positive: true, size: 1.0 };
        let zero = Evaluation { positive: false, size: 1.0 };
        let mut branches = Vec::new();
        if k == 1 {
            branches.push((one, h));
            branches.push((zero, s - h));
        } else {
            let scale = |e: Evaluation| scale_eval(e, (k - 1) as f64);
            if h > 0 {
                branches.push((series(&[one, scale(go(s - 1, h - 1, k - 1, memo))]), h));
            }
            if s > h {
                branches.push((series(&[zero, scale(go(s - 1, h, k - 1, memo))]), s - h));
            }
        }
        let e = parallel(&branches);
        memo.insert((s, h, k), e);
        e
    }
    go(n, h.min(n), k, &mut HashMap::new())
}

fn scale_eval(e: Evaluation, a: f64) -> Evaluation {
    Evaluation { positive: e.positive, size: if e.positive { e.size * a } else { e.size / a } }
}

fn series(parts: &[Evaluation]) -> Evaluation {
    if parts.iter().all(|e| e.positive) {
        Evaluation { positive: true, size: parts.iter().map(|e| e.size).sum() }
    } else {
        let g: f64 = parts.iter().filter(|e| !e.positive).map(|e| 1.0 / e.size).sum();
        Evaluation { positive: false, size: 1.0 / g }
    }
}

fn parallel(parts: &[(Evaluation, usize)]) -> Evaluation {
    if parts.iter().any(|(e, m)| e.positive && *m > 0) {
        let g: f64 = parts.iter().filter(|(e, _)| e.positive).map(|(e, m)| *m as f64 / e.size).sum();
        Evaluation { positive: true, size: 1.0 / g }
    } else {
        Evaluation { positive: false, size: parts.iter().map(|(e, m)| *m as f64 * e.size).sum() }
    }
}

/// `EW_n^k`: accepts binary strings of Hamming weight exactly `k`, as the
/// series composition of `k(n - k + 1) Th_n^k` and `NOT Th_n^{k+1}`, where
/// the second factor is left out for `k = n`.
pub fn exact_weight(n: usize, k: usize) -> Result<CompositionGraph> {
    if k > n || n == 0 {
        return Err(Error::Range(format!("exact weight needs 0 <= k <= n, got n = {n}, k = {k}")));
    }
    if n > MAX_MATERIALIZED {
        return Err(Error::TooLarge { dim: n, cap: MAX_MATERIALIZED });
    }
    let full = (1u32 << n) - 1;
    let mut memo = HashMap::new();
    let upper = threshold_memo(full, k + 1, &mut memo).negated();
    if k == 0 {
        return Ok(and_compose(&[upper]));
    }
    let lower = threshold_memo(full, k, &mut memo).scaled((k * (n - k + 1)) as f64);
    if k == n {
        // Th^{n+1} is constant false, so its negation would only add a unit edge.
        return Ok(and_compose(&[lower]));
    }
    Ok(and_compose(&[lower, upper]))
}

/// Closed-form witness size of `EW_n^k` on inputs of weight `h`:
/// `n + 2k(n - k)` when `h = k` and `1/|k - h|` otherwise.
pub fn exact_weight_closed_form(n: usize, k: usize, h: usize) -> Evaluation {
    if h == k {
        Evaluation { positive: true, size: (n + 2 * k * (n - k)) as f64 }
    } else {
        Evaluation { positive: false, size: 1.0 / (k as f64 - h as f64).abs() }
    }
}

/// `C(EW_n^k) = sqrt(n + 2k(n - k))`.
pub fn exact_weight_complexity(n: usize, k: usize) -> f64 {
    ((n + 2 * k * (n - k)) as f64).sqrt()
}

/// The gapped majority on `n` bits (`n` even): the threshold at `k = n/2`,
/// used on the promise that the weight is below `n/3` or above `2n/3`.
pub fn gapped_majority(n: usize) -> Result<CompositionGraph> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Range(format!("gapped majority needs an even n, got {n}")));
    }
    threshold(n, n / 2)
}

/// Whether a weight `h` satisfies the gapped-majority promise on `n` bits.
pub fn gapped_promise(n: usize, h: usize) -> bool {
    3 * h < n || 3 * h > 2 * n
}

// ---------------------------------------------------------------------------
// Pattern matching

/// Smallest `p >= 1` with `y_l = y_{l+p}` for all valid `l`.
pub fn smallest_period(y: &[u8]) -> usize {
    (1..=y.len()).find(|&p| (p..y.len()).all(|l| y[l] == y[l - p])).unwrap_or(y.len().max(1))
}

/// No period `p <= m/2`.
pub fn is_aperiodic(y: &[u8]) -> bool {
    2 * smallest_period(y) > y.len()
}

/// A deterministic sample: 1-based positions `positions` of the pattern
/// and a shift window offset `k`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicSample {
    pub positions: Vec<usize>,
    pub k: usize,
}

/// Checks that agreement with `y` on `positions` at one offset rules out
/// a full match at every other offset `l != 0` with `-k <= l <= m/2 - k`.
pub fn is_deterministic_sample(y: &[u8], sample: &DeterministicSample) -> bool {
    let m = y.len() as isize;
    let k = sample.k as isize;
    (-k..=m / 2 - k).filter(|&l| l != 0).all(|l| {
        sample.positions.iter().any(|&p| {
            let (p, q) = (p as isize, p as isize - l);
            (1..=m).contains(&q) && y[(p - 1) as usize] != y[(q - 1) as usize]
        })
    })
}

fn floor_log2(m: usize) -> usize {
    if m <= 1 {
        0
    } else {
        (usize::BITS - 1 - m.leading_zeros()) as usize
    }
}

fn for_each_subset(m: usize, size: usize, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
    fn rec(start: usize, m: usize, left: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if left == 0 {
            return f(cur);
        }
        for p in start..=m {
            if m - p + 1 < left {
                break;
            }
            cur.push(p);
            if rec(p + 1, m, left - 1, cur, f) {
                return true;
            }
            cur.pop();
        }
        false
    }
    rec(1, m, size, &mut Vec::new(), f)
}

/// Smallest deterministic sample of an aperiodic pattern with at most
/// `floor(log2 m)` positions, by exhaustive search in increasing size.
pub fn deterministic_sample(y: &[u8]) -> Result<DeterministicSample> {
    if y.is_empty() || !is_aperiodic(y) {
        return invalid("deterministic samples exist for nonempty aperiodic patterns only");
    }
    let m = y.len();
    for size in 0..=floor_log2(m) {
        let mut found = None;
        for_each_subset(m, size, &mut |j| {
            for k in 0..=m / 2 {
                let s = DeterministicSample { positions: j.to_vec(), k };
                if is_deterministic_sample(y, &s) {
                    found = Some(s);
                    return true;
                }
            }
            false
        });
        if let Some(s) = found {
            return Ok(s);
        }
    }
    Err(Error::Certificate(format!("no sample of size <= log2(m) for {}", String::from_utf8_lossy(y))))
}

/// Which construction [`pattern_matching`] chose.
#[derive(Clone, Debug, Serialize)]
pub struct PatternMatching {
    #[serde(skip)]
    pub graph: CompositionGraph,
    /// Smallest period when it is at most `m/2`.
    pub period: Option<usize>,
    /// Sample of the pattern, or of one period in the periodic case.
    pub sample: Vec<usize>,
    /// Candidate start positions, 1-based.
    pub candidates: Vec<usize>,
}

fn sample_for(y: &[u8]) -> Vec<usize> {
    // A period that is itself periodic has no short sample; checking every
    // position keeps the construction correct.
    deterministic_sample(y).map(|s| s.positions).unwrap_or_else(|_| (1..=y.len()).collect())
}

/// Composition deciding whether `y` occurs in `x in Σ^n`.
///
/// Aperiodic `y`: OR over start positions `i` of the sample check followed by
/// the full check with weights `1/m`. Periodic `y` with period `p` and
/// `k = ceil(m/p)`: for start positions in the windows `{jm+1, ..., jm+2p}`,
/// find one period and walk back over earlier periods, branching to a suffix
/// check at the first period that fails.
pub fn pattern_matching(n: usize, y: &[u8]) -> Result<PatternMatching> {
    let m = y.len();
    if m == 0 || m > n {
        return Err(Error::Range(format!("pattern length {m} must be in 1..={n}")));
    }
    if y.contains(&PAD) {
        return invalid("pattern contains the padding symbol");
    }
    let p = smallest_period(y);
    if 2 * p > m {
        let sample = sample_for(y);
        let candidates: Vec<usize> = (1..=n - m + 1).collect();
        let branches = candidates
            .iter()
            .map(|&i| {
                let ii = i as isize;
                let mut edges: Vec<Program> = sample.iter().map(|&j| lit(ii + j as isize - 1, y[j - 1])).collect();
                edges.extend((1..=m).map(|j| lit(ii + j as isize - 1, y[j - 1]).scaled(1.0 / m as f64)));
                and_of(edges)
            })
            .collect();
        return Ok(PatternMatching { graph: or_of(branches), period: None, sample, candidates });
    }
    let ybar = &y[..p];
    let k = m.div_ceil(p);
    let sample = sample_for(ybar);
    let padded = n.div_ceil(m) * m;
    let mut candidates = Vec::new();
    for block in 0..padded / m {
        for i in block * m + 1..=block * m + 2 * p {
            if i + p - 1 <= n && !candidates.contains(&i) {
                candidates.push(i);
            }
        }
    }
    let period = |i: isize| and_of((1..=p).map(|r| lit(i + r as isize - 1, ybar[r - 1]).scaled(1.0 / p as f64)).collect());
    let suffix = |i: isize, l: usize| and_of((0..l).map(|r| lit(i + r as isize, y[m - l + r]).scaled(1.0 / m as f64)).collect());
    let branches = candidates
        .iter()
        .map(|&i| {
            let ii = i as isize;
            let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
            let ds = and_of(sample.iter().map(|&j| lit(ii + j as isize - 1, ybar[j - 1])).collect());
            let a1 = g.add_vertex();
            g.add_edge(0, a1, ds);
            let mut prev = g.add_vertex();
            g.add_edge(a1, prev, period(ii));
            for j in 1..k {
                let back = ii - (j * p) as isize;
                let next = if j + 1 == k { 1 } else { g.add_vertex() };
                g.add_edge(prev, next, period(back).scaled(1.0 / k as f64));
                let b = g.add_vertex();
                g.add_edge(prev, b, period(back).scaled(p as f64).negated());
                g.add_edge(b, 1, suffix(ii + p as isize, m - j * p));
                prev = next;
            }
            graph(g)
        })
        .collect();
    Ok(PatternMatching { graph: or_of(branches), period: Some(p), sample, candidates })
}

/// Naive substring oracle.
pub fn contains_pattern(x: &[u8], y: &[u8]) -> bool {
    y.is_empty() || x.windows(y.len()).any(|w| w == y)
}

// ---------------------------------------------------------------------------
// OR of pSEARCH

/// OR∘pSEARCH over `m` blocks of `n` symbols from `{0, 1, *}`: per block a
/// chain of `(1/j)[x_j = *]` for `j < n`, with an edge `[x_j = 1]` to `t`
/// from the chain vertex before position `j`.
pub fn or_psearch(n: usize, m: usize) -> Result<CompositionGraph> {
    if n == 0 || m == 0 {
        return Err(Error::Range("OR∘pSEARCH needs n, m >= 1".into()));
    }
    let blocks = (0..m)
        .map(|b| {
            let off = (b * n) as isize;
            let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
            let mut at = 0;
            for j in 1..=n {
                g.add_edge(at, 1, lit(off + j as isize, b'1'));
                if j < n {
                    let next = g.add_vertex();
                    g.add_edge(at, next, lit(off + j as isize, b'*').scaled(1.0 / j as f64));
                    at = next;
                }
            }
            graph(g)
        })
        .collect();
    Ok(or_of(blocks))
}

/// The unique non-`*` position (1-based) of every block, when the input is
/// in the pSEARCH domain.
pub fn psearch_offsets(x: &[u8], n: usize) -> Option<Vec<usize>> {
    x.chunks(n)
        .map(|b| {
            let hits: Vec<usize> = (0..b.len()).filter(|&j| b[j] != b'*').collect();
            (hits.len() == 1).then(|| hits[0] + 1)
        })
        .collect()
}

/// Brute-force OR of the hidden bits.
pub fn or_psearch_oracle(x: &[u8], n: usize) -> bool {
    x.chunks(n).any(|b| b.contains(&b'1'))
}

/// A random promise instance: every block has one non-`*` symbol, at most
/// one of which is `1`.
pub fn random_psearch_instance(rng: &mut impl Rng, n: usize, m: usize, positive: bool) -> Vec<u8> {
    let hot = positive.then(|| rng.gen_range(0..m));
    let mut x = vec![b'*'; n * m];
    for b in 0..m {
        let j = rng.gen_range(0..n);
        x[b * n + j] = if Some(b) == hot { b'1' } else { b'0' };
    }
    x
}

// ---------------------------------------------------------------------------
// Σ*20*2Σ*

/// `Σ*20*2Σ*` over `{0, 1, 2}`: for each `i < n` an edge `[x_i = 2]` from
/// `s`, a chain of `(1/j)[x_{i+j} = 0]` and edges `[x_{i+j} = 2]` to `t`.
pub fn sigma202(n: usize) -> Result<CompositionGraph> {
    if n == 0 {
        return Err(Error::Range("Σ*20*2Σ* needs n >= 1".into()));
    }
    let branches = (1..n)
        .map(|i| {
            let ii = i as isize;
            let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
            let mut at = g.add_vertex();
            g.add_edge(0, at, lit(ii, b'2'));
            for j in 1..=n - i {
                g.add_edge(at, 1, lit(ii + j as isize, b'2'));
                if j < n - i {
                    let next = g.add_vertex();
                    g.add_edge(at, next, lit(ii + j as isize, b'0').scaled(1.0 / j as f64));
                    at = next;
                }
            }
            graph(g)
        })
        .collect();
    Ok(or_of(branches))
}

/// Scan oracle for `Σ*20*2Σ*`.
pub fn sigma202_oracle(x: &[u8]) -> bool {
    let mut open = false;
    for &c in x {
        match c {
            b'2' if open => return true,
            b'2' => open = true,
            b'0' => {}
            _ => open = false,
        }
    }
    false
}

// ---------------------------------------------------------------------------
// Dyck languages

const OPEN: u8 = b'(';
const CLOSE: u8 = b')';

/// Counter-scan oracle: balanced with every prefix depth in `0..=depth`.
pub fn dyck_oracle(x: &[u8], depth: usize) -> bool {
    let mut w: isize = 0;
    for &c in x {
        w += if c == OPEN { 1 } else { -1 };
        if w < 0 || w > depth as isize {
            return false;
        }
    }
    w == 0
}

/// The four conditions characterizing strings outside the depth-3 Dyck
/// language, evaluated directly on `x` (1-based positions).
pub fn dyck3_conditions(x: &[u8]) -> [bool; 4] {
    let n = x.len();
    let at = |q: usize| x[q - 1];
    let alt = |q: usize, sym: u8, parity: usize| (at(q) == sym) == (q % 2 == parity);
    let c1 = (1..=n).any(|j| j % 2 == 1 && at(j) == CLOSE && (1..j).all(|k| alt(k, CLOSE, 0)));
    let c2 = (1..=n).any(|j| j % 2 == 0 && at(j) == OPEN && (j + 1..=n).all(|k| alt(k, OPEN, 1)));
    let c3 = (1..=n).any(|j| {
        (j + 1..n).any(|k| {
            j % 2 == 0 && k % 2 == 1 && at(j) == OPEN && at(k + 1) == OPEN && (j + 1..=k).all(|l| alt(l, OPEN, 1))
        })
    });
    let c4 = (1..=n).any(|j| {
        (j + 1..n).any(|k| {
            j % 2 == 1 && k % 2 == 0 && at(j) == CLOSE && at(k + 1) == CLOSE && (j + 1..=k).all(|l| alt(l, CLOSE, 0))
        })
    });
    [c1, c2, c3, c4]
}

/// Position and symbol maps for the mirror image: reverse and swap brackets.
#[derive(Clone, Copy)]
struct View {
    n: usize,
    mirror: bool,
}

impl View {
    fn lit(&self, q: isize, c: u8) -> Program {
        if self.mirror {
            let swapped = if c == OPEN { CLOSE } else { OPEN };
            lit(self.n as isize + 1 - q, swapped)
        } else {
            lit(q, c)
        }
    }
}

/// Condition 1 (condition 2 in the mirror): alternating `()` pairs with
/// weight `1/i` on pair `i` and an edge `[x_{2i+1} = )]` to `t` after it.
fn dyck3_prefix(v: View) -> Program {
    let n = v.n;
    let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
    let mut at = 0;
    for i in 0..=(n - 2) / 2 {
        if i > 0 {
            let w = 1.0 / i as f64;
            let mid = g.add_vertex();
            let next = g.add_vertex();
            g.add_edge(at, mid, v.lit((2 * i - 1) as isize, OPEN).scaled(w));
            g.add_edge(mid, next, v.lit((2 * i) as isize, CLOSE).scaled(w));
            at = next;
        }
        g.add_edge(at, 1, v.lit((2 * i + 1) as isize, CLOSE));
    }
    graph(g)
}

/// Condition 3 (condition 4 in the mirror): OR over even `j <= n - 2` of
/// `[x_j = (][x_{j+1} = (]`, then pairs `)(` with weight `1/r` and an edge
/// `[x_{j+2r+2} = (]` to `t` after pair `r`.
fn dyck3_inner(v: View) -> Program {
    let n = v.n;
    let branches: Vec<Program> = (2..=n.saturating_sub(2))
        .step_by(2)
        .map(|j| {
            let jj = j as isize;
            let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
            let u = g.add_vertex();
            let mut at = g.add_vertex();
            g.add_edge(0, u, v.lit(jj, OPEN));
            g.add_edge(u, at, v.lit(jj + 1, OPEN));
            for r in 0..=(n - 2 - j) / 2 {
                if r > 0 {
                    let w = 1.0 / r as f64;
                    let mid = g.add_vertex();
                    let next = g.add_vertex();
                    g.add_edge(at, mid, v.lit(jj + 2 * r as isize, CLOSE).scaled(w));
                    g.add_edge(mid, next, v.lit(jj + 2 * r as isize + 1, OPEN).scaled(w));
                    at = next;
                }
                g.add_edge(at, 1, v.lit(jj + 2 * r as isize + 2, OPEN));
            }
            graph(g)
        })
        .collect();
    if branches.is_empty() {
        Program::constant(false)
    } else {
        graph(or_compose(&branches))
    }
}

/// Dyck language recognition of depth 1, 2 or 3 on strings of even length `n`.
pub fn dyck(n: usize, depth: usize) -> Result<CompositionGraph> {
    if n == 0 || n % 2 == 1 {
        return Err(Error::Range(format!("Dyck recognition needs an even n >= 2, got {n}")));
    }
    match depth {
        1 => Ok(and_compose(&(1..=n).map(|q| lit(q as isize, if q % 2 == 1 { OPEN } else { CLOSE })).collect::<Vec<_>>())),
        2 => {
            let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
            let mut at = g.add_vertex();
            g.add_edge(0, at, lit(1, OPEN));
            for i in 1..n / 2 {
                let q = (2 * i) as isize;
                let next = g.add_vertex();
                for (a, b) in [(CLOSE, OPEN), (OPEN, CLOSE)] {
                    let mid = g.add_vertex();
                    g.add_edge(at, mid, lit(q, a));
                    g.add_edge(mid, next, lit(q + 1, b));
                }
                at = next;
            }
            g.add_edge(at, 1, lit(n as isize, CLOSE));
            Ok(g)
        }
        3 => {
            let fwd = View { n, mirror: false };
            let bwd = View { n, mirror: true };
            let parts = [dyck3_prefix(fwd), dyck3_prefix(bwd), dyck3_inner(fwd), dyck3_inner(bwd)];
            Ok(and_compose(&parts.map(|p| p.negated())))
        }
        _ => Err(Error::Range(format!("Dyck depth {depth} is not supported"))),
    }
}

// ---------------------------------------------------------------------------
// 3-increasing subsequence

fn less(a: usize, b: usize) -> Program {
    Program::trivial(Predicate::less(a - 1, b - 1))
}

/// 3-increasing subsequence detection: for each start `j`, an edge
/// `[x_j < x_{j+1}]`, a chain of descents `(1/r)[x_{j+r} >= x_{j+r+1}]`, and
/// at chain vertex `r` an ascent `[x_{j+r} < x_{j+r+1}]` followed by the
/// middle search `OR_l [x_j < x_l][x_l < x_{j+r+1}]`.
pub fn inc_subseq_3(n: usize) -> Result<CompositionGraph> {
    if n == 0 {
        return Err(Error::Range("3-IS needs n >= 1".into()));
    }
    let middle = |j: usize, k: usize| graph(or_compose(&(j + 1..k).map(|l| graph(and_compose(&[less(j, l), less(l, k)]))).collect::<Vec<_>>()));
    let branches = (1..=n.saturating_sub(2))
        .map(|j| {
            let mut g = CompositionGraph::with_names(vec!["s".into(), "t".into()], 0, 1);
            let mut at = g.add_vertex();
            g.add_edge(0, at, less(j, j + 1));
            for r in 1..n - j {
                let b = g.add_vertex();
                g.add_edge(at, b, less(j + r, j + r + 1));
                g.add_edge(b, 1, middle(j, j + r + 1));
                if r + 1 < n - j {
                    let next = g.add_vertex();
                    g.add_edge(at, next, Program::trivial(Predicate::less(j + r - 1, j + r).not()).scaled(1.0 / r as f64));
                    at = next;
                }
            }
            graph(g)
        })
        .collect();
    Ok(or_of(branches))
}

/// All 3-increasing subsequences of minimal extent (1-based triples).
pub fn minimal_increasing_triples(x: &[u8]) -> Vec<(usize, usize, usize)> {
    let n = x.len();
    let mut best = usize::MAX;
    let mut out = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if x[i] >= x[j] {
                continue;
            }
            for k in j + 1..n {
                if x[j] < x[k] {
                    let ext = k - i;
                    if ext < best {
                        best = ext;
                        out.clear();
                    }
                    if ext == best {
                        out.push((i + 1, j + 1, k + 1));
                    }
                }
            }
        }
    }
    out
}

/// Brute-force triple search.
pub fn inc_subseq_3_oracle(x: &[u8]) -> bool {
    !minimal_increasing_triples(x).is_empty()
}

/// Structure of a minimal-extent triple `(i, j, k)`: an ascent at `i`, an
/// ascent into `k`, and descents at every `l` in `[i+1, k-2]`.
pub fn minimal_extent_structure(x: &[u8], (i, _, k): (usize, usize, usize)) -> bool {
    let at = |q: usize| x[q - 1];
    at(i) < at(i + 1) && at(k - 1) < at(k) && (i + 1..=k.saturating_sub(2)).all(|l| at(l) >= at(l + 1))
}

// ---------------------------------------------------------------------------
// Problem descriptions

/// A catalog instance, as read from JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "problem", rename_all = "kebab-case")]
pub enum ProblemSpec {
    Threshold { n: usize, k: usize },
    ExactWeight { n: usize, k: usize },
    GappedMajority { n: usize },
    PatternMatching { n: usize, pattern: String },
    OrPsearch { n: usize, m: usize },
    Sigma202 { n: usize },
    Dyck { n: usize, depth: usize },
    IncSubseq3 { n: usize },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<CompositionGraph> {
        match self {
            ProblemSpec::Threshold { n, k } => threshold(*n, *k),
            ProblemSpec::ExactWeight { n, k } => exact_weight(*n, *k),
            ProblemSpec::GappedMajority { n } => gapped_majority(*n),
            ProblemSpec::PatternMatching { n, pattern } => Ok(pattern_matching(*n, pattern.as_bytes())?.graph),
            ProblemSpec::OrPsearch { n, m } => or_psearch(*n, *m),
            ProblemSpec::Sigma202 { n } => sigma202(*n),
            ProblemSpec::Dyck { n, depth } => dyck(*n, *depth),
            ProblemSpec::IncSubseq3 { n } => inc_subseq_3(*n),
        }
    }

    /// Brute-force value of the function.
    pub fn oracle(&self, x: &[u8]) -> bool {
        let weight = || x.iter().filter(|&&c| c == b'1').count();
        match self {
            ProblemSpec::Threshold { k, .. } => weight() >= *k,
            ProblemSpec::ExactWeight { k, .. } => weight() == *k,
            ProblemSpec::GappedMajority { n } => 2 * weight() >= *n,
            ProblemSpec::PatternMatching { pattern, .. } => contains_pattern(x, pattern.as_bytes()),
            ProblemSpec::OrPsearch { n, .. } => or_psearch_oracle(x, *n),
            ProblemSpec::Sigma202 { .. } => sigma202_oracle(x),
            ProblemSpec::Dyck { depth, .. } => dyck_oracle(x, *depth),
            ProblemSpec::IncSubseq3 { .. } => inc_subseq_3_oracle(x),
        }
    }

    /// Input length.
    pub fn len(&self) -> usize {
        match self {
            ProblemSpec::OrPsearch { n, m } => n * m,
            ProblemSpec::Threshold { n, .. }
            | ProblemSpec::ExactWeight { n, .. }
            | ProblemSpec::GappedMajority { n }
            | ProblemSpec::PatternMatching { n, .. }
            | ProblemSpec::Sigma202 { n }
            | ProblemSpec::Dyck { n, .. }
            | ProblemSpec::IncSubseq3 { n } => *n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Input alphabet.
    pub fn alphabet(&self) -> Vec<u8> {
        match self {
            ProblemSpec::PatternMatching { pattern, .. } => {
                let mut a: Vec<u8> = pattern.bytes().chain(*b"01").collect();
                a.sort_unstable();
                a.dedup();
                a
            }
            ProblemSpec::OrPsearch { .. } => b"01*".to_vec(),
            ProblemSpec::Sigma202 { .. } => b"012".to_vec(),
            ProblemSpec::Dyck { .. } => b"()".to_vec(),
            ProblemSpec::IncSubseq3 { .. } => b"01234567".to_vec(),
            _ => b"01".to_vec(),
        }
    }

    /// Whether `x` satisfies the promise of the problem.
    pub fn in_domain(&self, x: &[u8]) -> bool {
        match self {
            ProblemSpec::GappedMajority { n } => gapped_promise(*n, x.iter().filter(|&&c| c == b'1').count()),
            ProblemSpec::OrPsearch { n, .. } => psearch_offsets(x, *n).is_some_and(|_| x.iter().filter(|&&c| c == b'1').count() <= 1),
            _ => true,
        }
    }
}

/// All strings of length `n` over `alphabet`, in lexicographic order.
pub fn all_strings(alphabet: &[u8], n: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::with_capacity(n)];
    for _ in 0..n {
        out = out
            .into_iter()
            .flat_map(|s| {
                alphabet.iter().map(move |&c| {
                    let mut t = s.clone();
                    t.push(c);
                    t
                })
            })
            .collect();
    }
    out
}
