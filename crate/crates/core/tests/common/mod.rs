//! Oracles shared by the integration tests. Nothing here calls the solvers
//! under test: witnesses come from pivoted Gram-Schmidt and a QR solve,
//! reachability from breadth-first search, and symmetric functions from
//! their closed forms.

#![allow(dead_code)]

use std::collections::{BTreeMap, VecDeque};

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use spanflow::spanprog::{InputSpaces, SpanProgram};

/// Orthonormal basis of the column space, by modified Gram-Schmidt with
/// column pivoting and one reorthogonalisation pass.
pub fn col_basis(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let scale = (0..n).map(|j| a.column(j).norm()).fold(0.0, f64::max);
    let mut rest: Vec<DVector<f64>> = (0..n).map(|j| a.column(j).into_owned()).collect();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    while !rest.is_empty() {
        let (best, norm) = rest.iter().enumerate().map(|(i, v)| (i, v.norm())).fold((0, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if norm <= 1e-10 * scale.max(1.0) {
            break;
        }
        let mut q = rest.swap_remove(best);
        for b in &basis {
            q -= b * b.dot(&q);
        }
        let qn = q.norm();
        if qn <= 1e-10 * scale.max(1.0) {
            continue;
        }
        q /= qn;
        for v in rest.iter_mut() {
            *v -= &q * q.dot(v);
        }
        basis.push(q);
    }
    DMatrix::from_fn(m, basis.len(), |r, c| basis[c][r])
}

/// Least-norm least-squares solution of `a c = b`: restrict `c` to the row
/// space of `a`, where the system has full column rank, and solve by QR.
fn least_norm(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let rows = col_basis(&a.transpose());
    if rows.ncols() == 0 {
        return DVector::zeros(a.ncols());
    }
    let reduced = a * &rows;
    let qr = reduced.qr();
    let z = qr.r().solve_upper_triangular(&(qr.q().transpose() * b)).expect("full column rank");
    rows * z
}

fn proj(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}

/// Oracle witness size of a span program given by `H(x)` generators,
/// `K` generators and `w0`.
///
/// Positive: `min ||w0 + K c||^2` subject to `(I - Π_H)(w0 + K c) = 0`,
/// which with orthonormal `K` is `||w0||^2 + ||c||^2` at the least-norm
/// `c`. Negative: `1 / ||Π_{(H + K)^⊥} w0||^2`.
pub fn oracle_witness(h: &DMatrix<f64>, k: &DMatrix<f64>, w0: &DVector<f64>) -> (bool, f64) {
    let d = w0.len();
    let hb = col_basis(h);
    let kb = col_basis(k);
    let q = DMatrix::identity(d, d) - proj(&hb);
    let both = col_basis(&{
        let mut m = DMatrix::zeros(d, hb.ncols() + kb.ncols());
        m.columns_mut(0, hb.ncols()).copy_from(&hb);
        m.columns_mut(hb.ncols(), kb.ncols()).copy_from(&kb);
        m
    });
    let outside = (DMatrix::identity(d, d) - proj(&both)) * w0;
    if outside.norm() > 1e-8 * w0.norm() {
        return (false, 1.0 / outside.norm_squared());
    }
    let qk = &q * &kb;
    let rhs = -(&q * w0);
    let c = if qk.ncols() == 0 { DVector::zeros(0) } else { least_norm(&qk, &rhs) };
    (true, w0.norm_squared() + c.norm_squared())
}

/// A random dense program on `dim` dimensions over the inputs `"0".."{m-1}"`.
pub fn random_dense(rng: &mut impl Rng, dim: usize, inputs: usize) -> (SpanProgram, Vec<Vec<u8>>) {
    let k_cols = rng.gen_range(0..dim);
    let k = DMatrix::from_fn(dim, k_cols, |_, _| rng.gen_range(-1.0..1.0));
    let raw = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
    let kb = col_basis(&k);
    let mut w0 = &raw - proj(&kb) * &raw;
    if w0.norm() < 1e-3 {
        w0 = DVector::from_fn(dim, |i, _| if i == 0 { 1.0 } else { 0.0 });
        w0 -= proj(&kb) * w0.clone();
    }
    let mut table = BTreeMap::new();
    let mut labels = Vec::new();
    for i in 0..inputs {
        let cols = rng.gen_range(0..=dim);
        let label = vec![b'0' + i as u8];
        table.insert(label.clone(), DMatrix::from_fn(dim, cols, |_, _| rng.gen_range(-1.0..1.0)));
        labels.push(label);
    }
    (SpanProgram::new(dim, w0, k, InputSpaces::Table(table)).expect("valid program"), labels)
}

/// Closed-form threshold witness sizes on an input of weight `h`.
pub fn threshold_oracle(n: usize, k: usize, h: usize) -> (bool, f64) {
    let (n, k, h) = (n as f64, k as f64, h as f64);
    if h >= k {
        (true, 1.0 / (h - k + 1.0))
    } else {
        (false, k * (n - k + 1.0) / (k - h))
    }
}

/// Breadth-first reachability on a row-major 0/1 adjacency string.
pub fn bfs(adj: &[u8], n: usize, s: usize, t: usize) -> bool {
    let mut seen = vec![false; n];
    let mut q = VecDeque::from([s]);
    seen[s] = true;
    while let Some(u) = q.pop_front() {
        for v in 0..n {
            if adj[u * n + v] == b'1' && !seen[v] {
                seen[v] = true;
                q.push_back(v);
            }
        }
    }
    seen[t]
}

/// Effective resistance by Gaussian elimination on the grounded Laplacian.
pub fn grounded_resistance(n: usize, edges: &[(usize, usize, f64)], s: usize, t: usize) -> f64 {
    let mut l = DMatrix::<f64>::zeros(n, n);
    for &(u, v, r) in edges {
        if u == v {
            continue;
        }
        let c = 1.0 / r;
        l[(u, u)] += c;
        l[(v, v)] += c;
        l[(u, v)] -= c;
        l[(v, u)] -= c;
    }
    let keep: Vec<usize> = (0..n).filter(|&v| v != t).collect();
    let lr = DMatrix::from_fn(keep.len(), keep.len(), |i, j| l[(keep[i], keep[j])]);
    let mut b = DVector::zeros(keep.len());
    b[keep.iter().position(|&v| v == s).expect("s != t")] = 1.0;
    let x = lr.lu().solve(&b).expect("connected network");
    x[keep.iter().position(|&v| v == s).expect("s != t")]
}

/// The ladder with `rungs` rungs: two rails `a_0..a_r` and `b_0..b_r`
/// joined by rungs `a_i b_i`, with edges as `(tail, head)`.
pub fn ladder(rungs: usize) -> (usize, Vec<(usize, usize)>) {
    let a = |i: usize| 2 * i;
    let b = |i: usize| 2 * i + 1;
    let mut edges = Vec::new();
    for i in 0..rungs {
        edges.push((a(i), b(i)));
        if i + 1 < rungs {
            edges.push((a(i), a(i + 1)));
            edges.push((b(i), b(i + 1)));
        }
    }
    (2 * rungs, edges)
}

/// Least-squares fit `y = a + b x`, with the coefficient of determination.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> (f64, f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let r2 = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    (a, b, r2)
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
