//! Dense linear algebra helpers shared by every module.
//!
//! Ranks are decided by singular values with a threshold relative to the
//! largest one, so all subspace operations agree on what counts as zero.
//! Singular values come from a one-sided Jacobi iteration ([`svd`]): the
//! bidiagonal SVD of nalgebra 0.35 loses accuracy on some rank-deficient
//! matrices, and every witness size here is a rank decision followed by a
//! least-squares solve.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Relative singular-value threshold used for every rank decision.
pub const RANK_RTOL: f64 = 1e-9;
const RANK_ATOL: f64 = 1e-13;

fn threshold(max_sv: f64) -> f64 {
    (RANK_RTOL * max_sv).max(RANK_ATOL)
}

/// Thin singular value decomposition `a = u diag(s) v^T`, singular values
/// in decreasing order. Columns of `u` belonging to zero singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: DMatrix<f64>,
    pub s: Vec<f64>,
    pub v: DMatrix<f64>,
}

const JACOBI_SWEEPS: usize = 80;

/// One-sided Jacobi SVD: rotates column pairs of `a` until they are
/// orthogonal to working precision, accumulating the rotations in `v`.
pub fn svd(a: &DMatrix<f64>) -> Svd {
    let (m, n) = a.shape();
    if m < n {
        let t = svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let mut u = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _ in 0..JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = u.column(p).norm_squared();
                let beta = u.column(q).norm_squared();
                let gamma = u.column(p).dot(&u.column(q));
                if gamma == 0.0 || gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for mat in [&mut u, &mut v] {
                    for i in 0..mat.nrows() {
                        let (xp, xq) = (mat[(i, p)], mat[(i, q)]);
                        mat[(i, p)] = c * xp - s * xq;
                        mat[(i, q)] = s * xp + c * xq;
                    }
                }
            }
        }
        if !rotated {
            break;
        }
    }
    let norms: Vec<f64> = (0..n).map(|j| u.column(j).norm()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let s: Vec<f64> = order.iter().map(|&j| norms[j]).collect();
    let u = DMatrix::from_fn(m, n, |r, c| {
        let j = order[c];
        if norms[j] > 0.0 {
            u[(r, j)] / norms[j]
        } else {
            0.0
        }
    });
    let v = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Svd { u, s, v }
}

fn rank_of(s: &[f64]) -> usize {
    let tol = threshold(s.first().copied().unwrap_or(0.0));
    s.iter().take_while(|&&x| x > tol).count()
}

/// Orthonormal basis of the column space of `a`.
pub fn orth(a: &DMatrix<f64>) -> DMatrix<f64> {
    let (m, n) = a.shape();
    if n == 0 || m == 0 {
        return DMatrix::zeros(m, 0);
    }
    let d = svd(a);
    let r = rank_of(&d.s);
    d.u.columns(0, r).into_owned()
}

/// Numerical rank of `a`.
pub fn rank(a: &DMatrix<f64>) -> usize {
    orth(a).ncols()
}

/// Orthonormal basis of the orthogonal complement of the span of the
/// orthonormal columns `q` inside `R^dim`.
pub fn complement(q: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if q.ncols() == 0 {
        return DMatrix::identity(dim, dim);
    }
    if q.ncols() >= dim {
        return DMatrix::zeros(dim, 0);
    }
    let p = DMatrix::identity(dim, dim) - q * q.transpose();
    let eig = SymmetricEigen::new(p);
    let keep: Vec<usize> = (0..dim).filter(|&i| eig.eigenvalues[i] > 0.5).collect();
    let basis = DMatrix::from_fn(dim, keep.len(), |r, c| eig.eigenvectors[(r, keep[c])]);
    // Eigenvectors of a projector with a degenerate spectrum are only
    // orthonormal up to rounding; one more pass cleans that up.
    orth(&basis)
}

/// Orthonormal basis of the null space `{x : a x = 0}`.
pub fn null_space(a: &DMatrix<f64>) -> DMatrix<f64> {
    complement(&orth(&a.transpose()), a.ncols())
}

/// Orthogonal projector onto the span of orthonormal columns `q`.
pub fn projector(q: &DMatrix<f64>) -> DMatrix<f64> {
    q * q.transpose()
}

/// Projection of `v` onto the span of the orthonormal columns `q`.
pub fn project(q: &DMatrix<f64>, v: &DVector<f64>) -> DVector<f64> {
    if q.ncols() == 0 {
        return DVector::zeros(v.len());
    }
    q * (q.transpose() * v)
}

/// Reflection `2QQ^T - I` through the span of orthonormal columns `q`.
pub fn reflection(q: &DMatrix<f64>) -> DMatrix<f64> {
    let n = q.nrows();
    projector(q) * 2.0 - DMatrix::identity(n, n)
}

/// Minimum-norm least-squares solution of `a x = b`.
pub fn min_norm_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let (m, n) = a.shape();
    if n == 0 || m == 0 {
        return DVector::zeros(n);
    }
    let d = svd(a);
    let mut x = DVector::zeros(n);
    for j in 0..rank_of(&d.s) {
        let coef = d.u.column(j).dot(b) / d.s[j];
        x += d.v.column(j) * coef;
    }
    x
}

/// Horizontal concatenation of matrices with a common row count.
pub fn hstack(rows: usize, blocks: &[&DMatrix<f64>]) -> DMatrix<f64> {
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let mut c = 0;
    for b in blocks {
        assert_eq!(b.nrows(), rows, "hstack row mismatch");
        out.view_mut((0, c), (rows, b.ncols())).copy_from(*b);
        c += b.ncols();
    }
    out
}

/// Block-diagonal matrix from a list of blocks.
pub fn block_diag(blocks: &[DMatrix<f64>]) -> DMatrix<f64> {
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = DMatrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.view_mut((r, c), b.shape()).copy_from(b);
        r += b.nrows();
        c += b.ncols();
    }
    out
}

/// Spectral (operator 2-) norm.
pub fn op_norm(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0.0;
    }
    svd(a).s[0]
}

/// Relative difference `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn jacobi_svd_rank_one_recomposes() {
        let a = DMatrix::from_row_slice(
            4,
            3,
            &[
                0.003542375603636627, -0.018532232183133435, -0.0081077833768336,
                0.12980729163688537, -0.6790976273686341, -0.29710271272329847,
                -0.07170134902235704, 0.37511156258017764, 0.1641099281237064,
                0.07938879528728393, -0.41532907619751314, -0.18170494232070103,
            ],
        );
        let d = svd(&a);
        assert!((d.s[0] - 0.975353585).abs() < 1e-8);
        assert_eq!(rank(&a), 1);
        let recomposed = &d.u * DMatrix::from_diagonal(&DVector::from_vec(d.s.clone())) * d.v.transpose();
        assert!((recomposed - a).norm() < 1e-12);
    }

    #[test]
    fn orth_drops_dependent_columns() {
        let a = DMatrix::from_row_slice(3, 3, &[1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 1.0, 2.0, 3.0]);
        assert_eq!(rank(&a), 1);
    }

    #[test]
    fn null_space_is_annihilated() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, -1.0, 0.0, 2.0, 0.0, 1.0, 1.0, 1.0]);
        let n = null_space(&a);
        assert_eq!(n.ncols(), 2);
        assert!((&a * &n).norm() < 1e-12);
        assert!((n.transpose() * &n - DMatrix::identity(2, 2)).norm() < 1e-12);
    }

    #[test]
    fn complement_of_empty_is_identity() {
        let q = DMatrix::zeros(3, 0);
        assert_eq!(complement(&q, 3), DMatrix::identity(3, 3));
    }

    #[test]
    fn min_norm_solve_picks_smallest_solution() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let x = min_norm_solve(&a, &DVector::from_vec(vec![2.0]));
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }
}
