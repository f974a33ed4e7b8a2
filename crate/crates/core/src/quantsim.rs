//! Exact state-vector verification of span program algorithms.
//!
//! This module builds the three reflections used by the algorithm for a
//! graph composition, turns two-subspace instances into transducers, runs the
//! span program algorithm on a dense state vector and checks the dual
//! adversary constraints. Probabilities are computed, never sampled.
//!
//! ```
//! use spanflow::graphcomp::or_compose;
//! use spanflow::graphcomp::Program;
//! use spanflow::quantsim::{run_algorithm1, SimConfig};
//! use spanflow::spanprog::Predicate;
//!
//! let bits: Vec<Program> = (0..2).map(|i| Program::trivial(Predicate::bit(i))).collect();
//! let or2 = or_compose(&bits);
//! // OR of two unit programs: W+ = 1 (one accepting edge), W- = 2.
//! for x in [b"00", b"01", b"10", b"11"] {
//!     let r = run_algorithm1(&or2, 1.0, 2.0, x, &SimConfig::default()).unwrap();
//!     assert!(r.success_probability >= 2.0 / 3.0);
//! }
//! ```

use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};

use crate::decomp;
use crate::error::{invalid, Error, Result};
use crate::graphcomp::{compose, CompositionGraph, Program};
use crate::linalg;
use crate::spanprog::{Sign, SpanProgram};

type C64 = Complex<f64>;

/// Limits for simulations.
#[derive(Clone, Copy, Debug)]
pub struct SimConfig {
    /// Largest number of rounds `K` that will be simulated.
    pub max_k: usize,
    /// Largest composed state-space dimension that will be materialized.
    pub max_dim: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { max_k: 4096, max_dim: 4096 }
    }
}

/// The three oracles of the algorithm for one input, as dense matrices.
#[derive(Clone, Debug)]
pub struct Reflections {
    pub dim: usize,
    /// Reflection through `H(x)`.
    pub r_h: DMatrix<f64>,
    /// Reflection through `K`.
    pub r_k: DMatrix<f64>,
    /// Unitary with `C e_bottom = w0 / ||w0||`.
    pub c_w0: DMatrix<f64>,
    /// Index of the basis state mapped onto the normalized initial vector.
    pub bottom: usize,
    /// Initial vector of the composed program.
    pub w0: DVector<f64>,
}

/// Builds `R_H(x)`, `R_K` and `C_w0` for a composition.
///
/// `R_H(x)` is the direct sum of the edge reflections. `R_K` is
/// `-(⊕ R_{K^e}) X`, where `X` reflects through the embedded circulation
/// space and the circulation reflection comes from an automatic
/// decomposition of the network. `C_w0` is a Householder reflection.
pub fn build_reflections(cg: &CompositionGraph, x: &[u8], max_dim: usize) -> Result<Reflections> {
    let composed = compose(cg, max_dim)?;
    let dim = composed.program.dim();
    let mut h_blocks = Vec::new();
    let mut k_blocks = Vec::new();
    for p in &composed.parts {
        h_blocks.push(linalg::reflection(&pad(p.h_basis(x)?, p.dim())));
        k_blocks.push(linalg::reflection(&pad(p.k_basis().clone(), p.dim())));
    }
    let r_h = linalg::block_diag(&h_blocks);
    let r_k_edges = linalg::block_diag(&k_blocks);
    let tree = decomp::auto_decompose(&composed.network)?;
    let (r_dec, _) = decomp::reflection_from_decomposition(&composed.network, &tree)?;
    // r_dec = I - 2Π_C, so the reflection through the circulation space is -r_dec.
    let r_c = -r_dec;
    let e = &composed.embedding;
    let x_refl = e * r_c * e.transpose() - (DMatrix::identity(dim, dim) - e * e.transpose());
    let r_k = -(r_k_edges * x_refl);
    let w0 = composed.program.w0().clone();
    let c_w0 = householder_to(&(&w0 / w0.norm()), 0);
    Ok(Reflections { dim, r_h, r_k, c_w0, bottom: 0, w0 })
}

fn pad(q: DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if q.ncols() == 0 {
        DMatrix::zeros(dim, 0)
    } else {
        q
    }
}

/// Householder reflection exchanging `e_bottom` and the unit vector `u`.
fn householder_to(u: &DVector<f64>, bottom: usize) -> DMatrix<f64> {
    let n = u.len();
    let mut v = -u.clone();
    v[bottom] += 1.0;
    let vv = v.norm_squared();
    if vv < 1e-28 {
        return DMatrix::identity(n, n);
    }
    DMatrix::identity(n, n) - (&v * v.transpose()) * (2.0 / vv)
}

/// Input-dependent data of a two-subspace instance.
#[derive(Clone, Debug)]
pub struct SubspacePair {
    /// Orthonormal basis of `H_A(x)`.
    pub h_a: DMatrix<f64>,
    /// Orthonormal basis of `H_B(x)`.
    pub h_b: DMatrix<f64>,
    /// Initial vector, orthogonal to `H_B(x)`.
    pub psi0: DVector<f64>,
}

type PairFn = Arc<dyn Fn(&[u8]) -> Result<SubspacePair> + Send + Sync>;

/// A two-subspace instance: `x` is positive when `psi0 ∈ H_A(x) + H_B(x)`.
#[derive(Clone)]
pub struct TwoSubspaceInstance {
    pub dim: usize,
    pairs: PairFn,
}

impl TwoSubspaceInstance {
    pub fn new(dim: usize, pairs: impl Fn(&[u8]) -> Result<SubspacePair> + Send + Sync + 'static) -> Self {
        TwoSubspaceInstance { dim, pairs: Arc::new(pairs) }
    }

    /// The instance `H_A = H(x)`, `H_B = K`, `psi0 = w0` of a span program.
    pub fn from_span_program(p: &SpanProgram) -> Self {
        let p = p.clone();
        TwoSubspaceInstance::new(p.dim(), move |x| {
            Ok(SubspacePair { h_a: pad(p.h_basis(x)?, p.dim()), h_b: pad(p.k_basis().clone(), p.dim()), psi0: p.w0().clone() })
        })
    }

    /// Data for `x`, after checking `psi0 ⊥ H_B(x)`.
    pub fn at(&self, x: &[u8]) -> Result<SubspacePair> {
        let pair = (self.pairs)(x)?;
        let leak = linalg::project(&pair.h_b, &pair.psi0).norm();
        if leak > 1e-9 * pair.psi0.norm().max(1.0) {
            return invalid("psi0 is not orthogonal to H_B");
        }
        Ok(pair)
    }
}

/// `U = -(2Π_R - I)(I ⊕ R_B)(I ⊕ R_A)` on `C^2 ⊕ H`, with `R` spanned by
/// `|-> ⊕ -psi0`. Indices 0 and 1 are the qubit, the rest is `H`.
pub fn to_transducer(inst: &TwoSubspaceInstance, x: &[u8]) -> Result<DMatrix<f64>> {
    let pair = inst.at(x)?;
    let d = inst.dim;
    let n = d + 2;
    let lift = |r: DMatrix<f64>| {
        let mut m = DMatrix::identity(n, n);
        m.view_mut((2, 2), (d, d)).copy_from(&r);
        m
    };
    let ra = lift(linalg::reflection(&pair.h_a));
    let rb = lift(linalg::reflection(&pair.h_b));
    let psi = transducer_psi(&pair.psi0);
    let pr = (&psi * psi.transpose()) / psi.norm_squared();
    let refl = pr * 2.0 - DMatrix::identity(n, n);
    Ok(-(refl * rb * ra))
}

fn transducer_psi(psi0: &DVector<f64>) -> DVector<f64> {
    let d = psi0.len();
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(d + 2, |i, _| match i {
        0 => h,
        1 => -h,
        _ => -psi0[i - 2],
    })
}

/// `|-> ⊕ w`, the catalyst-augmented vector on which a transducer acts.
pub fn minus_with(w: &DVector<f64>) -> DVector<f64> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    DVector::from_fn(w.len() + 2, |i, _| match i {
        0 => h,
        1 => -h,
        _ => w[i - 2],
    })
}

/// Residual of the witness eigen-relation: a positive witness `psi_A` must
/// satisfy `U(|-> ⊕ psi_A) = -|-> ⊕ psi_A`, a negative witness `psi_perp`
/// must satisfy `U(|-> ⊕ psi_perp) = |-> ⊕ psi_perp`.
pub fn transduction_residual(u: &DMatrix<f64>, witness: &DVector<f64>, sign: Sign) -> f64 {
    let v = minus_with(witness);
    let mut expected = v.clone();
    if sign == Sign::Positive {
        expected[0] = -expected[0];
        expected[1] = -expected[1];
    }
    (u * v - expected).norm()
}

/// True when [`transduction_residual`] is at most `1e-9`.
pub fn verify_transduction(u: &DMatrix<f64>, witness: &DVector<f64>, sign: Sign) -> bool {
    transduction_residual(u, witness, sign) <= 1e-9
}

/// Outcome of one exact run of the span program algorithm.
#[derive(Clone, Debug, serde::Serialize)]
pub struct SimulationResult {
    pub input: String,
    /// Number of rounds `K = ceil(18 sqrt(W+ W-))`.
    pub iterations: usize,
    /// Probability of measuring the qubit in state `|1>`.
    pub p_one: f64,
    /// Probability of the correct answer.
    pub success_probability: f64,
    /// Whether the program accepts the input.
    pub positive: bool,
    /// Norm of the final state, 1 up to rounding.
    pub final_norm: f64,
    /// Weight left in the work register `H`.
    pub work_weight: f64,
}

/// A reflection applied without forming a dense product.
enum Reflector<'a> {
    Matrix(&'a DMatrix<f64>),
}

impl Reflector<'_> {
    fn apply(&self, v: &mut [C64], scratch_re: &mut DVector<f64>, scratch_im: &mut DVector<f64>) {
        match self {
            Reflector::Matrix(m) => {
                for (i, c) in v.iter().enumerate() {
                    scratch_re[i] = c.re;
                    scratch_im[i] = c.im;
                }
                let re = *m * &*scratch_re;
                let im = *m * &*scratch_im;
                for (i, c) in v.iter_mut().enumerate() {
                    *c = C64::new(re[i], im[i]);
                }
            }
        }
    }
}

/// Number of rounds for the given bounds.
pub fn rounds(w_plus: f64, w_minus: f64) -> usize {
    (18.0 * (w_plus * w_minus).sqrt()).ceil() as usize
}

/// Runs the algorithm on a composition with caller-supplied bounds.
pub fn run_algorithm1(cg: &CompositionGraph, w_plus: f64, w_minus: f64, x: &[u8], cfg: &SimConfig) -> Result<SimulationResult> {
    let refl = build_reflections(cg, x, cfg.max_dim)?;
    let positive = Program::graph(cg.clone())?.accepts(x)?;
    let w0 = refl.c_w0.column(refl.bottom) * refl.w0.norm();
    simulate(&refl.r_h, &refl.r_k, &w0, w_plus, w_minus, x, positive, cfg)
}

/// Runs the algorithm on an explicit span program.
pub fn run_algorithm1_dense(p: &SpanProgram, w_plus: f64, w_minus: f64, x: &[u8], cfg: &SimConfig) -> Result<SimulationResult> {
    let r_h = linalg::reflection(&pad(p.h_basis(x)?, p.dim()));
    let r_k = linalg::reflection(&pad(p.k_basis().clone(), p.dim()));
    let positive = p.classify(x)?;
    simulate(&r_h, &r_k, p.w0(), w_plus, w_minus, x, positive, cfg)
}

#[allow(clippy::too_many_arguments)]
fn simulate(
    r_h: &DMatrix<f64>,
    r_k: &DMatrix<f64>,
    w0: &DVector<f64>,
    w_plus: f64,
    w_minus: f64,
    x: &[u8],
    positive: bool,
    cfg: &SimConfig,
) -> Result<SimulationResult> {
    if !(w_plus > 0.0 && w_minus > 0.0) || !w_plus.is_finite() || !w_minus.is_finite() {
        return Err(Error::Range("bounds must be finite and positive".into()));
    }
    let k = rounds(w_plus, w_minus);
    if k > cfg.max_k {
        return Err(Error::TooLarge { dim: k, cap: cfg.max_k });
    }
    let d = w0.len();
    // Register layout: |j>|b> at 2j + b, then the work space H at offset 2K.
    let mut reg = vec![C64::new(0.0, 0.0); 2 * k];
    let mut work = vec![C64::new(0.0, 0.0); d];
    let amp = 1.0 / (k as f64).sqrt();
    for j in 0..k {
        reg[2 * j] = C64::new(amp, 0.0);
    }
    let scale = (w_minus / w_plus).powf(0.25);
    let tail: DVector<f64> = -(w0 * scale);
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let v_norm_sq = 1.0 + tail.norm_squared();
    let (mut sre, mut sim) = (DVector::zeros(d), DVector::zeros(d));
    let (rh, rk) = (Reflector::Matrix(r_h), Reflector::Matrix(r_k));
    for j in 0..k {
        rh.apply(&mut work, &mut sre, &mut sim);
        rk.apply(&mut work, &mut sre, &mut sim);
        // Reflection through the complement of v_j = |j>|-> ⊕ tail.
        let mut ip = reg[2 * j] * h - reg[2 * j + 1] * h;
        for (c, &t) in work.iter().zip(tail.iter()) {
            ip += c * t;
        }
        let f = ip * (2.0 / v_norm_sq);
        reg[2 * j] -= f * h;
        reg[2 * j + 1] += f * h;
        for (c, &t) in work.iter_mut().zip(tail.iter()) {
            *c -= f * t;
        }
    }
    let p_one: f64 = (0..k).map(|j| reg[2 * j + 1].norm_sqr()).sum();
    let p_reg: f64 = reg.iter().map(|c| c.norm_sqr()).sum();
    let work_weight: f64 = work.iter().map(|c| c.norm_sqr()).sum();
    let success_probability = if positive { p_one } else { 1.0 - p_one };
    Ok(SimulationResult {
        input: String::from_utf8_lossy(x).into_owned(),
        iterations: k,
        p_one,
        success_probability,
        positive,
        final_norm: (p_reg + work_weight).sqrt(),
        work_weight,
    })
}

/// Result of [`adversary_feasibility`].
#[derive(Clone, Debug)]
pub struct AdversaryReport {
    /// Largest `|<w_x|(I - O_x O_y)|w_y> - [f(x) != f(y)]|` over all pairs.
    pub max_residual: f64,
    /// `max_x ||w_x||^2`.
    pub objective: f64,
    pub pairs: usize,
}

/// Checks that the witnesses scaled by `1/sqrt(2)` with oracles `O_x = R_H(x)`
/// satisfy the dual adversary constraints for the function `f`.
pub fn adversary_feasibility(p: &SpanProgram, inputs: &[Vec<u8>], f: &dyn Fn(&[u8]) -> bool) -> Result<AdversaryReport> {
    let mut ws = Vec::with_capacity(inputs.len());
    for x in inputs {
        let fx = f(x);
        let rep = if fx { p.positive_witness(x)? } else { p.negative_witness(x)? };
        let w = rep.witness.ok_or_else(|| Error::Promise(format!("no witness of the expected sign for {}", String::from_utf8_lossy(x))))?;
        let o = linalg::reflection(&pad(p.h_basis(x)?, p.dim()));
        ws.push((fx, w / 2f64.sqrt(), o));
    }
    let mut max_residual: f64 = 0.0;
    for (fx, wx, ox) in &ws {
        for (fy, wy, oy) in &ws {
            let lhs = wx.dot(wy) - wx.dot(&(ox * (oy * wy)));
            let delta = if fx != fy { 1.0 } else { 0.0 };
            max_residual = max_residual.max((lhs - delta).abs());
        }
    }
    let objective = ws.iter().map(|(_, w, _)| w.norm_squared()).fold(0.0, f64::max);
    Ok(AdversaryReport { max_residual, objective, pairs: ws.len() * ws.len() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphcomp::{and_compose, or_compose};
    use crate::spanprog::{binary_inputs, Predicate};

    fn bits(n: usize) -> Vec<Program> {
        (0..n).map(|i| Program::trivial(Predicate::bit(i))).collect()
    }

    fn unitary_err(m: &DMatrix<f64>) -> f64 {
        (m.transpose() * m - DMatrix::identity(m.nrows(), m.nrows())).norm()
    }

    #[test]
    fn single_edge_reflections() {
        let g = and_compose(&bits(1));
        let r = build_reflections(&g, b"1", 64).unwrap();
        // K is empty: R_K = -I.
        assert!((r.r_k + DMatrix::identity(1, 1)).norm() < 1e-12);
    }

    #[test]
    fn or2_edge_reflections() {
        let g = or_compose(&bits(2));
        let r = build_reflections(&g, b"10", 64).unwrap();
        assert!((r.r_h - DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0]))).norm() < 1e-12);
        for m in [&r.r_k, &r.c_w0] {
            assert!(unitary_err(m) < 1e-10);
        }
    }

    #[test]
    fn r_k_matches_composed_subspace() {
        // Wheatstone bridge of bits, with a nested AND on one edge.
        let b = bits(5);
        let mut g = CompositionGraph::new(4, 0, 3);
        g.add_edge(0, 1, b[0].clone());
        g.add_edge(0, 2, b[1].clone());
        g.add_edge(1, 2, Program::graph(and_compose(&[b[2].clone(), b[3].clone()])).unwrap());
        g.add_edge(1, 3, b[3].clone());
        g.add_edge(2, 3, b[4].scaled(2.0));
        let p = compose(&g, 256).unwrap().program;
        let r = build_reflections(&g, b"10110", 256).unwrap();
        let expect = linalg::reflection(&pad(p.k_basis().clone(), p.dim()));
        assert!((r.r_k - expect).norm() < 1e-9);
        let u = r.c_w0.column(0).into_owned();
        assert!((u - p.w0() / p.w0().norm()).norm() < 1e-12);
    }

    #[test]
    fn constant_true_succeeds() {
        let g = and_compose(&[Program::constant(true)]);
        let r = run_algorithm1(&g, 1.0, 1.0, b"", &SimConfig::default()).unwrap();
        assert_eq!(r.iterations, 18);
        assert!(r.success_probability >= 2.0 / 3.0, "{r:?}");
    }

    #[test]
    fn and2_transducer_signs() {
        let p = compose(&and_compose(&bits(2)), 64).unwrap().program;
        let inst = TwoSubspaceInstance::from_span_program(&p);
        for x in binary_inputs(2) {
            let u = to_transducer(&inst, &x).unwrap();
            assert!(unitary_err(&u) < 1e-10);
            let w = p.witness(&x).unwrap();
            assert!(verify_transduction(&u, w.witness.as_ref().unwrap(), w.sign));
        }
    }

    #[test]
    fn trivial_negative_instance_is_fixed() {
        // H_A = H_B = {0}: the negative witness is psi0 / ||psi0||^2.
        let psi0 = DVector::from_vec(vec![0.0, 2.0]);
        let inst = TwoSubspaceInstance::new(2, move |_| {
            Ok(SubspacePair { h_a: DMatrix::zeros(2, 0), h_b: DMatrix::zeros(2, 0), psi0: psi0.clone() })
        });
        let u = to_transducer(&inst, b"").unwrap();
        let w = DVector::from_vec(vec![0.0, 0.5]);
        assert!(verify_transduction(&u, &w, Sign::Negative));
    }

    #[test]
    fn or2_adversary() {
        let p = compose(&or_compose(&bits(2)), 64).unwrap().program;
        let inputs = binary_inputs(2);
        let rep = adversary_feasibility(&p, &inputs, &|x| x.contains(&b'1')).unwrap();
        assert!(rep.max_residual < 1e-8, "{rep:?}");
        assert_eq!(rep.pairs, 16);
    }
}
