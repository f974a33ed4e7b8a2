//! Dense span programs: classification, minimum-norm witnesses, scalar
//! multiplication, negation and trivial programs.
//!
//! A span program on a domain of byte strings is a state space `R^dim`, a
//! subspace `H(x)` per input, a free subspace `K` and an initial vector `w0`
//! orthogonal to `K`. An input is positive when `w0` lies in `K + H(x)`.
//!
//! ```
//! use spanflow::spanprog::{Predicate, SpanProgram};
//!
//! let p = SpanProgram::trivial(Predicate::bit(0));
//! assert!(p.classify(b"10").unwrap());
//! let w = p.positive_witness(b"10").unwrap();
//! assert!((w.size - 1.0).abs() < 1e-12);
//!
//! // Scaling by alpha multiplies positive witness sizes by alpha.
//! let q = p.scale(4.0).unwrap();
//! assert!((q.positive_witness(b"10").unwrap().size - 4.0).abs() < 1e-12);
//! assert!((q.negative_witness(b"01").unwrap().size - 0.25).abs() < 1e-12);
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::linalg;

/// Symbol read at positions past the end of an input. It sorts above every
/// other byte and equals none of the symbols used by the constructions.
pub const PAD: u8 = 0xFF;

/// Symbol of `x` at `i`, or [`PAD`] when `i` is out of range.
pub fn symbol_at(x: &[u8], i: usize) -> u8 {
    x.get(i).copied().unwrap_or(PAD)
}

/// A boolean predicate on inputs, the payload of a trivial span program.
#[derive(Clone)]
pub enum Predicate {
    Const(bool),
    /// `[x_index == symbol]` when `equal`, `[x_index != symbol]` otherwise.
    Symbol { index: usize, symbol: u8, equal: bool },
    /// `[x_i < x_j]` when `less`, `[x_i >= x_j]` otherwise.
    Compare { i: usize, j: usize, less: bool },
    /// Arbitrary predicate with a display name.
    Custom { name: String, f: Arc<dyn Fn(&[u8]) -> bool + Send + Sync>, negated: bool },
}

impl Predicate {
    /// `[x_i = '1']` on binary strings written with ASCII digits.
    pub fn bit(i: usize) -> Predicate {
        Predicate::Symbol { index: i, symbol: b'1', equal: true }
    }

    /// `[x_i = '0']` for binary inputs, expressed as `[x_i != '1']`.
    pub fn not_bit(i: usize) -> Predicate {
        Predicate::Symbol { index: i, symbol: b'1', equal: false }
    }

    /// `[x_i = c]`.
    pub fn equals(i: usize, c: u8) -> Predicate {
        Predicate::Symbol { index: i, symbol: c, equal: true }
    }

    /// `[x_i < x_j]`.
    pub fn less(i: usize, j: usize) -> Predicate {
        Predicate::Compare { i, j, less: true }
    }

    pub fn custom(name: impl Into<String>, f: impl Fn(&[u8]) -> bool + Send + Sync + 'static) -> Predicate {
        Predicate::Custom { name: name.into(), f: Arc::new(f), negated: false }
    }

    pub fn eval(&self, x: &[u8]) -> bool {
        match self {
            Predicate::Const(b) => *b,
            Predicate::Symbol { index, symbol, equal } => (symbol_at(x, *index) == *symbol) == *equal,
            Predicate::Compare { i, j, less } => (symbol_at(x, *i) < symbol_at(x, *j)) == *less,
            Predicate::Custom { f, negated, .. } => f(x) != *negated,
        }
    }

    /// The complementary predicate.
    pub fn not(&self) -> Predicate {
        match self {
            Predicate::Const(b) => Predicate::Const(!b),
            Predicate::Symbol { index, symbol, equal } => Predicate::Symbol { index: *index, symbol: *symbol, equal: !equal },
            Predicate::Compare { i, j, less } => Predicate::Compare { i: *i, j: *j, less: !less },
            Predicate::Custom { name, f, negated } => Predicate::Custom { name: name.clone(), f: f.clone(), negated: !negated },
        }
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::Const(b) => write!(f, "{b}"),
            Predicate::Symbol { index, symbol, equal } => {
                let op = if *equal { "=" } else { "!=" };
                write!(f, "x[{index}]{op}{:?}", *symbol as char)
            }
            Predicate::Compare { i, j, less } => {
                let op = if *less { "<" } else { ">=" };
                write!(f, "x[{i}]{op}x[{j}]")
            }
            Predicate::Custom { name, negated, .. } => {
                if *negated {
                    write!(f, "not {name}")
                } else {
                    write!(f, "{name}")
                }
            }
        }
    }
}

type LazyH = Arc<dyn Fn(&[u8]) -> Result<DMatrix<f64>> + Send + Sync>;

/// Source of the input-dependent subspace `H(x)` as a generator matrix.
#[derive(Clone)]
pub enum InputSpaces {
    /// Explicit finite domain keyed by input label.
    Table(BTreeMap<Vec<u8>, DMatrix<f64>>),
    /// Lazily evaluated generators for exponentially large domains.
    Lazy(LazyH),
}

impl fmt::Debug for InputSpaces {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InputSpaces::Table(t) => write!(f, "Table({} inputs)", t.len()),
            InputSpaces::Lazy(_) => write!(f, "Lazy"),
        }
    }
}

/// Sign of an input.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sign {
    Positive,
    Negative,
}

/// A minimum-norm witness and its size.
#[derive(Clone, Debug)]
pub struct WitnessReport {
    pub input: Vec<u8>,
    pub sign: Sign,
    /// `None` when infeasible.
    pub witness: Option<DVector<f64>>,
    /// `||w||^2` for positive, `1/||q||^2` for negative, `inf` when infeasible.
    pub size: f64,
    pub feasible: bool,
}

/// Maxima of witness sizes over a list of inputs.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Complexity {
    /// Largest positive witness size, 0 when no input was positive.
    pub w_plus: f64,
    /// Largest negative witness size, 0 when no input was negative.
    pub w_minus: f64,
    pub has_positive: bool,
    pub has_negative: bool,
}

impl Complexity {
    /// `sqrt(W+ W-)`.
    pub fn c(&self) -> f64 {
        (self.w_plus * self.w_minus).sqrt()
    }

    /// Folds one witness into the running maxima.
    pub fn record(&mut self, sign: Sign, size: f64) {
        match sign {
            Sign::Positive => {
                self.has_positive = true;
                self.w_plus = self.w_plus.max(size);
            }
            Sign::Negative => {
                self.has_negative = true;
                self.w_minus = self.w_minus.max(size);
            }
        }
    }
}

impl Default for Complexity {
    fn default() -> Self {
        Complexity { w_plus: 0.0, w_minus: 0.0, has_positive: false, has_negative: false }
    }
}

/// Default relative tolerance for membership tests.
pub const DEFAULT_TOL: f64 = 1e-9;

/// A span program with an explicit state space.
#[derive(Clone, Debug)]
pub struct SpanProgram {
    dim: usize,
    w0: DVector<f64>,
    k_basis: DMatrix<f64>,
    h: InputSpaces,
    tol: f64,
}

impl SpanProgram {
    /// Builds a program, orthonormalizing `K` and checking `w0 != 0` and `w0 ⊥ K`.
    pub fn new(dim: usize, w0: DVector<f64>, k_gen: DMatrix<f64>, h: InputSpaces) -> Result<SpanProgram> {
        if w0.len() != dim {
            return invalid("w0 length differs from dim");
        }
        if k_gen.nrows() != dim && k_gen.ncols() > 0 {
            return invalid("K generators have the wrong row count");
        }
        let k_gen = if k_gen.ncols() == 0 { DMatrix::zeros(dim, 0) } else { k_gen };
        let k_basis = linalg::orth(&k_gen);
        Self::from_parts(dim, w0, k_basis, h)
    }

    /// Builds a program from an already orthonormal basis of `K`.
    pub(crate) fn from_parts(dim: usize, w0: DVector<f64>, k_basis: DMatrix<f64>, h: InputSpaces) -> Result<SpanProgram> {
        let norm = w0.norm();
        if !(norm > 0.0) || !norm.is_finite() {
            return invalid("w0 must be a nonzero finite vector");
        }
        let leak = linalg::project(&k_basis, &w0).norm();
        if leak > 1e-8 * norm {
            return invalid(format!("w0 is not orthogonal to K (residual {leak:e})"));
        }
        if let InputSpaces::Table(t) = &h {
            for (label, g) in t {
                if g.ncols() > 0 && g.nrows() != dim {
                    return invalid(format!("H generators for {} have the wrong row count", String::from_utf8_lossy(label)));
                }
            }
        }
        Ok(SpanProgram { dim, w0, k_basis, h, tol: DEFAULT_TOL })
    }

    /// The trivial program of a predicate: dimension 1, `K = {0}`, `w0 = e_1`,
    /// `H(x)` everything when the predicate holds and nothing otherwise.
    pub fn trivial(p: Predicate) -> SpanProgram {
        let h: LazyH = Arc::new(move |x: &[u8]| {
            Ok(if p.eval(x) { DMatrix::identity(1, 1) } else { DMatrix::zeros(1, 0) })
        });
        SpanProgram {
            dim: 1,
            w0: DVector::from_element(1, 1.0),
            k_basis: DMatrix::zeros(1, 0),
            h: InputSpaces::Lazy(h),
            tol: DEFAULT_TOL,
        }
    }

    /// Sets the relative tolerance used to decide membership.
    pub fn with_tolerance(mut self, tol: f64) -> SpanProgram {
        self.tol = tol;
        self
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn w0(&self) -> &DVector<f64> {
        &self.w0
    }

    /// Orthonormal basis of `K`.
    pub fn k_basis(&self) -> &DMatrix<f64> {
        &self.k_basis
    }

    pub fn input_spaces(&self) -> &InputSpaces {
        &self.h
    }

    /// Labels of an explicit domain, or `None` for lazy programs.
    pub fn domain(&self) -> Option<Vec<Vec<u8>>> {
        match &self.h {
            InputSpaces::Table(t) => Some(t.keys().cloned().collect()),
            InputSpaces::Lazy(_) => None,
        }
    }

    /// Generators of `H(x)`.
    pub fn h_generators(&self, x: &[u8]) -> Result<DMatrix<f64>> {
        match &self.h {
            InputSpaces::Table(t) => t
                .get(x)
                .cloned()
                .map(|g| if g.ncols() == 0 { DMatrix::zeros(self.dim, 0) } else { g })
                .ok_or_else(|| Error::UnknownInput(String::from_utf8_lossy(x).into_owned())),
            InputSpaces::Lazy(f) => f(x),
        }
    }

    /// Orthonormal basis of `H(x)`.
    pub fn h_basis(&self, x: &[u8]) -> Result<DMatrix<f64>> {
        Ok(linalg::orth(&self.h_generators(x)?))
    }

    /// Projection of `w0` onto `(K + H(x))^⊥`, whose vanishing decides the sign.
    fn negative_direction(&self, h: &DMatrix<f64>) -> DVector<f64> {
        let both = linalg::orth(&linalg::hstack(self.dim, &[&self.k_basis, h]));
        &self.w0 - linalg::project(&both, &self.w0)
    }

    /// True when `x` is a positive input.
    pub fn classify(&self, x: &[u8]) -> Result<bool> {
        let h = self.h_basis(x)?;
        Ok(self.negative_direction(&h).norm() <= self.tol * self.w0.norm())
    }

    /// Minimum-norm `w ∈ H(x)` with `w - w0 ∈ K`.
    pub fn positive_witness(&self, x: &[u8]) -> Result<WitnessReport> {
        let h = self.h_basis(x)?;
        Ok(self.positive_from_basis(x, &h))
    }

    fn positive_from_basis(&self, x: &[u8], h: &DMatrix<f64>) -> WitnessReport {
        let infeasible = WitnessReport { input: x.to_vec(), sign: Sign::Positive, witness: None, size: f64::INFINITY, feasible: false };
        if h.ncols() == 0 {
            return infeasible;
        }
        // Coordinates a with (I - Π_K)(H a - w0) = 0; since w0 ⊥ K this reads M a = w0.
        let m = h - &self.k_basis * (self.k_basis.transpose() * h);
        let a = linalg::min_norm_solve(&m, &self.w0);
        let residual = (&m * &a - &self.w0).norm();
        if residual > self.tol.max(1e-10) * 10.0 * self.w0.norm() {
            return infeasible;
        }
        let w = h * a;
        let size = w.norm_squared();
        WitnessReport { input: x.to_vec(), sign: Sign::Positive, witness: Some(w), size, feasible: true }
    }

    /// `q / ||q||^2` with `q` the projection of `w0` onto `K^⊥ ∩ H(x)^⊥`.
    pub fn negative_witness(&self, x: &[u8]) -> Result<WitnessReport> {
        let h = self.h_basis(x)?;
        Ok(self.negative_from_basis(x, &h))
    }

    fn negative_from_basis(&self, x: &[u8], h: &DMatrix<f64>) -> WitnessReport {
        let q = self.negative_direction(h);
        let qq = q.norm_squared();
        if q.norm() <= self.tol * self.w0.norm() {
            return WitnessReport { input: x.to_vec(), sign: Sign::Negative, witness: None, size: f64::INFINITY, feasible: false };
        }
        WitnessReport { input: x.to_vec(), sign: Sign::Negative, witness: Some(q / qq), size: 1.0 / qq, feasible: true }
    }

    /// The feasible witness for `x`, positive or negative.
    pub fn witness(&self, x: &[u8]) -> Result<WitnessReport> {
        let h = self.h_basis(x)?;
        let q = self.negative_direction(&h);
        if q.norm() <= self.tol * self.w0.norm() {
            Ok(self.positive_from_basis(x, &h))
        } else {
            Ok(self.negative_from_basis(x, &h))
        }
    }

    /// `(W+, W-)` over the given inputs.
    pub fn complexity<'a>(&self, inputs: impl IntoIterator<Item = &'a [u8]>) -> Result<Complexity> {
        let mut c = Complexity::default();
        for x in inputs {
            let w = self.witness(x)?;
            c.record(w.sign, w.size);
        }
        Ok(c)
    }

    /// The `alpha`-scalar multiple: `w0 -> sqrt(alpha) w0`.
    pub fn scale(&self, alpha: f64) -> Result<SpanProgram> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::Range(format!("scale factor must be positive, got {alpha}")));
        }
        let mut out = self.clone();
        out.w0 *= alpha.sqrt();
        Ok(out)
    }

    /// The negated program: `H'(x) = H(x)^⊥`, `K' = (K ⊕ span w0)^⊥`,
    /// `w0' = w0 / ||w0||^2`.
    pub fn negate(&self) -> SpanProgram {
        let dim = self.dim;
        let kw = linalg::orth(&linalg::hstack(dim, &[&self.k_basis, &DMatrix::from_column_slice(dim, 1, self.w0.as_slice())]));
        let k_basis = linalg::complement(&kw, dim);
        let w0 = &self.w0 / self.w0.norm_squared();
        let h = match &self.h {
            InputSpaces::Table(t) => InputSpaces::Table(
                t.iter().map(|(label, g)| (label.clone(), linalg::complement(&linalg::orth(&pad_rows(g, dim)), dim))).collect(),
            ),
            InputSpaces::Lazy(f) => {
                let f = f.clone();
                InputSpaces::Lazy(Arc::new(move |x: &[u8]| Ok(linalg::complement(&linalg::orth(&pad_rows(&f(x)?, dim)), dim))))
            }
        };
        SpanProgram { dim, w0, k_basis, h, tol: self.tol }
    }

    /// Restricts a lazy program to an explicit table over the given inputs.
    pub fn tabulate<'a>(&self, inputs: impl IntoIterator<Item = &'a [u8]>) -> Result<SpanProgram> {
        let mut t = BTreeMap::new();
        for x in inputs {
            t.insert(x.to_vec(), self.h_generators(x)?);
        }
        Ok(SpanProgram { h: InputSpaces::Table(t), ..self.clone() })
    }
}

fn pad_rows(g: &DMatrix<f64>, dim: usize) -> DMatrix<f64> {
    if g.ncols() == 0 {
        DMatrix::zeros(dim, 0)
    } else {
        g.clone()
    }
}

/// All binary strings of length `n` as ASCII `'0'`/`'1'` bytes, in counting order.
pub fn binary_inputs(n: usize) -> Vec<Vec<u8>> {
    (0..1u64 << n)
        .map(|m| (0..n).map(|i| if m >> i & 1 == 1 { b'1' } else { b'0' }).collect())
        .collect()
}

/// Hamming weight of an ASCII binary string.
pub fn weight(x: &[u8]) -> usize {
    x.iter().filter(|&&c| c == b'1').count()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        linalg::rel_diff(a, b) < 1e-10
    }

    #[test]
    fn trivial_constants() {
        let yes = SpanProgram::trivial(Predicate::Const(true));
        let no = SpanProgram::trivial(Predicate::Const(false));
        for x in binary_inputs(2) {
            assert!(yes.classify(&x).unwrap());
            assert!(!no.classify(&x).unwrap());
            assert!(close(yes.positive_witness(&x).unwrap().size, 1.0));
            assert!(close(no.negative_witness(&x).unwrap().size, 1.0));
        }
    }

    #[test]
    fn trivial_bit_and_complexity() {
        let p = SpanProgram::trivial(Predicate::bit(0));
        let inputs = binary_inputs(2);
        let c = p.complexity(inputs.iter().map(|x| x.as_slice())).unwrap();
        assert!(c.has_positive && c.has_negative);
        assert!(close(c.c(), 1.0));
    }

    #[test]
    fn negation_swaps_witnesses() {
        let p = SpanProgram::trivial(Predicate::bit(1)).scale(3.0).unwrap();
        let n = p.negate();
        for x in binary_inputs(2) {
            let a = p.witness(&x).unwrap();
            let b = n.witness(&x).unwrap();
            assert_ne!(a.sign, b.sign);
            assert!(close(a.size, b.size));
        }
        let nn = n.negate();
        for x in binary_inputs(2) {
            assert!(close(p.witness(&x).unwrap().size, nn.witness(&x).unwrap().size));
        }
    }

    #[test]
    fn scale_rejects_nonpositive() {
        let p = SpanProgram::trivial(Predicate::bit(0));
        assert!(p.scale(0.0).is_err());
        assert!(p.scale(-1.0).is_err());
    }

    #[test]
    fn rejects_w0_inside_k() {
        let k = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
        let w0 = DVector::from_vec(vec![1.0, 1.0]);
        assert!(SpanProgram::new(2, w0, k, InputSpaces::Table(BTreeMap::new())).is_err());
    }

    #[test]
    fn explicit_domain_unknown_input() {
        let mut t = BTreeMap::new();
        t.insert(b"a".to_vec(), DMatrix::identity(1, 1));
        let p = SpanProgram::new(1, DVector::from_element(1, 1.0), DMatrix::zeros(1, 0), InputSpaces::Table(t)).unwrap();
        assert!(p.classify(b"a").unwrap());
        assert!(matches!(p.classify(b"b"), Err(Error::UnknownInput(_))));
    }
}
