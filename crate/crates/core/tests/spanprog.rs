//! Span program witnesses against an oracle built from Gram-Schmidt and QR,
//! plus the negation and scaling identities on random dense programs.

mod common;

use common::{oracle_witness, random_dense, rel};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spanflow::spanprog::{binary_inputs, weight, InputSpaces, Predicate, Sign, SpanProgram};
use std::collections::BTreeMap;

#[test]
fn trivial_program_sizes() {
    let p = SpanProgram::trivial(Predicate::bit(1));
    let yes = p.witness(b"01").unwrap();
    assert_eq!((yes.sign, yes.size), (Sign::Positive, 1.0));
    let no = p.witness(b"00").unwrap();
    assert_eq!((no.sign, no.size), (Sign::Negative, 1.0));
}

#[test]
fn construction_rejects_bad_data() {
    let k = DMatrix::from_column_slice(2, 1, &[1.0, 0.0]);
    let leaking = SpanProgram::new(2, DVector::from_vec(vec![1.0, 1.0]), k, InputSpaces::Table(BTreeMap::new()));
    assert!(leaking.is_err());
    let zero = SpanProgram::new(2, DVector::zeros(2), DMatrix::zeros(2, 0), InputSpaces::Table(BTreeMap::new()));
    assert!(zero.is_err());
    let short = SpanProgram::new(3, DVector::from_vec(vec![1.0, 0.0]), DMatrix::zeros(3, 0), InputSpaces::Table(BTreeMap::new()));
    assert!(short.is_err());
}

#[test]
fn unknown_table_input_is_an_error() {
    let mut t = BTreeMap::new();
    t.insert(b"0".to_vec(), DMatrix::identity(1, 1));
    let p = SpanProgram::new(1, DVector::from_element(1, 1.0), DMatrix::zeros(1, 0), InputSpaces::Table(t)).unwrap();
    assert!(p.witness(b"1").is_err());
    assert!(p.scale(0.0).is_err());
    assert!(p.scale(f64::NAN).is_err());
}

#[test]
fn helpers() {
    assert_eq!(binary_inputs(2), vec![b"00".to_vec(), b"10".to_vec(), b"01".to_vec(), b"11".to_vec()]);
    assert_eq!(weight(b"1101"), 3);
    assert!(Predicate::equals(2, b'x').eval(b"abx"));
    assert!(Predicate::less(0, 1).eval(b"ab"));
    assert!(Predicate::not_bit(0).not().eval(b"1"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn witnesses_match_oracle(seed in any::<u64>(), dim in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, labels) = random_dense(&mut rng, dim, 4);
        for x in &labels {
            let w = p.witness(x).unwrap();
            let h = p.h_generators(x).unwrap();
            let (pos, size) = oracle_witness(&h, p.k_basis(), p.w0());
            prop_assert_eq!(w.sign == Sign::Positive, pos);
            prop_assert!(rel(w.size, size) < 1e-7, "{} vs {}", w.size, size);
            let v = w.witness.unwrap();
            match w.sign {
                Sign::Positive => {
                    let hb = p.h_basis(x).unwrap();
                    prop_assert!((&v - &hb * (hb.transpose() * &v)).norm() < 1e-8 * v.norm().max(1.0));
                    let d = &v - p.w0();
                    prop_assert!((&d - p.k_basis() * (p.k_basis().transpose() * &d)).norm() < 1e-8 * v.norm().max(1.0));
                }
                Sign::Negative => prop_assert!((v.dot(p.w0()) - 1.0).abs() < 1e-8),
            }
        }
    }

    #[test]
    fn negation_swaps_and_scaling_multiplies(seed in any::<u64>(), dim in 1usize..7, alpha in 0.05f64..20.0) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, labels) = random_dense(&mut rng, dim, 4);
        let neg = p.negate();
        let scaled = p.scale(alpha).unwrap();
        for x in &labels {
            let w = p.witness(x).unwrap();
            let n = neg.witness(x).unwrap();
            prop_assert!(n.sign != w.sign);
            prop_assert!(rel(n.size, w.size) < 1e-7);
            let s = scaled.witness(x).unwrap();
            prop_assert_eq!(s.sign, w.sign);
            let expected = if w.sign == Sign::Positive { alpha * w.size } else { w.size / alpha };
            prop_assert!(rel(s.size, expected) < 1e-9);
        }
    }

    #[test]
    fn tabulating_a_lazy_program_is_lossless(i in 0usize..3) {
        let lazy = SpanProgram::trivial(Predicate::bit(i));
        let inputs = binary_inputs(3);
        let table = lazy.tabulate(inputs.iter().map(|x| x.as_slice())).unwrap();
        for x in &inputs {
            prop_assert_eq!(lazy.classify(x).unwrap(), table.classify(x).unwrap());
        }
        let c = table.complexity(inputs.iter().map(|x| x.as_slice())).unwrap();
        prop_assert_eq!((c.w_plus, c.w_minus, c.c()), (1.0, 1.0, 1.0));
    }
}
