//! Exact simulation of the span program algorithm, transducers and the dual
//! adversary check on random programs and compositions.

mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spanflow::graphcomp::{compose, or_compose, Program};
use spanflow::quantsim::{
    adversary_feasibility, rounds, run_algorithm1, run_algorithm1_dense, to_transducer, transduction_residual,
    SimConfig, SubspacePair, TwoSubspaceInstance,
};
use spanflow::spanprog::{binary_inputs, Predicate};
use spanflow::verify::random_composition;

#[test]
fn round_counts() {
    assert_eq!(rounds(1.0, 1.0), 18);
    assert_eq!(rounds(2.0, 2.0), 36);
    assert_eq!(rounds(0.5, 1.0), 13);
}

#[test]
fn bad_bounds_and_caps_are_errors() {
    let g = or_compose(&[Program::trivial(Predicate::bit(0))]);
    let cfg = SimConfig::default();
    assert!(run_algorithm1(&g, 0.0, 1.0, b"1", &cfg).is_err());
    assert!(run_algorithm1(&g, 1.0, f64::INFINITY, b"1", &cfg).is_err());
    let tight = SimConfig { max_k: 10, ..cfg };
    assert!(run_algorithm1(&g, 1.0, 1.0, b"1", &tight).is_err());
}

#[test]
fn transducer_rejects_non_orthogonal_initial_vector() {
    let inst = TwoSubspaceInstance::new(2, |_| {
        Ok(SubspacePair {
            h_a: DMatrix::identity(2, 1),
            h_b: DMatrix::from_column_slice(2, 1, &[1.0, 0.0]),
            psi0: DVector::from_vec(vec![1.0, 1.0]),
        })
    });
    assert!(to_transducer(&inst, b"").is_err());
}

#[test]
fn or_of_two_bits_succeeds_everywhere() {
    let g = or_compose(&[Program::trivial(Predicate::bit(0)), Program::trivial(Predicate::bit(1))]);
    let p = Program::graph(g.clone()).unwrap();
    let inputs = binary_inputs(2);
    let c = p.complexity(inputs.iter().map(|x| x.as_slice())).unwrap();
    let dense = compose(&g, 64).unwrap().program;
    for x in &inputs {
        let lazy = run_algorithm1(&g, c.w_plus, c.w_minus, x, &SimConfig::default()).unwrap();
        let explicit = run_algorithm1_dense(&dense, c.w_plus, c.w_minus, x, &SimConfig::default()).unwrap();
        assert!(lazy.success_probability >= 2.0 / 3.0);
        assert!((lazy.final_norm - 1.0).abs() < 1e-9);
        assert!((lazy.p_one - explicit.p_one).abs() < 1e-9);
        assert_eq!(lazy.iterations, rounds(c.w_plus, c.w_minus));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn transducer_witness_relations(seed in any::<u64>(), dim in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, labels) = common::random_dense(&mut rng, dim, 4);
        let inst = TwoSubspaceInstance::from_span_program(&p);
        for x in &labels {
            let u = to_transducer(&inst, x).unwrap();
            let n = u.nrows();
            prop_assert!((u.transpose() * &u - DMatrix::identity(n, n)).norm() < 1e-9);
            let w = p.witness(x).unwrap();
            prop_assert!(transduction_residual(&u, w.witness.as_ref().unwrap(), w.sign) < 1e-8);
        }
    }

    #[test]
    fn algorithm_decides_random_compositions(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_composition(&mut rng, 3, 3, 2);
        let p = Program::graph(g.clone()).unwrap();
        let inputs = binary_inputs(2);
        let c = p.complexity(inputs.iter().map(|x| x.as_slice())).unwrap();
        prop_assume!(c.has_positive && c.has_negative);
        for x in &inputs {
            let r = run_algorithm1(&g, c.w_plus, c.w_minus, x, &SimConfig::default()).unwrap();
            prop_assert!(r.success_probability >= 2.0 / 3.0, "{} on {}", r.success_probability, r.input);
            prop_assert!((r.final_norm - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn adversary_constraints_hold(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = random_composition(&mut rng, 3, 4, 3);
        let lazy = Program::graph(g.clone()).unwrap();
        let dense = compose(&g, 64).unwrap().program;
        let inputs = binary_inputs(3);
        let f = |x: &[u8]| lazy.accepts(x).unwrap();
        let report = adversary_feasibility(&dense, &inputs, &f).unwrap();
        prop_assert_eq!(report.pairs, inputs.len() * inputs.len());
        prop_assert!(report.max_residual < 1e-8);
    }
}
