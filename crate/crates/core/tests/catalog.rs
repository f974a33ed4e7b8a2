//! Catalog constructions against brute-force membership tests written
//! independently of the library oracles.

mod common;

use proptest::prelude::*;
use spanflow::catalog::{
    self, deterministic_sample, exact_weight, gapped_majority, inc_subseq_3, is_deterministic_sample, pattern_matching,
    sigma202, smallest_period, threshold, threshold_symmetric, ProblemSpec,
};
use spanflow::graphcomp::Program;
use spanflow::spanprog::{binary_inputs, weight};

fn accepts(p: &Program, x: &[u8]) -> bool {
    p.accepts(x).unwrap()
}

fn occurs(x: &[u8], y: &[u8]) -> bool {
    x.windows(y.len()).any(|w| w == y)
}

fn two_zeros_two(x: &[u8]) -> bool {
    (0..x.len()).any(|i| x[i] == b'2' && (i + 1..x.len()).any(|j| x[j] == b'2' && x[i + 1..j].iter().all(|&c| c == b'0')))
}

fn balanced(x: &[u8], depth: i32) -> bool {
    let mut w = 0;
    for &c in x {
        w += if c == b'(' { 1 } else { -1 };
        if !(0..=depth).contains(&w) {
            return false;
        }
    }
    w == 0
}

fn increasing_triple(x: &[u8]) -> bool {
    let n = x.len();
    (0..n).any(|i| (i + 1..n).any(|j| x[i] < x[j] && (j + 1..n).any(|k| x[j] < x[k])))
}

#[test]
fn threshold_matches_closed_form() {
    for n in 1..=6 {
        for k in 1..=n {
            let p = Program::graph(threshold(n, k).unwrap()).unwrap();
            for x in binary_inputs(n) {
                let e = p.evaluate(&x).unwrap();
                let (pos, size) = common::threshold_oracle(n, k, weight(&x));
                assert_eq!(e.positive, pos);
                assert!(common::rel(e.size, size) < 1e-9);
                let sym = threshold_symmetric(n, k, weight(&x));
                assert!(common::rel(sym.size, size) < 1e-9);
            }
        }
    }
    assert!(threshold(3, 0).is_err());
    assert!(threshold(3, 4).is_err());
}

#[test]
fn exact_weight_and_gapped_majority_decide_their_functions() {
    for n in 1..=5 {
        for k in 0..=n {
            let p = Program::graph(exact_weight(n, k).unwrap()).unwrap();
            for x in binary_inputs(n) {
                assert_eq!(accepts(&p, &x), weight(&x) == k, "n={n} k={k}");
            }
        }
    }
    let n = 6;
    let p = Program::graph(gapped_majority(n).unwrap()).unwrap();
    for x in binary_inputs(n) {
        let h = weight(&x);
        if catalog::gapped_promise(n, h) {
            assert_eq!(accepts(&p, &x), 2 * h >= n);
        }
    }
}

#[test]
fn string_problems_on_every_short_input() {
    let p = Program::graph(sigma202(6).unwrap()).unwrap();
    for x in catalog::all_strings(b"012", 6) {
        assert_eq!(accepts(&p, &x), two_zeros_two(&x));
    }
    for depth in 1..=3 {
        let p = Program::graph(catalog::dyck(8, depth).unwrap()).unwrap();
        for x in catalog::all_strings(b"()", 8) {
            assert_eq!(accepts(&p, &x), balanced(&x, depth as i32), "depth {depth}");
        }
    }
    assert!(catalog::dyck(7, 2).is_err());
    let p = Program::graph(inc_subseq_3(5).unwrap()).unwrap();
    for x in catalog::all_strings(b"0123", 5) {
        assert_eq!(accepts(&p, &x), increasing_triple(&x));
    }
}

#[test]
fn problem_specs_round_trip_through_json() {
    let spec: ProblemSpec = serde_json::from_str(r#"{"problem":"pattern-matching","n":6,"pattern":"0110"}"#).unwrap();
    assert_eq!(spec.len(), 6);
    assert_eq!(spec.alphabet(), b"01".to_vec());
    let back: ProblemSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
    assert_eq!(back, spec);
    let p = Program::graph(spec.build().unwrap()).unwrap();
    for x in catalog::all_strings(b"01", 6) {
        assert_eq!(accepts(&p, &x), occurs(&x, b"0110"));
        assert_eq!(spec.oracle(&x), occurs(&x, b"0110"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pattern_matching_agrees_with_window_scan(
        y in prop::collection::vec(prop::sample::select(vec![b'0', b'1']), 1..5),
        xs in prop::collection::vec(prop::collection::vec(prop::sample::select(vec![b'0', b'1']), 9), 8),
    ) {
        let pm = pattern_matching(9, &y).unwrap();
        let p = Program::graph(pm.graph).unwrap();
        prop_assert_eq!(pm.period.is_some(), 2 * smallest_period(&y) <= y.len());
        for x in &xs {
            prop_assert_eq!(accepts(&p, x), occurs(x, &y));
        }
    }

    #[test]
    fn samples_rule_out_close_shifts(y in prop::collection::vec(prop::sample::select(vec![b'0', b'1']), 2..12)) {
        prop_assume!(2 * smallest_period(&y) > y.len());
        let s = deterministic_sample(&y).unwrap();
        prop_assert!(is_deterministic_sample(&y, &s));
        prop_assert!(s.positions.len() as f64 <= (y.len() as f64).log2().max(1.0));
    }

    #[test]
    fn threshold_symmetric_is_consistent(n in 1usize..40, k_frac in 0.0f64..1.0, h_frac in 0.0f64..=1.0) {
        let k = 1 + ((n - 1) as f64 * k_frac) as usize;
        let h = (n as f64 * h_frac) as usize;
        let e = threshold_symmetric(n, k, h);
        let (pos, size) = common::threshold_oracle(n, k, h);
        prop_assert_eq!(e.positive, pos);
        prop_assert!(common::rel(e.size, size) < 1e-9);
    }
}
