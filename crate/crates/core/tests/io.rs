//! File formats: round trips through JSON keep networks and compositions
//! intact, and malformed files are rejected with an error.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spanflow::graphcomp::Program;
use spanflow::io::{CompositionFile, ConvertSpec, NetworkFile, ProgramSpec};
use spanflow::netlab::effective_resistance;
use spanflow::spanprog::binary_inputs;
use spanflow::verify::{random_composition, random_network};

#[test]
fn malformed_files_are_rejected() {
    let dup = r#"{"vertices":["a","a"],"edges":[]}"#;
    assert!(serde_json::from_str::<NetworkFile>(dup).unwrap().to_network().is_err());
    let unknown = r#"{"vertices":["a","b"],"edges":[{"tail":"a","head":"c","r":1}]}"#;
    assert!(serde_json::from_str::<NetworkFile>(unknown).unwrap().to_network().is_err());
    let one_terminal = r#"{"vertices":["a","b"],"edges":[],"s":"a"}"#;
    assert!(serde_json::from_str::<NetworkFile>(one_terminal).unwrap().to_network().is_err());
    assert!(serde_json::from_str::<NetworkFile>(r#"{"vertices":["a"],"edges":[{"tail":"a","head":"a","r":"big"}]}"#).is_err());
    let bad_scale = r#"{"type":"scaled","alpha":-1,"program":{"type":"bit","index":0}}"#;
    assert!(serde_json::from_str::<ProgramSpec>(bad_scale).unwrap().to_program().is_err());
}

#[test]
fn program_kinds_parse() {
    let specs = [
        r#"{"type":"const","value":true}"#,
        r#"{"type":"not-bit","index":2}"#,
        r#"{"type":"symbol","index":0,"symbol":"(","negate":true}"#,
        r#"{"type":"less","i":0,"j":1}"#,
        r#"{"type":"not","program":{"type":"bit","index":0}}"#,
        r#"{"type":"catalog","spec":{"problem":"threshold","n":3,"k":2}}"#,
        r#"{"type":"tree","tree":{"query":0,"w0":1.0,"w1":2.0,"c0":{"leaf":"0"},"c1":{"leaf":"1"}}}"#,
    ];
    for s in specs {
        let spec: ProgramSpec = serde_json::from_str(s).unwrap();
        spec.to_program().unwrap();
    }
    let convert = r#"{"kind":"tree","tree":{"leaf":"1"}}"#;
    assert!(matches!(serde_json::from_str::<ConvertSpec>(convert).unwrap(), ConvertSpec::Tree { .. }));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn networks_round_trip(seed in any::<u64>(), v in 2usize..7, extra in 0usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut net = random_network(&mut rng, v, extra);
        net.set_terminals(0, v - 1);
        let text = serde_json::to_string(&NetworkFile::from_network(&net)).unwrap();
        let back = serde_json::from_str::<NetworkFile>(&text).unwrap().to_network().unwrap();
        prop_assert_eq!(&back, &net);
        prop_assert_eq!(effective_resistance(&back, 0, v - 1).unwrap(), effective_resistance(&net, 0, v - 1).unwrap());
    }

    #[test]
    fn compositions_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inner = Program::graph(random_composition(&mut rng, 3, 3, 3)).unwrap();
        let outer = spanflow::graphcomp::or_compose(&[inner.negated(), inner.scaled(2.0)]);
        let text = serde_json::to_string_pretty(&CompositionFile::from_graph(&outer).unwrap()).unwrap();
        let back = serde_json::from_str::<CompositionFile>(&text).unwrap().to_program().unwrap();
        let original = Program::graph(outer).unwrap();
        for x in binary_inputs(3) {
            prop_assert_eq!(back.evaluate(&x).unwrap(), original.evaluate(&x).unwrap());
        }
    }
}
