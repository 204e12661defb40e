use proptest::prelude::*;

use teachdim::oracle::{
    atsp_brute_force, atsp_held_karp, check_walk, exact_metal_reduction_instance, exhaustive_min_session_length,
    random_strongly_connected, reduce_atsp_to_teaching, Digraph, OracleError, CERTIFY_EPSILONS,
};

#[test]
fn held_karp_equals_brute_force_on_weighted_corpus() {
    for i in 0..60u64 {
        let n = 1 + (i as usize % 8);
        let g = random_strongly_connected(n, 9, 0.3, i).unwrap();
        let hk = atsp_held_karp(&g).unwrap();
        assert_eq!(hk.length, atsp_brute_force(&g).unwrap(), "graph {i}");
        assert_eq!(check_walk(&g, &hk.walk).unwrap(), hk.length);
    }
}

#[test]
fn six_vertex_example_matches_permutations() {
    let g = random_strongly_connected(6, 9, 0.4, 2024).unwrap();
    assert_eq!(atsp_held_karp(&g).unwrap().length, atsp_brute_force(&g).unwrap());
}

#[test]
fn reduction_soundness_and_minimality() {
    for i in 0..30u64 {
        let n = 2 + (i as usize % 5);
        let g = random_strongly_connected(n, 1, 0.2, 100 + i).unwrap();
        let cert = exact_metal_reduction_instance(&g, &CERTIFY_EPSILONS, i).unwrap();
        assert_eq!(cert.session_length, cert.length + 1);
        assert_eq!(cert.walk.len() as u64, cert.session_length);
        let red = reduce_atsp_to_teaching(&g, 0.3).unwrap();
        assert_eq!(exhaustive_min_session_length(&red.problem).unwrap(), cert.session_length);
        assert_eq!(cert.horizon_raised, cert.nominal_horizon < cert.walk.len());
    }
}

#[test]
fn reduction_needs_unit_weights() {
    let g = Digraph::new(2, 0, vec![(0, 1, 2), (1, 0, 1)]).unwrap();
    assert!(matches!(reduce_atsp_to_teaching(&g, 0.0), Err(OracleError::InvalidGraph(_))));
}

#[test]
fn size_limits() {
    let g = random_strongly_connected(10, 1, 0.1, 0).unwrap();
    assert!(matches!(atsp_brute_force(&g), Err(OracleError::TooLarge { .. })));
    let g = random_strongly_connected(21, 1, 0.0, 0).unwrap();
    assert!(matches!(atsp_held_karp(&g), Err(OracleError::TooLarge { .. })));
}

#[test]
fn held_karp_handles_twenty_vertices() {
    // a directed 20-cycle has exactly one covering walk
    let g = Digraph::new(20, 0, (0..20).map(|u| (u, (u + 1) % 20, 1)).collect()).unwrap();
    let hk = atsp_held_karp(&g).unwrap();
    assert_eq!(hk.length, 19);
    assert_eq!(hk.walk, (0..20).collect::<Vec<_>>());
}

#[test]
fn graph_json_rejects_bad_edges() {
    assert!(Digraph::from_json(r#"{"n":2,"start":0,"edges":[[0,5,1]]}"#).is_err());
    assert!(Digraph::from_json(r#"{"n":2,"start":0,"edges":[[0,1,0],[1,0,1]]}"#).is_err());
    let g = Digraph::from_json(r#"{"n":2,"start":0,"edges":[[0,1,1],[1,0,1]]}"#).unwrap();
    assert_eq!(g.vertex_count(), 2);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn walks_are_valid(n in 1usize..9, w in 1u32..9, extra in 0.0f64..0.6, seed in any::<u64>()) {
        let g = random_strongly_connected(n, w, extra, seed).unwrap();
        let hk = atsp_held_karp(&g).unwrap();
        prop_assert_eq!(hk.walk[0], g.start());
        for pair in hk.walk.windows(2) {
            prop_assert!(g.has_edge(pair[0], pair[1]));
        }
        prop_assert_eq!(check_walk(&g, &hk.walk).unwrap(), hk.length);
        prop_assert_eq!(hk.length, atsp_brute_force(&g).unwrap());
    }
}
