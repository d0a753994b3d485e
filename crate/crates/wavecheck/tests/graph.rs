use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wavecheck::graph::*;
use wavecheck::Error;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn regular_with_expected_edge_count(half in 5usize..200, d in 3usize..=5, seed in any::<u64>()) {
        let n = if d % 2 == 1 { 2 * half } else { half + d };
        let g = random_regular(n, d, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(g.edge_count(), n * d / 2);
        for v in 0..n {
            let nb = g.neighbors(v);
            prop_assert_eq!(nb.len(), d);
            prop_assert!(!nb.contains(&v));
            prop_assert!(nb.iter().all(|&u| g.neighbors(u).contains(&v)));
        }
    }

    #[test]
    fn edge_list_round_trip(half in 5usize..100, seed in any::<u64>()) {
        let g = random_regular(2 * half, 3, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let mut buf = Vec::new();
        save_edge_list(&g, &mut buf).unwrap();
        let h = load_edge_list(&buf[..]).unwrap();
        prop_assert_eq!(g.edges(), h.edges());
        prop_assert_eq!(g.d(), h.d());
    }
}

#[test]
fn generation_is_deterministic_per_seed() {
    let a = random_regular(500, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let b = random_regular(500, 3, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
    let c = random_regular(500, 3, &mut ChaCha8Rng::seed_from_u64(10)).unwrap();
    assert_eq!(a.edges(), b.edges());
    assert_ne!(a.edges(), c.edges());
}

#[test]
fn connectivity_matches_bfs() {
    let k = complete_graph(3);
    assert!(k.is_connected());
    let two = disjoint_union(&k, &k).unwrap();
    assert!(!two.is_connected());
    assert_eq!(two.bfs_distances(0, usize::MAX).iter().filter(|&&x| x != usize::MAX).count(), 4);
    let g = random_regular(300, 3, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
    let reach = g.bfs_distances(0, usize::MAX).iter().filter(|&&x| x != usize::MAX).count();
    assert_eq!(g.is_connected(), reach == 300);
}

#[test]
fn pairing_acceptance_rate() {
    let mut r = ChaCha8Rng::seed_from_u64(11);
    let ok = (0..1000).filter(|_| pairing_attempt(1000, 3, &mut r).is_some()).count();
    let rate = ok as f64 / 1000.0;
    // limit is exp(-(d²-1)/4) ≈ 0.135
    assert!((0.05..=0.35).contains(&rate), "{rate}");
}

#[test]
fn few_short_cycles_at_ten_thousand() {
    let good = (0..10)
        .filter(|&s| {
            let g = random_regular(10_000, 3, &mut ChaCha8Rng::seed_from_u64(100 + s)).unwrap();
            essential_girth_omega(&g, 30).unwrap() <= 0.12
        })
        .count();
    assert!(good >= 9, "{good}/10");
}

#[test]
fn parse_errors_carry_line_numbers() {
    let cases: [(&str, usize); 5] = [
        ("4 3\n0 1\n0 x\n", 3),
        ("4\n", 1),
        ("4 3\n0 1\n0 9\n", 3),
        ("4 3\n0 1\n1 0\n", 3),
        ("4 3\n0 1\n0 0\n", 3),
    ];
    for (text, want) in cases {
        match load_edge_list(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, want, "{text:?}"),
            other => panic!("{text:?}: {other:?}"),
        }
    }
    let short = "4 3\n0 1\n0 2\n0 3\n1 2\n1 3\n";
    let err = load_edge_list(short.as_bytes()).unwrap_err();
    assert!(err.is_invalid_input() && err.to_string().contains("degree"));
}

#[test]
fn impossible_parameters_are_rejected() {
    let mut r = ChaCha8Rng::seed_from_u64(0);
    assert!(random_regular(7, 3, &mut r).unwrap_err().is_invalid_input());
    assert!(random_regular(3, 3, &mut r).unwrap_err().is_invalid_input());
}
