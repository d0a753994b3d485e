use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wavecheck::eigenlab::*;
use wavecheck::graph::random_regular;

#[test]
fn dense_basis_is_orthonormal() {
    let g = random_regular(400, 3, &mut ChaCha8Rng::seed_from_u64(2)).unwrap();
    let sd = eigendecompose(&g, SpectralMode::Dense).unwrap();
    assert_eq!(sd.len(), 400);
    let x: Vec<f64> = (0..400).map(|i| ((i * 37 % 101) as f64 - 50.0) / 17.0).collect();
    let total: f64 = x.iter().map(|a| a * a).sum();
    let parseval: f64 = (0..sd.len())
        .map(|i| sd.vector(i).iter().zip(&x).map(|(q, a)| q * a).sum::<f64>().powi(2))
        .sum();
    assert!((parseval - total).abs() <= 1e-10 * total);
    assert!(sd.max_residual <= 1e-9);
    assert!((sd.eigenvalues[399] - 3.0).abs() < 1e-10);
}

#[test]
fn window_vectors_tighten_with_eps() {
    let g = random_regular(1000, 3, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
    let sd = eigendecompose(&g, SpectralMode::Dense).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(6);
    for eps in [0.2, 0.05, 0.01] {
        let v = spectral_window_vector(&sd, 1.0, eps, &mut r).unwrap();
        assert!(residual(&g, &v, 1.0).unwrap() <= eps + 1e-12);
        assert!(v.iter().sum::<f64>().abs() <= 1e-9);
    }
}

#[test]
fn spectral_measure_approaches_kesten_mckay() {
    let tv = |n: usize| {
        let g = random_regular(n, 3, &mut ChaCha8Rng::seed_from_u64(n as u64)).unwrap();
        kesten_mckay_distance_values(3, &dense_eigenvalues(&g).unwrap(), 40).unwrap()
    };
    let (small, large) = (tv(300), tv(2000));
    assert!(large < small, "{large} vs {small}");
}

#[test]
fn csv_export_has_header_and_rows() {
    let g = random_regular(50, 3, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
    let sd = eigendecompose(&g, SpectralMode::Dense).unwrap();
    let mut buf = Vec::new();
    sd.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "lambda");
    assert_eq!(lines.len(), 51);
    let mut buf = Vec::new();
    sd.write_eigenvectors_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("vertex,q0,"));
    assert_eq!(text.lines().count(), 51);
}

#[test]
fn lanczos_lambda2_matches_dense() {
    let g = random_regular(800, 3, &mut ChaCha8Rng::seed_from_u64(12)).unwrap();
    let sd = eigendecompose(&g, SpectralMode::Dense).unwrap();
    assert!((lambda2(&g).unwrap() - lambda2_dense(&sd).unwrap()).abs() <= 1e-6);
}
