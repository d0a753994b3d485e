use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use wavecheck::entropy::debruijn::{debruijn_check, GaussianMixture};
use wavecheck::entropy::discretize::{check_finombecsles, LadderSource};
use wavecheck::entropy::{functional_d, functional_d_gaussian, knn_entropy, submodularity_check, DEFAULT_K};
use wavecheck::tree_ball::{build_ball, BallKind};
use wavecheck::wave::{sample_wave_direct, WaveParams};

fn star_samples(p: &WaveParams, n: usize, seed: u64) -> Vec<Vec<f64>> {
    let ball = build_ball(BallKind::Star, p.d, 0).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    sample_wave_direct(&ball, p, n, &mut r)
        .unwrap()
        .into_iter()
        .map(|s| {
            // ball order is (center, neighbors); the functional wants (neighbors, center)
            let mut v = s[1..].to_vec();
            v.push(s[0]);
            v
        })
        .collect()
}

#[test]
fn finombecsles_ladder_closes() {
    let rep = check_finombecsles(LadderSource::Gaussian { var: 1.0, samples: 200_000 }, 1.0, &[4, 16, 64], 9).unwrap();
    assert!(rep.gaps_decreasing, "{rep:?}");
    let last = rep.rows.last().unwrap();
    assert!(last.gap <= 0.02, "{last:?}");
    for row in &rep.rows {
        let exact = row.exact.unwrap();
        assert!((row.plug_in.value - exact).abs() < 4.0 * row.plug_in.stderr + 0.01, "{row:?}");
    }
}

#[test]
fn debruijn_mixtures() {
    let m1 = GaussianMixture::new(vec![0.5, 0.5], vec![vec![-2.0], vec![2.0]], vec![vec![1.0], vec![1.0]]).unwrap();
    let rep = debruijn_check(&m1, &[0.1, 1.0]).unwrap();
    assert!(rep.passed, "{rep:?}");
    let m2 = GaussianMixture::new(
        vec![0.3, 0.7],
        vec![vec![-1.0, 0.5], vec![1.5, -0.5]],
        vec![vec![0.8, 1.2], vec![1.0, 0.5]],
    )
    .unwrap();
    let rep = debruijn_check(&m2, &[0.1, 1.0]).unwrap();
    assert!(rep.passed, "{rep:?}");
    let far = debruijn_check(&m1, &[0.0, 0.5, 2.0, 8.0, 32.0]).unwrap();
    assert!(far.fisher_monotone);
}

#[test]
fn knn_affine_consistency() {
    let mut r = ChaCha8Rng::seed_from_u64(4);
    let xs: Vec<Vec<f64>> = (0..50_000).map(|_| vec![r.sample(StandardNormal), r.random::<f64>()]).collect();
    let a = [[1.5, 0.4], [-0.3, 0.8]];
    let det: f64 = a[0][0] * a[1][1] - a[0][1] * a[1][0];
    let ys: Vec<Vec<f64>> = xs
        .iter()
        .map(|x| vec![a[0][0] * x[0] + a[0][1] * x[1] + 3.0, a[1][0] * x[0] + a[1][1] * x[1] - 1.0])
        .collect();
    let ex = knn_entropy(&xs, DEFAULT_K).unwrap();
    let ey = knn_entropy(&ys, DEFAULT_K).unwrap();
    assert!((ey.value - ex.value - det.abs().ln()).abs() < 0.05);
    let twice: Vec<Vec<f64>> = xs.iter().map(|x| x.iter().map(|v| 2.0 * v).collect()).collect();
    let e2 = knn_entropy(&twice, DEFAULT_K).unwrap();
    assert!((e2.value - ex.value - 2.0 * 2f64.ln()).abs() < 0.05);
}

#[test]
fn submodularity_random() {
    let mut r = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..20 {
        let b = DMatrix::from_fn(6, 6, |_, _| r.sample::<f64, _>(StandardNormal));
        let s = &b * b.transpose() + DMatrix::identity(6, 6) * 0.1;
        let rep = submodularity_check(&s, &[0, 1], &[2], &[3, 4, 5]).unwrap();
        assert!(rep.holds && rep.gap >= 0.0);
    }
}

#[test]
fn functional_on_gaussian_wave() {
    let p = WaveParams::new(3, 1.0).unwrap();
    let cf = functional_d_gaussian(&p).unwrap();
    let est = functional_d(&star_samples(&p, 100_000, 6), &p).unwrap();
    eprintln!("closed {} est {} ± {}", cf.value, est.value, est.stderr);
    assert!((est.value - cf.value).abs() < 0.1);
    let scaled: Vec<Vec<f64>> = star_samples(&p, 100_000, 6).into_iter().map(|s| s.iter().map(|x| 3.0 * x).collect()).collect();
    let est3 = functional_d(&scaled, &p).unwrap();
    assert!((est3.value - est.value).abs() < 3.0 * est.stderr.max(0.01));
    let other = functional_d(&star_samples(&p, 100_000, 7), &p).unwrap();
    assert!((other.value - est.value).abs() < 2.0 * (est.stderr.powi(2) + other.stderr.powi(2)).sqrt().max(0.02));
}

#[test]
fn scale_mixture_does_not_beat_gaussian() {
    let p = WaveParams::new(3, 1.0).unwrap();
    let cf = functional_d_gaussian(&p).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(8);
    let s_hi = (2.0f64 - 0.36).sqrt();
    let mixed: Vec<Vec<f64>> = star_samples(&p, 100_000, 9)
        .into_iter()
        .map(|v| {
            let s = if r.random::<bool>() { 0.6 } else { s_hi };
            v.iter().map(|x| s * x).collect()
        })
        .collect();
    let est = functional_d(&mixed, &p).unwrap();
    eprintln!("mixture {} vs closed {}", est.value, cf.value);
    assert!(est.value <= cf.value + 0.05);
}
