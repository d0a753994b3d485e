use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use wavecheck::eigenlab::{almost_eig_bound_check, eigendecompose, lambda2, residual, spectral_window_vector, SpectralMode};
use wavecheck::entropy::debruijn::{debruijn_check, GaussianMixture};
use wavecheck::entropy::discretize::{check_finombecsles, LadderSource};
use wavecheck::frame::{build_frame, umbrella_check};
use wavecheck::graph::{essential_girth_omega, load_edge_list, random_regular_with_cap, save_edge_list, RegularGraph, DEFAULT_MAX_ATTEMPTS};
use wavecheck::lift::{entropy_inequality_check, local_stats};
use wavecheck::spectrum::{conditional_independence_check, delta_k};
use wavecheck::tree_ball::{build_ball, BallIndex, BallKind};
use wavecheck::wave::{apply_local_kernel, linear_factor_coeffs, localized_tree_residual, localized_vector, spherical_table, WaveParams};
use wavecheck::{Error, Result};

use crate::config::ExperimentConfig;

fn to_value<T: serde::Serialize>(x: &T) -> Result<Value> {
    serde_json::to_value(x).map_err(|e| Error::Numerical(e.to_string()))
}

fn bad(msg: impl Into<String>) -> Error {
    Error::InvalidParameter(msg.into())
}

fn rng(cfg: &ExperimentConfig) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(cfg.seed.unwrap_or(0))
}

fn degree(cfg: &ExperimentConfig) -> usize {
    cfg.d.unwrap_or(3)
}

fn lambda(cfg: &ExperimentConfig) -> f64 {
    cfg.lambda.unwrap_or(1.0)
}

/// Writes tidy CSV rows when `--csv` is set.
fn write_csv(cfg: &ExperimentConfig, header: &str, rows: impl IntoIterator<Item = String>) -> Result<()> {
    let Some(path) = &cfg.csv else {
        return Ok(());
    };
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{header}")?;
    for row in rows {
        writeln!(w, "{row}")?;
    }
    w.flush()?;
    Ok(())
}

fn load_graph(path: &Path) -> Result<RegularGraph> {
    let f = File::open(path).map_err(|e| bad(format!("cannot open {}: {e}", path.display())))?;
    load_edge_list(BufReader::new(f))
}

/// The input graph, or a fresh sample from the config seed.
fn graph(cfg: &ExperimentConfig, default_n: usize, rng: &mut ChaCha8Rng) -> Result<RegularGraph> {
    match &cfg.input {
        Some(path) => {
            let g = load_graph(path)?;
            if cfg.d.is_some_and(|d| d != g.d()) {
                return Err(bad(format!("--d {} disagrees with the input graph degree {}", degree(cfg), g.d())));
            }
            Ok(g)
        }
        None => random_regular_with_cap(
            cfg.n.unwrap_or(default_n),
            degree(cfg),
            cfg.max_attempts.unwrap_or(DEFAULT_MAX_ATTEMPTS),
            rng,
        ),
    }
}

fn ball(cfg: &ExperimentConfig, d: usize) -> Result<BallIndex> {
    let kind = match cfg.ball.as_deref().unwrap_or("star") {
        "star" => BallKind::Star,
        "edge" => BallKind::Edge,
        other => return Err(bad(format!("unknown ball '{other}', expected star or edge"))),
    };
    build_ball(kind, d, cfg.k.unwrap_or(1))
}

fn scaled(v: &[f64]) -> impl Iterator<Item = String> + '_ {
    let s = (v.len() as f64).sqrt();
    v.iter().enumerate().map(move |(i, x)| format!("{i},{}", s * x))
}

pub fn gen(cfg: &ExperimentConfig) -> Result<Value> {
    let out = cfg.out.as_ref().ok_or_else(|| bad("gen needs --out for the edge list"))?;
    let mut r = rng(cfg);
    let g = graph(cfg, 2000, &mut r)?;
    let mut w = BufWriter::new(File::create(out)?);
    save_edge_list(&g, &mut w)?;
    drop(w);
    let mut summary = json!({
        "n": g.n(),
        "d": g.d(),
        "edge_count": g.edge_count(),
        "connected": g.is_connected(),
        "edge_list": out.display().to_string(),
    });
    if cfg.omega.unwrap_or(false) {
        let l_max = cfg.l_max.unwrap_or(30);
        summary["omega"] = json!(essential_girth_omega(&g, l_max)?);
        summary["l_max"] = json!(l_max);
    }
    if cfg.lambda2.unwrap_or(false) {
        summary["lambda2"] = json!(lambda2(&g)?);
    }
    write_csv(cfg, "u,v", g.edges().into_iter().map(|(u, v)| format!("{u},{v}")))?;
    Ok(summary)
}

pub fn wave(cfg: &ExperimentConfig) -> Result<Value> {
    let (d, lam) = (degree(cfg), lambda(cfg));
    let bound = 2.0 * (d.max(1) as f64 - 1.0).sqrt();
    if lam.abs() > bound {
        return Err(Error::OutOfSpectrum { lambda: lam, bound });
    }
    let p = WaveParams::new(d, lam)?;
    match cfg.check.as_deref() {
        Some("markov") => {
            let rep = conditional_independence_check(&p, cfg.k.unwrap_or(2))?;
            write_csv(cfg, "k,quantity,value", [format!("{},max_partial_covariance,{}", rep.k, rep.max_partial_covariance)])?;
            Ok(json!({ "check": "markov", "markov": to_value(&rep)? }))
        }
        Some(other) => Err(bad(format!("unknown wave check '{other}', expected markov"))),
        None => {
            let kmax = cfg.k.unwrap_or(8);
            if kmax == 0 {
                return Err(bad("k must be at least 1"));
            }
            let rows = (1..=kmax).map(|k| delta_k(&p, k)).collect::<Result<Vec<_>>>()?;
            write_csv(
                cfg,
                "k,quantity,value",
                rows.iter().flat_map(|r| {
                    [
                        ("s1", r.s1),
                        ("s2", r.s2),
                        ("s3", r.s3),
                        ("s4", r.s4),
                        ("delta_bruteforce", r.delta),
                        ("delta_closed_form", r.closed_form_delta),
                    ]
                    .map(|(q, v)| format!("{},{q},{v}", r.k))
                }),
            )?;
            Ok(json!({
                "d": p.d,
                "lambda": p.lambda,
                "f": spherical_table(kmax + 2, &p),
                "rows": to_value(&rows)?,
            }))
        }
    }
}

/// Builds the requested almost eigenvector and a description of it.
fn construct_vector(cfg: &ExperimentConfig, g: &RegularGraph, lam: f64, default_mode: &str, r: &mut ChaCha8Rng) -> Result<(Vec<f64>, Value)> {
    let p = WaveParams::new(g.d(), lam)?;
    match cfg.mode.as_deref().unwrap_or(default_mode) {
        "window" => {
            let eps = cfg.epsilon.unwrap_or(0.05);
            let sd = eigendecompose(g, SpectralMode::Dense)?;
            let v = spectral_window_vector(&sd, lam, eps, r)?;
            let l2 = lambda2(g)?;
            let res = residual(g, &v, lam)?;
            let bound = almost_eig_bound_check(g, &v, lam, eps.max(res), l2)?;
            Ok((v, json!({ "mode": "window", "eps": eps, "bound": to_value(&bound)? })))
        }
        "localized" => {
            let rad = cfg.r.unwrap_or(4);
            let v = localized_vector(g, 0, rad, &p)?;
            Ok((v, json!({ "mode": "localized", "r": rad, "center": 0, "tree_residual": localized_tree_residual(&p, rad)? })))
        }
        "kernel" => {
            let rad = cfg.r.unwrap_or(4);
            let kc = linear_factor_coeffs(&p, rad)?;
            let v = apply_local_kernel(g, &kc, r)?;
            Ok((v, json!({ "mode": "kernel", "r": rad, "coefficients": kc.c, "objective": kc.objective })))
        }
        other => Err(bad(format!("unknown mode '{other}', expected window, localized or kernel"))),
    }
}

pub fn almost_eig(cfg: &ExperimentConfig) -> Result<Value> {
    let mut r = rng(cfg);
    let g = graph(cfg, 2000, &mut r)?;
    let lam = lambda(cfg);
    let (v, vector) = construct_vector(cfg, &g, lam, "window", &mut r)?;
    let b = ball(cfg, g.d())?;
    let stats = local_stats(&g, &v, lam, &b, cfg.samples.unwrap_or(100_000), &mut r)?;
    write_csv(cfg, "vertex,value", scaled(&v))?;
    Ok(json!({ "vector": vector, "stats": to_value(&stats)? }))
}

pub fn lift_stats(cfg: &ExperimentConfig) -> Result<Value> {
    let mut r = rng(cfg);
    let g = graph(cfg, 2000, &mut r)?;
    let lam = lambda(cfg);
    let sd = eigendecompose(&g, SpectralMode::Dense)?;
    let i = sd.nearest_nonconstant(lam).ok_or_else(|| Error::Precondition("graph has no non-constant eigenvector".into()))?;
    let v = sd.vector(i);
    let b = ball(cfg, g.d())?;
    let stats = local_stats(&g, &v, lam, &b, cfg.samples.unwrap_or(100_000), &mut r)?;
    write_csv(cfg, "vertex,value", scaled(&v))?;
    Ok(json!({ "eigenvalue": sd.eigenvalues[i], "index": i, "stats": to_value(&stats)? }))
}

fn default_mixtures() -> Result<Vec<GaussianMixture>> {
    Ok(vec![
        GaussianMixture::new(vec![0.5, 0.5], vec![vec![-2.0], vec![2.0]], vec![vec![1.0], vec![1.0]])?,
        GaussianMixture::new(
            vec![0.4, 0.6],
            vec![vec![-1.0, 0.5], vec![1.5, -0.5]],
            vec![vec![0.8, 1.2], vec![1.0, 0.5]],
        )?,
    ])
}

pub fn entropy(cfg: &ExperimentConfig) -> Result<Value> {
    match cfg.check.as_deref() {
        Some("debruijn") => {
            let t = cfg.t.clone().unwrap_or_else(|| vec![0.1, 0.5, 1.0]);
            let reports = default_mixtures()?.iter().map(|m| debruijn_check(m, &t)).collect::<Result<Vec<_>>>()?;
            write_csv(
                cfg,
                "mixture,dim,t,entropy,fd_derivative,fisher,rel_err",
                reports.iter().enumerate().flat_map(|(i, rep)| {
                    rep.rows.iter().map(move |row| {
                        format!("{i},{},{},{},{},{},{}", rep.dim, row.t, row.entropy, row.fd_derivative, row.fisher, row.rel_err)
                    })
                }),
            )?;
            let passed = reports.iter().all(|r| r.passed);
            Ok(json!({ "check": "debruijn", "passed": passed, "mixtures": to_value(&reports)? }))
        }
        Some("discmain") => {
            let mut r = rng(cfg);
            let g = graph(cfg, 5000, &mut r)?;
            let lam = lambda(cfg);
            let cfg6 = ExperimentConfig { r: cfg.r.or(Some(6)), ..cfg.clone() };
            let (v, vector) = construct_vector(&cfg6, &g, lam, "kernel", &mut r)?;
            let a = cfg.a.as_ref().and_then(|a| a.first().copied()).unwrap_or(2);
            let rep = entropy_inequality_check(
                &g,
                &v,
                cfg.sigma.unwrap_or(0.5),
                a,
                cfg.samples.unwrap_or(1_000_000),
                cfg.colorings.unwrap_or(20),
                &mut r,
            )?;
            write_csv(
                cfg,
                "coloring,h_star,h_edge,lhs,margin",
                rep.colorings
                    .iter()
                    .enumerate()
                    .map(|(i, c)| format!("{i},{},{},{},{}", c.h_star.value, c.h_edge.value, c.lhs, c.margin)),
            )?;
            Ok(json!({ "check": "discmain", "vector": vector, "report": to_value(&rep)? }))
        }
        Some("finombecsles") => {
            let ladder = cfg.a.clone().unwrap_or_else(|| vec![4, 16, 64]);
            let seed = rng(cfg).random();
            let source = LadderSource::Gaussian { var: 1.0, samples: cfg.samples.unwrap_or(1_000_000) };
            let rep = check_finombecsles(source, cfg.sigma.unwrap_or(1.0), &ladder, seed)?;
            write_csv(
                cfg,
                "a,plug_in,plug_in_stderr,scaled,target,gap",
                rep.rows
                    .iter()
                    .map(|row| format!("{},{},{},{},{},{}", row.a, row.plug_in.value, row.plug_in.stderr, row.scaled, row.target.value, row.gap)),
            )?;
            Ok(json!({ "check": "finombecsles", "report": to_value(&rep)? }))
        }
        Some(other) => Err(bad(format!("unknown entropy check '{other}', expected debruijn, discmain or finombecsles"))),
        None => Err(bad("entropy needs --check debruijn|discmain|finombecsles")),
    }
}

pub fn frame(cfg: &ExperimentConfig) -> Result<Value> {
    let fr = build_frame(degree(cfg), lambda(cfg))?;
    let mut r = rng(cfg);
    let dim = fr.w.len();
    let umbrella: Vec<f64> = (0..cfg.samples.unwrap_or(5))
        .map(|_| {
            let u: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
            umbrella_check(&fr, &u).max()
        })
        .collect();
    let named = fr
        .vs
        .iter()
        .enumerate()
        .map(|(i, v)| (format!("v{i}"), v))
        .chain(std::iter::once(("w".to_string(), &fr.w)));
    write_csv(
        cfg,
        "vector,component,value",
        named.flat_map(|(name, v)| v.iter().enumerate().map(move |(c, x)| format!("{name},{c},{x}")).collect::<Vec<_>>()),
    )?;
    Ok(json!({
        "frame": to_value(&fr)?,
        "invariant_defect": fr.invariant_defect(),
        "umbrella_max_residuals": umbrella,
    }))
}
