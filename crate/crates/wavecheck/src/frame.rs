//! Star frame: unit vectors `v_1..v_d`, `w` realizing the star covariance,
//! the rotated pairs `a_i = αw + βv_i`, `b_i = αv_i + βw` and the weights
//! `t₁, t₂` of the umbrella identity `‖u‖² = Σ t₁(u,a_i)² + t₂(u,b_i)²`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg;
use crate::wave::{spherical_f, WaveParams};

#[derive(Clone, Debug, Serialize)]
pub struct Frame {
    pub d: usize,
    pub lambda: f64,
    pub vs: Vec<Vec<f64>>,
    pub w: Vec<f64>,
    pub alpha: f64,
    pub beta: f64,
    pub as_: Vec<Vec<f64>>,
    pub bs: Vec<Vec<f64>>,
    pub t1: f64,
    pub t2: f64,
}

/// Branch with `|α| ≥ |β|` and `α + β ≥ 0`, so that `a_i → w` as `λ → 0`.
pub fn rotation(c: f64) -> (f64, f64) {
    let p = (1.0 / (1.0 + c)).sqrt();
    let m = (1.0 / (1.0 - c)).sqrt();
    ((p + m) / 2.0, (p - m) / 2.0)
}

pub fn build_frame(d: usize, lambda: f64) -> Result<Frame> {
    let p = WaveParams::new(d, lambda)?;
    p.check_spectrum()?;
    let f1 = spherical_f(1, &p);
    let f2 = spherical_f(2, &p);
    // order v_1..v_d, w
    let gram = DMatrix::from_fn(d + 1, d + 1, |i, j| {
        if i == j {
            1.0
        } else if i == d || j == d {
            f1
        } else {
            f2
        }
    });
    // rank is exactly d; a pivoted Cholesky loses it near λ = 0 where one
    // pivot is O(λ²)
    let (vals, vecs) = linalg::sym_eigen(&gram)?;
    if vals[0].abs() > 1e-10 || vals[1] <= 1e-10 {
        return Err(Error::Numerical(format!("star Gram matrix eigenvalues {:.3e}, {:.3e} do not give rank {d}", vals[0], vals[1])));
    }
    let row = |i: usize| -> Vec<f64> { (1..=d).map(|j| vecs[(i, j)] * vals[j].sqrt()).collect() };
    let vs: Vec<Vec<f64>> = (0..d).map(row).collect();
    let w = row(d);
    let c = lambda / d as f64;
    let (alpha, beta) = rotation(c);
    let comb = |x: &[f64], y: &[f64], a: f64, b: f64| -> Vec<f64> { x.iter().zip(y).map(|(x, y)| a * x + b * y).collect() };
    let as_: Vec<Vec<f64>> = vs.iter().map(|v| comb(&w, v, alpha, beta)).collect();
    let bs: Vec<Vec<f64>> = vs.iter().map(|v| comb(v, &w, alpha, beta)).collect();
    let aw2 = (alpha + beta * c).powi(2);
    let bw2 = (alpha * c + beta).powi(2);
    let dd = d as f64;
    let raw = (bw2 - 1.0 / dd) / (bw2 - aw2);
    if !(-1e-12..=1.0 + 1e-12).contains(&raw) {
        return Err(Error::OutOfSpectrum { lambda, bound: p.spectral_bound() });
    }
    let t1 = raw.clamp(0.0, 1.0);
    Ok(Frame { d, lambda, vs, w, alpha, beta, as_, bs, t1, t2: 1.0 - t1 })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[derive(Clone, Debug, Serialize)]
pub struct UmbrellaResidual {
    /// `|‖u‖² − Σ_i (t₁(u,a_i)² + t₂(u,b_i)²)|`.
    pub combined: f64,
    /// Umbrella formula for `Σ (u,a_i)²`.
    pub a_system: f64,
    /// Umbrella formula for `Σ (u,b_i)²`.
    pub b_system: f64,
    /// Umbrella formula for `Σ (u,v_i)²`.
    pub v_system: f64,
}

impl UmbrellaResidual {
    pub fn max(&self) -> f64 {
        self.combined.max(self.a_system).max(self.b_system).max(self.v_system)
    }
}

/// Residual of `Σ_i (u,x_i)² = (1−c²) d/(d−1) ‖u − (u,w)w‖² + c² d (u,w)²`
/// with `c = (x_i, w)`.
fn umbrella(xs: &[Vec<f64>], w: &[f64], u: &[f64]) -> f64 {
    let d = xs.len() as f64;
    let c = dot(&xs[0], w);
    let uw = dot(u, w);
    let perp2 = dot(u, u) - uw * uw;
    let lhs: f64 = xs.iter().map(|x| dot(u, x).powi(2)).sum();
    let rhs = (1.0 - c * c) * d / (d - 1.0) * perp2 + c * c * d * uw * uw;
    (lhs - rhs).abs()
}

pub fn umbrella_check(fr: &Frame, u: &[f64]) -> UmbrellaResidual {
    let total: f64 = fr
        .as_
        .iter()
        .zip(&fr.bs)
        .map(|(a, b)| fr.t1 * dot(u, a).powi(2) + fr.t2 * dot(u, b).powi(2))
        .sum();
    UmbrellaResidual {
        combined: (dot(u, u) - total).abs(),
        a_system: umbrella(&fr.as_, &fr.w, u),
        b_system: umbrella(&fr.bs, &fr.w, u),
        v_system: umbrella(&fr.vs, &fr.w, u),
    }
}

impl Frame {
    /// Largest violation of the Gram, normalization and weight invariants.
    pub fn invariant_defect(&self) -> f64 {
        let c = self.lambda / self.d as f64;
        let f2 = (self.lambda * self.lambda - self.d as f64) / (self.d as f64 * (self.d - 1) as f64);
        let mut worst: f64 = (dot(&self.w, &self.w) - 1.0).abs();
        for i in 0..self.d {
            worst = worst.max((dot(&self.vs[i], &self.w) - c).abs());
            worst = worst.max((dot(&self.as_[i], &self.as_[i]) - 1.0).abs());
            worst = worst.max((dot(&self.bs[i], &self.bs[i]) - 1.0).abs());
            worst = worst.max(dot(&self.as_[i], &self.bs[i]).abs());
            for j in 0..self.d {
                let target = if i == j { 1.0 } else { f2 };
                worst = worst.max((dot(&self.vs[i], &self.vs[j]) - target).abs());
            }
        }
        let sum = self.vs.iter().fold(DVector::zeros(self.d), |acc, v| acc + DVector::from_column_slice(v));
        let lw = DVector::from_column_slice(&self.w) * self.lambda;
        worst = worst.max((sum - lw).norm());
        worst.max((self.t1 + self.t2 - 1.0).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_zero() {
        let f = build_frame(3, 0.0).unwrap();
        assert!((f.alpha * f.beta).abs() < 1e-15);
        assert!((f.alpha.powi(2) + f.beta.powi(2) - 1.0).abs() < 1e-15);
        assert!((f.t1 - 1.0 / 3.0).abs() < 1e-12);
        for a in &f.as_ {
            assert!(a.iter().zip(&f.w).all(|(x, y)| (x - y).abs() < 1e-12));
        }
        assert!(f.invariant_defect() < 1e-10);
    }

    #[test]
    fn spectral_edge() {
        let f = build_frame(3, 2.0 * 2f64.sqrt()).unwrap();
        assert!(f.t1.abs() < 1e-12 && (f.t2 - 1.0).abs() < 1e-12);
        assert!(build_frame(3, 2.9).is_err());
    }

    #[test]
    fn a_w_overlap() {
        for (d, lam) in [(3, 1.0), (4, -2.5), (6, 3.0)] {
            let f = build_frame(d, lam).unwrap();
            let c: f64 = lam / d as f64;
            let aw = dot(&f.as_[0], &f.w);
            assert!((aw * aw - (1.0 + (1.0 - c * c).sqrt()) / 2.0).abs() < 1e-10);
            assert!(f.invariant_defect() < 1e-10);
        }
    }

    #[test]
    fn umbrella_on_w_and_zero() {
        let f = build_frame(4, 1.3).unwrap();
        assert!(umbrella_check(&f, &f.w).max() < 1e-12);
        assert_eq!(umbrella_check(&f, &[0.0; 4]).max(), 0.0);
    }
}
