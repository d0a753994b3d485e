//! Heat flow of Gaussian mixtures: entropy and Fisher information by
//! adaptive quadrature, and the de Bruijn identity `∂_t 𝔻(f_t) = ∫‖∇f_t‖²/f_t`
//! for `∂_t f = Δf` (component variances grow by `2t`).

use serde::Serialize;

use crate::error::{invalid, Error, Result};

/// Mixture of Gaussians with diagonal covariances, in 1 or 2 dimensions.
#[derive(Clone, Debug, Serialize)]
pub struct GaussianMixture {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    pub vars: Vec<Vec<f64>>,
}

impl GaussianMixture {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, vars: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != means.len() || weights.len() != vars.len() {
            return invalid("mixture needs matching, non-empty weights, means and variances");
        }
        let dim = means[0].len();
        if !(1..=2).contains(&dim) {
            return invalid("mixtures are supported in 1 or 2 dimensions");
        }
        if means.iter().chain(&vars).any(|v| v.len() != dim) {
            return invalid("component dimensions differ");
        }
        if vars.iter().flatten().any(|&v| v <= 0.0 || !v.is_finite()) {
            return invalid("component variances must be positive");
        }
        let total: f64 = weights.iter().sum();
        if weights.iter().any(|&w| w < 0.0) || total <= 0.0 {
            return invalid("weights must be non-negative with positive sum");
        }
        let weights = weights.iter().map(|w| w / total).collect();
        Ok(GaussianMixture { weights, means, vars })
    }

    pub fn dim(&self) -> usize {
        self.means[0].len()
    }

    pub fn heated(&self, t: f64) -> Self {
        let vars = self.vars.iter().map(|v| v.iter().map(|s| s + 2.0 * t).collect()).collect();
        GaussianMixture { weights: self.weights.clone(), means: self.means.clone(), vars }
    }

    /// `log f(x)` and `∇ log f(x)`, through log-sum-exp.
    pub fn log_density_grad(&self, x: &[f64]) -> (f64, [f64; 2]) {
        let dim = self.dim();
        let mut logs = Vec::with_capacity(self.weights.len());
        for (c, w) in self.weights.iter().enumerate() {
            let mut l = w.ln();
            for i in 0..dim {
                let v = self.vars[c][i];
                let z = x[i] - self.means[c][i];
                l -= 0.5 * (z * z / v + (2.0 * std::f64::consts::PI * v).ln());
            }
            logs.push(l);
        }
        let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let mut grad = [0.0; 2];
        for (c, l) in logs.iter().enumerate() {
            let r = (l - top).exp();
            sum += r;
            for i in 0..dim {
                grad[i] -= r * (x[i] - self.means[c][i]) / self.vars[c][i];
            }
        }
        for g in grad.iter_mut() {
            *g /= sum;
        }
        (top + sum.ln(), grad)
    }

    fn bounds(&self, axis: usize) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in 0..self.weights.len() {
            let s = self.vars[c][axis].sqrt();
            lo = lo.min(self.means[c][axis] - 14.0 * s);
            hi = hi.max(self.means[c][axis] + 14.0 * s);
        }
        (lo, hi)
    }

    fn min_sd(&self, axis: usize) -> f64 {
        self.vars.iter().map(|v| v[axis].sqrt()).fold(f64::INFINITY, f64::min)
    }
}

/// Composite double-exponential quadrature over panels of about `width`.
fn integrate_panels(f: impl Fn(f64) -> f64, lo: f64, hi: f64, width: f64, tol: f64) -> Result<f64> {
    let panels = (((hi - lo) / width).ceil() as usize).clamp(1, 400);
    let h = (hi - lo) / panels as f64;
    let per = tol / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let a = lo + p as f64 * h;
        let out = quadrature::integrate(&f, a, a + h, per);
        if !out.integral.is_finite() || out.error_estimate > 1e3 * per.max(1e-15) {
            return Err(Error::Numerical(format!(
                "quadrature did not converge on [{a}, {}] (error estimate {})",
                a + h,
                out.error_estimate
            )));
        }
        total += out.integral;
    }
    Ok(total)
}

fn integrate_density(mix: &GaussianMixture, g: impl Fn(f64, [f64; 2]) -> f64 + Copy, tol: f64) -> Result<f64> {
    let (lo0, hi0) = mix.bounds(0);
    let w0 = mix.min_sd(0);
    match mix.dim() {
        1 => integrate_panels(
            |x| {
                let (l, gr) = mix.log_density_grad(&[x]);
                g(l, gr)
            },
            lo0,
            hi0,
            w0,
            tol,
        ),
        _ => {
            let (lo1, hi1) = mix.bounds(1);
            let w1 = mix.min_sd(1);
            let failed = std::cell::Cell::new(false);
            let outer = integrate_panels(
                |x| {
                    integrate_panels(
                        |y| {
                            let (l, gr) = mix.log_density_grad(&[x, y]);
                            g(l, gr)
                        },
                        lo1,
                        hi1,
                        w1,
                        tol * 1e-2,
                    )
                    .unwrap_or_else(|_| {
                        failed.set(true);
                        0.0
                    })
                },
                lo0,
                hi0,
                w0,
                tol,
            )?;
            if failed.get() {
                return Err(Error::Numerical("inner quadrature did not converge".into()));
            }
            Ok(outer)
        }
    }
}

/// `𝔻(f) = −∫ f log f`.
pub fn mixture_entropy(mix: &GaussianMixture) -> Result<f64> {
    integrate_density(mix, |l, _| if l.is_finite() { -l.exp() * l } else { 0.0 }, 1e-12)
}

/// `∫ ‖∇f‖²/f = ∫ f ‖∇ log f‖²`.
pub fn mixture_fisher(mix: &GaussianMixture) -> Result<f64> {
    integrate_density(mix, |l, g| l.exp() * (g[0] * g[0] + g[1] * g[1]), 1e-12)
}

#[derive(Clone, Debug, Serialize)]
pub struct DeBruijnRow {
    pub t: f64,
    pub entropy: f64,
    pub fd_derivative: f64,
    pub fisher: f64,
    pub rel_err: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct DeBruijnReport {
    pub dim: usize,
    pub rows: Vec<DeBruijnRow>,
    pub max_rel_err: f64,
    pub fisher_monotone: bool,
    pub passed: bool,
}

/// Central differences of the heated entropy against the Fisher integral.
pub fn debruijn_check(mix: &GaussianMixture, t_grid: &[f64]) -> Result<DeBruijnReport> {
    if t_grid.iter().any(|&t| t < 0.0 || !t.is_finite()) {
        return invalid("heat times must be non-negative");
    }
    let mut rows = Vec::new();
    for &t in t_grid {
        let h = 1e-3 * (1.0 + t);
        let min_var = mix.vars.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        if min_var + 2.0 * (t - h) <= 0.0 {
            return invalid("heat time too close to the variance floor for a central difference");
        }
        let fd = (mixture_entropy(&mix.heated(t + h))? - mixture_entropy(&mix.heated(t - h))?) / (2.0 * h);
        let heated = mix.heated(t);
        let fisher = mixture_fisher(&heated)?;
        rows.push(DeBruijnRow {
            t,
            entropy: mixture_entropy(&heated)?,
            fd_derivative: fd,
            fisher,
            rel_err: (fd - fisher).abs() / fisher.abs().max(1e-300),
        });
    }
    let max_rel_err = rows.iter().map(|r| r.rel_err).fold(0.0, f64::max);
    let mut sorted: Vec<&DeBruijnRow> = rows.iter().collect();
    sorted.sort_by(|a, b| a.t.total_cmp(&b.t));
    let fisher_monotone = sorted.windows(2).all(|w| w[1].fisher <= w[0].fisher + 1e-12);
    Ok(DeBruijnReport { dim: mix.dim(), rows, max_rel_err, fisher_monotone, passed: max_rel_err <= 1e-3 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_gaussian_closed_form() {
        let m = GaussianMixture::new(vec![1.0], vec![vec![0.0]], vec![vec![1.0]]).unwrap();
        let rep = debruijn_check(&m, &[0.5]).unwrap();
        let row = &rep.rows[0];
        assert!((row.fisher - 0.5).abs() < 1e-9);
        assert!((row.fd_derivative - 0.5).abs() < 1e-6);
        let e = 0.5 * (2.0 * std::f64::consts::PI * std::f64::consts::E * 2.0).ln();
        assert!((row.entropy - e).abs() < 1e-10);
    }

    #[test]
    fn two_d_product() {
        let m = GaussianMixture::new(vec![1.0], vec![vec![0.0, 1.0]], vec![vec![1.0, 4.0]]).unwrap();
        let j = mixture_fisher(&m).unwrap();
        assert!((j - 1.25).abs() < 1e-8);
    }

    #[test]
    fn invalid_mixture() {
        assert!(GaussianMixture::new(vec![1.0], vec![vec![0.0]], vec![vec![0.0]]).is_err());
        assert!(GaussianMixture::new(vec![], vec![], vec![]).is_err());
    }
}
