//! Prior and full-conditional draws for the local parameters.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Beta, Distribution, Exp1, Gamma, StandardNormal};

use crate::data::{Dataset, VarKind};
use crate::model::{CovariateParams, CovariatePrior, LocalGlm, MediatorParams, RegressionPrior};

/// Row-major copies of the designs each subject contributes.
#[derive(Debug, Clone)]
pub(crate) struct Prepared {
    pub n: usize,
    pub dx: usize,
    pub nb: usize,
    pub q: usize,
    pub x: Vec<f64>,
    pub dm: Vec<f64>,
    pub dy: Vec<f64>,
    pub y: Vec<f64>,
    pub m: Vec<f64>,
}

impl Prepared {
    pub fn new(ds: &Dataset) -> Self {
        let n = ds.n();
        let layout = ds.layout();
        let (dx, q) = (layout.x_dim(), layout.q());
        let mut p = Prepared {
            n,
            dx,
            nb: layout.x_binary(),
            q,
            x: Vec::with_capacity(n * dx),
            dm: Vec::with_capacity(n * (1 + dx)),
            dy: Vec::with_capacity(n * (1 + dx + q)),
            y: ds.y.clone(),
            m: Vec::with_capacity(n * q),
        };
        for i in 0..n {
            let x = ds.x_row(i);
            let m = ds.m_row(i);
            p.x.extend_from_slice(&x);
            p.dm.push(1.0);
            p.dm.extend_from_slice(&x);
            p.dy.push(1.0);
            p.dy.extend_from_slice(&x);
            p.dy.extend_from_slice(&m);
            p.m.extend_from_slice(&m);
        }
        p
    }
    #[inline]
    pub fn x(&self, i: usize) -> &[f64] {
        &self.x[i * self.dx..(i + 1) * self.dx]
    }
    #[inline]
    pub fn dm(&self, i: usize) -> &[f64] {
        let d = 1 + self.dx;
        &self.dm[i * d..(i + 1) * d]
    }
    #[inline]
    pub fn dy(&self, i: usize) -> &[f64] {
        let d = 1 + self.dx + self.q;
        &self.dy[i * d..(i + 1) * d]
    }
    #[inline]
    pub fn m(&self, i: usize) -> &[f64] {
        &self.m[i * self.q..(i + 1) * self.q]
    }
}

/// Regression prior in nalgebra form.
#[derive(Debug, Clone)]
pub(crate) struct GlmPrior {
    pub kind: VarKind,
    pub b0: DVector<f64>,
    pub lambda0: DMatrix<f64>,
    pub lambda0_b0: DVector<f64>,
    pub b0_lambda0_b0: f64,
    pub shape: f64,
    pub rate: f64,
    pub cov_chol: DMatrix<f64>,
}

impl GlmPrior {
    pub fn new(p: &RegressionPrior<f64>) -> Self {
        let d = p.dim();
        let b0 = DVector::from_column_slice(p.mean());
        let lambda0 = DMatrix::from_row_slice(d, d, p.precision());
        let lambda0_b0 = &lambda0 * &b0;
        GlmPrior {
            kind: p.kind(),
            b0_lambda0_b0: b0.dot(&lambda0_b0),
            b0,
            lambda0,
            lambda0_b0,
            shape: p.shape(),
            rate: p.rate(),
            cov_chol: DMatrix::from_row_slice(d, d, p.covariance_chol()),
        }
    }

    pub fn dim(&self) -> usize {
        self.b0.len()
    }

    /// Overwrite `out` with a prior draw.
    pub fn draw_into<R: Rng + ?Sized>(&self, out: &mut LocalGlm<f64>, rng: &mut R) {
        let d = self.dim();
        let scale = match self.kind {
            VarKind::Continuous => {
                let s2 = inv_gamma(self.shape, self.rate, rng);
                out.variance = Some(s2);
                s2.sqrt()
            }
            VarKind::Binary => {
                out.variance = None;
                1.0
            }
        };
        out.coef.resize(d, 0.0);
        let mut stack = [0.0f64; 48];
        let mut heap;
        let z: &mut [f64] = if d <= 48 {
            &mut stack[..d]
        } else {
            heap = vec![0.0; d];
            &mut heap
        };
        for v in z.iter_mut() {
            *v = StandardNormal.sample(rng);
        }
        for i in 0..d {
            let mut b = self.b0[i];
            for (k, zk) in z.iter().enumerate().take(i + 1) {
                b += scale * self.cov_chol[(i, k)] * zk;
            }
            out.coef[i] = b;
        }
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> LocalGlm<f64> {
        let mut g = LocalGlm { coef: vec![], variance: None };
        self.draw_into(&mut g, rng);
        g
    }

    /// Full conditional given the cluster's rows. `xtx` is `Σ d dᵀ` over
    /// the rows. Probit models augment with fresh latent utilities drawn
    /// around `current`.
    pub fn draw_posterior<R: Rng + ?Sized>(
        &self,
        xtx: &DMatrix<f64>,
        designs: &[&[f64]],
        ys: &[f64],
        current: &LocalGlm<f64>,
        rng: &mut R,
    ) -> LocalGlm<f64> {
        if designs.is_empty() {
            return self.draw(rng);
        }
        let d = self.dim();
        let lambda_n = &self.lambda0 + xtx;
        let chol = match lambda_n.clone().cholesky() {
            Some(c) => c,
            None => return self.draw(rng),
        };
        let mut xty = self.lambda0_b0.clone();
        match self.kind {
            VarKind::Continuous => {
                let mut yy = 0.0;
                for (row, &y) in designs.iter().zip(ys) {
                    for k in 0..d {
                        xty[k] += row[k] * y;
                    }
                    yy += y * y;
                }
                let mean = chol.solve(&xty);
                let an = self.shape + 0.5 * designs.len() as f64;
                let quad = yy + self.b0_lambda0_b0 - mean.dot(&xty);
                let bn = self.rate + 0.5 * quad.max(0.0);
                let s2 = inv_gamma(an, bn, rng);
                let coef = gaussian_from_precision(&chol, &mean, s2.sqrt(), rng);
                LocalGlm { coef, variance: Some(s2) }
            }
            VarKind::Binary => {
                for (row, &y) in designs.iter().zip(ys) {
                    let eta: f64 = current.coef.iter().zip(row.iter()).map(|(b, x)| b * x).sum();
                    let z = if y > 0.5 { tn_positive(eta, rng) } else { -tn_positive(-eta, rng) };
                    for k in 0..d {
                        xty[k] += row[k] * z;
                    }
                }
                let mean = chol.solve(&xty);
                let coef = gaussian_from_precision(&chol, &mean, 1.0, rng);
                LocalGlm { coef, variance: None }
            }
        }
    }
}

/// `mean + scale · L⁻ᵀ z` where `L Lᵀ` is the precision.
fn gaussian_from_precision<R: Rng + ?Sized>(
    chol: &nalgebra::Cholesky<f64, nalgebra::Dyn>,
    mean: &DVector<f64>,
    scale: f64,
    rng: &mut R,
) -> Vec<f64> {
    let d = mean.len();
    let z = DVector::from_fn(d, |_, _| StandardNormal.sample(rng));
    let lt = chol.l().transpose();
    let v = lt.solve_upper_triangular(&z).expect("triangular factor is invertible");
    (0..d).map(|k| mean[k] + scale * v[k]).collect()
}

pub(crate) fn inv_gamma<R: Rng + ?Sized>(shape: f64, rate: f64, rng: &mut R) -> f64 {
    let g: f64 = Gamma::new(shape, 1.0).expect("positive shape").sample(rng);
    rate / g.max(1e-300)
}

/// `Z ~ N(mean, 1)` conditioned on `Z > 0`.
pub(crate) fn tn_positive<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> f64 {
    let a = -mean;
    if a < 0.45 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z > a {
                return z + mean;
            }
        }
    }
    // Exponential proposal for the tail.
    let lambda = 0.5 * (a + (a * a + 4.0).sqrt());
    loop {
        let e: f64 = Exp1.sample(rng);
        let z = a + e / lambda;
        let u: f64 = rng.random();
        if u <= (-0.5 * (z - lambda) * (z - lambda)).exp() {
            return z + mean;
        }
    }
}

/// `Σ d dᵀ` over the given rows.
pub(crate) fn gram(designs: &[&[f64]], d: usize) -> DMatrix<f64> {
    let mut g = DMatrix::zeros(d, d);
    for row in designs {
        for a in 0..d {
            let ra = row[a];
            if ra == 0.0 {
                continue;
            }
            for b in 0..=a {
                g[(a, b)] += ra * row[b];
            }
        }
    }
    for a in 0..d {
        for b in 0..a {
            g[(b, a)] = g[(a, b)];
        }
    }
    g
}

pub(crate) fn draw_mediators_prior_into<R: Rng + ?Sized>(
    priors: &[GlmPrior],
    out: &mut MediatorParams<f64>,
    rng: &mut R,
) {
    out.blocks.resize_with(priors.len(), || LocalGlm { coef: vec![], variance: None });
    for (p, b) in priors.iter().zip(out.blocks.iter_mut()) {
        p.draw_into(b, rng);
    }
}

fn clamp_prob(g: f64) -> f64 {
    g.clamp(1e-12, 1.0 - 1e-12)
}

/// Full conditional of ψ given the cluster's covariate rows (prior when empty).
pub(crate) fn draw_psi_into<R: Rng + ?Sized>(
    prior: &CovariatePrior<f64>,
    nb: usize,
    rows: &[&[f64]],
    out: &mut CovariateParams<f64>,
    rng: &mut R,
) {
    let n = rows.len() as f64;
    let p2 = prior.mu0.len();
    out.g.resize(nb, 0.0);
    out.h.resize(p2, 0.0);
    out.f.resize(p2, 0.0);
    for c in 0..nb {
        let ones = rows.iter().filter(|r| r[c] > 0.5).count() as f64;
        let beta = Beta::new(prior.a0 + ones, prior.b0 + n - ones).expect("positive beta parameters");
        out.g[c] = clamp_prob(beta.sample(rng));
    }
    for c in 0..p2 {
        let (mut s, mut ss) = (0.0, 0.0);
        for r in rows {
            s += r[nb + c];
        }
        let mean = if rows.is_empty() { 0.0 } else { s / n };
        for r in rows {
            ss += (r[nb + c] - mean).powi(2);
        }
        let kappa = prior.c0 + n;
        let mu_n = (prior.c0 * prior.mu0[c] + s) / kappa;
        let nu_n = prior.nu0 + n;
        let nutau = prior.nu0 * prior.tau0[c] + ss + prior.c0 * n / kappa * (mean - prior.mu0[c]).powi(2);
        // Scaled-inv-χ²(ν, τ) is inverse-gamma(ν/2, ντ/2).
        let f = inv_gamma(0.5 * nu_n, 0.5 * nutau, rng);
        let z: f64 = StandardNormal.sample(rng);
        out.f[c] = f;
        out.h[c] = mu_n + (f / kappa).sqrt() * z;
    }
}

pub(crate) fn draw_psi<R: Rng + ?Sized>(
    prior: &CovariatePrior<f64>,
    nb: usize,
    rows: &[&[f64]],
    rng: &mut R,
) -> CovariateParams<f64> {
    let mut out = CovariateParams { g: vec![], h: vec![], f: vec![] };
    draw_psi_into(prior, nb, rows, &mut out, rng);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn truncated_normal_moments() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for mean in [-6.0, -1.0, 0.0, 2.0] {
            let n = 200_000;
            let draws: Vec<f64> = (0..n).map(|_| tn_positive(mean, &mut rng)).collect();
            assert!(draws.iter().all(|&z| z > 0.0));
            let m = draws.iter().sum::<f64>() / n as f64;
            // E[Z | Z > 0] = μ + φ(μ)/Φ(μ).
            let phi = (-0.5 * mean * mean).exp() / (2.0 * std::f64::consts::PI).sqrt();
            let want = mean + phi / crate::num::norm_cdf(mean);
            assert!((m - want).abs() < 0.01, "{mean}: {m} vs {want}");
        }
    }

    #[test]
    fn beta_posterior_for_binary_covariate() {
        let prior = CovariatePrior { a0: 1.0, b0: 1.0, nu0: 2.0, c0: 0.5, mu0: vec![], tau0: vec![] };
        let rows: Vec<Vec<f64>> = vec![vec![1.0], vec![1.0], vec![1.0], vec![0.0]];
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 100_000;
        let draws: Vec<f64> = (0..n).map(|_| draw_psi(&prior, 1, &refs, &mut rng).g[0]).collect();
        let m = draws.iter().sum::<f64>() / n as f64;
        let v = draws.iter().map(|g| (g - m).powi(2)).sum::<f64>() / n as f64;
        // Beta(4, 2): mean 2/3, variance 8 / (36 · 7).
        assert!((m - 2.0 / 3.0).abs() < 3.0 * (8.0 / 252.0 / n as f64).sqrt());
        assert!((v - 8.0 / 252.0).abs() < 1e-3);
    }

    #[test]
    fn gram_is_symmetric_outer_sum() {
        let a = [1.0, 2.0, 0.0];
        let b = [1.0, -1.0, 3.0];
        let g = gram(&[&a, &b], 3);
        assert_eq!(g[(0, 1)], 1.0);
        assert_eq!(g[(1, 2)], -3.0);
        assert_eq!(g[(2, 1)], -3.0);
        assert_eq!(g[(2, 2)], 9.0);
    }
}
