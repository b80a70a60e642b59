//! Standardisation: every posterior draw is turned into potential-outcome
//! means by Monte Carlo over `(l, m)`, and those into causal contrasts.
//!
//! One iteration `t` draws covariates `lᵗ`, then one m-cluster and one full
//! mediator vector for each arm (`a = 1` and `a = 0`). A regime picks
//! mediator `q` from the arm `a_q`, so every regime and contrast of a draw
//! reuses the same `(lᵗ, mᵗ)` stream.

mod effect;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    covariate_log_density, covariate_log_predictive, glm_mean, mediators_log_density, mediators_log_predictive,
    Hyperparams, LocalGlm, MediatorParams,
};
use crate::num::{log_sum_exp, norm_cdf};
use crate::sampler::{draw_psi, GlmPrior, PosteriorDraw};

pub use effect::{Effect, Regime};

/// Monte Carlo size per posterior draw.
pub const DEFAULT_MC_SIZE: usize = 200;

/// A single potential-outcome mean with its Monte Carlo size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectQuery {
    pub regime: Regime,
    pub t: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GcompConfig {
    pub t: usize,
    pub seed: u64,
}

impl Default for GcompConfig {
    fn default() -> Self {
        GcompConfig { t: DEFAULT_MC_SIZE, seed: 0 }
    }
}

/// Posterior summary of one effect.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectEstimate {
    pub name: String,
    pub mean: f64,
    /// 2.5% and 97.5% empirical percentiles of `draws`.
    pub lower: f64,
    pub upper: f64,
    /// Monte Carlo standard error of `mean` from the `(l, m)` integration.
    pub mc_se: f64,
    pub draws: Vec<f64>,
}

impl EffectEstimate {
    pub fn from_draws(name: String, draws: Vec<f64>, mc_se: f64) -> Self {
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        let mut sorted = draws.clone();
        sorted.sort_by(f64::total_cmp);
        EffectEstimate {
            name,
            mean,
            lower: percentile(&sorted, 0.025),
            upper: percentile(&sorted, 0.975),
            mc_se,
            draws,
        }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, v: f64) -> bool {
        self.lower <= v && v <= self.upper
    }

    /// Posterior standard deviation of the per-draw values.
    pub fn sd(&self) -> f64 {
        let n = self.draws.len() as f64;
        (self.draws.iter().map(|v| (v - self.mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
    }
}

/// Linear interpolation between order statistics of a sorted sample.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Which cluster a covariate draw came from; `None` marks a fresh cluster
/// at that level (and every level below it).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub y: Option<usize>,
    pub m: Option<usize>,
    pub x: Option<usize>,
}

/// The options for picking an m-cluster given `(a, lᵗ)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MediatorBranch {
    NewM,
    NewX { j: usize, l: usize },
    Existing { j: usize, l: usize, u: usize },
}

/// Per-draw constants shared by every Monte Carlo iteration.
struct Ctx<'a> {
    hyper: &'a Hyperparams<f64>,
    med_priors: Vec<GlmPrior>,
    nb: usize,
    q: usize,
}

impl<'a> Ctx<'a> {
    fn new(hyper: &'a Hyperparams<f64>) -> Result<Self> {
        let q = hyper.mediators.len();
        let p2 = hyper.covariates.mu0.len();
        let dy = hyper.outcome.dim();
        if q == 0 || dy < 2 + p2 + q {
            return Err(Error::InvalidHyper("outcome prior too small for the mediator count".into()));
        }
        let nb = dy - 1 - p2 - q;
        if hyper.mediators.iter().any(|p| p.dim() != 1 + nb + p2) {
            return Err(Error::InvalidHyper("mediator priors disagree with the outcome prior".into()));
        }
        Ok(Ctx { hyper, med_priors: hyper.mediators.iter().map(GlmPrior::new).collect(), nb, q })
    }

    fn l_dim(&self) -> usize {
        self.nb - 1 + self.hyper.covariates.mu0.len()
    }

    fn check_draw(&self, d: &PosteriorDraw) -> Result<()> {
        d.check_legal()?;
        let dy = self.hyper.outcome.dim();
        let dm = 1 + self.nb + self.hyper.covariates.mu0.len();
        let ok = d.theta.iter().all(|t| t.coef.len() == dy && t.kind() == self.hyper.outcome.kind())
            && d.omega
                .iter()
                .flatten()
                .all(|o| o.blocks.len() == self.q && o.blocks.iter().all(|b| b.coef.len() == dm))
            && d.psi
                .iter()
                .flatten()
                .flatten()
                .all(|p| p.g.len() == self.nb && p.h.len() == self.hyper.covariates.mu0.len());
        if ok {
            Ok(())
        } else {
            Err(Error::Dimension { what: "posterior draw parameters", expected: dy, got: 0 })
        }
    }

    fn check_l(&self, l: &[f64]) -> Result<()> {
        crate::error::check_dim("confounder vector", self.l_dim(), l.len())?;
        if l.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite("confounders"))
        }
    }
}

fn x_of(a: bool, l: &[f64]) -> Vec<f64> {
    let mut x = Vec::with_capacity(1 + l.len());
    x.push(if a { 1.0 } else { 0.0 });
    x.extend_from_slice(l);
    x
}

fn design_of(x: &[f64]) -> Vec<f64> {
    let mut d = Vec::with_capacity(1 + x.len());
    d.push(1.0);
    d.extend_from_slice(x);
    d
}

/// Covariate part of the weights at `x = (a, l)`: `log k0(x)` and, per
/// m-cluster `(j, l)`,
/// `log[ α_ψ/(α_ψ+n_{l|j}) k0(x) + Σ_u n_{u|jl}/(α_ψ+n_{l|j}) k(x; ψ_u) ]`.
struct CovTerms {
    k0: f64,
    per_m: Vec<Vec<f64>>,
}

fn cov_terms(draw: &PosteriorDraw, ctx: &Ctx, x: &[f64]) -> CovTerms {
    let k0 = covariate_log_predictive(&ctx.hyper.covariates, ctx.nb, x);
    let ap = draw.alpha.psi;
    let s = &draw.state;
    let mut buf = vec![];
    let per_m = (0..s.k())
        .map(|j| {
            (0..s.k_m(j))
                .map(|l| {
                    let denom = (ap + s.n_m[j][l] as f64).ln();
                    buf.clear();
                    buf.push(ap.ln() - denom + k0);
                    for (u, &nu) in s.n_x[j][l].iter().enumerate() {
                        buf.push((nu as f64).ln() - denom + covariate_log_density(&draw.psi[j][l][u], x));
                    }
                    log_sum_exp(&buf)
                })
                .collect()
        })
        .collect();
    CovTerms { k0, per_m }
}

fn categorical<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (i, &w) in weights.iter().enumerate() {
        if u < w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}

fn categorical_log<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = logw.iter().map(|v| (v - mx).exp()).collect();
    categorical(&w, rng)
}

fn draw_l<R: Rng + ?Sized>(draw: &PosteriorDraw, ctx: &Ctx, rng: &mut R) -> (Vec<f64>, Anchor) {
    let s = &draw.state;
    let n = s.n() as f64;
    let mut anchor = Anchor { y: None, m: None, x: None };

    let mut w: Vec<f64> = s.n_y.iter().map(|&c| c as f64).collect();
    w.push(draw.alpha.theta);
    debug_assert!(n > 0.0);
    let j = categorical(&w, rng);
    let mut psi = None;
    if j < s.k() {
        anchor.y = Some(j);
        let mut w: Vec<f64> = s.n_m[j].iter().map(|&c| c as f64).collect();
        w.push(draw.alpha.omega);
        let l = categorical(&w, rng);
        if l < s.k_m(j) {
            anchor.m = Some(l);
            let mut w: Vec<f64> = s.n_x[j][l].iter().map(|&c| c as f64).collect();
            w.push(draw.alpha.psi);
            let u = categorical(&w, rng);
            if u < s.k_x(j, l) {
                anchor.x = Some(u);
                psi = Some(&draw.psi[j][l][u]);
            }
        }
    }
    let fresh;
    let psi = match psi {
        Some(p) => p,
        None => {
            fresh = draw_psi(&ctx.hyper.covariates, ctx.nb, &[], rng);
            &fresh
        }
    };
    let mut l = Vec::with_capacity(ctx.l_dim());
    for &g in &psi.g[1..] {
        l.push(if rng.random::<f64>() < g { 1.0 } else { 0.0 });
    }
    for (&h, &f) in psi.h.iter().zip(&psi.f) {
        let z: f64 = StandardNormal.sample(rng);
        l.push(h + f.sqrt() * z);
    }
    (l, anchor)
}

/// Covariate draw by nested descent: existing clusters with probability
/// proportional to their counts, a fresh cluster (parameters from the
/// prior) with probability proportional to the concentration.
pub fn draw_covariates<R: Rng + ?Sized>(
    draw: &PosteriorDraw,
    hyper: &Hyperparams<f64>,
    rng: &mut R,
) -> Result<(Vec<f64>, Anchor)> {
    let ctx = Ctx::new(hyper)?;
    ctx.check_draw(draw)?;
    Ok(draw_l(draw, &ctx, rng))
}

/// Normalised probabilities of every m-cluster option at `(a, l)`.
pub fn mediator_branches(
    draw: &PosteriorDraw,
    a: bool,
    l: &[f64],
    hyper: &Hyperparams<f64>,
) -> Result<Vec<(MediatorBranch, f64)>> {
    let ctx = Ctx::new(hyper)?;
    ctx.check_draw(draw)?;
    ctx.check_l(l)?;
    let x = x_of(a, l);
    let k0 = covariate_log_predictive(&hyper.covariates, ctx.nb, &x);
    let s = &draw.state;
    let (ao, ap) = (draw.alpha.omega, draw.alpha.psi);
    let top = (ao + s.n() as f64).ln();
    let mut out = vec![(MediatorBranch::NewM, ao.ln() - top + k0)];
    for j in 0..s.k() {
        for ll in 0..s.k_m(j) {
            let njl = s.n_m[j][ll] as f64;
            let base = njl.ln() - top - (ap + njl).ln();
            out.push((MediatorBranch::NewX { j, l: ll }, base + ap.ln() + k0));
            for (u, &nu) in s.n_x[j][ll].iter().enumerate() {
                let lk = covariate_log_density(&draw.psi[j][ll][u], &x);
                out.push((MediatorBranch::Existing { j, l: ll, u }, base + (nu as f64).ln() + lk));
            }
        }
    }
    let logs: Vec<f64> = out.iter().map(|b| b.1).collect();
    let z = log_sum_exp(&logs);
    for b in out.iter_mut() {
        b.1 = (b.1 - z).exp();
    }
    Ok(out)
}

fn sample_glm<R: Rng + ?Sized>(glm: &LocalGlm<f64>, design: &[f64], rng: &mut R) -> f64 {
    let eta: f64 = glm.coef.iter().zip(design).map(|(c, d)| c * d).sum();
    match glm.variance {
        Some(v) => {
            let z: f64 = StandardNormal.sample(rng);
            eta + v.sqrt() * z
        }
        None => {
            if rng.random::<f64>() < norm_cdf(eta) {
                1.0
            } else {
                0.0
            }
        }
    }
}

/// Pick an m-cluster for arm `a` and draw all `Q` mediators from it with
/// treatment `a`. `cov` must be the covariate terms at `(a, l)`.
fn draw_arm<R: Rng + ?Sized>(
    draw: &PosteriorDraw,
    ctx: &Ctx,
    cov: &CovTerms,
    a: bool,
    l: &[f64],
    rng: &mut R,
) -> Vec<f64> {
    let s = &draw.state;
    let ao = draw.alpha.omega;
    let mut logw = vec![ao.ln() + cov.k0];
    let mut ids = vec![];
    for j in 0..s.k() {
        for ll in 0..s.k_m(j) {
            logw.push((s.n_m[j][ll] as f64).ln() + cov.per_m[j][ll]);
            ids.push((j, ll));
        }
    }
    let pick = categorical_log(&logw, rng);
    let fresh;
    let omega: &MediatorParams<f64> = if pick == 0 {
        fresh = MediatorParams { blocks: ctx.med_priors.iter().map(|p| p.draw(rng)).collect() };
        &fresh
    } else {
        let (j, ll) = ids[pick - 1];
        &draw.omega[j][ll]
    };
    let design = design_of(&x_of(a, l));
    omega.blocks.iter().map(|b| sample_glm(b, &design, rng)).collect()
}

/// Draw mediators for `lᵗ` under an induction vector: one m-cluster under
/// `a = 1`, one under `a = 0`, mediator `q` taken from arm `a_q`.
pub fn draw_mediators<R: Rng + ?Sized>(
    draw: &PosteriorDraw,
    l: &[f64],
    induction: &[bool],
    hyper: &Hyperparams<f64>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let ctx = Ctx::new(hyper)?;
    ctx.check_draw(draw)?;
    ctx.check_l(l)?;
    crate::error::check_dim("induction vector", ctx.q, induction.len())?;
    let arms = draw_both_arms(draw, &ctx, l, rng);
    Ok(select(&arms, induction))
}

struct Arms {
    treated: Vec<f64>,
    control: Vec<f64>,
    cov_treated: CovTerms,
    cov_control: CovTerms,
}

fn draw_both_arms<R: Rng + ?Sized>(draw: &PosteriorDraw, ctx: &Ctx, l: &[f64], rng: &mut R) -> Arms {
    let cov_treated = cov_terms(draw, ctx, &x_of(true, l));
    let cov_control = cov_terms(draw, ctx, &x_of(false, l));
    let treated = draw_arm(draw, ctx, &cov_treated, true, l, rng);
    let control = draw_arm(draw, ctx, &cov_control, false, l, rng);
    Arms { treated, control, cov_treated, cov_control }
}

fn select(arms: &Arms, induction: &[bool]) -> Vec<f64> {
    induction.iter().enumerate().map(|(q, &t)| if t { arms.treated[q] } else { arms.control[q] }).collect()
}

/// Weighted average of cluster-specific outcome means, the new-cluster
/// term using the prior-predictive mean.
fn step_c(draw: &PosteriorDraw, ctx: &Ctx, cov: &CovTerms, a: bool, l: &[f64], m: &[f64]) -> f64 {
    let s = &draw.state;
    let x = x_of(a, l);
    let dm = design_of(&x);
    let mut dy = dm.clone();
    dy.extend_from_slice(m);
    let k0m = mediators_log_predictive(ctx.hyper, m, &dm);
    let (at, ao) = (draw.alpha.theta, draw.alpha.omega);

    let mut logw = Vec::with_capacity(s.k() + 1);
    let mut means = Vec::with_capacity(s.k() + 1);
    logw.push(at.ln() + k0m + cov.k0);
    means.push(ctx.hyper.outcome.predictive_mean(&dy));
    let mut buf = vec![];
    for j in 0..s.k() {
        let nj = s.n_y[j] as f64;
        let denom = (ao + nj).ln();
        buf.clear();
        buf.push(ao.ln() - denom + k0m + cov.k0);
        for ll in 0..s.k_m(j) {
            let km = mediators_log_density(&draw.omega[j][ll], m, &dm);
            buf.push((s.n_m[j][ll] as f64).ln() - denom + km + cov.per_m[j][ll]);
        }
        logw.push(nj.ln() + log_sum_exp(&buf));
        means.push(glm_mean(&draw.theta[j], &dy));
    }
    let mx = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let (mut num, mut den) = (0.0, 0.0);
    for (lw, mu) in logw.iter().zip(&means) {
        let w = (lw - mx).exp();
        num += w * mu;
        den += w;
    }
    num / den
}

/// `E(Y | A = a, L = l, M = m)` under one posterior draw.
pub fn expected_outcome(draw: &PosteriorDraw, a: bool, l: &[f64], m: &[f64], hyper: &Hyperparams<f64>) -> Result<f64> {
    let ctx = Ctx::new(hyper)?;
    ctx.check_draw(draw)?;
    ctx.check_l(l)?;
    crate::error::check_dim("mediator vector", ctx.q, m.len())?;
    if !m.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("mediators"));
    }
    let cov = cov_terms(draw, &ctx, &x_of(a, l));
    Ok(step_c(draw, &ctx, &cov, a, l, m))
}

/// Per-iteration values of every regime: `out[r][t]`.
fn simulate_regimes<R: Rng + ?Sized>(
    draw: &PosteriorDraw,
    ctx: &Ctx,
    regimes: &[Regime],
    t: usize,
    rng: &mut R,
) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::with_capacity(t); regimes.len()];
    for _ in 0..t {
        let (l, _) = draw_l(draw, ctx, rng);
        let arms = draw_both_arms(draw, ctx, &l, rng);
        for (r, reg) in regimes.iter().enumerate() {
            let m = select(&arms, &reg.induction);
            let cov = if reg.a { &arms.cov_treated } else { &arms.cov_control };
            out[r].push(step_c(draw, ctx, cov, reg.a, &l, &m));
        }
    }
    out
}

fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, 0.0);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `E[Y(a, M(a_1, …, a_Q))]` under one draw by `T` Monte Carlo iterations;
/// returns the estimate and its Monte Carlo standard error.
pub fn expected_potential_outcome<R: Rng + ?Sized>(
    draw: &PosteriorDraw,
    query: &EffectQuery,
    hyper: &Hyperparams<f64>,
    rng: &mut R,
) -> Result<(f64, f64)> {
    let ctx = Ctx::new(hyper)?;
    ctx.check_draw(draw)?;
    crate::error::check_dim("induction vector", ctx.q, query.regime.induction.len())?;
    if query.t == 0 {
        return Err(Error::InvalidEffect("Monte Carlo size must be at least 1".into()));
    }
    let vals = simulate_regimes(draw, &ctx, std::slice::from_ref(&query.regime), query.t, rng);
    Ok(mean_se(&vals[0]))
}

/// Value and Monte Carlo standard error of each effect under one draw.
fn effects_for_draw(
    draw: &PosteriorDraw,
    ctx: &Ctx,
    effects: &[Effect],
    regimes: &[Regime],
    t: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<(f64, f64)> {
    let vals = simulate_regimes(draw, ctx, regimes, t, rng);
    let idx = |r: &Regime| regimes.iter().position(|x| x == r).expect("regime registered");
    let avg: Vec<f64> = vals.iter().map(|v| v.iter().sum::<f64>() / t as f64).collect();
    effects
        .iter()
        .map(|e| {
            let (p, m) = e.contrast(ctx.q);
            let (p, m) = (idx(&p), idx(&m));
            let (_, se) = mean_se(&(0..t).map(|k| vals[p][k] - vals[m][k]).collect::<Vec<_>>());
            let value = match e {
                // Same two differences as NDE and JNIE, so TE = NDE + JNIE holds exactly.
                Effect::Te => {
                    let mid = idx(&Regime::uniform(true, false, ctx.q));
                    (avg[mid] - avg[m]) + (avg[p] - avg[mid])
                }
                _ => avg[p] - avg[m],
            };
            (value, se)
        })
        .collect()
}

/// Per-draw effect values, `out[d][e]`, each with its Monte Carlo standard
/// error. Draw `d` uses its own random stream so results do not depend on
/// the number of worker threads.
pub fn per_draw_effects(
    draws: &[PosteriorDraw],
    hyper: &Hyperparams<f64>,
    effects: &[Effect],
    config: &GcompConfig,
) -> Result<Vec<Vec<(f64, f64)>>> {
    if draws.is_empty() {
        return Err(Error::InvalidEffect("no posterior draws".into()));
    }
    if config.t == 0 {
        return Err(Error::InvalidEffect("Monte Carlo size must be at least 1".into()));
    }
    if effects.is_empty() {
        return Err(Error::InvalidEffect("no effects requested".into()));
    }
    let ctx = Ctx::new(hyper)?;
    for e in effects {
        e.validate(ctx.q)?;
    }
    for d in draws {
        ctx.check_draw(d)?;
    }
    let mut regimes: Vec<Regime> = effects.iter().flat_map(|e| e.regimes(ctx.q)).collect();
    regimes.sort();
    regimes.dedup();
    Ok(draws
        .par_iter()
        .enumerate()
        .map(|(i, d)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_stream(i as u64);
            effects_for_draw(d, &ctx, effects, &regimes, config.t, &mut rng)
        })
        .collect())
}

/// Posterior summaries of the requested effects over a stream of draws.
pub fn causal_effects(
    draws: &[PosteriorDraw],
    hyper: &Hyperparams<f64>,
    effects: &[Effect],
    config: &GcompConfig,
) -> Result<Vec<EffectEstimate>> {
    let per = per_draw_effects(draws, hyper, effects, config)?;
    let nd = per.len() as f64;
    Ok(effects
        .iter()
        .enumerate()
        .map(|(e, eff)| {
            let vals: Vec<f64> = per.iter().map(|row| row[e].0).collect();
            let mc_se = per.iter().map(|row| row[e].1.powi(2)).sum::<f64>().sqrt() / nd;
            EffectEstimate::from_draws(eff.name(), vals, mc_se)
        })
        .collect())
}
