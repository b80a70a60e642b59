//! Local (within-cluster) densities and their prior-integrated versions `k0`.
//!
//! Designs: the outcome model sees `(1, x, m)` and each mediator model sees
//! `(1, x)`, where `x = (a, l_disc, l_cont)`.

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::num::{self, Real};

use super::params::{CovariateParams, LocalGlm, MediatorParams, OutcomeParams};
use super::prior::{CovariatePrior, Hyperparams};

pub fn mediator_design<T: Real>(x: &[T]) -> Vec<T> {
    let mut d = Vec::with_capacity(1 + x.len());
    d.push(T::one());
    d.extend_from_slice(x);
    d
}

pub fn outcome_design<T: Real>(x: &[T], m: &[T]) -> Vec<T> {
    let mut d = Vec::with_capacity(1 + x.len() + m.len());
    d.push(T::one());
    d.extend_from_slice(x);
    d.extend_from_slice(m);
    d
}

fn join_x<T: Real>(a: T, l: &[T]) -> Vec<T> {
    let mut x = Vec::with_capacity(1 + l.len());
    x.push(a);
    x.extend_from_slice(l);
    x
}

fn check_finite<T: Real>(what: &'static str, v: &[T]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Log density of one response under a local GLM; no checks.
#[inline]
pub fn glm_log_density<T: Real>(glm: &LocalGlm<T>, y: T, design: &[T]) -> T {
    let eta = linalg::dot(&glm.coef, design);
    match glm.variance {
        Some(v) => num::normal_log_pdf(y, eta, v),
        None => {
            if y > T::of(0.5) {
                num::log_norm_cdf(eta)
            } else {
                num::log_norm_cdf(-eta)
            }
        }
    }
}

/// Conditional mean of a response under a local GLM; no checks.
#[inline]
pub fn glm_mean<T: Real>(glm: &LocalGlm<T>, design: &[T]) -> T {
    let eta = linalg::dot(&glm.coef, design);
    match glm.variance {
        Some(_) => eta,
        None => num::norm_cdf(eta),
    }
}

fn check_glm<T: Real>(glm: &LocalGlm<T>, what: &'static str, dim: usize) -> Result<()> {
    check_dim(what, dim, glm.coef.len())?;
    check_finite(what, &glm.coef)?;
    if let Some(v) = glm.variance {
        if !(v > T::zero()) || !v.is_finite() {
            return Err(Error::InvalidHyper(format!("{what}: residual variance must be positive")));
        }
    }
    Ok(())
}

/// `log p(y | m, x; θ)`.
pub fn log_outcome_density<T: Real>(theta: &OutcomeParams<T>, y: T, m: &[T], x: &[T]) -> Result<T> {
    check_glm(theta, "outcome coefficients", 1 + x.len() + m.len())?;
    check_finite("outcome inputs", &[y])?;
    check_finite("mediators", m)?;
    check_finite("covariates", x)?;
    Ok(glm_log_density(theta, y, &outcome_design(x, m)))
}

/// `log p(m_q | a, l; ω)`, with `q` zero-based.
pub fn log_mediator_density<T: Real>(omega: &MediatorParams<T>, q: usize, m_q: T, a: T, l: &[T]) -> Result<T> {
    let block =
        omega.blocks.get(q).ok_or(Error::Dimension { what: "mediator index", expected: omega.blocks.len(), got: q })?;
    check_glm(block, "mediator coefficients", 2 + l.len())?;
    check_finite("mediator inputs", &[m_q, a])?;
    check_finite("confounders", l)?;
    Ok(glm_log_density(block, m_q, &mediator_design(&join_x(a, l))))
}

/// Sum of all `Q` mediator log densities; no checks.
pub fn mediators_log_density<T: Real>(omega: &MediatorParams<T>, m: &[T], design: &[T]) -> T {
    omega.blocks.iter().zip(m).fold(T::zero(), |acc, (b, &mq)| acc + glm_log_density(b, mq, design))
}

/// `log p(x | ψ)`; no checks.
pub fn covariate_log_density<T: Real>(psi: &CovariateParams<T>, x: &[T]) -> T {
    let nb = psi.g.len();
    let mut s = T::zero();
    for (&g, &xv) in psi.g.iter().zip(&x[..nb]) {
        s = s + if xv > T::of(0.5) { g.ln() } else { (T::one() - g).ln() };
    }
    for ((&h, &f), &xv) in psi.h.iter().zip(&psi.f).zip(&x[nb..]) {
        s = s + num::normal_log_pdf(xv, h, f);
    }
    s
}

/// `log p(x | ψ)`: Bernoulli coordinates first, then normal ones.
pub fn log_covariate_density<T: Real>(psi: &CovariateParams<T>, x: &[T]) -> Result<T> {
    check_dim("covariate vector", psi.g.len() + psi.h.len(), x.len())?;
    check_dim("covariate variances", psi.h.len(), psi.f.len())?;
    check_finite("covariates", x)?;
    if psi.g.iter().any(|&g| !(g > T::zero() && g < T::one())) {
        return Err(Error::InvalidHyper("Bernoulli probabilities must lie in (0, 1)".into()));
    }
    if psi.f.iter().any(|&f| !(f > T::zero())) {
        return Err(Error::InvalidHyper("covariate variances must be positive".into()));
    }
    Ok(covariate_log_density(psi, x))
}

/// Prior predictive of `x`; `n_binary` leading coordinates are binary. No checks.
pub fn covariate_log_predictive<T: Real>(prior: &CovariatePrior<T>, n_binary: usize, x: &[T]) -> T {
    let mut s = T::zero();
    let lp1 = (prior.a0 / (prior.a0 + prior.b0)).ln();
    let lp0 = (prior.b0 / (prior.a0 + prior.b0)).ln();
    for &xv in &x[..n_binary] {
        s = s + if xv > T::of(0.5) { lp1 } else { lp0 };
    }
    let inflate = T::one() + T::one() / prior.c0;
    for (k, &xv) in x[n_binary..].iter().enumerate() {
        s = s + num::student_t_log_pdf(xv, prior.nu0, prior.mu0[k], prior.tau0[k] * inflate);
    }
    s
}

/// `log k0(x)`: Beta-Bernoulli for binary coordinates and the
/// normal-inverse-χ² Student-t for continuous ones.
pub fn k0_covariate<T: Real>(x: &[T], hyper: &Hyperparams<T>) -> Result<T> {
    let p2 = hyper.covariates.mu0.len();
    if x.len() < p2 + 1 {
        return Err(Error::Dimension { what: "covariate vector", expected: p2 + 1, got: x.len() });
    }
    check_covariate_prior(&hyper.covariates)?;
    check_finite("covariates", x)?;
    Ok(covariate_log_predictive(&hyper.covariates, x.len() - p2, x))
}

fn check_covariate_prior<T: Real>(c: &CovariatePrior<T>) -> Result<()> {
    let pos = |v: T| v > T::zero() && v.is_finite();
    if !pos(c.a0) || !pos(c.b0) || !pos(c.nu0) || !pos(c.c0) || c.tau0.iter().any(|&t| !pos(t)) {
        return Err(Error::InvalidHyper("covariate prior constants must be positive".into()));
    }
    if c.mu0.len() != c.tau0.len() {
        return Err(Error::InvalidHyper("mu0 and tau0 lengths differ".into()));
    }
    Ok(())
}

/// Sum over mediators of prior-predictive log densities at `design = (1, x)`.
pub fn mediators_log_predictive<T: Real>(hyper: &Hyperparams<T>, m: &[T], design: &[T]) -> T {
    hyper.mediators.iter().zip(m).fold(T::zero(), |acc, (p, &mq)| acc + p.log_predictive(mq, design))
}

/// `log k0(m | a, l)`, the joint over all `Q` mediators.
pub fn k0_mediator<T: Real>(m: &[T], a: T, l: &[T], hyper: &Hyperparams<T>) -> Result<T> {
    check_dim("mediator vector", hyper.mediators.len(), m.len())?;
    let design = mediator_design(&join_x(a, l));
    for p in &hyper.mediators {
        check_dim("mediator prior", design.len(), p.dim())?;
    }
    check_finite("mediators", m)?;
    check_finite("covariates", &design)?;
    Ok(mediators_log_predictive(hyper, m, &design))
}

/// `log k0(y | m, a, l)`.
pub fn k0_outcome<T: Real>(y: T, m: &[T], a: T, l: &[T], hyper: &Hyperparams<T>) -> Result<T> {
    let design = outcome_design(&join_x(a, l), m);
    check_dim("outcome prior", hyper.outcome.dim(), design.len())?;
    check_finite("outcome inputs", &design)?;
    check_finite("outcome", &[y])?;
    Ok(hyper.outcome.log_predictive(y, &design))
}

/// `E0(y | m, a, l)`: the prior-predictive mean of the outcome.
pub fn e0_outcome<T: Real>(m: &[T], a: T, l: &[T], hyper: &Hyperparams<T>) -> Result<T> {
    let design = outcome_design(&join_x(a, l), m);
    check_dim("outcome prior", hyper.outcome.dim(), design.len())?;
    check_finite("outcome inputs", &design)?;
    Ok(hyper.outcome.predictive_mean(&design))
}
