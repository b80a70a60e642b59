use serde::{Deserialize, Serialize};

use crate::data::{Layout, VarKind};
use crate::error::{Error, Result};
use crate::linalg;
use crate::num::{self, Real};

/// Conjugate prior for a local regression.
///
/// Continuous responses: `β | σ² ~ N(mean, σ² precision⁻¹)`, `σ² ~ IG(shape, rate)`.
/// Probit responses: `β ~ N(mean, precision⁻¹)`; shape and rate are unused.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(
    try_from = "RawRegressionPrior<T>",
    into = "RawRegressionPrior<T>",
    bound = "T: Real + Serialize + for<'a> Deserialize<'a>"
)]
pub struct RegressionPrior<T: Real> {
    kind: VarKind,
    mean: Vec<T>,
    precision: Vec<T>,
    shape: T,
    rate: T,
    covariance: Vec<T>,
    cov_chol: Vec<T>,
    log_det_precision: T,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawRegressionPrior<T> {
    pub kind: VarKind,
    pub mean: Vec<T>,
    pub precision: Vec<T>,
    pub shape: T,
    pub rate: T,
}

impl<T: Real> TryFrom<RawRegressionPrior<T>> for RegressionPrior<T> {
    type Error = Error;
    fn try_from(r: RawRegressionPrior<T>) -> Result<Self> {
        RegressionPrior::new(r.kind, r.mean, r.precision, r.shape, r.rate)
    }
}

impl<T: Real> From<RegressionPrior<T>> for RawRegressionPrior<T> {
    fn from(p: RegressionPrior<T>) -> Self {
        RawRegressionPrior { kind: p.kind, mean: p.mean, precision: p.precision, shape: p.shape, rate: p.rate }
    }
}

impl<T: Real> RegressionPrior<T> {
    /// `precision` is row-major `d × d` with `d = mean.len()`.
    pub fn new(kind: VarKind, mean: Vec<T>, precision: Vec<T>, shape: T, rate: T) -> Result<Self> {
        let d = mean.len();
        if d == 0 || precision.len() != d * d {
            return Err(Error::InvalidHyper(format!(
                "regression prior needs a {d}x{d} precision, got {} entries",
                precision.len()
            )));
        }
        if !(shape > T::zero()) || !(rate > T::zero()) {
            return Err(Error::InvalidHyper("inverse-gamma shape and rate must be positive".into()));
        }
        if mean.iter().chain(&precision).any(|v| !v.is_finite()) {
            return Err(Error::InvalidHyper("regression prior has non-finite entries".into()));
        }
        let chol = linalg::cholesky(&precision, d)
            .ok_or_else(|| Error::InvalidHyper("regression prior precision is not positive definite".into()))?;
        let log_det_precision = linalg::chol_log_det(&chol, d);
        let covariance = linalg::chol_inverse(&chol, d);
        let cov_chol = linalg::cholesky(&covariance, d)
            .ok_or_else(|| Error::InvalidHyper("regression prior covariance is numerically singular".into()))?;
        Ok(RegressionPrior { kind, mean, precision, shape, rate, covariance, cov_chol, log_det_precision })
    }

    pub fn kind(&self) -> VarKind {
        self.kind
    }
    pub fn dim(&self) -> usize {
        self.mean.len()
    }
    pub fn mean(&self) -> &[T] {
        &self.mean
    }
    pub fn precision(&self) -> &[T] {
        &self.precision
    }
    pub fn covariance(&self) -> &[T] {
        &self.covariance
    }
    /// Lower Cholesky factor of the prior covariance (scaled by σ² for
    /// continuous responses).
    pub fn covariance_chol(&self) -> &[T] {
        &self.cov_chol
    }
    pub fn shape(&self) -> T {
        self.shape
    }
    pub fn rate(&self) -> T {
        self.rate
    }
    pub fn log_det_precision(&self) -> T {
        self.log_det_precision
    }

    /// Prior mean of the linear predictor and `design' V0 design`.
    pub fn predictor_moments(&self, design: &[T]) -> (T, T) {
        (linalg::dot(&self.mean, design), linalg::quad_form(&self.covariance, design))
    }

    /// Prior-predictive log density of a single response at `design`.
    ///
    /// Continuous: Student-t with `2·shape` degrees of freedom. Probit:
    /// `P(y = 1) = Φ(x'b0 / sqrt(1 + x'V0x))`, exact.
    pub fn log_predictive(&self, y: T, design: &[T]) -> T {
        let (loc, spread) = self.predictor_moments(design);
        match self.kind {
            VarKind::Continuous => {
                let scale2 = self.rate / self.shape * (T::one() + spread);
                num::student_t_log_pdf(y, T::of(2.0) * self.shape, loc, scale2)
            }
            VarKind::Binary => {
                let z = loc / (T::one() + spread).sqrt();
                if y > T::of(0.5) {
                    num::log_norm_cdf(z)
                } else {
                    num::log_norm_cdf(-z)
                }
            }
        }
    }

    /// Prior-predictive mean of the response at `design`.
    pub fn predictive_mean(&self, design: &[T]) -> T {
        let (loc, spread) = self.predictor_moments(design);
        match self.kind {
            VarKind::Continuous => loc,
            VarKind::Binary => num::norm_cdf(loc / (T::one() + spread).sqrt()),
        }
    }
}

/// Priors of the covariate marginals: `g ~ Beta(a0, b0)` for binary
/// coordinates; `f ~ Scaled-Inv-χ²(ν0, τ0)` and `h | f ~ N(μ0, f / c0)` for
/// continuous ones. `τ0` is a variance scale; `μ0` and `τ0` are per
/// continuous coordinate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariatePrior<T> {
    pub a0: T,
    pub b0: T,
    pub nu0: T,
    pub c0: T,
    pub mu0: Vec<T>,
    pub tau0: Vec<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaPrior<T> {
    pub shape: T,
    pub rate: T,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationPriors<T> {
    pub theta: GammaPrior<T>,
    pub omega: GammaPrior<T>,
    pub psi: GammaPrior<T>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real + Serialize + for<'a> Deserialize<'a>")]
pub struct Hyperparams<T: Real> {
    pub covariates: CovariatePrior<T>,
    pub outcome: RegressionPrior<T>,
    pub mediators: Vec<RegressionPrior<T>>,
    pub concentration: ConcentrationPriors<T>,
}

impl<T: Real> Hyperparams<T> {
    pub fn validate(&self, layout: &Layout) -> Result<()> {
        let c = &self.covariates;
        let pos = |v: T| v > T::zero() && v.is_finite();
        if !pos(c.a0) || !pos(c.b0) || !pos(c.nu0) || !pos(c.c0) {
            return Err(Error::InvalidHyper("covariate prior constants a0, b0, nu0, c0 must be positive".into()));
        }
        if c.mu0.len() != layout.p2 || c.tau0.len() != layout.p2 {
            return Err(Error::InvalidHyper(format!(
                "covariate prior has {} means / {} scales for {} continuous confounders",
                c.mu0.len(),
                c.tau0.len(),
                layout.p2
            )));
        }
        if c.tau0.iter().any(|&t| !pos(t)) || c.mu0.iter().any(|m| !m.is_finite()) {
            return Err(Error::InvalidHyper("tau0 must be positive and mu0 finite".into()));
        }
        if self.outcome.kind() != layout.y_kind
            || self.mediators.iter().zip(&layout.m_kinds).any(|(p, k)| p.kind() != *k)
        {
            return Err(Error::InvalidHyper("prior response kinds do not match the data".into()));
        }
        if self.outcome.dim() != layout.outcome_dim() {
            return Err(Error::InvalidHyper(format!(
                "outcome prior has dimension {}, design needs {}",
                self.outcome.dim(),
                layout.outcome_dim()
            )));
        }
        if self.mediators.len() != layout.q() {
            return Err(Error::InvalidHyper("one mediator prior per mediator required".into()));
        }
        if self.mediators.iter().any(|p| p.dim() != layout.mediator_dim()) {
            return Err(Error::InvalidHyper(format!("mediator priors must have dimension {}", layout.mediator_dim())));
        }
        let cp = &self.concentration;
        for g in [cp.theta, cp.omega, cp.psi] {
            if !pos(g.shape) || !pos(g.rate) {
                return Err(Error::InvalidHyper("concentration gamma priors must have positive shape and rate".into()));
            }
        }
        Ok(())
    }
}
