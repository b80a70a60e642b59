use serde::{Deserialize, Serialize};

use crate::data::VarKind;

/// A within-cluster generalised linear model. A residual variance means a
/// Gaussian linear model; `None` means a probit model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocalGlm<T> {
    pub coef: Vec<T>,
    pub variance: Option<T>,
}

impl<T> LocalGlm<T> {
    pub fn kind(&self) -> VarKind {
        if self.variance.is_some() {
            VarKind::Continuous
        } else {
            VarKind::Binary
        }
    }
}

/// θ: outcome model over the design `(1, a, l, m)`.
pub type OutcomeParams<T> = LocalGlm<T>;

/// ω: one local GLM per mediator over the design `(1, a, l)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediatorParams<T> {
    pub blocks: Vec<LocalGlm<T>>,
}

/// ψ: independent marginals of `x = (a, l_disc, l_cont)`.
///
/// `g` holds Bernoulli success probabilities for the `1 + p1` binary
/// coordinates (treatment first); `h`/`f` are means and variances of the
/// `p2` continuous ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovariateParams<T> {
    pub g: Vec<T>,
    pub h: Vec<T>,
    pub f: Vec<T>,
}
