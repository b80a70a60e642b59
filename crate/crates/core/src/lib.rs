//! Enriched Dirichlet process mixtures for causal mediation analysis.
//!
//! Model types are generic over the scalar; the aliases below fix `f64`,
//! which is what the sampler and g-computation run on.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod data;
pub mod error;
pub mod gcomp;
pub mod linalg;
pub mod model;
pub mod num;
pub mod sampler;
pub mod urn;

pub use data::{ColumnNames, Dataset, Layout, VarKind};
pub use error::{Error, Result};

pub type LocalGlm = model::LocalGlm<f64>;
pub type OutcomeParams = model::OutcomeParams<f64>;
pub type MediatorParams = model::MediatorParams<f64>;
pub type CovariateParams = model::CovariateParams<f64>;
pub type Hyperparams = model::Hyperparams<f64>;
pub type RegressionPrior = model::RegressionPrior<f64>;
pub type CovariatePrior = model::CovariatePrior<f64>;

pub use gcomp::{causal_effects, Effect, EffectEstimate, GcompConfig};
pub use sampler::{run_chain, Chain, ClusterState, Concentrations, PosteriorDraw, SamplerConfig};
