//! Local models, priors and prior-integrated densities.

pub mod density;
pub mod empirical;
pub mod params;
pub mod prior;

pub use density::*;
pub use empirical::PriorSettings;
pub use params::{CovariateParams, LocalGlm, MediatorParams, OutcomeParams};
pub use prior::{ConcentrationPriors, CovariatePrior, GammaPrior, Hyperparams, RegressionPrior};
