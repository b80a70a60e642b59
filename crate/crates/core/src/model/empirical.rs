//! Data-scaled default hyperparameters.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, VarKind};
use crate::error::{Error, Result};
use crate::num;

use super::prior::{ConcentrationPriors, CovariatePrior, GammaPrior, Hyperparams, RegressionPrior};

/// Knobs for [`Hyperparams::from_data`].
///
/// Regression priors are unit-information: mean at the pooled least-squares
/// fit (probit: intercept `Φ⁻¹(ȳ)`), precision `(X'X + δI) / (n g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PriorSettings {
    pub g: f64,
    pub ridge: f64,
    pub variance_shape: f64,
    pub beta_a: f64,
    pub beta_b: f64,
    pub nu0: f64,
    pub c0: f64,
    pub concentration: GammaPrior<f64>,
}

impl Default for PriorSettings {
    fn default() -> Self {
        PriorSettings {
            g: 1.0,
            ridge: 1e-3,
            variance_shape: 2.0,
            beta_a: 1.0,
            beta_b: 1.0,
            nu0: 2.0,
            c0: 0.5,
            concentration: GammaPrior { shape: 1.0, rate: 1.0 },
        }
    }
}

fn design_matrix(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, f)
}

fn regression_prior(x: &DMatrix<f64>, y: &[f64], kind: VarKind, s: &PriorSettings) -> Result<RegressionPrior<f64>> {
    let (n, d) = x.shape();
    let gram = x.transpose() * x;
    let scale_diag = (0..d).map(|i| gram[(i, i)]).sum::<f64>() / d as f64;
    let jittered = |rel: f64| {
        let mut m = gram.clone();
        for i in 0..d {
            m[(i, i)] += (rel * scale_diag).max(1e-12);
        }
        m
    };
    let xtx = jittered(s.ridge);
    let yv = DVector::from_column_slice(y);
    let (mean, rate) = match kind {
        VarKind::Continuous => {
            // Least squares with only a numerical jitter; the ridge enters the precision.
            let chol = jittered(1e-10)
                .cholesky()
                .ok_or_else(|| Error::InvalidData("design cross-product is not positive definite".into()))?;
            let beta = chol.solve(&(x.transpose() * &yv));
            let resid = &yv - x * &beta;
            let dof = if n > d { (n - d) as f64 } else { n as f64 };
            let mut s2 = resid.norm_squared() / dof;
            if !(s2 > 1e-8) {
                let ybar = yv.mean();
                s2 = (yv.map(|v| (v - ybar).powi(2)).sum() / n as f64).max(1e-4);
            }
            (beta.as_slice().to_vec(), s2 * (s.variance_shape - 1.0).max(0.5))
        }
        VarKind::Binary => {
            let ybar = yv.mean().clamp(0.5 / n as f64, 1.0 - 0.5 / n as f64);
            let mut b = vec![0.0; d];
            b[0] = num::norm_quantile(ybar);
            (b, 1.0)
        }
    };
    let scale = 1.0 / (n as f64 * s.g);
    let precision: Vec<f64> = (0..d * d).map(|k| xtx[(k / d, k % d)] * scale).collect();
    RegressionPrior::new(kind, mean, precision, s.variance_shape, rate)
}

impl Hyperparams<f64> {
    /// Default priors scaled to the data.
    pub fn from_data(ds: &Dataset, settings: &PriorSettings) -> Result<Self> {
        ds.validate()?;
        if !(settings.g > 0.0 && settings.variance_shape > 0.0 && settings.ridge >= 0.0) {
            return Err(Error::InvalidHyper("prior settings must be positive".into()));
        }
        let n = ds.n();
        let layout = ds.layout();
        let dx = layout.x_dim();
        let xs: Vec<Vec<f64>> = (0..n).map(|i| ds.x_row(i)).collect();
        let med_x = design_matrix(n, 1 + dx, |i, j| if j == 0 { 1.0 } else { xs[i][j - 1] });
        let q = ds.q();
        let out_x = design_matrix(n, 1 + dx + q, |i, j| match j {
            0 => 1.0,
            j if j <= dx => xs[i][j - 1],
            j => ds.m[j - 1 - dx][i],
        });
        let outcome = regression_prior(&out_x, &ds.y, ds.y_kind, settings)?;
        let mediators =
            ds.m.iter()
                .zip(&ds.m_kinds)
                .map(|(col, &k)| regression_prior(&med_x, col, k, settings))
                .collect::<Result<Vec<_>>>()?;
        let (mut mu0, mut tau0) = (vec![], vec![]);
        for col in &ds.l_cont {
            let mean = col.iter().sum::<f64>() / n as f64;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
            mu0.push(mean);
            tau0.push(var.max(1e-6));
        }
        let h = Hyperparams {
            covariates: CovariatePrior {
                a0: settings.beta_a,
                b0: settings.beta_b,
                nu0: settings.nu0,
                c0: settings.c0,
                mu0,
                tau0,
            },
            outcome,
            mediators,
            concentration: ConcentrationPriors {
                theta: settings.concentration,
                omega: settings.concentration,
                psi: settings.concentration,
            },
        };
        h.validate(&layout)?;
        Ok(h)
    }
}
