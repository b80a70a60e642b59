//! Linear structural equation baseline with a percentile bootstrap.
//!
//! `M_q ~ 1 + A + L` and `Y ~ 1 + A + M + L` by least squares. The direct
//! effect is the outcome model's treatment coefficient and each mediator
//! contributes the product of its two path coefficients.

use edpmed_core::{Dataset, Effect, EffectEstimate, Error, Result, VarKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Path coefficients: `alpha[q]` (A → M_q), `beta[q]` (M_q → Y) and the
/// direct treatment coefficient.
#[derive(Debug, Clone, PartialEq)]
pub struct LsemPaths {
    pub direct: f64,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
}

impl LsemPaths {
    pub fn effect(&self, e: &Effect) -> Result<f64> {
        let inie = |q: usize| self.alpha[q] * self.beta[q];
        let jnie = || (0..self.alpha.len()).map(inie).sum::<f64>();
        Ok(match e {
            Effect::Nde => self.direct,
            Effect::Jnie => jnie(),
            Effect::Te => self.direct + jnie(),
            Effect::Inie(q) => inie(*q),
            Effect::Pnie(s) => s.iter().map(|&q| inie(q)).sum(),
            Effect::Contrast { .. } => {
                return Err(Error::InvalidEffect("custom contrasts are not defined for the LSEM".into()))
            }
        })
    }
}

/// Least squares by QR; `None` when the design is rank deficient.
pub fn ols(x: &DMatrix<f64>, y: &DVector<f64>) -> Option<DVector<f64>> {
    let (n, p) = x.shape();
    if n < p {
        return None;
    }
    let qr = x.clone().qr();
    let r = qr.r();
    let scale = (0..p).map(|k| r[(k, k)].abs()).fold(0.0, f64::max);
    if (0..p).any(|k| r[(k, k)].abs() <= 1e-10 * scale.max(1e-300)) {
        return None;
    }
    let qty = qr.q().transpose() * y;
    r.solve_upper_triangular(&qty)
}

fn fit_rows(ds: &Dataset, rows: &[usize]) -> Option<LsemPaths> {
    let n = rows.len();
    let q = ds.q();
    let pl = ds.l_row(0).len();
    let xm = DMatrix::from_fn(n, 2 + pl, |i, k| match k {
        0 => 1.0,
        1 => ds.a[rows[i]],
        _ => ds.l_row(rows[i])[k - 2],
    });
    let mut alpha = Vec::with_capacity(q);
    for col in &ds.m {
        let yq = DVector::from_iterator(n, rows.iter().map(|&i| col[i]));
        alpha.push(ols(&xm, &yq)?[1]);
    }
    let xy = DMatrix::from_fn(n, 2 + q + pl, |i, k| match k {
        0 => 1.0,
        1 => ds.a[rows[i]],
        k if k < 2 + q => ds.m[k - 2][rows[i]],
        _ => ds.l_row(rows[i])[k - 2 - q],
    });
    let yy = DVector::from_iterator(n, rows.iter().map(|&i| ds.y[i]));
    let b = ols(&xy, &yy)?;
    Some(LsemPaths { direct: b[1], alpha, beta: (0..q).map(|k| b[2 + k]).collect() })
}

pub fn lsem_paths(ds: &Dataset) -> Result<LsemPaths> {
    if ds.y_kind != VarKind::Continuous || ds.m_kinds.iter().any(|k| *k != VarKind::Continuous) {
        return Err(Error::InvalidData("the LSEM needs a continuous outcome and mediators".into()));
    }
    let rows: Vec<usize> = (0..ds.n()).collect();
    fit_rows(ds, &rows).ok_or_else(|| Error::InvalidData("rank-deficient LSEM design".into()))
}

/// Point estimates with percentile intervals from `bootstrap` resamples.
/// Resamples with a singular design are redrawn.
pub fn lsem_fit(ds: &Dataset, effects: &[Effect], bootstrap: usize, seed: u64) -> Result<Vec<EffectEstimate>> {
    if bootstrap < 2 {
        return Err(Error::InvalidConfig("bootstrap needs at least two resamples".into()));
    }
    for e in effects {
        e.validate(ds.q())?;
    }
    let point = lsem_paths(ds)?;
    let n = ds.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut boot: Vec<Vec<f64>> = vec![Vec::with_capacity(bootstrap); effects.len()];
    let mut failures = 0;
    while boot[0].len() < bootstrap {
        let rows: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
        match fit_rows(ds, &rows) {
            Some(p) => {
                for (k, e) in effects.iter().enumerate() {
                    boot[k].push(p.effect(e)?);
                }
            }
            None => {
                failures += 1;
                if failures > 10 * bootstrap {
                    return Err(Error::InvalidData("bootstrap resamples are persistently singular".into()));
                }
            }
        }
    }
    effects
        .iter()
        .zip(boot)
        .map(|(e, mut b)| {
            b.sort_by(f64::total_cmp);
            let mean = point.effect(e)?;
            Ok(EffectEstimate {
                name: e.name(),
                mean,
                lower: edpmed_core::gcomp::percentile(&b, 0.025),
                upper: edpmed_core::gcomp::percentile(&b, 0.975),
                mc_se: 0.0,
                draws: b,
            })
        })
        .collect()
}
