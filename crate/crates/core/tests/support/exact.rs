//! Small chains with exact answers: a frozen single cluster against the
//! conjugate posterior, and five subjects against exhaustive enumeration of
//! nested partitions.

use std::collections::HashMap;

use edpmed_core::model::{ConcentrationPriors, CovariatePrior, GammaPrior, Hyperparams, RegressionPrior};
use edpmed_core::num::ln_gamma;
use edpmed_core::sampler::{Chain, Concentrations, SamplerConfig};
use edpmed_core::{run_chain, Dataset, VarKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::ident;

pub fn hyper(q: usize, p1: usize, p2: usize, y_kind: VarKind, lambda: f64) -> Hyperparams<f64> {
    let dx = 1 + p1 + p2;
    Hyperparams {
        covariates: CovariatePrior { a0: 1.0, b0: 1.0, nu0: 3.0, c0: 0.5, mu0: vec![0.0; p2], tau0: vec![1.0; p2] },
        outcome: RegressionPrior::new(y_kind, vec![0.0; 1 + dx + q], ident(1 + dx + q, lambda), 3.0, 2.0).unwrap(),
        mediators: (0..q)
            .map(|_| {
                RegressionPrior::new(VarKind::Continuous, vec![0.0; 1 + dx], ident(1 + dx, lambda), 3.0, 2.0).unwrap()
            })
            .collect(),
        concentration: ConcentrationPriors {
            theta: GammaPrior { shape: 1.0, rate: 1.0 },
            omega: GammaPrior { shape: 1.0, rate: 1.0 },
            psi: GammaPrior { shape: 1.0, rate: 1.0 },
        },
    }
}

/// Two well separated groups; one binary and one continuous confounder.
pub fn toy_data(n: usize, seed: u64, y_kind: VarKind) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut y, mut m, mut a, mut l1, mut l2) = (vec![], vec![], vec![], vec![], vec![]);
    for i in 0..n {
        let g = (i % 2) as f64;
        let ai = if rng.random::<f64>() < 0.5 { 1.0 } else { 0.0 };
        let li = if rng.random::<f64>() < 0.3 + 0.4 * g { 1.0 } else { 0.0 };
        let lc = 3.0 * g + rng.sample::<f64, _>(StandardNormal);
        let mi = -1.0 + 4.0 * g + ai + 0.3 * rng.sample::<f64, _>(StandardNormal);
        let eta = 1.0 + ai - 0.5 * mi + 0.5 * rng.sample::<f64, _>(StandardNormal);
        y.push(match y_kind {
            VarKind::Continuous => eta,
            VarKind::Binary => (eta > 0.0) as i32 as f64,
        });
        m.push(mi);
        a.push(ai);
        l1.push(li);
        l2.push(lc);
    }
    Dataset::new(y, y_kind, vec![m], vec![VarKind::Continuous], a, vec![l1], vec![l2], None).unwrap()
}

pub fn config(h: Hyperparams<f64>, iterations: usize, burn_in: usize, thin: usize, seed: u64) -> SamplerConfig {
    let mut c = SamplerConfig::new(h);
    c.iterations = iterations;
    c.burn_in = burn_in;
    c.thin = thin;
    c.seed = seed;
    c
}

/// Runs a frozen single-cluster chain and compares outcome-coefficient and
/// variance moments with the normal-inverse-gamma posterior. Returns one
/// message per moment outside tolerance.
pub fn conjugate_mismatches(iterations: usize, seed: u64) -> Vec<String> {
    let ds = toy_data(30, 7, VarKind::Continuous);
    let h = hyper(1, 1, 1, VarKind::Continuous, 0.5);
    let mut cfg = config(h.clone(), iterations + 1, 1, 1, seed);
    cfg.frozen_partition = true;
    let draws = run_chain(&ds, &cfg).unwrap();

    let n = ds.n();
    let d = h.outcome.dim();
    let x = DMatrix::from_fn(n, d, |i, k| {
        let mut row = vec![1.0];
        row.extend(ds.x_row(i));
        row.extend(ds.m_row(i));
        row[k]
    });
    let y = DVector::from_column_slice(&ds.y);
    let l0 = DMatrix::from_row_slice(d, d, h.outcome.precision());
    let b0 = DVector::from_column_slice(h.outcome.mean());
    let ln = &l0 + x.transpose() * &x;
    let xty = &l0 * &b0 + x.transpose() * &y;
    let mean = ln.clone().cholesky().unwrap().solve(&xty);
    let an = h.outcome.shape() + n as f64 / 2.0;
    let bn = h.outcome.rate() + 0.5 * (y.dot(&y) + b0.dot(&(&l0 * &b0)) - mean.dot(&xty));
    let cov = ln.try_inverse().unwrap() * (bn / (an - 1.0));
    let s2_mean = bn / (an - 1.0);
    let s2_var = bn * bn / ((an - 1.0).powi(2) * (an - 2.0));

    let mut bad = vec![];
    let t = draws.len() as f64;
    for k in 0..d {
        let vals: Vec<f64> = draws.iter().map(|dr| dr.theta[0].coef[k]).collect();
        let m = vals.iter().sum::<f64>() / t;
        if (m - mean[k]).abs() >= 3.0 * (cov[(k, k)] / t).sqrt() {
            bad.push(format!("coef {k} mean: {m} vs {}", mean[k]));
        }
        let v = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / t;
        if (v / cov[(k, k)] - 1.0).abs() >= 0.06 {
            bad.push(format!("coef {k} variance: {v} vs {}", cov[(k, k)]));
        }
    }
    let c01: f64 =
        draws.iter().map(|dr| (dr.theta[0].coef[0] - mean[0]) * (dr.theta[0].coef[1] - mean[1])).sum::<f64>() / t;
    if (c01 - cov[(0, 1)]).abs() >= 4.0 * (cov[(0, 0)] * cov[(1, 1)] / t).sqrt() {
        bad.push(format!("coef 0/1 covariance: {c01} vs {}", cov[(0, 1)]));
    }
    let s2: f64 = draws.iter().map(|dr| dr.theta[0].variance.unwrap()).sum::<f64>() / t;
    if (s2 - s2_mean).abs() >= 3.0 * (s2_var / t).sqrt() {
        bad.push(format!("variance mean: {s2} vs {s2_mean}"));
    }
    bad
}

/// Per-subject `(subject, mediator block, covariate block)` labels with a
/// log weight.
type Labelled = (Vec<(usize, usize, usize)>, f64);

pub fn set_partitions(items: &[usize]) -> Vec<Vec<Vec<usize>>> {
    if items.is_empty() {
        return vec![vec![]];
    }
    let first = items[0];
    let mut out = vec![];
    for p in set_partitions(&items[1..]) {
        for b in 0..p.len() {
            let mut q = p.clone();
            q[b].insert(0, first);
            out.push(q);
        }
        let mut q = p.clone();
        q.insert(0, vec![first]);
        out.push(q);
    }
    out
}

pub fn log_crp(alpha: f64, blocks: &[Vec<usize>]) -> f64 {
    let n: usize = blocks.iter().map(|b| b.len()).sum();
    blocks.len() as f64 * alpha.ln() + blocks.iter().map(|b| ln_gamma(b.len() as f64)).sum::<f64>()
        - (ln_gamma(alpha + n as f64) - ln_gamma(alpha))
}

/// Normal-inverse-gamma regression marginal likelihood.
pub fn log_ml_regression(p: &RegressionPrior<f64>, rows: &[Vec<f64>], ys: &[f64]) -> f64 {
    let d = p.dim();
    let n = rows.len();
    let x = DMatrix::from_fn(n, d, |i, k| rows[i][k]);
    let y = DVector::from_column_slice(ys);
    let l0 = DMatrix::from_row_slice(d, d, p.precision());
    let b0 = DVector::from_column_slice(p.mean());
    let ln = &l0 + x.transpose() * &x;
    let xty = &l0 * &b0 + x.transpose() * &y;
    let mean = ln.clone().cholesky().unwrap().solve(&xty);
    let an = p.shape() + n as f64 / 2.0;
    let bn = p.rate() + 0.5 * (y.dot(&y) + b0.dot(&(&l0 * &b0)) - mean.dot(&xty));
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI).ln() + 0.5 * l0.determinant().ln() - 0.5 * ln.determinant().ln()
        + p.shape() * p.rate().ln()
        - an * bn.ln()
        + ln_gamma(an)
        - ln_gamma(p.shape())
}

pub fn log_ml_covariates(c: &CovariatePrior<f64>, rows: &[Vec<f64>]) -> f64 {
    let n = rows.len() as f64;
    let s: f64 = rows.iter().map(|r| r[0]).sum();
    let lbeta = |a: f64, b: f64| ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
    let bin = lbeta(c.a0 + s, c.b0 + n - s) - lbeta(c.a0, c.b0);
    let xs: Vec<f64> = rows.iter().map(|r| r[1]).collect();
    let mean = xs.iter().sum::<f64>() / n;
    let ss: f64 = xs.iter().map(|x| (x - mean).powi(2)).sum();
    let kn = c.c0 + n;
    let nun = c.nu0 + n;
    let nutau = c.nu0 * c.tau0[0] + ss + c.c0 * n / kn * (mean - c.mu0[0]).powi(2);
    let cont =
        ln_gamma(nun / 2.0) - ln_gamma(c.nu0 / 2.0) + 0.5 * (c.c0 / kn).ln() + 0.5 * c.nu0 * (c.nu0 * c.tau0[0]).ln()
            - 0.5 * nun * nutau.ln()
            - 0.5 * n * std::f64::consts::PI.ln();
    bin + cont
}

/// Total variation distance between the chain's visit frequencies over
/// nested partitions of five subjects and the exact posterior, with
/// concentrations held fixed. Errors if the chain visits a partition the
/// enumeration does not contain.
pub fn five_subject_tv(iters: usize, seed: u64) -> Result<f64, String> {
    let y = vec![0.9, 1.1, -1.4, -1.0, 2.5];
    let m = vec![0.2, 0.3, 1.8, 2.1, 0.0];
    let a = vec![1.0, 1.0, 0.0, 0.0, 1.0];
    let l = vec![-0.5, -0.2, 1.5, 1.1, 0.1];
    let ds = Dataset::new(
        y.clone(),
        VarKind::Continuous,
        vec![m.clone()],
        vec![VarKind::Continuous],
        a.clone(),
        vec![],
        vec![l.clone()],
        None,
    )
    .unwrap();
    let h = hyper(1, 0, 1, VarKind::Continuous, 1.0);
    let alpha = Concentrations { theta: 1.0, omega: 0.8, psi: 1.2 };

    let out_rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, a[i], l[i], m[i]]).collect();
    let med_rows: Vec<Vec<f64>> = (0..5).map(|i| vec![1.0, a[i], l[i]]).collect();
    let cov_rows: Vec<Vec<f64>> = (0..5).map(|i| vec![a[i], l[i]]).collect();
    let pick = |rows: &Vec<Vec<f64>>, b: &[usize]| b.iter().map(|&i| rows[i].clone()).collect::<Vec<_>>();

    let mut exact: HashMap<Vec<[usize; 3]>, f64> = HashMap::new();
    let items: Vec<usize> = (0..5).collect();
    let mut logs = vec![];
    for py in set_partitions(&items) {
        // Product over y-blocks of the options for nested m/x partitions.
        let mut partial: Vec<(Vec<[usize; 3]>, f64)> = vec![(vec![[0; 3]; 5], log_crp(alpha.theta, &py))];
        for (j, yb) in py.iter().enumerate() {
            let ys: Vec<f64> = yb.iter().map(|&i| y[i]).collect();
            let ly = log_ml_regression(&h.outcome, &pick(&out_rows, yb), &ys);
            let mut options = vec![];
            for pm in set_partitions(yb) {
                let mut inner: Vec<Labelled> = vec![(vec![], log_crp(alpha.omega, &pm))];
                for (lidx, mb) in pm.iter().enumerate() {
                    let ms: Vec<f64> = mb.iter().map(|&i| m[i]).collect();
                    let lm = log_ml_regression(&h.mediators[0], &pick(&med_rows, mb), &ms);
                    let mut xopts = vec![];
                    for px in set_partitions(mb) {
                        let mut lx = log_crp(alpha.psi, &px);
                        let mut labs = vec![];
                        for (u, xb) in px.iter().enumerate() {
                            lx += log_ml_covariates(&h.covariates, &pick(&cov_rows, xb));
                            labs.extend(xb.iter().map(|&i| (i, lidx, u)));
                        }
                        xopts.push((labs, lx + lm));
                    }
                    inner = inner
                        .iter()
                        .flat_map(|(labs, w)| {
                            xopts.iter().map(move |(l2, w2)| {
                                let mut v = labs.clone();
                                v.extend(l2.iter().copied());
                                (v, w + w2)
                            })
                        })
                        .collect();
                }
                options.extend(inner);
            }
            partial = partial
                .iter()
                .flat_map(|(labs, w)| {
                    options.iter().map(move |(o, w2)| {
                        let mut v = labs.clone();
                        for &(i, lidx, u) in o {
                            v[i] = [j, lidx, u];
                        }
                        (v, w + w2 + ly)
                    })
                })
                .collect();
        }
        for (labs, w) in partial {
            let canon = edpmed_core::ClusterState::from_labels(labs).unwrap().canonical_labels();
            logs.push((canon, w));
        }
    }
    let mx = logs.iter().map(|(_, w)| *w).fold(f64::NEG_INFINITY, f64::max);
    let z: f64 = logs.iter().map(|(_, w)| (w - mx).exp()).sum();
    for (k, w) in &logs {
        assert!(exact.insert(k.clone(), (w - mx).exp() / z).is_none(), "duplicate partition");
    }
    assert!(exact.len() > 500, "{} nested partitions", exact.len());

    let mut cfg = config(h, usize::MAX, 0, 1, seed);
    cfg.fixed_concentrations = Some(alpha);
    let mut chain = Chain::new(&ds, cfg).unwrap();
    for _ in 0..2_000 {
        chain.step();
    }
    let mut counts: HashMap<Vec<[usize; 3]>, usize> = HashMap::new();
    for _ in 0..iters {
        chain.step();
        *counts.entry(chain.current().state.canonical_labels()).or_default() += 1;
    }
    let mut tv = 0.0;
    for (k, p) in &exact {
        let f = *counts.get(k).unwrap_or(&0) as f64 / iters as f64;
        tv += (f - p).abs();
    }
    if counts.keys().any(|k| !exact.contains_key(k)) {
        return Err("chain visited an unknown partition".into());
    }
    Ok(0.5 * tv)
}
