//! A fixed one-cluster posterior state whose potential-outcome means have a
//! closed form, and a small multi-cluster chain for identity checks.

use edpmed_core::gcomp::{expected_potential_outcome, EffectQuery, Regime};
use edpmed_core::model::{
    ConcentrationPriors, CovariateParams, CovariatePrior, GammaPrior, Hyperparams, LocalGlm, MediatorParams,
    RegressionPrior,
};
use edpmed_core::num::norm_cdf;
use edpmed_core::sampler::{Concentrations, SamplerConfig};
use edpmed_core::{run_chain, ClusterState, Dataset, PosteriorDraw, VarKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::ident;

pub const Q: usize = 2;
pub const P1: usize = 1;
pub const P2: usize = 1;
pub const LAMBDA: f64 = 2.0;

pub fn hyper(y_kind: VarKind) -> Hyperparams<f64> {
    let dx = 1 + P1 + P2;
    let dy = 1 + dx + Q;
    Hyperparams {
        covariates: CovariatePrior { a0: 2.0, b0: 3.0, nu0: 4.0, c0: 0.5, mu0: vec![0.5], tau0: vec![1.5] },
        outcome: RegressionPrior::new(y_kind, (0..dy).map(|k| 0.1 * k as f64).collect(), ident(dy, LAMBDA), 3.0, 2.0)
            .unwrap(),
        mediators: (0..Q)
            .map(|q| {
                RegressionPrior::new(
                    VarKind::Continuous,
                    (0..1 + dx).map(|k| 0.2 - 0.1 * (k + q) as f64).collect(),
                    ident(1 + dx, LAMBDA),
                    3.0,
                    2.0,
                )
                .unwrap()
            })
            .collect(),
        concentration: ConcentrationPriors {
            theta: GammaPrior { shape: 1.0, rate: 1.0 },
            omega: GammaPrior { shape: 1.0, rate: 1.0 },
            psi: GammaPrior { shape: 1.0, rate: 1.0 },
        },
    }
}

pub fn theta(kind: VarKind, coef: Vec<f64>) -> LocalGlm<f64> {
    LocalGlm { coef, variance: (kind == VarKind::Continuous).then_some(0.7) }
}

pub fn omega(shift: f64) -> MediatorParams<f64> {
    MediatorParams {
        blocks: (0..Q)
            .map(|q| LocalGlm {
                coef: vec![0.3 + shift, 1.2 - 0.4 * q as f64, -0.5 + shift, 0.25 * (q as f64 + 1.0)],
                variance: Some(0.4 + 0.3 * q as f64),
            })
            .collect(),
    }
}

pub fn psi(shift: f64) -> CovariateParams<f64> {
    CovariateParams { g: vec![0.45 + 0.1 * shift, 0.3 + 0.2 * shift], h: vec![0.2 + shift], f: vec![1.5 - 0.5 * shift] }
}

/// One cluster at every level, concentrations negligible.
pub fn one_cluster(kind: VarKind, n: usize) -> PosteriorDraw {
    PosteriorDraw {
        iteration: 0,
        state: ClusterState::single(n),
        theta: vec![theta(kind, vec![0.4, 1.1, -0.6, 0.35, 0.8, -0.45])],
        omega: vec![vec![omega(0.0)]],
        psi: vec![vec![vec![psi(0.0)]]],
        alpha: Concentrations { theta: 1e-30, omega: 1e-30, psi: 1e-30 },
    }
}

/// Closed-form `E[Y(a, M(a_1, a_2))]` for [`one_cluster`]: the mediators and
/// the continuous confounder are Gaussian given the binary confounder, so
/// the linear predictor is Gaussian too.
pub fn g_formula(d: &PosteriorDraw, regime: &Regime) -> f64 {
    let th = &d.theta[0].coef;
    let ps = &d.psi[0][0][0];
    let om = &d.omega[0][0].blocks;
    let a = regime.a as u8 as f64;
    let mut total = 0.0;
    for ld in [0.0, 1.0] {
        let pd = if ld > 0.5 { ps.g[1] } else { 1.0 - ps.g[1] };
        // η = c0 + c1 * lc + Σ θ_m ε_q with lc ~ N(h, f)
        let mut c0 = th[0] + th[1] * a + th[2] * ld;
        let mut c1 = th[3];
        let mut noise = 0.0;
        for (q, b) in om.iter().enumerate() {
            let aq = regime.induction[q] as u8 as f64;
            let tm = th[4 + q];
            c0 += tm * (b.coef[0] + b.coef[1] * aq + b.coef[2] * ld);
            c1 += tm * b.coef[3];
            noise += tm * tm * b.variance.unwrap();
        }
        let mean = c0 + c1 * ps.h[0];
        let var = c1 * c1 * ps.f[0] + noise;
        total += pd
            * match d.theta[0].variance {
                Some(_) => mean,
                None => norm_cdf(mean / (1.0 + var).sqrt()),
            };
    }
    total
}

pub fn random_states(kind: VarKind) -> Vec<PosteriorDraw> {
    let h = hyper(kind);
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let n = 40;
    let mut y = vec![];
    let (mut m1, mut m2, mut a, mut ld, mut lc) = (vec![], vec![], vec![], vec![], vec![]);
    for _ in 0..n {
        let ai = (rng.random::<f64>() < 0.5) as u8 as f64;
        let g = rng.random::<f64>() * 4.0;
        a.push(ai);
        ld.push((rng.random::<f64>() < 0.4) as u8 as f64);
        lc.push(g + rng.random::<f64>());
        m1.push(g + ai + rng.random::<f64>());
        m2.push(-g + rng.random::<f64>());
        let eta = if g > 2.0 { 4.0 - 2.0 * g } else { 3.0 * g - 2.0 } + ai + 0.3 * rng.random::<f64>();
        y.push(match kind {
            VarKind::Continuous => eta,
            VarKind::Binary => (eta > 0.0) as u8 as f64,
        });
    }
    let ds = Dataset::new(y, kind, vec![m1, m2], vec![VarKind::Continuous; 2], a, vec![ld], vec![lc], None).unwrap();
    let mut cfg = SamplerConfig::new(h);
    cfg.iterations = 300;
    cfg.burn_in = 100;
    cfg.thin = 20;
    cfg.seed = 4;
    cfg.fixed_concentrations = Some(Concentrations { theta: 3.0, omega: 3.0, psi: 3.0 });
    let draws = run_chain(&ds, &cfg).unwrap();
    assert!(draws.iter().filter(|d| d.state.k() > 1 && d.state.n_x.iter().flatten().any(|v| v.len() > 1)).count() > 3);
    draws
}

/// One Monte Carlo estimate against its exact value.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub label: String,
    pub estimate: f64,
    pub exact: f64,
    pub se: f64,
}

impl Comparison {
    pub fn z(&self) -> f64 {
        (self.estimate - self.exact) / self.se
    }
}

/// Every treatment/induction regime for both outcome types, `t` Monte Carlo
/// iterations each.
pub fn one_cluster_comparisons(t: usize) -> Vec<Comparison> {
    let mut out = vec![];
    for kind in [VarKind::Continuous, VarKind::Binary] {
        let h = hyper(kind);
        let d = one_cluster(kind, 50);
        for (s, bits) in [[true, true], [false, true], [false, false]].iter().enumerate() {
            for a in [true, false] {
                let regime = Regime { a, induction: bits.to_vec() };
                let mut rng = ChaCha8Rng::seed_from_u64(100 + s as u64);
                let (estimate, se) =
                    expected_potential_outcome(&d, &EffectQuery { regime: regime.clone(), t }, &h, &mut rng).unwrap();
                out.push(Comparison {
                    label: format!("{kind:?} {regime:?}"),
                    estimate,
                    exact: g_formula(&d, &regime),
                    se,
                });
            }
        }
    }
    out
}
