//! Generators for the six simulation scenarios.
//!
//! Indices in the formulas are one-based over `L = (L_disc, L_cont)`, so
//! `L_{p1+2}` is the second continuous confounder. Mediators of a row share
//! one mixture indicator.

use edpmed_core::{Dataset, Error, Result, VarKind};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

/// Optional changes to a scenario's constants. Any `Some` marks the spec
/// as non-canonical.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Overrides {
    /// Multiplies every treatment coefficient in the mediator and outcome
    /// means; `0` removes all treatment effects.
    pub treatment_scale: Option<f64>,
    /// `P(A = 1)` where treatment is not confounded (Scenarios 1 and 6).
    pub treatment_prob: Option<f64>,
    /// Success probability of the binary confounders.
    pub binary_prob: Option<f64>,
    /// Off-diagonal of the continuous-confounder covariance.
    pub covariate_corr: Option<f64>,
    /// Scenario 3: off-diagonal of the mediator covariance.
    pub mediator_corr: Option<f64>,
    /// Scenario 4: skew-normal shape.
    pub skew_shape: Option<f64>,
    /// Scenario 5: latent correlation of the binary confounders.
    pub copula_corr: Option<f64>,
    /// Scenarios 1 and 6: mediator mixing probability.
    pub delta_m: Option<f64>,
    /// Scenarios 1 and 6: outcome mixing probability.
    pub zeta_y: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Overrides::default()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub scenario: u8,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub q: usize,
    pub seed: u64,
    #[serde(default)]
    pub overrides: Overrides,
}

impl ScenarioSpec {
    /// The published dimensions: `p1 = p2 = 4`, `Q = 10`; no continuous
    /// confounders in Scenario 6.
    pub fn canonical(scenario: u8, n: usize, seed: u64) -> Self {
        ScenarioSpec {
            scenario,
            n,
            p1: 4,
            p2: if scenario == 6 { 0 } else { 4 },
            q: 10,
            seed,
            overrides: Overrides::default(),
        }
    }

    pub fn is_canonical(&self) -> bool {
        let c = ScenarioSpec::canonical(self.scenario, self.n, self.seed);
        self.overrides.is_empty() && self.p1 == c.p1 && self.p2 == c.p2 && self.q == c.q
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        ScenarioSpec { seed, ..self.clone() }
    }

    pub fn model(&self) -> Result<Scenario> {
        Scenario::new(self)
    }

    pub fn validate(&self) -> Result<()> {
        self.model().map(|_| ())
    }
}

/// Conditional laws of a data-generating process, in the order
/// `L → A → M → Y`.
pub trait StructuralModel: Sync {
    fn q(&self) -> usize;
    fn draw_l<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64>;
    fn draw_a<R: Rng + ?Sized>(&self, l: &[f64], rng: &mut R) -> f64;
    /// All mediators under treatment `a`.
    fn draw_m<R: Rng + ?Sized>(&self, a: f64, l: &[f64], rng: &mut R) -> Vec<f64>;
    fn mean_y(&self, a: f64, m: &[f64], l: &[f64]) -> f64;
    fn draw_y<R: Rng + ?Sized>(&self, a: f64, m: &[f64], l: &[f64], rng: &mut R) -> f64;
}

/// A validated scenario with constants resolved.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: u8,
    pub n: usize,
    pub p1: usize,
    pub p2: usize,
    pub q: usize,
    t_scale: f64,
    treatment_prob: f64,
    binary_prob: f64,
    delta_m: f64,
    zeta_y: f64,
    skew_delta: f64,
    cov_chol: DMatrix<f64>,
    med_chol: Option<DMatrix<f64>>,
    copula_chol: Option<DMatrix<f64>>,
}

fn equicorrelation_chol(d: usize, rho: f64, what: &str) -> Result<DMatrix<f64>> {
    let m = DMatrix::from_fn(d, d, |i, j| if i == j { 1.0 } else { rho });
    m.cholesky()
        .map(|c| c.l())
        .ok_or_else(|| Error::InvalidConfig(format!("{what} correlation {rho} is not positive definite")))
}

fn mvn<R: Rng + ?Sized>(chol: &DMatrix<f64>, rng: &mut R) -> DVector<f64> {
    let z = DVector::from_fn(chol.nrows(), |_, _| rng.sample::<f64, _>(StandardNormal));
    chol * z
}

fn bern<R: Rng + ?Sized>(p: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < p
}

fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Two-bump mixing weight `e^{-2(x+1)²} / (e^{-2(x+1)²} + e^{-2(x-2)²})`.
pub fn bump_weight(x: f64) -> f64 {
    // Written as a logistic to avoid 0/0 far in the tails.
    logistic(-2.0 * (x + 1.0).powi(2) + 2.0 * (x - 2.0).powi(2))
}

fn pos(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

impl Scenario {
    pub fn new(spec: &ScenarioSpec) -> Result<Self> {
        let o = &spec.overrides;
        let id = spec.scenario;
        let bad = |what: &str| Err(Error::InvalidConfig(format!("scenario {id}: {what}")));
        if !(1..=6).contains(&id) {
            return bad("scenario must be 1 to 6");
        }
        if spec.n == 0 {
            return bad("n must be positive");
        }
        if id == 6 {
            if spec.p1 < 3 || spec.p2 != 0 {
                return bad("needs p1 >= 3 binary confounders and p2 = 0");
            }
            if o.covariate_corr.is_some() {
                return bad("has no continuous confounders to correlate");
            }
        } else if spec.p2 < 4 {
            return bad("needs p2 >= 4 continuous confounders");
        }
        if spec.q < if id == 3 { 3 } else { 1 } {
            return bad("too few mediators");
        }
        let only = |v: &Option<f64>, s: u8, name: &str| -> Result<()> {
            if v.is_some() && id != s {
                return Err(Error::InvalidConfig(format!("override {name} applies to scenario {s} only")));
            }
            Ok(())
        };
        only(&o.mediator_corr, 3, "mediator_corr")?;
        only(&o.skew_shape, 4, "skew_shape")?;
        only(&o.copula_corr, 5, "copula_corr")?;
        if (o.delta_m.is_some() || o.zeta_y.is_some()) && !(id == 1 || id == 6) {
            return bad("mixing probabilities are functions of the data here and cannot be overridden");
        }
        if o.treatment_prob.is_some() && !(id == 1 || id == 6) {
            return bad("treatment is confounded here; treatment_prob does not apply");
        }
        let prob = |v: Option<f64>, d: f64, name: &str| -> Result<f64> {
            let p = v.unwrap_or(d);
            if (0.0..=1.0).contains(&p) {
                Ok(p)
            } else {
                Err(Error::InvalidConfig(format!("{name} must lie in [0, 1]")))
            }
        };
        let t_scale = o.treatment_scale.unwrap_or(1.0);
        if !t_scale.is_finite() {
            return bad("treatment_scale must be finite");
        }
        let shape = o.skew_shape.unwrap_or(4.0);
        Ok(Scenario {
            id,
            n: spec.n,
            p1: spec.p1,
            p2: spec.p2,
            q: spec.q,
            t_scale,
            treatment_prob: prob(o.treatment_prob, 0.4, "treatment_prob")?,
            binary_prob: prob(o.binary_prob, 0.5, "binary_prob")?,
            delta_m: prob(o.delta_m, 0.4, "delta_m")?,
            zeta_y: prob(o.zeta_y, 0.4, "zeta_y")?,
            skew_delta: shape / (1.0 + shape * shape).sqrt(),
            cov_chol: equicorrelation_chol(spec.p2, o.covariate_corr.unwrap_or(0.3), "covariate")?,
            med_chol: if id == 3 {
                Some(equicorrelation_chol(spec.q, o.mediator_corr.unwrap_or(0.45), "mediator")?)
            } else {
                None
            },
            copula_chol: if id == 5 {
                Some(equicorrelation_chol(spec.p1, o.copula_corr.unwrap_or(0.6), "copula")?)
            } else {
                None
            },
        })
    }

    /// One-based confounder `L_k`.
    #[inline]
    fn lv(l: &[f64], k: usize) -> f64 {
        l[k - 1]
    }

    pub fn mediator_means(&self, a: f64, l: &[f64]) -> (f64, f64) {
        let (p1, ts) = (self.p1, self.t_scale);
        let lv = |k| Self::lv(l, k);
        match self.id {
            1 => (
                -4.0 + 2.0 * ts * a - 0.5 * lv(p1 + 2) - lv(p1 + 3) + 0.5 * lv(p1 + 4),
                -4.0 + 0.4 * ts * a + 0.5 * lv(p1 + 2) - 0.8 * lv(p1 + 3),
            ),
            2..=5 => (
                -4.0 + 2.0 * ts * a - 0.5 * lv(p1 + 2) - lv(p1 + 3) + 0.5 * lv(p1 + 4),
                4.0 + 0.4 * ts * a + 0.5 * lv(p1 + 2).powi(2) - 0.8 * lv(p1 + 3) * pos(lv(p1 + 3)),
            ),
            _ => (
                -1.0 + 3.0 * ts * a + 0.5 * lv(p1 - 2) + lv(p1 - 1) + 0.5 * lv(p1),
                -2.0 + ts * a + 0.5 * lv(p1 - 2).powi(2) - 0.8 * lv(p1 - 1) * pos(lv(p1)),
            ),
        }
    }

    pub fn mediator_mixing(&self, l: &[f64]) -> f64 {
        match self.id {
            1 | 6 => self.delta_m,
            _ => bump_weight(Self::lv(l, self.p1 + 1)),
        }
    }

    pub fn outcome_means(&self, a: f64, m: &[f64], l: &[f64]) -> (f64, f64) {
        let (p1, q, ts) = (self.p1, self.q, self.t_scale);
        let lv = |k| Self::lv(l, k);
        let mv = |k: usize| m[k - 1];
        match self.id {
            1 => (
                -4.0 + 2.0 * ts * a - 0.5 * lv(p1 + 2) + 0.5 * mv(q),
                -2.0 + 0.4 * ts * a + 0.5 * lv(p1 + 2) + 0.8 * mv(q),
            ),
            2 | 4 | 5 => (
                -4.0 + 2.0 * ts * a - 0.5 * lv(p1 + 2) * mv(q) - lv(p1 + 3) * mv(q) + 0.5 * lv(p1 + 4) * mv(q),
                4.0 + 0.4 * ts * a + 0.5 * lv(p1 + 2).powi(2) - 0.8 * lv(p1 + 3) * pos(lv(p1 + 3)),
            ),
            3 => (
                -4.0 + 2.0 * ts * a - 0.5 * lv(p1 + 2) * mv(q) - mv(q - 1) * mv(q) + 0.5 * mv(q - 2) * mv(q - 1),
                4.0 + 0.4 * ts * a + 0.3 * mv(q - 2) * mv(q) - 0.8 * lv(p1 + 3) * pos(lv(p1 + 3)),
            ),
            _ => (
                -4.0 + 5.0 * ts * a - 0.5 * lv(p1 - 2) * mv(q) - lv(p1 - 1) * mv(q) + 0.5 * lv(p1) * mv(q),
                4.0 + 6.0 * ts * a + 0.5 * lv(p1 - 2).powi(2) - 0.8 * lv(p1 - 1) * pos(lv(p1)),
            ),
        }
    }

    pub fn outcome_mixing(&self, m: &[f64]) -> f64 {
        match self.id {
            1 | 6 => self.zeta_y,
            _ => bump_weight(m[self.q - 1]),
        }
    }

    /// Standardised error: skew-normal with location 0 and scale 1 in
    /// Scenario 4, standard normal otherwise.
    fn error<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let z0: f64 = rng.sample(StandardNormal);
        if self.id == 4 {
            let z1: f64 = rng.sample(StandardNormal);
            self.skew_delta * z0.abs() + (1.0 - self.skew_delta.powi(2)).sqrt() * z1
        } else {
            z0
        }
    }

    fn error_mean(&self) -> f64 {
        if self.id == 4 {
            self.skew_delta * (2.0 / std::f64::consts::PI).sqrt()
        } else {
            0.0
        }
    }

    pub fn y_kind(&self) -> VarKind {
        if self.id == 6 {
            VarKind::Binary
        } else {
            VarKind::Continuous
        }
    }

    /// Draw one dataset with the spec's seed.
    pub fn generate_with<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Dataset> {
        let n = self.n;
        let mut y = Vec::with_capacity(n);
        let mut a = Vec::with_capacity(n);
        let mut m: Vec<Vec<f64>> = vec![Vec::with_capacity(n); self.q];
        let mut ld: Vec<Vec<f64>> = vec![Vec::with_capacity(n); self.p1];
        let mut lc: Vec<Vec<f64>> = vec![Vec::with_capacity(n); self.p2];
        for _ in 0..n {
            let l = self.draw_l(rng);
            let ai = self.draw_a(&l, rng);
            let mi = self.draw_m(ai, &l, rng);
            y.push(self.draw_y(ai, &mi, &l, rng));
            a.push(ai);
            for (col, v) in m.iter_mut().zip(&mi) {
                col.push(*v);
            }
            for (k, v) in l.iter().enumerate() {
                if k < self.p1 {
                    ld[k].push(*v);
                } else {
                    lc[k - self.p1].push(*v);
                }
            }
        }
        let mk = if self.id == 6 { VarKind::Binary } else { VarKind::Continuous };
        Dataset::new(y, self.y_kind(), m, vec![mk; self.q], a, ld, lc, None)
    }
}

impl StructuralModel for Scenario {
    fn q(&self) -> usize {
        self.q
    }

    fn draw_l<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut l = Vec::with_capacity(self.p1 + self.p2);
        match &self.copula_chol {
            Some(c) => {
                // Threshold chosen so each margin is Bernoulli(binary_prob).
                let cut = edpmed_core::num::norm_quantile(self.binary_prob);
                l.extend(mvn(c, rng).iter().map(|&z| if z < cut { 1.0 } else { 0.0 }));
            }
            None => l.extend((0..self.p1).map(|_| bern(self.binary_prob, rng) as u8 as f64)),
        }
        if self.p2 > 0 {
            l.extend(mvn(&self.cov_chol, rng).iter());
        }
        l
    }

    fn draw_a<R: Rng + ?Sized>(&self, l: &[f64], rng: &mut R) -> f64 {
        let p = match self.id {
            1 | 6 => self.treatment_prob,
            _ => logistic(0.3 * (1..=4).map(|j| Self::lv(l, self.p1 + j)).sum::<f64>()),
        };
        bern(p, rng) as u8 as f64
    }

    fn draw_m<R: Rng + ?Sized>(&self, a: f64, l: &[f64], rng: &mut R) -> Vec<f64> {
        let first = bern(self.mediator_mixing(l), rng);
        let (mu1, mu2) = self.mediator_means(a, l);
        let mu = if first { mu1 } else { mu2 };
        match (self.id, &self.med_chol) {
            (6, _) => {
                let p = edpmed_core::num::norm_cdf(mu);
                (0..self.q).map(|_| bern(p, rng) as u8 as f64).collect()
            }
            (_, Some(c)) => mvn(c, rng).iter().map(|e| mu + e).collect(),
            _ => (0..self.q).map(|_| mu + self.error(rng)).collect(),
        }
    }

    fn mean_y(&self, a: f64, m: &[f64], l: &[f64]) -> f64 {
        let z = self.outcome_mixing(m);
        let (mu1, mu2) = self.outcome_means(a, m, l);
        if self.id == 6 {
            z * edpmed_core::num::norm_cdf(mu1) + (1.0 - z) * edpmed_core::num::norm_cdf(mu2)
        } else {
            z * mu1 + (1.0 - z) * mu2 + self.error_mean()
        }
    }

    fn draw_y<R: Rng + ?Sized>(&self, a: f64, m: &[f64], l: &[f64], rng: &mut R) -> f64 {
        let first = bern(self.outcome_mixing(m), rng);
        let (mu1, mu2) = self.outcome_means(a, m, l);
        let mu = if first { mu1 } else { mu2 };
        if self.id == 6 {
            bern(edpmed_core::num::norm_cdf(mu), rng) as u8 as f64
        } else {
            mu + self.error(rng)
        }
    }
}

/// Draw the dataset described by `spec` from its seed.
pub fn generate(spec: &ScenarioSpec) -> Result<Dataset> {
    let model = spec.model()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    model.generate_with(&mut rng)
}
