//! Nested marginal Gibbs sampler with auxiliary clusters at each level.
//!
//! One iteration reassigns every subject, refreshes θ, ω and ψ from their
//! full conditionals, then updates the three concentrations.

mod conjugate;
pub mod drawlog;
mod state;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution, Gamma};
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::{
    covariate_log_density, glm_log_density, mediators_log_density, CovariateParams, GammaPrior, Hyperparams, LocalGlm,
    MediatorParams, OutcomeParams,
};

pub(crate) use conjugate::{draw_psi, draw_psi_into, GlmPrior, Prepared};
pub use state::{ClusterState, Concentrations, PosteriorDraw};

use conjugate::{draw_mediators_prior_into, gram};

pub const DEFAULT_ITERATIONS: usize = 2000;
pub const DEFAULT_BURN_IN: usize = 500;
pub const DEFAULT_THIN: usize = 2;
pub const DEFAULT_AUX: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Auxiliary clusters per level.
    pub aux: usize,
    pub seed: u64,
    pub hyper: Hyperparams<f64>,
    /// Hold the concentrations at these values instead of sampling them.
    #[serde(default)]
    pub fixed_concentrations: Option<Concentrations>,
    /// Drop all likelihood terms; the chain then samples the prior.
    #[serde(default)]
    pub prior_only: bool,
    /// Never update memberships.
    #[serde(default)]
    pub frozen_partition: bool,
    /// Starting partition; everyone in one cluster when absent.
    #[serde(default)]
    pub initial_labels: Option<Vec<[usize; 3]>>,
}

impl SamplerConfig {
    pub fn new(hyper: Hyperparams<f64>) -> Self {
        SamplerConfig {
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
            aux: DEFAULT_AUX,
            seed: 0,
            hyper,
            fixed_concentrations: None,
            prior_only: false,
            frozen_partition: false,
            initial_labels: None,
        }
    }

    pub fn validate(&self, data: &Dataset) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::InvalidConfig(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::InvalidConfig("thinning must be at least 1".into()));
        }
        if self.aux == 0 {
            return Err(Error::InvalidConfig("at least one auxiliary cluster is required".into()));
        }
        if let Some(c) = self.fixed_concentrations {
            if !(c.theta > 0.0 && c.omega > 0.0 && c.psi > 0.0) {
                return Err(Error::InvalidConfig("fixed concentrations must be positive".into()));
            }
        }
        if let Some(labels) = &self.initial_labels {
            if labels.len() != data.n() {
                return Err(Error::InvalidConfig("initial labels must cover every subject".into()));
            }
            ClusterState::from_labels(labels.clone())?;
        }
        data.validate()?;
        self.hyper.validate(&data.layout())
    }

    /// Number of draws a full run emits.
    pub fn kept_draws(&self) -> usize {
        (self.iterations - self.burn_in) / self.thin
    }
}

/// Data, priors and scratch space shared by every step of a chain.
pub struct Sampler {
    prep: Prepared,
    hyper: Hyperparams<f64>,
    outcome_prior: GlmPrior,
    mediator_priors: Vec<GlmPrior>,
    aux: usize,
    prior_only: bool,
    scratch: Scratch,
}

#[derive(Default)]
struct Scratch {
    theta: Vec<OutcomeParams<f64>>,
    omega: Vec<MediatorParams<f64>>,
    psi: Vec<CovariateParams<f64>>,
    cands: Vec<Cand>,
    logw: Vec<f64>,
}

#[derive(Debug, Clone, Copy)]
enum Cand {
    Existing(usize, usize, usize),
    NewX(usize, usize, usize),
    NewM(usize, usize, usize),
    NewY(usize, usize, usize),
}

fn empty_glm() -> LocalGlm<f64> {
    LocalGlm { coef: vec![], variance: None }
}

fn empty_psi() -> CovariateParams<f64> {
    CovariateParams { g: vec![], h: vec![], f: vec![] }
}

/// One slot in a grow-only pool, returning its index.
fn slot<T>(pool: &mut Vec<T>, used: &mut usize, make: impl FnOnce() -> T) -> usize {
    if *used == pool.len() {
        pool.push(make());
    }
    *used += 1;
    *used - 1
}

/// Pick an index with probability proportional to `exp(logw)`.
fn sample_log_weights<R: Rng + ?Sized>(logw: &[f64], rng: &mut R) -> usize {
    let max = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = logw.iter().map(|w| (w - max).exp()).sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in logw.iter().enumerate() {
        let p = (w - max).exp();
        if u < p {
            return k;
        }
        u -= p;
    }
    logw.iter().rposition(|w| w.is_finite()).unwrap_or(logw.len() - 1)
}

/// One Gibbs update of a DP concentration shared by several restaurants,
/// each given as `(customers, tables)`, under a gamma prior.
pub fn sample_concentration<R: Rng + ?Sized>(
    prior: GammaPrior<f64>,
    current: f64,
    groups: &[(usize, usize)],
    rng: &mut R,
) -> f64 {
    let mut shape = prior.shape;
    let mut rate = prior.rate;
    for &(n, k) in groups {
        if n == 0 {
            continue;
        }
        shape += k as f64;
        let eta: f64 = Beta::new(current + 1.0, n as f64).expect("valid beta").sample(rng);
        rate -= eta.max(1e-300).ln();
        if rng.random::<f64>() < n as f64 / (current + n as f64) {
            shape -= 1.0;
        }
    }
    let draw: f64 = Gamma::new(shape.max(1e-8), 1.0 / rate).expect("valid gamma").sample(rng);
    draw.max(1e-10)
}

impl Sampler {
    pub fn new(data: &Dataset, hyper: &Hyperparams<f64>, aux: usize, prior_only: bool) -> Result<Self> {
        data.validate()?;
        hyper.validate(&data.layout())?;
        if aux == 0 {
            return Err(Error::InvalidConfig("at least one auxiliary cluster is required".into()));
        }
        Ok(Sampler {
            prep: Prepared::new(data),
            outcome_prior: GlmPrior::new(&hyper.outcome),
            mediator_priors: hyper.mediators.iter().map(GlmPrior::new).collect(),
            hyper: hyper.clone(),
            aux,
            prior_only,
            scratch: Scratch::default(),
        })
    }

    pub fn n(&self) -> usize {
        self.prep.n
    }

    /// A legal starting draw: the given partition (one cluster by default)
    /// with parameters from the prior.
    pub fn init_state<R: Rng + ?Sized>(
        &self,
        labels: Option<Vec<[usize; 3]>>,
        alpha: Concentrations,
        rng: &mut R,
    ) -> Result<PosteriorDraw> {
        let state = match labels {
            Some(l) => ClusterState::from_labels(l)?,
            None => ClusterState::single(self.prep.n),
        };
        let mut theta = vec![];
        let mut omega = vec![];
        let mut psi = vec![];
        for j in 0..state.k() {
            theta.push(self.outcome_prior.draw(rng));
            let mut om_j = vec![];
            let mut ps_j = vec![];
            for l in 0..state.k_m(j) {
                let mut om = MediatorParams { blocks: vec![] };
                draw_mediators_prior_into(&self.mediator_priors, &mut om, rng);
                om_j.push(om);
                ps_j.push(
                    (0..state.k_x(j, l)).map(|_| draw_psi(&self.hyper.covariates, self.prep.nb, &[], rng)).collect(),
                );
            }
            omega.push(om_j);
            psi.push(ps_j);
        }
        let draw = PosteriorDraw { iteration: 0, state, theta, omega, psi, alpha };
        draw.check_legal()?;
        Ok(draw)
    }

    /// Reassign every subject in turn, then drop empty clusters.
    pub fn sample_memberships<R: Rng + ?Sized>(&mut self, draw: &mut PosteriorDraw, rng: &mut R) {
        let mut sc = std::mem::take(&mut self.scratch);
        for i in 0..self.prep.n {
            self.reassign(i, draw, &mut sc, rng);
        }
        self.scratch = sc;
        draw.compact();
    }

    fn reassign<R: Rng + ?Sized>(&self, i: usize, draw: &mut PosteriorDraw, sc: &mut Scratch, rng: &mut R) {
        let h = self.aux;
        let hf = h as f64;
        let a = draw.alpha;
        let prep = &self.prep;
        let (y, dy, m, dm, x) = (prep.y[i], prep.dy(i), prep.m(i), prep.dm(i), prep.x(i));
        let lik = !self.prior_only;
        let cov_prior = &self.hyper.covariates;

        let [j0, l0, u0] = draw.state.labels[i];
        {
            let s = &mut draw.state;
            s.n_y[j0] -= 1;
            s.n_m[j0][l0] -= 1;
            s.n_x[j0][l0][u0] -= 1;
        }
        let s = &draw.state;
        let y_empty = s.n_y[j0] == 0;
        let m_empty = s.n_m[j0][l0] == 0;
        let x_empty = s.n_x[j0][l0][u0] == 0;

        let (mut nt, mut no, mut np) = (0usize, 0usize, 0usize);
        sc.cands.clear();
        sc.logw.clear();
        let ln_aux_psi = (a.psi / hf).ln();
        let ln_aux_omega = (a.omega / hf).ln();

        for j in 0..s.n_y.len() {
            let nj = s.n_y[j];
            if nj == 0 {
                continue;
            }
            let ly = if lik { glm_log_density(&draw.theta[j], y, dy) } else { 0.0 };
            let lnj = (nj as f64).ln();
            let den_m = (a.omega + nj as f64).ln();
            for l in 0..s.n_m[j].len() {
                let njl = s.n_m[j][l];
                if njl == 0 {
                    continue;
                }
                let lm = if lik { mediators_log_density(&draw.omega[j][l], m, dm) } else { 0.0 };
                let wl = lnj + (njl as f64).ln() - den_m + ly + lm;
                let den_x = (a.psi + njl as f64).ln();
                for u in 0..s.n_x[j][l].len() {
                    let nu = s.n_x[j][l][u];
                    if nu == 0 {
                        continue;
                    }
                    let lx = if lik { covariate_log_density(&draw.psi[j][l][u], x) } else { 0.0 };
                    sc.cands.push(Cand::Existing(j, l, u));
                    sc.logw.push(wl + (nu as f64).ln() - den_x + lx);
                }
                for k in 0..h {
                    let p = slot(&mut sc.psi, &mut np, empty_psi);
                    if k == 0 && j == j0 && l == l0 && x_empty && !m_empty {
                        sc.psi[p].clone_from(&draw.psi[j0][l0][u0]);
                    } else {
                        draw_psi_into(cov_prior, prep.nb, &[], &mut sc.psi[p], rng);
                    }
                    let lx = if lik { covariate_log_density(&sc.psi[p], x) } else { 0.0 };
                    sc.cands.push(Cand::NewX(j, l, p));
                    sc.logw.push(wl + ln_aux_psi - den_x + lx);
                }
            }
            for k in 0..h {
                let o = slot(&mut sc.omega, &mut no, || MediatorParams { blocks: vec![] });
                let p = slot(&mut sc.psi, &mut np, empty_psi);
                if k == 0 && j == j0 && m_empty && !y_empty {
                    sc.omega[o].clone_from(&draw.omega[j0][l0]);
                    sc.psi[p].clone_from(&draw.psi[j0][l0][u0]);
                } else {
                    draw_mediators_prior_into(&self.mediator_priors, &mut sc.omega[o], rng);
                    draw_psi_into(cov_prior, prep.nb, &[], &mut sc.psi[p], rng);
                }
                let lm = if lik { mediators_log_density(&sc.omega[o], m, dm) } else { 0.0 };
                let lx = if lik { covariate_log_density(&sc.psi[p], x) } else { 0.0 };
                sc.cands.push(Cand::NewM(j, o, p));
                sc.logw.push(lnj + ln_aux_omega - den_m + ly + lm + lx);
            }
        }
        let ln_aux_theta = (a.theta / hf).ln();
        for k in 0..h {
            let t = slot(&mut sc.theta, &mut nt, empty_glm);
            let o = slot(&mut sc.omega, &mut no, || MediatorParams { blocks: vec![] });
            let p = slot(&mut sc.psi, &mut np, empty_psi);
            if k == 0 && y_empty {
                sc.theta[t].clone_from(&draw.theta[j0]);
                sc.omega[o].clone_from(&draw.omega[j0][l0]);
                sc.psi[p].clone_from(&draw.psi[j0][l0][u0]);
            } else {
                self.outcome_prior.draw_into(&mut sc.theta[t], rng);
                draw_mediators_prior_into(&self.mediator_priors, &mut sc.omega[o], rng);
                draw_psi_into(cov_prior, prep.nb, &[], &mut sc.psi[p], rng);
            }
            let ly = if lik { glm_log_density(&sc.theta[t], y, dy) } else { 0.0 };
            let lm = if lik { mediators_log_density(&sc.omega[o], m, dm) } else { 0.0 };
            let lx = if lik { covariate_log_density(&sc.psi[p], x) } else { 0.0 };
            sc.cands.push(Cand::NewY(t, o, p));
            sc.logw.push(ln_aux_theta + ly + lm + lx);
        }

        let pick = sample_log_weights(&sc.logw, rng);
        let s = &mut draw.state;
        let label = match sc.cands[pick] {
            Cand::Existing(j, l, u) => [j, l, u],
            Cand::NewX(j, l, p) => {
                draw.psi[j][l].push(sc.psi[p].clone());
                s.n_x[j][l].push(0);
                [j, l, s.n_x[j][l].len() - 1]
            }
            Cand::NewM(j, o, p) => {
                draw.omega[j].push(sc.omega[o].clone());
                draw.psi[j].push(vec![sc.psi[p].clone()]);
                s.n_m[j].push(0);
                s.n_x[j].push(vec![0]);
                [j, s.n_m[j].len() - 1, 0]
            }
            Cand::NewY(t, o, p) => {
                draw.theta.push(sc.theta[t].clone());
                draw.omega.push(vec![sc.omega[o].clone()]);
                draw.psi.push(vec![vec![sc.psi[p].clone()]]);
                s.n_y.push(0);
                s.n_m.push(vec![0]);
                s.n_x.push(vec![vec![0]]);
                [s.n_y.len() - 1, 0, 0]
            }
        };
        let [j, l, u] = label;
        s.n_y[j] += 1;
        s.n_m[j][l] += 1;
        s.n_x[j][l][u] += 1;
        s.labels[i] = label;
    }

    fn members(&self, state: &ClusterState) -> Vec<Vec<Vec<Vec<usize>>>> {
        let mut out: Vec<Vec<Vec<Vec<usize>>>> = state
            .n_x
            .iter()
            .map(|v| v.iter().map(|w| w.iter().map(|&c| Vec::with_capacity(c)).collect()).collect())
            .collect();
        if !self.prior_only {
            for (i, &[j, l, u]) in state.labels.iter().enumerate() {
                out[j][l][u].push(i);
            }
        }
        out
    }

    /// θ*_j from each y-cluster's full conditional.
    pub fn sample_theta<R: Rng + ?Sized>(&self, draw: &mut PosteriorDraw, rng: &mut R) {
        let members = self.members(&draw.state);
        let d = self.outcome_prior.dim();
        for (j, mj) in members.iter().enumerate() {
            let rows: Vec<usize> = mj.iter().flatten().flatten().copied().collect();
            let designs: Vec<&[f64]> = rows.iter().map(|&i| self.prep.dy(i)).collect();
            let ys: Vec<f64> = rows.iter().map(|&i| self.prep.y[i]).collect();
            let xtx = gram(&designs, d);
            draw.theta[j] = self.outcome_prior.draw_posterior(&xtx, &designs, &ys, &draw.theta[j], rng);
        }
    }

    /// ω*_{l|j}, one block per mediator, from each m-cluster's full conditional.
    pub fn sample_omega<R: Rng + ?Sized>(&self, draw: &mut PosteriorDraw, rng: &mut R) {
        let members = self.members(&draw.state);
        let d = 1 + self.prep.dx;
        for (j, mj) in members.iter().enumerate() {
            for (l, mjl) in mj.iter().enumerate() {
                let rows: Vec<usize> = mjl.iter().flatten().copied().collect();
                let designs: Vec<&[f64]> = rows.iter().map(|&i| self.prep.dm(i)).collect();
                let xtx = gram(&designs, d);
                for (q, prior) in self.mediator_priors.iter().enumerate() {
                    let ys: Vec<f64> = rows.iter().map(|&i| self.prep.m(i)[q]).collect();
                    let cur = &draw.omega[j][l].blocks[q];
                    let new = prior.draw_posterior(&xtx, &designs, &ys, cur, rng);
                    draw.omega[j][l].blocks[q] = new;
                }
            }
        }
    }

    /// ψ*_{u|jl} from Beta and normal-inverse-χ² full conditionals.
    pub fn sample_psi<R: Rng + ?Sized>(&self, draw: &mut PosteriorDraw, rng: &mut R) {
        let members = self.members(&draw.state);
        for (j, mj) in members.iter().enumerate() {
            for (l, mjl) in mj.iter().enumerate() {
                for (u, rows) in mjl.iter().enumerate() {
                    let xs: Vec<&[f64]> = rows.iter().map(|&i| self.prep.x(i)).collect();
                    draw_psi_into(&self.hyper.covariates, self.prep.nb, &xs, &mut draw.psi[j][l][u], rng);
                }
            }
        }
    }

    /// α_θ given `(n, k)`, α_ω given every `(n_j, k_j)`, α_ψ given every
    /// `(n_{l|j}, k_{jl})`.
    pub fn sample_concentrations<R: Rng + ?Sized>(&self, draw: &mut PosteriorDraw, rng: &mut R) {
        let s = &draw.state;
        let cp = &self.hyper.concentration;
        let a = draw.alpha;
        let theta = sample_concentration(cp.theta, a.theta, &[(s.n(), s.k())], rng);
        let groups: Vec<(usize, usize)> = (0..s.k()).map(|j| (s.n_y[j], s.k_m(j))).collect();
        let omega = sample_concentration(cp.omega, a.omega, &groups, rng);
        let groups: Vec<(usize, usize)> = (0..s.k())
            .flat_map(|j| (0..s.k_m(j)).map(move |l| (j, l)))
            .map(|(j, l)| (s.n_m[j][l], s.k_x(j, l)))
            .collect();
        let psi = sample_concentration(cp.psi, a.psi, &groups, rng);
        draw.alpha = Concentrations { theta, omega, psi };
    }

    pub fn sample_parameters<R: Rng + ?Sized>(&self, draw: &mut PosteriorDraw, rng: &mut R) {
        self.sample_theta(draw, rng);
        self.sample_omega(draw, rng);
        self.sample_psi(draw, rng);
    }
}

/// Prior means of the concentrations.
pub fn prior_mean_concentrations(h: &Hyperparams<f64>) -> Concentrations {
    let c = &h.concentration;
    Concentrations {
        theta: c.theta.shape / c.theta.rate,
        omega: c.omega.shape / c.omega.rate,
        psi: c.psi.shape / c.psi.rate,
    }
}

/// A running chain. Iterating yields the kept draws.
pub struct Chain {
    sampler: Sampler,
    config: SamplerConfig,
    draw: PosteriorDraw,
    rng: ChaCha8Rng,
    iteration: usize,
}

impl Chain {
    pub fn new(data: &Dataset, config: SamplerConfig) -> Result<Self> {
        config.validate(data)?;
        let sampler = Sampler::new(data, &config.hyper, config.aux, config.prior_only)?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let alpha = config.fixed_concentrations.unwrap_or_else(|| prior_mean_concentrations(&config.hyper));
        let mut draw = sampler.init_state(config.initial_labels.clone(), alpha, &mut rng)?;
        sampler.sample_parameters(&mut draw, &mut rng);
        Ok(Chain { sampler, config, draw, rng, iteration: 0 })
    }

    pub fn current(&self) -> &PosteriorDraw {
        &self.draw
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    /// One full Gibbs iteration.
    pub fn step(&mut self) {
        if !self.config.frozen_partition {
            self.sampler.sample_memberships(&mut self.draw, &mut self.rng);
        }
        self.sampler.sample_parameters(&mut self.draw, &mut self.rng);
        if self.config.fixed_concentrations.is_none() {
            self.sampler.sample_concentrations(&mut self.draw, &mut self.rng);
        }
        self.iteration += 1;
        self.draw.iteration = self.iteration;
    }
}

impl Iterator for Chain {
    type Item = PosteriorDraw;

    fn next(&mut self) -> Option<PosteriorDraw> {
        while self.iteration < self.config.iterations {
            self.step();
            let past = self.iteration.saturating_sub(self.config.burn_in);
            if past > 0 && past.is_multiple_of(self.config.thin) {
                return Some(self.draw.clone());
            }
        }
        None
    }
}

/// Run a chain to completion and collect the kept draws.
pub fn run_chain(data: &Dataset, config: &SamplerConfig) -> Result<Vec<PosteriorDraw>> {
    Ok(Chain::new(data, config.clone())?.collect())
}

/// Standalone initial draw (single cluster unless labels are configured).
pub fn init_state(data: &Dataset, config: &SamplerConfig) -> Result<PosteriorDraw> {
    config.validate(data)?;
    let sampler = Sampler::new(data, &config.hyper, config.aux, config.prior_only)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let alpha = config.fixed_concentrations.unwrap_or_else(|| prior_mean_concentrations(&config.hyper));
    sampler.init_state(config.initial_labels.clone(), alpha, &mut rng)
}
