//! Three-level enriched Pólya urn on finite colour spaces.
//!
//! Colours are zero-based: an observation `(i, j, l)` is X-colour `i`,
//! M-colour `j` within X-urn `i`, and Y-colour `l` within urn `(i, j)`.
//! Everything is generic over [`Field`], so rationals give exact answers.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{rising, Field};

pub mod suite;

/// Initial ball counts. `mu[i][j]` is `μ(j, i)`, `gamma[i][j][l]` is `γ(l, j, i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnParams<T> {
    pub alpha: Vec<T>,
    pub mu: Vec<Vec<T>>,
    pub gamma: Vec<Vec<Vec<T>>>,
}

pub type Obs = (usize, usize, usize);

impl<T: Field> UrnParams<T> {
    pub fn new(alpha: Vec<T>, mu: Vec<Vec<T>>, gamma: Vec<Vec<Vec<T>>>) -> Result<Self> {
        let p = UrnParams { alpha, mu, gamma };
        p.validate()?;
        Ok(p)
    }

    /// Same count `c` everywhere, `k × r × s` colours.
    pub fn uniform(k: usize, r: usize, s: usize, c: T) -> Result<Self> {
        Self::new(vec![c.clone(); k], vec![vec![c.clone(); r]; k], vec![vec![vec![c; s]; r]; k])
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.alpha.len();
        if k == 0 {
            return Err(Error::InvalidUrn("empty support".into()));
        }
        if self.mu.len() != k || self.gamma.len() != k {
            return Err(Error::InvalidUrn("M and Y urns must exist for every X colour".into()));
        }
        let r = self.mu[0].len();
        let s = self.gamma[0].first().map_or(0, |g| g.len());
        if r == 0 || s == 0 {
            return Err(Error::InvalidUrn("empty support".into()));
        }
        for i in 0..k {
            if self.mu[i].len() != r || self.gamma[i].len() != r {
                return Err(Error::InvalidUrn(format!("X colour {i}: ragged M urn")));
            }
            if self.gamma[i].iter().any(|g| g.len() != s) {
                return Err(Error::InvalidUrn(format!("X colour {i}: ragged Y urn")));
            }
        }
        let all_pos = self.alpha.iter().all(|c| *c > T::zero())
            && self.mu.iter().flatten().all(|c| *c > T::zero())
            && self.gamma.iter().flatten().flatten().all(|c| *c > T::zero());
        if !all_pos {
            return Err(Error::InvalidUrn("all ball counts must be positive".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.alpha.len(), self.mu[0].len(), self.gamma[0][0].len())
    }

    fn check_obs(&self, obs: &[Obs]) -> Result<()> {
        let (k, r, s) = self.dims();
        for (t, &(i, j, l)) in obs.iter().enumerate() {
            if i >= k || j >= r || l >= s {
                return Err(Error::InvalidUrn(format!(
                    "observation {t} = ({i}, {j}, {l}) outside {k}x{r}x{s} colours"
                )));
            }
        }
        Ok(())
    }
}

fn sum<T: Field>(v: &[T]) -> T {
    v.iter().cloned().fold(T::zero(), |a, b| a + b)
}

/// Probabilities over all `k·r·s` cells, X-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbTable<T> {
    pub dims: (usize, usize, usize),
    pub probs: Vec<T>,
}

impl<T: Field> ProbTable<T> {
    pub fn get(&self, i: usize, j: usize, l: usize) -> &T {
        let (_, r, s) = self.dims;
        &self.probs[(i * r + j) * s + l]
    }
    pub fn total(&self) -> T {
        sum(&self.probs)
    }
}

/// Predictive of the next draw given `history`.
pub fn urn_predictive<T: Field>(params: &UrnParams<T>, history: &[Obs]) -> Result<ProbTable<T>> {
    params.validate()?;
    params.check_obs(history)?;
    let post = update_counts(params, history);
    Ok(first_draw_table(&post))
}

fn first_draw_table<T: Field>(p: &UrnParams<T>) -> ProbTable<T> {
    let (k, r, s) = p.dims();
    let a_tot = sum(&p.alpha);
    let mut probs = Vec::with_capacity(k * r * s);
    for i in 0..k {
        let pi = p.alpha[i].clone() / a_tot.clone();
        let m_tot = sum(&p.mu[i]);
        for j in 0..r {
            let pj = p.mu[i][j].clone() / m_tot.clone();
            let g_tot = sum(&p.gamma[i][j]);
            for l in 0..s {
                let pl = p.gamma[i][j][l].clone() / g_tot.clone();
                probs.push(pi.clone() * pj.clone() * pl);
            }
        }
    }
    ProbTable { dims: (k, r, s), probs }
}

fn update_counts<T: Field>(params: &UrnParams<T>, obs: &[Obs]) -> UrnParams<T> {
    let mut p = params.clone();
    for &(i, j, l) in obs {
        p.alpha[i] = p.alpha[i].clone() + T::one();
        p.mu[i][j] = p.mu[i][j].clone() + T::one();
        p.gamma[i][j][l] = p.gamma[i][j][l].clone() + T::one();
    }
    p
}

/// Posterior urn parameters: one extra ball per observation at each level.
pub fn posterior_edp3<T: Field>(params: &UrnParams<T>, observations: &[Obs]) -> Result<UrnParams<T>> {
    params.validate()?;
    params.check_obs(observations)?;
    Ok(update_counts(params, observations))
}

/// Probability of the whole sequence, as a product of three
/// Dirichlet-multinomial factors written with rising factorials.
pub fn joint_probability<T: Field>(params: &UrnParams<T>, seq: &[Obs]) -> Result<T> {
    params.validate()?;
    params.check_obs(seq)?;
    let (k, r, s) = params.dims();
    let mut n_i = vec![0usize; k];
    let mut n_ij = vec![vec![0usize; r]; k];
    let mut n_ijl = vec![vec![vec![0usize; s]; r]; k];
    for &(i, j, l) in seq {
        n_i[i] += 1;
        n_ij[i][j] += 1;
        n_ijl[i][j][l] += 1;
    }
    let mut num = T::one();
    let mut den = rising(&sum(&params.alpha), seq.len());
    for i in 0..k {
        num = num * rising(&params.alpha[i], n_i[i]);
        den = den * rising(&sum(&params.mu[i]), n_i[i]);
        for j in 0..r {
            num = num * rising(&params.mu[i][j], n_ij[i][j]);
            den = den * rising(&sum(&params.gamma[i][j]), n_ij[i][j]);
            for (g, &c) in params.gamma[i][j].iter().zip(&n_ijl[i][j]) {
                num = num * rising(g, c);
            }
        }
    }
    Ok(num / den)
}

/// Sequential product of predictives; equal to [`joint_probability`].
pub fn sequential_probability<T: Field>(params: &UrnParams<T>, seq: &[Obs]) -> Result<T> {
    let mut acc = T::one();
    for t in 0..seq.len() {
        let table = urn_predictive(params, &seq[..t])?;
        let (i, j, l) = seq[t];
        acc = acc * table.get(i, j, l).clone();
    }
    Ok(acc)
}

fn draw_index<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let total: f64 = weights.iter().sum();
    let mut u = rng.random::<f64>() * total;
    for (k, w) in weights.iter().enumerate() {
        if u < *w {
            return k;
        }
        u -= w;
    }
    weights.len() - 1
}

/// Run the urn for `n` draws.
pub fn simulate_sequence<T: Field, R: Rng + ?Sized>(params: &UrnParams<T>, n: usize, rng: &mut R) -> Result<Vec<Obs>> {
    params.validate()?;
    let mut alpha: Vec<f64> = params.alpha.iter().map(Field::to_f64).collect();
    let mut mu: Vec<Vec<f64>> = params.mu.iter().map(|v| v.iter().map(Field::to_f64).collect()).collect();
    let mut gamma: Vec<Vec<Vec<f64>>> =
        params.gamma.iter().map(|m| m.iter().map(|v| v.iter().map(Field::to_f64).collect()).collect()).collect();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let i = draw_index(&alpha, rng);
        let j = draw_index(&mu[i], rng);
        let l = draw_index(&gamma[i][j], rng);
        alpha[i] += 1.0;
        mu[i][j] += 1.0;
        gamma[i][j][l] += 1.0;
        out.push((i, j, l));
    }
    Ok(out)
}

/// Mean and variance of one random probability mass.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelMoments<T> {
    pub mean: T,
    pub variance: T,
}

/// Dirichlet moments of `P(A)` with base mass `p0 = P0(A)` and total mass `mass`.
pub fn level_moments<T: Field>(p0: T, mass: T) -> Result<LevelMoments<T>> {
    if !(mass > T::zero()) {
        return Err(Error::InvalidUrn("total mass must be positive".into()));
    }
    if p0 < T::zero() || p0 > T::one() {
        return Err(Error::InvalidUrn("base probability outside [0, 1]".into()));
    }
    let variance = p0.clone() * (T::one() - p0.clone()) / (mass + T::one());
    Ok(LevelMoments { mean: p0, variance })
}

/// Moments of `P_X(A)`, `P_{M|X}(B | i)` for every X colour `i`,
/// `P_{Y|MX}(C | j, i)` for every pair, and `E[P(A × B × C)]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Edp3Moments<T> {
    pub x: LevelMoments<T>,
    pub m_given_x: Vec<LevelMoments<T>>,
    pub y_given_mx: Vec<Vec<LevelMoments<T>>>,
    pub joint_mean: T,
}

/// Closed-form moments for colour sets `a_set ⊆ X`, `b_set ⊆ M`, `c_set ⊆ Y`.
pub fn edp3_moments<T: Field>(
    params: &UrnParams<T>,
    a_set: &[usize],
    b_set: &[usize],
    c_set: &[usize],
) -> Result<Edp3Moments<T>> {
    params.validate()?;
    let (k, r, s) = params.dims();
    if a_set.iter().any(|&i| i >= k) || b_set.iter().any(|&j| j >= r) || c_set.iter().any(|&l| l >= s) {
        return Err(Error::InvalidUrn("set contains a colour outside the support".into()));
    }
    let a_tot = sum(&params.alpha);
    let pick = |v: &[T], set: &[usize]| set.iter().fold(T::zero(), |acc, &c| acc + v[c].clone());
    let px = pick(&params.alpha, a_set) / a_tot.clone();
    let x = level_moments(px, a_tot.clone())?;
    let mut m_given_x = Vec::with_capacity(k);
    let mut y_given_mx = Vec::with_capacity(k);
    let mut joint_mean = T::zero();
    for i in 0..k {
        let m_tot = sum(&params.mu[i]);
        m_given_x.push(level_moments(pick(&params.mu[i], b_set) / m_tot.clone(), m_tot.clone())?);
        let mut row = Vec::with_capacity(r);
        for j in 0..r {
            let g_tot = sum(&params.gamma[i][j]);
            let pc = pick(&params.gamma[i][j], c_set) / g_tot.clone();
            if a_set.contains(&i) && b_set.contains(&j) {
                joint_mean = joint_mean
                    + params.alpha[i].clone() / a_tot.clone() * params.mu[i][j].clone() / m_tot.clone() * pc.clone();
            }
            row.push(level_moments(pc, g_tot)?);
        }
        y_given_mx.push(row);
    }
    Ok(Edp3Moments { x, m_given_x, y_given_mx, joint_mean })
}

/// Truncated cube-breaking weights: `π_j`, `π_{l|j}`, `π_{u|j,l}` for
/// indices below `depth`, with the mass left beyond the truncation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncatedCubeBreak {
    pub depth: usize,
    pub pi_y: Vec<f64>,
    pub pi_m: Vec<Vec<f64>>,
    pub pi_x: Vec<Vec<Vec<f64>>>,
    pub residual_y: f64,
    pub residual_m: Vec<f64>,
    pub residual_x: Vec<Vec<f64>>,
}

impl TruncatedCubeBreak {
    /// Weight of the triple `(j, l, u)`: `π_j π_{l|j} π_{u|j,l}`.
    pub fn joint_weight(&self, j: usize, l: usize, u: usize) -> f64 {
        self.pi_y[j] * self.pi_m[j][l] * self.pi_x[j][l][u]
    }
}

pub const DEFAULT_CUBE_DEPTH: usize = 50;

fn sticks<R: Rng + ?Sized>(conc: f64, depth: usize, rng: &mut R) -> (Vec<f64>, f64) {
    let beta = rand_distr::Beta::new(1.0, conc).expect("positive concentration");
    let mut left = 1.0;
    let mut w = Vec::with_capacity(depth);
    for _ in 0..depth {
        let v: f64 = rand_distr::Distribution::sample(&beta, rng);
        w.push(left * v);
        left *= 1.0 - v;
    }
    (w, left)
}

/// Draw stick-breaking weights at the three levels, `Beta(1, α)` breaks.
pub fn cube_break<R: Rng + ?Sized>(
    alpha_theta: f64,
    alpha_omega: f64,
    alpha_psi: f64,
    depth: usize,
    rng: &mut R,
) -> Result<TruncatedCubeBreak> {
    if depth == 0 {
        return Err(Error::InvalidUrn("truncation depth must be at least 1".into()));
    }
    for (name, a) in [("alpha_theta", alpha_theta), ("alpha_omega", alpha_omega), ("alpha_psi", alpha_psi)] {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidUrn(format!("{name} must be positive")));
        }
    }
    let (pi_y, residual_y) = sticks(alpha_theta, depth, rng);
    let mut pi_m = Vec::with_capacity(depth);
    let mut residual_m = Vec::with_capacity(depth);
    let mut pi_x = Vec::with_capacity(depth);
    let mut residual_x = Vec::with_capacity(depth);
    for _ in 0..depth {
        let (w, res) = sticks(alpha_omega, depth, rng);
        pi_m.push(w);
        residual_m.push(res);
        let mut px = Vec::with_capacity(depth);
        let mut rx = Vec::with_capacity(depth);
        for _ in 0..depth {
            let (w, res) = sticks(alpha_psi, depth, rng);
            px.push(w);
            rx.push(res);
        }
        pi_x.push(px);
        residual_x.push(rx);
    }
    Ok(TruncatedCubeBreak { depth, pi_y, pi_m, pi_x, residual_y, residual_m, residual_x })
}
