use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CovariateParams, MediatorParams, OutcomeParams};

/// Nested partition. `labels[i] = [j, l, u]`: y-cluster `j`, m-cluster `l`
/// inside `j`, x-cluster `u` inside `(j, l)`. Counts are `n_j`, `n_{l|j}`
/// and `n_{u|jl}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterState {
    pub labels: Vec<[usize; 3]>,
    pub n_y: Vec<usize>,
    pub n_m: Vec<Vec<usize>>,
    pub n_x: Vec<Vec<Vec<usize>>>,
}

impl ClusterState {
    /// Everyone in cluster `(0, 0, 0)`.
    pub fn single(n: usize) -> Self {
        ClusterState { labels: vec![[0, 0, 0]; n], n_y: vec![n], n_m: vec![vec![n]], n_x: vec![vec![vec![n]]] }
    }

    pub fn n(&self) -> usize {
        self.labels.len()
    }

    /// Number of y-clusters `k`.
    pub fn k(&self) -> usize {
        self.n_y.len()
    }

    /// Number of m-clusters inside y-cluster `j`.
    pub fn k_m(&self, j: usize) -> usize {
        self.n_m[j].len()
    }

    /// Number of x-clusters inside `(j, l)`.
    pub fn k_x(&self, j: usize, l: usize) -> usize {
        self.n_x[j][l].len()
    }

    /// Build counts from labels; labels must already be compact.
    pub fn from_labels(labels: Vec<[usize; 3]>) -> Result<Self> {
        let mut n_y: Vec<usize> = vec![];
        let mut n_m: Vec<Vec<usize>> = vec![];
        let mut n_x: Vec<Vec<Vec<usize>>> = vec![];
        for &[j, l, u] in &labels {
            if j >= n_y.len() {
                n_y.resize(j + 1, 0);
                n_m.resize(j + 1, vec![]);
                n_x.resize(j + 1, vec![]);
            }
            if l >= n_m[j].len() {
                n_m[j].resize(l + 1, 0);
                n_x[j].resize(l + 1, vec![]);
            }
            if u >= n_x[j][l].len() {
                n_x[j][l].resize(u + 1, 0);
            }
            n_y[j] += 1;
            n_m[j][l] += 1;
            n_x[j][l][u] += 1;
        }
        let s = ClusterState { labels, n_y, n_m, n_x };
        s.check_legal()?;
        Ok(s)
    }

    /// Counts equal tabulated labels, no empty clusters, shapes nest.
    pub fn check_legal(&self) -> Result<()> {
        let k = self.n_y.len();
        if self.n_m.len() != k || self.n_x.len() != k {
            return Err(Error::IllegalState("count arrays disagree on k".into()));
        }
        let mut ny = vec![0usize; k];
        let mut nm: Vec<Vec<usize>> = self.n_m.iter().map(|v| vec![0; v.len()]).collect();
        let mut nx: Vec<Vec<Vec<usize>>> =
            self.n_x.iter().map(|v| v.iter().map(|w| vec![0; w.len()]).collect()).collect();
        for j in 0..k {
            if self.n_x[j].len() != self.n_m[j].len() {
                return Err(Error::IllegalState(format!("y-cluster {j}: m/x shapes disagree")));
            }
        }
        for (i, &[j, l, u]) in self.labels.iter().enumerate() {
            if j >= k || l >= nm[j].len() || u >= nx[j][l].len() {
                return Err(Error::IllegalState(format!("subject {i} has unregistered label")));
            }
            ny[j] += 1;
            nm[j][l] += 1;
            nx[j][l][u] += 1;
        }
        if ny != self.n_y || nm != self.n_m || nx != self.n_x {
            return Err(Error::IllegalState("stored counts differ from labels".into()));
        }
        if self.n_y.contains(&0)
            || self.n_m.iter().flatten().any(|&c| c == 0)
            || self.n_x.iter().flatten().flatten().any(|&c| c == 0)
        {
            return Err(Error::IllegalState("empty registered cluster".into()));
        }
        Ok(())
    }

    /// Canonical form: clusters renumbered by first appearance at each
    /// level. Two states describe the same nested partition iff their
    /// canonical labels are equal.
    pub fn canonical_labels(&self) -> Vec<[usize; 3]> {
        let mut ymap: Vec<Option<usize>> = vec![None; self.n_y.len()];
        let mut mmap: Vec<Vec<Option<usize>>> = self.n_m.iter().map(|v| vec![None; v.len()]).collect();
        let mut xmap: Vec<Vec<Vec<Option<usize>>>> =
            self.n_x.iter().map(|v| v.iter().map(|w| vec![None; w.len()]).collect()).collect();
        let mut ny = 0;
        let mut nm = vec![0usize; self.n_y.len()];
        let mut nx: Vec<Vec<usize>> = self.n_m.iter().map(|v| vec![0; v.len()]).collect();
        self.labels
            .iter()
            .map(|&[j, l, u]| {
                let cj = *ymap[j].get_or_insert_with(|| {
                    ny += 1;
                    ny - 1
                });
                let cl = *mmap[j][l].get_or_insert_with(|| {
                    nm[j] += 1;
                    nm[j] - 1
                });
                let cu = *xmap[j][l][u].get_or_insert_with(|| {
                    nx[j][l] += 1;
                    nx[j][l] - 1
                });
                [cj, cl, cu]
            })
            .collect()
    }
}

/// Concentration parameters `(α_θ, α_ω, α_ψ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Concentrations {
    pub theta: f64,
    pub omega: f64,
    pub psi: f64,
}

/// One Gibbs iterate. Parameter arrays are shaped like the counts:
/// `theta[j]`, `omega[j][l]`, `psi[j][l][u]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorDraw {
    pub iteration: usize,
    pub state: ClusterState,
    pub theta: Vec<OutcomeParams<f64>>,
    pub omega: Vec<Vec<MediatorParams<f64>>>,
    pub psi: Vec<Vec<Vec<CovariateParams<f64>>>>,
    pub alpha: Concentrations,
}

impl PosteriorDraw {
    pub fn check_legal(&self) -> Result<()> {
        self.state.check_legal()?;
        let s = &self.state;
        let shaped = self.theta.len() == s.k()
            && self.omega.len() == s.k()
            && self.psi.len() == s.k()
            && (0..s.k()).all(|j| {
                self.omega[j].len() == s.k_m(j)
                    && self.psi[j].len() == s.k_m(j)
                    && (0..s.k_m(j)).all(|l| self.psi[j][l].len() == s.k_x(j, l))
            });
        if !shaped {
            return Err(Error::IllegalState("parameter arrays do not match counts".into()));
        }
        let a = self.alpha;
        if !(a.theta > 0.0 && a.omega > 0.0 && a.psi > 0.0) {
            return Err(Error::IllegalState("concentrations must be positive".into()));
        }
        Ok(())
    }

    /// Drop clusters with zero count and renumber labels in order.
    pub(crate) fn compact(&mut self) {
        let s = &mut self.state;
        let k = s.n_y.len();
        let mut ymap = vec![usize::MAX; k];
        let mut mmap: Vec<Vec<usize>> = s.n_m.iter().map(|v| vec![usize::MAX; v.len()]).collect();
        let mut xmap: Vec<Vec<Vec<usize>>> =
            s.n_x.iter().map(|v| v.iter().map(|w| vec![usize::MAX; w.len()]).collect()).collect();

        let theta = std::mem::take(&mut self.theta);
        let omega = std::mem::take(&mut self.omega);
        let psi = std::mem::take(&mut self.psi);
        let (mut n_y, mut n_m, mut n_x) = (vec![], vec![], vec![]);
        for (j, ((th, om_j), ps_j)) in theta.into_iter().zip(omega).zip(psi).enumerate() {
            if s.n_y[j] == 0 {
                continue;
            }
            ymap[j] = n_y.len();
            n_y.push(s.n_y[j]);
            self.theta.push(th);
            let (mut om_new, mut ps_new, mut nm_j, mut nx_j) = (vec![], vec![], vec![], vec![]);
            for (l, (om, ps_jl)) in om_j.into_iter().zip(ps_j).enumerate() {
                if s.n_m[j][l] == 0 {
                    continue;
                }
                mmap[j][l] = nm_j.len();
                nm_j.push(s.n_m[j][l]);
                om_new.push(om);
                let (mut ps_l, mut nx_jl) = (vec![], vec![]);
                for (u, ps) in ps_jl.into_iter().enumerate() {
                    if s.n_x[j][l][u] == 0 {
                        continue;
                    }
                    xmap[j][l][u] = nx_jl.len();
                    nx_jl.push(s.n_x[j][l][u]);
                    ps_l.push(ps);
                }
                ps_new.push(ps_l);
                nx_j.push(nx_jl);
            }
            self.omega.push(om_new);
            self.psi.push(ps_new);
            n_m.push(nm_j);
            n_x.push(nx_j);
        }
        for lab in s.labels.iter_mut() {
            let [j, l, u] = *lab;
            *lab = [ymap[j], mmap[j][l], xmap[j][l][u]];
        }
        s.n_y = n_y;
        s.n_m = n_m;
        s.n_x = n_x;
    }
}
