//! Self-contained property checks for the urn, runnable outside the test
//! harness. Exact checks use big rationals; moment checks simulate.

use num_rational::{BigRational, Ratio};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::*;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UrnCheck {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl UrnCheck {
    fn new(name: &str, passed: bool, detail: String) -> Self {
        UrnCheck { name: name.into(), passed, detail }
    }
}

/// Sequences per simulated moment check.
pub const DEFAULT_SEQUENCES: usize = 100_000;

fn q(n: i64, d: i64) -> BigRational {
    Ratio::new(n.into(), d.into())
}

fn exact_params() -> UrnParams<BigRational> {
    UrnParams {
        alpha: vec![q(1, 2), q(2, 1)],
        mu: vec![vec![q(1, 1), q(1, 3)], vec![q(3, 2), q(1, 1)]],
        gamma: vec![
            vec![vec![q(1, 1), q(2, 1)], vec![q(1, 4), q(1, 1)]],
            vec![vec![q(5, 3), q(1, 1)], vec![q(1, 1), q(1, 2)]],
        ],
    }
}

fn permutations(items: &[Obs]) -> Vec<Vec<Obs>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = vec![];
    for k in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(k);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Every ordering of several length-4 histories has the same joint
/// probability, by the product form and by sequential prediction.
pub fn check_exchangeability() -> Result<UrnCheck> {
    let params = exact_params();
    let histories: [[Obs; 4]; 3] = [
        [(0, 1, 0), (1, 0, 1), (0, 1, 0), (1, 1, 0)],
        [(0, 0, 0), (0, 0, 1), (0, 1, 1), (1, 1, 1)],
        [(1, 0, 0), (1, 0, 0), (1, 0, 0), (0, 1, 1)],
    ];
    let mut compared = 0;
    for h in &histories {
        let base = joint_probability(&params, h)?;
        for p in permutations(h) {
            compared += 1;
            if joint_probability(&params, &p)? != base || sequential_probability(&params, &p)? != base {
                return Ok(UrnCheck::new("exchangeability", false, format!("ordering {p:?} differs")));
            }
        }
    }
    Ok(UrnCheck::new("exchangeability", true, format!("{compared} orderings agree exactly")))
}

/// Posterior parameters predict exactly what the urn predicts after the
/// same history, and predictives sum to one.
pub fn check_posterior_consistency() -> Result<UrnCheck> {
    let params = exact_params();
    let histories: Vec<Vec<Obs>> = vec![
        vec![],
        vec![(1, 1, 1)],
        vec![(0, 1, 0), (0, 1, 1), (1, 0, 0)],
        vec![(0, 0, 0), (1, 1, 0), (1, 1, 0), (0, 0, 1), (1, 0, 1)],
    ];
    for h in &histories {
        let direct = urn_predictive(&params, h)?;
        let via_posterior = urn_predictive(&posterior_edp3(&params, h)?, &[])?;
        if direct != via_posterior || direct.total() != q(1, 1) {
            return Ok(UrnCheck::new("posterior-consistency", false, format!("history {h:?}")));
        }
    }
    Ok(UrnCheck::new("posterior-consistency", true, format!("{} histories agree exactly", histories.len())))
}

/// Mean and second moment of one level from indicator pairs.
struct Tally {
    n: usize,
    first: usize,
    both: usize,
}

impl Tally {
    fn z_scores(&self, m: &LevelMoments<f64>) -> (f64, f64) {
        let n = self.n as f64;
        let second = m.variance + m.mean * m.mean;
        let z = |hits: usize, p: f64| (hits as f64 / n - p) / (p * (1.0 - p) / n).sqrt().max(1e-300);
        (z(self.first, m.mean), z(self.both, second))
    }
}

/// Random-measure moments at every level. By exchangeability the first
/// draw lands in a set with probability `E[P(A)]` and the first two both
/// do with probability `E[P(A)²]`; conditioning on the parents selects
/// the lower levels.
pub fn check_moments(sequences: usize, seed: u64) -> Result<UrnCheck> {
    let params = UrnParams::new(
        vec![1.0, 2.0],
        vec![vec![1.5, 0.5], vec![1.0, 1.0]],
        vec![vec![vec![1.0, 2.0], vec![0.5, 0.5]], vec![vec![1.0, 1.0], vec![3.0, 1.0]]],
    )?;
    let (a, b, c) = ([1usize], [0usize], [1usize]);
    let mom = edp3_moments(&params, &a, &b, &c)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tx = Tally { n: sequences, first: 0, both: 0 };
    let mut tm = Tally { n: 0, first: 0, both: 0 };
    let mut ty = Tally { n: 0, first: 0, both: 0 };
    let mut joint = 0usize;
    for _ in 0..sequences {
        let s = simulate_sequence(&params, 2, &mut rng)?;
        let (x0, x1) = (a.contains(&s[0].0), a.contains(&s[1].0));
        tx.first += x0 as usize;
        tx.both += (x0 && x1) as usize;
        joint += (x0 && b.contains(&s[0].1) && c.contains(&s[0].2)) as usize;
        // M level below X colour 0; Y level below (0, 1).
        if s[0].0 == 0 && s[1].0 == 0 {
            let (m0, m1) = (b.contains(&s[0].1), b.contains(&s[1].1));
            tm.n += 1;
            tm.first += m0 as usize;
            tm.both += (m0 && m1) as usize;
            if s[0].1 == 1 && s[1].1 == 1 {
                let (y0, y1) = (c.contains(&s[0].2), c.contains(&s[1].2));
                ty.n += 1;
                ty.first += y0 as usize;
                ty.both += (y0 && y1) as usize;
            }
        }
    }
    let mut z = vec![];
    let (z1, z2) = tx.z_scores(&mom.x);
    z.extend([("x mean", z1), ("x second moment", z2)]);
    let (z1, z2) = tm.z_scores(&mom.m_given_x[0]);
    z.extend([("m|x mean", z1), ("m|x second moment", z2)]);
    let (z1, z2) = ty.z_scores(&mom.y_given_mx[0][1]);
    z.extend([("y|m,x mean", z1), ("y|m,x second moment", z2)]);
    let n = sequences as f64;
    let p = mom.joint_mean;
    z.push(("joint mean", (joint as f64 / n - p) / (p * (1.0 - p) / n).sqrt()));
    let worst = z.iter().map(|(_, v)| v.abs()).fold(0.0, f64::max);
    let detail = z.iter().map(|(k, v)| format!("{k}: z={v:.2}")).collect::<Vec<_>>().join("; ");
    Ok(UrnCheck::new("moments", worst < 3.0, detail))
}

/// Run all checks.
pub fn run_suite(sequences: usize, seed: u64) -> Result<Vec<UrnCheck>> {
    Ok(vec![check_exchangeability()?, check_posterior_consistency()?, check_moments(sequences, seed)?])
}
