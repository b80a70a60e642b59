use edpmed_core::{Dataset, Effect, VarKind};
use edpmed_lab::lsem::ols;
use edpmed_lab::{generate, lsem_fit, lsem_paths, ScenarioSpec};
use nalgebra::{DMatrix, DVector};

/// Exactly linear data. The mediator's exogenous part is projected off
/// `(1, A, L)` so both regressions have zero residual.
fn noiseless(n: usize) -> (Dataset, [f64; 2], [f64; 2], f64) {
    let a: Vec<f64> = (0..n).map(|i| ((i * 7) % 3 == 0) as u8 as f64).collect();
    let l1: Vec<f64> = (0..n).map(|i| ((i * 5) % 2) as f64).collect();
    let l2: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
    let x = DMatrix::from_fn(n, 4, |i, k| [1.0, a[i], l1[i], l2[i]][k]);
    let resid = |f: &dyn Fn(usize) -> f64| {
        let u = DVector::from_fn(n, |i, _| f(i));
        let b = ols(&x, &u).unwrap();
        (&u - &x * b).as_slice().to_vec()
    };
    let u1 = resid(&|i| (i as f64 * 1.3).cos());
    let u2 = resid(&|i| ((i * i) % 11) as f64 / 11.0);
    let (alpha, beta, direct) = ([1.5, -0.4], [2.0, 0.7], 0.8);
    let m1: Vec<f64> = (0..n).map(|i| 0.3 + alpha[0] * a[i] + 0.2 * l1[i] - l2[i] + u1[i]).collect();
    let m2: Vec<f64> = (0..n).map(|i| -1.0 + alpha[1] * a[i] + 0.5 * l2[i] + u2[i]).collect();
    let y: Vec<f64> =
        (0..n).map(|i| 1.0 + direct * a[i] + beta[0] * m1[i] + beta[1] * m2[i] - 0.6 * l1[i] + 0.1 * l2[i]).collect();
    let ds =
        Dataset::new(y, VarKind::Continuous, vec![m1, m2], vec![VarKind::Continuous; 2], a, vec![l1], vec![l2], None)
            .unwrap();
    (ds, alpha, beta, direct)
}

#[test]
fn noiseless_linear_data_recovered() {
    let (ds, alpha, beta, direct) = noiseless(60);
    let p = lsem_paths(&ds).unwrap();
    assert!((p.direct - direct).abs() < 1e-10);
    for q in 0..2 {
        assert!((p.alpha[q] - alpha[q]).abs() < 1e-10, "{:?}", p.alpha);
        assert!((p.beta[q] - beta[q]).abs() < 1e-10, "{:?}", p.beta);
    }
    let est = lsem_fit(&ds, &Effect::standard(2), 50, 1).unwrap();
    let jnie = alpha[0] * beta[0] + alpha[1] * beta[1];
    assert!((est[0].mean - (direct + jnie)).abs() < 1e-10);
    // The outcome equation is exact in every resample, so the direct
    // effect's interval collapses.
    assert!(est[1].width() < 1e-8, "{:?}", est[1]);
}

#[test]
fn joint_indirect_effect_is_additive() {
    let ds = generate(&ScenarioSpec::canonical(3, 300, 5)).unwrap();
    let mut effects = Effect::standard(10);
    effects.push(Effect::Pnie((0..10).collect()));
    let est = lsem_fit(&ds, &effects, 30, 2).unwrap();
    let sum: f64 = est[3..13].iter().map(|e| e.mean).sum();
    assert_eq!(est[2].mean, sum);
    assert_eq!(est[13].mean, est[2].mean);
    assert_eq!(est[0].mean, est[1].mean + est[2].mean);
}

#[test]
fn scenario_one_lsem_matches_published_row() {
    let ds = generate(&ScenarioSpec::canonical(1, 1000, 17)).unwrap();
    let est = lsem_fit(&ds, &[Effect::Nde], 300, 3).unwrap();
    let nde = &est[0];
    assert!((nde.mean - 1.04).abs() < 0.2, "{nde:?}");
    // Published interval width is 0.38.
    assert!(nde.width() > 0.25 && nde.width() < 0.55, "width {}", nde.width());
    assert!(nde.lower < nde.mean && nde.mean < nde.upper);
}

#[test]
fn scenario_two_lsem_is_biased() {
    // Average over a few datasets to steady the comparison.
    let mut total = 0.0;
    for seed in 0..5 {
        let ds = generate(&ScenarioSpec::canonical(2, 1000, 100 + seed)).unwrap();
        total += lsem_paths(&ds).unwrap().direct;
    }
    let nde = total / 5.0;
    // Truth is 1.50; the linear fit lands well below it.
    assert!(nde < 1.35 && nde > 0.8, "LSEM NDE {nde}");
}

#[test]
fn unusable_inputs_are_rejected() {
    let (ds, ..) = noiseless(40);
    let mut dup = ds.clone();
    dup.m[1] = dup.m[0].clone();
    assert!(lsem_paths(&dup).is_err());
    assert!(lsem_fit(&dup, &[Effect::Nde], 10, 0).is_err());
    assert!(lsem_fit(&ds, &[Effect::Nde], 1, 0).is_err());
    assert!(lsem_fit(&ds, &[Effect::Inie(2)], 10, 0).is_err());
    let contrast: Effect = "Y(1,10)-Y(0,00)".parse().unwrap();
    assert!(lsem_fit(&ds, &[contrast], 10, 0).is_err());
    let binary = generate(&ScenarioSpec::canonical(6, 200, 1)).unwrap();
    assert!(lsem_paths(&binary).is_err());
}

#[test]
fn bootstrap_is_seeded() {
    let ds = generate(&ScenarioSpec::canonical(1, 200, 3)).unwrap();
    let a = lsem_fit(&ds, &Effect::standard(10), 40, 9).unwrap();
    let b = lsem_fit(&ds, &Effect::standard(10), 40, 9).unwrap();
    assert_eq!(a, b);
}
