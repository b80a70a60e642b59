use edpmed_core::VarKind;
use edpmed_lab::scenario::bump_weight;
use edpmed_lab::{generate, Overrides, Scenario, ScenarioSpec, StructuralModel};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model(id: u8) -> Scenario {
    ScenarioSpec::canonical(id, 10, 0).model().unwrap()
}

fn mean_var(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    (m, x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0))
}

fn corr(x: &[f64], y: &[f64]) -> f64 {
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    let c = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum::<f64>() / (x.len() as f64 - 1.0);
    c / (vx * vy).sqrt()
}

// L = (1, 0, 1, 0 | 0.5, -1, 2, 0.3): L5 = 0.5, L6 = -1, L7 = 2, L8 = 0.3.
const L: [f64; 8] = [1.0, 0.0, 1.0, 0.0, 0.5, -1.0, 2.0, 0.3];

#[test]
fn treatment_rate_in_scenario_one() {
    let ds = generate(&ScenarioSpec::canonical(1, 100_000, 3)).unwrap();
    let (m, _) = mean_var(&ds.a);
    let sd = (0.4 * 0.6 / 1e5f64).sqrt();
    assert!((m - 0.4).abs() < 3.0 * sd, "mean A = {m}");
}

#[test]
fn within_component_mediator_correlation_in_scenario_three() {
    let s = model(3);
    // L5 = -1 puts all mass on the first mixture component.
    let mut l = L;
    l[4] = -1.0;
    assert!(s.mediator_mixing(&l) > 1.0 - 1e-7);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let draws: Vec<Vec<f64>> = (0..100_000).map(|_| s.draw_m(1.0, &l, &mut rng)).collect();
    let col = |q: usize| draws.iter().map(|m| m[q]).collect::<Vec<_>>();
    for (a, b) in [(0, 1), (3, 7), (8, 9)] {
        let r = corr(&col(a), &col(b));
        assert!((r - 0.45).abs() < 0.02, "corr(M{}, M{}) = {r}", a + 1, b + 1);
    }
    let (_, v) = mean_var(&col(9));
    assert!((v - 1.0).abs() < 0.03);
}

#[test]
fn scenario_six_is_all_binary() {
    let ds = generate(&ScenarioSpec::canonical(6, 500, 9)).unwrap();
    assert_eq!(ds.y_kind, VarKind::Binary);
    assert!(ds.m_kinds.iter().all(|k| *k == VarKind::Binary));
    assert!(ds.l_cont.is_empty());
    let binary = |c: &[f64]| c.iter().all(|v| *v == 0.0 || *v == 1.0);
    assert!(binary(&ds.y) && binary(&ds.a));
    assert!(ds.m.iter().all(|c| binary(c)) && ds.l_disc.iter().all(|c| binary(c)));
}

#[test]
fn scenario_one_conditional_moments() {
    let s = model(1);
    // μm1 = -4 + 2 + 0.5 - 2 + 0.15, μm2 = -4 + 0.4 - 0.5 - 1.6.
    let (m1, m2) = s.mediator_means(1.0, &L);
    assert!((m1 + 3.35).abs() < 1e-12 && (m2 + 5.7).abs() < 1e-12);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let draws: Vec<f64> = (0..200_000).map(|_| s.draw_m(1.0, &L, &mut rng)[4]).collect();
    let (mean, var) = mean_var(&draws);
    let (em, ev) = (0.4 * -3.35 + 0.6 * -5.7, 0.24 * 2.35f64.powi(2) + 1.0);
    assert!((mean - em).abs() < 3.0 * (ev / 2e5).sqrt(), "{mean} vs {em}");
    assert!((var / ev - 1.0).abs() < 0.03, "{var} vs {ev}");

    // μy1 = -4 + 2 + 0.5 - 2, μy2 = -2 + 0.4 - 0.5 - 3.2 with M_Q = -4.
    let m = [0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, -4.0];
    let (y1, y2) = s.outcome_means(1.0, &m, &L);
    assert!((y1 + 3.5).abs() < 1e-12 && (y2 + 5.3).abs() < 1e-12);
    assert!((s.mean_y(1.0, &m, &L) + 4.58).abs() < 1e-12);
    let ys: Vec<f64> = (0..200_000).map(|_| s.draw_y(1.0, &m, &L, &mut rng)).collect();
    let (mean, var) = mean_var(&ys);
    let ev = 0.24 * 1.8f64.powi(2) + 1.0;
    assert!((mean + 4.58).abs() < 3.0 * (ev / 2e5).sqrt());
    assert!((var / ev - 1.0).abs() < 0.03);
}

#[test]
fn scenario_two_conditional_means() {
    let s = model(2);
    // Mixing weight at L5 = 0.5 is exactly one half.
    assert!((bump_weight(0.5) - 0.5).abs() < 1e-15);
    assert!((s.mediator_mixing(&L) - 0.5).abs() < 1e-15);
    let (m1, m2) = s.mediator_means(1.0, &L);
    assert!((m1 + 3.35).abs() < 1e-12);
    // 4 + 0.4 + 0.5·1 − 0.8·2·1
    assert!((m2 - 3.3).abs() < 1e-12);
    let mut m = [0.0; 10];
    m[9] = 0.5;
    let (y1, y2) = s.outcome_means(1.0, &m, &L);
    // -4 + 2 + 0.25 - 1 + 0.075
    assert!((y1 + 2.675).abs() < 1e-12);
    assert!((y2 - 3.3).abs() < 1e-12);
    assert!((s.mean_y(1.0, &m, &L) - 0.3125).abs() < 1e-12);
}

#[test]
fn scenario_three_outcome_interactions() {
    let s = model(3);
    let mut m = [0.0; 10];
    m[7] = 2.0;
    m[8] = -1.0;
    m[9] = 0.5;
    let (y1, y2) = s.outcome_means(0.0, &m, &L);
    // -4 - 0.5·(-1)·0.5 - (-1)·0.5 + 0.5·2·(-1)
    assert!((y1 + 4.25).abs() < 1e-12);
    // 4 + 0.3·2·0.5 - 0.8·2
    assert!((y2 - 2.7).abs() < 1e-12);
}

#[test]
fn scenario_four_skew_normal_errors() {
    let s = model(4);
    let alpha: f64 = 4.0;
    let delta = alpha / (1.0 + alpha * alpha).sqrt();
    let mu = delta * (2.0 / std::f64::consts::PI).sqrt();
    let var = 1.0 - mu * mu;
    let skew = (4.0 - std::f64::consts::PI) / 2.0 * mu.powi(3) / var.powf(1.5);
    // M_Q = -1 selects the first outcome component.
    let mut m = [0.0; 10];
    m[9] = -1.0;
    assert!(s.outcome_mixing(&m) > 1.0 - 1e-7);
    let (y1, _) = s.outcome_means(0.0, &m, &L);
    assert!((s.mean_y(0.0, &m, &L) - (y1 + mu)).abs() < 1e-6);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let e: Vec<f64> = (0..200_000).map(|_| s.draw_y(0.0, &m, &L, &mut rng) - y1).collect();
    let (em, ev) = mean_var(&e);
    assert!((em - mu).abs() < 3.0 * (var / 2e5).sqrt(), "{em} vs {mu}");
    assert!((ev / var - 1.0).abs() < 0.03);
    let g = e.iter().map(|x| ((x - em) / ev.sqrt()).powi(3)).sum::<f64>() / e.len() as f64;
    assert!((g - skew).abs() < 0.05, "skewness {g} vs {skew}");
}

#[test]
fn scenario_five_copula_covariates() {
    let s = model(5);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ls: Vec<Vec<f64>> = (0..100_000).map(|_| s.draw_l(&mut rng)).collect();
    let col = |k: usize| ls.iter().map(|l| l[k]).collect::<Vec<_>>();
    // Thresholded at the median: corr = (2/π) asin(ρ).
    let target = 2.0 / std::f64::consts::PI * 0.6f64.asin();
    for (a, b) in [(0, 1), (1, 3)] {
        let r = corr(&col(a), &col(b));
        assert!((r - target).abs() < 0.015, "{r} vs {target}");
    }
    let (p, _) = mean_var(&col(2));
    assert!((p - 0.5).abs() < 3.0 * (0.25 / 1e5f64).sqrt());
    // Continuous block keeps its 0.3 correlation.
    assert!((corr(&col(4), &col(7)) - 0.3).abs() < 0.015);
}

#[test]
fn confounded_treatment_in_scenario_two() {
    let s = model(2);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut l = L;
    l[4..8].copy_from_slice(&[1.0, 1.0, 1.0, 1.0]);
    let p: f64 = (0..100_000).map(|_| s.draw_a(&l, &mut rng)).sum::<f64>() / 1e5;
    let expect = 1.0 / (1.0 + (-1.2f64).exp());
    assert!((p - expect).abs() < 3.0 * (expect * (1.0 - expect) / 1e5).sqrt());
}

#[test]
fn generation_is_deterministic() {
    let spec = ScenarioSpec::canonical(2, 200, 42);
    assert_eq!(generate(&spec).unwrap(), generate(&spec).unwrap());
    assert_ne!(generate(&spec).unwrap(), generate(&spec.with_seed(43)).unwrap());
}

#[test]
fn canonical_flag() {
    let spec = ScenarioSpec::canonical(1, 100, 0);
    assert!(spec.is_canonical());
    let mut custom = spec.clone();
    custom.overrides.treatment_scale = Some(0.0);
    assert!(!custom.is_canonical());
    assert!(custom.validate().is_ok());
    let mut wider = spec;
    wider.q = 3;
    assert!(!wider.is_canonical());
}

#[test]
fn unsupported_overrides_are_rejected() {
    let with = |id: u8, o: Overrides| ScenarioSpec { overrides: o, ..ScenarioSpec::canonical(id, 10, 0) }.validate();
    assert!(with(1, Overrides { skew_shape: Some(2.0), ..Default::default() }).is_err());
    assert!(with(2, Overrides { delta_m: Some(0.5), ..Default::default() }).is_err());
    assert!(with(3, Overrides { treatment_prob: Some(0.5), ..Default::default() }).is_err());
    assert!(with(6, Overrides { covariate_corr: Some(0.1), ..Default::default() }).is_err());
    assert!(with(1, Overrides { delta_m: Some(1.5), ..Default::default() }).is_err());
    assert!(with(3, Overrides { mediator_corr: Some(-0.5), ..Default::default() }).is_err());
    assert!(with(4, Overrides { skew_shape: Some(0.0), ..Default::default() }).is_ok());
    assert!(ScenarioSpec::canonical(7, 10, 0).validate().is_err());
    assert!(ScenarioSpec { p2: 4, ..ScenarioSpec::canonical(6, 10, 0) }.validate().is_err());
    assert!(ScenarioSpec { p2: 2, ..ScenarioSpec::canonical(1, 10, 0) }.validate().is_err());
    assert!(generate(&ScenarioSpec { n: 0, ..ScenarioSpec::canonical(1, 10, 0) }).is_err());
}

#[test]
fn spec_serialization_rejects_unknown_keys() {
    let spec = ScenarioSpec::canonical(3, 50, 1);
    let json = serde_json::to_string(&spec).unwrap();
    assert_eq!(serde_json::from_str::<ScenarioSpec>(&json).unwrap(), spec);
    let bad = json.replacen("\"n\"", "\"size\"", 1);
    assert!(serde_json::from_str::<ScenarioSpec>(&bad).is_err());
    let bad = r#"{"scenario":1,"n":5,"p1":4,"p2":4,"q":10,"seed":0,"overrides":{"gamma":1}}"#;
    assert!(serde_json::from_str::<ScenarioSpec>(bad).is_err());
}
