//! Replication harness: generate, fit, score against the truth.

use std::io::Write;

use edpmed_core::model::PriorSettings;
use edpmed_core::sampler::{DEFAULT_AUX, DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_THIN};
use edpmed_core::{
    causal_effects, run_chain, Dataset, Effect, EffectEstimate, Error, GcompConfig, Hyperparams, Result, SamplerConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::lsem::lsem_fit;
use crate::scenario::{generate, ScenarioSpec};
use crate::truth::TruthRecord;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BnpSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub aux: usize,
    /// Monte Carlo size per posterior draw in the g-computation.
    pub mc_size: usize,
    pub prior: PriorSettings,
}

impl Default for BnpSettings {
    fn default() -> Self {
        BnpSettings {
            iterations: DEFAULT_ITERATIONS,
            burn_in: DEFAULT_BURN_IN,
            thin: DEFAULT_THIN,
            aux: DEFAULT_AUX,
            mc_size: edpmed_core::gcomp::DEFAULT_MC_SIZE,
            prior: PriorSettings::default(),
        }
    }
}

impl BnpSettings {
    pub fn sampler_config(&self, ds: &Dataset, seed: u64) -> Result<SamplerConfig> {
        let hyper = Hyperparams::from_data(ds, &self.prior)?;
        let mut c = SamplerConfig::new(hyper);
        c.iterations = self.iterations;
        c.burn_in = self.burn_in;
        c.thin = self.thin;
        c.aux = self.aux;
        c.seed = seed;
        Ok(c)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Method {
    Bnp(BnpSettings),
    Lsem { bootstrap: usize },
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Bnp(_) => "bnp",
            Method::Lsem { .. } => "lsem",
        }
    }

    pub fn fit(&self, ds: &Dataset, effects: &[Effect], seed: u64) -> Result<Vec<EffectEstimate>> {
        match self {
            Method::Bnp(s) => fit_bnp(ds, s, effects, seed),
            Method::Lsem { bootstrap } => lsem_fit(ds, effects, *bootstrap, seed),
        }
    }
}

/// Chain then g-computation; the chain and the Monte Carlo use separate
/// seeds derived from `seed`.
pub fn fit_bnp(ds: &Dataset, settings: &BnpSettings, effects: &[Effect], seed: u64) -> Result<Vec<EffectEstimate>> {
    let config = settings.sampler_config(ds, seed)?;
    let draws = run_chain(ds, &config)?;
    if draws.is_empty() {
        return Err(Error::InvalidConfig("the chain kept no draws".into()));
    }
    let hyper = config.hyper;
    causal_effects(&draws, &hyper, effects, &GcompConfig { t: settings.mc_size, seed: seed ^ 0x9e37_79b9_7f4a_7c15 })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Scored {
    pub effect: String,
    pub truth: f64,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Scored {
    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covered(&self) -> bool {
        self.lower <= self.truth && self.truth <= self.upper
    }
}

/// One replicate: its seeds and either scored estimates or the failure.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RepResult {
    pub rep: usize,
    pub data_seed: u64,
    pub fit_seed: u64,
    pub outcome: std::result::Result<Vec<Scored>, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Aggregate {
    pub effect: String,
    pub truth: f64,
    /// Replicates that finished.
    pub reps: usize,
    pub failed: usize,
    pub mean_estimate: f64,
    pub bias: f64,
    pub mean_width: f64,
    pub coverage: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicationTable {
    pub scenario: u8,
    pub method: String,
    pub effects: Vec<String>,
    pub rows: Vec<RepResult>,
    pub aggregate: Vec<Aggregate>,
}

/// Per-replicate seeds: stream `rep` of the master generator.
pub fn rep_seeds(seed: u64, rep: usize) -> (u64, u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(rep as u64);
    (rng.random(), rng.random())
}

/// Run `method` on `reps` independent datasets from `spec`. Replicates run
/// in parallel; failures are kept per replicate.
pub fn replicate(
    spec: &ScenarioSpec,
    method: &Method,
    effects: &[Effect],
    truths: &TruthRecord,
    reps: usize,
    seed: u64,
) -> Result<ReplicationTable> {
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be at least 1".into()));
    }
    spec.validate()?;
    let truth: Vec<f64> = effects
        .iter()
        .map(|e| {
            e.validate(spec.q)?;
            truths.value(e).ok_or_else(|| Error::InvalidEffect(format!("no truth for {}", e.name())))
        })
        .collect::<Result<_>>()?;
    let rows: Vec<RepResult> = (0..reps)
        .into_par_iter()
        .map(|rep| {
            let (data_seed, fit_seed) = rep_seeds(seed, rep);
            let outcome = generate(&spec.with_seed(data_seed))
                .and_then(|ds| method.fit(&ds, effects, fit_seed))
                .map(|est| {
                    est.into_iter()
                        .zip(&truth)
                        .map(|(e, &t)| Scored {
                            effect: e.name,
                            truth: t,
                            estimate: e.mean,
                            lower: e.lower,
                            upper: e.upper,
                        })
                        .collect()
                })
                .map_err(|e| e.to_string());
            RepResult { rep, data_seed, fit_seed, outcome }
        })
        .collect();
    let aggregate = aggregate(effects, &truth, &rows);
    Ok(ReplicationTable {
        scenario: spec.scenario,
        method: method.name().into(),
        effects: effects.iter().map(Effect::name).collect(),
        rows,
        aggregate,
    })
}

fn aggregate(effects: &[Effect], truth: &[f64], rows: &[RepResult]) -> Vec<Aggregate> {
    let ok: Vec<&Vec<Scored>> = rows.iter().filter_map(|r| r.outcome.as_ref().ok()).collect();
    let n = ok.len();
    effects
        .iter()
        .enumerate()
        .map(|(k, e)| {
            let avg = |f: &dyn Fn(&Scored) -> f64| {
                if n == 0 {
                    f64::NAN
                } else {
                    ok.iter().map(|s| f(&s[k])).sum::<f64>() / n as f64
                }
            };
            let mean_estimate = avg(&|s| s.estimate);
            Aggregate {
                effect: e.name(),
                truth: truth[k],
                reps: n,
                failed: rows.len() - n,
                mean_estimate,
                bias: mean_estimate - truth[k],
                mean_width: avg(&|s| s.width()),
                coverage: avg(&|s| if s.covered() { 1.0 } else { 0.0 }),
            }
        })
        .collect()
}

impl ReplicationTable {
    /// Wide CSV, one row per replicate.
    pub fn write_raw_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["rep".to_string(), "data_seed".into(), "fit_seed".into(), "status".into()];
        for e in &self.effects {
            for col in ["truth", "estimate", "lower", "upper", "width", "covered", "error"] {
                header.push(format!("{e}_{col}"));
            }
        }
        w.write_record(&header).map_err(csv_err)?;
        for r in &self.rows {
            let mut rec = vec![r.rep.to_string(), r.data_seed.to_string(), r.fit_seed.to_string()];
            match &r.outcome {
                Ok(scored) => {
                    rec.push("ok".into());
                    for s in scored {
                        rec.extend([
                            fmt(s.truth),
                            fmt(s.estimate),
                            fmt(s.lower),
                            fmt(s.upper),
                            fmt(s.width()),
                            (s.covered() as u8).to_string(),
                            fmt(s.estimate - s.truth),
                        ]);
                    }
                }
                Err(msg) => {
                    rec.push(format!("failed: {msg}"));
                    rec.extend(std::iter::repeat_n(String::new(), 7 * self.effects.len()));
                }
            }
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Wide CSV with a single row of per-effect summaries.
    pub fn write_aggregate_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["scenario".to_string(), "method".into(), "reps".into(), "failed".into()];
        let mut rec = vec![self.scenario.to_string(), self.method.clone()];
        let (ok, failed) = self.aggregate.first().map_or((0, 0), |a| (a.reps, a.failed));
        rec.extend([ok.to_string(), failed.to_string()]);
        for a in &self.aggregate {
            for col in ["truth", "estimate", "bias", "width", "coverage"] {
                header.push(format!("{}_{col}", a.effect));
            }
            rec.extend([fmt(a.truth), fmt(a.mean_estimate), fmt(a.bias), fmt(a.mean_width), fmt(a.coverage)]);
        }
        w.write_record(&header).map_err(csv_err)?;
        w.write_record(&rec).map_err(csv_err)?;
        w.flush()?;
        Ok(())
    }

    pub fn get(&self, effect: &Effect) -> Option<&Aggregate> {
        let name = effect.name();
        self.aggregate.iter().find(|a| a.effect == name)
    }
}

/// Shortest representation that round-trips.
fn fmt(v: f64) -> String {
    format!("{v:?}")
}

fn csv_err(e: csv::Error) -> Error {
    Error::Io(e.to_string())
}
