//! Command execution and report artifacts.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use edpmed_core::sampler::drawlog::{DrawLogHeader, DrawLogReader, DrawLogWriter};
use edpmed_core::urn::suite::{run_suite, UrnCheck};
use edpmed_core::{causal_effects, Chain, Effect, GcompConfig, Hyperparams, SamplerConfig};
use edpmed_lab::{
    flag_disagreements, generate, paper_truths, replicate, truth_oracle, BnpSettings, Disagreement, Method, TruthRecord,
};
use serde::Serialize;

use crate::config::{Command, MethodKind, RunConfig, TruthChoice};
use crate::error::{CliError, CliResult, ErrorKind};
use crate::io::{dataset_to_csv, load_csv, read_bytes, sha256_hex, Schema};

/// Digest of one input file.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InputDigest {
    pub role: String,
    pub file: String,
    pub sha256: String,
}

/// Where a report came from. Holds no timestamps, so identical runs give
/// identical bytes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    /// SHA-256 of the canonical config JSON and the input digests.
    pub config_hash: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    /// Config-file keys that a flag overrode.
    pub overrides: Vec<String>,
    /// The resolved config, minus paths and thread count.
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Legality {
    pub checked: usize,
    pub passed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChainDiagnostics {
    pub draws: usize,
    pub legality: Legality,
    pub mean_y_clusters: f64,
    pub mean_m_clusters: f64,
    pub mean_x_clusters: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitReport {
    pub provenance: Provenance,
    pub draw_log: String,
    pub diagnostics: ChainDiagnostics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectRow {
    pub name: String,
    pub mean: f64,
    pub lower: f64,
    pub upper: f64,
    pub mc_se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EffectsReport {
    pub provenance: Provenance,
    pub diagnostics: ChainDiagnostics,
    pub mc_size: usize,
    pub effects: Vec<EffectRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TruthReport {
    pub provenance: Provenance,
    pub oracle: TruthRecord,
    /// Published values, for canonical specs only.
    pub published: Option<TruthRecord>,
    pub disagreements: Vec<Disagreement>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplicateReport {
    pub provenance: Provenance,
    pub truth: TruthRecord,
    pub table: edpmed_lab::ReplicationTable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UrnReport {
    pub provenance: Provenance,
    pub passed: bool,
    pub checks: Vec<UrnCheck>,
}

/// Printed on stdout after a successful run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Summary {
    pub command: String,
    pub config_hash: String,
    pub artifacts: Vec<PathBuf>,
}

const ORACLE_SEED_TWEAK: u64 = 0x7472_7574_6800_0000;

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |s| s.to_string_lossy().into_owned())
}

fn digest(role: &str, path: &Path) -> CliResult<InputDigest> {
    Ok(InputDigest { role: role.into(), file: file_name(path), sha256: sha256_hex(&read_bytes(path)?) })
}

impl RunConfig {
    /// The config as hashed and echoed: no output path, no thread count,
    /// input files represented by their digests.
    pub fn hash_view(&self) -> RunConfig {
        RunConfig { workers: 0, output: PathBuf::new(), input: None, draws: None, overrides: vec![], ..self.clone() }
    }
}

pub fn provenance(cfg: &RunConfig) -> CliResult<Provenance> {
    let mut inputs = vec![];
    if let Some(p) = &cfg.input {
        inputs.push(digest("data", p)?);
    }
    if let Some(p) = &cfg.draws {
        inputs.push(digest("draws", p)?);
    }
    let view = cfg.hash_view();
    let canon = serde_json::to_vec(&(&view, &inputs)).expect("config serializes");
    Ok(Provenance {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cfg.command.name().into(),
        config_hash: sha256_hex(&canon),
        seed: cfg.seed,
        inputs,
        overrides: cfg.overrides.clone(),
        config: view,
    })
}

struct Out<'a> {
    dir: &'a Path,
    hash: String,
    written: Vec<PathBuf>,
}

impl Out<'_> {
    fn path(&self, stem: &str, ext: &str) -> PathBuf {
        self.dir.join(format!("{stem}-{}.{ext}", &self.hash[..12]))
    }

    fn write(&mut self, stem: &str, ext: &str, bytes: &[u8]) -> CliResult<PathBuf> {
        let p = self.path(stem, ext);
        std::fs::write(&p, bytes).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", p.display())))?;
        self.written.push(p.clone());
        Ok(p)
    }

    fn json<T: Serialize>(&mut self, stem: &str, value: &T) -> CliResult<PathBuf> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("report serializes");
        bytes.push(b'\n');
        self.write(stem, "json", &bytes)
    }
}

fn pool(workers: usize) -> CliResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::runtime(format!("cannot start worker threads: {e}")))
}

fn diagnostics<'a>(draws: impl Iterator<Item = &'a edpmed_core::PosteriorDraw>) -> ChainDiagnostics {
    let (mut n, mut ok, mut ky, mut km, mut kx) = (0, 0, 0.0, 0.0, 0.0);
    for d in draws {
        n += 1;
        ok += d.check_legal().is_ok() as usize;
        let s = &d.state;
        ky += s.k() as f64;
        km += (0..s.k()).map(|j| s.k_m(j)).sum::<usize>() as f64;
        kx += (0..s.k()).flat_map(|j| (0..s.k_m(j)).map(move |l| s.k_x(j, l))).sum::<usize>() as f64;
    }
    let avg = |v: f64| if n == 0 { 0.0 } else { v / n as f64 };
    ChainDiagnostics {
        draws: n,
        legality: Legality { checked: n, passed: ok },
        mean_y_clusters: avg(ky),
        mean_m_clusters: avg(km),
        mean_x_clusters: avg(kx),
    }
}

fn fit(cfg: &RunConfig, prov: Provenance, out: &mut Out) -> CliResult<()> {
    let input = cfg.input.as_ref().expect("resolved");
    let schema: &Schema = cfg.schema.as_ref().expect("resolved");
    let ds = load_csv(input, schema)?;
    let hyper = Hyperparams::from_data(&ds, &cfg.prior)?;
    let mut sc = SamplerConfig::new(hyper);
    sc.iterations = cfg.sampler.iterations;
    sc.burn_in = cfg.sampler.burn_in;
    sc.thin = cfg.sampler.thin;
    sc.aux = cfg.sampler.aux;
    sc.seed = cfg.seed;
    let header = DrawLogHeader { layout: ds.layout(), config: sc.clone() };
    let log_path = out.path("draws", "edpm");
    let file =
        File::create(&log_path).map_err(|e| CliError::runtime(format!("cannot write {}: {e}", log_path.display())))?;
    let mut writer = DrawLogWriter::new(BufWriter::new(file), &header)?;
    let mut kept = vec![];
    let mut legal = 0;
    for draw in Chain::new(&ds, sc)? {
        writer.write_draw(&draw)?;
        legal += draw.check_legal().is_ok() as usize;
        // Keep the summary only; draws can be large.
        kept.push(edpmed_core::PosteriorDraw { theta: vec![], omega: vec![], psi: vec![], ..draw });
    }
    writer.finish()?;
    out.written.push(log_path.clone());
    let mut diag = diagnostics(kept.iter());
    diag.legality.passed = legal;
    out.json("fit", &FitReport { provenance: prov, draw_log: file_name(&log_path), diagnostics: diag })?;
    Ok(())
}

fn effects(cfg: &RunConfig, prov: Provenance, out: &mut Out) -> CliResult<()> {
    let path = cfg.draws.as_ref().expect("resolved");
    let file = File::open(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))?;
    let (header, draws) = DrawLogReader::new(BufReader::new(file))?.read_all()?;
    if draws.is_empty() {
        return Err(CliError::input(format!("{} holds no draws", path.display())));
    }
    let diag = diagnostics(draws.iter());
    if diag.legality.passed != diag.legality.checked {
        return Err(CliError::input(format!(
            "{} of {} draws fail the state legality checks",
            diag.legality.checked - diag.legality.passed,
            diag.legality.checked
        )));
    }
    let q = header.layout.m_kinds.len();
    let list = cfg.effects.clone().unwrap_or_else(|| Effect::standard(q));
    let gc = GcompConfig { t: cfg.mc_size, seed: cfg.seed };
    let est = pool(cfg.workers)?.install(|| causal_effects(&draws, &header.config.hyper, &list, &gc))?;
    let rows: Vec<EffectRow> = est
        .into_iter()
        .map(|e| EffectRow { name: e.name, mean: e.mean, lower: e.lower, upper: e.upper, mc_se: e.mc_se })
        .collect();
    if let Some(r) = rows.iter().find(|r| ![r.mean, r.lower, r.upper, r.mc_se].iter().all(|v| v.is_finite())) {
        return Err(CliError::runtime(format!("non-finite estimate for {}", r.name)));
    }
    let mut w = csv::Writer::from_writer(vec![]);
    w.write_record(["effect", "mean", "lower", "upper", "mc_se"]).expect("in-memory write");
    for r in &rows {
        w.write_record([
            r.name.clone(),
            r.mean.to_string(),
            r.lower.to_string(),
            r.upper.to_string(),
            r.mc_se.to_string(),
        ])
        .expect("in-memory write");
    }
    out.write("effects", "csv", &w.into_inner().expect("in-memory flush"))?;
    out.json("effects", &EffectsReport { provenance: prov, diagnostics: diag, mc_size: cfg.mc_size, effects: rows })?;
    Ok(())
}

fn oracle(cfg: &RunConfig, effects: &[Effect]) -> CliResult<TruthRecord> {
    let spec = cfg.scenario.as_ref().expect("resolved");
    pool(cfg.workers)?
        .install(|| truth_oracle(spec, effects, cfg.truth_reps, cfg.seed ^ ORACLE_SEED_TWEAK))
        .map_err(CliError::from)
}

fn simulate(cfg: &RunConfig, prov: Provenance, out: &mut Out) -> CliResult<()> {
    let spec = cfg.scenario.as_ref().expect("resolved");
    let ds = generate(spec)?;
    out.write("data", "csv", &dataset_to_csv(&ds))?;
    out.write("schema", "toml", Schema::for_dataset(&ds).to_toml().as_bytes())?;
    let list = cfg.effects.clone().unwrap_or_else(|| Effect::standard(spec.q));
    let truth = oracle(cfg, &list)?;
    let published = if spec.is_canonical() { paper_truths(spec.scenario) } else { None };
    let disagreements = published.as_ref().map_or(vec![], |p| flag_disagreements(&truth, p, 3.0, 0.005));
    out.json("truth", &TruthReport { provenance: prov, oracle: truth, published, disagreements })?;
    Ok(())
}

fn run_replicate(cfg: &RunConfig, prov: Provenance, out: &mut Out) -> CliResult<()> {
    let spec = cfg.scenario.as_ref().expect("resolved");
    let rs = cfg.replicate.expect("resolved");
    let list = cfg.effects.clone().unwrap_or_else(|| vec![Effect::Te, Effect::Nde, Effect::Jnie]);
    let truth = match rs.truth {
        TruthChoice::Oracle => oracle(cfg, &list)?,
        TruthChoice::Paper => {
            if !spec.is_canonical() {
                return Err(CliError::config("published truths apply to canonical scenario specs only"));
            }
            paper_truths(spec.scenario).expect("canonical scenario")
        }
    };
    let method = match rs.method {
        MethodKind::Bnp => Method::Bnp(BnpSettings {
            iterations: cfg.sampler.iterations,
            burn_in: cfg.sampler.burn_in,
            thin: cfg.sampler.thin,
            aux: cfg.sampler.aux,
            mc_size: cfg.mc_size,
            prior: cfg.prior.clone(),
        }),
        MethodKind::Lsem => Method::Lsem { bootstrap: rs.bootstrap },
    };
    let table = pool(cfg.workers)?.install(|| replicate(spec, &method, &list, &truth, rs.reps, cfg.seed))?;
    let mut raw = vec![];
    table.write_raw_csv(&mut raw)?;
    out.write("replicate-raw", "csv", &raw)?;
    let mut agg = vec![];
    table.write_aggregate_csv(&mut agg)?;
    out.write("replicate-aggregate", "csv", &agg)?;
    out.json("replicate", &ReplicateReport { provenance: prov, truth, table })?;
    Ok(())
}

fn validate_urn(cfg: &RunConfig, prov: Provenance, out: &mut Out) -> CliResult<()> {
    let checks = run_suite(cfg.urn_sequences, cfg.seed)?;
    let passed = checks.iter().all(|c| c.passed);
    let failed: Vec<String> = checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    out.json("urn", &UrnReport { provenance: prov, passed, checks })?;
    if passed {
        Ok(())
    } else {
        Err(CliError { kind: ErrorKind::CheckFailed, message: format!("urn checks failed: {}", failed.join(", ")) })
    }
}

/// Run a resolved command. On a failed urn check the report is still
/// written before the error is returned.
pub fn run(cfg: &RunConfig) -> CliResult<Summary> {
    let prov = provenance(cfg)?;
    std::fs::create_dir_all(&cfg.output)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", cfg.output.display())))?;
    let mut out = Out { dir: &cfg.output, hash: prov.config_hash.clone(), written: vec![] };
    let hash = prov.config_hash.clone();
    match cfg.command {
        Command::Fit => fit(cfg, prov, &mut out),
        Command::Effects => effects(cfg, prov, &mut out),
        Command::Simulate => simulate(cfg, prov, &mut out),
        Command::Replicate => run_replicate(cfg, prov, &mut out),
        Command::ValidateUrn => validate_urn(cfg, prov, &mut out),
    }?;
    Ok(Summary { command: cfg.command.name().into(), config_hash: hash, artifacts: out.written })
}
