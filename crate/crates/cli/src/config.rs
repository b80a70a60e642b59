//! Command-line flags, the TOML config file, and their merge into one
//! resolved [`RunConfig`]. Flags win over file values.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use edpmed_core::model::PriorSettings;
use edpmed_core::sampler::{DEFAULT_AUX, DEFAULT_BURN_IN, DEFAULT_ITERATIONS, DEFAULT_THIN};
use edpmed_core::Effect;
use edpmed_lab::truth::MIN_ORACLE_REPS;
use edpmed_lab::{Overrides, ScenarioSpec};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};
use crate::io::Schema;

pub const WORKERS_ENV: &str = "EDPMED_WORKERS";
pub const DEFAULT_REPS: usize = 20;
pub const DEFAULT_BOOTSTRAP: usize = 200;
pub const DEFAULT_URN_SEQUENCES: usize = edpmed_core::urn::suite::DEFAULT_SEQUENCES;

#[derive(Debug, Parser)]
#[command(name = "edpmed", version, about = "Causal mediation with enriched Dirichlet process mixtures")]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory (created if absent).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Threads for g-computation and replications.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Print the resolved config as JSON and exit.
    #[arg(long)]
    pub dry_run: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct SamplerArgs {
    #[arg(long)]
    pub iterations: Option<usize>,
    #[arg(long)]
    pub burn_in: Option<usize>,
    #[arg(long)]
    pub thin: Option<usize>,
    /// Auxiliary clusters per level.
    #[arg(long)]
    pub aux: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Scenario 1 to 6.
    #[arg(long)]
    pub scenario: Option<u8>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p1: Option<usize>,
    #[arg(long)]
    pub p2: Option<usize>,
    #[arg(long)]
    pub q: Option<usize>,
    /// Monte Carlo replicates for the ground-truth oracle.
    #[arg(long)]
    pub truth_reps: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct EffectArgs {
    /// Effect to report; repeatable. `TE`, `NDE`, `JNIE`, `INIE_3`,
    /// `PNIE_9_10` or `Y(1,101)-Y(0,000)`. Default: TE, NDE, JNIE and every INIE.
    #[arg(long = "effect")]
    pub effects: Vec<String>,
    /// Monte Carlo size per posterior draw.
    #[arg(long)]
    pub mc_size: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Run the Gibbs sampler on a CSV dataset and write a draw log.
    Fit {
        #[command(flatten)]
        common: CommonArgs,
        /// Input CSV.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Schema file with a `[schema]` table.
        #[arg(long)]
        schema: Option<PathBuf>,
        #[command(flatten)]
        sampler: SamplerArgs,
    },
    /// Post-process a draw log into causal effect estimates.
    Effects {
        #[command(flatten)]
        common: CommonArgs,
        /// Draw log written by `fit`.
        #[arg(long)]
        draws: Option<PathBuf>,
        #[command(flatten)]
        effects: EffectArgs,
    },
    /// Generate a scenario dataset with its true effects.
    Simulate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
    },
    /// Fit a method on repeated scenario datasets and score it.
    Replicate {
        #[command(flatten)]
        common: CommonArgs,
        #[command(flatten)]
        scenario: ScenarioArgs,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long, value_enum)]
        method: Option<MethodKind>,
        /// Bootstrap resamples for the LSEM.
        #[arg(long)]
        bootstrap: Option<usize>,
        /// Score against the oracle or the published values.
        #[arg(long, value_enum)]
        truth: Option<TruthChoice>,
        #[command(flatten)]
        sampler: SamplerArgs,
        #[command(flatten)]
        effects: EffectArgs,
    },
    /// Run the enriched-urn property checks.
    ValidateUrn {
        #[command(flatten)]
        common: CommonArgs,
        /// Simulated sequences for the moment checks.
        #[arg(long)]
        sequences: Option<usize>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Fit,
    Effects,
    Simulate,
    Replicate,
    ValidateUrn,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Fit => "fit",
            Command::Effects => "effects",
            Command::Simulate => "simulate",
            Command::Replicate => "replicate",
            Command::ValidateUrn => "validate-urn",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum MethodKind {
    Bnp,
    Lsem,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum TruthChoice {
    Oracle,
    Paper,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    input: Option<PathBuf>,
    draws: Option<PathBuf>,
    schema_file: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplerSection {
    iterations: Option<usize>,
    burn_in: Option<usize>,
    thin: Option<usize>,
    aux: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct EffectsSection {
    list: Option<Vec<Effect>>,
    mc_size: Option<usize>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioSection {
    id: Option<u8>,
    n: Option<usize>,
    p1: Option<usize>,
    p2: Option<usize>,
    q: Option<usize>,
    truth_reps: Option<usize>,
    #[serde(default)]
    overrides: Overrides,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ReplicateSection {
    reps: Option<usize>,
    method: Option<MethodKind>,
    bootstrap: Option<usize>,
    truth: Option<TruthChoice>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct UrnSection {
    sequences: Option<usize>,
}

/// The config file. Every key is optional; unknown keys are errors.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    workers: Option<usize>,
    output: Option<PathBuf>,
    #[serde(default)]
    data: DataSection,
    schema: Option<Schema>,
    #[serde(default)]
    sampler: SamplerSection,
    prior: Option<PriorSettings>,
    #[serde(default)]
    effects: EffectsSection,
    #[serde(default)]
    scenario: ScenarioSection,
    #[serde(default)]
    replicate: ReplicateSection,
    #[serde(default)]
    urn: UrnSection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SamplerSettings {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    pub aux: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ReplicateSettings {
    pub reps: usize,
    pub method: MethodKind,
    pub bootstrap: usize,
    pub truth: TruthChoice,
}

/// Fully resolved settings for one command.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    /// Threads; does not affect results.
    pub workers: usize,
    pub output: PathBuf,
    pub input: Option<PathBuf>,
    pub draws: Option<PathBuf>,
    pub schema: Option<Schema>,
    pub sampler: SamplerSettings,
    pub prior: PriorSettings,
    /// `None` means the standard set for the data's mediator count.
    pub effects: Option<Vec<Effect>>,
    pub mc_size: usize,
    pub scenario: Option<ScenarioSpec>,
    pub truth_reps: usize,
    pub replicate: Option<ReplicateSettings>,
    pub urn_sequences: usize,
    /// Keys set in the file and overridden by a flag.
    pub overrides: Vec<String>,
}

struct Merge {
    overrides: Vec<String>,
}

impl Merge {
    fn pick<T>(&mut self, key: &str, cli: Option<T>, file: Option<T>) -> Option<T> {
        match (cli, file) {
            (Some(c), Some(_)) => {
                self.overrides.push(key.to_string());
                Some(c)
            }
            (c, f) => c.or(f),
        }
    }
}

fn load_file(path: &Path) -> CliResult<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("cannot read config {}: {e}", path.display())))?;
    let mut cfg: FileConfig =
        toml::from_str(&text).map_err(|e| CliError::config(format!("config {}: {e}", path.display())))?;
    // Paths in the file are relative to the file.
    let base = path.parent().unwrap_or(Path::new("."));
    let fix = |p: &mut Option<PathBuf>| {
        if let Some(x) = p {
            if x.is_relative() {
                *x = base.join(&*x);
            }
        }
    };
    fix(&mut cfg.output);
    fix(&mut cfg.data.input);
    fix(&mut cfg.data.draws);
    fix(&mut cfg.data.schema_file);
    Ok(cfg)
}

fn existing(path: Option<PathBuf>, what: &str, command: Command) -> CliResult<PathBuf> {
    let p = path.ok_or_else(|| CliError::config(format!("{} needs {what}", command.name())))?;
    if !p.is_file() {
        return Err(CliError::input(format!("{} does not exist", p.display())));
    }
    Ok(p)
}

fn parse_effects(raw: &[String]) -> CliResult<Option<Vec<Effect>>> {
    if raw.is_empty() {
        return Ok(None);
    }
    raw.iter()
        .map(|s| s.parse::<Effect>().map_err(|e| CliError::config(format!("--effect {s}: {e}"))))
        .collect::<CliResult<Vec<_>>>()
        .map(Some)
}

fn env_workers() -> CliResult<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => {
            v.trim().parse().map(Some).map_err(|_| CliError::config(format!("{WORKERS_ENV}={v} is not a thread count")))
        }
        Err(_) => Ok(None),
    }
}

impl RunConfig {
    /// Merge flags over the optional config file and fill defaults.
    pub fn resolve(cli: CommandArgs) -> CliResult<(RunConfig, bool)> {
        let common = match &cli {
            CommandArgs::Fit { common, .. }
            | CommandArgs::Effects { common, .. }
            | CommandArgs::Simulate { common, .. }
            | CommandArgs::Replicate { common, .. }
            | CommandArgs::ValidateUrn { common, .. } => common.clone(),
        };
        let file = match &common.config {
            Some(p) => load_file(p)?,
            None => FileConfig::default(),
        };
        let mut mg = Merge { overrides: vec![] };
        let command = match &cli {
            CommandArgs::Fit { .. } => Command::Fit,
            CommandArgs::Effects { .. } => Command::Effects,
            CommandArgs::Simulate { .. } => Command::Simulate,
            CommandArgs::Replicate { .. } => Command::Replicate,
            CommandArgs::ValidateUrn { .. } => Command::ValidateUrn,
        };
        let seed = mg.pick("seed", common.seed, file.seed);
        if seed.is_none() && matches!(command, Command::Simulate | Command::Replicate) {
            return Err(CliError::config(format!(
                "{} needs a seed: set `seed` in the config or pass --seed",
                command.name()
            )));
        }
        let workers = match mg.pick("workers", common.workers, file.workers).or(env_workers()?) {
            Some(0) => return Err(CliError::config("workers must be at least 1")),
            Some(w) => w,
            None => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        let output = mg.pick("output", common.out, file.output).unwrap_or_else(|| PathBuf::from("."));

        let (s_args, e_args, sc_args) = match &cli {
            CommandArgs::Fit { sampler, .. } => (sampler.clone(), EffectArgs::default(), ScenarioArgs::default()),
            CommandArgs::Effects { effects, .. } => (SamplerArgs::default(), effects.clone(), ScenarioArgs::default()),
            CommandArgs::Simulate { scenario, .. } => (SamplerArgs::default(), EffectArgs::default(), scenario.clone()),
            CommandArgs::Replicate { sampler, effects, scenario, .. } => {
                (sampler.clone(), effects.clone(), scenario.clone())
            }
            CommandArgs::ValidateUrn { .. } => Default::default(),
        };
        let fs = &file.sampler;
        let sampler = SamplerSettings {
            iterations: mg.pick("sampler.iterations", s_args.iterations, fs.iterations).unwrap_or(DEFAULT_ITERATIONS),
            burn_in: mg.pick("sampler.burn_in", s_args.burn_in, fs.burn_in).unwrap_or(DEFAULT_BURN_IN),
            thin: mg.pick("sampler.thin", s_args.thin, fs.thin).unwrap_or(DEFAULT_THIN),
            aux: mg.pick("sampler.aux", s_args.aux, fs.aux).unwrap_or(DEFAULT_AUX),
        };
        if sampler.iterations <= sampler.burn_in || sampler.thin == 0 || sampler.aux == 0 {
            return Err(CliError::config(
                "sampler: iterations must exceed burn_in, and thin and aux must be at least 1",
            ));
        }
        let effects = mg.pick("effects.list", parse_effects(&e_args.effects)?, file.effects.list.clone());
        if effects.as_ref().is_some_and(Vec::is_empty) {
            return Err(CliError::config("effects.list is empty"));
        }
        let mc_size = mg
            .pick("effects.mc_size", e_args.mc_size, file.effects.mc_size)
            .unwrap_or(edpmed_core::gcomp::DEFAULT_MC_SIZE);
        if mc_size == 0 {
            return Err(CliError::config("effects.mc_size must be at least 1"));
        }
        let fsc = &file.scenario;
        let truth_reps = mg.pick("scenario.truth_reps", sc_args.truth_reps, fsc.truth_reps).unwrap_or(MIN_ORACLE_REPS);

        let mut input = None;
        let mut draws = None;
        let mut schema = None;
        let mut scenario = None;
        let mut replicate = None;
        let mut urn_sequences = DEFAULT_URN_SEQUENCES;
        match &cli {
            CommandArgs::Fit { data, schema: schema_flag, .. } => {
                input = Some(existing(
                    mg.pick("data.input", data.clone(), file.data.input.clone()),
                    "input data (--data or data.input)",
                    command,
                )?);
                let schema_path = mg.pick("data.schema_file", schema_flag.clone(), file.data.schema_file.clone());
                schema =
                    Some(match (schema_path, file.schema.clone()) {
                        (Some(p), _) => Schema::load(&p)?,
                        (None, Some(s)) => s,
                        (None, None) => return Err(CliError::config(
                            "fit needs a column schema: a [schema] table in the config, data.schema_file, or --schema",
                        )),
                    });
            }
            CommandArgs::Effects { draws: d, .. } => {
                draws = Some(existing(
                    mg.pick("data.draws", d.clone(), file.data.draws.clone()),
                    "a draw log (--draws or data.draws)",
                    command,
                )?);
            }
            CommandArgs::Simulate { .. } | CommandArgs::Replicate { .. } => {
                let id = mg
                    .pick("scenario.id", sc_args.scenario, fsc.id)
                    .ok_or_else(|| CliError::config(format!("{} needs scenario.id (or --scenario)", command.name())))?;
                let n = mg
                    .pick("scenario.n", sc_args.n, fsc.n)
                    .ok_or_else(|| CliError::config(format!("{} needs scenario.n (or --n)", command.name())))?;
                let c = ScenarioSpec::canonical(id, n, seed.unwrap_or(0));
                let spec = ScenarioSpec {
                    p1: mg.pick("scenario.p1", sc_args.p1, fsc.p1).unwrap_or(c.p1),
                    p2: mg.pick("scenario.p2", sc_args.p2, fsc.p2).unwrap_or(c.p2),
                    q: mg.pick("scenario.q", sc_args.q, fsc.q).unwrap_or(c.q),
                    overrides: fsc.overrides.clone(),
                    ..c
                };
                spec.validate()?;
                if let Some(es) = &effects {
                    for e in es {
                        e.validate(spec.q)?;
                    }
                }
                scenario = Some(spec);
                if let CommandArgs::Replicate { reps, method, bootstrap, truth, .. } = &cli {
                    let fr = &file.replicate;
                    let r = ReplicateSettings {
                        reps: mg.pick("replicate.reps", *reps, fr.reps).unwrap_or(DEFAULT_REPS),
                        method: mg.pick("replicate.method", *method, fr.method).unwrap_or(MethodKind::Bnp),
                        bootstrap: mg
                            .pick("replicate.bootstrap", *bootstrap, fr.bootstrap)
                            .unwrap_or(DEFAULT_BOOTSTRAP),
                        truth: mg.pick("replicate.truth", *truth, fr.truth).unwrap_or(TruthChoice::Oracle),
                    };
                    if r.reps == 0 {
                        return Err(CliError::config("replicate.reps must be at least 1"));
                    }
                    replicate = Some(r);
                }
                if truth_reps < MIN_ORACLE_REPS && !(replicate.is_some_and(|r| r.truth == TruthChoice::Paper)) {
                    return Err(CliError::config(format!("scenario.truth_reps must be at least {MIN_ORACLE_REPS}")));
                }
            }
            CommandArgs::ValidateUrn { sequences, .. } => {
                urn_sequences =
                    mg.pick("urn.sequences", *sequences, file.urn.sequences).unwrap_or(DEFAULT_URN_SEQUENCES);
                if urn_sequences < 100 {
                    return Err(CliError::config("urn.sequences must be at least 100"));
                }
            }
        }
        let cfg = RunConfig {
            command,
            seed: seed.unwrap_or(0),
            workers,
            output,
            input,
            draws,
            schema,
            sampler,
            prior: file.prior.unwrap_or_default(),
            effects,
            mc_size,
            scenario,
            truth_reps,
            replicate,
            urn_sequences,
            overrides: mg.overrides,
        };
        Ok((cfg, common.dry_run))
    }

    /// Parse a full argument vector (program name first).
    pub fn from_args<I, T>(args: I) -> CliResult<(RunConfig, bool)>
    where
        I: IntoIterator<Item = T>,
        T: Into<std::ffi::OsString> + Clone,
    {
        let cli = Cli::try_parse_from(args).map_err(|e| CliError::config(e.to_string()))?;
        RunConfig::resolve(cli.command)
    }
}
