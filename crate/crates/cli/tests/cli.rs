use std::path::{Path, PathBuf};
use std::process::Command as Proc;

use edpmed_cli::config::{MethodKind, TruthChoice};
use edpmed_cli::io::{dataset_to_csv, ingest_csv, Schema};
use edpmed_cli::{Command, ErrorKind, RunConfig};
use edpmed_core::VarKind;
use edpmed_lab::{generate, ScenarioSpec};

const BIN: &str = env!("CARGO_BIN_EXE_edpmed");

fn resolve(args: &[&str]) -> Result<RunConfig, edpmed_cli::CliError> {
    let mut v = vec!["edpmed"];
    v.extend_from_slice(args);
    RunConfig::from_args(v).map(|(c, _)| c)
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn edpmed(args: &[&str]) -> std::process::Output {
    Proc::new(BIN).args(args).env_remove("EDPMED_WORKERS").output().unwrap()
}

/// The single file in `dir` named `{prefix}{12 hex}.{ext}`.
fn artifact(dir: &Path, prefix: &str, ext: &str) -> PathBuf {
    let mut found: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            name.strip_prefix(prefix)
                .and_then(|rest| rest.strip_suffix(&format!(".{ext}")))
                .is_some_and(|h| h.len() == 12 && h.bytes().all(|b| b.is_ascii_hexdigit()))
        })
        .collect();
    assert_eq!(found.len(), 1, "{prefix}*.{ext} in {}", dir.display());
    found.pop().unwrap()
}

fn json(path: PathBuf) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const TOY: &str = "y,a,m1,l1\n0.5,1,2.0,0\n-1.25,0,1.5,1\n3,1,-0.5,1\n";
const TOY_SCHEMA: &str = r#"
[schema]
y = { role = "outcome", kind = "continuous" }
a = { role = "treatment" }
m1 = { role = "mediator", kind = "continuous" }
l1 = { role = "confounder", kind = "binary" }
"#;

fn toy_schema() -> Schema {
    toml::from_str::<edpmed_cli::io::SchemaFile>(TOY_SCHEMA).unwrap().schema
}

#[test]
fn minimal_fit_config_gets_documented_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", TOY);
    let cfg = write(dir.path(), "c.toml", &format!("[data]\ninput = \"d.csv\"\n{TOY_SCHEMA}"));
    let c = resolve(&["fit", "--config", cfg.to_str().unwrap(), "--workers", "1"]).unwrap();
    assert_eq!(c.command, Command::Fit);
    assert_eq!(c.seed, 0);
    assert_eq!((c.sampler.iterations, c.sampler.burn_in, c.sampler.thin, c.sampler.aux), (2000, 500, 2, 3));
    assert_eq!(c.mc_size, 200);
    assert_eq!(c.prior, edpmed_core::model::PriorSettings::default());
    assert_eq!(c.input.as_deref(), Some(data.as_path()));
    assert!(c.overrides.is_empty());
    // The dry-run echo is the resolved config.
    let out = edpmed(&["fit", "--config", cfg.to_str().unwrap(), "--dry-run", "--workers", "1"]);
    assert!(out.status.success());
    let echo: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(echo["sampler"]["iterations"], 2000);
    assert_eq!(echo["mc_size"], 200);
    assert_eq!(echo["prior"]["g"], 1.0);
}

#[test]
fn unknown_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "seed = 1\n[sampler]\niterations = 10\nburnin = 2\n");
    let e = resolve(&["simulate", "--config", cfg.to_str().unwrap(), "--scenario", "1", "--n", "5"]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Config);
    assert!(e.message.contains("burnin"), "{}", e.message);
    let cfg = write(dir.path(), "d.toml", "seed = 1\ncolour = 2\n");
    let e = resolve(&["validate-urn", "--config", cfg.to_str().unwrap()]).unwrap_err();
    assert!(e.message.contains("colour"), "{}", e.message);
    let cfg = write(dir.path(), "e.toml", "seed = \"one\"\n");
    let e = resolve(&["validate-urn", "--config", cfg.to_str().unwrap()]).unwrap_err();
    assert!(e.message.contains("seed") || e.message.contains("invalid type"), "{}", e.message);
}

#[test]
fn missing_required_fields() {
    let e = resolve(&["simulate", "--scenario", "1", "--n", "5"]).unwrap_err();
    assert!(e.message.contains("seed"), "{}", e.message);
    let e = resolve(&["replicate", "--seed", "1", "--n", "5"]).unwrap_err();
    assert!(e.message.contains("scenario.id"), "{}", e.message);
    let e = resolve(&["fit"]).unwrap_err();
    assert!(e.message.contains("--data"), "{}", e.message);
    let dir = tempfile::tempdir().unwrap();
    let data = write(dir.path(), "d.csv", TOY);
    let e = resolve(&["fit", "--data", data.to_str().unwrap()]).unwrap_err();
    assert!(e.message.contains("schema"), "{}", e.message);
    let e = resolve(&["effects", "--draws", "/no/such/file"]).unwrap_err();
    assert_eq!(e.kind, ErrorKind::Input);
    let e = resolve(&["effects", "--draws", data.to_str().unwrap(), "--effect", "INIE"]).unwrap_err();
    assert!(e.message.contains("INIE"), "{}", e.message);
}

#[test]
fn flags_override_file_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg =
        write(dir.path(), "c.toml", "seed = 5\n[scenario]\nid = 2\nn = 50\n[replicate]\nreps = 4\nmethod = \"lsem\"\n");
    let c = resolve(&["replicate", "--config", cfg.to_str().unwrap(), "--reps", "2", "--seed", "9"]).unwrap();
    let r = c.replicate.unwrap();
    assert_eq!((r.reps, r.method, r.truth), (2, MethodKind::Lsem, TruthChoice::Oracle));
    assert_eq!(c.seed, 9);
    assert_eq!(c.overrides, vec!["seed".to_string(), "replicate.reps".to_string()]);
    assert_eq!(c.scenario.unwrap().n, 50);

    // The override is recorded in the written report.
    let out = dir.path().join("out");
    let o = edpmed(&[
        "replicate",
        "--config",
        cfg.to_str().unwrap(),
        "--reps",
        "1",
        "--out",
        out.to_str().unwrap(),
        "--workers",
        "1",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let report = json(artifact(&out, "replicate-", "json"));
    assert_eq!(report["provenance"]["overrides"], serde_json::json!(["replicate.reps"]));
    assert_eq!(report["provenance"]["config"]["replicate"]["reps"], 1);
}

#[test]
fn workers_from_environment() {
    let o = Proc::new(BIN).args(["validate-urn", "--dry-run"]).env("EDPMED_WORKERS", "3").output().unwrap();
    let echo: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["workers"], 3);
    let o = Proc::new(BIN)
        .args(["validate-urn", "--dry-run", "--workers", "2"])
        .env("EDPMED_WORKERS", "3")
        .output()
        .unwrap();
    let echo: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(echo["workers"], 2);
    let o = Proc::new(BIN).args(["validate-urn", "--dry-run"]).env("EDPMED_WORKERS", "lots").output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn toy_csv_ingest() {
    let ds = ingest_csv(TOY.as_bytes(), &toy_schema()).unwrap();
    assert_eq!((ds.n(), ds.q(), ds.l_disc.len(), ds.l_cont.len()), (3, 1, 1, 0));
    assert_eq!(ds.y, vec![0.5, -1.25, 3.0]);
    assert_eq!(ds.names.m, vec!["m1".to_string()]);
}

#[test]
fn csv_rejections_name_row_and_column() {
    let bad = "y,a,m1,l1\n0.5,1,2.0,0\n-1.25,2,1.5,1\n";
    let e = ingest_csv(bad.as_bytes(), &toy_schema()).unwrap_err();
    assert!(e.message.contains("row 2") && e.message.contains('a'), "{}", e.message);
    let bad = "y,a,m1,l1\n0.5,1,2.0,0\n-1.25,0,,1\n";
    let e = ingest_csv(bad.as_bytes(), &toy_schema()).unwrap_err();
    assert!(e.message.contains("row 2") && e.message.contains("m1") && e.message.contains("missing"), "{}", e.message);
    let bad = "y,a,l1\n0.5,1,0\n";
    let e = ingest_csv(bad.as_bytes(), &toy_schema()).unwrap_err();
    assert!(e.message.contains("missing column `m1`"), "{}", e.message);
    let extra = "y,a,m1,l1,id\n0.5,1,2.0,0,7\n";
    let e = ingest_csv(extra.as_bytes(), &toy_schema()).unwrap_err();
    assert!(e.message.contains("`id`"), "{}", e.message);
    let mut s = toy_schema();
    s.columns.insert("id".into(), toml::from_str("role = \"ignore\"").unwrap());
    assert_eq!(ingest_csv(extra.as_bytes(), &s).unwrap().n(), 1);
    let bad = "y,a,m1,l1\n0.5,1,two,0\n";
    assert!(ingest_csv(bad.as_bytes(), &toy_schema()).unwrap_err().message.contains("two"));
}

#[test]
fn scenario_six_csv_round_trips() {
    let ds = generate(&ScenarioSpec::canonical(6, 40, 3)).unwrap();
    let schema = Schema::for_dataset(&ds);
    let back = ingest_csv(&dataset_to_csv(&ds), &schema).unwrap();
    assert_eq!(back, ds);
    assert_eq!(back.y_kind, VarKind::Binary);
    // Continuous values survive too.
    let ds = generate(&ScenarioSpec::canonical(3, 25, 3)).unwrap();
    let back = ingest_csv(&dataset_to_csv(&ds), &Schema::for_dataset(&ds)).unwrap();
    assert_eq!(back, ds);
    // And the schema file format.
    let text = schema.to_toml();
    let parsed: edpmed_cli::io::SchemaFile = toml::from_str(&text).unwrap();
    assert_eq!(parsed.schema, schema);
}

#[test]
fn simulate_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let o = edpmed(&["simulate", "--scenario", "1", "--n", "100", "--seed", "7", "--out", d.to_str().unwrap()]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for (prefix, ext) in [("data-", "csv"), ("truth-", "json"), ("schema-", "toml")] {
        let (pa, pb) = (artifact(&a, prefix, ext), artifact(&b, prefix, ext));
        assert_eq!(pa.file_name(), pb.file_name());
        assert_eq!(std::fs::read(pa).unwrap(), std::fs::read(pb).unwrap());
    }
    let csv = std::fs::read_to_string(artifact(&a, "data-", "csv")).unwrap();
    assert_eq!(csv.lines().count(), 101);
    let truth = json(artifact(&a, "truth-", "json"));
    assert_eq!(truth["oracle"]["values"].as_array().unwrap().len(), 13);
    assert_eq!(truth["published"]["values"][0]["effect"], "NDE");
    // A different seed lands in a different file.
    let o = edpmed(&["simulate", "--scenario", "1", "--n", "100", "--seed", "8", "--out", a.to_str().unwrap()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read_dir(&a).unwrap().count(), 6);
}

#[test]
fn fit_then_effects() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let o = edpmed(&["simulate", "--scenario", "1", "--n", "60", "--seed", "1", "--out", d.to_str().unwrap()]);
    assert!(o.status.success());
    let data = artifact(d, "data-", "csv");
    let schema = artifact(d, "schema-", "toml");
    let fit = |out: &Path| {
        edpmed(&[
            "fit",
            "--data",
            data.to_str().unwrap(),
            "--schema",
            schema.to_str().unwrap(),
            "--iterations",
            "80",
            "--burn-in",
            "20",
            "--seed",
            "4",
            "--out",
            out.to_str().unwrap(),
        ])
    };
    let o = fit(d);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit_report = json(artifact(d, "fit-", "json"));
    assert_eq!(fit_report["diagnostics"]["draws"], 30);
    assert_eq!(fit_report["diagnostics"]["legality"]["passed"], 30);
    let draws = artifact(d, "draws-", "edpm");
    let effects = |out: &Path, workers: &str| {
        edpmed(&[
            "effects",
            "--draws",
            draws.to_str().unwrap(),
            "--effect",
            "TE",
            "--effect",
            "NDE",
            "--effect",
            "JNIE",
            "--mc-size",
            "30",
            "--out",
            out.to_str().unwrap(),
            "--workers",
            workers,
        ])
    };
    let o = effects(d, "1");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(summary["artifacts"].as_array().unwrap().len(), 2);
    let report = json(artifact(d, "effects-", "json"));
    let rows = report["effects"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|r| r["name"].as_str().unwrap()).collect();
    assert_eq!(names, ["TE", "NDE", "JNIE"]);
    for r in rows {
        for k in ["mean", "lower", "upper", "mc_se"] {
            assert!(r[k].as_f64().unwrap().is_finite());
        }
    }
    assert_eq!(report["diagnostics"]["legality"]["checked"], 30);
    assert_eq!(report["provenance"]["inputs"][0]["role"], "draws");

    // Same inputs elsewhere, other thread count: same bytes.
    let e = dir.path().join("again");
    assert!(fit(&e).status.success());
    assert!(effects(&e, "2").status.success());
    for name in std::fs::read_dir(d).unwrap().map(|x| x.unwrap().file_name()) {
        let n = name.to_string_lossy();
        if n.starts_with("draws-") || n.starts_with("effects-") || n.starts_with("fit-") {
            assert_eq!(std::fs::read(d.join(&name)).unwrap(), std::fs::read(e.join(&name)).unwrap(), "{n}");
        }
    }
}

#[test]
fn replicate_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o = edpmed(&[
        "replicate",
        "--scenario",
        "1",
        "--n",
        "120",
        "--reps",
        "3",
        "--seed",
        "2",
        "--method",
        "lsem",
        "--bootstrap",
        "30",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let raw = std::fs::read_to_string(artifact(dir.path(), "replicate-raw-", "csv")).unwrap();
    assert_eq!(raw.lines().count(), 1 + 3);
    let agg = std::fs::read_to_string(artifact(dir.path(), "replicate-aggregate-", "csv")).unwrap();
    assert_eq!(agg.lines().count(), 1 + 1);
    assert!(agg.starts_with("scenario,method,reps,failed,TE_truth"));
}

#[test]
fn failures_exit_nonzero_with_json() {
    let o = edpmed(&["simulate", "--scenario", "9", "--n", "10", "--seed", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "config");
    assert!(err["error"]["message"].as_str().unwrap().contains("scenario"));
    let o = edpmed(&["fit", "--bogus"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(serde_json::from_slice::<serde_json::Value>(&o.stderr).is_ok());

    let dir = tempfile::tempdir().unwrap();
    let junk = write(dir.path(), "junk.edpm", "not a log");
    let o = edpmed(&["effects", "--draws", junk.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"]["kind"], "input");
    assert!(edpmed(&["--help"]).status.success());
}

#[test]
fn validate_urn_report() {
    let dir = tempfile::tempdir().unwrap();
    let o = edpmed(&["validate-urn", "--sequences", "20000", "--seed", "1", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let r = json(artifact(dir.path(), "urn-", "json"));
    assert_eq!(r["passed"], true);
    assert_eq!(r["checks"].as_array().unwrap().len(), 3);
}
