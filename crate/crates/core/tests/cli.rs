use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use cno::cli::bundle::load_bundle;
use cno::cli::manifest::{RunManifest, Status, MANIFEST_FILE};
use cno::net::{self, io::read_model_file};

const RECURSIVE: &str = r#"
schema_version = 1
seed = 7

[problem]
horizon = HORIZON
g = { map = "mean" }
n_train = 64
n_test = 16

[model]
eps_d = 0.0
eps_a = EPS_A
q = 3
delta = 0.5
memory = MEMORY
hidden = [[4]]

[model.train]
lr = 0.01
epochs = 30
batch = 16
final_lr_scale = 0.1
"#;

fn recursive(horizon: usize, memory: usize, eps_a: f64) -> String {
    RECURSIVE
        .replace("HORIZON", &horizon.to_string())
        .replace("MEMORY", &memory.to_string())
        .replace("EPS_A", &format!("{eps_a:?}"))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn cno(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cno")).args(args).env_remove("CNO_OUTPUT_ROOT").output().unwrap()
}

fn run(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![cmd, "-c", config.to_str().unwrap(), "-o", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    cno(&args)
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn manifest(dir: &Path) -> RunManifest {
    RunManifest::read(&dir.join(MANIFEST_FILE)).unwrap()
}

#[test]
fn single_window_construct_matches_train_filter() {
    let tmp = tempfile::tempdir().unwrap();
    // A loose gate so the tiny training run is not reported as a shortfall.
    let cfg = write_config(tmp.path(), "one.toml", &recursive(1, 1, 1.0));
    let (f_out, c_out) = (tmp.path().join("filter"), tmp.path().join("construct"));
    assert_eq!(code(&run("train-filter", &cfg, &f_out, &[])), 0);
    assert_eq!(code(&run("construct", &cfg, &c_out, &[])), 0);

    let (spec, params) = read_model_file(&f_out.join("filter.bin")).unwrap();
    let model = load_bundle(&c_out.join("bundle")).unwrap();
    assert_eq!(model.horizon(), 1);
    assert_eq!(model.synced, spec);
    for k in 0..=20 {
        let x = k as f64 / 20.0;
        let via_cno = cno::cno::predict(&model, &[vec![x]], 1).unwrap();
        let via_filter = net::forward(&spec, &params, &[x]).unwrap();
        assert!((via_cno[0][0] - via_filter[0]).abs() < 1e-12, "{x}: {via_cno:?} vs {via_filter:?}");
    }
}

#[test]
fn reruns_are_bit_identical_and_bundles_inspect() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "r.toml", &recursive(3, 3, 1.0));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(code(&run("construct", &cfg, &a, &[])), 0);
    assert_eq!(code(&run("construct", &cfg, &b, &[])), 0);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(ma.status, Status::Ok);
    let hashes = |m: &RunManifest| -> Vec<(String, String)> {
        m.artifacts.iter().filter(|x| x.deterministic).map(|x| (x.path.clone(), x.sha256.clone())).collect()
    };
    assert!(!hashes(&ma).is_empty());
    assert_eq!(hashes(&ma), hashes(&mb));

    let bundle = a.join("bundle");
    let o = cno(&["inspect", bundle.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let o = cno(&["inspect", bundle.to_str().unwrap(), "--json"]);
    assert_eq!(code(&o), 0);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v.is_object());

    let audit = run("audit", &cfg, &tmp.path().join("audit"), &["--bundle", bundle.to_str().unwrap(), "--pairs", "10"]);
    assert_eq!(code(&audit), 0, "{}", stderr(&audit));
    let predict = run("predict", &cfg, &tmp.path().join("predict"), &["--bundle", bundle.to_str().unwrap()]);
    assert_eq!(code(&predict), 0, "{}", stderr(&predict));
    assert!(tmp.path().join("predict/predictions.json").exists());
}

#[test]
fn truncated_weave_is_an_integrity_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "r.toml", &recursive(2, 2, 1.0));
    let out = tmp.path().join("c");
    assert_eq!(code(&run("construct", &cfg, &out, &[])), 0);
    let weave = out.join("bundle/weave.bin");
    let bytes = fs::read(&weave).unwrap();
    fs::write(&weave, &bytes[..bytes.len() / 2]).unwrap();
    let o = cno(&["inspect", out.join("bundle").to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("weave.bin"), "{}", stderr(&o));
}

#[test]
fn config_errors_exit_with_code_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let future = write_config(tmp.path(), "v2.toml", &recursive(2, 2, 1.0).replace("schema_version = 1", "schema_version = 2"));
    let o = run("construct", &future, &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("schema_version"), "{}", stderr(&o));

    let typo = write_config(tmp.path(), "typo.toml", &recursive(2, 2, 1.0).replace("eps_d", "epsd"));
    let o = run("construct", &typo, &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epsd"), "{}", stderr(&o));

    let missing = write_config(tmp.path(), "bare.toml", "schema_version = 1\n");
    let o = run("construct", &missing, &out, &[]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("problem"), "{}", stderr(&o));
}

#[test]
fn budget_overflow_exits_with_code_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "b.toml",
        r#"
schema_version = 1

[budget.filter]
eps_d = 0.1
eps_a = 1e-300
lambda = 1.0
n_in = 40
n_out = 40
regularity = { class = "smooth", k = 1 }
"#,
    );
    let out = tmp.path().join("b");
    let o = run("budget", &cfg, &out, &[]);
    assert_eq!(code(&o), 3, "{}", stderr(&o));
    let m = manifest(&out);
    assert_eq!(m.status, Status::Failed);
    assert_eq!(m.error.unwrap().kind, "budget_overflow");
}

#[test]
fn budget_report_is_written() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/budget.toml");
    let out = tmp.path().join("b");
    let o = run("budget", &cfg, &out, &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("budget.json")).unwrap()).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["hyper"]["width_bound"], 348);
}

#[test]
fn shortfall_exits_with_code_four() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", &recursive(2, 2, 1e-9));
    let out = tmp.path().join("s");
    let o = run("construct", &cfg, &out, &[]);
    assert_eq!(code(&o), 4, "{}", stderr(&o));
    assert_eq!(manifest(&out).status, Status::Shortfall);
    // The bundle is still written and usable.
    assert!(load_bundle(&out.join("bundle")).is_ok());
}

#[test]
fn output_root_env_places_relative_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/budget.toml");
    let o = Command::new(env!("CARGO_BIN_EXE_cno"))
        .args(["budget", "-c", cfg.to_str().unwrap(), "-o", "rel"])
        .env("CNO_OUTPUT_ROOT", tmp.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(tmp.path().join("rel/budget.json").exists());
    assert!(tmp.path().join("rel").join(MANIFEST_FILE).exists());
}

#[test]
fn unknown_bundle_and_input_versions_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "r.toml", &recursive(2, 2, 1.0));
    let out = tmp.path().join("c");
    assert_eq!(code(&run("construct", &cfg, &out, &[])), 0);
    let bundle = out.join("bundle");

    let paths = tmp.path().join("paths.json");
    fs::write(&paths, r#"{ "schema_version": 1, "paths": [[[0.1], [0.9]], [[0.5], [0.5]]] }"#).unwrap();
    let args = ["--bundle", bundle.to_str().unwrap(), "--input", paths.to_str().unwrap()];
    let o = run("predict", &cfg, &tmp.path().join("p1"), &args);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    fs::write(&paths, r#"{ "schema_version": 9, "paths": [] }"#).unwrap();
    let o = run("predict", &cfg, &tmp.path().join("p2"), &args);
    assert_ne!(code(&o), 0);
    assert!(stderr(&o).contains("schema version 9"), "{}", stderr(&o));

    let header = bundle.join("bundle.json");
    let text = fs::read_to_string(&header).unwrap().replacen("\"schema_version\": 1", "\"schema_version\": 2", 1);
    fs::write(&header, text).unwrap();
    let o = cno(&["inspect", bundle.to_str().unwrap()]);
    assert_eq!(code(&o), 5);
    assert!(stderr(&o).contains("schema version 2"), "{}", stderr(&o));
}
