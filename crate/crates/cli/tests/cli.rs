use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

const SMOKE: &str = r#"
seed = 1

[grid]
trms_ns = [50.0]
snr_db = [20.0]
trajectories_per_cell = 1
packets_per_trajectory = 124

[model]
d_model = 8
n_head = 2
n_layers = 1
d_ff = 16

[train]
max_epochs = 3
batch_size = 16

[eval]
n_a = [0, 2]
sequences_per_n_a = 8
epsilon_step = 0.01
"#;

fn csiauth(config: &Path, out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_csiauth"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--threads", "2"])
        .output()
        .expect("binary runs")
}

fn ok(out: Output) -> Output {
    assert!(
        out.status.success(),
        "command failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn failed(out: Output) -> String {
    assert!(!out.status.success(), "command unexpectedly succeeded");
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn setup(extra: &str) -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, format!("{SMOKE}\n{extra}")).unwrap();
    let out = dir.path().join("out");
    (dir, cfg, out)
}

fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn manifest_sha(out: &Path) -> String {
    let m: toml::Value = toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    m["sha256"].as_str().unwrap().to_string()
}

#[test]
fn smoke_pipeline_writes_every_artifact() {
    let (_dir, cfg, out) = setup("");
    ok(csiauth(&cfg, &out, &["gen"]));
    let m: toml::Value = toml::from_str(&fs::read_to_string(out.join("manifest.toml")).unwrap()).unwrap();
    assert_eq!(m["records"].as_integer(), Some(100));

    ok(csiauth(&cfg, &out, &["train"]));
    assert!(out.join("model.cptx").exists());
    assert_eq!(csv_rows(&out.join("loss_history.csv")).len(), 3);
    assert!(fs::read_dir(&out).unwrap().all(|e| !e.unwrap().path().to_string_lossy().ends_with(".partial")));

    ok(csiauth(&cfg, &out, &["eval-nmse"]));
    let nmse = csv_rows(&out.join("nmse_by_step.csv"));
    assert_eq!(nmse.len(), 20);
    assert!(nmse.iter().all(|r| r[1].parse::<f64>().unwrap() > 0.0 && r[2] == "5"));

    ok(csiauth(&cfg, &out, &["eval-auth"]));
    assert_eq!(csv_rows(&out.join("accuracy_by_na.csv")).len(), 4);
    for name in ["proposed_na0.csv", "benchmark_na2.csv"] {
        let head = fs::read_to_string(out.join("traces").join(name)).unwrap();
        assert!(head.starts_with("packet_index,r,decision,iteration_index"));
    }

    ok(csiauth(&cfg, &out, &["sweep"]));
    // 0.80, 0.81, ..., 0.99 for two methods
    assert_eq!(csv_rows(&out.join("sweep.csv")).len(), 20 * 2);
    assert_eq!(csv_rows(&out.join("accuracy_by_na.csv")).len(), 4);

    let revision = fs::read_to_string(out.join("revision.txt")).unwrap();
    assert!(!revision.trim().is_empty());
    let resolved = fs::read_to_string(out.join("config.toml")).unwrap();
    assert!(resolved.contains("seed = 1"));
}

#[test]
fn manifest_checksum_matches_and_reruns_are_identical() {
    let (dir, cfg, out) = setup("");
    ok(csiauth(&cfg, &out, &["gen"]));
    let bytes = fs::read(out.join("train.csid")).unwrap();
    use sha2::Digest;
    assert_eq!(format!("{:x}", sha2::Sha256::digest(&bytes)), manifest_sha(&out));

    let again = dir.path().join("again");
    ok(csiauth(&cfg, &again, &["gen"]));
    assert_eq!(bytes, fs::read(again.join("train.csid")).unwrap());

    let other = dir.path().join("other");
    ok(csiauth(&cfg, &other, &["gen", "--seed", "2"]));
    assert_ne!(manifest_sha(&out), manifest_sha(&other));
    assert!(fs::read_to_string(other.join("config.toml")).unwrap().contains("seed = 2"));
}

#[test]
fn metric_csvs_are_reproducible() {
    let (dir, cfg, out) = setup("");
    let again = dir.path().join("again");
    for o in [&out, &again] {
        ok(csiauth(&cfg, o, &["gen"]));
        ok(csiauth(&cfg, o, &["train"]));
        ok(csiauth(&cfg, o, &["eval-nmse"]));
    }
    for f in ["model.cptx", "loss_history.csv", "nmse_by_step.csv"] {
        assert_eq!(fs::read(out.join(f)).unwrap(), fs::read(again.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn stub_predictor_gives_zero_nmse() {
    let (_dir, cfg, out) = setup("");
    ok(csiauth(&cfg, &out, &["eval-nmse", "--stub-predictor"]));
    let rows = csv_rows(&out.join("nmse_by_step.csv"));
    assert_eq!(rows.len(), 20);
    assert!(rows.iter().all(|r| r[1].parse::<f64>().unwrap() == 0.0));
}

#[test]
fn stub_predictor_authenticates_unattacked_streams() {
    let (dir, _, _) = setup("");
    let cfg = dir.path().join("na0.toml");
    fs::write(&cfg, SMOKE.replace("n_a = [0, 2]", "n_a = [0]\nepsilon = 0.5")).unwrap();
    let out = dir.path().join("out");
    ok(csiauth(&cfg, &out, &["eval-auth", "--stub-predictor"]));
    let rows = csv_rows(&out.join("accuracy_by_na.csv"));
    assert_eq!(rows[0][..2], ["0".to_string(), "proposed".to_string()]);
    assert_eq!(rows[0][3], "1");
}

#[test]
fn unknown_config_key_is_rejected() {
    let (_dir, cfg, out) = setup("[oops]\nfoo = 1\n");
    let err = failed(csiauth(&cfg, &out, &["gen"]));
    assert!(err.contains("oops"), "{err}");
    let (_dir, cfg, out) = setup("");
    fs::write(&cfg, SMOKE.replace("d_ff = 16", "d_ff = 16\nwidth = 3")).unwrap();
    let err = failed(csiauth(&cfg, &out, &["gen"]));
    assert!(err.contains("width"), "{err}");
}

#[test]
fn missing_artifacts_are_named() {
    let (_dir, cfg, out) = setup("");
    let err = failed(csiauth(&cfg, &out, &["train"]));
    assert!(err.contains("train.csid"), "{err}");
    let err = failed(csiauth(&cfg, &out, &["eval-nmse"]));
    assert!(err.contains("model.cptx"), "{err}");
    let err = failed(csiauth(Path::new("/nonexistent/run.toml"), &out, &["gen"]));
    assert!(err.contains("/nonexistent/run.toml"), "{err}");
}

#[test]
fn dataset_shape_mismatch_stops_training() {
    let (dir, cfg, out) = setup("");
    ok(csiauth(&cfg, &out, &["gen"]));
    let other = dir.path().join("nf3.toml");
    let dataset = out.join("train.csid");
    fs::write(
        &other,
        SMOKE
            .replace("d_ff = 16", "d_ff = 16\nn_f = 3")
            .replace("max_epochs = 3", &format!("max_epochs = 3\ndataset = {:?}", dataset)),
    )
    .unwrap();
    let out2 = dir.path().join("out2");
    let err = failed(csiauth(&other, &out2, &["train"]));
    assert!(err.contains("n_f=5") && err.contains("n_f=3"), "{err}");
    assert!(!out2.join("model.cptx").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in ["smoke.toml", "horizon.toml", "attack_length.toml"] {
        let text = fs::read_to_string(root.join(name)).unwrap();
        let dir = TempDir::new().unwrap();
        let cfg = dir.path().join(name);
        // parses, then stops at the missing checkpoint
        fs::write(&cfg, text).unwrap();
        let out = dir.path().join("out");
        let err = failed(csiauth(&cfg, &out, &["eval-nmse"]));
        assert!(err.contains("model.cptx"), "{name}: {err}");
    }
}
