//! End-to-end tests of the `ucdir` binary: every subcommand, the config
//! layering, and the exit-code contract (0 ok, 1 usage, 2 runtime, 3 failed
//! checks).

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn ucdir() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ucdir"));
    // The test process's own environment must not leak overrides in.
    for (name, _) in std::env::vars() {
        if name.starts_with("UCDIR_") {
            cmd.env_remove(name);
        }
    }
    cmd
}

fn run(cmd: &mut Command) -> Output {
    cmd.output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const TINY_CONFIG: &str = "\
[generator]
num_classes = 3
per_class = 5
latent_dim = 4
input_dim = 6
noise_sigma = 0.05
seed = 7

[train]
epochs = 3
batch_size = 4
lr0 = 0.05
seed = 5

[eval]
ks = [1]
eval_interval = 2
";

/// Generates the tiny dataset into `dir` and returns its path.
fn tiny_dataset(dir: &Path) -> PathBuf {
    let cfg = dir.join("cfg.toml");
    write(&cfg, TINY_CONFIG);
    let data = dir.join("data.jsonl");
    let out = run(ucdir()
        .arg("generate")
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", data.to_str().unwrap()]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    data
}

/// Trains on the tiny dataset into `dir/<name>` and returns the run directory.
fn tiny_run(dir: &Path, data: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let run_dir = dir.join(name);
    let out = run(ucdir()
        .arg("train")
        .args(["--config", dir.join("cfg.toml").to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--out", run_dir.to_str().unwrap()])
        .args(extra));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    run_dir
}

fn parse_toml(path: &Path) -> toml::Value {
    toml::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn generate_is_seed_deterministic_and_writes_every_sample() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());

    let text = std::fs::read_to_string(&data).unwrap();
    assert_eq!(text.lines().count(), 30, "2 domains x 3 classes x 5 samples");

    let echo = parse_toml(&dir.path().join("data.config.toml"));
    assert_eq!(echo["generator"]["num_classes"].as_integer(), Some(3));
    assert_eq!(echo["generator"]["noise_sigma"].as_float(), Some(0.05));

    let again = dir.path().join("again.jsonl");
    let out = run(ucdir()
        .arg("generate")
        .args(["--config", dir.path().join("cfg.toml").to_str().unwrap()])
        .args(["--out", again.to_str().unwrap()]));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("N=15 M=15 C=3 d_in=6"));
    assert_eq!(std::fs::read(&data).unwrap(), std::fs::read(&again).unwrap());

    let reseeded = dir.path().join("reseeded.jsonl");
    let out = run(ucdir()
        .arg("generate")
        .args(["--config", dir.path().join("cfg.toml").to_str().unwrap()])
        .args(["--out", reseeded.to_str().unwrap()])
        .args(["--seed", "8"]));
    assert_eq!(code(&out), 0);
    assert_ne!(
        std::fs::read(&data).unwrap(),
        std::fs::read(&reseeded).unwrap(),
        "a different seed must change the data"
    );
}

#[test]
fn a_typo_in_the_config_file_is_rejected_by_name() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.toml");
    write(&cfg, "[train]\nepochz = 3\n");
    let out = run(ucdir()
        .arg("generate")
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", dir.path().join("x.jsonl").to_str().unwrap()]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("epochz"), "{}", stderr(&out));
}

#[test]
fn environment_overrides_beat_the_file_and_misspellings_fail() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("cfg.toml");
    write(&cfg, TINY_CONFIG);

    let data = dir.path().join("env.jsonl");
    let out = run(ucdir()
        .env("UCDIR_GENERATOR_PER_CLASS", "6")
        .arg("generate")
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", data.to_str().unwrap()]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(stdout(&out).contains("N=18 M=18"), "{}", stdout(&out));

    let out = run(ucdir()
        .env("UCDIR_GENERATOR_PER_CLAS", "6")
        .arg("generate")
        .args(["--config", cfg.to_str().unwrap()])
        .args(["--out", data.to_str().unwrap()]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("per_clas"), "{}", stderr(&out));
}

#[test]
fn train_writes_metrics_checkpoint_and_a_replayable_config() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());
    let run_dir = tiny_run(dir.path(), &data, "run", &[]);

    assert!(run_dir.join("checkpoint.json").exists());
    let metrics = std::fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 4, "header plus one row per epoch");
    assert!(metrics.starts_with("epoch,"));

    let echo = parse_toml(&run_dir.join("config.toml"));
    let dims: Vec<i64> = echo["train"]["layer_dims"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_integer().unwrap())
        .collect();
    assert_eq!(dims, vec![6, 32, 16], "input width comes from the dataset");
    assert_eq!(
        echo["train"]["k"].as_integer(),
        Some(3),
        "cluster count follows the class count"
    );
}

#[test]
fn variant_presets_show_up_in_the_echoed_config() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());

    let run_v1 = tiny_run(dir.path(), &data, "v1", &["--variant", "v1"]);
    let echo = parse_toml(&run_v1.join("config.toml"));
    assert_eq!(echo["loss"]["use_cw"].as_bool(), Some(false));
    assert_eq!(echo["loss"]["use_se"].as_bool(), Some(false));
    assert_eq!(echo["loss"]["use_dd"].as_bool(), Some(false));

    let run_v3 = tiny_run(dir.path(), &data, "v3", &["--variant", "v3"]);
    let echo = parse_toml(&run_v3.join("config.toml"));
    assert_eq!(echo["loss"]["use_cw"].as_bool(), Some(true));
    assert_eq!(echo["loss"]["use_se"].as_bool(), Some(true));
    assert_eq!(echo["loss"]["use_dd"].as_bool(), Some(false));

    let out = run(ucdir()
        .arg("train")
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--out", dir.path().join("v9").to_str().unwrap()])
        .args(["--variant", "v9"]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("v9"));
}

#[test]
fn resume_extends_a_finished_run() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());
    let run_dir = tiny_run(dir.path(), &data, "run", &["--epochs", "2"]);

    let resumed = run(ucdir()
        .arg("train")
        .args(["--config", dir.path().join("cfg.toml").to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--out", run_dir.to_str().unwrap()])
        .args(["--epochs", "5"])
        .arg("--resume"));
    assert_eq!(code(&resumed), 0, "{}", stderr(&resumed));
    assert!(stdout(&resumed).contains("trained 5 epochs"));
    let metrics = std::fs::read_to_string(run_dir.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().count(), 6, "rows for all five epochs");

    let exhausted = run(ucdir()
        .arg("train")
        .args(["--config", dir.path().join("cfg.toml").to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--out", run_dir.to_str().unwrap()])
        .args(["--epochs", "5"])
        .arg("--resume"));
    assert_eq!(code(&exhausted), 2, "nothing left to train");
}

#[test]
fn eval_defaults_to_both_directions_and_standard_cutoffs() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());
    let run_dir = tiny_run(dir.path(), &data, "run", &[]);
    let ckpt = run_dir.join("checkpoint.json");

    let out = run(ucdir()
        .arg("eval")
        .args(["--checkpoint", ckpt.to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let reports: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 2);
    assert_eq!(reports[0]["direction"], "a_to_b");
    assert_eq!(reports[1]["direction"], "b_to_a");
    for report in reports.as_array().unwrap() {
        for k in ["1", "5", "15"] {
            let p = report["precision"][k].as_f64().unwrap();
            assert!((0.0..=1.0).contains(&p));
        }
        assert_eq!(report["num_queries"], 15);
        assert_eq!(report["num_gallery"], 15);
        assert!(report.get("per_query").is_none());
    }

    // With a config, its [eval] section supplies the cutoffs instead.
    let out = run(ucdir()
        .arg("eval")
        .args(["--config", dir.path().join("cfg.toml").to_str().unwrap()])
        .args(["--checkpoint", ckpt.to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let reports: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(reports[0]["ks"], serde_json::json!([1]));

    let report_path = dir.path().join("report.json");
    let out = run(ucdir()
        .arg("eval")
        .args(["--checkpoint", ckpt.to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--direction", "b2a"])
        .args(["--k", "1,3"])
        .arg("--per-query")
        .args(["--out", report_path.to_str().unwrap()]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let reports: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report_path).unwrap()).unwrap();
    assert_eq!(reports.as_array().unwrap().len(), 1);
    let report = &reports[0];
    assert_eq!(report["direction"], "b_to_a");
    assert_eq!(report["ks"], serde_json::json!([1, 3]));
    assert_eq!(report["per_query"].as_array().unwrap().len(), 15);
}

#[test]
fn cluster_dumps_centroids_assignments_and_inertia() {
    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());
    let run_dir = tiny_run(dir.path(), &data, "run", &[]);

    let out = run(ucdir()
        .arg("cluster")
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--checkpoint", run_dir.join("checkpoint.json").to_str().unwrap()])
        .args(["--domain", "b"])
        .args(["--k", "3"])
        .args(["--seed", "1"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(model["k"], 3);
    assert_eq!(model["domain"], "b");
    assert!(model["inertia"].as_f64().unwrap() >= 0.0);
    let centroids = model["centroids"].as_array().unwrap();
    assert_eq!(centroids.len(), 3);
    assert!(centroids.iter().all(|c| c.as_array().unwrap().len() == 16));
    assert_eq!(model["assignments"].as_array().unwrap().len(), 15);

    // Without a checkpoint a fresh seeded encoder embeds the samples.
    let out = run(ucdir()
        .arg("cluster")
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--domain", "a"])
        .args(["--k", "2"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let model: serde_json::Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(model["k"], 2);
    assert_eq!(model["domain"], "a");

    let out = run(ucdir()
        .arg("cluster")
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--domain", "c"]));
    assert_eq!(code(&out), 1);
}

#[test]
fn check_prints_one_line_per_property_and_summarizes() {
    let out = run(ucdir()
        .args(["--threads", "2"])
        .arg("check")
        .args(["--trials", "30"]));
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines.len() >= 15);
    assert!(lines.iter().all(|l| !l.starts_with("FAIL")));
    assert!(lines.last().unwrap().contains("properties passed"));

    let out = run(ucdir().arg("check").arg("--grad-only"));
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    let grads = text.lines().filter(|l| l.starts_with("PASS gradient-")).count();
    assert_eq!(grads, 5);
    assert!(text.lines().last().unwrap().contains("5 of 5"));
}

#[test]
fn missing_inputs_are_runtime_errors() {
    let dir = TempDir::new().unwrap();
    let absent = dir.path().join("absent.jsonl");
    let out = run(ucdir()
        .arg("train")
        .args(["--dataset", absent.to_str().unwrap()])
        .args(["--out", dir.path().join("run").to_str().unwrap()]));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("absent.jsonl"), "{}", stderr(&out));

    let out = run(ucdir()
        .arg("eval")
        .args(["--checkpoint", dir.path().join("absent.json").to_str().unwrap()])
        .args(["--dataset", absent.to_str().unwrap()]));
    assert_eq!(code(&out), 2);
}

#[test]
fn usage_errors_and_help_have_their_own_exit_codes() {
    let out = run(ucdir().arg("--help"));
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("generate"));

    let out = run(ucdir().arg("frobnicate"));
    assert_eq!(code(&out), 1);

    let out = run(ucdir().arg("train")); // --dataset and --out are required
    assert_eq!(code(&out), 1);

    let dir = TempDir::new().unwrap();
    let data = tiny_dataset(dir.path());
    let run_dir = tiny_run(dir.path(), &data, "run", &["--epochs", "1"]);
    let out = run(ucdir()
        .arg("eval")
        .args(["--checkpoint", run_dir.join("checkpoint.json").to_str().unwrap()])
        .args(["--dataset", data.to_str().unwrap()])
        .args(["--direction", "sideways"]));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("sideways"));

    let out = run(ucdir()
        .args(["--threads", "0"])
        .arg("check")
        .arg("--grad-only"));
    assert_eq!(code(&out), 1);
}
