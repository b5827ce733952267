//! Black-box tests against the built binary: exit codes, idempotence,
//! config echo, and the documented subcommand surface.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ccfs() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ccfs"))
}

fn write_config(dir: &Path, mode: &str, out_dir: &Path) -> std::path::PathBuf {
    let text = format!(
        "\
[data]
source = blobs
classes = 4
per_class = 60
dim = 2
center_spread = 5.0
noise_std = 1.0
seed = 2
test_per_class = 20

[scores]
source = forgetting
runs = 1
epochs = 10
batch_size = 64
base_lr = 0.1
momentum = 0.9
weight_decay = 0.0005
schedule = cosine
augmentation = none
seed = 3

[selection]
mode = {mode}
ipc = 6
distill_portion = 0.25
phases = 3
window_start = 0.5
coarse = misclassified
fine = simplest
backfill = easiest_remaining
seed = 0

[filter]
arch = mlp
hidden = 12
init_seed = 5
epochs = 12
batch_size = 32
base_lr = 0.1
momentum = 0.9
weight_decay = 0.0005
schedule = cosine
augmentation = none
seed = 7

[evaluation]
arch = mlp
hidden = 12
init_seed = 9
epochs = 20
batch_size = 32
base_lr = 0.1
momentum = 0.9
weight_decay = 0.0005
schedule = cosine
augmentation = none
seed = 11
seeds = 2

[pipeline]
out_dir = {}
",
        out_dir.display()
    );
    let path = dir.join("run.conf");
    fs::write(&path, text).unwrap();
    path
}

fn assert_success(output: &Output) {
    assert!(
        output.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn scores_command_writes_n_records_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "self_evolved", dir.path());
    let out = dir.path().join("scores.csv");
    let run = || {
        let output = ccfs()
            .args(["scores", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&out)
            .output()
            .unwrap();
        assert_success(&output);
        fs::read(&out).unwrap()
    };
    let first = run();
    let text = String::from_utf8(first.clone()).unwrap();
    // Header + one record per training sample (holdout was carved out of
    // the blob train split of 240; no test? test_per_class=20 so a test
    // split exists and train stays 240).
    assert_eq!(text.lines().count(), 1 + 240);
    assert!(text.starts_with("index,score\n"));
    let second = run();
    assert_eq!(first, second);
}

#[test]
fn unknown_key_exits_2_and_names_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "self_evolved", dir.path());
    let text = fs::read_to_string(&config)
        .unwrap()
        .replace("epochs = 10", "epoch = 10");
    fs::write(&config, text).unwrap();
    let output = ccfs()
        .args(["scores", "--config"])
        .arg(&config)
        .args(["--out", "/tmp/unused.csv"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("epoch"), "stderr: {stderr}");
}

#[test]
fn select_writes_manifest_with_phase_blocks_and_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "self_evolved", &out_dir);
    let output = ccfs()
        .args(["self-evolve", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_success(&output);
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("[phase 1]"));
    assert!(manifest.contains("[phase 2]"));
    assert!(manifest.contains("[phase 3]"));

    let first = fs::read(out_dir.join("manifest.txt")).unwrap();
    let first_coreset = fs::read(out_dir.join("coreset.cpts")).unwrap();
    let output = ccfs()
        .args(["self-evolve", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_success(&output);
    assert_eq!(first, fs::read(out_dir.join("manifest.txt")).unwrap());
    assert_eq!(first_coreset, fs::read(out_dir.join("coreset.cpts")).unwrap());
}

#[test]
fn strategy_flag_is_echoed_in_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "self_evolved", &out_dir);
    let output = ccfs()
        .args(["self-evolve", "--config"])
        .arg(&config)
        .args(["--strategy", "hardest-classified"])
        .output()
        .unwrap();
    assert_success(&output);
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("fine = hardest"), "{manifest}");
    assert!(manifest.contains("coarse = classified"), "{manifest}");
}

#[test]
fn set_flag_overrides_config_key() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "self_evolved", &out_dir);
    let output = ccfs()
        .args(["self-evolve", "--config"])
        .arg(&config)
        .args(["--set", "selection.ipc=4"])
        .output()
        .unwrap();
    assert_success(&output);
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("ipc = 4"), "{manifest}");
}

#[test]
fn out_dir_env_var_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let config_out = dir.path().join("from_config");
    let env_out = dir.path().join("from_env");
    let config = write_config(dir.path(), "self_evolved", &config_out);
    let output = ccfs()
        .env("CCFS_OUT_DIR", &env_out)
        .args(["self-evolve", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_success(&output);
    assert!(env_out.join("manifest.txt").exists());
    assert!(!config_out.exists());
}

#[test]
fn evaluate_without_coreset_path_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "self_evolved", dir.path());
    let output = ccfs()
        .args(["evaluate", "--config"])
        .arg(&config)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&output.stderr);
    assert!(stderr.contains("coreset"), "stderr: {stderr}");
}

#[test]
fn evaluate_reports_per_seed_accuracies() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "self_evolved", &out_dir);
    assert_success(&ccfs().args(["self-evolve", "--config"]).arg(&config).output().unwrap());
    let output = ccfs()
        .args(["evaluate", "--config"])
        .arg(&config)
        .arg("--coreset")
        .arg(out_dir.join("coreset.cpts"))
        .output()
        .unwrap();
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("accuracy ="), "{stdout}");
    assert!(stdout.contains("seed 0:"), "{stdout}");
    assert!(stdout.contains("seed 1:"), "{stdout}");
}

#[test]
fn compare_settings_emits_three_setting_sections() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "curriculum", &out_dir);
    let table = dir.path().join("table.txt");
    let output = ccfs()
        .args(["compare-settings", "--config"])
        .arg(&config)
        .args(["--set", "pipeline.betas=0.5"])
        .arg("--out")
        .arg(&table)
        .output()
        .unwrap();
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    for section in ["[one_shot]", "[two_shot]", "[reverse]"] {
        assert!(stdout.contains(section), "{stdout}");
    }
    // Exactly one beta column.
    assert_eq!(stdout.matches("beta_0.5").count(), 3);
    // Surrogate disclaimer in the header.
    assert!(stdout.contains("not optimization-based distillation"), "{stdout}");
    assert_eq!(fs::read_to_string(&table).unwrap(), stdout);
}

#[test]
fn analyze_recomputes_phase_stats_from_manifest_and_scores() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "self_evolved", &out_dir);
    assert_success(&ccfs().args(["self-evolve", "--config"]).arg(&config).output().unwrap());
    let scores = dir.path().join("scores.csv");
    assert_success(
        &ccfs()
            .args(["scores", "--config"])
            .arg(&config)
            .arg("--out")
            .arg(&scores)
            .output()
            .unwrap(),
    );
    let output = ccfs()
        .arg("analyze")
        .arg("--manifest")
        .arg(out_dir.join("manifest.txt"))
        .arg("--scores")
        .arg(&scores)
        .output()
        .unwrap();
    assert_success(&output);
    let stdout = String::from_utf8_lossy(&output.stdout);
    assert!(stdout.contains("[phase_analysis]"), "{stdout}");
    assert!(stdout.contains("mean_difficulty_increasing"), "{stdout}");
    assert!(stdout.contains("[phase 3]"), "{stdout}");
}

#[test]
fn analyze_with_wrong_score_length_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "self_evolved", &out_dir);
    assert_success(&ccfs().args(["self-evolve", "--config"]).arg(&config).output().unwrap());
    let scores = dir.path().join("short.csv");
    fs::write(&scores, "index,score\n0,1.0\n").unwrap();
    let output = ccfs()
        .arg("analyze")
        .arg("--manifest")
        .arg(out_dir.join("manifest.txt"))
        .arg("--scores")
        .arg(&scores)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(2));
}

#[test]
fn gen_blobs_and_surrogate_distill_produce_loadable_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "curriculum", dir.path());
    let train = dir.path().join("train.cpts");
    let test = dir.path().join("test.cpts");
    assert_success(
        &ccfs()
            .args(["gen-blobs", "--config"])
            .arg(&config)
            .arg("--out-train")
            .arg(&train)
            .arg("--out-test")
            .arg(&test)
            .output()
            .unwrap(),
    );
    let train_set = ccfs_core::data::load_packed(&train).unwrap();
    assert_eq!(train_set.len(), 4 * 60);
    assert_eq!(ccfs_core::data::load_packed(&test).unwrap().len(), 4 * 20);

    let distilled = dir.path().join("distilled.cpts");
    assert_success(
        &ccfs()
            .args(["surrogate-distill", "--config"])
            .arg(&config)
            .args(["--per-class", "3", "--iterations", "5", "--seed", "1"])
            .arg("--out")
            .arg(&distilled)
            .output()
            .unwrap(),
    );
    // Surrogate is built on the holdout-resolved training universe; the
    // blob config has its own test split, so train stays 240: 3 x 4 = 12.
    assert_eq!(ccfs_core::data::load_packed(&distilled).unwrap().len(), 12);
}

#[test]
fn curriculum_with_packed_distilled_runs_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let config = write_config(dir.path(), "curriculum", &out_dir);
    // distill_portion 0.25 of ipc 6 over 4 classes: 0.25*24 = 6 records
    // total, not divisible by 4 per class... use 2 per class via portion
    // 1/3: ceil(0.3333*24)=8 -> 2 per class.
    let distilled = dir.path().join("distilled.cpts");
    assert_success(
        &ccfs()
            .args(["surrogate-distill", "--config"])
            .arg(&config)
            .args(["--per-class", "2", "--iterations", "5", "--seed", "1"])
            .arg("--out")
            .arg(&distilled)
            .output()
            .unwrap(),
    );
    let output = ccfs()
        .args(["select", "--config"])
        .arg(&config)
        .args(["--set", "selection.distill_portion=0.3333333333333333"])
        .args(["--set", "pipeline.distilled=packed"])
        .arg("--set")
        .arg(format!("pipeline.distilled_path={}", distilled.display()))
        .output()
        .unwrap();
    assert_success(&output);
    let manifest = fs::read_to_string(out_dir.join("manifest.txt")).unwrap();
    assert!(manifest.contains("source = packed"), "{manifest}");
    let coreset = ccfs_core::data::load_packed(&out_dir.join("coreset.cpts")).unwrap();
    assert_eq!(coreset.len(), 24);
}
