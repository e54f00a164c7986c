//! End-to-end checks of the `fmqa` binary: each test drives real
//! subcommands in a temp directory and inspects files and stdout.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn fmqa(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fmqa"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn fmqa_ok(dir: &Path, args: &[&str]) -> String {
    let out = fmqa(dir, args);
    assert!(
        out.status.success(),
        "command {:?} failed:\n{}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).expect("utf8 stdout")
}

/// Generates a small ratings table and trains a model in `dir`,
/// returning the model path.
fn trained_fixture(dir: &Path) -> PathBuf {
    fmqa_ok(
        dir,
        &[
            "generate-data",
            "--users",
            "20",
            "--items",
            "50",
            "--ratings",
            "300",
            "--seed",
            "7",
            "--out",
            "ratings.csv",
        ],
    );
    fmqa_ok(
        dir,
        &[
            "train",
            "--ratings",
            "ratings.csv",
            "--k",
            "8",
            "--epochs",
            "3",
            "--seed",
            "7",
            "--out",
            "model.json",
        ],
    );
    dir.join("model.json")
}

#[test]
fn generate_data_is_deterministic_and_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let args = [
        "generate-data",
        "--users",
        "15",
        "--items",
        "40",
        "--ratings",
        "200",
        "--seed",
        "3",
        "--out",
        "a.csv",
    ];
    fmqa_ok(dir, &args);
    let mut again = args;
    again[args.len() - 1] = "b.csv";
    fmqa_ok(dir, &again);

    let a = std::fs::read_to_string(dir.join("a.csv")).unwrap();
    let b = std::fs::read_to_string(dir.join("b.csv")).unwrap();
    assert_eq!(a, b);
    assert!(a.starts_with("userId,movieId,rating,timestamp\n"));
    assert_eq!(a.lines().count(), 201);
    assert!(dir.join("a.csv.manifest.json").exists());
}

#[test]
fn train_writes_model_manifest_and_epoch_log() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fmqa_ok(
        dir,
        &[
            "generate-data",
            "--users",
            "20",
            "--items",
            "50",
            "--ratings",
            "300",
            "--seed",
            "7",
            "--out",
            "ratings.csv",
        ],
    );
    let stdout = fmqa_ok(
        dir,
        &[
            "train",
            "--ratings",
            "ratings.csv",
            "--k",
            "8",
            "--epochs",
            "3",
            "--holdout",
            "0.2",
            "--seed",
            "7",
            "--out",
            "model.json",
        ],
    );
    assert!(dir.join("model.json").exists());
    assert!(dir.join("model.json.manifest.json").exists());
    assert!(stdout.contains("user_bits=5"));
    assert!(stdout.contains("item_bits="));
    // epochs 0 through 3: the pre-training value plus one per pass
    for epoch in 0..=3 {
        assert!(stdout.contains(&format!("epoch={epoch} rmse=")), "{stdout}");
    }
    assert!(stdout.contains("holdout_rmse="));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.join("model.json.manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "train");
    assert_eq!(manifest["inputs"][0]["path"], "ratings.csv");
    assert_eq!(manifest["inputs"][0]["sha256"].as_str().unwrap().len(), 64);
}

#[test]
fn recommend_prints_exactly_the_requested_lines() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = trained_fixture(dir);
    let model = model.to_str().unwrap();
    let stdout = fmqa_ok(
        dir,
        &["recommend", "--model", model, "--user", "1", "--top", "5"],
    );
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines.len(), 5);
    for (rank, line) in lines.iter().enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), 3, "line {line:?}");
        assert_eq!(fields[0], (rank + 1).to_string());
        fields[1].parse::<u64>().expect("item id");
        fields[2].parse::<f64>().expect("rating");
    }

    let again = fmqa_ok(
        dir,
        &["recommend", "--model", model, "--user", "1", "--top", "5"],
    );
    assert_eq!(stdout, again);
}

#[test]
fn recommend_anneal_writes_samples_and_recommendations() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = trained_fixture(dir);
    fmqa_ok(
        dir,
        &[
            "recommend",
            "--model",
            model.to_str().unwrap(),
            "--user",
            "1",
            "--backend",
            "anneal",
            "--shots",
            "200",
            "--sweeps",
            "20",
            "--top",
            "5",
            "--out-dir",
            "rec",
        ],
    );
    let recs = std::fs::read_to_string(dir.join("rec/recommendations.csv")).unwrap();
    assert!(recs.starts_with("rank,item_index,item_id,predicted_rating,hits\n"));
    assert_eq!(recs.lines().count(), 6);
    let samples = std::fs::read_to_string(dir.join("rec/samples.csv")).unwrap();
    assert!(samples.contains("# shots 200"));
    assert!(samples.contains("state,energy,occurrences"));
    assert!(dir.join("rec/manifest.json").exists());
}

#[test]
fn recommend_rejects_an_unknown_user_id() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = trained_fixture(dir);
    let out = fmqa(
        dir,
        &[
            "recommend",
            "--model",
            model.to_str().unwrap(),
            "--user",
            "9999",
            "--top",
            "3",
        ],
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("9999"), "{stderr}");
}

#[test]
fn export_qubo_writes_both_problem_forms() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = trained_fixture(dir);
    let model = model.to_str().unwrap();
    fmqa_ok(
        dir,
        &["export-qubo", "--model", model, "--user", "1", "--out", "p.qubo"],
    );
    fmqa_ok(
        dir,
        &[
            "export-qubo",
            "--model",
            model,
            "--user",
            "1",
            "--ising",
            "--out",
            "p.ising",
        ],
    );
    let qubo = std::fs::read_to_string(dir.join("p.qubo")).unwrap();
    let ising = std::fs::read_to_string(dir.join("p.ising")).unwrap();
    assert!(qubo.starts_with("# offset "));
    assert!(ising.starts_with("# offset "));
    assert_ne!(qubo, ising);
    assert!(dir.join("p.qubo.manifest.json").exists());
}

#[test]
fn evaluate_overlap_with_exhaustive_sampler_is_total() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    let model = trained_fixture(dir);
    let stdout = fmqa_ok(
        dir,
        &[
            "evaluate-overlap",
            "--model",
            model.to_str().unwrap(),
            "--users",
            "4",
            "--ks",
            "5,10",
            "--sampler",
            "exhaustive",
            "--out-dir",
            "ov",
        ],
    );
    assert!(stdout.contains("k_s=5"));
    assert!(stdout.contains("k_s=10"));
    let summary = std::fs::read_to_string(dir.join("ov/overlap_summary.csv")).unwrap();
    assert_eq!(
        summary,
        "k_s,users,mean_overlap_percent\n5,4,100\n10,4,100\n"
    );
    let overlap = std::fs::read_to_string(dir.join("ov/overlap.csv")).unwrap();
    assert!(overlap.starts_with("user_index,user_id,k_s,n_sampled_items,overlap_percent\n"));
    // 4 users at each of 2 list lengths
    assert_eq!(overlap.lines().count(), 9);
}

#[test]
fn benchmark_times_every_backend_and_size() {
    let tmp = tempfile::tempdir().unwrap();
    let dir = tmp.path();
    fmqa_ok(
        dir,
        &[
            "benchmark",
            "--synthetic-items",
            "32,64",
            "--synthetic-users",
            "16",
            "--k",
            "8",
            "--users",
            "2",
            "--reps",
            "2",
            "--shots",
            "10",
            "--sweeps",
            "20",
            "--out-dir",
            "bench",
        ],
    );
    let bench = std::fs::read_to_string(dir.join("bench/bench.csv")).unwrap();
    assert!(bench.starts_with(
        "label,n_data,n_items,n_item_bits,backend,user_index,reps,median_seconds\n"
    ));
    // 2 sizes x 2 backends x 2 users
    assert_eq!(bench.lines().count(), 9);
    assert!(bench.contains("synthetic-32"));
    assert!(bench.contains("synthetic-64"));
    assert!(bench.contains(",direct,"));
    assert!(bench.contains(",anneal,"));
}
