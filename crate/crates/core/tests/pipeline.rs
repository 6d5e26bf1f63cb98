//! Command-line pipeline behaviour on small synthetic studies.

mod common;

use std::path::Path;

use common::cli;
use inkscreen::evaluation::{cross_validate, make_folds};
use inkscreen::learners::{DtParams, ModelKind, ModelParams};
use inkscreen::selection::{rfe_select, RfeConfig};
use inkscreen::synthcohort::Manifest;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn synth_small(root: &Path, seed: &str) -> std::path::PathBuf {
    let recipe = root.join("recipe.toml");
    std::fs::write(&recipe, "n_per_cohort = 2\n").unwrap();
    let study = root.join("study");
    assert_eq!(cli(&["synth", "--recipe", s(&recipe), "--out", s(&study), "--seed", seed]), 0);
    study
}

#[test]
fn synth_writes_one_file_per_recording_and_a_stable_manifest() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let study_a = synth_small(a.path(), "5");
    let study_b = synth_small(b.path(), "5");
    let recordings = std::fs::read_dir(&study_a)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().contains("_task"))
        .count();
    assert_eq!(recordings, 24);
    let read = |d: &Path| -> Manifest { serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap() };
    let (ma, mb) = (read(&study_a), read(&study_b));
    assert_eq!(ma.recipe_digest, mb.recipe_digest);
    assert_eq!(ma.recipe.seed, 5);
    assert_eq!(common::read_tree(&study_a), common::read_tree(&study_b));

    let c = tempfile::tempdir().unwrap();
    let study_c = synth_small(c.path(), "6");
    assert_ne!(read(&study_c).recipe_digest, ma.recipe_digest);
}

#[test]
fn extract_writes_three_tables_and_is_repeatable() {
    let root = tempfile::tempdir().unwrap();
    let study = synth_small(root.path(), "8");
    let out = root.path().join("out");
    let args = ["--study-dir", s(&study), "--out-dir", s(&out), "extract"];
    assert_eq!(cli(&args), 0);
    let first = common::read_tree(&out);
    for (set, width) in [("A", 25), ("P", 26), ("AL", 47)] {
        let text = std::fs::read_to_string(out.join(format!("features/features_{set}.csv"))).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + 4 * 6, "{set}");
        assert_eq!(lines[0].split(',').count(), width + 3, "{set}");
    }
    assert_eq!(cli(&args), 0);
    assert_eq!(common::read_tree(&out), first);
}

#[test]
fn unknown_recipe_field_is_a_parse_error() {
    let root = tempfile::tempdir().unwrap();
    let recipe = root.path().join("recipe.toml");
    std::fs::write(&recipe, "n_per_cohort = 2\n[profiles.AD]\ntremor_amp = 1.0\n").unwrap();
    let out = root.path().join("study");
    assert_eq!(cli(&["synth", "--recipe", s(&recipe), "--out", s(&out)]), 2);
    assert!(!out.join("manifest.json").exists());
}

#[test]
fn out_of_range_recipe_value_is_rejected() {
    let root = tempfile::tempdir().unwrap();
    let recipe = root.path().join("recipe.toml");
    std::fs::write(&recipe, "[profiles.HC]\ntremor_freq = 40.0\n").unwrap();
    assert_ne!(cli(&["synth", "--recipe", s(&recipe), "--out", s(&root.path().join("x"))]), 0);
}

#[test]
fn validate_accepts_a_clean_study_and_flags_a_corrupted_one() {
    let root = tempfile::tempdir().unwrap();
    let study = synth_small(root.path(), "9");
    assert_eq!(cli(&["--study-dir", s(&study), "validate"]), 0);

    let path = study.join("HC001_task3.csv");
    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(3, 8);
    std::fs::write(&path, lines.join("\n") + "\n").unwrap();
    assert_eq!(cli(&["--study-dir", s(&study), "validate"]), 3);
}

#[test]
fn a_missing_recording_leaves_a_shorter_table() {
    let root = tempfile::tempdir().unwrap();
    let study = synth_small(root.path(), "10");
    std::fs::remove_file(study.join("AD002_task5.csv")).unwrap();
    assert_eq!(cli(&["--study-dir", s(&study), "validate"]), 0);
    let out = root.path().join("out");
    assert_eq!(cli(&["--study-dir", s(&study), "--out-dir", s(&out), "extract"]), 0);
    let text = std::fs::read_to_string(out.join("features/features_P.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 4 * 6 - 1);
}

#[test]
fn experiment_without_features_fails_with_execution_code() {
    let root = tempfile::tempdir().unwrap();
    let out = root.path().join("out");
    assert_eq!(cli(&["--out-dir", s(&out), "--seed", "1", "experiment", "--mode", "single"]), 4);
}

#[test]
fn experiment_requires_a_seed() {
    let root = tempfile::tempdir().unwrap();
    let study = synth_small(root.path(), "11");
    let out = root.path().join("out");
    assert_eq!(cli(&["--study-dir", s(&study), "--out-dir", s(&out), "extract"]), 0);
    assert_ne!(cli(&["--out-dir", s(&out), "experiment", "--mode", "merged"]), 0);
}

#[test]
fn selection_on_a_planted_feature_does_not_hurt_the_decision_tree() {
    let rfe = RfeConfig {
        wrapper: ModelKind::DT,
        ..RfeConfig::default()
    };
    for seed in 0..5u64 {
        let data = common::planted(500 + seed, 120, 8);
        let plan = make_folds(&data, 5, true, true, seed).unwrap();
        let dt = ModelParams::DT(DtParams::default());
        let before = cross_validate(&dt, &data, &plan, seed).unwrap().mean_accuracy().unwrap();
        let trace = rfe_select(&data, &dt, &plan, &rfe, seed).unwrap();
        let after = cross_validate(&dt, &data.project(&trace.best_subset).unwrap(), &plan, seed)
            .unwrap()
            .mean_accuracy()
            .unwrap();
        assert!(after >= before, "seed {seed}: {after} < {before}");
        assert!(trace.best_subset.iter().any(|f| f == "f0"));
    }
}

#[test]
fn full_pipeline_writes_every_artefact() {
    let root = tempfile::tempdir().unwrap();
    let out = common::run_pipeline(root.path());
    for rel in [
        "features/features_A.csv",
        "features/extraction_log.csv",
        "experiment/single_cells.csv",
        "experiment/merged_table.md",
        "experiment/merged_report.json",
        "selection/traces.json",
        "selection/histogram_NW.svg",
        "report/report.md",
    ] {
        assert!(out.join(rel).exists(), "{rel} missing");
    }
    let cells = std::fs::read_to_string(out.join("experiment/single_cells.csv")).unwrap();
    assert_eq!(cells.lines().count(), 1 + 72);
    let traces = std::fs::read_dir(out.join("selection/traces")).unwrap().count();
    assert_eq!(traces, 18);
}
