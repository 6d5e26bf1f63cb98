//! Helpers shared by the integration test targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use inkscreen::learners::Dataset;
use inkscreen::seed;
use rand::Rng;

/// Small study with a mild AD profile so accuracy tables are not saturated.
pub const RECIPE: &str = r#"
n_per_cohort = 6
seed = 2024
tasks = [1, 2, 3, 4, 5, 6]

[profiles.HC]
base_speed = 1.0

[profiles.AD]
base_speed = 0.85
jerk_gain = 1.6
"#;

/// Cheap learner settings; every field not named keeps its default.
pub const RUN_CONFIG: &str = r#"
seed = 77

[folds]
k = 4

[params.rf]
n_trees = 15

[params.mlp]
epochs = 30

[params.gbt]
n_rounds = 20

[rfe]
wrapper = "DT"
"#;

pub fn cli(args: &[&str]) -> i32 {
    inkscreen::cli::run(std::iter::once("inkscreen").chain(args.iter().copied()))
}

/// Runs synth, extract, both experiments, select and report under `root`
/// and returns the output directory.
pub fn run_pipeline(root: &Path) -> PathBuf {
    let recipe = root.join("recipe.toml");
    let config = root.join("run.toml");
    std::fs::write(&recipe, RECIPE).unwrap();
    std::fs::write(&config, RUN_CONFIG).unwrap();
    let study = root.join("study");
    let out = root.join("out");
    let (c, s, o) = (config.to_str().unwrap(), study.to_str().unwrap(), out.to_str().unwrap());
    let base = ["--config", c, "--study-dir", s, "--out-dir", o];
    let steps: [&[&str]; 6] = [
        &["synth", "--recipe", recipe.to_str().unwrap()],
        &["extract"],
        &["experiment", "--mode", "single"],
        &["experiment", "--mode", "merged"],
        &["select"],
        &["report"],
    ];
    for step in steps {
        let mut args: Vec<&str> = base.to_vec();
        args.extend_from_slice(step);
        assert_eq!(cli(&args), 0, "step {step:?} failed");
    }
    out
}

/// Every file under `dir`, keyed by its relative path.
pub fn read_tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                out.insert(path.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    out
}

/// `f0` equals the label and `f1..` are uniform noise; each sample is its
/// own participant.
pub fn planted(seed_value: u64, n: usize, d: usize) -> Dataset {
    let mut rng = seed::rng(seed_value);
    let mut rows = Vec::with_capacity(n);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let label = u8::from(i % 2 == 1);
        let mut row = vec![f64::from(label)];
        row.extend((1..d).map(|_| rng.random_range(0.0..1.0)));
        rows.push(row);
        labels.push(label);
    }
    let names = (0..d).map(|j| format!("f{j}")).collect();
    let groups = (0..n).map(|i| format!("s{i:03}")).collect();
    Dataset::new(rows, names, labels, groups, vec![1; n]).unwrap()
}
