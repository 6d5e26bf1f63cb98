//! Runs the single-task and merged-task grids on a synthetic study and prints
//! both markdown tables.

use inkscreen::evaluation::{run_merged_experiment, run_single_task_experiment, ExperimentConfig};
use inkscreen::features::extract_study;
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::learners::ModelKind;
use inkscreen::report::{render_markdown, TableKind};
use inkscreen::synthcohort::{generate_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let study = generate_study(&StudyRecipe {
        n_per_cohort: 30,
        ..StudyRecipe::default()
    })?;
    let (tables, _) = extract_study(&study, &SmoothingConfig::default());

    let mut config = ExperimentConfig {
        classifiers: vec![ModelKind::DT, ModelKind::RF, ModelKind::SVM, ModelKind::MLP],
        seed: 5,
        ..ExperimentConfig::default()
    };
    config.params.rf.n_trees = 30;
    config.params.mlp.epochs = 60;

    let single = run_single_task_experiment(&tables, &config);
    println!("{}", render_markdown(&single, TableKind::Single));
    let merged = run_merged_experiment(&tables, &config);
    println!("{}", render_markdown(&merged, TableKind::Merged));
    Ok(())
}
