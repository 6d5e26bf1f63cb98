//! Builds stratified, participant-grouped folds for one task and
//! cross-validates a decision tree.

use inkscreen::evaluation::{cross_validate, group_dataset, make_folds, RowGroup};
use inkscreen::features::{extract_study, FeatureSet};
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::learners::{ModelKind, ModelParams};
use inkscreen::synthcohort::{generate_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let study = generate_study(&StudyRecipe {
        n_per_cohort: 30,
        tasks: vec![3, 4],
        ..StudyRecipe::default()
    })?;
    let (tables, _) = extract_study(&study, &SmoothingConfig::default());
    let data = group_dataset(&tables[&FeatureSet::A], RowGroup::Task(3))?;

    let plan = make_folds(&data, 10, true, true, 42)?;
    println!("fold sizes {:?}", plan.fold_sizes());
    for w in &plan.warnings {
        println!("warning: {w}");
    }
    let result = cross_validate(&ModelParams::default_for(ModelKind::DT), &data, &plan, 42)?;
    for f in &result.folds {
        println!("fold {:>2}: {:?}", f.fold, f.accuracy);
    }
    println!("mean accuracy {:.2}%, confusion {:?}", result.mean_accuracy().unwrap_or(f64::NAN), result.confusion());
    Ok(())
}
