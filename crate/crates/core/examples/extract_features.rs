//! Extracts the A, P and AL feature tables of a synthetic study and writes
//! them as CSV.

use inkscreen::features::{extract_study, FeatureSet};
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::synthcohort::{generate_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let study = generate_study(&StudyRecipe {
        n_per_cohort: 4,
        ..StudyRecipe::default()
    })?;
    let (tables, failures) = extract_study(&study, &SmoothingConfig::default());
    println!("{} recordings, {} extraction failures", study.recordings.len(), failures.len());

    let dir = std::env::temp_dir().join("inkscreen-features-example");
    std::fs::create_dir_all(&dir)?;
    for (set, table) in &tables {
        let path = dir.join(format!("features_{set}.csv"));
        table.save(&path)?;
        println!("{set}: {} rows x {} features -> {}", table.rows.len(), table.names.len(), path.display());
    }

    let first = &tables[&FeatureSet::AL].rows[0];
    println!("\n{} task {} ({})", first.participant_id, first.task_id, first.label);
    for (name, value) in first.names.iter().zip(&first.values).take(8) {
        println!("  {name:<40} {value:>12.4}");
    }
    Ok(())
}
