//! Generates a small synthetic study on disk and prints its manifest.
//!
//! ```text
//! cargo run --example synth_study -- /tmp/study
//! ```

use std::path::PathBuf;

use inkscreen::ink_model::{validate_study, Study, StatusRule};
use inkscreen::synthcohort::{write_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| std::env::temp_dir().join("inkscreen-synth-example"));
    std::fs::create_dir_all(&dir)?;

    let recipe = StudyRecipe {
        n_per_cohort: 5,
        seed: 11,
        ..StudyRecipe::default()
    };
    println!("recipe:\n{}", recipe.to_toml());
    let manifest = write_study(&recipe, &dir)?;
    println!("{} files in {}, recipe digest {}", manifest.files.len(), dir.display(), manifest.recipe_digest);

    let (study, log) = Study::load(&dir, StatusRule::default())?;
    let report = validate_study(&study.recordings, &study.participants);
    println!("reloaded {} recordings, {} load failures, {} issues", study.recordings.len(), log.failures.len(), report.issues.len());
    Ok(())
}
