//! Injects one pathology at a time into the AD cohort and reports the
//! largest feature effect sizes (Cohen's d, AD minus HC).

use inkscreen::features::{extract_study, FeatureSet};
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::synthcohort::{generate_study, pathology_contrast, CohortProfile, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let base = CohortProfile::default();
    let scenarios = [
        ("jerk gain x3", CohortProfile { jerk_gain: 3.0, ..base.clone() }),
        ("half speed", CohortProfile { base_speed: 0.5, ..base.clone() }),
        ("tremor 3 units at 6 Hz", CohortProfile { tremor_amplitude: 3.0, ..base.clone() }),
        ("slow in-air movement", CohortProfile { air_speed_factor: 0.5, ..base.clone() }),
    ];
    for (label, ad) in scenarios {
        let mut recipe = StudyRecipe {
            n_per_cohort: 20,
            tasks: vec![1, 5],
            ..StudyRecipe::default()
        };
        recipe.profiles.hc = base.clone();
        recipe.profiles.ad = ad;
        let study = generate_study(&recipe)?;
        let (tables, _) = extract_study(&study, &SmoothingConfig::default());
        let al = &tables[&FeatureSet::AL];
        let mut effects = al
            .names
            .iter()
            .map(|n| Ok((n.clone(), pathology_contrast(&al.rows, n)?)))
            .collect::<Result<Vec<_>, inkscreen::Error>>()?;
        effects.sort_by(|a, b| b.1.abs().total_cmp(&a.1.abs()));
        println!("{label}");
        for (name, d) in effects.iter().take(4) {
            println!("  {name:<42} d = {d:+.2}");
        }
    }
    Ok(())
}
