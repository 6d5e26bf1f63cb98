//! Recursive feature elimination on every task and feature set, the
//! post-selection grid, and the AL occurrence histograms as SVG.

use std::collections::BTreeMap;

use inkscreen::evaluation::{ExperimentConfig, RowGroup};
use inkscreen::features::{extract_study, FeatureSet};
use inkscreen::ink_model::Category;
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::learners::ModelKind;
use inkscreen::report::{histogram_svg, render_markdown, TableKind};
use inkscreen::selection::{evaluate_selected, occurrence_histogram, run_selection, RfeConfig};
use inkscreen::synthcohort::{generate_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let study = generate_study(&StudyRecipe {
        n_per_cohort: 15,
        ..StudyRecipe::default()
    })?;
    let (tables, _) = extract_study(&study, &SmoothingConfig::default());
    let config = ExperimentConfig {
        classifiers: vec![ModelKind::DT],
        seed: 9,
        ..ExperimentConfig::default()
    };
    // a decision-tree wrapper keeps the example quick
    let rfe = RfeConfig {
        wrapper: ModelKind::DT,
        ..RfeConfig::default()
    };
    let traces = run_selection(&tables, &config, &rfe)?;
    for ((group, set), t) in &traces {
        println!(
            "task {} {set}: {} of {} features, {:.2}% after {} evaluations",
            group.task_label(),
            t.best_subset.len(),
            t.features.len(),
            t.best_accuracy,
            t.evaluations
        );
    }

    let subsets = traces.iter().map(|(k, t)| (*k, t.best_subset.clone())).collect();
    println!("\n{}", render_markdown(&evaluate_selected(&tables, &subsets, &config)?, TableKind::Selected));

    let al: BTreeMap<u8, _> = traces
        .iter()
        .filter_map(|((g, s), t)| match (g, s) {
            (RowGroup::Task(id), FeatureSet::AL) => Some((*id, t.clone())),
            _ => None,
        })
        .collect();
    let dir = std::env::temp_dir().join("inkscreen-selection-example");
    std::fs::create_dir_all(&dir)?;
    for c in Category::ALL {
        let h = occurrence_histogram(&al, c)?;
        let path = dir.join(format!("histogram_{c}.svg"));
        std::fs::write(&path, histogram_svg(&h))?;
        println!("{c}: {} selections -> {}", h.total(), path.display());
    }
    Ok(())
}
