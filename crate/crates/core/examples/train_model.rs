//! Trains every learner on one task, round-trips the models through JSON and
//! prints training accuracy and the top features where available.

use inkscreen::evaluation::{group_dataset, RowGroup};
use inkscreen::features::{extract_study, FeatureSet};
use inkscreen::kinematics::SmoothingConfig;
use inkscreen::learners::{train, ModelKind, ModelParams, TrainedModel};
use inkscreen::synthcohort::{generate_study, StudyRecipe};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let study = generate_study(&StudyRecipe {
        n_per_cohort: 20,
        tasks: vec![2],
        ..StudyRecipe::default()
    })?;
    let (tables, _) = extract_study(&study, &SmoothingConfig::default());
    let data = group_dataset(&tables[&FeatureSet::P], RowGroup::Task(2))?;

    for kind in [ModelKind::DT, ModelKind::RF, ModelKind::SVM, ModelKind::MLP, ModelKind::GBT] {
        let params = match ModelParams::default_for(kind) {
            ModelParams::MLP(mut p) => {
                p.epochs = 100;
                ModelParams::MLP(p)
            }
            other => other.with_seed(3),
        };
        let model = train(&params, &data)?;
        let restored = TrainedModel::from_json(&model.to_json()?)?;
        let hits = (0..data.n_samples())
            .filter(|&i| restored.predict_row(data.row(i)).label == data.label(i))
            .count();
        print!("{kind:<4} train accuracy {:>6.2}%", 100.0 * hits as f64 / data.n_samples() as f64);
        if let Ok(mut imp) = restored.feature_importance() {
            imp.sort_by(|a, b| b.1.total_cmp(&a.1));
            print!("  top: {} ({:.2})", imp[0].0, imp[0].1);
        }
        println!();
    }
    Ok(())
}
