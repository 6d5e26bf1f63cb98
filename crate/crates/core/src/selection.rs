//! Recursive feature elimination and feature occurrence histograms.
//!
//! In wrapper mode each iteration scores every `S \ {f}` by cross-validated
//! accuracy of the wrapper model and drops the `f` whose removal scores best.
//! A full run from `d` features down to one costs `d + (d-1) + ... + 2`
//! evaluations. The full set itself is not scored. Importance mode instead
//! drops the feature the wrapper ranks least important, scoring one subset
//! per iteration.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluation::{
    cross_validate, evaluate_cell, fold_seed, group_dataset, make_folds, run_grid, CellOutcome, EvalReport,
    ExperimentConfig, FoldPlan, Mode, RowGroup,
};
use crate::features::{FeatureGroup, FeatureSet, FeatureTable};
use crate::ink_model::Category;
use crate::learners::{train, Dataset, ModelKind, ModelParams};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RfeMode {
    Wrapper,
    Importance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfeConfig {
    pub wrapper: ModelKind,
    pub mode: RfeMode,
    /// Hold out one outer fold, select on the rest, and score the selected
    /// subset on the held-out samples.
    pub honest: bool,
}

impl Default for RfeConfig {
    fn default() -> Self {
        RfeConfig {
            wrapper: ModelKind::GBT,
            mode: RfeMode::Wrapper,
            honest: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub iteration: usize,
    pub removed: Option<String>,
    pub subset: Vec<String>,
    /// `None` for the unscored starting set.
    pub accuracy: Option<f64>,
    /// Every fold of this subset's evaluation failed; scored as 0.
    pub failed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionTrace {
    pub features: Vec<String>,
    pub elimination_order: Vec<String>,
    pub steps: Vec<TraceStep>,
    pub best_subset: Vec<String>,
    pub best_accuracy: f64,
    pub evaluations: usize,
    pub wrapper_kind: ModelKind,
    pub mode: RfeMode,
    pub seed: u64,
    /// Held-out accuracy of the best subset in honest mode.
    pub holdout_accuracy: Option<f64>,
}

impl SelectionTrace {
    /// Accuracy per subset size, for the scored subsets.
    pub fn subset_accuracies(&self) -> BTreeMap<usize, f64> {
        self.steps
            .iter()
            .filter_map(|s| s.accuracy.map(|a| (s.subset.len(), a)))
            .collect()
    }

    /// Columns: `iteration,removed,subset_size,accuracy`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["iteration", "removed", "subset_size", "accuracy"]).map_err(err)?;
        for s in &self.steps {
            w.write_record([
                s.iteration.to_string(),
                s.removed.clone().unwrap_or_default(),
                s.subset.len().to_string(),
                s.accuracy.map(|a| format!("{a:.4}")).unwrap_or_default(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }
}

struct Scored {
    accuracy: f64,
    failed: bool,
}

fn score(data: &Dataset, subset: &[String], wrapper: &ModelParams, plan: &FoldPlan, seed_value: u64) -> Result<Scored> {
    let projected = data.project(subset)?;
    let r = cross_validate(wrapper, &projected, plan, seed_value)?;
    Ok(match r.mean_accuracy() {
        Some(accuracy) => Scored { accuracy, failed: false },
        None => Scored { accuracy: 0.0, failed: true },
    })
}

/// Names sorted, so that subsets compare lexicographically.
fn sorted(names: &[String]) -> Vec<String> {
    let mut v = names.to_vec();
    v.sort();
    v
}

/// Backward elimination from all features of `data` down to one.
pub fn rfe_select(
    data: &Dataset,
    wrapper: &ModelParams,
    plan: &FoldPlan,
    config: &RfeConfig,
    seed_value: u64,
) -> Result<SelectionTrace> {
    if data.n_features() < 2 {
        return Err(Error::Validation("d >= 2 required for feature elimination".into()));
    }
    if wrapper.kind() != config.wrapper {
        return Err(Error::Config(format!(
            "wrapper params are for {} but the config names {}",
            wrapper.kind(),
            config.wrapper
        )));
    }
    let mut current = data.names.clone();
    let mut steps = vec![TraceStep {
        iteration: 0,
        removed: None,
        subset: current.clone(),
        accuracy: None,
        failed: false,
    }];
    let mut elimination_order = Vec::new();
    let mut evaluations = 0;

    while current.len() > 1 {
        let (removed, scored) = match config.mode {
            RfeMode::Wrapper => {
                let trials: Vec<(String, Scored)> = current
                    .par_iter()
                    .map(|f| {
                        let subset: Vec<String> = current.iter().filter(|g| *g != f).cloned().collect();
                        score(data, &subset, wrapper, plan, seed_value).map(|s| (f.clone(), s))
                    })
                    .collect::<Result<_>>()?;
                evaluations += trials.len();
                // highest accuracy; ties remove the lexicographically last name
                trials
                    .into_iter()
                    .max_by(|a, b| a.1.accuracy.total_cmp(&b.1.accuracy).then(a.0.cmp(&b.0)))
                    .unwrap()
            }
            RfeMode::Importance => {
                let projected = data.project(&current)?;
                let model = train(&wrapper.with_seed(seed_value), &projected)?;
                let worst = model
                    .feature_importance()?
                    .into_iter()
                    .min_by(|a, b| a.1.total_cmp(&b.1).then(b.0.cmp(&a.0)))
                    .unwrap()
                    .0;
                let subset: Vec<String> = current.iter().filter(|g| **g != worst).cloned().collect();
                evaluations += 1;
                let s = score(data, &subset, wrapper, plan, seed_value)?;
                (worst, s)
            }
        };
        if scored.failed {
            log::warn!("wrapper failed on every fold without {removed}; subset scored 0");
        }
        current.retain(|g| *g != removed);
        elimination_order.push(removed.clone());
        steps.push(TraceStep {
            iteration: steps.len(),
            removed: Some(removed),
            subset: current.clone(),
            accuracy: Some(scored.accuracy),
            failed: scored.failed,
        });
    }

    // best accuracy; ties prefer the smaller subset, then lexicographic order
    let best = steps
        .iter()
        .filter(|s| s.accuracy.is_some())
        .min_by(|a, b| {
            b.accuracy
                .unwrap()
                .total_cmp(&a.accuracy.unwrap())
                .then(a.subset.len().cmp(&b.subset.len()))
                .then_with(|| sorted(&a.subset).cmp(&sorted(&b.subset)))
        })
        .expect("at least one subset is scored");
    Ok(SelectionTrace {
        features: data.names.clone(),
        elimination_order,
        best_subset: best.subset.clone(),
        best_accuracy: best.accuracy.unwrap(),
        steps,
        evaluations,
        wrapper_kind: config.wrapper,
        mode: config.mode,
        seed: seed_value,
        holdout_accuracy: None,
    })
}

/// Selection on all folds but one outer fold, then the selected subset is
/// trained on those folds and scored on the held-out one.
pub fn rfe_select_honest(
    data: &Dataset,
    wrapper: &ModelParams,
    config: &RfeConfig,
    k: usize,
    group_aware: bool,
    seed_value: u64,
) -> Result<SelectionTrace> {
    let outer = make_folds(data, k, true, group_aware, seed::derive(seed_value, &["outer"]))?;
    let inner_data = data.subset(&outer.train_indices(0));
    let held_out = data.subset(&outer.test_indices(0));
    let inner = make_folds(&inner_data, k.min(inner_data.n_samples()), true, group_aware, seed::derive(seed_value, &["inner"]))?;
    let mut trace = rfe_select(&inner_data, wrapper, &inner, config, seed_value)?;
    let model = train(&wrapper.with_seed(seed_value), &inner_data.project(&trace.best_subset)?)?;
    let test = held_out.project(&trace.best_subset)?;
    let hits = (0..test.n_samples())
        .filter(|&i| model.predict_row(test.row(i)).label == test.label(i))
        .count();
    trace.holdout_accuracy = Some(100.0 * hits as f64 / test.n_samples().max(1) as f64);
    Ok(trace)
}

pub fn rfe_seed(master: u64, group: RowGroup, set: FeatureSet) -> u64 {
    seed::derive(master, &["rfe", &group.key(), set.as_str()])
}

/// RFE per (task, feature set) on the single-task datasets.
pub fn run_selection(
    tables: &BTreeMap<FeatureSet, FeatureTable>,
    config: &ExperimentConfig,
    rfe: &RfeConfig,
) -> Result<BTreeMap<(RowGroup, FeatureSet), SelectionTrace>> {
    let wrapper = config.params.for_kind(rfe.wrapper);
    let mut out = BTreeMap::new();
    for group in RowGroup::all(Mode::Single) {
        for &set in &config.feature_sets {
            let table = tables
                .get(&set)
                .ok_or_else(|| Error::Validation(format!("no {set} feature table; run extract first")))?;
            let data = group_dataset(table, group)?;
            let s = rfe_seed(config.seed, group, set);
            let trace = if rfe.honest {
                rfe_select_honest(&data, &wrapper, rfe, config.folds.k, config.folds.group_aware, s)?
            } else {
                let plan = make_folds(
                    &data,
                    config.folds.k,
                    config.folds.stratified,
                    config.folds.group_aware,
                    fold_seed(config.seed, group),
                )?;
                rfe_select(&data, &wrapper, &plan, rfe, s)?
            };
            log::info!(
                "{} {set}: kept {} of {} features ({:.2}%)",
                group.key(),
                trace.best_subset.len(),
                trace.features.len(),
                trace.best_accuracy
            );
            out.insert((group, set), trace);
        }
    }
    Ok(out)
}

/// Re-runs the classifier grid on each dataset projected onto its selected
/// subset. Seeds match the unselected single-task grid, so projecting onto
/// every feature reproduces it.
pub fn evaluate_selected(
    tables: &BTreeMap<FeatureSet, FeatureTable>,
    subsets: &BTreeMap<(RowGroup, FeatureSet), Vec<String>>,
    config: &ExperimentConfig,
) -> Result<EvalReport> {
    if let Some(((g, s), _)) = subsets.iter().find(|(_, v)| v.is_empty()) {
        return Err(Error::Validation(format!("empty feature subset for {} {s}", g.key())));
    }
    Ok(run_grid(Mode::Single, config, &RowGroup::all(Mode::Single), |g, s| {
        let table = tables
            .get(&s)
            .ok_or_else(|| Error::Validation(format!("no {s} feature table; run extract first")))?;
        let data = group_dataset(table, g)?;
        match subsets.get(&(g, s)) {
            Some(subset) => data.project(subset),
            None => Ok(data),
        }
    }))
}

/// Single-cell variant of [`evaluate_selected`].
pub fn evaluate_subset(
    data: &Dataset,
    subset: &[String],
    group: RowGroup,
    set: FeatureSet,
    kind: ModelKind,
    config: &ExperimentConfig,
) -> Result<CellOutcome> {
    if subset.is_empty() {
        return Err(Error::Validation("empty feature subset".into()));
    }
    Ok(evaluate_cell(&data.project(subset)?, Mode::Single, group, set, kind, config))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBar {
    pub feature: String,
    pub count: u8,
}

/// How many of a category's two tasks selected each AL feature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccurrenceHistogram {
    pub category: Category,
    pub bars: Vec<HistogramBar>,
}

impl OccurrenceHistogram {
    pub fn group(&self, g: FeatureGroup) -> impl Iterator<Item = &HistogramBar> {
        self.bars.iter().filter(move |b| FeatureGroup::of(&b.feature) == g)
    }

    pub fn total(&self) -> usize {
        self.bars.iter().map(|b| usize::from(b.count)).sum()
    }

    /// Columns: `category,group,feature,count`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Validation(format!("csv write failed: {e}"));
        w.write_record(["category", "group", "feature", "count"]).map_err(err)?;
        for b in &self.bars {
            w.write_record([
                self.category.as_str(),
                FeatureGroup::of(&b.feature).label(),
                &b.feature,
                &b.count.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| Error::Validation(format!("csv write failed: {e}")))
    }
}

/// Counts per AL feature over the best subsets of the category's two tasks.
pub fn occurrence_histogram(traces: &BTreeMap<u8, SelectionTrace>, category: Category) -> Result<OccurrenceHistogram> {
    let al = FeatureSet::AL.names();
    let mut bars: Vec<HistogramBar> = al
        .iter()
        .map(|f| HistogramBar {
            feature: f.clone(),
            count: 0,
        })
        .collect();
    for task in category.task_ids() {
        let trace = traces
            .get(&task)
            .ok_or_else(|| Error::Validation(format!("no selection trace for task {task}")))?;
        if trace.features != al {
            return Err(Error::Validation(format!("trace for task {task} is not over the AL feature set")));
        }
        for bar in &mut bars {
            if trace.best_subset.contains(&bar.feature) {
                bar.count += 1;
            }
        }
    }
    Ok(OccurrenceHistogram { category, bars })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learners::{DtParams, GbtParams};
    use rand::Rng;

    pub(crate) fn planted(seed_value: u64, n: usize, d: usize) -> Dataset {
        let mut rng = seed::rng(seed_value);
        let labels: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 1)).collect();
        let rows: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                std::iter::once(f64::from(l))
                    .chain((1..d).map(|_| rng.random_range(0.0..1.0)))
                    .collect()
            })
            .collect();
        Dataset::new(
            rows,
            (0..d).map(|i| format!("f{i}")).collect(),
            labels,
            (0..n).map(|i| format!("p{i:03}")).collect(),
            vec![1; n],
        )
        .unwrap()
    }

    fn small_gbt() -> ModelParams {
        ModelParams::GBT(GbtParams {
            n_rounds: 20,
            ..GbtParams::default()
        })
    }

    #[test]
    fn evaluation_count_is_triangular() {
        let data = planted(1, 40, 5);
        let plan = make_folds(&data, 4, true, true, 0).unwrap();
        let trace = rfe_select(&data, &small_gbt(), &plan, &RfeConfig::default(), 0).unwrap();
        assert_eq!(trace.evaluations, 5 * 6 / 2 - 1);
        assert_eq!(trace.elimination_order.len(), 4);
        let sizes: Vec<usize> = trace.steps.iter().map(|s| s.subset.len()).collect();
        assert_eq!(sizes, vec![5, 4, 3, 2, 1]);
        for w in trace.steps.windows(2) {
            assert!(w[1].subset.iter().all(|f| w[0].subset.contains(f)));
        }
        assert!(trace.steps.iter().filter_map(|s| s.accuracy).all(|a| a <= trace.best_accuracy));
    }

    #[test]
    fn planted_feature_is_kept() {
        for s in 0..3 {
            let data = planted(10 + s, 60, 5);
            let plan = make_folds(&data, 5, true, true, s).unwrap();
            let trace = rfe_select(&data, &small_gbt(), &plan, &RfeConfig::default(), s).unwrap();
            assert!(trace.best_subset.contains(&"f0".to_string()));
            assert_eq!(trace.best_accuracy, 100.0);
            assert_eq!(trace.best_subset, vec!["f0".to_string()], "ties prefer the smallest subset");
            let after = cross_validate(
                &ModelParams::DT(DtParams::default()),
                &data.project(&trace.best_subset).unwrap(),
                &plan,
                0,
            )
            .unwrap();
            let before = cross_validate(&ModelParams::DT(DtParams::default()), &data, &plan, 0).unwrap();
            assert!(after.mean_accuracy() >= before.mean_accuracy());
        }
    }

    #[test]
    fn one_feature_is_rejected() {
        let data = planted(2, 20, 1);
        let plan = make_folds(&data, 4, true, true, 0).unwrap();
        let err = rfe_select(&data, &small_gbt(), &plan, &RfeConfig::default(), 0).unwrap_err();
        assert!(err.to_string().contains("d >= 2"));
    }

    #[test]
    fn importance_mode_and_honest_mode() {
        let data = planted(3, 60, 6);
        let plan = make_folds(&data, 5, true, true, 0).unwrap();
        let cfg = RfeConfig {
            mode: RfeMode::Importance,
            ..RfeConfig::default()
        };
        let trace = rfe_select(&data, &small_gbt(), &plan, &cfg, 0).unwrap();
        assert_eq!(trace.evaluations, 5);
        assert_eq!(trace.best_subset, vec!["f0".to_string()]);

        let honest = rfe_select_honest(&data, &small_gbt(), &RfeConfig::default(), 5, true, 4).unwrap();
        assert_eq!(honest.holdout_accuracy, Some(100.0));

        let svm = ModelParams::default_for(ModelKind::SVM);
        let bad = RfeConfig {
            wrapper: ModelKind::SVM,
            mode: RfeMode::Importance,
            ..RfeConfig::default()
        };
        assert!(matches!(rfe_select(&data, &svm, &plan, &bad, 0), Err(Error::Capability(_))));
    }

    #[test]
    fn elimination_is_deterministic() {
        let data = planted(5, 40, 4);
        let plan = make_folds(&data, 4, true, true, 1).unwrap();
        let a = rfe_select(&data, &small_gbt(), &plan, &RfeConfig::default(), 2).unwrap();
        let b = rfe_select(&data, &small_gbt(), &plan, &RfeConfig::default(), 2).unwrap();
        assert_eq!(a, b);
    }

    fn trace_with(best: &[&str]) -> SelectionTrace {
        SelectionTrace {
            features: FeatureSet::AL.names(),
            elimination_order: vec![],
            steps: vec![],
            best_subset: best.iter().map(|s| s.to_string()).collect(),
            best_accuracy: 0.0,
            evaluations: 0,
            wrapper_kind: ModelKind::GBT,
            mode: RfeMode::Wrapper,
            seed: 0,
            holdout_accuracy: None,
        }
    }

    #[test]
    fn histogram_counts() {
        let traces: BTreeMap<u8, SelectionTrace> = [
            (3, trace_with(&["A_duration", "P_slant", "age"])),
            (4, trace_with(&["A_duration", "sex"])),
        ]
        .into_iter()
        .collect();
        let h = occurrence_histogram(&traces, Category::Nrw).unwrap();
        let count = |f: &str| h.bars.iter().find(|b| b.feature == f).unwrap().count;
        assert_eq!(count("A_duration"), 2);
        assert_eq!(count("P_slant"), 1);
        assert_eq!(count("P_duration"), 0);
        assert_eq!(h.total(), 5);
        assert_eq!(h.bars.len(), 47);
        assert_eq!(h.group(FeatureGroup::Personal).count(), 4);
        let err = occurrence_histogram(&traces, Category::Rw).unwrap_err();
        assert!(err.to_string().contains("task 1"));
    }
}
