//! k-fold cross-validation and the single-task and merged-task experiment
//! grids.
//!
//! Fold plans are stratified by class and, by default, keep every sample of
//! a participant in one fold. Grid cells and fold plans take their seeds from
//! the master seed through [`cell_seed`] and [`fold_seed`], so a cell's result
//! does not depend on which other cells run or in what order.

use std::collections::BTreeMap;
use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::features::{FeatureSet, FeatureTable};
use crate::ink_model::Category;
use crate::learners::{
    train, Dataset, DtParams, GbtParams, MlpParams, ModelKind, ModelParams, RfParams, SvmParams,
};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FoldConfig {
    pub k: usize,
    pub stratified: bool,
    pub group_aware: bool,
}

impl Default for FoldConfig {
    fn default() -> Self {
        FoldConfig {
            k: 10,
            stratified: true,
            group_aware: true,
        }
    }
}

impl FoldConfig {
    /// Participant grouping switched off, pooling samples as if independent.
    pub fn paper_mode(mut self) -> Self {
        self.group_aware = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FoldPlan {
    pub k: usize,
    /// Fold id per sample index.
    pub assignments: Vec<usize>,
    pub stratified: bool,
    pub group_aware: bool,
    pub seed: u64,
    pub warnings: Vec<String>,
}

impl FoldPlan {
    pub fn test_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] == fold).collect()
    }

    pub fn train_indices(&self, fold: usize) -> Vec<usize> {
        (0..self.assignments.len()).filter(|&i| self.assignments[i] != fold).collect()
    }

    pub fn fold_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for &f in &self.assignments {
            sizes[f] += 1;
        }
        sizes
    }

    /// Groups whose samples land in more than one fold.
    pub fn split_groups(&self, data: &Dataset) -> Vec<String> {
        let mut folds: BTreeMap<&str, usize> = BTreeMap::new();
        let mut split = std::collections::BTreeSet::new();
        for (i, g) in data.groups.iter().enumerate() {
            match folds.get(g.as_str()) {
                Some(&f) if f != self.assignments[i] => {
                    split.insert(g.clone());
                }
                Some(_) => {}
                None => {
                    folds.insert(g, self.assignments[i]);
                }
            }
        }
        split.into_iter().collect()
    }
}

struct Unit {
    key: String,
    rank: u64,
    members: Vec<usize>,
    class: u8,
}

/// Assigns samples to `k` folds.
///
/// Units (participants when `group_aware`, otherwise single samples) are
/// shuffled within each class by a hash of their key and the seed, then
/// placed one by one, largest first, into the fold with the fewest samples,
/// then the fewest of the unit's class, then the lowest index. Because units
/// are keyed by participant and task rather than by position, reordering
/// the dataset moves no sample to another fold.
pub fn make_folds(data: &Dataset, k: usize, stratified: bool, group_aware: bool, seed_value: u64) -> Result<FoldPlan> {
    let n = data.n_samples();
    if k < 2 {
        return Err(Error::Validation(format!("k = {k}: at least 2 folds are needed")));
    }
    if k > n {
        return Err(Error::Validation(format!("k = {k} exceeds the {n} available samples")));
    }
    let mut by_key: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut occurrences: BTreeMap<(String, u8), usize> = BTreeMap::new();
    for i in 0..n {
        let key = if group_aware {
            data.groups[i].clone()
        } else {
            let slot = occurrences.entry((data.groups[i].clone(), data.task_ids[i])).or_insert(0);
            *slot += 1;
            format!("{}\u{1f}{}\u{1f}{}", data.groups[i], data.task_ids[i], slot)
        };
        by_key.entry(key).or_default().push(i);
    }
    let mut warnings = Vec::new();
    let cap = n.div_ceil(k);
    let mut units: Vec<Unit> = by_key
        .into_iter()
        .map(|(key, members)| {
            if members.len() > cap {
                warnings.push(format!(
                    "group {key} has {} samples, more than a fold's share ({cap}); balance is best effort",
                    members.len()
                ));
            }
            let pos = members.iter().filter(|&&i| data.label(i) == 1).count();
            let class = if stratified { u8::from(2 * pos > members.len()) } else { 0 };
            Unit {
                rank: seed::derive(seed_value, &["fold-unit", &key]),
                key,
                members,
                class,
            }
        })
        .collect();
    units.sort_by(|a, b| {
        (a.class, std::cmp::Reverse(a.members.len()), a.rank, &a.key).cmp(&(
            b.class,
            std::cmp::Reverse(b.members.len()),
            b.rank,
            &b.key,
        ))
    });

    let mut totals = vec![0usize; k];
    let mut per_class = vec![[0usize; 2]; k];
    let mut assignments = vec![0; n];
    for u in &units {
        let c = u.class as usize;
        let fold = (0..k).min_by_key(|&f| (totals[f], per_class[f][c], f)).unwrap();
        totals[fold] += u.members.len();
        per_class[fold][c] += u.members.len();
        for &i in &u.members {
            assignments[i] = fold;
        }
    }
    for w in &warnings {
        log::warn!("{w}");
    }
    Ok(FoldPlan {
        k,
        assignments,
        stratified,
        group_aware,
        seed: seed_value,
        warnings,
    })
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl Confusion {
    pub fn add(&mut self, truth: u8, predicted: u8) {
        match (truth, predicted) {
            (1, 1) => self.tp += 1,
            (0, 0) => self.tn += 1,
            (0, _) => self.fp += 1,
            _ => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.tn + self.fp + self.fn_
    }

    pub fn merge(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.tn += other.tn;
        self.fp += other.fp;
        self.fn_ += other.fn_;
    }

    /// `(TP + TN) / n` in percent.
    pub fn accuracy(&self) -> Option<f64> {
        (self.total() > 0).then(|| 100.0 * (self.tp + self.tn) as f64 / self.total() as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldOutcome {
    pub fold: usize,
    pub confusion: Confusion,
    pub accuracy: Option<f64>,
    /// Why the fold was excluded from the mean.
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvResult {
    pub kind: ModelKind,
    pub folds: Vec<FoldOutcome>,
}

impl CvResult {
    /// Mean of per-fold accuracies over folds that did not fail.
    pub fn mean_accuracy(&self) -> Option<f64> {
        let ok: Vec<f64> = self.folds.iter().filter_map(|f| f.accuracy).collect();
        (!ok.is_empty()).then(|| ok.iter().sum::<f64>() / ok.len() as f64)
    }

    pub fn failed_folds(&self) -> usize {
        self.folds.iter().filter(|f| f.failure.is_some()).count()
    }

    pub fn confusion(&self) -> Confusion {
        let mut c = Confusion::default();
        for f in &self.folds {
            c.merge(&f.confusion);
        }
        c
    }
}

/// Trains on all folds but one and tests on the held-out fold, for every
/// fold. Randomized learners get the seed `derive_indexed(seed, fold)`.
pub fn cross_validate(params: &ModelParams, data: &Dataset, plan: &FoldPlan, seed_value: u64) -> Result<CvResult> {
    if plan.assignments.len() != data.n_samples() {
        return Err(Error::Validation(format!(
            "fold plan covers {} samples, dataset has {}",
            plan.assignments.len(),
            data.n_samples()
        )));
    }
    let folds = (0..plan.k)
        .map(|fold| {
            let test = plan.test_indices(fold);
            let failed = |why: String| {
                log::warn!("fold {fold} excluded: {why}");
                FoldOutcome {
                    fold,
                    confusion: Confusion::default(),
                    accuracy: None,
                    failure: Some(why),
                }
            };
            if test.is_empty() {
                return failed("empty test fold".into());
            }
            let train_set = data.subset(&plan.train_indices(fold));
            let fold_params = params.with_seed(seed::derive_indexed(seed_value, fold as u64));
            let model = match train(&fold_params, &train_set) {
                Ok(m) => m,
                Err(Error::Training(why)) => return failed(why),
                Err(e) => return failed(e.to_string()),
            };
            let mut confusion = Confusion::default();
            for &i in &test {
                confusion.add(data.label(i), model.predict_row(data.row(i)).label);
            }
            FoldOutcome {
                fold,
                accuracy: confusion.accuracy(),
                confusion,
                failure: None,
            }
        })
        .collect();
    Ok(CvResult {
        kind: params.kind(),
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierParams {
    pub dt: DtParams,
    pub rf: RfParams,
    pub svm: SvmParams,
    pub mlp: MlpParams,
    pub gbt: GbtParams,
}

impl Default for ClassifierParams {
    fn default() -> Self {
        ClassifierParams {
            dt: DtParams::default(),
            rf: RfParams::default(),
            svm: SvmParams::default(),
            mlp: MlpParams::default(),
            gbt: GbtParams::default(),
        }
    }
}

impl ClassifierParams {
    pub fn for_kind(&self, kind: ModelKind) -> ModelParams {
        match kind {
            ModelKind::DT => ModelParams::DT(self.dt.clone()),
            ModelKind::RF => ModelParams::RF(self.rf.clone()),
            ModelKind::SVM => ModelParams::SVM(self.svm.clone()),
            ModelKind::MLP => ModelParams::MLP(self.mlp.clone()),
            ModelKind::GBT => ModelParams::GBT(self.gbt.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub folds: FoldConfig,
    pub feature_sets: Vec<FeatureSet>,
    pub classifiers: Vec<ModelKind>,
    pub params: ClassifierParams,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            folds: FoldConfig::default(),
            feature_sets: FeatureSet::ALL.to_vec(),
            classifiers: ModelKind::CLASSIFIERS.to_vec(),
            params: ClassifierParams::default(),
            seed: 0,
        }
    }
}

/// First 16 hex digits of the SHA-256 of a value's JSON form.
pub fn digest_of<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_vec(value).expect("config values serialize");
    hex::encode(Sha256::digest(&json))[..16].to_string()
}

impl ExperimentConfig {
    pub fn digest(&self) -> String {
        digest_of(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Single,
    Merged,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Single => "single",
            Mode::Merged => "merged",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A row group of a results table: one task, or one category of two tasks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RowGroup {
    Task(u8),
    Category(Category),
}

impl RowGroup {
    pub fn category(self) -> Category {
        match self {
            RowGroup::Task(t) => crate::ink_model::category_of(t).expect("task ids are validated"),
            RowGroup::Category(c) => c,
        }
    }

    pub fn task_ids(self) -> Vec<u8> {
        match self {
            RowGroup::Task(t) => vec![t],
            RowGroup::Category(c) => c.task_ids().to_vec(),
        }
    }

    /// The Task# column: `3` or `3-4`.
    pub fn task_label(self) -> String {
        match self {
            RowGroup::Task(t) => t.to_string(),
            RowGroup::Category(c) => {
                let [a, b] = c.task_ids();
                format!("{a}-{b}")
            }
        }
    }

    /// Stable identifier used in seeds and file names.
    pub fn key(self) -> String {
        match self {
            RowGroup::Task(t) => format!("task{t}"),
            RowGroup::Category(c) => c.as_str().to_string(),
        }
    }

    pub fn all(mode: Mode) -> Vec<RowGroup> {
        match mode {
            Mode::Single => (1..=6).map(RowGroup::Task).collect(),
            Mode::Merged => Category::ALL.into_iter().map(RowGroup::Category).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CellOutcome {
    Absent(String),
    Evaluated(CvResult),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub group: RowGroup,
    pub set: FeatureSet,
    pub classifier: ModelKind,
    pub outcome: CellOutcome,
    pub best: bool,
}

impl Cell {
    pub fn accuracy(&self) -> Option<f64> {
        match &self.outcome {
            CellOutcome::Evaluated(r) => r.mean_accuracy(),
            CellOutcome::Absent(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mode: Mode,
    pub seed: u64,
    pub config_digest: String,
    pub cells: Vec<Cell>,
}

impl EvalReport {
    pub fn cell(&self, group: RowGroup, set: FeatureSet, classifier: ModelKind) -> Option<&Cell> {
        self.cells
            .iter()
            .find(|c| c.group == group && c.set == set && c.classifier == classifier)
    }

    pub fn groups(&self) -> Vec<RowGroup> {
        let mut g: Vec<RowGroup> = self.cells.iter().map(|c| c.group).collect();
        g.dedup();
        g
    }
}

pub fn fold_seed(master: u64, group: RowGroup) -> u64 {
    seed::derive(master, &["folds", &group.key()])
}

pub fn cell_seed(master: u64, mode: Mode, group: RowGroup, set: FeatureSet, kind: ModelKind) -> u64 {
    seed::derive(master, &["cell", mode.as_str(), &group.key(), set.as_str(), kind.as_str()])
}

/// Rows of `table` belonging to the tasks of `group`, in table order.
pub fn group_dataset(table: &FeatureTable, group: RowGroup) -> Result<Dataset> {
    let ids = group.task_ids();
    Dataset::from_vectors(table.rows.iter().filter(|r| ids.contains(&r.task_id)))
}

/// Marks the best cell of each row group: highest mean accuracy, earliest in
/// grid order on ties.
pub fn flag_best(cells: &mut [Cell]) {
    let mut best: BTreeMap<RowGroup, (usize, f64)> = BTreeMap::new();
    for (i, c) in cells.iter_mut().enumerate() {
        c.best = false;
        if let Some(acc) = c.accuracy() {
            let entry = best.entry(c.group).or_insert((i, acc));
            if acc > entry.1 {
                *entry = (i, acc);
            }
        }
    }
    for (i, _) in best.values() {
        cells[*i].best = true;
    }
}

/// Runs one cell with the experiment's derived seeds.
pub fn evaluate_cell(
    data: &Dataset,
    mode: Mode,
    group: RowGroup,
    set: FeatureSet,
    kind: ModelKind,
    config: &ExperimentConfig,
) -> CellOutcome {
    if !data.has_both_classes() {
        return CellOutcome::Absent("only one cohort present".into());
    }
    let plan = match make_folds(
        data,
        config.folds.k,
        config.folds.stratified,
        config.folds.group_aware,
        fold_seed(config.seed, group),
    ) {
        Ok(p) => p,
        Err(e) => return CellOutcome::Absent(e.to_string()),
    };
    let params = config.params.for_kind(kind);
    match cross_validate(&params, data, &plan, cell_seed(config.seed, mode, group, set, kind)) {
        Ok(r) => CellOutcome::Evaluated(r),
        Err(e) => CellOutcome::Absent(e.to_string()),
    }
}

/// Evaluates the grid `groups x sets x classifiers` using `dataset_for` to
/// build each (group, set) dataset.
pub fn run_grid<F>(mode: Mode, config: &ExperimentConfig, groups: &[RowGroup], dataset_for: F) -> EvalReport
where
    F: Fn(RowGroup, FeatureSet) -> Result<Dataset> + Sync,
{
    let jobs: Vec<(RowGroup, FeatureSet)> = groups
        .iter()
        .flat_map(|&g| config.feature_sets.iter().map(move |&s| (g, s)))
        .collect();
    let datasets: Vec<Result<Dataset>> = jobs.par_iter().map(|&(g, s)| dataset_for(g, s)).collect();
    let cells_spec: Vec<(usize, ModelKind)> = (0..jobs.len())
        .flat_map(|j| config.classifiers.iter().map(move |&k| (j, k)))
        .collect();
    let mut cells: Vec<Cell> = cells_spec
        .par_iter()
        .map(|&(j, kind)| {
            let (group, set) = jobs[j];
            let outcome = match &datasets[j] {
                Ok(data) => evaluate_cell(data, mode, group, set, kind, config),
                Err(e) => CellOutcome::Absent(e.to_string()),
            };
            Cell {
                group,
                set,
                classifier: kind,
                outcome,
                best: false,
            }
        })
        .collect();
    flag_best(&mut cells);
    EvalReport {
        mode,
        seed: config.seed,
        config_digest: config.digest(),
        cells,
    }
}

fn table_for(tables: &BTreeMap<FeatureSet, FeatureTable>, set: FeatureSet) -> Result<&FeatureTable> {
    tables
        .get(&set)
        .ok_or_else(|| Error::Validation(format!("no {set} feature table; run extract first")))
}

/// Six tasks x feature sets x classifiers.
pub fn run_single_task_experiment(tables: &BTreeMap<FeatureSet, FeatureTable>, config: &ExperimentConfig) -> EvalReport {
    run_grid(Mode::Single, config, &RowGroup::all(Mode::Single), |g, s| {
        group_dataset(table_for(tables, s)?, g)
    })
}

/// Three category-pooled datasets x feature sets x classifiers. Each pooled
/// sample keeps its participant id as group key.
pub fn run_merged_experiment(tables: &BTreeMap<FeatureSet, FeatureTable>, config: &ExperimentConfig) -> EvalReport {
    run_grid(Mode::Merged, config, &RowGroup::all(Mode::Merged), |g, s| {
        group_dataset(table_for(tables, s)?, g)
    })
}
