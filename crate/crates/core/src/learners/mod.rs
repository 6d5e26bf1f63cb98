//! Binary classifiers behind one train/predict interface.
//!
//! Class 1 is the AD cohort, class 0 healthy controls; ties in any vote go to
//! class 0. SVM and MLP standardize their inputs with statistics of the
//! training rows they were fitted on; tree models see raw values.
//!
//! Trained models serialize to JSON:
//!
//! ```text
//! { "format": "inkscreen-model", "version": 1,
//!   "model": { "kind": "RF", "params": {...}, "feature_names": [...], "state": {...} } }
//! ```

mod boosting;
mod forest;
mod mlp;
mod svm;
mod tree;

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureVector;

pub use boosting::{GbtParams, GradientBoosting};
pub use forest::{DecisionTree, DtParams, RandomForest, RfParams};
pub use mlp::{Mlp, MlpGradient, MlpParams};
pub use svm::{kkt_max_violation, smo, Kernel, KernelKind, SmoSolution, Svm, SvmParams};
pub use tree::{Node, Tree};

/// Row-major feature matrix with labels and grouping keys.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    x: Vec<f64>,
    n: usize,
    d: usize,
    pub names: Vec<String>,
    labels: Vec<u8>,
    pub groups: Vec<String>,
    pub task_ids: Vec<u8>,
}

impl Dataset {
    pub fn new(
        rows: Vec<Vec<f64>>,
        names: Vec<String>,
        labels: Vec<u8>,
        groups: Vec<String>,
        task_ids: Vec<u8>,
    ) -> Result<Self> {
        let n = rows.len();
        let d = names.len();
        if d == 0 {
            return Err(Error::Validation("dataset needs at least one feature".into()));
        }
        if labels.len() != n || groups.len() != n || task_ids.len() != n {
            return Err(Error::Validation(format!(
                "inconsistent lengths: {n} rows, {} labels, {} groups, {} task ids",
                labels.len(),
                groups.len(),
                task_ids.len()
            )));
        }
        if names.iter().collect::<BTreeSet<_>>().len() != d {
            return Err(Error::Validation("duplicate feature names".into()));
        }
        if let Some(l) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::Validation(format!("label {l} is not binary")));
        }
        let mut x = Vec::with_capacity(n * d);
        for (i, r) in rows.into_iter().enumerate() {
            if r.len() != d {
                return Err(Error::Validation(format!("row {i} has {} values, expected {d}", r.len())));
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!("non-finite value in row {i}, feature {}", names[j])));
            }
            x.extend(r);
        }
        Ok(Dataset {
            x,
            n,
            d,
            names,
            labels,
            groups,
            task_ids,
        })
    }

    /// Builds a dataset from assembled vectors sharing one schema.
    pub fn from_vectors<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>) -> Result<Self> {
        let vectors: Vec<&FeatureVector> = vectors.into_iter().collect();
        let names = vectors
            .first()
            .map(|v| v.names.clone())
            .ok_or_else(|| Error::Validation("no feature vectors".into()))?;
        if vectors.iter().any(|v| v.names != names) {
            return Err(Error::Validation("feature vectors disagree on schema".into()));
        }
        Dataset::new(
            vectors.iter().map(|v| v.values.clone()).collect(),
            names,
            vectors.iter().map(|v| v.label.class()).collect(),
            vectors.iter().map(|v| v.participant_id.clone()).collect(),
            vectors.iter().map(|v| v.task_id).collect(),
        )
    }

    pub fn n_samples(&self) -> usize {
        self.n
    }

    pub fn n_features(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.x[i * self.d..(i + 1) * self.d]
    }

    pub fn value(&self, i: usize, f: usize) -> f64 {
        self.x[i * self.d + f]
    }

    pub fn label(&self, i: usize) -> u8 {
        self.labels[i]
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let pos = self.labels.iter().filter(|&&l| l == 1).count();
        [self.n - pos, pos]
    }

    pub fn has_both_classes(&self) -> bool {
        let [neg, pos] = self.class_counts();
        neg > 0 && pos > 0
    }

    /// Rows `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            x: indices.iter().flat_map(|&i| self.row(i).iter().copied()).collect(),
            n: indices.len(),
            d: self.d,
            names: self.names.clone(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            groups: indices.iter().map(|&i| self.groups[i].clone()).collect(),
            task_ids: indices.iter().map(|&i| self.task_ids[i]).collect(),
        }
    }

    /// Keeps the named columns, in the order given.
    pub fn project(&self, names: &[String]) -> Result<Dataset> {
        if names.is_empty() {
            return Err(Error::Validation("cannot project onto an empty feature set".into()));
        }
        let cols = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Validation(format!("unknown feature {n}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(self.project_columns(&cols))
    }

    pub fn project_columns(&self, cols: &[usize]) -> Dataset {
        let mut x = Vec::with_capacity(self.n * cols.len());
        for i in 0..self.n {
            let row = self.row(i);
            x.extend(cols.iter().map(|&c| row[c]));
        }
        Dataset {
            x,
            n: self.n,
            d: cols.len(),
            names: cols.iter().map(|&c| self.names[c].clone()).collect(),
            labels: self.labels.clone(),
            groups: self.groups.clone(),
            task_ids: self.task_ids.clone(),
        }
    }

    /// Concatenates rows of datasets with identical schemas.
    pub fn concat(parts: &[&Dataset]) -> Result<Dataset> {
        let first = parts.first().ok_or_else(|| Error::Validation("nothing to concatenate".into()))?;
        if parts.iter().any(|p| p.names != first.names) {
            return Err(Error::Validation("cannot concatenate datasets with different schemas".into()));
        }
        Ok(Dataset {
            x: parts.iter().flat_map(|p| p.x.iter().copied()).collect(),
            n: parts.iter().map(|p| p.n).sum(),
            d: first.d,
            names: first.names.clone(),
            labels: parts.iter().flat_map(|p| p.labels.iter().copied()).collect(),
            groups: parts.iter().flat_map(|p| p.groups.iter().cloned()).collect(),
            task_ids: parts.iter().flat_map(|p| p.task_ids.iter().copied()).collect(),
        })
    }
}

/// Per-feature z-scoring fitted on training rows; constant columns get unit scale.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    mean: Vec<f64>,
    scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(data: &Dataset) -> Self {
        let (n, d) = (data.n_samples() as f64, data.n_features());
        let mut mean = vec![0.0; d];
        for i in 0..data.n_samples() {
            for (m, v) in mean.iter_mut().zip(data.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for i in 0..data.n_samples() {
            for ((s, v), m) in var.iter_mut().zip(data.row(i)).zip(&mean) {
                *s += (v - m).powi(2);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn transform(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((v, m), s)| (v - m) / s)
            .collect()
    }

    pub fn transform_all(&self, data: &Dataset) -> Vec<Vec<f64>> {
        (0..data.n_samples()).map(|i| self.transform(data.row(i))).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    DT,
    RF,
    SVM,
    MLP,
    GBT,
}

impl ModelKind {
    /// The four classifiers of the experiment tables, in column order.
    pub const CLASSIFIERS: [ModelKind; 4] = [ModelKind::DT, ModelKind::RF, ModelKind::SVM, ModelKind::MLP];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::DT => "DT",
            ModelKind::RF => "RF",
            ModelKind::SVM => "SVM",
            ModelKind::MLP => "MLP",
            ModelKind::GBT => "GBT",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_uppercase().as_str() {
            "DT" => Ok(ModelKind::DT),
            "RF" => Ok(ModelKind::RF),
            "SVM" => Ok(ModelKind::SVM),
            "MLP" => Ok(ModelKind::MLP),
            "GBT" => Ok(ModelKind::GBT),
            _ => Err(format!("unknown model kind {s:?} (expected DT, RF, SVM, MLP or GBT)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelParams {
    DT(DtParams),
    RF(RfParams),
    SVM(SvmParams),
    MLP(MlpParams),
    GBT(GbtParams),
}

impl ModelParams {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelParams::DT(_) => ModelKind::DT,
            ModelParams::RF(_) => ModelKind::RF,
            ModelParams::SVM(_) => ModelKind::SVM,
            ModelParams::MLP(_) => ModelKind::MLP,
            ModelParams::GBT(_) => ModelKind::GBT,
        }
    }

    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::DT => ModelParams::DT(DtParams::default()),
            ModelKind::RF => ModelParams::RF(RfParams::default()),
            ModelKind::SVM => ModelParams::SVM(SvmParams::default()),
            ModelKind::MLP => ModelParams::MLP(MlpParams::default()),
            ModelKind::GBT => ModelParams::GBT(GbtParams::default()),
        }
    }

    /// Replaces the seed of randomized learners; others are returned unchanged.
    pub fn with_seed(&self, seed: u64) -> Self {
        let mut p = self.clone();
        match &mut p {
            ModelParams::RF(rf) => rf.seed = seed,
            ModelParams::MLP(m) => m.seed = seed,
            _ => {}
        }
        p
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelState {
    DT(DecisionTree),
    RF(RandomForest),
    SVM(Svm),
    MLP(Mlp),
    GBT(GradientBoosting),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub label: u8,
    /// Class-1 probability, vote fraction, leaf fraction or squashed margin,
    /// depending on the model kind.
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub kind: ModelKind,
    pub params: ModelParams,
    pub feature_names: Vec<String>,
    pub state: ModelState,
}

const MODEL_FORMAT: &str = "inkscreen-model";
const MODEL_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format: String,
    version: u32,
    model: TrainedModel,
}

pub fn train(params: &ModelParams, data: &Dataset) -> Result<TrainedModel> {
    if data.n_samples() == 0 {
        return Err(Error::Training("empty training set".into()));
    }
    if !data.has_both_classes() {
        return Err(Error::Training(format!(
            "training set has a single class ({} samples)",
            data.n_samples()
        )));
    }
    let state = match params {
        ModelParams::DT(p) => ModelState::DT(DecisionTree::fit(data, p)?),
        ModelParams::RF(p) => ModelState::RF(RandomForest::fit(data, p)?),
        ModelParams::SVM(p) => ModelState::SVM(Svm::fit(data, p)?),
        ModelParams::MLP(p) => ModelState::MLP(Mlp::fit(data, p)?),
        ModelParams::GBT(p) => ModelState::GBT(GradientBoosting::fit(data, p)?),
    };
    Ok(TrainedModel {
        kind: params.kind(),
        params: params.clone(),
        feature_names: data.names.clone(),
        state,
    })
}

impl TrainedModel {
    fn check_schema(&self, names: &[String]) -> Result<()> {
        if names == self.feature_names.as_slice() {
            return Ok(());
        }
        let have: BTreeSet<&String> = names.iter().collect();
        let want: BTreeSet<&String> = self.feature_names.iter().collect();
        let mut missing: Vec<String> = want.difference(&have).map(|s| s.to_string()).collect();
        let extra: Vec<String> = have.difference(&want).map(|s| s.to_string()).collect();
        if missing.is_empty() && extra.is_empty() {
            missing.push("(columns present but in a different order)".into());
        }
        Err(Error::Schema { missing, extra })
    }

    /// Predicts one vector after checking its schema against training time.
    pub fn predict(&self, names: &[String], values: &[f64]) -> Result<Prediction> {
        self.check_schema(names)?;
        if values.len() != names.len() {
            return Err(Error::Validation("names and values differ in length".into()));
        }
        Ok(self.predict_row(values))
    }

    pub fn predict_vector(&self, v: &FeatureVector) -> Result<Prediction> {
        self.predict(&v.names, &v.values)
    }

    /// Predicts every row of a dataset with the training schema.
    pub fn predict_dataset(&self, data: &Dataset) -> Result<Vec<Prediction>> {
        self.check_schema(&data.names)?;
        Ok((0..data.n_samples()).map(|i| self.predict_row(data.row(i))).collect())
    }

    /// No schema check; `row` must follow `feature_names`.
    pub fn predict_row(&self, row: &[f64]) -> Prediction {
        match &self.state {
            ModelState::DT(m) => m.predict(row),
            ModelState::RF(m) => m.predict(row),
            ModelState::SVM(m) => m.predict(row),
            ModelState::MLP(m) => m.predict(row),
            ModelState::GBT(m) => m.predict(row),
        }
    }

    /// Impurity (or gain) decrease per feature, normalized to sum 1 when any
    /// split was made. Tree-based models only.
    pub fn feature_importance(&self) -> Result<Vec<(String, f64)>> {
        let raw = match &self.state {
            ModelState::DT(m) => m.importance.clone(),
            ModelState::RF(m) => m.importance.clone(),
            ModelState::GBT(m) => m.importance.clone(),
            _ => return Err(Error::Capability(format!("feature importance for {}", self.kind))),
        };
        let total: f64 = raw.iter().sum();
        let scaled = raw.into_iter().map(|v| if total > 0.0 { v / total } else { 0.0 });
        Ok(self.feature_names.iter().cloned().zip(scaled).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&ModelFile {
            format: MODEL_FORMAT.into(),
            version: MODEL_VERSION,
            model: self.clone(),
        })?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile = serde_json::from_str(text)?;
        if file.format != MODEL_FORMAT || file.version != MODEL_VERSION {
            return Err(Error::Validation(format!(
                "unsupported model file {} v{}",
                file.format, file.version
            )));
        }
        Ok(file.model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
pub(crate) mod testing {
    use super::Dataset;

    pub fn dataset(rows: &[&[f64]], labels: &[u8]) -> Dataset {
        let d = rows[0].len();
        Dataset::new(
            rows.iter().map(|r| r.to_vec()).collect(),
            (0..d).map(|i| format!("f{i}")).collect(),
            labels.to_vec(),
            (0..rows.len()).map(|i| format!("g{i}")).collect(),
            vec![1; rows.len()],
        )
        .unwrap()
    }

    pub fn xor() -> Dataset {
        dataset(&[&[0.0, 0.0], &[0.0, 1.0], &[1.0, 0.0], &[1.0, 1.0]], &[0, 1, 1, 0])
    }
}
