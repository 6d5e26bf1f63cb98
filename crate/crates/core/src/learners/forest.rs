//! CART decision trees and bagged random forests.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{grow_cart, CartConfig, Tree};
use super::{Dataset, Prediction};
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DtParams {
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
}

impl Default for DtParams {
    fn default() -> Self {
        DtParams {
            max_depth: None,
            min_leaf: 1,
        }
    }
}

impl DtParams {
    fn validate(&self) -> Result<()> {
        if self.min_leaf == 0 || self.max_depth == Some(0) {
            return Err(Error::Validation("DT needs min_leaf >= 1 and max_depth >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub tree: Tree,
    pub importance: Vec<f64>,
}

impl DecisionTree {
    pub fn fit(data: &Dataset, params: &DtParams) -> Result<Self> {
        params.validate()?;
        let indices: Vec<usize> = (0..data.n_samples()).collect();
        let cfg = CartConfig {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            features_per_split: None,
        };
        // no random draws happen when every feature is a candidate
        let out = grow_cart(data, &indices, cfg, &mut seed::rng(0));
        Ok(DecisionTree {
            tree: out.tree,
            importance: out.importance,
        })
    }

    pub fn predict(&self, row: &[f64]) -> Prediction {
        let score = self.tree.leaf_value(row);
        Prediction {
            label: u8::from(score > 0.5),
            score,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RfParams {
    pub n_trees: usize,
    /// `None` means `ceil(sqrt(d))`.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for RfParams {
    fn default() -> Self {
        RfParams {
            n_trees: 100,
            features_per_split: None,
            bootstrap: true,
            max_depth: None,
            min_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub trees: Vec<Tree>,
    pub importance: Vec<f64>,
}

impl RandomForest {
    pub fn fit(data: &Dataset, params: &RfParams) -> Result<Self> {
        if params.n_trees == 0 || params.min_leaf == 0 || params.features_per_split == Some(0) {
            return Err(Error::Validation(
                "RF needs n_trees, min_leaf and features_per_split >= 1".into(),
            ));
        }
        let d = data.n_features();
        let k = params
            .features_per_split
            .unwrap_or_else(|| (d as f64).sqrt().ceil() as usize)
            .min(d);
        let cfg = CartConfig {
            max_depth: params.max_depth,
            min_leaf: params.min_leaf,
            features_per_split: Some(k),
        };
        let n = data.n_samples();
        let grown: Vec<_> = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = seed::rng(seed::derive_indexed(params.seed, t as u64));
                let indices: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                grow_cart(data, &indices, cfg, &mut rng)
            })
            .collect();
        let mut importance = vec![0.0; d];
        let mut trees = Vec::with_capacity(grown.len());
        for out in grown {
            for (acc, v) in importance.iter_mut().zip(&out.importance) {
                *acc += v;
            }
            trees.push(out.tree);
        }
        Ok(RandomForest { trees, importance })
    }

    /// Class-1 vote of each tree.
    pub fn votes(&self, row: &[f64]) -> Vec<u8> {
        self.trees
            .iter()
            .map(|t| u8::from(t.leaf_value(row) > 0.5))
            .collect()
    }

    pub fn predict(&self, row: &[f64]) -> Prediction {
        let ones = self.votes(row).iter().filter(|&&v| v == 1).count();
        Prediction {
            label: u8::from(2 * ones > self.trees.len()),
            score: ones as f64 / self.trees.len() as f64,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::super::testing::*;
    use super::super::{train, ModelParams, TrainedModel};
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn noisy(seed_value: u64, n: usize) -> Dataset {
        let mut rng = seed::rng(seed_value);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] + 0.3 * r[1] + 0.2 * rng.random_range(-1.0..1.0) > 0.0))
            .collect();
        let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
        dataset(&refs, &labels)
    }

    fn accuracy(m: &TrainedModel, data: &Dataset) -> f64 {
        let hits = (0..data.n_samples())
            .filter(|&i| m.predict_row(data.row(i)).label == data.label(i))
            .count();
        hits as f64 / data.n_samples() as f64
    }

    #[test]
    fn pure_labels_give_a_single_leaf() {
        let mut data = dataset(&[&[0.0], &[1.0], &[2.0]], &[1, 1, 1]);
        let tree = DecisionTree::fit(&data, &DtParams::default()).unwrap();
        assert_eq!(tree.tree.nodes.len(), 1);
        assert_eq!(tree.predict(&[5.0]).label, 1);
        // train() itself refuses single-class data
        data = dataset(&[&[0.0], &[1.0]], &[1, 1]);
        assert!(train(&ModelParams::DT(DtParams::default()), &data).is_err());
    }

    #[test]
    fn xor_is_learned_exactly() {
        let data = xor();
        let p = DtParams {
            max_depth: Some(2),
            min_leaf: 1,
        };
        let m = train(&ModelParams::DT(p), &data).unwrap();
        for (x, y) in [([0.0, 0.0], 0), ([0.0, 1.0], 1), ([1.0, 0.0], 1), ([1.0, 1.0], 0)] {
            assert_eq!(m.predict_row(&x).label, y);
        }
    }

    #[test]
    fn thresholds_are_midpoints() {
        let data = dataset(&[&[1.0], &[3.0]], &[0, 1]);
        let tree = DecisionTree::fit(&data, &DtParams::default()).unwrap();
        match &tree.tree.nodes[0] {
            super::super::Node::Split { threshold, .. } => assert_eq!(*threshold, 2.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn single_tree_forest_equals_tree() {
        let data = noisy(3, 60);
        let dt = train(&ModelParams::DT(DtParams::default()), &data).unwrap();
        let rf = train(
            &ModelParams::RF(RfParams {
                n_trees: 1,
                features_per_split: Some(4),
                bootstrap: false,
                seed: 99,
                ..RfParams::default()
            }),
            &data,
        )
        .unwrap();
        let probe = noisy(4, 200);
        for i in 0..probe.n_samples() {
            let row = probe.row(i);
            assert_eq!(dt.predict_row(row).label, rf.predict_row(row).label);
        }
    }

    #[test]
    fn forest_score_is_the_vote_fraction() {
        let data = noisy(5, 80);
        let params = RfParams {
            n_trees: 15,
            seed: 11,
            ..RfParams::default()
        };
        let rf = RandomForest::fit(&data, &params).unwrap();
        let probe = noisy(6, 50);
        for i in 0..probe.n_samples() {
            let row = probe.row(i);
            let ones = rf.trees.iter().filter(|t| t.leaf_value(row) > 0.5).count();
            let p = rf.predict(row);
            assert_eq!(p.score, ones as f64 / 15.0);
            assert_eq!(p.label, u8::from(ones >= 8));
        }
    }

    #[test]
    fn even_vote_ties_go_to_class_zero() {
        let forest = RandomForest {
            trees: vec![
                Tree {
                    nodes: vec![super::super::Node::Leaf { value: 1.0, samples: 1 }],
                },
                Tree {
                    nodes: vec![super::super::Node::Leaf { value: 0.0, samples: 1 }],
                },
            ],
            importance: vec![0.0],
        };
        let p = forest.predict(&[0.0]);
        assert_eq!((p.label, p.score), (0, 0.5));
    }

    #[test]
    fn forest_is_deterministic_per_seed() {
        let data = noisy(7, 70);
        let p = RfParams {
            n_trees: 10,
            seed: 1,
            ..RfParams::default()
        };
        assert_eq!(RandomForest::fit(&data, &p).unwrap(), RandomForest::fit(&data, &p).unwrap());
        let q = RfParams { seed: 2, ..p.clone() };
        assert_ne!(RandomForest::fit(&data, &p).unwrap(), RandomForest::fit(&data, &q).unwrap());
    }

    #[test]
    fn forest_importances_sum_to_one() {
        let m = train(&ModelParams::RF(RfParams { n_trees: 20, ..RfParams::default() }), &noisy(8, 90)).unwrap();
        let total: f64 = m.feature_importance().unwrap().iter().map(|(_, v)| v).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn noise_feature_ranks_below_signal() {
        let mut wins = 0;
        for s in 0..10 {
            let data = noisy(100 + s, 120);
            let m = train(&ModelParams::RF(RfParams { n_trees: 30, seed: s, ..RfParams::default() }), &data).unwrap();
            let imp = m.feature_importance().unwrap();
            if imp[0].1 > imp[3].1 {
                wins += 1;
            }
        }
        assert!(wins >= 9, "signal beat noise in {wins}/10 seeds");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn unlimited_tree_fits_consistent_data(points in prop::collection::vec((-50i32..50, -50i32..50, any::<bool>()), 2..40)) {
            let mut seen = std::collections::BTreeMap::new();
            for (x, y, l) in &points {
                seen.entry((*x, *y)).or_insert(*l);
            }
            let rows: Vec<Vec<f64>> = seen.keys().map(|&(x, y)| vec![x as f64, y as f64]).collect();
            let labels: Vec<u8> = seen.values().map(|&l| u8::from(l)).collect();
            prop_assume!(labels.contains(&0) && labels.contains(&1));
            let refs: Vec<&[f64]> = rows.iter().map(|r| r.as_slice()).collect();
            let data = dataset(&refs, &labels);
            let m = train(&ModelParams::DT(DtParams::default()), &data).unwrap();
            prop_assert_eq!(accuracy(&m, &data), 1.0);
        }
    }
}
