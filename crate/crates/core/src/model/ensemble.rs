use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{train_tree, Dataset, Tree};
use crate::error::{Error, Result};
use crate::pairing::ClassCounts;
use crate::table::FeatureTable;
use crate::types::ProximityClass;

pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    pub n_estimators: usize,
    pub max_features: usize,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            n_estimators: 300,
            max_features: 3,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl EnsembleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be at least 1".into()));
        }
        if self.max_features == 0 {
            return Err(Error::Config("max_features must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BaggedEnsemble {
    pub config: EnsembleConfig,
    pub feature_names: Vec<String>,
    pub class_balance: ClassCounts,
    pub trees: Vec<Tree>,
}

/// The RNG for tree `index`: one ChaCha stream per tree, so trees can be
/// trained in any order.
pub fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

/// Bootstrap counts and the sorted feature subset for one tree.
pub fn draw_tree_inputs(
    cfg: &EnsembleConfig,
    n_rows: usize,
    n_features: usize,
    index: usize,
) -> (Vec<u32>, Vec<usize>) {
    let mut rng = tree_rng(cfg.seed, index);
    let mut weights = vec![0u32; n_rows];
    if cfg.bootstrap {
        for _ in 0..n_rows {
            weights[rng.random_range(0..n_rows)] += 1;
        }
    } else {
        weights.fill(1);
    }
    let k = cfg.max_features.min(n_features);
    let mut subset = index::sample(&mut rng, n_features, k).into_vec();
    subset.sort_unstable();
    (weights, subset)
}

pub fn train_ensemble(table: &FeatureTable, cfg: &EnsembleConfig) -> Result<BaggedEnsemble> {
    cfg.validate()?;
    if table.is_empty() {
        return Err(Error::Validation("training table is empty".into()));
    }
    if table.n_features() == 0 {
        return Err(Error::Validation("training table has no feature columns".into()));
    }
    let balance = table.class_counts();
    if balance.close == 0 || balance.far == 0 {
        return Err(Error::Validation(
            "training table must contain both close and far pairs".into(),
        ));
    }
    let data = Dataset {
        columns: (0..table.n_features()).map(|j| table.column(j)).collect(),
        labels: table.labels.clone(),
    };
    let trees = (0..cfg.n_estimators)
        .into_par_iter()
        .map(|i| {
            let (weights, subset) = draw_tree_inputs(cfg, data.n_rows(), data.n_features(), i);
            train_tree(&data, &weights, &subset)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(BaggedEnsemble {
        config: cfg.clone(),
        feature_names: table.names.clone(),
        class_balance: balance,
        trees,
    })
}

impl BaggedEnsemble {
    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    /// Fraction of trees voting Close.
    pub fn predict_score(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features() {
            return Err(Error::Validation(format!(
                "feature vector has {} values, model expects {}",
                x.len(),
                self.n_features()
            )));
        }
        let votes: f64 = self.trees.iter().map(|t| t.vote(x)).sum();
        Ok(votes / self.trees.len() as f64)
    }

    /// Scores every row of `table`, matching columns by name.
    pub fn score_table(&self, table: &FeatureTable) -> Result<Vec<f64>> {
        let projected;
        let table = if table.names == self.feature_names {
            table
        } else {
            projected = table.project(&self.feature_names)?;
            &projected
        };
        (0..table.len())
            .into_par_iter()
            .map(|i| self.predict_score(table.row(i)))
            .collect()
    }
}

/// Close iff `score >= threshold`.
pub fn classify(score: f64, threshold: f64) -> ProximityClass {
    if score >= threshold {
        ProximityClass::Close
    } else {
        ProximityClass::Far
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    pub(crate) fn noisy_table(n: usize, seed: u64) -> FeatureTable {
        let names = (0..6).map(|i| format!("f{i}")).collect();
        let mut t = FeatureTable::new(names);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        for i in 0..n {
            let close = i % 2 == 0;
            let shift = if close { 1.0 } else { -1.0 };
            let row: Vec<f64> = (0..6)
                .map(|j| noise.sample(&mut rng) + if j < 3 { shift } else { 0.0 })
                .collect();
            let label = if close {
                ProximityClass::Close
            } else {
                ProximityClass::Far
            };
            t.push_row(format!("p{i}"), 1.0, label, &row).unwrap();
        }
        t
    }

    #[test]
    fn deterministic_and_thread_independent() {
        let t = noisy_table(100, 1);
        let cfg = EnsembleConfig {
            n_estimators: 20,
            seed: 9,
            ..Default::default()
        };
        let a = train_ensemble(&t, &cfg).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
        let b = pool.install(|| train_ensemble(&t, &cfg)).unwrap();
        assert_eq!(a, b);
        let c = train_ensemble(&t, &EnsembleConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn subsets_respect_max_features() {
        let t = noisy_table(50, 2);
        let m = train_ensemble(
            &t,
            &EnsembleConfig {
                n_estimators: 30,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(m.trees.len(), 30);
        for tree in &m.trees {
            assert_eq!(tree.features.len(), 3);
            assert!(tree.features.windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn training_rows_score_toward_labels() {
        let t = noisy_table(100, 3);
        let m = train_ensemble(
            &t,
            &EnsembleConfig {
                n_estimators: 50,
                seed: 4,
                ..Default::default()
            },
        )
        .unwrap();
        let scores = m.score_table(&t).unwrap();
        let close_mean: f64 = scores.iter().step_by(2).sum::<f64>() / 50.0;
        let far_mean: f64 = scores.iter().skip(1).step_by(2).sum::<f64>() / 50.0;
        assert!(close_mean > 0.6 && far_mean < 0.4, "{close_mean} {far_mean}");
    }

    #[test]
    fn tie_threshold_is_close() {
        assert_eq!(classify(0.5, DEFAULT_THRESHOLD), ProximityClass::Close);
        assert_eq!(classify(0.4999, DEFAULT_THRESHOLD), ProximityClass::Far);
        assert_eq!(classify(1.0, 1.0), ProximityClass::Close);
    }

    #[test]
    fn rejects_bad_input() {
        let t = noisy_table(10, 5);
        let far_only = t.subset(&[1, 3, 5]);
        assert!(train_ensemble(&far_only, &EnsembleConfig::default()).is_err());
        assert!(train_ensemble(&t.subset(&[]), &EnsembleConfig::default()).is_err());
        let m = train_ensemble(
            &t,
            &EnsembleConfig {
                n_estimators: 2,
                ..Default::default()
            },
        )
        .unwrap();
        assert!(m.predict_score(&[0.0; 5]).is_err());
    }

    #[test]
    fn no_bootstrap_single_tree_all_features() {
        let t = noisy_table(40, 6);
        let cfg = EnsembleConfig {
            n_estimators: 1,
            max_features: 6,
            bootstrap: false,
            seed: 0,
        };
        let m = train_ensemble(&t, &cfg).unwrap();
        let data = Dataset {
            columns: (0..6).map(|j| t.column(j)).collect(),
            labels: t.labels.clone(),
        };
        let direct = train_tree(&data, &[1; 40], &[0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(m.trees[0], direct);
    }
}
