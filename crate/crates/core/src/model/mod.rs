//! Attribute-bagged decision tree ensemble and its JSON model file.

mod ensemble;
mod tree;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use ensemble::{
    classify, draw_tree_inputs, train_ensemble, tree_rng, BaggedEnsemble, EnsembleConfig, DEFAULT_THRESHOLD,
};
pub use tree::{train_tree, Dataset, Tree, TreeNode};

use crate::error::{Error, Result};
use crate::pairing::ClassCounts;

pub const MODEL_FORMAT: &str = "wifiprox.bagged_trees";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    format: String,
    schema_version: u32,
    config: EnsembleConfig,
    feature_names: Vec<String>,
    class_balance: ClassCounts,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    metadata: BTreeMap<String, String>,
    trees: Vec<Tree>,
}

/// Serializes a model (and optional free-form metadata) to its canonical
/// JSON text.
pub fn model_to_json(model: &BaggedEnsemble, metadata: &BTreeMap<String, String>) -> String {
    let doc = ModelDocument {
        format: MODEL_FORMAT.into(),
        schema_version: MODEL_SCHEMA_VERSION,
        config: model.config.clone(),
        feature_names: model.feature_names.clone(),
        class_balance: model.class_balance,
        metadata: metadata.clone(),
        trees: model.trees.clone(),
    };
    let mut s = serde_json::to_string(&doc).expect("model serialization cannot fail");
    s.push('\n');
    s
}

pub fn model_from_json(text: &str) -> Result<(BaggedEnsemble, BTreeMap<String, String>)> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Model(format!("corrupt model document: {e}")))?;
    match value.get("format").and_then(|v| v.as_str()) {
        Some(MODEL_FORMAT) => {}
        other => return Err(Error::Model(format!("not a model document (format {other:?})"))),
    }
    match value.get("schema_version").and_then(|v| v.as_u64()) {
        Some(v) if v == u64::from(MODEL_SCHEMA_VERSION) => {}
        other => {
            return Err(Error::Model(format!(
                "unsupported model schema version {other:?}, expected {MODEL_SCHEMA_VERSION}"
            )))
        }
    }
    let doc: ModelDocument =
        serde_json::from_value(value).map_err(|e| Error::Model(format!("corrupt model document: {e}")))?;
    doc.config.validate()?;
    if doc.trees.len() != doc.config.n_estimators {
        return Err(Error::Model(format!(
            "model declares {} estimators but contains {} trees",
            doc.config.n_estimators,
            doc.trees.len()
        )));
    }
    for (i, t) in doc.trees.iter().enumerate() {
        if t.features.len() > doc.config.max_features {
            return Err(Error::Model(format!("tree {i} uses more than max_features features")));
        }
        t.validate(doc.feature_names.len())
            .map_err(|e| Error::Model(format!("tree {i}: {e}")))?;
    }
    Ok((
        BaggedEnsemble {
            config: doc.config,
            feature_names: doc.feature_names,
            class_balance: doc.class_balance,
            trees: doc.trees,
        },
        doc.metadata,
    ))
}

pub fn save_model(model: &BaggedEnsemble, path: impl AsRef<Path>) -> Result<()> {
    save_model_with_metadata(model, &BTreeMap::new(), path)
}

pub fn save_model_with_metadata(
    model: &BaggedEnsemble,
    metadata: &BTreeMap<String, String>,
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, model_to_json(model, metadata)).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: impl AsRef<Path>) -> Result<BaggedEnsemble> {
    load_model_with_metadata(path).map(|(m, _)| m)
}

pub fn load_model_with_metadata(path: impl AsRef<Path>) -> Result<(BaggedEnsemble, BTreeMap<String, String>)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    model_from_json(&text).map_err(|e| Error::Model(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::table::FeatureTable;
    use crate::types::ProximityClass;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> BaggedEnsemble {
        let mut t = FeatureTable::new(vec!["a".into(), "b".into(), "c".into(), "d".into()]);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for i in 0..80 {
            let row: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
            let label = if row[0] + 0.3 * row[1] > 0.0 {
                ProximityClass::Close
            } else {
                ProximityClass::Far
            };
            t.push_row(format!("r{i}"), 1.0, label, &row).unwrap();
        }
        train_ensemble(
            &t,
            &EnsembleConfig {
                n_estimators: 25,
                max_features: 2,
                bootstrap: true,
                seed: 3,
            },
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_lossless() {
        let m = model();
        let text = model_to_json(&m, &BTreeMap::new());
        let (back, meta) = model_from_json(&text).unwrap();
        assert!(meta.is_empty());
        assert_eq!(back, m);
        assert_eq!(model_to_json(&back, &BTreeMap::new()), text);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..1000 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            assert_eq!(m.predict_score(&x).unwrap(), back.predict_score(&x).unwrap());
        }
    }

    #[test]
    fn metadata_survives() {
        let m = model();
        let meta = BTreeMap::from([("config_sha256".to_string(), "ab12".to_string())]);
        let (_, back) = model_from_json(&model_to_json(&m, &meta)).unwrap();
        assert_eq!(back, meta);
    }

    #[test]
    fn rejects_corrupt_documents() {
        let m = model();
        let text = model_to_json(&m, &BTreeMap::new());
        assert!(model_from_json(&text[..text.len() / 2]).is_err());
        let bumped = text.replacen("\"schema_version\":1", "\"schema_version\":2", 1);
        let err = model_from_json(&bumped).unwrap_err().to_string();
        assert!(err.contains("schema version"), "{err}");
        let fewer = text.replacen("\"n_estimators\":25", "\"n_estimators\":24", 1);
        assert!(model_from_json(&fewer).is_err());
        assert!(model_from_json("{}").is_err());
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        let m = model();
        save_model(&m, &p).unwrap();
        assert_eq!(load_model(&p).unwrap(), m);
        let missing = load_model(dir.path().join("none.json")).unwrap_err();
        assert!(matches!(missing, Error::Io { .. }));
    }
}
