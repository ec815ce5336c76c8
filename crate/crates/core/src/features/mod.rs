//! The pair feature vector.
//!
//! Layout (323 values):
//!
//! | block | count |
//! |---|---|
//! | AP detection counts | 5 |
//! | RSSI-dependent base features × 4 transform variants | 79 × 4 |
//! | identical device model, RE3 | 2 |
//!
//! The 79 RSSI-dependent base features are, in order: Manhattan and
//! Euclidean distance (2), shared top AP within z dB for z = 1..15 (15),
//! fraction of shared APs within z dB (15), identical top-k sets for
//! k = 1..8 (8), two Redpin scores (2), four coefficients over four vector
//! pairs (16) and seven statistics over three difference vectors (21).
//!
//! Names follow `<family>.<parameter>.<transform>`; transform-independent
//! features use the transform tag `invariant`. The name list is fixed and
//! pinned by a golden file in the test suite.

pub mod similarity;
pub mod transform;
pub mod vectors;

use std::rc::Rc;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::types::{canonical_order, shared_readings, Fingerprint, FingerprintPair, ProximityClass, Readings};

pub use similarity::{
    ap_detection_features, has_shared_top_k, identical_devices, manhattan_euclidean, re3, redpin_score, redpin_scores,
    rssi_within_z_pct, shared_top_ap_within_z, DistanceMode, RedpinParams,
};
pub use transform::{fit_least_squares, LinearFit, PairFit};
pub use vectors::{
    correlation_features, difference_features, shared_vector_features, side_features, SharedVectors, Side,
};

/// How the RSSI values of a pair are aligned before the base features are
/// computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformVariant {
    /// Raw values.
    None,
    /// First scan mapped through the forward fit `A r + B`.
    SingleLs,
    /// First scan mapped through `(A/2) r + B/2`.
    SingleHalfLs,
    /// First scan through `A r + B`, second through the backward fit `C r + D`.
    DoubleLs,
}

impl TransformVariant {
    pub const ALL: [TransformVariant; 4] = [
        TransformVariant::None,
        TransformVariant::SingleLs,
        TransformVariant::SingleHalfLs,
        TransformVariant::DoubleLs,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            TransformVariant::None => "none",
            TransformVariant::SingleLs => "single_ls",
            TransformVariant::SingleHalfLs => "single_half_ls",
            TransformVariant::DoubleLs => "double_ls",
        }
    }

    /// The affine maps applied to the first and second scan.
    pub fn maps(self, fit: &PairFit) -> (LinearFit, LinearFit) {
        let f = fit.forward;
        match self {
            TransformVariant::None => (LinearFit::IDENTITY, LinearFit::IDENTITY),
            TransformVariant::SingleLs => (f, LinearFit::IDENTITY),
            TransformVariant::SingleHalfLs => (
                LinearFit {
                    slope: f.slope / 2.0,
                    intercept: f.intercept / 2.0,
                },
                LinearFit::IDENTITY,
            ),
            TransformVariant::DoubleLs => (f, fit.backward),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub redpin: RedpinParams,
    /// Credit for an AP pair tied in exactly one scan when computing RE3.
    pub re3_half_weight: f64,
    /// Replacement for a 0 dBm denominator in pair ratios.
    pub ratio_zero_clamp: f64,
    pub distance_mode: DistanceMode,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            redpin: RedpinParams::default(),
            re3_half_weight: 0.5,
            ratio_zero_clamp: -0.5,
            distance_mode: DistanceMode::SharedOnly,
        }
    }
}

pub const DETECTION_FEATURES: usize = 5;
pub const BASE_FEATURES: usize = 79;
pub const DEVICE_FEATURES: usize = 2;
pub const FEATURE_COUNT: usize = DETECTION_FEATURES + BASE_FEATURES * TransformVariant::ALL.len() + DEVICE_FEATURES;

const COEFFICIENTS: [&str; 4] = ["cosine", "pearson", "spearman", "kendall"];
const STATISTICS: [&str; 7] = ["min", "max", "mean", "median", "harmonic_mean", "sd", "pop_sd"];

fn base_names() -> Vec<(String, String)> {
    let mut v: Vec<(String, String)> = Vec::with_capacity(BASE_FEATURES);
    let mut push = |family: &str, param: String| v.push((family.to_string(), param));
    push("dist", "manhattan".into());
    push("dist", "euclidean".into());
    for z in 1..=similarity::Z_LEVELS {
        push("top_ap_within", format!("z{z:02}"));
    }
    for z in 1..=similarity::Z_LEVELS {
        push("rssi_within_pct", format!("z{z:02}"));
    }
    for k in 1..=similarity::TOP_K_LEVELS {
        push("shared_top_k", format!("k{k}"));
    }
    push("redpin", "max_min".into());
    push("redpin", "min_max".into());
    for family in ["corr_rssi", "corr_pair_diff", "corr_pair_ratio", "corr_rank"] {
        for c in COEFFICIENTS {
            push(family, c.into());
        }
    }
    for family in ["diff_rssi", "diff_pair_diff", "diff_pair_ratio"] {
        for s in STATISTICS {
            push(family, s.into());
        }
    }
    v
}

/// The ordered feature names (length [`FEATURE_COUNT`]).
pub fn feature_names() -> &'static [String] {
    static NAMES: OnceLock<Vec<String>> = OnceLock::new();
    NAMES.get_or_init(|| {
        let mut names = Vec::with_capacity(FEATURE_COUNT);
        for p in [
            "shared_count",
            "union_count",
            "non_shared_count",
            "count_difference",
            "jaccard",
        ] {
            names.push(format!("ap.{p}.invariant"));
        }
        let base = base_names();
        for variant in TransformVariant::ALL {
            for (family, param) in &base {
                names.push(format!("{family}.{param}.{}", variant.tag()));
            }
        }
        names.push("device.identical.invariant".into());
        names.push("re3.score.invariant".into());
        names
    })
}

/// Position of `name` in [`feature_names`].
pub fn feature_index(name: &str) -> Option<usize> {
    feature_names().iter().position(|n| n == name)
}

/// Named feature values of one pair.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub label: Option<ProximityClass>,
}

impl FeatureVector {
    pub fn names(&self) -> &'static [String] {
        feature_names()
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        feature_index(name).map(|i| self.values[i])
    }
}

fn shared_vectors(a: &Readings, b: &Readings) -> SharedVectors {
    let (x, y) = shared_readings(a, b).map(|(_, x, y)| (x, y)).unzip();
    SharedVectors { x, y }
}

/// The 79 RSSI-dependent features for already transformed readings.
pub fn base_features(a: &Readings, b: &Readings, cfg: &FeatureConfig) -> Vec<f64> {
    let sv = shared_vectors(a, b);
    let xs = Side::new(sv.x, cfg.ratio_zero_clamp);
    let ys = Side::new(sv.y, cfg.ratio_zero_clamp);
    base_features_with_sides(a, b, &xs, &ys, cfg)
}

fn base_features_with_sides(a: &Readings, b: &Readings, xs: &Side, ys: &Side, cfg: &FeatureConfig) -> Vec<f64> {
    let mut out = Vec::with_capacity(BASE_FEATURES);
    out.extend(manhattan_euclidean(a, b, cfg.distance_mode));
    out.extend(shared_top_ap_within_z(a, b));
    out.extend(rssi_within_z_pct(a, b));
    out.extend(has_shared_top_k(a, b));
    out.extend(redpin_scores(a, b, &cfg.redpin));
    let (corr, diff) = side_features(xs, ys);
    out.extend(corr);
    out.extend(diff);
    debug_assert_eq!(out.len(), BASE_FEATURES);
    out
}

type CachedSide = (Readings, Side);

/// Transformed readings and their shared-AP side, keyed by the exact map,
/// so variants that leave a scan unchanged reuse the work.
struct SideCache {
    entries: Vec<((u64, u64), Rc<CachedSide>)>,
}

impl SideCache {
    fn new() -> Self {
        SideCache { entries: Vec::new() }
    }

    fn get(
        &mut self,
        map: LinearFit,
        own: &Readings,
        other: &Readings,
        own_is_a: bool,
        cfg: &FeatureConfig,
    ) -> Rc<CachedSide> {
        let key = (map.slope.to_bits(), map.intercept.to_bits());
        if let Some((_, e)) = self.entries.iter().find(|(k, _)| *k == key) {
            return Rc::clone(e);
        }
        let t = own.affine(map.slope, map.intercept);
        let values: Vec<f64> = if own_is_a {
            shared_readings(&t, other).map(|(_, x, _)| x).collect()
        } else {
            shared_readings(other, &t).map(|(_, _, y)| y).collect()
        };
        let side = Side::new(values, cfg.ratio_zero_clamp);
        let e = Rc::new((t, side));
        self.entries.push((key, Rc::clone(&e)));
        e
    }
}

/// Full feature vector of a canonically ordered pair.
pub fn extract(pair: &FingerprintPair<'_>, cfg: &FeatureConfig) -> FeatureVector {
    let mut fv = extract_ordered(pair.a, pair.b, cfg);
    fv.label = Some(pair.label);
    fv
}

/// Feature vector of two scans in either order; the pair is put into
/// canonical order first, so the result is symmetric.
pub fn extract_fingerprints(x: &Fingerprint, y: &Fingerprint, cfg: &FeatureConfig) -> FeatureVector {
    if canonical_order(x, y) == std::cmp::Ordering::Greater {
        extract_ordered(y, x, cfg)
    } else {
        extract_ordered(x, y, cfg)
    }
}

fn extract_ordered(a: &Fingerprint, b: &Fingerprint, cfg: &FeatureConfig) -> FeatureVector {
    let (ra, rb) = (a.readings(), b.readings());
    let raw = shared_vectors(ra, rb);
    let fit = fit_least_squares(&raw.x, &raw.y);

    let mut values = Vec::with_capacity(FEATURE_COUNT);
    values.extend(ap_detection_features(ra, rb));
    let (mut cache_a, mut cache_b) = (SideCache::new(), SideCache::new());
    for variant in TransformVariant::ALL {
        let (ma, mb) = variant.maps(&fit);
        let a_side = cache_a.get(ma, ra, rb, true, cfg);
        let b_side = cache_b.get(mb, rb, ra, false, cfg);
        values.extend(base_features_with_sides(
            &a_side.0, &b_side.0, &a_side.1, &b_side.1, cfg,
        ));
    }
    values.push(identical_devices(&a.device_model, &b.device_model));
    values.push(re3(&raw.x, &raw.y, cfg.re3_half_weight));
    for v in &mut values {
        if !v.is_finite() {
            *v = 0.0;
        }
    }
    debug_assert_eq!(values.len(), FEATURE_COUNT);
    FeatureVector { values, label: None }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{ApId, FloorKey, Position};

    fn fp(id: &str, device: &str, aps: &[(u32, f64)]) -> Fingerprint {
        Fingerprint::new(
            id,
            Readings::from_pairs(aps.iter().map(|&(a, r)| (ApId::from_index(a), r))).unwrap(),
            Position::new(0.0, 0.0),
            FloorKey::new("d", "b", "f"),
            device,
        )
        .unwrap()
    }

    #[test]
    fn registry_shape() {
        let names = feature_names();
        assert_eq!(names.len(), 323);
        assert_eq!(FEATURE_COUNT, 323);
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
        assert!(names.iter().all(|n| n.split('.').count() == 3));
        assert_eq!(base_names().len(), BASE_FEATURES);
    }

    #[test]
    fn identical_scans() {
        let aps: Vec<(u32, f64)> = (0..10).map(|i| (i, -40.0 - 3.0 * i as f64)).collect();
        let a = fp("a", "Pixel 3", &aps);
        let b = fp("b", "Pixel 3", &aps);
        let fv = extract_fingerprints(&a, &b, &FeatureConfig::default());
        assert_eq!(fv.values.len(), 323);
        assert_eq!(fv.get("ap.jaccard.invariant"), Some(1.0));
        assert_eq!(fv.get("device.identical.invariant"), Some(1.0));
        assert_eq!(fv.get("re3.score.invariant"), Some(1.0));
        // the half variant maps x to x/2 even for a perfect fit
        for v in [
            TransformVariant::None,
            TransformVariant::SingleLs,
            TransformVariant::DoubleLs,
        ] {
            for fam in ["diff_rssi", "diff_pair_diff", "diff_pair_ratio"] {
                for s in STATISTICS {
                    let name = format!("{fam}.{s}.{}", v.tag());
                    assert!(fv.get(&name).unwrap().abs() < 1e-9, "{name}");
                }
            }
        }
    }

    #[test]
    fn no_shared_aps() {
        let a = fp("a", "x", &[(1, -50.0), (2, -60.0)]);
        let b = fp("b", "y", &[(3, -50.0), (4, -60.0), (5, -70.0)]);
        let fv = extract_fingerprints(&a, &b, &FeatureConfig::default());
        assert_eq!(&fv.values[..5], &[0.0, 5.0, 5.0, 1.0, 0.0]);
        for (name, v) in feature_names().iter().zip(&fv.values) {
            if name.starts_with("corr_")
                || name.starts_with("diff_")
                || name.starts_with("dist.")
                || name.starts_with("top_ap")
                || name.starts_with("rssi_within")
            {
                assert_eq!(*v, 0.0, "{name}");
            }
        }
        assert!((fv.get("redpin.max_min.none").unwrap() + 0.4).abs() < 1e-12);
    }

    #[test]
    fn symmetric() {
        let a = fp("a", "x", &[(1, -50.0), (2, -60.0), (7, -81.0)]);
        let b = fp("b", "y", &[(1, -55.0), (2, -58.0), (3, -70.0), (7, -90.0)]);
        let cfg = FeatureConfig::default();
        assert_eq!(extract_fingerprints(&a, &b, &cfg), extract_fingerprints(&b, &a, &cfg));
    }
}
