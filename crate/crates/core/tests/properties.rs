use proptest::prelude::*;

use wifiprox::features::{extract_fingerprints, feature_names, FeatureConfig};
use wifiprox::metrics::evaluate_scores;
use wifiprox::selection::{discretize, label_states, mutual_information, Discretization};
use wifiprox::{ApId, Fingerprint, FloorKey, Position, ProximityClass, Readings};

fn fp(id: &str, readings: &[(u32, f64)]) -> Fingerprint {
    Fingerprint::new(
        id,
        Readings::from_pairs(readings.iter().map(|&(a, r)| (ApId::from_index(a), r))).unwrap(),
        Position::new(0.0, 0.0),
        FloorKey::new("p", "b", "0"),
        "dev",
    )
    .unwrap()
}

/// Readings on AP ids drawn from a small pool so scans overlap often.
fn scan() -> impl Strategy<Value = Vec<(u32, f64)>> {
    prop::collection::btree_map(1u32..40, -100i32..-20, 1..30)
        .prop_map(|m| m.into_iter().map(|(k, v)| (k, f64::from(v))).collect())
}

const RANK_FEATURES: [&str; 4] = [
    "corr_rank.spearman",
    "corr_rank.kendall",
    "corr_rssi.spearman",
    "corr_pair_diff.kendall",
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn features_are_symmetric_and_finite(a in scan(), b in scan()) {
        let cfg = FeatureConfig::default();
        let (fa, fb) = (fp("a", &a), fp("b", &b));
        let ab = extract_fingerprints(&fa, &fb, &cfg).values;
        let ba = extract_fingerprints(&fb, &fa, &cfg).values;
        prop_assert_eq!(ab.len(), feature_names().len());
        for (x, y) in ab.iter().zip(&ba) {
            prop_assert!(x.is_finite());
            prop_assert_eq!(x.to_bits(), y.to_bits());
        }
    }

    #[test]
    fn rank_features_ignore_positive_affine_maps(
        a in scan(),
        alpha in 0.25f64..4.0,
        beta in -20.0f64..20.0,
    ) {
        let cfg = FeatureConfig::default();
        let mapped: Vec<(u32, f64)> = a.iter().map(|&(k, v)| (k, alpha * v + beta)).collect();
        let other: Vec<(u32, f64)> = a.iter().map(|&(k, v)| (k, v - 3.0 * f64::from(k % 4))).collect();
        let plain = extract_fingerprints(&fp("a", &a), &fp("b", &other), &cfg);
        let moved = extract_fingerprints(&fp("a", &mapped), &fp("b", &other), &cfg);
        for f in RANK_FEATURES {
            let name = format!("{f}.none");
            prop_assert_eq!(plain.get(&name), moved.get(&name), "{}", name);
        }
    }

    #[test]
    fn close_predictions_shrink_as_threshold_rises(
        scores in prop::collection::vec(0.0f64..=1.0, 2..200),
        t1 in 0.0f64..=1.0,
        t2 in 0.0f64..=1.0,
    ) {
        let labels: Vec<ProximityClass> = (0..scores.len())
            .map(|i| if i % 2 == 0 { ProximityClass::Close } else { ProximityClass::Far })
            .collect();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = evaluate_scores(&scores, &labels, lo, None).unwrap();
        let b = evaluate_scores(&scores, &labels, hi, None).unwrap();
        prop_assert!(b.tp + b.fp <= a.tp + a.fp);
        prop_assert!(b.tpr <= a.tpr && b.tnr >= a.tnr);
    }

    #[test]
    fn mutual_information_bounds(
        rows in prop::collection::vec((-5i32..5, -5i32..5, any::<bool>()), 4..120),
        bins in 2usize..6,
    ) {
        let f: Vec<f64> = rows.iter().map(|r| f64::from(r.0)).collect();
        let g: Vec<f64> = rows.iter().map(|r| f64::from(r.1)).collect();
        let method = Discretization::EqualFrequency { n: bins };
        let (df, dg) = (discretize(&f, method), discretize(&g, method));
        let ff = mutual_information(&df, &df);
        let fg = mutual_information(&df, &dg);
        prop_assert!(fg >= 0.0);
        prop_assert!(ff + 1e-12 >= fg);
        prop_assert!((fg - mutual_information(&dg, &df)).abs() < 1e-12);
        let labels: Vec<ProximityClass> = rows
            .iter()
            .map(|r| if r.2 { ProximityClass::Close } else { ProximityClass::Far })
            .collect();
        prop_assert!(mutual_information(&df, &label_states(&labels)) >= 0.0);
    }

    #[test]
    fn balanced_accuracy_ignores_class_proportions(
        rows in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..150),
        close_copies in 1usize..5,
        far_copies in 1usize..5,
    ) {
        let labels: Vec<ProximityClass> = rows
            .iter()
            .map(|r| if r.1 { ProximityClass::Close } else { ProximityClass::Far })
            .collect();
        let scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let base = evaluate_scores(&scores, &labels, 0.5, None).unwrap();
        let (mut s2, mut l2) = (Vec::new(), Vec::new());
        for (&s, &l) in scores.iter().zip(&labels) {
            let copies = if l.is_close() { close_copies } else { far_copies };
            s2.extend(std::iter::repeat_n(s, copies));
            l2.extend(std::iter::repeat_n(l, copies));
        }
        let resampled = evaluate_scores(&s2, &l2, 0.5, None).unwrap();
        prop_assert!((base.balanced_accuracy - resampled.balanced_accuracy).abs() < 1e-12);
    }
}

#[test]
fn feature_names_match_golden_list() {
    let golden: Vec<&str> = include_str!("golden/feature_names.txt").lines().collect();
    let names = feature_names();
    assert_eq!(names.len(), 323);
    assert_eq!(names.iter().map(String::as_str).collect::<Vec<_>>(), golden);
}
