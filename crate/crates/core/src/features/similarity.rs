//! Set- and value-based similarity measures between two scans.
//!
//! Functions that take `(a, b)` expect the pair in canonical order: `a` is
//! the fingerprint with fewer detected APs.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::stats::tolerant_cmp;
use crate::types::{shared_readings, ApId, Readings};

pub const Z_LEVELS: usize = 15;
pub const TOP_K_LEVELS: usize = 8;

/// `(shared, union, non_shared, |#a - #b|, jaccard)`.
pub fn ap_detection_features(a: &Readings, b: &Readings) -> [f64; 5] {
    let shared = shared_readings(a, b).count();
    let union = a.len() + b.len() - shared;
    let jaccard = if union == 0 { 0.0 } else { shared as f64 / union as f64 };
    [
        shared as f64,
        union as f64,
        (union - shared) as f64,
        a.len().abs_diff(b.len()) as f64,
        jaccard,
    ]
}

/// How RSSI distances treat APs seen by only one side.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum DistanceMode {
    /// Only shared APs contribute.
    SharedOnly,
    /// Union of APs, a missing reading replaced by `floor_dbm`.
    UnionWithFloor { floor_dbm: f64 },
}

/// `(manhattan, euclidean)`.
pub fn manhattan_euclidean(a: &Readings, b: &Readings, mode: DistanceMode) -> [f64; 2] {
    let deltas: Vec<f64> = match mode {
        DistanceMode::SharedOnly => shared_readings(a, b).map(|(_, x, y)| x - y).collect(),
        DistanceMode::UnionWithFloor { floor_dbm } => {
            let (xs, ys) = (a.as_slice(), b.as_slice());
            let (mut i, mut j) = (0, 0);
            let mut out = Vec::with_capacity(xs.len() + ys.len());
            while i < xs.len() || j < ys.len() {
                let ord = match (xs.get(i), ys.get(j)) {
                    (Some(p), Some(q)) => p.ap.cmp(&q.ap),
                    (Some(_), None) => Ordering::Less,
                    _ => Ordering::Greater,
                };
                match ord {
                    Ordering::Less => {
                        out.push(xs[i].rssi - floor_dbm);
                        i += 1;
                    }
                    Ordering::Greater => {
                        out.push(floor_dbm - ys[j].rssi);
                        j += 1;
                    }
                    Ordering::Equal => {
                        out.push(xs[i].rssi - ys[j].rssi);
                        i += 1;
                        j += 1;
                    }
                }
            }
            out
        }
    };
    let l1 = deltas.iter().map(|d| d.abs()).sum();
    let l2 = deltas.iter().map(|d| d * d).sum::<f64>().sqrt();
    [l1, l2]
}

fn max_rssi(r: &Readings) -> f64 {
    r.iter().map(|r| r.rssi).fold(f64::NEG_INFINITY, f64::max)
}

/// Entry `z-1` is 1 when some shared AP is within `z` dB of the strongest AP
/// in both fingerprints, for `z = 1..=15`.
pub fn shared_top_ap_within_z(a: &Readings, b: &Readings) -> [f64; Z_LEVELS] {
    let (max_a, max_b) = (max_rssi(a), max_rssi(b));
    let best = shared_readings(a, b)
        .map(|(_, x, y)| (max_a - x).max(max_b - y))
        .fold(f64::INFINITY, f64::min);
    std::array::from_fn(|k| f64::from(u8::from(best <= (k + 1) as f64)))
}

/// Entry `z-1` is the fraction of shared APs with `|rssi_a - rssi_b| <= z`.
pub fn rssi_within_z_pct(a: &Readings, b: &Readings) -> [f64; Z_LEVELS] {
    let deltas: Vec<f64> = shared_readings(a, b).map(|(_, x, y)| (x - y).abs()).collect();
    if deltas.is_empty() {
        return [0.0; Z_LEVELS];
    }
    std::array::from_fn(|k| {
        let z = (k + 1) as f64;
        deltas.iter().filter(|&&d| d <= z).count() as f64 / deltas.len() as f64
    })
}

/// APs sorted strongest first, ties by ascending [`ApId`].
fn strongest_first(r: &Readings) -> Vec<ApId> {
    let mut v: Vec<_> = r.iter().map(|r| (r.ap, r.rssi)).collect();
    v.sort_by(|p, q| q.1.total_cmp(&p.1).then(p.0.cmp(&q.0)));
    v.into_iter().map(|(ap, _)| ap).collect()
}

/// Entry `k-1` is 1 when the `k` strongest APs of both fingerprints form the
/// same set; 0 when either has fewer than `k` APs.
pub fn has_shared_top_k(a: &Readings, b: &Readings) -> [f64; TOP_K_LEVELS] {
    let (ta, tb) = (strongest_first(a), strongest_first(b));
    std::array::from_fn(|i| {
        let k = i + 1;
        if ta.len() < k || tb.len() < k {
            return 0.0;
        }
        let mut sa = ta[..k].to_vec();
        let mut sb = tb[..k].to_vec();
        sa.sort_unstable();
        sb.sort_unstable();
        f64::from(u8::from(sa == sb))
    })
}

/// Credits of the asymmetric Redpin-style score.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RedpinParams {
    /// A matched AP with `|Δrssi| <=` this many dB earns `near_credit`.
    pub match_threshold_db: f64,
    pub near_credit: f64,
    pub far_credit: f64,
    /// Added (negative) for every AP of the reference scan missing in the other.
    pub miss_penalty: f64,
}

impl Default for RedpinParams {
    fn default() -> Self {
        RedpinParams {
            match_threshold_db: 10.0,
            near_credit: 1.0,
            far_credit: 0.5,
            miss_penalty: -0.4,
        }
    }
}

/// Scores how well `q` reproduces the APs of `p`, normalized by `|p|`.
pub fn redpin_score(p: &Readings, q: &Readings, params: &RedpinParams) -> f64 {
    if p.is_empty() {
        return 0.0;
    }
    let total: f64 = p
        .iter()
        .map(|r| match q.get(r.ap) {
            Some(v) if (v - r.rssi).abs() <= params.match_threshold_db => params.near_credit,
            Some(_) => params.far_credit,
            None => params.miss_penalty,
        })
        .sum();
    total / p.len() as f64
}

/// `(score(max, min), score(min, max))` where `a` is the fingerprint with
/// fewer APs.
pub fn redpin_scores(a: &Readings, b: &Readings, params: &RedpinParams) -> [f64; 2] {
    [redpin_score(b, a, params), redpin_score(a, b, params)]
}

/// 1 when both device model strings match after trimming and case folding.
pub fn identical_devices(a: &str, b: &str) -> f64 {
    f64::from(u8::from(a.trim().to_lowercase() == b.trim().to_lowercase()))
}

/// Relative-ordering agreement over unordered pairs of shared APs.
///
/// A pair counts 1 when both scans order the two APs the same way (or both
/// tie them), `half_weight` when exactly one scan ties them, 0 otherwise.
/// Returns 0 with fewer than two shared APs.
pub fn re3(x: &[f64], y: &[f64], half_weight: f64) -> f64 {
    let n = x.len().min(y.len());
    if n < 2 {
        return 0.0;
    }
    let mut score = 0.0;
    for i in 0..n {
        for j in i + 1..n {
            let ox = tolerant_cmp(x[i], x[j]);
            let oy = tolerant_cmp(y[i], y[j]);
            score += if ox == oy {
                1.0
            } else if ox == Ordering::Equal || oy == Ordering::Equal {
                half_weight
            } else {
                0.0
            };
        }
    }
    score / (n * (n - 1) / 2) as f64
}
