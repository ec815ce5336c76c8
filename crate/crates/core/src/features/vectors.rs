//! Vectors derived from the shared-AP RSSI values of a pair and the
//! correlation / summary features computed over them.

use std::cmp::Ordering;

use crate::stats::{
    cosine, kendall_from_groups, pearson, rank_correlations, ranks_from_groups, tie_groups, tolerant_cmp, Summary,
};

/// Per-pair inputs: RSSI of every shared AP in each scan, ordered by AP id.
#[derive(Clone, Debug, PartialEq)]
pub struct SharedVectors {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// `|v_i - v_j|` over unordered index pairs `i < j`.
pub fn pair_differences(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for i in 0..n {
        for j in i + 1..n {
            out.push((v[i] - v[j]).abs());
        }
    }
    out
}

/// `v_i / v_j` over ordered index pairs `i != j`. A denominator of exactly 0
/// is replaced by `zero_clamp`.
pub fn pair_ratios(v: &[f64], zero_clamp: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = Vec::with_capacity(n * n.saturating_sub(1));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let d = if v[j] == 0.0 { zero_clamp } else { v[j] };
                out.push(v[i] / d);
            }
        }
    }
    out
}

/// Number of entries at least as weak as each entry (ties share a rank).
fn weakness_ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|&vi| {
            v.iter()
                .filter(|&&vk| tolerant_cmp(vk, vi) != Ordering::Greater)
                .count() as f64
        })
        .collect()
}

fn unit(v: Vec<f64>) -> Vec<f64> {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm == 0.0 {
        v
    } else {
        v.into_iter().map(|a| a / norm).collect()
    }
}

/// Normalized rank vectors: shared APs ordered strongest-first by their rank
/// in `x` (ties by AP id), each entry holding that AP's rank in `x` resp. `y`.
pub fn rank_vectors(x: &[f64], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let rx = weakness_ranks(x);
    let ry = weakness_ranks(y);
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&i, &j| rx[j].total_cmp(&rx[i]).then(i.cmp(&j)));
    let vx = order.iter().map(|&i| rx[i]).collect();
    let vy = order.iter().map(|&i| ry[i]).collect();
    (unit(vx), unit(vy))
}

/// `(cosine, pearson, spearman, kendall)`, all 0 below two entries.
pub fn coefficients(u: &[f64], v: &[f64]) -> [f64; 4] {
    if u.len() < 2 || u.len() != v.len() {
        return [0.0; 4];
    }
    let (rho, tau) = rank_correlations(u, v);
    [cosine(u, v), pearson(u, v), rho, tau]
}

/// One scan's shared-AP values with the derived pair vectors and their tie
/// groups. Built once per distinct transform and reused across variants.
#[derive(Clone, Debug)]
pub struct Side {
    values: Vec<f64>,
    diffs: Vec<f64>,
    ratios: Vec<f64>,
    groups: [Vec<u32>; 3],
}

impl Side {
    pub fn new(values: Vec<f64>, zero_clamp: f64) -> Self {
        let diffs = pair_differences(&values);
        let ratios = pair_ratios(&values, zero_clamp);
        let groups = [tie_groups(&values), tie_groups(&diffs), tie_groups(&ratios)];
        Side {
            values,
            diffs,
            ratios,
            groups,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn vector(&self, k: usize) -> &[f64] {
        match k {
            0 => &self.values,
            1 => &self.diffs,
            _ => &self.ratios,
        }
    }
}

fn grouped_coefficients(u: &[f64], v: &[f64], gu: &[u32], gv: &[u32]) -> [f64; 4] {
    if u.len() < 2 || u.len() != v.len() {
        return [0.0; 4];
    }
    let rho = pearson(&ranks_from_groups(gu), &ranks_from_groups(gv));
    [cosine(u, v), pearson(u, v), rho, kendall_from_groups(gu, gv)]
}

fn abs_diff(u: &[f64], v: &[f64]) -> Vec<f64> {
    u.iter().zip(v).map(|(a, b)| (a - b).abs()).collect()
}

/// Correlation (16) and difference (21) features of two sides.
pub fn side_features(x: &Side, y: &Side) -> ([f64; 16], [f64; 21]) {
    let mut corr = [0.0; 16];
    let mut diff = [0.0; 21];
    for k in 0..3 {
        let (u, v) = (x.vector(k), y.vector(k));
        corr[4 * k..4 * k + 4].copy_from_slice(&grouped_coefficients(u, v, &x.groups[k], &y.groups[k]));
        diff[7 * k..7 * k + 7].copy_from_slice(&Summary::of(&abs_diff(u, v)).to_array());
    }
    let (rx, ry) = rank_vectors(&x.values, &y.values);
    corr[12..].copy_from_slice(&coefficients(&rx, &ry));
    (corr, diff)
}

/// Both feature groups at once.
pub fn shared_vector_features(sv: &SharedVectors, zero_clamp: f64) -> ([f64; 16], [f64; 21]) {
    side_features(
        &Side::new(sv.x.clone(), zero_clamp),
        &Side::new(sv.y.clone(), zero_clamp),
    )
}

/// The four coefficients for each of the four vector pairs, in the order
/// RSSI values, pair differences, pair ratios, rank vectors.
pub fn correlation_features(sv: &SharedVectors, zero_clamp: f64) -> [f64; 16] {
    shared_vector_features(sv, zero_clamp).0
}

/// Seven summary statistics for each of the RSSI difference, pair-difference
/// comparison and pair-ratio comparison vectors.
pub fn difference_features(sv: &SharedVectors, zero_clamp: f64) -> [f64; 21] {
    shared_vector_features(sv, zero_clamp).1
}
