//! Small numeric kernels: tie-aware ranking, correlation coefficients and
//! descriptive statistics.
//!
//! All functions are total: degenerate inputs (too short, zero variance,
//! zero norm, mismatched lengths) produce `0.0` rather than NaN.

use std::cmp::Ordering;

/// Relative tolerance under which two values are treated as tied when ranking.
///
/// Affine RSSI transforms reproduce equal inputs exactly, but derived values
/// such as pair differences can pick up last-bit rounding noise; treating
/// those as ties keeps rank statistics invariant under monotone transforms.
pub const RANK_TIE_TOLERANCE: f64 = 1e-9;

fn tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= RANK_TIE_TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

/// Dense tie-group index of every element (0 for the smallest group).
///
/// Neighbouring sorted values closer than [`RANK_TIE_TOLERANCE`] share a group.
pub fn tie_groups(values: &[f64]) -> Vec<u32> {
    let mut sorted: Vec<(f64, u32)> = values.iter().enumerate().map(|(i, &v)| (v, i as u32)).collect();
    radsort::sort_by_key(&mut sorted, |e| e.0);
    let mut groups = vec![0u32; values.len()];
    let mut group = 0u32;
    for w in 1..sorted.len() {
        if !tied(sorted[w - 1].0, sorted[w].0) {
            group += 1;
        }
        groups[sorted[w].1 as usize] = group;
    }
    groups
}

/// Average ranks from [`tie_groups`] output.
pub fn ranks_from_groups(groups: &[u32]) -> Vec<f64> {
    let n_groups = groups.iter().map(|&g| g as usize + 1).max().unwrap_or(0);
    let mut counts = vec![0usize; n_groups];
    for &g in groups {
        counts[g as usize] += 1;
    }
    let mut rank_of_group = vec![0.0; n_groups];
    let mut below = 0usize;
    for (g, &c) in counts.iter().enumerate() {
        // positions below+1 ..= below+c
        rank_of_group[g] = below as f64 + (c as f64 + 1.0) / 2.0;
        below += c;
    }
    groups.iter().map(|&g| rank_of_group[g as usize]).collect()
}

/// 1-based ranks, tied elements receiving the average of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    ranks_from_groups(&tie_groups(values))
}

fn is_constant(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[0] == w[1])
}

pub fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        0.0
    } else {
        v.iter().sum::<f64>() / v.len() as f64
    }
}

/// Cosine similarity; 0 when either vector has zero norm.
pub fn cosine(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.is_empty() {
        return 0.0;
    }
    let dot: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let nx = x.iter().map(|a| a * a).sum::<f64>().sqrt();
    let ny = y.iter().map(|b| b * b).sum::<f64>().sqrt();
    if nx == 0.0 || ny == 0.0 || !(nx * ny).is_finite() {
        return 0.0;
    }
    (dot / (nx * ny)).clamp(-1.0, 1.0)
}

/// Pearson product-moment correlation; 0 for length < 2 or a constant vector.
pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 || is_constant(x) || is_constant(y) {
        return 0.0;
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    let denom = (sxx * syy).sqrt();
    if denom == 0.0 || !denom.is_finite() {
        return 0.0;
    }
    (sxy / denom).clamp(-1.0, 1.0)
}

/// Spearman rank correlation: Pearson over average ranks.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return 0.0;
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Kendall's tau-b in O(n log n) (Knight's merge-sort formulation).
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() || x.len() < 2 {
        return 0.0;
    }
    kendall_from_groups(&tie_groups(x), &tie_groups(y))
}

/// `(spearman, kendall_tau_b)` sharing one ranking pass per vector.
pub fn rank_correlations(x: &[f64], y: &[f64]) -> (f64, f64) {
    if x.len() != y.len() || x.len() < 2 {
        return (0.0, 0.0);
    }
    let (gx, gy) = (tie_groups(x), tie_groups(y));
    let rho = pearson(&ranks_from_groups(&gx), &ranks_from_groups(&gy));
    (rho, kendall_from_groups(&gx, &gy))
}

/// Kendall's tau-b from [`tie_groups`] output of both vectors.
pub fn kendall_from_groups(gx: &[u32], gy: &[u32]) -> f64 {
    let n = gx.len();
    let mut keys: Vec<u64> = gx
        .iter()
        .zip(gy)
        .map(|(&a, &b)| (u64::from(a) << 32) | u64::from(b))
        .collect();
    radsort::sort(&mut keys);

    let pairs = |t: u64| t * t.saturating_sub(1) / 2;
    let total = pairs(n as u64);

    let mut ties_x = 0u64;
    let mut ties_xy = 0u64;
    let mut run_x = 1u64;
    let mut run_xy = 1u64;
    for k in 1..n {
        let (p, q) = (keys[k - 1], keys[k]);
        if p >> 32 == q >> 32 {
            run_x += 1;
            if p == q {
                run_xy += 1;
            } else {
                ties_xy += pairs(run_xy);
                run_xy = 1;
            }
        } else {
            ties_x += pairs(run_x);
            ties_xy += pairs(run_xy);
            run_x = 1;
            run_xy = 1;
        }
    }
    ties_x += pairs(run_x);
    ties_xy += pairs(run_xy);

    let seq: Vec<u32> = keys.iter().map(|&k| k as u32).collect();
    let swaps = count_inversions(&seq);

    let mut y_counts = vec![0u64; gy.iter().map(|&g| g as usize + 1).max().unwrap_or(0)];
    for &g in gy {
        y_counts[g as usize] += 1;
    }
    let ties_y: u64 = y_counts.iter().map(|&c| pairs(c)).sum();

    let denom = ((total - ties_x) as f64 * (total - ties_y) as f64).sqrt();
    if denom == 0.0 {
        return 0.0;
    }
    let numer = total as f64 - ties_x as f64 - ties_y as f64 + ties_xy as f64 - 2.0 * swaps as f64;
    (numer / denom).clamp(-1.0, 1.0)
}

/// Number of index pairs `i < j` with `seq[i] > seq[j]` (Fenwick tree over
/// the dense values).
fn count_inversions(seq: &[u32]) -> u64 {
    let size = seq.iter().map(|&v| v as usize + 1).max().unwrap_or(0);
    let mut tree = vec![0u32; size + 1];
    let mut inversions = 0u64;
    for (seen, &v) in seq.iter().enumerate() {
        // elements so far that are <= v
        let mut le = 0u64;
        let mut i = v as usize + 1;
        while i > 0 {
            le += u64::from(tree[i]);
            i &= i - 1;
        }
        inversions += seen as u64 - le;
        let mut i = v as usize + 1;
        while i <= size {
            tree[i] += 1;
            i += i & i.wrapping_neg();
        }
    }
    inversions
}

/// Median; the midpoint of the two central values for even lengths.
pub fn median(v: &[f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    let mut s = v.to_vec();
    let n = s.len();
    let (below, &mut upper, _) = s.select_nth_unstable_by(n / 2, f64::total_cmp);
    if n % 2 == 1 {
        upper
    } else {
        let lower = below.iter().copied().max_by(f64::total_cmp).expect("n >= 2");
        (lower + upper) / 2.0
    }
}

/// The seven summary statistics used by the difference-vector features.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Summary {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub median: f64,
    pub harmonic_mean: f64,
    pub sample_sd: f64,
    pub population_sd: f64,
}

impl Summary {
    /// Empty input yields all zeros. The harmonic mean is 0 when any element
    /// is 0, and the sample standard deviation is 0 for a single element.
    pub fn of(v: &[f64]) -> Summary {
        if v.is_empty() {
            return Summary::default();
        }
        let n = v.len() as f64;
        let min = v.iter().copied().fold(f64::INFINITY, f64::min);
        let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = mean(v);
        let harmonic_mean = if v.contains(&0.0) {
            0.0
        } else {
            n / v.iter().map(|x| 1.0 / x).sum::<f64>()
        };
        let ss: f64 = v.iter().map(|x| (x - mean) * (x - mean)).sum();
        let sample_sd = if v.len() > 1 { (ss / (n - 1.0)).sqrt() } else { 0.0 };
        Summary {
            min,
            max,
            mean,
            median: median(v),
            harmonic_mean,
            sample_sd,
            population_sd: (ss / n).sqrt(),
        }
    }

    pub fn to_array(self) -> [f64; 7] {
        [
            self.min,
            self.max,
            self.mean,
            self.median,
            self.harmonic_mean,
            self.sample_sd,
            self.population_sd,
        ]
    }
}

/// Compares by value, treating values within [`RANK_TIE_TOLERANCE`] as equal.
pub fn tolerant_cmp(a: f64, b: f64) -> Ordering {
    if tied(a, b) {
        Ordering::Equal
    } else {
        a.total_cmp(&b)
    }
}
