//! CART-style binary classification tree (Gini impurity, unbounded depth).

use serde::de::{self, Deserializer, SeqAccess, Visitor};
use serde::ser::{SerializeSeq, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::ProximityClass;

/// Column-major training data.
#[derive(Clone, Debug)]
pub struct Dataset {
    pub columns: Vec<Vec<f64>>,
    pub labels: Vec<ProximityClass>,
}

impl Dataset {
    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn n_features(&self) -> usize {
        self.columns.len()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TreeNode {
    /// Rows with `value <= threshold` go left.
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        close: u32,
        far: u32,
    },
}

// Nodes are written as bare arrays to keep model files compact:
// `[feature, threshold, left, right]` or `[close, far]`.
impl Serialize for TreeNode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            TreeNode::Split {
                feature,
                threshold,
                left,
                right,
            } => {
                let mut seq = s.serialize_seq(Some(4))?;
                seq.serialize_element(&feature)?;
                seq.serialize_element(&threshold)?;
                seq.serialize_element(&left)?;
                seq.serialize_element(&right)?;
                seq.end()
            }
            TreeNode::Leaf { close, far } => {
                let mut seq = s.serialize_seq(Some(2))?;
                seq.serialize_element(&close)?;
                seq.serialize_element(&far)?;
                seq.end()
            }
        }
    }
}

impl<'de> Deserialize<'de> for TreeNode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct NodeVisitor;

        impl<'de> Visitor<'de> for NodeVisitor {
            type Value = TreeNode;

            fn expecting(&self, f: &mut std::fmt::Formatter) -> std::fmt::Result {
                f.write_str("[feature, threshold, left, right] or [close, far]")
            }

            fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> std::result::Result<TreeNode, A::Error> {
                let first: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(0, &self))?;
                let second: f64 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(1, &self))?;
                let as_u32 = |v: f64| -> std::result::Result<u32, A::Error> {
                    if v >= 0.0 && v.fract() == 0.0 && v <= f64::from(u32::MAX) {
                        Ok(v as u32)
                    } else {
                        Err(de::Error::custom(format!("expected a non-negative integer, got {v}")))
                    }
                };
                match seq.next_element::<u32>()? {
                    None => Ok(TreeNode::Leaf {
                        close: as_u32(first)?,
                        far: as_u32(second)?,
                    }),
                    Some(left) => {
                        let right: u32 = seq.next_element()?.ok_or_else(|| de::Error::invalid_length(3, &self))?;
                        if seq.next_element::<de::IgnoredAny>()?.is_some() {
                            return Err(de::Error::invalid_length(5, &self));
                        }
                        Ok(TreeNode::Split {
                            feature: as_u32(first)? as usize,
                            threshold: second,
                            left,
                            right,
                        })
                    }
                }
            }
        }

        d.deserialize_seq(NodeVisitor)
    }
}

/// A trained tree bound to its feature subset. Node 0 is the root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub features: Vec<usize>,
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn leaf(&self, x: &[f64]) -> (u32, u32) {
        let mut i = 0usize;
        loop {
            match self.nodes[i] {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => i = if x[feature] <= threshold { left } else { right } as usize,
                TreeNode::Leaf { close, far } => return (close, far),
            }
        }
    }

    /// 1 for a Close-majority leaf, 0 for Far, 0.5 on a tie.
    pub fn vote(&self, x: &[f64]) -> f64 {
        let (close, far) = self.leaf(x);
        match close.cmp(&far) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 0.5,
        }
    }

    pub fn depth(&self) -> usize {
        fn go(t: &Tree, i: usize) -> usize {
            match t.nodes[i] {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Split { left, right, .. } => 1 + go(t, left as usize).max(go(t, right as usize)),
            }
        }
        go(self, 0)
    }

    /// Structural checks used when loading persisted models.
    pub fn validate(&self, n_features: usize) -> Result<()> {
        let bad = |m: String| Err(Error::Model(m));
        if self.nodes.is_empty() {
            return bad("tree without nodes".into());
        }
        if self.features.iter().any(|&f| f >= n_features) {
            return bad("tree feature index out of range".into());
        }
        for (i, node) in self.nodes.iter().enumerate() {
            match *node {
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let (l, r) = (left as usize, right as usize);
                    if l <= i || r <= i || l >= self.nodes.len() || r >= self.nodes.len() {
                        return bad(format!("node {i} has invalid children"));
                    }
                    if !self.features.contains(&feature) {
                        return bad(format!("node {i} splits on feature {feature} outside its subset"));
                    }
                    if !threshold.is_finite() {
                        return bad(format!("node {i} has a non-finite threshold"));
                    }
                }
                TreeNode::Leaf { close, far } => {
                    if close + far == 0 {
                        return bad(format!("leaf {i} is empty"));
                    }
                }
            }
        }
        Ok(())
    }
}

/// `n * gini` for a node with the given class weights.
fn weighted_gini(close: u64, far: u64) -> f64 {
    let n = close + far;
    if n == 0 {
        return 0.0;
    }
    let (c, f, n) = (close as f64, far as f64, n as f64);
    n - (c * c + f * f) / n
}

fn midpoint(lo: f64, hi: f64) -> f64 {
    let mid = lo / 2.0 + hi / 2.0;
    if mid >= hi || mid < lo {
        lo
    } else {
        mid
    }
}

struct Pending {
    node: usize,
    /// For each subset feature, the node's rows sorted by that feature.
    sorted: Vec<Vec<u32>>,
}

/// Grows a tree on the rows with non-zero `weights` (bootstrap counts),
/// using only `feature_subset`.
///
/// Splits are chosen greedily by weighted Gini impurity over midpoints
/// between consecutive distinct values; ties go to the lowest feature index,
/// then the lowest threshold. A node becomes a leaf when it is pure, weighs
/// less than 2, or no split lowers its impurity.
pub fn train_tree(data: &Dataset, weights: &[u32], feature_subset: &[usize]) -> Result<Tree> {
    if weights.len() != data.n_rows() {
        return Err(Error::Validation("weights do not match the row count".into()));
    }
    if feature_subset.is_empty() {
        return Err(Error::Config("feature subset is empty".into()));
    }
    let mut features = feature_subset.to_vec();
    features.sort_unstable();
    features.dedup();
    if let Some(&f) = features.iter().find(|&&f| f >= data.n_features()) {
        return Err(Error::Config(format!("feature index {f} out of range")));
    }
    let rows: Vec<u32> = (0..data.n_rows() as u32).filter(|&r| weights[r as usize] > 0).collect();
    if rows.is_empty() {
        return Err(Error::Validation("cannot train a tree on zero samples".into()));
    }
    let is_close: Vec<bool> = data.labels.iter().map(|l| l.is_close()).collect();

    let sorted = features
        .iter()
        .map(|&f| {
            let col = &data.columns[f];
            let mut r = rows.clone();
            r.sort_by(|&a, &b| col[a as usize].total_cmp(&col[b as usize]).then(a.cmp(&b)));
            r
        })
        .collect();

    let mut nodes = vec![TreeNode::Leaf { close: 0, far: 0 }];
    let mut stack = vec![Pending { node: 0, sorted }];
    let mut goes_left = vec![false; data.n_rows()];

    while let Some(Pending { node, sorted }) = stack.pop() {
        let (mut close, mut far) = (0u64, 0u64);
        for &r in &sorted[0] {
            let w = u64::from(weights[r as usize]);
            if is_close[r as usize] {
                close += w;
            } else {
                far += w;
            }
        }
        let leaf = TreeNode::Leaf {
            close: close as u32,
            far: far as u32,
        };
        if close == 0 || far == 0 || close + far < 2 {
            nodes[node] = leaf;
            continue;
        }

        let parent = weighted_gini(close, far);
        let mut best: Option<(f64, usize, f64)> = None;
        for (k, order) in sorted.iter().enumerate() {
            let col = &data.columns[features[k]];
            let (mut lc, mut lf) = (0u64, 0u64);
            for p in 0..order.len() - 1 {
                let r = order[p] as usize;
                let w = u64::from(weights[r]);
                if is_close[r] {
                    lc += w;
                } else {
                    lf += w;
                }
                let (lo, hi) = (col[r], col[order[p + 1] as usize]);
                if lo >= hi {
                    continue;
                }
                let impurity = weighted_gini(lc, lf) + weighted_gini(close - lc, far - lf);
                if best.is_none_or(|(b, _, _)| impurity < b) {
                    best = Some((impurity, k, midpoint(lo, hi)));
                }
            }
        }

        let Some((impurity, k, threshold)) = best else {
            nodes[node] = leaf;
            continue;
        };
        if impurity >= parent - 1e-12 * (close + far) as f64 {
            nodes[node] = leaf;
            continue;
        }

        let col = &data.columns[features[k]];
        for &r in &sorted[0] {
            goes_left[r as usize] = col[r as usize] <= threshold;
        }
        let mut left_lists = Vec::with_capacity(sorted.len());
        let mut right_lists = Vec::with_capacity(sorted.len());
        for order in sorted {
            let (l, r): (Vec<u32>, Vec<u32>) = order.into_iter().partition(|&r| goes_left[r as usize]);
            left_lists.push(l);
            right_lists.push(r);
        }
        let left = nodes.len();
        nodes.push(leaf);
        nodes.push(leaf);
        nodes[node] = TreeNode::Split {
            feature: features[k],
            threshold,
            left: left as u32,
            right: left as u32 + 1,
        };
        stack.push(Pending {
            node: left + 1,
            sorted: right_lists,
        });
        stack.push(Pending {
            node: left,
            sorted: left_lists,
        });
    }

    Ok(Tree { features, nodes })
}
