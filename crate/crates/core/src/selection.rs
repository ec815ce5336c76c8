//! mRMR feature ranking with the MID (mutual information difference)
//! criterion on discretized features.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::{mean, Summary};
use crate::table::FeatureTable;
use crate::types::ProximityClass;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Discretization {
    /// 0 at or below `mean - alpha*sd`, 2 at or above `mean + alpha*sd`,
    /// otherwise 1.
    MeanPmSigma {
        alpha: f64,
    },
    EqualFrequency {
        n: usize,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MrmrConfig {
    pub k: usize,
    pub discretization: Discretization,
}

impl Default for MrmrConfig {
    fn default() -> Self {
        MrmrConfig {
            k: 7,
            discretization: Discretization::MeanPmSigma { alpha: 1.0 },
        }
    }
}

impl MrmrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("mRMR k must be at least 1".into()));
        }
        match self.discretization {
            Discretization::MeanPmSigma { alpha } if !(alpha.is_finite() && alpha >= 0.0) => {
                Err(Error::Config(format!("invalid discretization alpha {alpha}")))
            }
            Discretization::EqualFrequency { n } if n < 2 => {
                Err(Error::Config("equal-frequency binning needs at least 2 bins".into()))
            }
            _ => Ok(()),
        }
    }
}

/// A discretized column: state per row plus the number of states.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Discrete {
    pub states: Vec<u32>,
    pub n_states: u32,
}

pub fn discretize(v: &[f64], method: Discretization) -> Discrete {
    match method {
        Discretization::MeanPmSigma { alpha } => {
            let m = mean(v);
            let sd = Summary::of(v).sample_sd;
            let (lo, hi) = (m - alpha * sd, m + alpha * sd);
            let states = v
                .iter()
                .map(|&x| {
                    if x <= lo {
                        0
                    } else if x >= hi {
                        2
                    } else {
                        1
                    }
                })
                .collect();
            Discrete { states, n_states: 3 }
        }
        Discretization::EqualFrequency { n } => {
            let mut order: Vec<usize> = (0..v.len()).collect();
            order.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
            let mut states = vec![0u32; v.len()];
            let len = v.len().max(1);
            let mut p = 0;
            while p < order.len() {
                // tied values share the bin of their first position
                let bin = (p * n / len) as u32;
                let mut q = p;
                while q < order.len() && v[order[q]] == v[order[p]] {
                    states[order[q]] = bin;
                    q += 1;
                }
                p = q;
            }
            Discrete {
                states,
                n_states: n as u32,
            }
        }
    }
}

pub fn label_states(labels: &[ProximityClass]) -> Discrete {
    Discrete {
        states: labels.iter().map(|l| u32::from(l.is_close())).collect(),
        n_states: 2,
    }
}

/// Plug-in mutual information in bits.
pub fn mutual_information(a: &Discrete, b: &Discrete) -> f64 {
    assert_eq!(a.states.len(), b.states.len());
    let n = a.states.len();
    if n == 0 {
        return 0.0;
    }
    let (na, nb) = (a.n_states as usize, b.n_states as usize);
    let mut joint = vec![0usize; na * nb];
    for (&x, &y) in a.states.iter().zip(&b.states) {
        joint[x as usize * nb + y as usize] += 1;
    }
    let mut pa = vec![0usize; na];
    let mut pb = vec![0usize; nb];
    for i in 0..na {
        for j in 0..nb {
            pa[i] += joint[i * nb + j];
            pb[j] += joint[i * nb + j];
        }
    }
    let nf = n as f64;
    let mut mi = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let c = joint[i * nb + j];
            if c > 0 {
                let c = c as f64;
                mi += c / nf * (c * nf / (pa[i] as f64 * pb[j] as f64)).log2();
            }
        }
    }
    mi.max(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrmrPick {
    pub name: String,
    /// I(feature; label).
    pub relevance: f64,
    /// MID score at the time of selection (equals relevance for the first).
    pub score: f64,
}

const SCORE_TIE: f64 = 1e-12;

/// Greedy MID selection over named columns. Returns up to `cfg.k` picks in
/// selection order; equal scores go to the lexicographically smaller name.
pub fn mrmr_select_columns(
    names: &[String],
    columns: &[Vec<f64>],
    labels: &[ProximityClass],
    cfg: &MrmrConfig,
) -> Result<Vec<MrmrPick>> {
    cfg.validate()?;
    if names.len() != columns.len() {
        return Err(Error::Validation("names and columns differ in length".into()));
    }
    if names.len() < 2 {
        return Err(Error::Validation("mRMR needs at least 2 features".into()));
    }
    if columns.iter().any(|c| c.len() != labels.len()) {
        return Err(Error::Validation("column length does not match label count".into()));
    }
    let target = label_states(labels);
    if target.states.iter().all(|&s| s == target.states[0]) {
        return Err(Error::Validation("label column is constant".into()));
    }

    let discrete: Vec<Discrete> = columns.par_iter().map(|c| discretize(c, cfg.discretization)).collect();
    let relevance: Vec<f64> = discrete.par_iter().map(|d| mutual_information(d, &target)).collect();

    let mut remaining: Vec<usize> = (0..names.len()).collect();
    let mut redundancy = vec![0.0; names.len()];
    let mut picks: Vec<MrmrPick> = Vec::new();
    let k = cfg.k.min(names.len());

    while picks.len() < k {
        let s = picks.len() as f64;
        let score = |f: usize| {
            if s == 0.0 {
                relevance[f]
            } else {
                relevance[f] - redundancy[f] / s
            }
        };
        let mut best = remaining[0];
        for &f in &remaining[1..] {
            let (a, b) = (score(f), score(best));
            if a > b + SCORE_TIE || ((a - b).abs() <= SCORE_TIE && names[f] < names[best]) {
                best = f;
            }
        }
        picks.push(MrmrPick {
            name: names[best].clone(),
            relevance: relevance[best],
            score: score(best),
        });
        remaining.retain(|&f| f != best);
        let chosen = &discrete[best];
        let added: Vec<f64> = remaining
            .par_iter()
            .map(|&f| mutual_information(&discrete[f], chosen))
            .collect();
        for (&f, mi) in remaining.iter().zip(added) {
            redundancy[f] += mi;
        }
    }
    Ok(picks)
}

pub fn mrmr_select(table: &FeatureTable, cfg: &MrmrConfig) -> Result<Vec<MrmrPick>> {
    let columns: Vec<Vec<f64>> = (0..table.n_features()).map(|j| table.column(j)).collect();
    mrmr_select_columns(&table.names, &columns, &table.labels, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ProximityClass::{Close, Far};

    fn d(states: &[u32], n: u32) -> Discrete {
        Discrete {
            states: states.to_vec(),
            n_states: n,
        }
    }

    #[test]
    fn mi_hand_values() {
        let c = d(&[0, 0, 0, 0, 1, 1, 1, 1], 2);
        assert!((mutual_information(&c, &c) - 1.0).abs() < 1e-12);
        // 6 of 8 agree: 1 - H(0.25)
        let g = d(&[0, 0, 0, 1, 1, 1, 1, 0], 2);
        let h = -(0.25f64 * 0.25f64.log2() + 0.75 * 0.75f64.log2());
        assert!((mutual_information(&g, &c) - (1.0 - h)).abs() < 1e-12);
        let indep = d(&[0, 1, 0, 1, 0, 1, 0, 1], 2);
        assert_eq!(mutual_information(&indep, &c), 0.0);
    }

    #[test]
    fn mean_sigma_is_inclusive() {
        // mean 0, sample sd 1: bounds land exactly on -1 and 1
        let s = discretize(&[-1.0, 0.0, 1.0], Discretization::MeanPmSigma { alpha: 1.0 });
        assert_eq!(s.states, vec![0, 1, 2]);
        let s = discretize(&[0.0, 2.0, 4.0, 1.0, 3.0], Discretization::MeanPmSigma { alpha: 0.5 });
        // mean 2, sd sqrt(2.5), bounds ~1.21 and ~2.79
        assert_eq!(s.states, vec![0, 1, 2, 0, 2]);
        let s = discretize(&[4.0, 4.0], Discretization::MeanPmSigma { alpha: 1.0 });
        assert_eq!(s.states, vec![0, 0]);
    }

    #[test]
    fn equal_frequency_keeps_ties_together() {
        let s = discretize(&[5.0, 1.0, 3.0, 3.0, 9.0, 7.0], Discretization::EqualFrequency { n: 3 });
        assert_eq!(s.states, vec![1, 0, 0, 0, 2, 2]);
    }

    #[test]
    fn label_feature_first_and_constant_label_rejected() {
        let labels = [Close, Close, Far, Far, Close, Far];
        let names: Vec<String> = vec!["noise".into(), "label".into()];
        let cols = vec![vec![1.0, 5.0, 1.0, 5.0, 3.0, 3.0], vec![1.0, 1.0, 0.0, 0.0, 1.0, 0.0]];
        let cfg = MrmrConfig {
            k: 2,
            ..Default::default()
        };
        let picks = mrmr_select_columns(&names, &cols, &labels, &cfg).unwrap();
        assert_eq!(picks[0].name, "label");
        assert_eq!(picks.len(), 2);
        assert!(mrmr_select_columns(&names, &cols, &[Far; 6], &cfg).is_err());
        assert!(mrmr_select_columns(&names[..1], &cols[..1], &labels, &cfg).is_err());
    }

    #[test]
    fn full_ordering_is_deterministic() {
        let labels = [Close, Far, Close, Far, Close, Far, Far, Close];
        let names: Vec<String> = (0..5).map(|i| format!("f{i}")).collect();
        let cols: Vec<Vec<f64>> = (0..5)
            .map(|i| (0..8).map(|r| ((r * 7 + i * 3) % 5) as f64).collect())
            .collect();
        let cfg = MrmrConfig {
            k: 5,
            ..Default::default()
        };
        let a = mrmr_select_columns(&names, &cols, &labels, &cfg).unwrap();
        let b = mrmr_select_columns(&names, &cols, &labels, &cfg).unwrap();
        assert_eq!(a, b);
        let mut seen: Vec<&str> = a.iter().map(|p| p.name.as_str()).collect();
        seen.sort();
        assert_eq!(seen, vec!["f0", "f1", "f2", "f3", "f4"]);
    }
}
