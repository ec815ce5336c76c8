//! Labeled pair enumeration within floor subsets, and class-controlled
//! sampling of training sets.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Fingerprint, FingerprintPair, ProximityClass};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairingConfig {
    pub close_max_m: f64,
    pub far_min_m: f64,
    pub far_max_m: f64,
    /// Drop pairs whose two scans belong to the same burst.
    pub exclude_same_burst: bool,
}

impl Default for PairingConfig {
    fn default() -> Self {
        PairingConfig {
            close_max_m: 2.25,
            far_min_m: 3.25,
            far_max_m: 20.0,
            exclude_same_burst: false,
        }
    }
}

impl PairingConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.close_max_m > 0.0
            && self.close_max_m < self.far_min_m
            && self.far_min_m <= self.far_max_m
            && self.far_max_m.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "distance gates must satisfy 0 < close_max ({}) < far_min ({}) <= far_max ({})",
                self.close_max_m, self.far_min_m, self.far_max_m
            )))
        }
    }

    /// Closed intervals `[0, close_max]` and `[far_min, far_max]`; anything
    /// else is dropped.
    pub fn classify(&self, distance_m: f64) -> Option<ProximityClass> {
        if (0.0..=self.close_max_m).contains(&distance_m) {
            Some(ProximityClass::Close)
        } else if (self.far_min_m..=self.far_max_m).contains(&distance_m) {
            Some(ProximityClass::Far)
        } else {
            None
        }
    }
}

/// Planar distance between two scans of the same floor.
pub fn pair_distance(a: &Fingerprint, b: &Fingerprint) -> Result<f64> {
    if a.floor_key != b.floor_key {
        return Err(Error::Validation(format!(
            "fingerprints {:?} and {:?} are on different floors ({} vs {})",
            a.id, b.id, a.floor_key, b.floor_key
        )));
    }
    Ok(a.position.distance(&b.position))
}

fn same_burst(a: &Fingerprint, b: &Fingerprint) -> bool {
    matches!((&a.burst_id, &b.burst_id), (Some(x), Some(y)) if x == y)
}

/// Every labeled pair within each floor, canonically ordered, sorted by
/// `(floor, a.id, b.id)`.
pub fn enumerate_pairs<'a>(fps: &'a [Fingerprint], cfg: &PairingConfig) -> Vec<FingerprintPair<'a>> {
    let mut floors: BTreeMap<_, Vec<&Fingerprint>> = BTreeMap::new();
    for fp in fps {
        floors.entry(&fp.floor_key).or_default().push(fp);
    }
    let mut out = Vec::new();
    for members in floors.values() {
        let start = out.len();
        for (i, x) in members.iter().enumerate() {
            for y in &members[i + 1..] {
                if cfg.exclude_same_burst && same_burst(x, y) {
                    continue;
                }
                let d = x.position.distance(&y.position);
                if let Some(label) = cfg.classify(d) {
                    out.push(FingerprintPair::new(x, y, d, label));
                }
            }
        }
        out[start..].sort_by(|p, q| p.a.id.cmp(&q.a.id).then_with(|| p.b.id.cmp(&q.b.id)));
    }
    out
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassCounts {
    pub close: usize,
    pub far: usize,
}

impl ClassCounts {
    pub fn of<I: IntoIterator<Item = ProximityClass>>(labels: I) -> Self {
        let mut c = ClassCounts::default();
        for l in labels {
            match l {
                ProximityClass::Close => c.close += 1,
                ProximityClass::Far => c.far += 1,
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.close + self.far
    }
}

/// Indices selected for training and the untouched remainder, both ascending.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TrainingSplit {
    pub train: Vec<usize>,
    pub remainder: Vec<usize>,
}

/// Uniform sampling without replacement per class, reproducible from `seed`.
///
/// `labels[i]` is the class of item `i`. Everything not drawn is returned as
/// the evaluation remainder.
pub fn sample_training_set(
    labels: &[ProximityClass],
    n_close: usize,
    n_far: usize,
    seed: u64,
) -> Result<TrainingSplit> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = vec![false; labels.len()];
    for (class, wanted) in [(ProximityClass::Close, n_close), (ProximityClass::Far, n_far)] {
        let pool: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if wanted > pool.len() {
            return Err(Error::Validation(format!(
                "requested {wanted} {class} samples but only {} are available",
                pool.len()
            )));
        }
        for k in rand::seq::index::sample(&mut rng, pool.len(), wanted) {
            chosen[pool[k]] = true;
        }
    }
    let (train, remainder): (Vec<usize>, Vec<usize>) = (0..labels.len()).partition(|&i| chosen[i]);
    Ok(TrainingSplit { train, remainder })
}

/// A pair as persisted on disk: fingerprint ids instead of the scans.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairRecord {
    pub a: String,
    pub b: String,
    pub distance_m: f64,
    pub label: ProximityClass,
}

impl From<&FingerprintPair<'_>> for PairRecord {
    fn from(p: &FingerprintPair<'_>) -> Self {
        PairRecord {
            a: p.a.id.clone(),
            b: p.b.id.clone(),
            distance_m: p.distance_m,
            label: p.label,
        }
    }
}

pub fn save_pairs(path: impl AsRef<Path>, pairs: &[PairRecord]) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    for p in pairs {
        let line = serde_json::to_string(p).expect("pair record serialization is infallible");
        writeln!(w, "{line}").map_err(io)?;
    }
    w.flush().map_err(io)
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Vec<PairRecord>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?);
    }
    Ok(out)
}
