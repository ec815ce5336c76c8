//! Least-squares RSSI scale alignment between two devices.

use serde::{Deserialize, Serialize};

use crate::stats::mean;

/// `target ≈ slope * source + intercept`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

impl LinearFit {
    pub const IDENTITY: LinearFit = LinearFit {
        slope: 1.0,
        intercept: 0.0,
    };

    pub fn apply(&self, r: f64) -> f64 {
        self.slope * r + self.intercept
    }

    /// Ordinary least squares of `target` on `source`.
    ///
    /// With no points the identity is returned. When `source` is constant
    /// (including a single point) the slope is pinned to 1 and the intercept
    /// absorbs the mean offset.
    pub fn fit(source: &[f64], target: &[f64]) -> LinearFit {
        assert_eq!(source.len(), target.len(), "fit needs paired samples");
        if source.is_empty() {
            return LinearFit::IDENTITY;
        }
        let (ms, mt) = (mean(source), mean(target));
        if source.windows(2).all(|w| w[0] == w[1]) {
            return LinearFit {
                slope: 1.0,
                intercept: mt - ms,
            };
        }
        let mut sst = 0.0;
        let mut sss = 0.0;
        for (s, t) in source.iter().zip(target) {
            sst += (s - ms) * (t - mt);
            sss += (s - ms) * (s - ms);
        }
        let slope = sst / sss;
        LinearFit {
            slope,
            intercept: mt - slope * ms,
        }
    }
}

/// Both directions of the shared-AP fit for a pair `(x, y)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    /// Maps the first fingerprint's RSSIs onto the second's (`A`, `B`).
    pub forward: LinearFit,
    /// Maps the second fingerprint's RSSIs onto the first's (`C`, `D`).
    pub backward: LinearFit,
}

/// Fits `(A, B, C, D)` over the shared-AP RSSI vectors `x` (first
/// fingerprint) and `y` (second).
pub fn fit_least_squares(x: &[f64], y: &[f64]) -> PairFit {
    PairFit {
        forward: LinearFit::fit(x, y),
        backward: LinearFit::fit(y, x),
    }
}
