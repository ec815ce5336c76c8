//! Synthetic Wi-Fi environments based on log-distance path loss.
//!
//! `RSSI = P0 - 10 n log10(d / d0) - wall_loss * d + shadowing + noise`,
//! seen through a device model (gain, scale, detection threshold) and
//! rounded to whole dBm. Scans are recorded in bursts on a jittered grid.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{ApId, Fingerprint, FloorKey, Position, Readings};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Density {
    Low,
    Medium,
    High,
}

impl Density {
    pub const ALL: [Density; 3] = [Density::Low, Density::Medium, Density::High];

    /// APs deployed around one floor.
    pub fn ap_count(self) -> usize {
        match self {
            Density::Low => 14,
            Density::Medium => 70,
            Density::High => 170,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Density::Low => "low",
            Density::Medium => "medium",
            Density::High => "high",
        }
    }
}

impl std::str::FromStr for Density {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "low" => Ok(Density::Low),
            "medium" => Ok(Density::Medium),
            "high" => Ok(Density::High),
            other => Err(Error::Config(format!("unknown density {other:?} (low, medium, high)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dataset_id: String,
    pub seed: u64,
    pub density: Density,
    /// Overrides the density preset's AP count.
    pub n_aps: Option<usize>,
    pub floors: usize,
    pub width_m: f64,
    pub depth_m: f64,
    /// APs are placed up to this far outside the surveyed area.
    pub ap_margin_m: f64,
    pub grid_spacing_m: f64,
    pub position_jitter_m: f64,
    pub scans_per_burst: usize,
    pub n_devices: usize,
    pub p0_mean_dbm: f64,
    pub p0_sd_db: f64,
    pub exponent_min: f64,
    pub exponent_max: f64,
    pub wall_loss_db_per_m: f64,
    pub shadowing_sd_db: f64,
    pub shadowing_corr_m: f64,
    pub noise_sd_db: f64,
    pub device_gain_sd_db: f64,
    pub device_scale_spread: f64,
    pub threshold_min_dbm: f64,
    pub threshold_max_dbm: f64,
    pub dropout: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            dataset_id: "synth".into(),
            seed: 0,
            density: Density::Medium,
            n_aps: None,
            floors: 1,
            width_m: 36.0,
            depth_m: 20.0,
            ap_margin_m: 10.0,
            grid_spacing_m: 1.5,
            position_jitter_m: 0.25,
            scans_per_burst: 3,
            n_devices: 4,
            p0_mean_dbm: -38.0,
            p0_sd_db: 4.0,
            exponent_min: 2.6,
            exponent_max: 3.4,
            wall_loss_db_per_m: 0.3,
            shadowing_sd_db: 4.0,
            shadowing_corr_m: 4.0,
            noise_sd_db: 2.5,
            device_gain_sd_db: 4.0,
            device_scale_spread: 0.12,
            threshold_min_dbm: -92.0,
            threshold_max_dbm: -84.0,
            dropout: 0.05,
        }
    }
}

impl SynthConfig {
    /// Preset for one density class. Sparse deployments are modeled as
    /// open residential space, dense ones as cluttered offices with stronger
    /// attenuation and shadowing.
    pub fn with_density(density: Density, seed: u64) -> Self {
        let base = SynthConfig {
            dataset_id: format!("synth-{}-{seed}", density.as_str()),
            seed,
            density,
            ..Default::default()
        };
        match density {
            Density::Low => SynthConfig {
                exponent_min: 2.2,
                exponent_max: 2.8,
                wall_loss_db_per_m: 0.15,
                shadowing_sd_db: 3.0,
                shadowing_corr_m: 6.0,
                ..base
            },
            Density::Medium => base,
            Density::High => SynthConfig {
                exponent_min: 3.0,
                exponent_max: 3.8,
                wall_loss_db_per_m: 0.45,
                shadowing_sd_db: 5.0,
                shadowing_corr_m: 3.0,
                ..base
            },
        }
    }

    pub fn ap_count(&self) -> usize {
        self.n_aps.unwrap_or_else(|| self.density.ap_count())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.dataset_id.is_empty() {
            return bad("dataset_id must not be empty");
        }
        if self.floors == 0 || self.scans_per_burst == 0 || self.n_devices == 0 || self.ap_count() == 0 {
            return bad("floors, scans_per_burst, n_devices and AP count must be at least 1");
        }
        let positive = [self.width_m, self.depth_m, self.grid_spacing_m, self.shadowing_corr_m];
        if positive.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return bad("site dimensions, grid spacing and shadowing correlation must be positive");
        }
        let non_negative = [
            self.ap_margin_m,
            self.position_jitter_m,
            self.p0_sd_db,
            self.wall_loss_db_per_m,
            self.shadowing_sd_db,
            self.noise_sd_db,
            self.device_gain_sd_db,
            self.device_scale_spread,
        ];
        if non_negative.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return bad("spreads and losses must be non-negative");
        }
        if !(self.exponent_min > 0.0 && self.exponent_min <= self.exponent_max) {
            return bad("path loss exponent range is invalid");
        }
        if !matches!(
            self.threshold_min_dbm.partial_cmp(&self.threshold_max_dbm),
            Some(std::cmp::Ordering::Less | std::cmp::Ordering::Equal)
        ) {
            return bad("device threshold range is invalid");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must be in [0, 1)");
        }
        if self.device_scale_spread >= 1.0 {
            return bad("device_scale_spread must be below 1");
        }
        Ok(())
    }
}

const SHADOW_WAVES: usize = 8;

/// Smooth Gaussian-like random field: a sum of random plane waves.
#[derive(Clone, Debug)]
struct ShadowField {
    waves: Vec<(f64, f64, f64)>,
    amplitude: f64,
}

impl ShadowField {
    fn sample(rng: &mut ChaCha8Rng, sd: f64, corr_m: f64) -> Self {
        let k = 2.0 * PI / corr_m;
        let waves = (0..SHADOW_WAVES)
            .map(|_| {
                let theta = rng.random_range(0.0..2.0 * PI);
                let phase = rng.random_range(0.0..2.0 * PI);
                (k * theta.cos(), k * theta.sin(), phase)
            })
            .collect();
        ShadowField {
            waves,
            amplitude: sd * (2.0 / SHADOW_WAVES as f64).sqrt(),
        }
    }

    fn at(&self, p: Position) -> f64 {
        self.amplitude
            * self
                .waves
                .iter()
                .map(|&(kx, ky, ph)| (kx * p.x_m + ky * p.y_m + ph).cos())
                .sum::<f64>()
    }
}

#[derive(Clone, Debug)]
struct AccessPoint {
    id: ApId,
    position: Position,
    p0: f64,
    exponent: f64,
    shadow: ShadowField,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Device {
    pub model: String,
    pub gain_db: f64,
    pub scale: f64,
    pub threshold_dbm: f64,
}

impl Device {
    /// Reported RSSI for a true received power, or None below sensitivity.
    pub fn observe(&self, rssi: f64) -> Option<f64> {
        let seen = (self.gain_db + self.scale * rssi).round();
        (seen >= self.threshold_dbm).then_some(seen)
    }
}

/// Generated scans plus the devices that recorded them.
#[derive(Clone, Debug)]
pub struct SynthSite {
    pub fingerprints: Vec<Fingerprint>,
    pub devices: Vec<Device>,
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthSite> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");

    let devices: Vec<Device> = (0..cfg.n_devices)
        .map(|i| Device {
            model: format!("synth-device-{i}"),
            gain_db: cfg.device_gain_sd_db * std_normal.sample(&mut rng),
            scale: 1.0 + rng.random_range(-1.0..=1.0) * cfg.device_scale_spread,
            threshold_dbm: rng.random_range(cfg.threshold_min_dbm..=cfg.threshold_max_dbm),
        })
        .collect();

    let nx = (cfg.width_m / cfg.grid_spacing_m).floor() as usize + 1;
    let ny = (cfg.depth_m / cfg.grid_spacing_m).floor() as usize + 1;
    let mut fingerprints = Vec::new();
    let mut next_ap = 0u32;

    for floor in 0..cfg.floors {
        let floor_key = FloorKey::new(cfg.dataset_id.clone(), "synth", floor.to_string());
        // stratified placement: one AP in each of `n` random cells of a grid
        // covering the site plus margin
        let (rw, rh) = (cfg.width_m + 2.0 * cfg.ap_margin_m, cfg.depth_m + 2.0 * cfg.ap_margin_m);
        let n = cfg.ap_count();
        let cols = ((n as f64 * rw / rh).sqrt().ceil() as usize).max(1);
        let rows = n.div_ceil(cols);
        let (cw, ch) = (rw / cols as f64, rh / rows as f64);
        let cells = rand::seq::index::sample(&mut rng, cols * rows, n).into_vec();
        let aps: Vec<AccessPoint> = cells
            .into_iter()
            .map(|cell| {
                next_ap += 1;
                let (cx, cy) = ((cell % cols) as f64, (cell / cols) as f64);
                AccessPoint {
                    id: ApId::from_index(next_ap),
                    position: Position::new(
                        -cfg.ap_margin_m + (cx + rng.random::<f64>()) * cw,
                        -cfg.ap_margin_m + (cy + rng.random::<f64>()) * ch,
                    ),
                    p0: cfg.p0_mean_dbm + cfg.p0_sd_db * std_normal.sample(&mut rng),
                    exponent: rng.random_range(cfg.exponent_min..=cfg.exponent_max),
                    shadow: ShadowField::sample(&mut rng, cfg.shadowing_sd_db, cfg.shadowing_corr_m),
                }
            })
            .collect();

        for gy in 0..ny {
            for gx in 0..nx {
                let cell = gy * nx + gx;
                let jitter = |rng: &mut ChaCha8Rng| rng.random_range(-1.0..=1.0) * cfg.position_jitter_m;
                let pos = Position::new(
                    gx as f64 * cfg.grid_spacing_m + jitter(&mut rng),
                    gy as f64 * cfg.grid_spacing_m + jitter(&mut rng),
                );
                let device = &devices[rng.random_range(0..devices.len())];
                let burst_id = format!("f{floor}-p{cell:04}");
                for scan in 0..cfg.scans_per_burst {
                    let mut readings = Vec::new();
                    for ap in &aps {
                        let d = ap.position.distance(&pos).max(1.0);
                        let rssi = ap.p0 - 10.0 * ap.exponent * d.log10() - cfg.wall_loss_db_per_m * d
                            + ap.shadow.at(pos)
                            + cfg.noise_sd_db * std_normal.sample(&mut rng);
                        let dropped = rng.random::<f64>() < cfg.dropout;
                        if let (false, Some(seen)) = (dropped, device.observe(rssi)) {
                            readings.push((ap.id, seen));
                        }
                    }
                    if readings.is_empty() {
                        continue;
                    }
                    let fp = Fingerprint::new(
                        format!("{}:{burst_id}:s{scan}", cfg.dataset_id),
                        Readings::from_pairs(readings)?,
                        pos,
                        floor_key.clone(),
                        device.model.clone(),
                    )?
                    .with_burst(burst_id.clone(), Some(scan as u32));
                    fingerprints.push(fp);
                }
            }
        }
    }
    Ok(SynthSite { fingerprints, devices })
}
