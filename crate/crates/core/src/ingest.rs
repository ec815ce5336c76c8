//! Loading fingerprints from disk, burst grouping and sub-burst
//! pseudo-fingerprints.
//!
//! Two on-disk sources are supported:
//!
//! * the canonical line-delimited JSON format, one scan per line:
//!   `{"id":..,"dataset":..,"building":..,"floor":..,"x_m":..,"y_m":..,
//!   "device":..,"burst":..|null,"scan":..|null,"aps":[{"bssid":..,"rssi":..}]}`
//! * wide CSV matrices (one column per AP, a sentinel for "not detected") as
//!   published by the common indoor localization datasets, described by a
//!   TOML [`DatasetManifest`].

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats;
use crate::types::{ApId, Burst, Fingerprint, FloorKey, Position, Readings};

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalAp {
    bssid: ApId,
    rssi: f64,
}

#[derive(Debug, Serialize, Deserialize)]
struct CanonicalRecord {
    id: String,
    dataset: String,
    building: String,
    floor: String,
    x_m: f64,
    y_m: f64,
    device: String,
    burst: Option<String>,
    scan: Option<u32>,
    aps: Vec<CanonicalAp>,
}

impl CanonicalRecord {
    fn into_fingerprint(self) -> Result<Fingerprint> {
        let readings = Readings::from_pairs(self.aps.into_iter().map(|a| (a.bssid, a.rssi)))?;
        let mut fp = Fingerprint::new(
            self.id,
            readings,
            Position::new(self.x_m, self.y_m),
            FloorKey::new(self.dataset, self.building, self.floor),
            self.device,
        )?;
        fp.burst_id = self.burst;
        fp.scan_index = self.scan;
        Ok(fp)
    }

    fn from_fingerprint(fp: &Fingerprint) -> Self {
        CanonicalRecord {
            id: fp.id.clone(),
            dataset: fp.floor_key.dataset.clone(),
            building: fp.floor_key.building.clone(),
            floor: fp.floor_key.floor.clone(),
            x_m: fp.position.x_m,
            y_m: fp.position.y_m,
            device: fp.device_model.clone(),
            burst: fp.burst_id.clone(),
            scan: fp.scan_index,
            aps: fp
                .readings()
                .iter()
                .map(|r| CanonicalAp {
                    bssid: r.ap,
                    rssi: r.rssi,
                })
                .collect(),
        }
    }
}

/// Parses canonical records from a reader. `origin` only labels errors.
pub fn parse_canonical<R: Read>(reader: R, origin: &Path) -> Result<Vec<Fingerprint>> {
    let mut out = Vec::new();
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(origin, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: line_no,
            message,
        };
        let record: CanonicalRecord = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        out.push(record.into_fingerprint().map_err(|e| parse_err(e.to_string()))?);
    }
    Ok(out)
}

pub fn load_canonical(path: impl AsRef<Path>) -> Result<Vec<Fingerprint>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_canonical(file, path)
}

/// One canonical line (no trailing newline).
pub fn canonical_line(fp: &Fingerprint) -> String {
    serde_json::to_string(&CanonicalRecord::from_fingerprint(fp)).expect("canonical record serialization is infallible")
}

pub fn write_canonical<W: Write>(mut writer: W, fps: &[Fingerprint]) -> std::io::Result<()> {
    for fp in fps {
        writeln!(writer, "{}", canonical_line(fp))?;
    }
    writer.flush()
}

pub fn save_canonical(path: impl AsRef<Path>, fps: &[Fingerprint]) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_canonical(BufWriter::new(file), fps).map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    CanonicalJsonl,
    WideCsv,
}

/// Describes one dataset on disk. Loaded from TOML; `path` is resolved
/// relative to the manifest file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub dataset_id: String,
    pub format: DatasetFormat,
    pub path: PathBuf,
    /// Cell value meaning "AP not detected" (100 in the UJI family of datasets).
    #[serde(default = "default_sentinel")]
    pub not_detected_sentinel: f64,
    #[serde(default = "default_prefix")]
    pub ap_column_prefix: String,
    #[serde(default = "default_x")]
    pub x_column: String,
    #[serde(default = "default_y")]
    pub y_column: String,
    /// Multiplier taking coordinate units to meters.
    #[serde(default = "default_scale")]
    pub coordinate_scale: f64,
    #[serde(default)]
    pub device_column: Option<String>,
    #[serde(default)]
    pub building_column: Option<String>,
    #[serde(default)]
    pub floor_column: Option<String>,
    #[serde(default)]
    pub id_column: Option<String>,
    #[serde(default)]
    pub burst_column: Option<String>,
    #[serde(default)]
    pub scan_column: Option<String>,
}

fn default_sentinel() -> f64 {
    100.0
}
fn default_prefix() -> String {
    "WAP".into()
}
fn default_x() -> String {
    "LONGITUDE".into()
}
fn default_y() -> String {
    "LATITUDE".into()
}
fn default_scale() -> f64 {
    1.0
}

impl DatasetManifest {
    /// A wide-CSV manifest with UJIndoorLoc-style defaults.
    pub fn wide_csv(dataset_id: impl Into<String>, path: impl Into<PathBuf>) -> Self {
        DatasetManifest {
            dataset_id: dataset_id.into(),
            format: DatasetFormat::WideCsv,
            path: path.into(),
            not_detected_sentinel: default_sentinel(),
            ap_column_prefix: default_prefix(),
            x_column: default_x(),
            y_column: default_y(),
            coordinate_scale: default_scale(),
            device_column: None,
            building_column: None,
            floor_column: None,
            id_column: None,
            burst_column: None,
            scan_column: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: DatasetManifest =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        if manifest.path.is_relative() {
            if let Some(dir) = path.parent() {
                manifest.path = dir.join(&manifest.path);
            }
        }
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.coordinate_scale > 0.0 && self.coordinate_scale.is_finite()) {
            return Err(Error::Config(format!(
                "coordinate_scale must be > 0, got {}",
                self.coordinate_scale
            )));
        }
        if !self.path.exists() {
            return Err(Error::io(
                &self.path,
                std::io::Error::new(std::io::ErrorKind::NotFound, "dataset file not found"),
            ));
        }
        Ok(())
    }
}

/// Rows the wide-CSV adapter did not turn into fingerprints.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SkipReport {
    pub rows_read: usize,
    /// No AP detected in the row.
    pub empty: usize,
    /// More cells than header columns.
    pub oversized: usize,
    /// Fewer cells than header columns.
    pub malformed: usize,
}

impl SkipReport {
    pub fn skipped(&self) -> usize {
        self.empty + self.oversized + self.malformed
    }
}

/// Loads whatever the manifest describes.
pub fn load_manifest_dataset(manifest: &DatasetManifest) -> Result<(Vec<Fingerprint>, SkipReport)> {
    match manifest.format {
        DatasetFormat::WideCsv => load_wide_csv(manifest),
        DatasetFormat::CanonicalJsonl => {
            let fps = load_canonical(&manifest.path)?;
            let report = SkipReport {
                rows_read: fps.len(),
                ..SkipReport::default()
            };
            Ok((fps, report))
        }
    }
}

/// Loads a wide-matrix CSV: one row per scan, one column per AP.
pub fn load_wide_csv(manifest: &DatasetManifest) -> Result<(Vec<Fingerprint>, SkipReport)> {
    manifest.validate()?;
    let path = &manifest.path;
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_wide_csv(file, manifest)
}

pub fn parse_wide_csv<R: Read>(reader: R, manifest: &DatasetManifest) -> Result<(Vec<Fingerprint>, SkipReport)> {
    let path = manifest.path.as_path();
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    let column = |name: &str| -> Result<usize> {
        header.iter().position(|h| h == name).ok_or_else(|| {
            Error::Config(format!(
                "{}: configured column {name:?} not found in header",
                path.display()
            ))
        })
    };
    let optional = |name: &Option<String>| -> Result<Option<usize>> { name.as_deref().map(column).transpose() };
    let x_col = column(&manifest.x_column)?;
    let y_col = column(&manifest.y_column)?;
    let device_col = optional(&manifest.device_column)?;
    let building_col = optional(&manifest.building_column)?;
    let floor_col = optional(&manifest.floor_column)?;
    let id_col = optional(&manifest.id_column)?;
    let burst_col = optional(&manifest.burst_column)?;
    let scan_col = optional(&manifest.scan_column)?;

    let ap_cols: Vec<(usize, ApId)> = header
        .iter()
        .enumerate()
        .filter_map(|(i, h)| {
            let suffix = h.strip_prefix(manifest.ap_column_prefix.as_str())?;
            let index = suffix.parse::<u32>().unwrap_or(i as u32 + 1);
            Some((i, ApId::from_index(index)))
        })
        .collect();
    if ap_cols.is_empty() {
        return Err(Error::Config(format!(
            "{}: no columns start with prefix {:?}",
            path.display(),
            manifest.ap_column_prefix
        )));
    }

    let mut report = SkipReport::default();
    let mut fps = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: row + 2,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(row + 2, |p| p.line() as usize);
        report.rows_read += 1;
        if record.len() < header.len() {
            report.malformed += 1;
            continue;
        }
        if record.len() > header.len() {
            report.oversized += 1;
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let number = |col: usize| -> Result<f64> {
            let cell = &record[col];
            cell.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(format!("column {:?}: non-numeric value {cell:?}", &header[col])))
        };

        let mut readings = Vec::new();
        for &(col, ap) in &ap_cols {
            let v = number(col)?;
            if v != manifest.not_detected_sentinel {
                readings.push((ap, v));
            }
        }
        if readings.is_empty() {
            report.empty += 1;
            continue;
        }
        let readings = Readings::from_pairs(readings).map_err(|e| parse_err(e.to_string()))?;
        let text = |col: Option<usize>, default: &str| -> String {
            col.map_or_else(|| default.to_string(), |c| record[c].to_string())
        };
        let position = Position::new(
            number(x_col)? * manifest.coordinate_scale,
            number(y_col)? * manifest.coordinate_scale,
        );
        let floor_key = FloorKey::new(
            manifest.dataset_id.clone(),
            text(building_col, "0"),
            text(floor_col, "0"),
        );
        let id = id_col.map_or_else(
            || format!("{}:{}", manifest.dataset_id, row + 1),
            |c| record[c].to_string(),
        );
        let mut fp = Fingerprint::new(id, readings, position, floor_key, text(device_col, "unknown"))
            .map_err(|e| parse_err(e.to_string()))?;
        if let Some(c) = burst_col {
            fp.burst_id = Some(record[c].to_string());
        }
        if let Some(c) = scan_col {
            let s = number(c)?;
            if s < 0.0 || s.fract() != 0.0 {
                return Err(parse_err(format!("scan index {s} is not a non-negative integer")));
            }
            fp.scan_index = Some(s as u32);
        }
        fps.push(fp);
    }
    Ok((fps, report))
}

/// Groups scans into bursts keyed by `(floor, burst_id)`, in key order.
pub fn group_bursts(fps: &[Fingerprint]) -> Result<Vec<Burst>> {
    let mut groups: BTreeMap<(FloorKey, String), Vec<&Fingerprint>> = BTreeMap::new();
    for fp in fps {
        let burst = fp
            .burst_id
            .as_ref()
            .ok_or_else(|| Error::Validation(format!("fingerprint {:?} has no burst id", fp.id)))?;
        groups
            .entry((fp.floor_key.clone(), burst.clone()))
            .or_default()
            .push(fp);
    }

    let mut bursts = Vec::with_capacity(groups.len());
    for ((floor_key, burst_id), mut scans) in groups {
        let bad = |what: &str| Error::Validation(format!("burst {burst_id:?} on {floor_key}: {what}"));
        if scans.iter().any(|s| s.scan_index.is_none()) {
            return Err(bad("scan without scan index"));
        }
        scans.sort_by_key(|s| s.scan_index);
        let first = scans[0];
        if scans.iter().any(|s| s.position != first.position) {
            return Err(bad("scans disagree on position"));
        }
        if scans.iter().any(|s| s.device_model != first.device_model) {
            return Err(bad("scans disagree on device model"));
        }
        if scans.iter().enumerate().any(|(i, s)| s.scan_index != Some(i as u32)) {
            return Err(bad("scan indices are not distinct and contiguous from 0"));
        }
        bursts.push(Burst {
            burst_id,
            floor_key,
            position: first.position,
            device_model: first.device_model.clone(),
            scans: scans.into_iter().cloned().collect(),
        });
    }
    Ok(bursts)
}

/// A median aggregate over several scans of one burst.
#[derive(Clone, Debug, PartialEq)]
pub struct PseudoFingerprint {
    pub fingerprint: Fingerprint,
    pub source_scan_ids: Vec<String>,
}

/// Scans per sub-burst; a burst yields two sub-bursts from its first
/// `2 * SUB_BURST_LEN` scans and the rest is discarded.
pub const SUB_BURST_LEN: usize = 4;

fn aggregate(burst: &Burst, scans: &[Fingerprint], part: usize) -> Result<PseudoFingerprint> {
    let mut samples: BTreeMap<ApId, Vec<f64>> = BTreeMap::new();
    for scan in scans {
        for r in scan.readings() {
            samples.entry(r.ap).or_default().push(r.rssi);
        }
    }
    let readings = Readings::from_pairs(samples.into_iter().map(|(ap, values)| (ap, stats::median(&values))))?;
    let id = format!("{}/{}#{part}", burst.floor_key, burst.burst_id);
    let mut fingerprint = Fingerprint::new(
        id,
        readings,
        burst.position,
        burst.floor_key.clone(),
        burst.device_model.clone(),
    )?;
    fingerprint.burst_id = Some(burst.burst_id.clone());
    Ok(PseudoFingerprint {
        fingerprint,
        source_scan_ids: scans.iter().map(|s| s.id.clone()).collect(),
    })
}

/// Splits a burst into two pseudo-fingerprints (scans 0-3 and 4-7).
/// Returns `None` for bursts shorter than 8 scans.
pub fn split_sub_bursts(burst: &Burst) -> Option<(PseudoFingerprint, PseudoFingerprint)> {
    if burst.scans.len() < 2 * SUB_BURST_LEN {
        return None;
    }
    let first = aggregate(burst, &burst.scans[..SUB_BURST_LEN], 0).ok()?;
    let second = aggregate(burst, &burst.scans[SUB_BURST_LEN..2 * SUB_BURST_LEN], 1).ok()?;
    Some((first, second))
}

/// Pseudo-fingerprints for every burst, plus the number of bursts skipped
/// for being too short.
pub fn pseudo_fingerprints(bursts: &[Burst]) -> (Vec<Fingerprint>, usize) {
    let mut out = Vec::with_capacity(bursts.len() * 2);
    let mut short = 0;
    for burst in bursts {
        match split_sub_bursts(burst) {
            Some((a, b)) => {
                out.push(a.fingerprint);
                out.push(b.fingerprint);
            }
            None => short += 1,
        }
    }
    (out, short)
}

/// Number of fingerprints per floor, useful for reports.
pub fn floor_counts(fps: &[Fingerprint]) -> BTreeMap<FloorKey, usize> {
    let mut counts = BTreeMap::new();
    for fp in fps {
        *counts.entry(fp.floor_key.clone()).or_insert(0) += 1;
    }
    counts
}

/// Looks fingerprints up by id; fails on duplicate ids.
pub fn index_by_id(fps: &[Fingerprint]) -> Result<HashMap<&str, &Fingerprint>> {
    let mut map = HashMap::with_capacity(fps.len());
    for fp in fps {
        if map.insert(fp.id.as_str(), fp).is_some() {
            return Err(Error::Validation(format!("duplicate fingerprint id {:?}", fp.id)));
        }
    }
    Ok(map)
}
