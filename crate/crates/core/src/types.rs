//! Domain model shared by every stage of the pipeline.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

/// An access point identifier (BSSID).
///
/// Stored as the 48-bit integer value of the MAC address. Ordering of the
/// integer agrees with lexicographic ordering of the canonical
/// `aa:bb:cc:dd:ee:ff` string, so either can be used for tie-breaking.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ApId(u64);

impl ApId {
    const MAX: u64 = (1 << 48) - 1;

    pub fn from_u64(value: u64) -> Result<Self> {
        if value > Self::MAX {
            return Err(Error::Validation(format!("AP id {value} exceeds 48 bits")));
        }
        Ok(ApId(value))
    }

    /// Maps an anonymized integer AP id (as used by public datasets) into the
    /// BSSID space, e.g. `7 -> 00:00:00:00:00:07`.
    pub fn from_index(index: u32) -> Self {
        ApId(u64::from(index))
    }

    pub fn as_u64(self) -> u64 {
        self.0
    }
}

impl FromStr for ApId {
    type Err = Error;

    /// Accepts `:` or `-` separated octets (1 or 2 hex digits each, any case)
    /// or a bare 12-digit hex string.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::Validation(format!("invalid bssid {s:?}"));
        let octets: Vec<&str> = if s.contains(':') || s.contains('-') {
            s.split([':', '-']).collect()
        } else if s.len() == 12 {
            (0..6).map(|i| &s[2 * i..2 * i + 2]).collect()
        } else {
            return Err(bad());
        };
        if octets.len() != 6 {
            return Err(bad());
        }
        let mut value = 0u64;
        for octet in octets {
            if octet.is_empty() || octet.len() > 2 {
                return Err(bad());
            }
            let byte = u8::from_str_radix(octet, 16).map_err(|_| bad())?;
            value = (value << 8) | u64::from(byte);
        }
        Ok(ApId(value))
    }
}

impl fmt::Display for ApId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let b = self.0.to_be_bytes();
        write!(
            f,
            "{:02x}:{:02x}:{:02x}:{:02x}:{:02x}:{:02x}",
            b[2], b[3], b[4], b[5], b[6], b[7]
        )
    }
}

impl Serialize for ApId {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ApId {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Identifies one independent pairing subset: a floor of a building of a dataset.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct FloorKey {
    pub dataset: String,
    pub building: String,
    pub floor: String,
}

impl FloorKey {
    pub fn new(dataset: impl Into<String>, building: impl Into<String>, floor: impl Into<String>) -> Self {
        FloorKey {
            dataset: dataset.into(),
            building: building.into(),
            floor: floor.into(),
        }
    }
}

impl fmt::Display for FloorKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.dataset, self.building, self.floor)
    }
}

/// Planar position within a floor frame, in meters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x_m: f64,
    pub y_m: f64,
}

impl Position {
    pub fn new(x_m: f64, y_m: f64) -> Self {
        Position { x_m, y_m }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x_m - other.x_m).hypot(self.y_m - other.y_m)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reading {
    pub ap: ApId,
    pub rssi: f64,
}

/// AP readings of one scan, sorted by [`ApId`] with no duplicates.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct Readings(Vec<Reading>);

impl Readings {
    /// Validates and sorts. Rejects duplicate APs and non-finite RSSI values.
    pub fn new(mut readings: Vec<Reading>) -> Result<Self> {
        if let Some(r) = readings.iter().find(|r| !r.rssi.is_finite()) {
            return Err(Error::Validation(format!("non-finite rssi for {}", r.ap)));
        }
        readings.sort_by_key(|r| r.ap);
        if let Some(w) = readings.windows(2).find(|w| w[0].ap == w[1].ap) {
            return Err(Error::Validation(format!("duplicate bssid {}", w[0].ap)));
        }
        Ok(Readings(readings))
    }

    pub fn from_pairs<I: IntoIterator<Item = (ApId, f64)>>(pairs: I) -> Result<Self> {
        Self::new(pairs.into_iter().map(|(ap, rssi)| Reading { ap, rssi }).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Reading> {
        self.0.iter()
    }

    pub fn as_slice(&self) -> &[Reading] {
        &self.0
    }

    pub fn get(&self, ap: ApId) -> Option<f64> {
        self.0.binary_search_by_key(&ap, |r| r.ap).ok().map(|i| self.0[i].rssi)
    }

    /// Applies `rssi -> scale * rssi + offset` to every reading.
    pub fn affine(&self, scale: f64, offset: f64) -> Readings {
        Readings(
            self.0
                .iter()
                .map(|r| Reading {
                    ap: r.ap,
                    rssi: scale * r.rssi + offset,
                })
                .collect(),
        )
    }
}

impl<'a> IntoIterator for &'a Readings {
    type Item = &'a Reading;
    type IntoIter = std::slice::Iter<'a, Reading>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.iter()
    }
}

/// One Wi-Fi scan together with where, how and by which device it was recorded.
#[derive(Clone, Debug, PartialEq)]
pub struct Fingerprint {
    pub id: String,
    readings: Readings,
    pub position: Position,
    pub floor_key: FloorKey,
    pub device_model: String,
    pub burst_id: Option<String>,
    pub scan_index: Option<u32>,
}

impl Fingerprint {
    /// Builds a fingerprint; fails when `readings` is empty.
    pub fn new(
        id: impl Into<String>,
        readings: Readings,
        position: Position,
        floor_key: FloorKey,
        device_model: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        if readings.is_empty() {
            return Err(Error::Validation(format!("fingerprint {id:?} has no readings")));
        }
        if !position.x_m.is_finite() || !position.y_m.is_finite() {
            return Err(Error::Validation(format!(
                "fingerprint {id:?} has a non-finite position"
            )));
        }
        Ok(Fingerprint {
            id,
            readings,
            position,
            floor_key,
            device_model: device_model.into(),
            burst_id: None,
            scan_index: None,
        })
    }

    pub fn with_burst(mut self, burst_id: impl Into<String>, scan_index: Option<u32>) -> Self {
        self.burst_id = Some(burst_id.into());
        self.scan_index = scan_index;
        self
    }

    pub fn readings(&self) -> &Readings {
        &self.readings
    }

    pub fn ap_count(&self) -> usize {
        self.readings.len()
    }

    /// Returns a copy whose readings are replaced (position and metadata kept).
    pub fn with_readings(&self, readings: Readings) -> Fingerprint {
        Fingerprint {
            readings,
            ..self.clone()
        }
    }
}

/// Consecutive scans recorded at one position by one device.
#[derive(Clone, Debug, PartialEq)]
pub struct Burst {
    pub burst_id: String,
    pub floor_key: FloorKey,
    pub position: Position,
    pub device_model: String,
    /// Ordered by scan index, indices contiguous from 0.
    pub scans: Vec<Fingerprint>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProximityClass {
    Close,
    Far,
}

impl ProximityClass {
    pub fn is_close(self) -> bool {
        self == ProximityClass::Close
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ProximityClass::Close => "close",
            ProximityClass::Far => "far",
        }
    }
}

impl fmt::Display for ProximityClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProximityClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "close" => Ok(ProximityClass::Close),
            "far" => Ok(ProximityClass::Far),
            other => Err(Error::Validation(format!("unknown proximity class {other:?}"))),
        }
    }
}

/// Orders two fingerprints canonically: fewer detected APs first, ties by id.
/// Fully identical keys fall back to the readings themselves so the order is
/// total.
pub fn canonical_order(a: &Fingerprint, b: &Fingerprint) -> Ordering {
    a.ap_count()
        .cmp(&b.ap_count())
        .then_with(|| a.id.cmp(&b.id))
        .then_with(|| a.device_model.cmp(&b.device_model))
        .then_with(|| {
            a.readings
                .iter()
                .zip(b.readings.iter())
                .map(|(ra, rb)| ra.ap.cmp(&rb.ap).then(ra.rssi.total_cmp(&rb.rssi)))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

/// Two fingerprints from the same floor subset with ground-truth distance and
/// label. Borrowed, so enumerating every pair of a floor stays cheap.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FingerprintPair<'a> {
    pub a: &'a Fingerprint,
    pub b: &'a Fingerprint,
    pub distance_m: f64,
    pub label: ProximityClass,
}

impl<'a> FingerprintPair<'a> {
    /// Builds the pair in canonical order regardless of argument order.
    pub fn new(x: &'a Fingerprint, y: &'a Fingerprint, distance_m: f64, label: ProximityClass) -> Self {
        let (a, b) = if canonical_order(x, y) == Ordering::Greater {
            (y, x)
        } else {
            (x, y)
        };
        FingerprintPair {
            a,
            b,
            distance_m,
            label,
        }
    }

    pub fn pair_id(&self) -> String {
        format!("{}|{}", self.a.id, self.b.id)
    }
}

/// APs detected in both fingerprints, ascending by [`ApId`].
pub fn shared_aps(a: &Fingerprint, b: &Fingerprint) -> Vec<ApId> {
    shared_readings(a.readings(), b.readings())
        .map(|(ap, _, _)| ap)
        .collect()
}

/// Merge-joins two reading sets, yielding `(ap, rssi_a, rssi_b)` for shared APs.
pub fn shared_readings<'a>(a: &'a Readings, b: &'a Readings) -> impl Iterator<Item = (ApId, f64, f64)> + 'a {
    let (xs, ys) = (a.as_slice(), b.as_slice());
    let (mut i, mut j) = (0, 0);
    std::iter::from_fn(move || {
        while i < xs.len() && j < ys.len() {
            match xs[i].ap.cmp(&ys[j].ap) {
                Ordering::Less => i += 1,
                Ordering::Greater => j += 1,
                Ordering::Equal => {
                    let item = (xs[i].ap, xs[i].rssi, ys[j].rssi);
                    i += 1;
                    j += 1;
                    return Some(item);
                }
            }
        }
        None
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::collections::BTreeSet;

    fn fp(id: &str, aps: &[(u64, f64)]) -> Fingerprint {
        let readings = Readings::from_pairs(aps.iter().map(|&(a, r)| (ApId::from_u64(a).unwrap(), r))).unwrap();
        Fingerprint::new(
            id,
            readings,
            Position::new(0.0, 0.0),
            FloorKey::new("d", "b", "f"),
            "dev",
        )
        .unwrap()
    }

    fn ap(v: u64) -> ApId {
        ApId::from_u64(v).unwrap()
    }

    #[test]
    fn bssid_normalizes() {
        let id: ApId = "AA:bB:0:d-EE:f".parse().unwrap();
        assert_eq!(id.to_string(), "aa:bb:00:0d:ee:0f");
        let id: ApId = "a:b:c:d:e:f".parse().unwrap();
        assert_eq!(id.to_string(), "0a:0b:0c:0d:0e:0f");
        let id: ApId = "AABBCCDDEEFF".parse().unwrap();
        assert_eq!(id.to_string(), "aa:bb:cc:dd:ee:ff");
        assert_eq!(ApId::from_index(0x1234).to_string(), "00:00:00:00:12:34");
        assert!("aa:bb:cc:dd:ee".parse::<ApId>().is_err());
        assert!("aa:bb:cc:dd:ee:gg".parse::<ApId>().is_err());
        assert!("aa:bb:cc:dd:ee:fff".parse::<ApId>().is_err());
    }

    #[test]
    fn duplicate_ap_rejected() {
        let err = Readings::from_pairs([(ap(1), -50.0), (ap(1), -60.0)]).unwrap_err();
        assert!(err.to_string().contains("duplicate"));
    }

    #[test]
    fn empty_fingerprint_rejected() {
        let r = Fingerprint::new(
            "x",
            Readings::default(),
            Position::new(0.0, 0.0),
            FloorKey::new("d", "b", "f"),
            "dev",
        );
        assert!(r.is_err());
    }

    #[test]
    fn shared_singleton() {
        let a = fp("a", &[(1, -50.0)]);
        let b = fp("b", &[(1, -60.0)]);
        assert_eq!(shared_aps(&a, &b), vec![ap(1)]);
    }

    #[test]
    fn shared_disjoint() {
        let a = fp("a", &[(1, -50.0), (2, -40.0)]);
        let b = fp("b", &[(3, -60.0)]);
        assert!(shared_aps(&a, &b).is_empty());
    }

    #[test]
    fn shared_overlap_sorted() {
        // p=30, q=10, r=20 inserted out of order; s=40
        let a = fp("a", &[(30, -50.0), (10, -40.0), (20, -45.0)]);
        let b = fp("b", &[(40, -60.0), (20, -61.0), (10, -62.0)]);
        assert_eq!(shared_aps(&a, &b), vec![ap(10), ap(20)]);
    }

    #[test]
    fn pair_is_canonical() {
        let small = fp("z", &[(1, -50.0)]);
        let big = fp("a", &[(1, -50.0), (2, -50.0)]);
        let p = FingerprintPair::new(&big, &small, 1.0, ProximityClass::Close);
        assert_eq!(p.a.id, "z");
        let q = FingerprintPair::new(&small, &big, 1.0, ProximityClass::Close);
        assert_eq!(p, q);
    }

    proptest! {
        #[test]
        fn shared_matches_brute_force(
            xs in proptest::collection::btree_set(0u64..40, 1..20),
            ys in proptest::collection::btree_set(0u64..40, 1..20),
        ) {
            let a = fp("a", &xs.iter().map(|&v| (v, -50.0)).collect::<Vec<_>>());
            let b = fp("b", &ys.iter().map(|&v| (v, -60.0)).collect::<Vec<_>>());
            let expected: Vec<ApId> = xs.intersection(&ys).map(|&v| ap(v)).collect();
            prop_assert_eq!(shared_aps(&a, &b), expected.clone());
            prop_assert_eq!(shared_aps(&b, &a), expected.clone());
            let union: BTreeSet<u64> = xs.union(&ys).copied().collect();
            let non_shared = xs.symmetric_difference(&ys).count();
            prop_assert_eq!(expected.len() + non_shared, union.len());
        }

        #[test]
        fn bssid_display_parse_round_trip(v in 0u64..(1u64 << 48)) {
            let id = ApId::from_u64(v).unwrap();
            let s = id.to_string();
            prop_assert_eq!(s.len(), 17);
            prop_assert_eq!(s.parse::<ApId>().unwrap(), id);
        }
    }
}
