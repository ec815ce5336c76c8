//! In-memory feature table and its CSV representation.
//!
//! Columns: `pair_id,distance_m,label,<feature names...>`. Numbers are written
//! in the shortest form that parses back to the same `f64`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::features::{extract, feature_names, FeatureConfig};
use crate::pairing::ClassCounts;
use crate::types::{FingerprintPair, ProximityClass};

const META_COLUMNS: [&str; 3] = ["pair_id", "distance_m", "label"];

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureTable {
    pub names: Vec<String>,
    pub pair_ids: Vec<String>,
    pub distances: Vec<f64>,
    pub labels: Vec<ProximityClass>,
    /// Row-major, `len() == rows * names.len()`.
    values: Vec<f64>,
}

impl FeatureTable {
    pub fn new(names: Vec<String>) -> Self {
        FeatureTable {
            names,
            pair_ids: Vec::new(),
            distances: Vec::new(),
            labels: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn push_row(&mut self, pair_id: String, distance_m: f64, label: ProximityClass, values: &[f64]) -> Result<()> {
        if values.len() != self.names.len() {
            return Err(Error::Validation(format!(
                "row {pair_id:?} has {} values, table has {} columns",
                values.len(),
                self.names.len()
            )));
        }
        self.pair_ids.push(pair_id);
        self.distances.push(distance_m);
        self.labels.push(label);
        self.values.extend_from_slice(values);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.names.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.len()).map(|i| self.row(i)[j]).collect()
    }

    pub fn class_counts(&self) -> ClassCounts {
        ClassCounts::of(self.labels.iter().copied())
    }

    /// Rows at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> FeatureTable {
        let mut out = FeatureTable::new(self.names.clone());
        for &i in indices {
            out.pair_ids.push(self.pair_ids[i].clone());
            out.distances.push(self.distances[i]);
            out.labels.push(self.labels[i]);
            out.values.extend_from_slice(self.row(i));
        }
        out
    }

    /// Keeps only the named columns, in the given order.
    pub fn project(&self, names: &[String]) -> Result<FeatureTable> {
        let cols = names
            .iter()
            .map(|n| {
                self.names
                    .iter()
                    .position(|m| m == n)
                    .ok_or_else(|| Error::Validation(format!("feature {n:?} not in table")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut out = FeatureTable::new(names.to_vec());
        out.pair_ids = self.pair_ids.clone();
        out.distances = self.distances.clone();
        out.labels = self.labels.clone();
        out.values.reserve(self.len() * cols.len());
        for i in 0..self.len() {
            let row = self.row(i);
            out.values.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(out)
    }

    pub fn append(&mut self, other: &FeatureTable) -> Result<()> {
        if self.names != other.names {
            return Err(Error::Validation("cannot append tables with different columns".into()));
        }
        self.pair_ids.extend(other.pair_ids.iter().cloned());
        self.distances.extend_from_slice(&other.distances);
        self.labels.extend_from_slice(&other.labels);
        self.values.extend_from_slice(&other.values);
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let csv_err = |e: csv::Error| Error::Validation(format!("writing feature table: {e}"));
        let header = META_COLUMNS
            .iter()
            .map(|s| s.to_string())
            .chain(self.names.iter().cloned());
        w.write_record(header).map_err(csv_err)?;
        let mut record: Vec<String> = Vec::with_capacity(self.n_features() + 3);
        for i in 0..self.len() {
            record.clear();
            record.push(self.pair_ids[i].clone());
            record.push(self.distances[i].to_string());
            record.push(self.labels[i].to_string());
            record.extend(self.row(i).iter().map(|v| v.to_string()));
            w.write_record(&record).map_err(csv_err)?;
        }
        w.flush()
            .map_err(|e| Error::Validation(format!("writing feature table: {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file)).map_err(|e| match e {
            Error::Validation(m) => Error::io(path, std::io::Error::other(m)),
            other => other,
        })
    }

    pub fn read_csv<R: Read>(reader: R, origin: &Path) -> Result<FeatureTable> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let parse_err = |line: usize, message: String| Error::Parse {
            path: origin.to_path_buf(),
            line,
            message,
        };
        let header = rdr.headers().map_err(|e| parse_err(1, e.to_string()))?.clone();
        if header.len() < 3 || header.iter().take(3).ne(META_COLUMNS.iter().copied()) {
            return Err(parse_err(
                1,
                format!("header must start with {}", META_COLUMNS.join(",")),
            ));
        }
        let mut table = FeatureTable::new(header.iter().skip(3).map(String::from).collect());
        let mut row = Vec::with_capacity(table.n_features());
        for (i, rec) in rdr.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| parse_err(line, e.to_string()))?;
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|_| parse_err(line, format!("non-numeric value {s:?}")))
            };
            row.clear();
            for cell in rec.iter().skip(3) {
                row.push(num(cell)?);
            }
            let label: ProximityClass = rec[2].parse().map_err(|e: Error| parse_err(line, e.to_string()))?;
            table
                .push_row(rec[0].to_string(), num(&rec[1])?, label, &row)
                .map_err(|e| parse_err(line, e.to_string()))?;
        }
        Ok(table)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<FeatureTable> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(std::io::BufReader::new(file), path)
    }
}

/// Extracts features for every pair (in parallel, order preserved).
pub fn featurize(pairs: &[FingerprintPair<'_>], cfg: &FeatureConfig) -> FeatureTable {
    let rows: Vec<Vec<f64>> = pairs.par_iter().map(|p| extract(p, cfg).values).collect();
    let mut table = FeatureTable::new(feature_names().to_vec());
    table.values.reserve(rows.len() * table.n_features());
    for (p, row) in pairs.iter().zip(rows) {
        table.pair_ids.push(p.pair_id());
        table.distances.push(p.distance_m);
        table.labels.push(p.label);
        table.values.extend(row);
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small() -> FeatureTable {
        let mut t = FeatureTable::new(vec!["f.a.none".into(), "f.b.none".into()]);
        t.push_row("x|y".into(), 1.5, ProximityClass::Close, &[0.1, -3.0])
            .unwrap();
        t.push_row("x|z".into(), 7.0, ProximityClass::Far, &[1e-300, 2.0 / 3.0])
            .unwrap();
        t
    }

    #[test]
    fn csv_round_trip() {
        let t = small();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("pair_id,distance_m,label,f.a.none,f.b.none\n"));
        assert!(text.contains("x|y,1.5,close,0.1,-3\n"));
        let back = FeatureTable::read_csv(&buf[..], Path::new("mem")).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn project_and_subset() {
        let t = small();
        let p = t.project(&["f.b.none".to_string()]).unwrap();
        assert_eq!(p.row(0), &[-3.0]);
        assert!(t.project(&["nope".to_string()]).is_err());
        let s = t.subset(&[1]);
        assert_eq!(s.len(), 1);
        assert_eq!(s.labels, vec![ProximityClass::Far]);
    }

    #[test]
    fn bad_rows() {
        let text = "pair_id,distance_m,label,f\nx,1,close,abc\n";
        assert!(matches!(
            FeatureTable::read_csv(text.as_bytes(), Path::new("m")).unwrap_err(),
            Error::Parse { line: 2, .. }
        ));
        let text = "id,distance_m,label,f\n";
        assert!(FeatureTable::read_csv(text.as_bytes(), Path::new("m")).is_err());
    }

    proptest! {
        #[test]
        fn values_survive_text(v in proptest::num::f64::NORMAL | proptest::num::f64::SUBNORMAL | proptest::num::f64::ZERO) {
            let mut t = FeatureTable::new(vec!["f".into()]);
            t.push_row("p".into(), 0.0, ProximityClass::Close, &[v]).unwrap();
            let mut buf = Vec::new();
            t.write_csv(&mut buf).unwrap();
            let back = FeatureTable::read_csv(&buf[..], Path::new("m")).unwrap();
            prop_assert_eq!(back.row(0)[0].to_bits(), v.to_bits());
        }
    }
}
