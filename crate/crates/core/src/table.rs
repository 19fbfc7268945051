//! Row-keyed numeric tables and per-row cluster labels.

use std::collections::HashSet;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense, row-major numeric matrix with named columns and unique row keys.
///
/// Every stored value is finite. Tables are immutable once built; all
/// transformations return new tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    row_ids: Vec<String>,
    columns: Vec<String>,
    values: Vec<f64>,
}

impl FeatureTable {
    /// Builds a table from row vectors.
    pub fn new(row_ids: Vec<String>, columns: Vec<String>, rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = columns.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(Error::Malformed(format!(
                    "row {} has {} values, expected {}",
                    i,
                    row.len(),
                    width
                )));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(row_ids, columns, values)
    }

    /// Builds a table from a row-major buffer.
    pub fn from_flat(row_ids: Vec<String>, columns: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if row_ids.is_empty() {
            return Err(Error::Malformed("table has no rows".into()));
        }
        if columns.is_empty() {
            return Err(Error::Malformed("table has no columns".into()));
        }
        if values.len() != row_ids.len() * columns.len() {
            return Err(Error::Malformed(format!(
                "{} values do not fill {} rows x {} columns",
                values.len(),
                row_ids.len(),
                columns.len()
            )));
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.as_str()) {
                return Err(Error::DuplicateColumn(c.clone()));
            }
        }
        let mut seen = HashSet::new();
        for r in &row_ids {
            if !seen.insert(r.as_str()) {
                return Err(Error::DuplicateRow(r.clone()));
            }
        }
        let width = columns.len();
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::BadCell {
                row: row_ids[pos / width].clone(),
                column: columns[pos % width].clone(),
                value: values[pos].to_string(),
                reason: "non-finite",
            });
        }
        Ok(Self {
            row_ids,
            columns,
            values,
        })
    }

    /// Anonymous table with row ids `0..n` and columns `x0..xd`. Handy for
    /// synthetic data and tests.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let width = rows.first().map_or(0, Vec::len);
        let ids = (0..rows.len()).map(|i| i.to_string()).collect();
        let cols = (0..width).map(|j| format!("x{j}")).collect();
        Self::new(ids, cols, rows)
    }

    pub fn n_rows(&self) -> usize {
        self.row_ids.len()
    }

    pub fn n_cols(&self) -> usize {
        self.columns.len()
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    /// Row-major backing buffer.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let w = self.columns.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.columns.len())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.columns.len() + j]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn column_index(&self, name: &str) -> Result<usize> {
        self.columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    }

    pub fn column_by_name(&self, name: &str) -> Result<Vec<f64>> {
        Ok(self.column(self.column_index(name)?))
    }

    /// New table holding the named columns, in the order given.
    pub fn select_columns<S: AsRef<str>>(&self, names: &[S]) -> Result<Self> {
        let idx = names
            .iter()
            .map(|n| self.column_index(n.as_ref()))
            .collect::<Result<Vec<_>>>()?;
        let mut values = Vec::with_capacity(self.n_rows() * idx.len());
        for row in self.rows() {
            values.extend(idx.iter().map(|&j| row[j]));
        }
        Self::from_flat(
            self.row_ids.clone(),
            idx.iter().map(|&j| self.columns[j].clone()).collect(),
            values,
        )
    }

    /// New table holding the given rows, in the order given.
    pub fn select_rows(&self, rows: &[usize]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * self.n_cols());
        for &i in rows {
            values.extend_from_slice(self.row(i));
        }
        Self::from_flat(
            rows.iter().map(|&i| self.row_ids[i].clone()).collect(),
            self.columns.clone(),
            values,
        )
    }

    /// Appends one column.
    pub fn with_column(&self, name: &str, column: &[f64]) -> Result<Self> {
        if column.len() != self.n_rows() {
            return Err(Error::DimensionMismatch {
                expected: self.n_rows(),
                found: column.len(),
            });
        }
        let mut cols = self.columns.clone();
        cols.push(name.to_string());
        let mut values = Vec::with_capacity(self.values.len() + column.len());
        for (row, &v) in self.rows().zip(column) {
            values.extend_from_slice(row);
            values.push(v);
        }
        Self::from_flat(self.row_ids.clone(), cols, values)
    }

    /// Column-wise concatenation; row ids must match exactly.
    pub fn hstack(&self, other: &FeatureTable) -> Result<Self> {
        if self.row_ids != other.row_ids {
            return Err(Error::Malformed(
                "cannot join tables with different row ids".into(),
            ));
        }
        let mut cols = self.columns.clone();
        cols.extend(other.columns.iter().cloned());
        let mut values = Vec::with_capacity(self.values.len() + other.values.len());
        for (a, b) in self.rows().zip(other.rows()) {
            values.extend_from_slice(a);
            values.extend_from_slice(b);
        }
        Self::from_flat(self.row_ids.clone(), cols, values)
    }

    /// Same shape and keys, replaced values.
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::from_flat(self.row_ids.clone(), self.columns.clone(), values)
    }

    /// Writes CSV with `key_header` as the first column. Floats use the
    /// shortest round-trip representation, so a reload is bit-exact.
    pub fn write_csv<W: Write>(&self, out: W, key_header: &str) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![key_header.to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header)?;
        for (id, row) in self.row_ids.iter().zip(self.rows()) {
            let mut rec = vec![id.clone()];
            rec.extend(row.iter().map(|v| v.to_string()));
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path, key_header: &str) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(f), key_header)
    }
}

/// Label used for noise rows.
pub const NOISE: i32 = -1;

/// Per-row cluster assignment. `-1` marks noise; cluster ids are `>= 0`.
///
/// Fitters always emit contiguous ids `0..k`. Labels produced by replaying a
/// model on new data keep the model's component ids and may skip some.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LabelVector(Vec<i32>);

impl LabelVector {
    pub fn new(labels: Vec<i32>) -> Result<Self> {
        if let Some(bad) = labels.iter().find(|&&l| l < NOISE) {
            return Err(Error::param(format!("label {bad} is below the noise label -1")));
        }
        Ok(Self(labels))
    }

    /// Relabels clusters `0..k` by order of first appearance; noise is kept.
    pub fn canonical(labels: &[i32]) -> Self {
        let mut map = std::collections::HashMap::new();
        let out = labels
            .iter()
            .map(|&l| {
                if l < 0 {
                    NOISE
                } else {
                    let next = map.len() as i32;
                    *map.entry(l).or_insert(next)
                }
            })
            .collect();
        Self(out)
    }

    /// Compacts cluster indices to `0..k'` preserving their relative order.
    pub fn from_assignments(assign: &[usize]) -> Self {
        let mut used: Vec<usize> = assign.to_vec();
        used.sort_unstable();
        used.dedup();
        Self(
            assign
                .iter()
                .map(|a| used.binary_search(a).unwrap() as i32)
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[i32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<i32> {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Distinct non-noise ids, ascending.
    pub fn cluster_ids(&self) -> Vec<i32> {
        let mut ids: Vec<i32> = self.0.iter().copied().filter(|&l| l >= 0).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    /// Number of distinct non-noise clusters.
    pub fn n_clusters(&self) -> usize {
        self.cluster_ids().len()
    }

    pub fn noise_count(&self) -> usize {
        self.0.iter().filter(|&&l| l < 0).count()
    }

    /// True when non-noise ids are exactly `0..k`.
    pub fn is_contiguous(&self) -> bool {
        self.cluster_ids()
            .iter()
            .enumerate()
            .all(|(i, &id)| id == i as i32)
    }

    /// Per-cluster member row indices, indexed by position in
    /// [`cluster_ids`](Self::cluster_ids).
    pub fn members(&self) -> Vec<Vec<usize>> {
        let ids = self.cluster_ids();
        let mut out = vec![Vec::new(); ids.len()];
        for (i, l) in self.0.iter().enumerate() {
            if *l >= 0 {
                out[ids.binary_search(l).unwrap()].push(i);
            }
        }
        out
    }

    pub fn write_csv<W: Write>(&self, out: W, row_ids: &[String]) -> Result<()> {
        if row_ids.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: row_ids.len(),
            });
        }
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["row_id", "cluster"])?;
        for (id, l) in row_ids.iter().zip(&self.0) {
            w.write_record([id.as_str(), &l.to_string()])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

impl std::ops::Index<usize> for LabelVector {
    type Output = i32;
    fn index(&self, i: usize) -> &i32 {
        &self.0[i]
    }
}

/// Serde helpers that write non-finite floats as the strings `"inf"`,
/// `"-inf"` and `"nan"` instead of JSON `null`.
pub mod serde_float {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    fn to_repr(v: f64) -> Repr {
        if v.is_finite() {
            Repr::Num(v)
        } else if v.is_nan() {
            Repr::Text("nan".into())
        } else if v > 0.0 {
            Repr::Text("inf".into())
        } else {
            Repr::Text("-inf".into())
        }
    }

    fn from_repr<E: serde::de::Error>(r: Repr) -> Result<f64, E> {
        match r {
            Repr::Num(v) => Ok(v),
            Repr::Text(s) => match s.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(E::custom(format!("bad float literal `{other}`"))),
            },
        }
    }

    /// Formats a float for CSV output with the same literals.
    pub fn format(v: f64) -> String {
        match to_repr(v) {
            Repr::Num(v) => v.to_string(),
            Repr::Text(s) => s,
        }
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        to_repr(*v).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        from_repr(Repr::deserialize(d)?)
    }

    pub mod vec {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let r: Vec<Repr> = v.iter().map(|&x| to_repr(x)).collect();
            r.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Vec::<Repr>::deserialize(d)?
                .into_iter()
                .map(from_repr::<D::Error>)
                .collect()
        }
    }

    pub mod map {
        use super::*;
        use std::collections::BTreeMap;

        pub fn serialize<S: Serializer>(v: &BTreeMap<String, f64>, s: S) -> Result<S::Ok, S::Error> {
            let r: BTreeMap<&String, Repr> = v.iter().map(|(k, &x)| (k, to_repr(x))).collect();
            r.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(
            d: D,
        ) -> Result<BTreeMap<String, f64>, D::Error> {
            BTreeMap::<String, Repr>::deserialize(d)?
                .into_iter()
                .map(|(k, r)| from_repr::<D::Error>(r).map(|v| (k, v)))
                .collect()
        }
    }
}
