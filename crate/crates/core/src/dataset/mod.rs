//! Ingestion and feature engineering: CSV loading, percentile rankings,
//! composite vulnerability rankings, time-series summaries, standardization
//! and PCA.

mod pca;
mod timeseries;

pub use pca::{pca_fit_transform, PcaModel, PcaTarget};
pub use timeseries::{
    load_timeseries, read_timeseries, summarize_timeseries, SummaryAnchors, TimeSeriesSummary,
    TimeSeriesTable, GROWTH_RULE,
};

use std::collections::HashSet;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

/// Loads a CSV feature table. The first column holds row keys.
///
/// With a non-empty `schema`, exactly those columns are kept (in schema
/// order) and other columns are ignored. With an empty schema every
/// non-key column is loaded.
pub fn load_table(path: &Path, schema: &[&str]) -> Result<FeatureTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_table(std::io::BufReader::new(f), schema)
}

pub fn read_table<R: Read>(reader: R, schema: &[&str]) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(Error::Malformed(
            "header needs a key column and at least one feature column".into(),
        ));
    }
    let mut seen = HashSet::new();
    for h in &header {
        if !seen.insert(h.as_str()) {
            return Err(Error::DuplicateColumn(h.clone()));
        }
    }
    let wanted: Vec<usize> = if schema.is_empty() {
        (1..header.len()).collect()
    } else {
        schema
            .iter()
            .map(|name| {
                header[1..]
                    .iter()
                    .position(|h| h == name)
                    .map(|p| p + 1)
                    .ok_or_else(|| Error::MissingColumn(name.to_string()))
            })
            .collect::<Result<_>>()?
    };
    let columns: Vec<String> = wanted.iter().map(|&j| header[j].clone()).collect();

    let mut row_ids = Vec::new();
    let mut values = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        for (&j, col) in wanted.iter().zip(&columns) {
            let cell = rec.get(j).unwrap_or("").trim();
            let v: f64 = cell.parse().map_err(|_| Error::BadCell {
                row: id.clone(),
                column: col.clone(),
                value: cell.to_string(),
                reason: "not a number",
            })?;
            if !v.is_finite() {
                return Err(Error::BadCell {
                    row: id.clone(),
                    column: col.clone(),
                    value: cell.to_string(),
                    reason: "non-finite",
                });
            }
            values.push(v);
        }
        row_ids.push(id);
    }
    FeatureTable::from_flat(row_ids, columns, values)
}

/// Percentile ranks in `[0, 1]`: `(rank - 1) / (n - 1)` with 1-based ranks
/// and tied values sharing the average of their positions.
pub fn percentile_rank(values: &[f64]) -> Result<Vec<f64>> {
    let n = values.len();
    if n < 2 {
        return Err(Error::param("percentile ranking needs at least 2 values"));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::param("percentile ranking needs finite values"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; n];
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start+1..=end share their mean
        let avg = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = (avg - 1.0) / (n - 1) as f64;
        }
        start = end;
    }
    Ok(ranks)
}

/// Composite ranking: percentile-rank each component column (flipping
/// columns marked in `invert`), sum the ranks per row, and rank the sums.
pub fn composite_ranking(
    table: &FeatureTable,
    component_columns: &[&str],
    invert: &[bool],
) -> Result<Vec<f64>> {
    if component_columns.is_empty() {
        return Err(Error::param("composite ranking needs at least one column"));
    }
    if invert.len() != component_columns.len() {
        return Err(Error::DimensionMismatch {
            expected: component_columns.len(),
            found: invert.len(),
        });
    }
    let mut sums = vec![0.0; table.n_rows()];
    for (name, &flip) in component_columns.iter().zip(invert) {
        let ranks = percentile_rank(&table.column_by_name(name)?)?;
        for (s, r) in sums.iter_mut().zip(ranks) {
            *s += if flip { 1.0 - r } else { r };
        }
    }
    percentile_rank(&sums)
}

/// Per-column affine map applied by [`standardize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub columns: Vec<String>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl StandardizationParams {
    pub fn apply(&self, table: &FeatureTable) -> Result<FeatureTable> {
        self.check(table)?;
        let d = self.means.len();
        let values = table
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| (v - self.means[i % d]) / self.scales[i % d])
            .collect();
        table.with_values(values)
    }

    /// Maps standardized values back to the original units.
    pub fn invert(&self, table: &FeatureTable) -> Result<FeatureTable> {
        self.check(table)?;
        let d = self.means.len();
        let values = table
            .values()
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.scales[i % d] + self.means[i % d])
            .collect();
        table.with_values(values)
    }

    fn check(&self, table: &FeatureTable) -> Result<()> {
        if table.n_cols() != self.means.len() {
            return Err(Error::DimensionMismatch {
                expected: self.means.len(),
                found: table.n_cols(),
            });
        }
        Ok(())
    }
}

/// Column spreads at or below this multiple of the column's magnitude are
/// treated as constant.
const ZERO_VARIANCE_REL: f64 = 1e-12;

/// Centers each column and divides by its population standard deviation.
/// Constant columns become all zeros with a recorded scale of 1.
pub fn standardize(table: &FeatureTable) -> Result<(FeatureTable, StandardizationParams)> {
    let n = table.n_rows();
    if n < 2 {
        return Err(Error::param("standardization needs at least 2 rows"));
    }
    let d = table.n_cols();
    let mut means = vec![0.0; d];
    for row in table.rows() {
        for (m, v) in means.iter_mut().zip(row) {
            *m += v;
        }
    }
    means.iter_mut().for_each(|m| *m /= n as f64);
    let mut var = vec![0.0; d];
    for row in table.rows() {
        for ((s, v), m) in var.iter_mut().zip(row).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    let sds: Vec<f64> = var.iter().map(|s| (s / n as f64).sqrt()).collect();
    let constant: Vec<bool> = sds
        .iter()
        .zip(&means)
        .map(|(sd, m)| *sd <= ZERO_VARIANCE_REL * m.abs().max(1.0))
        .collect();
    let scales: Vec<f64> = sds
        .iter()
        .zip(&constant)
        .map(|(&sd, &c)| if c { 1.0 } else { sd })
        .collect();
    let values = table
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let j = i % d;
            if constant[j] {
                0.0
            } else {
                (v - means[j]) / scales[j]
            }
        })
        .collect();
    let params = StandardizationParams {
        columns: table.columns().to_vec(),
        means,
        scales,
    };
    Ok((table.with_values(values)?, params))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force oracle: rank = (#less) + (#equal + 1) / 2.
    fn rank_by_counting(values: &[f64]) -> Vec<f64> {
        let n = values.len() as f64;
        values
            .iter()
            .map(|&v| {
                let less = values.iter().filter(|&&w| w < v).count() as f64;
                let equal = values.iter().filter(|&&w| w == v).count() as f64;
                let rank = less + (equal + 1.0) / 2.0;
                (rank - 1.0) / (n - 1.0)
            })
            .collect()
    }

    #[test]
    fn load_three_rows() {
        let csv = "fips,population,area\n01001,100,5.5\n01003,200,6\n01005,300,7\n";
        let t = read_table(csv.as_bytes(), &["population", "area"]).unwrap();
        assert_eq!(t.n_rows(), 3);
        assert_eq!(t.n_cols(), 2);
        assert_eq!(t.row_ids()[0], "01001");
        assert_eq!(t.row(2), &[300.0, 7.0]);
        let all = read_table(csv.as_bytes(), &[]).unwrap();
        assert_eq!(all.columns(), &["population", "area"]);
    }

    #[test]
    fn load_rejects_duplicates_nan_and_missing() {
        let dup = "fips,a,a\n1,2,3\n";
        assert!(matches!(
            read_table(dup.as_bytes(), &[]),
            Err(Error::DuplicateColumn(ref c)) if c == "a"
        ));
        let nan = "fips,a,b\n1,2,3\n7,NaN,3\n";
        match read_table(nan.as_bytes(), &[]).unwrap_err() {
            Error::BadCell { row, column, .. } => {
                assert_eq!(row, "7");
                assert_eq!(column, "a");
            }
            e => panic!("unexpected {e:?}"),
        }
        let text = "fips,a\n1,abc\n";
        assert!(matches!(
            read_table(text.as_bytes(), &[]),
            Err(Error::BadCell { .. })
        ));
        assert!(matches!(
            read_table("fips,a\n1,2\n".as_bytes(), &["b"]),
            Err(Error::MissingColumn(_))
        ));
        assert!(load_table(Path::new("/definitely/not/here.csv"), &[]).is_err());
    }

    #[test]
    fn percentile_rank_examples() {
        assert_eq!(percentile_rank(&[10.0, 20.0, 30.0]).unwrap(), vec![0.0, 0.5, 1.0]);
        assert_eq!(percentile_rank(&[5.0, 5.0]).unwrap(), vec![0.5, 0.5]);
        // Frozen from the counting oracle: ranks 3, 1.5, 4, 1.5 of n = 4.
        let expect = [2.0 / 3.0, 1.0 / 6.0, 1.0, 1.0 / 6.0];
        let oracle = rank_by_counting(&[3.0, 1.0, 4.0, 1.0]);
        let got = percentile_rank(&[3.0, 1.0, 4.0, 1.0]).unwrap();
        for i in 0..4 {
            assert!((oracle[i] - expect[i]).abs() < 1e-15);
            assert!((got[i] - expect[i]).abs() < 1e-15);
        }
        assert!(percentile_rank(&[1.0]).is_err());
    }

    #[test]
    fn composite_ranking_cases() {
        let t = FeatureTable::from_rows(vec![
            vec![0.10, 0.05, 30_000.0, 0.12],
            vec![0.20, 0.09, 18_000.0, 0.20],
            vec![0.15, 0.04, 25_000.0, 0.10],
            vec![0.30, 0.12, 15_000.0, 0.25],
            vec![0.05, 0.03, 40_000.0, 0.08],
        ])
        .unwrap();
        let single = composite_ranking(&t, &["x0"], &[false]).unwrap();
        assert_eq!(single, percentile_rank(&t.column(0)).unwrap());
        let doubled = t.with_column("copy", &t.column(0)).unwrap();
        assert_eq!(
            composite_ranking(&doubled, &["x0", "copy"], &[false, false]).unwrap(),
            single
        );

        // Spreadsheet-style oracle: rank each column, flip income, sum, rank.
        let cols: Vec<Vec<f64>> = (0..4).map(|j| t.column(j)).collect();
        let mut sums = vec![0.0; 5];
        for (j, c) in cols.iter().enumerate() {
            let r = rank_by_counting(c);
            for i in 0..5 {
                sums[i] += if j == 2 { 1.0 - r[i] } else { r[i] };
            }
        }
        let oracle = rank_by_counting(&sums);
        let got = composite_ranking(&t, &["x0", "x1", "x2", "x3"], &[false, false, true, false])
            .unwrap();
        for (a, b) in got.iter().zip(&oracle) {
            assert!((a - b).abs() < 1e-12);
        }
        // rows 0 and 2 tie on the rank sum 1.5
        assert_eq!(got, vec![0.375, 0.75, 0.375, 1.0, 0.0]);
        assert!(matches!(
            composite_ranking(&t, &["nope"], &[false]),
            Err(Error::MissingColumn(_))
        ));
    }

    #[test]
    fn standardize_examples() {
        let t = FeatureTable::from_rows(vec![
            vec![1.0, 7.0],
            vec![2.0, 7.0],
            vec![3.0, 7.0],
        ])
        .unwrap();
        let (s, p) = standardize(&t).unwrap();
        // mean 2, population sd sqrt(2/3)
        let z = 1.0 / (2.0f64 / 3.0).sqrt();
        assert!((s.get(0, 0) + z).abs() < 1e-12);
        assert_eq!(s.get(1, 0), 0.0);
        assert!((s.get(2, 0) - 1.224745).abs() < 1e-6);
        assert_eq!(s.column(1), vec![0.0, 0.0, 0.0]);
        assert_eq!(p.scales[1], 1.0);

        let (again, _) = standardize(&s).unwrap();
        for (a, b) in again.values().iter().zip(s.values()) {
            assert!((a - b).abs() < 1e-12);
        }
        let back = p.invert(&s).unwrap();
        for (a, b) in back.values().iter().zip(t.values()) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn params_serialize_with_means_and_scales() {
        let t = FeatureTable::from_rows(vec![vec![1.0], vec![3.0]]).unwrap();
        let (_, p) = standardize(&t).unwrap();
        let v: serde_json::Value = serde_json::to_value(&p).unwrap();
        assert_eq!(v["means"][0], 2.0);
        assert_eq!(v["scales"][0], 1.0);
    }
}
