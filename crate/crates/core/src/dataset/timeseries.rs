use std::io::Read;
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::table::FeatureTable;

/// How growth-rate features are computed; copied into summary metadata.
pub const GROWTH_RULE: &str =
    "average daily change: (cum[end] - cum[start]) / calendar days between start and end";

/// Cumulative counts per row over an increasing list of dates.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesTable {
    row_ids: Vec<String>,
    dates: Vec<NaiveDate>,
    cumulative: Vec<f64>,
}

impl TimeSeriesTable {
    pub fn new(row_ids: Vec<String>, dates: Vec<NaiveDate>, rows: Vec<Vec<f64>>) -> Result<Self> {
        if dates.len() < 2 {
            return Err(Error::Malformed("time series needs at least 2 dates".into()));
        }
        if dates.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Malformed("dates must be strictly increasing".into()));
        }
        if row_ids.len() != rows.len() || row_ids.is_empty() {
            return Err(Error::Malformed("row ids do not match series rows".into()));
        }
        let mut cumulative = Vec::with_capacity(rows.len() * dates.len());
        for (id, row) in row_ids.iter().zip(&rows) {
            if row.len() != dates.len() {
                return Err(Error::Malformed(format!(
                    "row `{id}` has {} values for {} dates",
                    row.len(),
                    dates.len()
                )));
            }
            for (d, &v) in dates.iter().zip(row) {
                if !v.is_finite() || v < 0.0 {
                    return Err(Error::BadCell {
                        row: id.clone(),
                        column: d.to_string(),
                        value: v.to_string(),
                        reason: "cumulative counts must be finite and nonnegative",
                    });
                }
            }
            cumulative.extend_from_slice(row);
        }
        Ok(Self {
            row_ids,
            dates,
            cumulative,
        })
    }

    pub fn row_ids(&self) -> &[String] {
        &self.row_ids
    }

    pub fn dates(&self) -> &[NaiveDate] {
        &self.dates
    }

    pub fn series(&self, i: usize) -> &[f64] {
        let w = self.dates.len();
        &self.cumulative[i * w..(i + 1) * w]
    }

    fn date_index(&self, d: NaiveDate) -> Result<usize> {
        let (first, last) = (self.dates[0], *self.dates.last().unwrap());
        if d < first || d > last {
            return Err(Error::param(format!(
                "anchor {d} outside series range {first}..{last}"
            )));
        }
        self.dates
            .binary_search(&d)
            .map_err(|_| Error::param(format!("anchor {d} is not a reported date")))
    }
}

/// Loads a time-series CSV: key column first, remaining headers ISO-8601
/// dates.
pub fn load_timeseries(path: &Path) -> Result<TimeSeriesTable> {
    let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_timeseries(std::io::BufReader::new(f))
}

pub fn read_timeseries<R: Read>(reader: R) -> Result<TimeSeriesTable> {
    let mut rdr = csv::Reader::from_reader(reader);
    let header = rdr.headers()?.clone();
    let dates = header
        .iter()
        .skip(1)
        .map(|h| {
            NaiveDate::parse_from_str(h.trim(), "%Y-%m-%d")
                .map_err(|_| Error::Malformed(format!("header `{h}` is not an ISO-8601 date")))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ids = Vec::new();
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        let row = rec
            .iter()
            .skip(1)
            .zip(&dates)
            .map(|(cell, d)| {
                cell.trim().parse::<f64>().map_err(|_| Error::BadCell {
                    row: id.clone(),
                    column: d.to_string(),
                    value: cell.to_string(),
                    reason: "not a number",
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ids.push(id);
        rows.push(row);
    }
    TimeSeriesTable::new(ids, dates, rows)
}

/// Named dates at which summary features are taken.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryAnchors {
    /// `(feature name, window start, window end)` for average daily growth.
    pub growth_windows: Vec<(String, NaiveDate, NaiveDate)>,
    /// `(feature name, date)` for new counts reported on that date.
    pub new_counts: Vec<(String, NaiveDate)>,
    /// `(feature name, date)` for cumulative counts.
    pub cumulative: Vec<(String, NaiveDate)>,
}

/// Summary features plus bookkeeping about the input series.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSummary {
    pub table: FeatureTable,
    /// Rows whose cumulative series decreases somewhere.
    pub non_monotone_rows: usize,
    /// New-count cells that were negative and clamped to zero.
    pub clamped_new_counts: usize,
    pub growth_rule: &'static str,
}

/// Reduces each row's cumulative series to growth rates, new counts and
/// cumulative totals at the anchors.
pub fn summarize_timeseries(
    series: &TimeSeriesTable,
    anchors: &SummaryAnchors,
) -> Result<TimeSeriesSummary> {
    let mut columns = Vec::new();
    let mut windows = Vec::new();
    for (name, start, end) in &anchors.growth_windows {
        let (a, b) = (series.date_index(*start)?, series.date_index(*end)?);
        if a >= b {
            return Err(Error::param(format!(
                "growth window `{name}` must start before it ends"
            )));
        }
        let days = (*end - *start).num_days() as f64;
        windows.push((a, b, days));
        columns.push(name.clone());
    }
    let mut new_idx = Vec::new();
    for (name, d) in &anchors.new_counts {
        new_idx.push(series.date_index(*d)?);
        columns.push(name.clone());
    }
    let mut cum_idx = Vec::new();
    for (name, d) in &anchors.cumulative {
        cum_idx.push(series.date_index(*d)?);
        columns.push(name.clone());
    }
    if columns.is_empty() {
        return Err(Error::param("no anchors given"));
    }

    let mut values = Vec::with_capacity(series.row_ids.len() * columns.len());
    let mut non_monotone_rows = 0;
    let mut clamped = 0;
    for i in 0..series.row_ids.len() {
        let s = series.series(i);
        if s.windows(2).any(|w| w[1] < w[0]) {
            non_monotone_rows += 1;
        }
        for &(a, b, days) in &windows {
            values.push((s[b] - s[a]) / days);
        }
        for &t in &new_idx {
            let diff = if t == 0 { 0.0 } else { s[t] - s[t - 1] };
            if diff < 0.0 {
                clamped += 1;
            }
            values.push(diff.max(0.0));
        }
        for &t in &cum_idx {
            values.push(s[t]);
        }
    }
    Ok(TimeSeriesSummary {
        table: FeatureTable::from_flat(series.row_ids.clone(), columns, values)?,
        non_monotone_rows,
        clamped_new_counts: clamped,
        growth_rule: GROWTH_RULE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn days(n: usize) -> Vec<NaiveDate> {
        let start = NaiveDate::from_ymd_opt(2020, 1, 22).unwrap();
        (0..n)
            .map(|i| start + chrono::Days::new(i as u64))
            .collect()
    }

    fn one_row(values: Vec<f64>) -> TimeSeriesTable {
        let n = values.len();
        TimeSeriesTable::new(vec!["a".into()], days(n), vec![values]).unwrap()
    }

    fn anchors(d: &[NaiveDate], window: (usize, usize), new_at: usize, cum_at: usize) -> SummaryAnchors {
        SummaryAnchors {
            growth_windows: vec![("growth".into(), d[window.0], d[window.1])],
            new_counts: vec![("new".into(), d[new_at])],
            cumulative: vec![("cum".into(), d[cum_at])],
        }
    }

    #[test]
    fn flat_series_is_all_zero_growth() {
        let t = one_row(vec![5.0; 6]);
        let s = summarize_timeseries(&t, &anchors(t.dates(), (0, 5), 3, 5)).unwrap();
        assert_eq!(s.table.row(0), &[0.0, 0.0, 5.0]);
    }

    #[test]
    fn linear_series_growth_equals_increment() {
        let t = one_row(vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        let s = summarize_timeseries(&t, &anchors(t.dates(), (0, 4), 4, 4)).unwrap();
        assert_eq!(s.table.row(0), &[2.0, 2.0, 8.0]);
    }

    #[test]
    fn irregular_series() {
        let t = one_row(vec![0.0, 1.0, 1.0, 5.0, 7.0]);
        let s = summarize_timeseries(&t, &anchors(t.dates(), (0, 4), 3, 4)).unwrap();
        assert_eq!(s.table.row(0), &[7.0 / 4.0, 4.0, 7.0]);
        // first date has no predecessor
        let s0 = summarize_timeseries(&t, &anchors(t.dates(), (0, 4), 0, 4)).unwrap();
        assert_eq!(s0.table.get(0, 1), 0.0);
    }

    #[test]
    fn corrections_are_clamped_and_counted() {
        let t = one_row(vec![0.0, 5.0, 3.0, 4.0]);
        let s = summarize_timeseries(&t, &anchors(t.dates(), (0, 3), 2, 3)).unwrap();
        assert_eq!(s.table.get(0, 1), 0.0);
        assert_eq!(s.clamped_new_counts, 1);
        assert_eq!(s.non_monotone_rows, 1);
    }

    #[test]
    fn anchor_validation() {
        let t = one_row(vec![0.0, 1.0, 2.0]);
        let late = NaiveDate::from_ymd_opt(2021, 1, 1).unwrap();
        let a = SummaryAnchors {
            growth_windows: vec![],
            new_counts: vec![("x".into(), late)],
            cumulative: vec![],
        };
        assert!(summarize_timeseries(&t, &a).is_err());
        assert!(TimeSeriesTable::new(vec!["a".into()], days(1), vec![vec![1.0]]).is_err());
        let d = days(2);
        assert!(TimeSeriesTable::new(vec!["a".into()], vec![d[1], d[0]], vec![vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn reads_iso_date_headers() {
        let csv = "fips,2020-01-22,2020-01-23,2020-01-25\n1,0,3,9\n2,1,1,2\n";
        let t = read_timeseries(csv.as_bytes()).unwrap();
        assert_eq!(t.dates().len(), 3);
        assert_eq!(t.series(0), &[0.0, 3.0, 9.0]);
        let a = SummaryAnchors {
            growth_windows: vec![("g".into(), t.dates()[0], t.dates()[2])],
            new_counts: vec![],
            cumulative: vec![],
        };
        // three calendar days between the endpoints
        let s = summarize_timeseries(&t, &a).unwrap();
        assert_eq!(s.table.get(0, 0), 3.0);
        assert!(read_timeseries("fips,jan\n1,2\n".as_bytes()).is_err());
        assert!(read_timeseries("fips,2020-01-01,2020-01-02\n1,2,-1\n".as_bytes()).is_err());
    }
}
