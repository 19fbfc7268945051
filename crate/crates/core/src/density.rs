//! DBSCAN and OPTICS with threshold extraction.
//!
//! Neighbourhoods are closed balls (`d <= eps`) that include the query point.
//! Undefined core and reachability distances are `+inf`.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distance::{pairwise_distances, DistanceMatrix, Metric};
use crate::error::{Error, Result};
use crate::table::{serde_float, FeatureTable, LabelVector, NOISE};

/// Density thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityParams {
    /// Neighbourhood radius; `inf` for an unbounded OPTICS ordering.
    #[serde(with = "serde_float")]
    pub eps: f64,
    /// Neighbours needed for a core point, the point itself included.
    pub min_pts: usize,
    pub metric: Metric,
}

impl DensityParams {
    pub fn new(eps: f64, min_pts: usize, metric: Metric) -> Self {
        Self { eps, min_pts, metric }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::param(format!("eps {} must be positive", self.eps)));
        }
        if self.min_pts < 2 {
            return Err(Error::param("min_pts must be at least 2"));
        }
        self.metric.validate()
    }
}

/// DBSCAN role of a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PointClass {
    Core,
    Border,
    Noise,
}

/// DBSCAN on table rows.
pub fn dbscan(table: &FeatureTable, params: &DensityParams) -> Result<(LabelVector, Vec<PointClass>)> {
    params.validate()?;
    if table.n_rows() == 1 {
        return Ok((LabelVector::new(vec![NOISE])?, vec![PointClass::Noise]));
    }
    let d = pairwise_distances(table, params.metric)?;
    dbscan_precomputed(&d, params.eps, params.min_pts)
}

/// DBSCAN on a distance matrix. Core points within `eps` of each other share
/// a cluster; a border point joins the cluster of its lowest-index core
/// neighbour. Clusters are numbered by their lowest core point.
pub fn dbscan_precomputed(
    d: &DistanceMatrix,
    eps: f64,
    min_pts: usize,
) -> Result<(LabelVector, Vec<PointClass>)> {
    if !(eps > 0.0) || min_pts < 2 {
        return Err(Error::param("dbscan needs eps > 0 and min_pts >= 2"));
    }
    let n = d.n();
    let neighbours: Vec<Vec<usize>> = (0..n)
        .into_par_iter()
        .map(|i| (0..n).filter(|&j| d.get(i, j) <= eps).collect())
        .collect();
    let core: Vec<bool> = neighbours.iter().map(|nb| nb.len() >= min_pts).collect();
    let mut labels = vec![NOISE; n];
    let mut next = 0;
    let mut queue = std::collections::VecDeque::new();
    for start in 0..n {
        if !core[start] || labels[start] != NOISE {
            continue;
        }
        labels[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for &q in &neighbours[p] {
                if core[q] && labels[q] == NOISE {
                    labels[q] = next;
                    queue.push_back(q);
                }
            }
        }
        next += 1;
    }
    let mut classes = vec![PointClass::Noise; n];
    for i in 0..n {
        if core[i] {
            classes[i] = PointClass::Core;
        } else if let Some(&c) = neighbours[i].iter().find(|&&j| core[j]) {
            classes[i] = PointClass::Border;
            labels[i] = labels[c];
        }
    }
    Ok((LabelVector::new(labels)?, classes))
}

/// OPTICS processing order with core and reachability distances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OpticsResult {
    /// Point indices in processing order.
    pub ordering: Vec<usize>,
    /// Per point, indexed by row.
    #[serde(with = "serde_float::vec")]
    pub core_distance: Vec<f64>,
    /// Per point, indexed by row.
    #[serde(with = "serde_float::vec")]
    pub reachability: Vec<f64>,
    /// Point whose expansion fixed each reachability.
    pub predecessor: Vec<Option<usize>>,
    pub params: DensityParams,
}

/// OPTICS on table rows.
pub fn optics_order(table: &FeatureTable, params: &DensityParams) -> Result<OpticsResult> {
    params.validate()?;
    let d = pairwise_distances(table, params.metric)?;
    optics_precomputed(&d, params)
}

/// OPTICS on a distance matrix. The next point expanded is the pending seed
/// of smallest reachability, lowest index on ties; unreached points are
/// visited in index order.
pub fn optics_precomputed(d: &DistanceMatrix, params: &DensityParams) -> Result<OpticsResult> {
    params.validate()?;
    let n = d.n();
    let eps = params.eps;
    let k = params.min_pts;
    let core_distance: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| {
            if k > n {
                return f64::INFINITY;
            }
            let mut row: Vec<f64> = (0..n).map(|j| d.get(i, j)).collect();
            let (_, kth, _) = row.select_nth_unstable_by(k - 1, f64::total_cmp);
            if *kth <= eps {
                *kth
            } else {
                f64::INFINITY
            }
        })
        .collect();
    let mut reach = vec![f64::INFINITY; n];
    let mut pred = vec![None; n];
    let mut done = vec![false; n];
    let mut seeded = vec![false; n];
    let mut ordering = Vec::with_capacity(n);
    let mut seeds: Vec<usize> = Vec::new();
    for start in 0..n {
        if done[start] {
            continue;
        }
        let mut current = Some(start);
        while let Some(p) = current {
            done[p] = true;
            ordering.push(p);
            if core_distance[p].is_finite() {
                for o in 0..n {
                    if done[o] {
                        continue;
                    }
                    let dist = d.get(p, o);
                    if dist > eps {
                        continue;
                    }
                    let r = core_distance[p].max(dist);
                    if r < reach[o] {
                        reach[o] = r;
                        pred[o] = Some(p);
                        if !seeded[o] {
                            seeded[o] = true;
                            seeds.push(o);
                        }
                    }
                }
            }
            current = None;
            let mut best: Option<usize> = None;
            for (pos, &s) in seeds.iter().enumerate() {
                let better = match best {
                    None => true,
                    Some(b) => {
                        let t = seeds[b];
                        reach[s] < reach[t] || (reach[s] == reach[t] && s < t)
                    }
                };
                if better {
                    best = Some(pos);
                }
            }
            if let Some(b) = best {
                current = Some(seeds.swap_remove(b));
            }
        }
    }
    Ok(OpticsResult {
        ordering,
        core_distance,
        reachability: reach,
        predecessor: pred,
        params: params.clone(),
    })
}

impl OpticsResult {
    /// Flat clusters at a reachability threshold: a point whose reachability
    /// exceeds `threshold` opens a new cluster when its own core distance is
    /// within the threshold and is noise otherwise; every other point joins
    /// the open cluster.
    pub fn extract_clusters(&self, threshold: f64) -> Result<LabelVector> {
        if !(threshold > 0.0) {
            return Err(Error::param("threshold must be positive"));
        }
        if threshold > self.params.eps {
            return Err(Error::param(format!(
                "threshold {threshold} exceeds the ordering eps {}",
                self.params.eps
            )));
        }
        let mut labels = vec![NOISE; self.ordering.len()];
        let mut current = NOISE;
        for &p in &self.ordering {
            if self.reachability[p] > threshold {
                if self.core_distance[p] <= threshold {
                    current += 1;
                    labels[p] = current;
                }
            } else {
                labels[p] = current;
            }
        }
        LabelVector::new(labels)
    }

    /// Reachability values in processing order, as plotted.
    pub fn reachability_plot(&self) -> Vec<f64> {
        self.ordering.iter().map(|&p| self.reachability[p]).collect()
    }

    /// CSV with `order_position, point_id, reachability, core_distance`;
    /// undefined distances print as `inf`.
    pub fn write_csv<W: Write>(&self, out: W, row_ids: &[String]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["order_position", "point_id", "reachability", "core_distance"])?;
        for (pos, &p) in self.ordering.iter().enumerate() {
            w.write_record([
                pos.to_string(),
                row_ids.get(p).cloned().unwrap_or_else(|| p.to_string()),
                serde_float::format(self.reachability[p]),
                serde_float::format(self.core_distance[p]),
            ])?;
        }
        w.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }
}

/// Convenience wrapper for [`OpticsResult::extract_clusters`].
pub fn extract_clusters(result: &OpticsResult, threshold: f64) -> Result<LabelVector> {
    result.extract_clusters(threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(points: &[f64]) -> FeatureTable {
        FeatureTable::from_rows(points.iter().map(|&p| vec![p]).collect()).unwrap()
    }

    fn euclid(eps: f64, min_pts: usize) -> DensityParams {
        DensityParams::new(eps, min_pts, Metric::Euclidean)
    }

    #[test]
    fn hand_neighbourhoods() {
        let (labels, classes) = dbscan(&line(&[0.0, 1.0, 2.0, 100.0]), &euclid(1.5, 3)).unwrap();
        assert_eq!(labels.as_slice(), &[0, 0, 0, -1]);
        assert_eq!(
            classes,
            vec![PointClass::Border, PointClass::Core, PointClass::Border, PointClass::Noise]
        );
    }

    #[test]
    fn identical_points_are_all_core() {
        let (labels, classes) = dbscan(&line(&[3.0; 5]), &euclid(0.1, 5)).unwrap();
        assert_eq!(labels.as_slice(), &[0; 5]);
        assert!(classes.iter().all(|&c| c == PointClass::Core));
    }

    #[test]
    fn tiny_eps_is_all_noise() {
        let (labels, _) = dbscan(&line(&[0.0, 1.0, 2.0]), &euclid(1e-12, 2)).unwrap();
        assert_eq!(labels.noise_count(), 3);
    }

    #[test]
    fn invalid_params() {
        assert!(euclid(0.0, 3).validate().is_err());
        assert!(euclid(1.0, 1).validate().is_err());
        assert!(euclid(f64::INFINITY, 2).validate().is_ok());
    }

    #[test]
    fn min_pts_two_core_is_nearest_neighbour() {
        let pts = [0.0, 1.0, 3.0, 7.0];
        let r = optics_order(&line(&pts), &euclid(f64::INFINITY, 2)).unwrap();
        assert_eq!(r.core_distance, vec![1.0, 1.0, 2.0, 4.0]);
        assert_eq!(r.ordering, vec![0, 1, 2, 3]);
        assert!(r.reachability[0].is_infinite());
        assert_eq!(&r.reachability[1..], &[1.0, 2.0, 4.0]);
    }

    #[test]
    fn two_blob_extraction_matches_dbscan() {
        let t = line(&[0.0, 0.2, 0.5, 10.0, 10.3, 10.4]);
        let r = optics_order(&t, &euclid(f64::INFINITY, 2)).unwrap();
        let extracted = r.extract_clusters(1.0).unwrap();
        let (db, _) = dbscan(&t, &euclid(1.0, 2)).unwrap();
        assert_eq!(extracted, db);
        assert_eq!(extracted.as_slice(), &[0, 0, 0, 1, 1, 1]);
    }

    #[test]
    fn extraction_edges() {
        let t = line(&[0.0, 2.0, 5.0, 9.0]);
        let r = optics_order(&t, &euclid(f64::INFINITY, 2)).unwrap();
        assert_eq!(r.extract_clusters(1.0).unwrap().noise_count(), 4);
        assert_eq!(r.extract_clusters(100.0).unwrap().as_slice(), &[0, 0, 0, 0]);
        let bounded = optics_order(&t, &euclid(3.0, 2)).unwrap();
        assert!(bounded.extract_clusters(4.0).is_err());
        assert!(bounded.core_distance[3].is_infinite());
    }

    #[test]
    fn csv_uses_inf_literal() {
        let t = line(&[0.0, 1.0]);
        let r = optics_order(&t, &euclid(f64::INFINITY, 2)).unwrap();
        let mut buf = Vec::new();
        r.write_csv(&mut buf, t.row_ids()).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(
            text,
            "order_position,point_id,reachability,core_distance\n0,0,inf,1\n1,1,1,1\n"
        );
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"inf\""));
        let back: OpticsResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
