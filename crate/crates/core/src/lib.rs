//! Clustering toolkit for tabular feature data.
//!
//! The crate is organized by stage:
//!
//! - [`dataset`]: CSV ingestion, percentile and composite rankings,
//!   time-series summary features, standardization and PCA.
//! - [`prototype`]: K-means, mini-batch K-means, fuzzy c-means and Gaussian
//!   mixtures fit by expectation-maximization.
//! - [`hierarchy`]: agglomerative clustering with Lance-Williams updates.
//! - [`density`]: DBSCAN and OPTICS with threshold extraction.
//! - [`metrics`]: silhouette, Calinski-Harabasz, Davies-Bouldin, distortion
//!   knees, BIC/AIC and v-measure.
//! - [`interpret`]: cluster profiles, Jenks natural breaks, CART trees and
//!   random-forest importances.
//! - [`select`]: k-sweeps and grid searches with self-certifying reports.
//!
//! All fitters are deterministic functions of their inputs and seed.

pub mod dataset;
pub mod prototype;
pub mod hierarchy;
pub mod density;
pub mod metrics;
pub mod interpret;
pub mod select;
pub mod distance;
pub mod error;
pub mod table;

pub use distance::{pairwise_distances, DistanceMatrix, Metric};
pub use error::{Error, ErrorKind, Result};
pub use table::{FeatureTable, LabelVector, NOISE};

