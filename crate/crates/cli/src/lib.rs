//! Batch pipeline around the `clustkit` algorithms: run configuration,
//! synthetic data, SVG charts and report bundles.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod svg;
pub mod synth;

pub use config::{MethodSpec, Overrides, Reduction, RunConfig};
pub use error::{CliError, Stage};
pub use pipeline::{run, run_interpret, ReportBundle, Scope};
pub use synth::generate_synthetic;
