use clustkit::ErrorKind;
use thiserror::Error;

/// Pipeline stage, used to locate failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Ingest,
    Engineer,
    Standardize,
    Reduce,
    Cluster,
    Score,
    Interpret,
    Emit,
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Ingest => "ingest",
            Stage::Engineer => "engineer",
            Stage::Standardize => "standardize",
            Stage::Reduce => "reduce",
            Stage::Cluster => "cluster",
            Stage::Score => "score",
            Stage::Interpret => "interpret",
            Stage::Emit => "emit",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: clustkit::Error,
    },

    #[error("{stage} stage failed writing {path}: {source}")]
    Output {
        stage: Stage,
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn at(stage: Stage) -> impl FnOnce(clustkit::Error) -> CliError {
        move |source| CliError::Stage { stage, source }
    }

    /// Process exit code: 2 configuration, 3 data, 4 numeric.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Stage { source, .. } => match source.kind() {
                ErrorKind::Parameter => 2,
                ErrorKind::Data => 3,
                ErrorKind::Numeric => 4,
            },
            CliError::Output { .. } => 3,
        }
    }
}
