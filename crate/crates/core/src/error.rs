use thiserror::Error;

/// Errors raised while building or solving a discretization.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("stabilizer violates positivity on element {element}, local edge {edge}: tau1 - zeta.n/2 = {value:e}")]
    Stabilizer {
        element: usize,
        edge: usize,
        value: f64,
    },

    #[error("singular local problem on element {element}")]
    SingularElement { element: usize },

    #[error("singular matrix in {what}: zero pivot at row {row}")]
    Singular { what: String, row: usize },

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Tags an error with the pipeline stage that produced it.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for errors caused by invalid user input or an invalid discretization setup.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Stabilizer { .. }
            | Error::SingularElement { .. }
            | Error::Singular { .. } => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
