use specaus_core::estimate::EstimateError;
use specaus_core::graph::GraphError;
use specaus_core::svar::SvarError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Numerical(_) => 2,
            CliError::Io(_) => 3,
        }
    }
}

impl From<GraphError> for CliError {
    fn from(e: GraphError) -> Self {
        CliError::Validation(e.to_string())
    }
}

impl From<SvarError> for CliError {
    fn from(e: SvarError) -> Self {
        match e {
            SvarError::Graph(g) => g.into(),
            SvarError::Structure { .. } | SvarError::NoiseVariance(_) => CliError::Validation(e.to_string()),
            SvarError::Csv(_) | SvarError::Io(_) => CliError::Io(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<EstimateError> for CliError {
    fn from(e: EstimateError) -> Self {
        match e {
            EstimateError::Graph(g) => g.into(),
            EstimateError::Svar(s) => s.into(),
            EstimateError::Vertex { ref source, .. } if matches!(**source, EstimateError::TooShort { .. }) => {
                CliError::Validation(e.to_string())
            }
            EstimateError::TooShort { .. } | EstimateError::LagBeyondOrder { .. } => CliError::Validation(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub fn io_at(path: &std::path::Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}
