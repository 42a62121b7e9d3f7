use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),

    #[error("{0}")]
    Numerical(String),

    #[error("{0}")]
    Io(String),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Config(_) => "config",
            CliError::Numerical(_) => "numerical",
            CliError::Io(_) => "io",
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error record serializes")
    }
}

impl From<anova_rgs::Error> for CliError {
    fn from(e: anova_rgs::Error) -> Self {
        use anova_rgs::Error as E;
        match e {
            E::Io(_) => CliError::Io(e.to_string()),
            E::Domain(_)
            | E::Config(_)
            | E::Dimension { .. }
            | E::Index { .. }
            | E::DegenerateKernel { .. }
            | E::Json(_) => CliError::Config(e.to_string()),
            E::NotSymmetric(_)
            | E::NotPsd { .. }
            | E::UndefinedShares
            | E::InsufficientData(_)
            | E::Numerical(_) => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
