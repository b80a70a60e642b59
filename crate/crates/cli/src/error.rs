use serde::Serialize;

/// Failure categories, each with its own exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorKind {
    /// Bad flags or configuration.
    Config,
    /// Unreadable or malformed input files.
    Input,
    /// The model or an estimator failed.
    Runtime,
    /// `validate-urn` ran and at least one property failed.
    CheckFailed,
}

impl ErrorKind {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorKind::Runtime => 1,
            ErrorKind::Config => 2,
            ErrorKind::Input => 3,
            ErrorKind::CheckFailed => 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub kind: ErrorKind,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Config, message: msg.into() }
    }

    pub fn input(msg: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Input, message: msg.into() }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError { kind: ErrorKind::Runtime, message: msg.into() }
    }

    /// The machine-readable report written to stderr.
    pub fn report(&self) -> String {
        serde_json::json!({ "error": self }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.message)
    }
}

impl std::error::Error for CliError {}

impl From<edpmed_core::Error> for CliError {
    fn from(e: edpmed_core::Error) -> Self {
        use edpmed_core::Error as E;
        let kind = match e {
            E::InvalidConfig(_) | E::InvalidHyper(_) | E::InvalidEffect(_) | E::InvalidUrn(_) => ErrorKind::Config,
            E::InvalidData(_) | E::DrawLog(_) | E::Io(_) => ErrorKind::Input,
            _ => ErrorKind::Runtime,
        };
        CliError { kind, message: e.to_string() }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
