use std::fmt;
use std::process::ExitCode;

/// Why a job stopped, mapped one-to-one onto the process exit code.
#[derive(Debug)]
pub enum Failure {
    /// A check ran and reported a violation (exit 1).
    Verification(String),
    /// Unreadable or invalid input, including output paths that cannot be written (exit 2).
    Input(String),
    /// An iterative method did not converge (exit 3).
    Numeric(String),
}

impl Failure {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Failure::Verification(_) => 1,
            Failure::Input(_) => 2,
            Failure::Numeric(_) => 3,
        })
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Verification(_) => "verification",
            Failure::Input(_) => "input",
            Failure::Numeric(_) => "numeric",
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let msg = match self {
            Failure::Verification(m) | Failure::Input(m) | Failure::Numeric(m) => m,
        };
        write!(f, "error[{}]: {msg}", self.kind())
    }
}

impl From<dyson_core::Error> for Failure {
    fn from(e: dyson_core::Error) -> Self {
        if e.is_numerical() {
            Failure::Numeric(e.to_string())
        } else {
            Failure::Input(e.to_string())
        }
    }
}
