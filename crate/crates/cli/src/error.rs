use serde::Serialize;

/// Exit code for a failed verification or solve.
pub const EXIT_FAILURE: i32 = 1;
/// Exit code for unusable input.
pub const EXIT_BAD_INPUT: i32 = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Kind {
    BadInput,
    Failure,
}

#[derive(Debug, Clone, Serialize)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::BadInput,
            message: message.into(),
        }
    }

    pub fn failure(message: impl Into<String>) -> Self {
        Self {
            kind: Kind::Failure,
            message: message.into(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self.kind {
            Kind::BadInput => EXIT_BAD_INPUT,
            Kind::Failure => EXIT_FAILURE,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::json!({ "error": { "kind": self.kind, "message": self.message, "exit_code": self.exit_code() } }).to_string()
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<chfif::error::Error> for CliError {
    fn from(e: chfif::error::Error) -> Self {
        use chfif::error::Error as E;
        match e {
            E::NoConvergence { .. } | E::Singular(_) | E::RankDeficient(_) | E::ConditionCount { .. } => Self::failure(e.to_string()),
            _ => Self::input(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::input(e.to_string())
    }
}
