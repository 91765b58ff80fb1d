use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] evosnn_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error("stopped after iteration {0} as requested")]
    Stopped(usize),
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Core(e.into())
    }
}

impl CliError {
    pub fn to_json(&self) -> serde_json::Value {
        let kind = match self {
            CliError::Core(e) => e.kind(),
            CliError::Usage(_) => "usage",
            CliError::Stopped(_) => "stopped",
        };
        let mut v = json!({ "error": { "kind": kind, "message": self.to_string() } });
        if let CliError::Core(evosnn_core::Error::InvalidGenome(list)) = self {
            v["error"]["violations"] = list.iter().map(|x| x.to_string()).collect();
        }
        v
    }
}
