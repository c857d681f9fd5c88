use hdclt_core::Error;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// The configuration cannot be parsed or has a missing or mistyped key.
    #[error("config key `{key}`: {msg}")]
    Config { key: String, msg: String },

    #[error(transparent)]
    Core(#[from] Error),
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    /// 2: configuration or parameter error, 3: numerical failure, 4: I/O failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Core(e) => match e.root() {
                Error::Numerical(_) | Error::NotPsd { .. } => 3,
                Error::Io { .. } => 4,
                _ => 2,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
