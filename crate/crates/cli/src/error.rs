use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] pixbound::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    /// Process exit status: 2 for configuration problems, 3 for a diverged
    /// chain, 4 for unreadable or malformed files.
    pub fn exit_code(&self) -> i32 {
        use pixbound::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(e) => match e {
                E::Divergence { .. } => 3,
                E::Io { .. } | E::Format(_) => 4,
                E::Config(_) | E::Shape { .. } | E::Statistical(_) | E::Domain(_) => 2,
            },
        }
    }
}

pub(crate) fn io_error(path: impl Into<std::path::PathBuf>, source: std::io::Error) -> CliError {
    CliError::Core(pixbound::Error::Io {
        path: path.into(),
        source,
    })
}
