use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// A config field failed validation; the string names the field.
    #[error("config error: {field}: {message}")]
    Config { field: String, message: String },

    #[error("cannot parse config: {0}")]
    Toml(#[from] toml::de::Error),

    #[error(transparent)]
    Core(#[from] dgtime::DgError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CliError>;

pub fn config_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Config {
        field: field.to_string(),
        message: message.into(),
    }
}
