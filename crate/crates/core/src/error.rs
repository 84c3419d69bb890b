use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Input(String),
    #[error("resource limit exceeded: {what} requires {required}, limit is {limit}")]
    Resource {
        what: &'static str,
        required: String,
        limit: String,
    },
    #[error("invalid state: {0}")]
    State(String),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn state(msg: impl Into<String>) -> Self {
        Error::State(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
