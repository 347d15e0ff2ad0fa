//! Command failures split by exit code: 1 for bad input, 2 for runtime.

use std::fmt::Display;

#[derive(Debug)]
pub enum Failure {
    Invalid(anyhow::Error),
    Runtime(anyhow::Error),
}

impl Failure {
    pub fn exit_code(&self) -> u8 {
        match self {
            Failure::Invalid(_) => 1,
            Failure::Runtime(_) => 2,
        }
    }

    pub fn error(&self) -> &anyhow::Error {
        match self {
            Failure::Invalid(e) | Failure::Runtime(e) => e,
        }
    }
}

pub trait Classify<T> {
    fn invalid(self, what: impl Display) -> Result<T, Failure>;
    fn runtime(self, what: impl Display) -> Result<T, Failure>;
}

impl<T, E> Classify<T> for Result<T, E>
where
    E: Into<anyhow::Error>,
{
    fn invalid(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::Invalid(e.into().context(what.to_string())))
    }

    fn runtime(self, what: impl Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::Runtime(e.into().context(what.to_string())))
    }
}

pub fn invalid<T>(msg: impl Display) -> Result<T, Failure> {
    Err(Failure::Invalid(anyhow::anyhow!("{msg}")))
}
