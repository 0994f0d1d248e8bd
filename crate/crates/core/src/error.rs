use std::io;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::lang::{ParseError, ParseErrors, TypeError};
use crate::semantics::ModelError;
use crate::store::FormatError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Parse(#[from] ParseErrors),
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("no convergence after {iterations} outer iterations")]
    NotConverged { iterations: usize },
    #[error("working directory: {0}")]
    Workdir(String),
    #[error("unknown property `{0}`")]
    UnknownProperty(String),
}

impl From<ParseError> for Error {
    fn from(e: ParseError) -> Self {
        Error::Parse(ParseErrors(vec![e]))
    }
}

impl Error {
    pub fn io(path: &Path, source: io::Error) -> Error {
        // format errors travel through io::Error inside readers
        if source
            .get_ref()
            .is_some_and(|r| r.downcast_ref::<FormatError>().is_some())
        {
            return Error::format(path, FormatError::from_io(source));
        }
        Error::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, source: FormatError) -> Error {
        Error::Format {
            path: path.to_path_buf(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
