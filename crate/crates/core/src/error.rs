use alloc::string::String;

/// Failures raised by the numerical kernels and solvers.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;

macro_rules! dim_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Dimension(alloc::format!($($arg)*))
    };
}

macro_rules! domain_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Domain(alloc::format!($($arg)*))
    };
}

macro_rules! numerical_err {
    ($($arg:tt)*) => {
        $crate::error::Error::Numerical(alloc::format!($($arg)*))
    };
}

pub(crate) use {dim_err, domain_err, numerical_err};
