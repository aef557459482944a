use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{what} = {value} is outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("invalid noise model: {0}")]
    InvalidModel(String),

    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParam { field: &'static str, reason: String },

    #[error("trajectory table exceeds cap of {cap} entries (found at least {found})")]
    TableCapExceeded { cap: usize, found: usize },

    #[error("codebook of {rows}x{cols} bits exceeds the size cap of {cap} bits")]
    CodebookTooLarge { rows: usize, cols: usize, cap: u64 },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("empty trajectory table")]
    EmptyTable,

    #[error("malformed codebook file: {0}")]
    Format(String),
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParam {
            field,
            reason: reason.into(),
        }
    }
}

pub(crate) fn check_domain(
    what: &'static str,
    value: f64,
    ok: bool,
    domain: &'static str,
) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Domain {
            what,
            value,
            domain,
        })
    }
}
