use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config parse error: {0}")]
    Parse(String),

    /// A parameter violates one of its invariants; the message names it.
    #[error("invalid parameter {name}: requires {invariant} (got {value})")]
    Invalid {
        name: String,
        invariant: &'static str,
        value: f64,
    },

    #[error("{what} = {value} outside {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("brine formula singular at T = {0} °C (requires T < 0)")]
    Singular(f64),

    #[error("shortwave flux {0} W/m² given without an albedo")]
    MissingAlbedo(f64),

    #[error("solver error: {0}")]
    Solver(String),

    #[error("ice vanished at t = {t} s (H = {thickness} m)")]
    IceVanished { t: f64, thickness: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: impl Into<String>, invariant: &'static str, value: f64) -> Error {
    Error::Invalid {
        name: name.into(),
        invariant,
        value,
    }
}
