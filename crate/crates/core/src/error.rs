use thiserror::Error;

/// Errors raised by the rate engine and the Fock-space simulator.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{name} = {value} is outside its domain {domain}")]
    Domain {
        name: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("quadrature did not converge within {subdivisions} subdivisions (error estimate {estimate:e})")]
    NonConvergence { subdivisions: usize, estimate: f64 },

    #[error("bracket [{low}, {high}] does not straddle a sign change")]
    Bracket { low: f64, high: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("photon population exceeds the Fock-space cap of {cap}")]
    Truncation { cap: usize },

    #[error("invalid mode selection: {0}")]
    Mode(String),

    #[error("configuration error in `{field}`: {message}")]
    Config { field: String, message: String },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, 1]",
        })
    }
}

pub(crate) fn check_non_negative(name: &'static str, value: f64) -> Result<()> {
    if value >= 0.0 && value.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            name,
            value,
            domain: "[0, inf)",
        })
    }
}
