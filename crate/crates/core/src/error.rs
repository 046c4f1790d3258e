use thiserror::Error;

/// Errors raised by the simulator's numerical and configuration layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum CeiError {
    #[error("{what} = {value} is outside the valid domain ({expected})")]
    Domain {
        what: &'static str,
        value: f64,
        expected: &'static str,
    },

    #[error("invalid config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("failed to parse config: {0}")]
    Parse(String),

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),

    #[error("plan covers {plan_len} steps but the belief needs {needed}")]
    PlanTooShort { plan_len: usize, needed: usize },

    #[error("I/O error: {0}")]
    Io(String),
}

impl CeiError {
    pub(crate) fn domain(what: &'static str, value: f64, expected: &'static str) -> Self {
        CeiError::Domain {
            what,
            value,
            expected,
        }
    }

    pub(crate) fn config(key: impl Into<String>, reason: impl Into<String>) -> Self {
        CeiError::Config {
            key: key.into(),
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for CeiError {
    fn from(e: std::io::Error) -> Self {
        CeiError::Io(e.to_string())
    }
}

impl From<csv::Error> for CeiError {
    fn from(e: csv::Error) -> Self {
        CeiError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, CeiError>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn messages_name_the_key_and_value() {
        let e = CeiError::config("left.rho_u", "must lie in [0, 1], got 1.5");
        assert_eq!(e.to_string(), "invalid config key `left.rho_u`: must lie in [0, 1], got 1.5");
        let e = CeiError::domain("sigma", -1.0, "sigma > 0");
        assert!(e.to_string().contains("sigma = -1"));
    }

    #[test]
    fn io_errors_convert() {
        let io = std::io::Error::new(std::io::ErrorKind::NotFound, "gone");
        assert!(matches!(CeiError::from(io), CeiError::Io(m) if m == "gone"));
    }
}
