use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A caller-supplied argument violates a precondition.
    #[error("invalid parameter `{name}`: {reason}")]
    Parameter { name: &'static str, reason: String },

    /// Arrays or grids that must line up do not.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A family evaluation left the representable range.
    #[error("overflow evaluating family at t={t}, x={x}: exponent {exponent}")]
    Overflow { t: f64, x: f64, exponent: f64 },

    /// A numerical procedure could not produce a usable answer.
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The family lacks an analytic form the operation needs.
    #[error("family `{family}` does not provide {what}")]
    Capability {
        family: &'static str,
        what: &'static str,
    },
}

impl Error {
    pub(crate) fn parameter(name: &'static str, reason: impl Into<String>) -> Self {
        Error::Parameter {
            name,
            reason: reason.into(),
        }
    }

    /// True for errors raised by floating-point evaluation rather than setup.
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Overflow { .. } | Error::Numeric(_))
    }
}
