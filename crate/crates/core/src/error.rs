use core::fmt;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Two operands disagree on their dimension.
    DimensionMismatch { expected: usize, found: usize },
    /// An input value is outside the domain of the operation.
    Domain(&'static str),
    /// A vector's norm is below the zero tolerance, so its direction is undefined.
    DegenerateAngle,
    /// The true gradient is undefined at θ ∈ {0, π}.
    SingularGradient,
    /// The expected coarse gradient is undefined at θ = π.
    SingularDirection,
    /// The unnormalized iterate collapsed to (numerically) zero.
    NormalizationFailure { iteration: u64, norm: f64 },
    /// No initial point within the angle margin was found.
    InitializationFailed { attempts: u32 },
    /// The run was asked to enforce a static precondition that does not hold.
    PreconditionViolated(&'static str),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::Domain(msg) => write!(f, "domain error: {msg}"),
            Error::DegenerateAngle => f.write_str("angle undefined for a zero-norm vector"),
            Error::SingularGradient => {
                f.write_str("true gradient undefined when w is parallel to the teacher")
            }
            Error::SingularDirection => f.write_str(
                "expected coarse gradient undefined when w is antiparallel to the teacher",
            ),
            Error::NormalizationFailure { iteration, norm } => {
                write!(
                    f,
                    "normalization failed at iteration {iteration}: norm {norm:e}"
                )
            }
            Error::InitializationFailed { attempts } => {
                write!(f, "no admissible initial point after {attempts} attempts")
            }
            Error::PreconditionViolated(which) => write!(f, "precondition violated: {which}"),
        }
    }
}

impl core::error::Error for Error {}
