use thiserror::Error;

/// Every failure the library reports. Trajectory escapes are not errors;
/// they are carried on [`crate::ode::Status`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("syntax error at byte {offset}: expected one of {expected:?}")]
    Syntax { offset: usize, expected: Vec<String> },
    #[error("unknown identifier `{0}`")]
    UnknownIdentifier(String),
    #[error("domain error in `{0}`")]
    Domain(String),
    #[error("size mismatch: {0}")]
    SizeMismatch(String),
    #[error("matrix exponential overflow")]
    Overflow,
    #[error("basis not closed under bracket (residual {0:e})")]
    NotClosed(f64),
    #[error("basis is linearly dependent")]
    Dependent,
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("invalid model morphism: {0}")]
    BadMorphism(String),
    #[error("singular coframe at {0:?}")]
    SingularCoframe(Vec<f64>),
    #[error("point {0:?} outside chart")]
    OutsideChart(Vec<f64>),
    #[error("degenerate metric: {0}")]
    DegenerateMetric(String),
    #[error("not a disguise: {0}")]
    NotADisguise(String),
    #[error("prefix of length {0} does not span a subalgebra")]
    NotASubalgebra(usize),
    #[error("morphism curvature ill defined (lift residual {0:e})")]
    IllDefined(f64),
    #[error("gauge is not torsion free (residual {0:e})")]
    NotTorsionFree(f64),
    #[error("inner product is not invariant (residual {0:e})")]
    NotInvariant(f64),
    #[error("radial flow escaped the chart")]
    IntegrationEscaped,
    #[error("obstruction too large: {0:e}")]
    ObstructionTooLarge(f64),
    #[error("lcm {0} exceeds enumeration limit")]
    TooLarge(u64),
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, Error>;
