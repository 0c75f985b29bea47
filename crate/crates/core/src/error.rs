use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is singular to working precision (pivot {pivot:e} below {threshold:e})")]
    SingularMatrix { pivot: f64, threshold: f64 },

    #[error("matrix is rank deficient (|R[{index},{index}]| = {value:e} below {threshold:e})")]
    RankDeficient { index: usize, value: f64, threshold: f64 },

    #[error("{what} did not converge within {iterations} iterations")]
    NoConvergence { what: &'static str, iterations: usize },

    #[error("operator of dimension {requested} exceeds the assembly cap {cap}")]
    DimensionCap { requested: usize, cap: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("relative residual denominator {0:e} is below machine precision")]
    DegenerateDenominator(f64),

    #[error("reference solution has zero norm")]
    ZeroReference,

    #[error("Cayley transform pole: z = {re} + {im}i is at -gamma")]
    PoleHit { re: f64, im: f64 },

    #[error("SDA initialization failed: {which} is singular")]
    InitSingular { which: &'static str },

    #[error("SDA breakdown at step {step}: I - GH has condition estimate {condition:e}")]
    Breakdown { step: usize, condition: f64 },

    #[error("cannot split the spectrum into {n} antistable and {m} stable eigenvalues")]
    ClassificationAmbiguous { n: usize, m: usize },

    #[error("linearizing matrix is singular; inverse iteration needs a nonsingular H")]
    SingularH,

    #[error("central pair is ill conditioned: cond(U^T V) = {cond:e}")]
    CentralPairIllConditioned { cond: f64 },

    #[error("smallest central eigenvalue {xi1:e} is negligible relative to ||H||")]
    DegenerateSpectrum { xi1: f64 },

    #[error("U^T V is singular")]
    UVSingular,

    #[error("shift vectors are (numerically) orthogonal: |u^T v| = {dot:e}")]
    OrthogonalPair { dot: f64 },

    #[error("basis does not span an invariant subspace (defect {defect:e})")]
    NotInvariant { defect: f64 },

    #[error("central eigenvalue {re} + {im}i has no match in the spectrum")]
    MatchFailure { re: f64, im: f64 },

    #[error("Gauss-Legendre node computation did not converge")]
    QuadratureFailure,

    #[error("problem is not an M-NARE: M-matrix test failed ({0})")]
    NotMNare(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(self, stage: &'static str) -> Error {
        Error::Stage { stage, source: Box::new(self) }
    }

    /// Innermost error, looking through stage tags.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }

    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self.root() {
            Error::SingularMatrix { .. } => "singular_matrix",
            Error::RankDeficient { .. } => "rank_deficient",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DimensionCap { .. } => "dimension_cap",
            Error::DimensionMismatch(_) => "dimension_mismatch",
            Error::NonFinite { .. } => "non_finite",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::DegenerateDenominator(_) => "degenerate_denominator",
            Error::ZeroReference => "zero_reference",
            Error::PoleHit { .. } => "pole_hit",
            Error::InitSingular { .. } => "init_singular",
            Error::Breakdown { .. } => "breakdown",
            Error::ClassificationAmbiguous { .. } => "classification_ambiguous",
            Error::SingularH => "singular_h",
            Error::CentralPairIllConditioned { .. } => "central_pair_ill_conditioned",
            Error::DegenerateSpectrum { .. } => "degenerate_spectrum",
            Error::UVSingular => "uv_singular",
            Error::OrthogonalPair { .. } => "orthogonal_pair",
            Error::NotInvariant { .. } => "not_invariant",
            Error::MatchFailure { .. } => "match_failure",
            Error::QuadratureFailure => "quadrature_failure",
            Error::NotMNare(_) => "not_m_nare",
            Error::Stage { .. } => unreachable!(),
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
