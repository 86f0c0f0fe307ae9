use thiserror::Error;

/// Errors raised by mesh construction and refinement.
#[derive(Debug, Error)]
pub enum MeshError {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("triangle index {index} out of range for mesh with {len} elements")]
    InvalidIndex { index: usize, len: usize },
    #[error("meshes descend from different initial meshes")]
    AncestryMismatch,
    #[error("lineage depth exceeds {0} bisections")]
    LineageOverflow(usize),
    #[error("point ({0}, {1}) lies outside the domain")]
    PointOutside(f64, f64),
    #[error("curve is not resolved by the mesh: {0}")]
    CurveNotResolved(String),
    #[error("malformed mesh document: {0}")]
    Format(String),
}

/// Errors raised by assembly, solution and functional evaluation.
#[derive(Debug, Error)]
pub enum FemError {
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error("mesh does not resolve the boundary partition of the problem: {0}")]
    BoundaryMismatch(String),
    #[error("discrete problem is singular or ill-posed (reciprocal condition estimate {rcond:.3e})")]
    SingularOrIllPosed { rcond: f64 },
    #[error("snapshot has {got} coefficients, mesh has {expected} free vertices")]
    CoefficientLength { expected: usize, got: usize },
    #[error("linear solver failure: {0}")]
    Solver(String),
    #[error("malformed snapshot document: {0}")]
    Format(String),
    #[error("empty snapshot list")]
    NoSnapshots,
}

/// Errors raised by the frequency sweep driver.
#[derive(Debug, Error)]
pub enum SweepError {
    #[error(transparent)]
    Fem(#[from] FemError),
    #[error("empty list of sample points")]
    NoPoints,
    #[error("only {usable} usable snapshots, at least 2 are required")]
    TooFewSnapshots { usable: usize },
    #[error("invalid adaptive configuration: {0}")]
    Config(String),
}

/// Errors raised when building or evaluating rational surrogates.
#[derive(Debug, Error)]
pub enum RationalError {
    #[error("{samples} samples cannot determine a type [{degree}] surrogate (need at least {needed})")]
    TooFewSamples {
        samples: usize,
        degree: usize,
        needed: usize,
    },
    #[error("duplicate sample or support point {0}")]
    DuplicatePoints(String),
    #[error("snapshot Gramian has rank zero")]
    RankZero,
    #[error("Gramian is not positive semidefinite (pivot {0:.3e})")]
    NotPsd(f64),
    #[error("coincident sample and support points make the Cauchy block rank deficient")]
    CauchyRankDeficient,
    #[error("denominator vanishes at z = {0}")]
    PoleEvaluation(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("functional is not supported inside the surrogate domain: {0}")]
    UnsupportedFunctional(String),
    #[error("empty snapshot list")]
    Empty,
    #[error(transparent)]
    Fem(#[from] FemError),
}

/// Errors raised by the analytic reference solution.
#[derive(Debug, Error)]
pub enum AnalyticError {
    #[error("z = {z} lies within {distance:.2e} of the eigenvalue {eigenvalue}")]
    NearEigenvalue {
        z: String,
        eigenvalue: f64,
        distance: f64,
    },
    #[error("truncation index must be odd and positive, got {0}")]
    BadTruncation(usize),
}
