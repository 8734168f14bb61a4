use thiserror::Error;

/// Errors shared across the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: missing required column `{0}`")]
    MissingColumn(String),

    #[error("row error at line {line}: {message}")]
    RowError { line: usize, message: String },

    #[error("duplicate plot id `{0}`")]
    DuplicatePlotId(String),

    #[error("raster format error: {0}")]
    RasterFormat(String),

    #[error("raster payload length mismatch: expected {expected} values, got {got}")]
    RasterLength { expected: usize, got: usize },

    #[error("grid geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("unknown band `{band}` for epoch {epoch} (term `{term}`)")]
    UnknownBand {
        band: String,
        epoch: String,
        term: String,
    },

    #[error("empty band list for epoch {0}")]
    EmptyBandList(String),

    #[error("singular design matrix (smallest/largest singular value ratio below 1e-10)")]
    SingularDesign,

    #[error("sample too small: n = {n}, need at least {min}")]
    SampleTooSmall { n: usize, min: usize },

    #[error("variance undefined for n = {0} (need n >= 2)")]
    VarianceUndefined(usize),

    #[error("subset enumeration guard exceeded: {count} candidate subsets (limit {limit})")]
    EnumerationGuard { count: u64, limit: u64 },

    #[error("no candidate model satisfies max VIF < 5; best infeasible candidate: {best}")]
    SelectionInfeasible { best: String },

    #[error("no predictor columns")]
    NoPredictors,

    #[error("zero denominator: {0}")]
    ZeroDenominator(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("missing term `{0}` in prediction input")]
    MissingTerm(String),

    #[error("sample size {n} exceeds population size {population}")]
    SampleExceedsPopulation { n: usize, population: usize },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
