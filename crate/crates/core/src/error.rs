use thiserror::Error;

/// Errors raised by the estimators, the test engine and the simulation harness.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("no observation lies within the kernel support of the query point")]
    AllWeightsZero,

    #[error("no observation has level `{0}`")]
    EmptyStratum(String),

    #[error("no uncensored observations in the sample")]
    NoEvents,

    #[error("estimated cure probability is one; the latency is undefined")]
    CureRateOne,

    #[error("censoring distribution saturated at the cure threshold for row {0}")]
    GSaturated(usize),

    #[error("a bandwidth is required for a continuous conditioning covariate")]
    MissingBandwidth,

    #[error("a bandwidth was supplied but no conditioning covariate is continuous")]
    UnexpectedBandwidth,

    #[error(
        "nominal covariate `{column}` has {levels} levels (cap {cap}); \
         recode it as k-1 dummy variables instead"
    )]
    TooManyLevels { column: String, levels: usize, cap: usize },

    #[error("invalid bandwidth grid: {0}")]
    InvalidGrid(String),

    #[error("invalid covariate specification: {0}")]
    InvalidSpec(String),

    #[error("invalid sample: {0}")]
    InvalidSample(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{failed} of {total} bootstrap resamples failed (first failure: {first})")]
    TooManyFailures { failed: usize, total: usize, first: String },

    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
