use thiserror::Error;

/// Errors raised by the estimators, oracles, and data plumbing.
#[derive(Debug, Error)]
pub enum Error {
    #[error("population masses sum to {total}, expected 1")]
    MassNotNormalized { total: f64 },
    #[error("negative mass {mass} in population cell {cell}")]
    NegativeMass { cell: usize, mass: f64 },
    #[error("outcome value {value} lies outside the declared domain{}", line_suffix(*.line))]
    OutcomeOutOfDomain { value: f64, line: Option<u64> },
    #[error("outcome value {0} is not in the population's outcome support")]
    UnknownSupportValue(f64),
    #[error("invalid outcome domain: {0}")]
    InvalidDomain(String),
    #[error("covariate code out of range for {0}")]
    CovariateOutOfDomain(String),
    #[error("covariate space has {cells} cells, more than the cap of {cap}")]
    TooManyCells { cells: u64, cap: u64 },
    #[error("conditioning set is empty")]
    EmptyConditioningSet,
    #[error("no sample records in cell {0}")]
    EmptyCell(String),
    #[error("population puts zero mass on cell {0}")]
    ZeroCellMass(String),
    #[error("invalid interval [{lo}, {hi}]")]
    InvalidInterval { lo: f64, hi: f64 },
    #[error("restriction [{lo}, {hi}] is not a sub-interval of the outcome domain")]
    InvalidRestriction { lo: f64, hi: f64 },
    #[error("imputed value {0} lies outside the outcome domain")]
    ImputedValueOutOfDomain(f64),
    #[error("assumed missing-data mean {0} lies outside the outcome domain")]
    MeanOutOfDomain(f64),
    #[error("imputation model is undefined on {0}")]
    ModelUndefinedOnCell(String),
    #[error("bound denominator is zero for cell {0}")]
    ZeroDenominator(String),
    #[error("outcome is not binary")]
    NonBinaryOutcome,
    #[error("{strata} missing-data strata exceed the oracle cap of {cap}")]
    TooManyStrata { strata: usize, cap: usize },
    #[error("assumed covariate distribution is undefined for stratum {0}")]
    QUndefinedForStratum(String),
    #[error("probability out of range: {0}")]
    ProbabilityOutOfRange(String),
    #[error("cannot fit imputation model: stratum {0} has no observed donors")]
    UnfittableStratum(String),
    #[error("regime mismatch: {0}")]
    RegimeMismatch(String),
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("draw {index}: {source}")]
    Draw {
        index: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("{skipped} of {reps} replications at N={n} skipped (limit 5%)")]
    TooManySkips { n: usize, skipped: usize, reps: usize },
    #[error("invalid experiment: {0}")]
    InvalidExperiment(String),
    #[error("malformed row at line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("unknown column: {0}")]
    UnknownColumn(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("cannot parse covariate assignment {0:?}")]
    BadAssignment(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

fn line_suffix(line: Option<u64>) -> String {
    line.map(|l| format!(" at line {l}")).unwrap_or_default()
}

impl Error {
    /// Whether the error stems from malformed input data or configuration, as
    /// opposed to a mathematical guard (empty cell, zero denominator, ...).
    pub fn is_data_error(&self) -> bool {
        match self {
            Error::Draw { source, .. } => source.is_data_error(),
            Error::MassNotNormalized { .. }
            | Error::NegativeMass { .. }
            | Error::OutcomeOutOfDomain { .. }
            | Error::UnknownSupportValue(_)
            | Error::InvalidDomain(_)
            | Error::CovariateOutOfDomain(_)
            | Error::TooManyCells { .. }
            | Error::InvalidDistribution(_)
            | Error::InvalidExperiment(_)
            | Error::MalformedRow { .. }
            | Error::UnknownColumn(_)
            | Error::InvalidConfig(_)
            | Error::BadAssignment(_)
            | Error::Io(_)
            | Error::Json(_)
            | Error::Csv(_) => true,
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
