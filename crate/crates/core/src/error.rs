use chrono::NaiveDate;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A price that cannot be log-transformed.
    #[error("series '{series}' has non-positive price {value} on {date}")]
    NonPositivePrice {
        series: String,
        date: NaiveDate,
        value: f64,
    },

    #[error("column '{0}' has zero variance")]
    ZeroVariance(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("missing dates: {}", format_dates(.0))]
    MissingDates(Vec<NaiveDate>),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    /// The post-selection design is rank deficient.
    #[error("collinear columns: {}", .0.join(", "))]
    Collinear(Vec<String>),

    #[error("selected regressors ({regressors}) leave no degrees of freedom with {observations} observations; raise the penalty floor")]
    TooManyRegressors {
        regressors: usize,
        observations: usize,
    },

    #[error("model did not converge within {0} sweeps")]
    NotConverged(usize),

    #[error("every candidate penalty failed to converge")]
    NoConvergedCandidate,

    #[error("coefficients cannot be stabilized: {0}")]
    Unstable(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

fn format_dates(dates: &[NaiveDate]) -> String {
    const SHOWN: usize = 10;
    let mut out = dates
        .iter()
        .take(SHOWN)
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if dates.len() > SHOWN {
        out.push_str(&format!(" and {} more", dates.len() - SHOWN));
    }
    out
}
