use thiserror::Error;

use crate::devsim::RowId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid device spec: {0}")]
    InvalidDeviceSpec(String),

    #[error("row {0} is not in the tested subset")]
    UntestedRow(RowId),

    #[error("hammer count must be positive")]
    ZeroHammerCount,

    #[error("episode {requested} is not the current episode ({current:?})")]
    StaleEpisode { requested: u64, current: Option<u64> },

    #[error("no hammering episode has been started")]
    NoEpisode,

    #[error("no tested row flips anywhere in the hammer grid (up to {stop})")]
    NoFlipInGrid { stop: u64 },

    #[error("invalid hammer grid: {0}")]
    InvalidGrid(String),

    #[error("percentile must lie in (0, 1), got {0}")]
    InvalidPercentile(f64),

    #[error("percentile falls above the measurement grid")]
    PercentileAboveGrid,

    #[error("empty measurement column")]
    EmptyColumn,

    #[error("invalid model parameters: {0}")]
    InvalidParams(String),

    #[error("bit address {address} outside the flip space of {space} bits")]
    AddressOutOfRange { address: u64, space: u64 },

    #[error("trial count must be positive")]
    ZeroTrials,

    #[error("horizon {horizon} is shorter than one scrub interval ({scrub_interval})")]
    HorizonTooShort { horizon: u64, scrub_interval: u64 },

    #[error("no trial failed before the horizon ({horizon} epochs); use a longer horizon")]
    InsufficientFailures { horizon: u64 },

    #[error("unsupported by the analytic oracle: {0}")]
    OracleUnsupported(String),

    #[error("profile is missing {0}")]
    IncompleteProfile(&'static str),

    #[error("row {0} has no configured threshold")]
    UnknownRow(RowId),

    #[error("read disturbance threshold must be positive")]
    ZeroThreshold,

    #[error("invalid trace: {0}")]
    InvalidTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("malformed record: {0}")]
    Malformed(String),
}

impl Error {
    /// True for errors that mean "the run produced too little signal", as opposed
    /// to a bad configuration or an internal fault.
    pub fn is_insufficient_data(&self) -> bool {
        matches!(
            self,
            Error::NoFlipInGrid { .. } | Error::InsufficientFailures { .. } | Error::PercentileAboveGrid
        )
    }
}
