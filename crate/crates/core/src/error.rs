use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("event scheduled in the past: {at} < clock {now}")]
    ScheduleInPast { now: f64, at: f64 },

    #[error("doctor queue unstable: higher-priority service mean {mu_h} >= interarrival {lambda_h}")]
    Unstable { mu_h: f64, lambda_h: f64 },

    #[error("remaining-service estimate not defined for {0} service times")]
    UnsupportedDistribution(&'static str),

    #[error("invalid data: {0}")]
    Data(String),

    #[error("oracle clone did not finish within {days} simulated days")]
    OracleGuard { days: f64 },

    #[error("replication {index} failed: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Toml(#[from] toml::de::Error),
}

impl Error {
    /// Process exit code for the CLI: 1 for configuration problems, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Toml(_) => 1,
            Error::Replication { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
