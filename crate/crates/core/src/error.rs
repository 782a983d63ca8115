use thiserror::Error;

/// Errors surfaced by the simulation and modeling pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config field `{field}`: {message}")]
    Config { field: String, message: String },

    #[error(
        "collision at t={time_s:.2}s lane {lane}: vehicle {follower_id} at {follower_pos:.6} mi \
         overlaps vehicle {leader_id} at {leader_pos:.6} mi"
    )]
    Collision {
        time_s: f64,
        lane: usize,
        leader_id: u64,
        leader_pos: f64,
        follower_id: u64,
        follower_pos: f64,
    },

    #[error("unknown design column label `{0}`")]
    UnknownColumn(String),

    #[error("prediction row is missing column `{0}`")]
    MissingColumn(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("fit failed: {0}")]
    Fit(String),

    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: String, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("config parse error: {0}")]
    TomlParse(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.to_string(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
