use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid scenario spec: {0}")]
    InvalidSpec(String),

    #[error("invalid robot parameters: {0}")]
    InvalidParams(String),

    #[error("point ({x:.3}, {y:.3}) is outside the scenario bounds")]
    OutOfBounds { x: f64, y: f64 },

    #[error("division by zero: {0}")]
    DivisionByZero(&'static str),

    #[error("insufficient light on the sun sensor (sum {sum:.4} V <= {threshold:.4} V)")]
    InsufficientLight { sum: f64, threshold: f64 },

    #[error("sun elevation {elevation_deg:.1} deg is too close to zenith for a heading fix")]
    IllConditioned { elevation_deg: f64 },

    #[error("no thermal path found ({rows} rows with both margins, need {needed})")]
    NoPath { rows: usize, needed: usize },

    #[error("no lidar corridor found ({left} left / {right} right points, need {needed})")]
    NoCorridor {
        left: usize,
        right: usize,
        needed: usize,
    },

    #[error("malformed bus frame: {0}")]
    MalformedFrame(String),

    #[error("corrupt run log: {0}")]
    CorruptLog(String),

    #[error("configuration error: {0}")]
    Config(String),
}
