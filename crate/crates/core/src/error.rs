use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("cannot schedule at {at} ns, clock is already at {now} ns")]
    PastEvent { at: u64, now: u64 },
    #[error("stop time must be positive")]
    InvalidStop,
    #[error("engine already ran to completion")]
    AlreadyFinished,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("invalid value `{value}` for `{key}`: {msg}")]
    BadValue {
        key: String,
        value: String,
        msg: String,
    },
    #[error("{0}")]
    Domain(String),
    #[error("`{0}` cannot be swept")]
    NotSweepable(String),
}

#[derive(Debug, Error)]
pub enum MobilityError {
    #[error("query at {t} s is outside the segment [{start}, {end}] s")]
    OutsideSegment { t: f64, start: f64, end: f64 },
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("simulation time must be positive, got {0}")]
    NonPositiveTime(f64),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("unknown column `{0}`")]
    UnknownColumn(String),
    #[error("{path}: malformed CSV: {msg}")]
    Malformed { path: PathBuf, msg: String },
}
