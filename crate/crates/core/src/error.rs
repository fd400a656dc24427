use thiserror::Error;

/// Errors shared by the model, optimizer, training, and I/O layers.
#[derive(Debug, Error)]
pub enum CoreError {
    #[error("non-finite value in {context} (component {component})")]
    NonFinite { context: &'static str, component: usize },

    #[error("temperature {0} degC outside the valid conversion range (-20, 60)")]
    TemperatureRange(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("weather parse error at row {row}: {msg}")]
    WeatherParse { row: usize, msg: String },

    #[error("weather series too short: have {have} records, need {need}")]
    WeatherLength { have: usize, need: usize },

    #[error("weather series invalid at row {row}: {msg}")]
    WeatherInvalid { row: usize, msg: String },

    #[error("parameter file error at row {row}: {msg}")]
    ParameterParse { row: usize, msg: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("weight file format error: {0}")]
    WeightFormat(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("replay buffer has {have} transitions, need {need}")]
    BufferUnderfull { have: usize, need: usize },

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, CoreError>;
