use thiserror::Error;

/// Errors produced by the solver library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("validation error at row {row}, column `{column}`: {message}")]
    Validation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("fitting error: {0}")]
    Fit(String),

    #[error("{0}")]
    Predictor(#[from] PredictorError),

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

/// Failure of a black-box predictor, carrying the rows that were being scored
/// and, when raised inside a solve, the iteration.
#[derive(Debug, Clone, Error)]
#[error("predictor error{}{}: {message}", iteration_suffix(.iteration), rows_suffix(.rows))]
pub struct PredictorError {
    pub message: String,
    pub rows: Vec<usize>,
    pub iteration: Option<usize>,
}

impl PredictorError {
    pub fn new(message: impl Into<String>) -> Self {
        Self {
            message: message.into(),
            rows: Vec::new(),
            iteration: None,
        }
    }

    pub fn with_rows(mut self, rows: Vec<usize>) -> Self {
        self.rows = rows;
        self
    }

    pub fn at_iteration(mut self, iteration: usize) -> Self {
        self.iteration = Some(iteration);
        self
    }
}

fn iteration_suffix(iteration: &Option<usize>) -> String {
    match iteration {
        Some(t) => format!(" at iteration {t}"),
        None => String::new(),
    }
}

fn rows_suffix(rows: &[usize]) -> String {
    if rows.is_empty() {
        return String::new();
    }
    const SHOWN: usize = 8;
    let mut listed: Vec<String> = rows.iter().take(SHOWN).map(|r| r.to_string()).collect();
    if rows.len() > SHOWN {
        listed.push(format!("... ({} rows)", rows.len()));
    }
    format!(" (rows {})", listed.join(", "))
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
