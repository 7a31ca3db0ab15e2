use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("point {0} lies outside [0, 4]")]
    Domain(f64),
    #[error("derivative order {k} exceeds k_max = {k_max}")]
    DerivativeOrder { k: u32, k_max: u32 },
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("invalid vertex {0}")]
    InvalidVertex(String),
    #[error("exceptional point: iterate {step} at {value} hits the breakpoint set")]
    ExceptionalPoint { step: usize, value: f64 },
    #[error("itinerary is not admissible: no edge {from} -> {to}")]
    NotAdmissible { from: String, to: String },
    #[error("cannot label point: {0}")]
    Unresolved(String),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
