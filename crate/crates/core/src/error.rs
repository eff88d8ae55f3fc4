use thiserror::Error;

/// Errors produced anywhere in the pipeline.
///
/// Every variant maps to a stable machine-readable code through [`Error::code`];
/// the CLI and the HTTP service surface that code verbatim.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("parse error in {locus}: {message}")]
    Parse { locus: String, message: String },

    #[error("document contains no usable paths")]
    EmptyDocument,

    #[error("degenerate polygon: {0}")]
    Degenerate(String),

    #[error("shape format error: {0}")]
    Format(String),

    #[error("guiding shape has no vertices")]
    EmptyShape,

    #[error("annotation references unknown or non-geometry path {0}")]
    BadReference(usize),

    #[error("invalid annotation: {0}")]
    InvalidAnnotation(String),

    #[error("depth order cycle through paths {0:?}")]
    Cycle(Vec<usize>),

    #[error("depth order between {front} and {behind} contradicts a same-depth annotation")]
    Conflict { front: usize, behind: usize },

    #[error("path {path} annotated as {count} objects but only {points} enclosed points")]
    Cluster { path: usize, count: usize, points: usize },

    #[error("point set is too degenerate to fit or align")]
    DegeneratePoints,

    #[error("constraints cannot be satisfied: {0}")]
    Infeasible(String),

    #[error("triangulation failed: {0}")]
    Triangulation(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn code(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "PARSE_ERROR",
            Error::EmptyDocument => "EMPTY_DOCUMENT",
            Error::Degenerate(_) => "DEGENERATE_POLYGON",
            Error::Format(_) => "SHAPE_FORMAT",
            Error::EmptyShape => "EMPTY_SHAPE",
            Error::BadReference(_) => "BAD_REFERENCE",
            Error::InvalidAnnotation(_) => "INVALID_ANNOTATION",
            Error::Cycle(_) => "CONSTRAINT_CYCLE",
            Error::Conflict { .. } => "CONSTRAINT_CONFLICT",
            Error::Cluster { .. } => "CLUSTER_ERROR",
            Error::DegeneratePoints => "DEGENERATE_POINTS",
            Error::Infeasible(_) => "INFEASIBLE",
            Error::Triangulation(_) => "TRIANGULATION_ERROR",
            Error::Config(_) => "CONFIG_ERROR",
            Error::Io(_) => "IO_ERROR",
        }
    }

    pub(crate) fn parse(locus: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            locus: locus.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Every code the crate can emit, in declaration order.
pub const ERROR_CODES: &[&str] = &[
    "PARSE_ERROR",
    "EMPTY_DOCUMENT",
    "DEGENERATE_POLYGON",
    "SHAPE_FORMAT",
    "EMPTY_SHAPE",
    "BAD_REFERENCE",
    "INVALID_ANNOTATION",
    "CONSTRAINT_CYCLE",
    "CONSTRAINT_CONFLICT",
    "CLUSTER_ERROR",
    "DEGENERATE_POINTS",
    "INFEASIBLE",
    "TRIANGULATION_ERROR",
    "CONFIG_ERROR",
    "IO_ERROR",
];

pub type Result<T> = std::result::Result<T, Error>;
