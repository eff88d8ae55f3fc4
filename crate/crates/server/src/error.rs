use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum ApiError {
    #[error("{0}")]
    NotFound(String),
    #[error("{message}")]
    Missing { code: &'static str, message: String },
    #[error("revision {expected} is stale, current revision is {current}")]
    Conflict { expected: u64, current: u64 },
    #[error("mutations need an If-Match header carrying the session revision")]
    RevisionRequired,
    #[error("{0}")]
    BadRequest(String),
    /// The operation needs an input the session does not have yet.
    #[error("{0}")]
    MissingInput(String),
    #[error("{message}")]
    Invalid { code: &'static str, message: String },
    #[error(transparent)]
    Domain(#[from] clipscaffold::Error),
    #[error("{0}")]
    Internal(String),
}

#[derive(Debug, Serialize)]
struct ErrorBody {
    code: &'static str,
    message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    revision: Option<u64>,
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NotFound(_) | ApiError::Missing { .. } => StatusCode::NOT_FOUND,
            ApiError::Conflict { .. } => StatusCode::CONFLICT,
            ApiError::RevisionRequired => StatusCode::PRECONDITION_REQUIRED,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::Domain(_) | ApiError::MissingInput(_) | ApiError::Invalid { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::NotFound(_) => "SESSION_NOT_FOUND",
            ApiError::Missing { code, .. } | ApiError::Invalid { code, .. } => code,
            ApiError::Conflict { .. } => "REVISION_CONFLICT",
            ApiError::RevisionRequired => "REVISION_REQUIRED",
            ApiError::BadRequest(_) => "BAD_REQUEST",
            ApiError::MissingInput(_) => "MISSING_INPUT",
            ApiError::Domain(e) => e.code(),
            ApiError::Internal(_) => "INTERNAL",
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = self.status();
        if status.is_server_error() {
            log::error!("{self}");
        }
        let body = ErrorBody {
            code: self.code(),
            message: self.to_string(),
            revision: match &self {
                ApiError::Conflict { current, .. } => Some(*current),
                _ => None,
            },
        };
        (status, Json(body)).into_response()
    }
}
