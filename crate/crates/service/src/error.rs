use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use bronchial_dx::{Error as CoreError, FieldError};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("validation failed")]
    Validation(Vec<FieldError>),

    #[error("{0}")]
    BadRequest(String),

    #[error("{0}")]
    NotFound(String),

    #[error("{0}")]
    Conflict(String),

    #[error("{0}")]
    Unavailable(String),

    #[error("{0}")]
    Internal(String),
}

pub type ServiceResult<T> = std::result::Result<T, ServiceError>;

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Unavailable(_) => StatusCode::SERVICE_UNAVAILABLE,
            ServiceError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            ServiceError::Validation(_) => "validation",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::NotFound(_) => "not_found",
            ServiceError::Conflict(_) => "conflict",
            ServiceError::Unavailable(_) => "unavailable",
            ServiceError::Internal(_) => "internal",
        }
    }

    /// Prefixes every field name, e.g. `A` becomes `responses.A`.
    pub fn nested(self, prefix: &str) -> Self {
        match self {
            ServiceError::Validation(fields) => ServiceError::Validation(
                fields.into_iter().map(|f| FieldError::new(format!("{prefix}.{}", f.field), f.message)).collect(),
            ),
            other => other,
        }
    }

    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        ServiceError::Validation(vec![FieldError::new(field, message)])
    }
}

/// Caller input problems map to 4xx; storage and encoding failures to 500.
impl From<CoreError> for ServiceError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Validation(fields) => ServiceError::Validation(fields),
            CoreError::Io(_) | CoreError::Json(_) => ServiceError::Internal(e.to_string()),
            CoreError::UnknownDisease(_) | CoreError::UnknownSign(_) => ServiceError::field("label", e.to_string()),
            other => ServiceError::BadRequest(other.to_string()),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Internal(format!("storage failure: {e}"))
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    fields: &'a [FieldError],
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let fields: &[FieldError] = match &self {
            ServiceError::Validation(f) => f,
            _ => &[],
        };
        let message = match &self {
            ServiceError::Validation(f) => f.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            other => other.to_string(),
        };
        let body = ErrorBody { error: self.code(), message, fields };
        (self.status(), Json(body)).into_response()
    }
}
