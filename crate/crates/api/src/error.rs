use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;

/// Every failure leaves the server as `{error, detail}` with a status.
#[derive(Debug, Error)]
#[error("{error}: {detail}")]
pub struct ApiError {
    pub status: StatusCode,
    pub error: &'static str,
    pub detail: String,
}

#[derive(Serialize)]
struct Body<'a> {
    error: &'a str,
    detail: &'a str,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, detail: impl Into<String>) -> Self {
        ApiError {
            status,
            error,
            detail: detail.into(),
        }
    }

    pub fn bad_request(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", detail)
    }

    pub fn not_found(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", detail)
    }

    pub fn conflict(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, "missing_input", detail)
    }

    pub fn unprocessable(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, "insufficient_data", detail)
    }

    pub fn internal(detail: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", detail)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = Body {
            error: self.error,
            detail: &self.detail,
        };
        (self.status, Json(body)).into_response()
    }
}

impl From<twin_models::ModelError> for ApiError {
    fn from(e: twin_models::ModelError) -> Self {
        use twin_models::ModelError as M;
        match e {
            M::Usage(d) => ApiError::bad_request(d),
            M::MissingInput(v) => ApiError::conflict(format!("model has no input for {v}; it was trained without exogenous forecasts")),
            other => ApiError::internal(other.to_string()),
        }
    }
}

impl From<twin_store::StoreError> for ApiError {
    fn from(e: twin_store::StoreError) -> Self {
        use twin_store::StoreError as S;
        match e {
            S::Integrity { segment, detail } => ApiError::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "integrity",
                format!("segment {segment}: {detail}"),
            ),
            S::Usage(d) => ApiError::bad_request(d),
            other => ApiError::internal(other.to_string()),
        }
    }
}
