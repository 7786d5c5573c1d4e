use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

use qep_core::answer_generator::PipelineError;
use qep_core::{IngestError, TtsError};

/// An error reply: `{"error": {"code": ..., "message": ...}}`.
#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            code,
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "BadRequest", message)
    }

    pub fn unknown_session(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownSession", format!("no session {id}"))
    }

    pub fn unknown_plan(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "UnknownPlan", format!("no plan {id} in this session"))
    }

    pub fn no_live_connection() -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "NoLiveConnection",
            "this session has no database connection",
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<IngestError> for ApiError {
    fn from(e: IngestError) -> Self {
        let status = match e {
            IngestError::ConnectionFailure(_) => StatusCode::BAD_GATEWAY,
            IngestError::EmptyInput | IngestError::MalformedPlan(_) | IngestError::QueryError(_) => {
                StatusCode::BAD_REQUEST
            }
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Ingest(e) => e.into(),
            PipelineError::Tree(e) => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e.code(), e.to_string()),
        }
    }
}

impl From<TtsError> for ApiError {
    fn from(e: TtsError) -> Self {
        let status = match e {
            TtsError::FeatureDisabled => StatusCode::NOT_IMPLEMENTED,
            TtsError::TTSUnavailable(_) => StatusCode::BAD_GATEWAY,
        };
        ApiError::new(status, e.code(), e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::warn!(code = self.code, message = %self.message, "request failed");
        }
        let body = json!({"error": {"code": self.code, "message": self.message}});
        (self.status, Json(body)).into_response()
    }
}
