use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

use covbal_api::ApiError;
use covbal_core::Error as CoreError;

pub type Result<T> = std::result::Result<T, ServiceError>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] CoreError),

    #[error("trial {0:?} not found")]
    NotFound(String),

    #[error("event log of trial {id:?} is corrupt at sequence {seq}: {reason}")]
    CorruptLog { id: String, seq: usize, reason: String },

    #[error("malformed request: {0}")]
    BadRequest(String),

    #[error("storage failure: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::Core(e) => e.code(),
            ServiceError::NotFound(_) => "not_found",
            ServiceError::CorruptLog { .. } => "corrupt_log",
            ServiceError::BadRequest(_) => "bad_request",
            ServiceError::Storage(_) => "storage",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::Core(CoreError::TrialFull(_) | CoreError::ConstantColumn(_)) => StatusCode::CONFLICT,
            ServiceError::Core(CoreError::Io(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            ServiceError::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ServiceError::CorruptLog { .. } | ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Structured context for the `detail` field of the error body.
    pub fn detail(&self) -> Value {
        match self {
            ServiceError::Core(e) => match e {
                CoreError::InvalidConfig { field, .. } => json!({ "field": field }),
                CoreError::DimensionMismatch { expected, found } => json!({ "expected": expected, "found": found }),
                CoreError::TrialFull(n) => json!({ "enrolled": n }),
                CoreError::ConstantColumn(j) => json!({ "column": j }),
                CoreError::OddTargetN(n) => json!({ "field": "target_n", "target_n": n }),
                CoreError::GammaOutOfRange { gamma, lo, hi } => {
                    json!({ "field": "gamma_range", "gamma": gamma, "lo": lo, "hi": hi })
                }
                CoreError::BadBlockConfig(_) => json!({ "field": "block_size" }),
                CoreError::BadCategoryCount(c) => json!({ "field": "categories", "categories": c }),
                CoreError::EmptyGroup(g) => json!({ "group": g }),
                CoreError::Parse { line, column, .. } | CoreError::NonNumericCell { line, column, .. } => {
                    json!({ "line": line, "column": column })
                }
                _ => Value::Null,
            },
            ServiceError::NotFound(id) => json!({ "id": id }),
            ServiceError::CorruptLog { id, seq, .. } => json!({ "id": id, "seq": seq }),
            _ => Value::Null,
        }
    }

    pub fn body(&self) -> ApiError {
        ApiError {
            code: self.code().to_string(),
            message: self.to_string(),
            detail: self.detail(),
        }
    }
}

impl From<std::io::Error> for ServiceError {
    fn from(e: std::io::Error) -> Self {
        ServiceError::Storage(e.to_string())
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            tracing::error!(error = %self, "request failed");
        }
        (self.status(), Json(self.body())).into_response()
    }
}
