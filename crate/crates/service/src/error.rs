use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::json;

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error("unknown session `{0}`")]
    UnknownSession(String),

    #[error(transparent)]
    Core(#[from] trustcal_core::Error),

    #[error("journal: {0}")]
    Journal(#[from] std::io::Error),
}

impl ServiceError {
    fn kind(&self) -> &'static str {
        match self {
            Self::UnknownSession(_) => "UnknownSession",
            Self::Core(trustcal_core::Error::SchemaMismatch(_)) => "SchemaMismatch",
            Self::Core(_) => "InvalidInput",
            Self::Journal(_) => "Journal",
        }
    }

    fn status(&self) -> StatusCode {
        match self {
            Self::UnknownSession(_) => StatusCode::NOT_FOUND,
            Self::Core(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Self::Journal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = Json(json!({ "error": self.kind(), "message": self.to_string() }));
        (self.status(), body).into_response()
    }
}
