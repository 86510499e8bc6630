use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use gridcf::case::Violation;
use serde_json::json;

use crate::decode::DecodeError;

/// An error response: status plus a JSON body with a machine-readable code.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub violations: Vec<Violation>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            violations: Vec::new(),
        }
    }

    pub fn not_found(what: &str, id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no {what} with id '{id}'"))
    }

    pub fn bad_request(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<DecodeError> for ApiError {
    fn from(e: DecodeError) -> Self {
        match e {
            DecodeError::UnsupportedType(_) => Self::new(StatusCode::UNSUPPORTED_MEDIA_TYPE, "unsupported_media_type", e.to_string()),
            DecodeError::Invalid(v) => Self {
                status: StatusCode::BAD_REQUEST,
                code: "invalid_case",
                message: format!("case violates {} rule(s)", v.len()),
                violations: v,
            },
            DecodeError::NotUtf8 | DecodeError::Syntax(_) => Self::bad_request("syntax", e.to_string()),
            DecodeError::Body(_) => Self::bad_request("bad_body", e.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({
            "error": self.code,
            "message": self.message,
            "violations": self.violations,
        });
        (self.status, Json(body)).into_response()
    }
}
