//! Request body decoding, kept free of HTTP types so it can be fuzzed directly.

use gridcf::case::{parse_case, Case, CaseError, Violation};
use gridcf::matpower::import_matpower;
use serde::de::DeserializeOwned;
use thiserror::Error;

/// Content types accepted for native case documents.
pub const NATIVE_TYPES: [&str; 4] = ["application/toml", "text/toml", "application/x-toml", "text/x-toml"];
/// Content types accepted for MATPOWER case files.
pub const MATPOWER_TYPES: [&str; 3] = ["text/x-matpower", "application/x-matpower", "text/x-matlab"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CaseFormat {
    Native,
    Matpower,
}

/// Maps a `Content-Type` header value to a case format, ignoring parameters.
pub fn case_format(content_type: &str) -> Option<CaseFormat> {
    let essence = content_type.split(';').next().unwrap_or("").trim().to_ascii_lowercase();
    if NATIVE_TYPES.contains(&essence.as_str()) {
        Some(CaseFormat::Native)
    } else if MATPOWER_TYPES.contains(&essence.as_str()) {
        Some(CaseFormat::Matpower)
    } else {
        None
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecodeError {
    #[error("unsupported content type '{0}'")]
    UnsupportedType(String),
    #[error("body is not valid UTF-8")]
    NotUtf8,
    #[error("{0}")]
    Syntax(String),
    #[error("case violates {} rule(s)", .0.len())]
    Invalid(Vec<Violation>),
    #[error("malformed request body: {0}")]
    Body(String),
}

/// Decodes an uploaded case. MATPOWER imports take `name` as the case name.
pub fn decode_case(content_type: &str, body: &[u8], name: &str) -> Result<Case, DecodeError> {
    let format = case_format(content_type).ok_or_else(|| DecodeError::UnsupportedType(content_type.to_string()))?;
    let text = std::str::from_utf8(body).map_err(|_| DecodeError::NotUtf8)?;
    let case = match format {
        CaseFormat::Native => parse_case(text).map_err(|e| match e {
            CaseError::Semantic(v) => DecodeError::Invalid(v),
            other => DecodeError::Syntax(other.to_string()),
        })?,
        CaseFormat::Matpower => Case::Network(import_matpower(text, name).map_err(|e| DecodeError::Syntax(e.to_string()))?),
    };
    let violations = case.validate();
    if violations.is_empty() {
        Ok(case)
    } else {
        Err(DecodeError::Invalid(violations))
    }
}

/// Decodes a JSON request body; an empty body reads as `{}`.
pub fn decode_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, DecodeError> {
    let body = if body.iter().all(u8::is_ascii_whitespace) { b"{}".as_slice() } else { body };
    serde_json::from_slice(body).map_err(|e| DecodeError::Body(e.to_string()))
}
