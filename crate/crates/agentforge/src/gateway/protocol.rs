use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Closed set of standardized error codes returned by the gateway.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ErrorCode {
    Timeout,
    InvalidParams,
    ServiceUnavailable,
    RateLimited,
    ContentTruncated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Success,
    Error,
}

/// Wire-level tool invocation envelope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolRequest {
    pub request_id: String,
    pub tool: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    #[serde(default)]
    pub params: BTreeMap<String, serde_json::Value>,
    pub deadline_ms: u64,
}

/// Auxiliary response information.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResponseMetadata {
    pub attempts: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub instance_id: Option<String>,
    pub latency_ms: u64,
    pub truncated: bool,
    /// Advisory code attached without flipping the status (e.g. truncation).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
    /// Matched-sentence count from the summarizer tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matched: Option<usize>,
}

/// Unified response format: success carries content, error carries the
/// (error, detail, error_code) triple; never both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResponse {
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default)]
    pub metadata: ResponseMetadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_code: Option<ErrorCode>,
}

impl ToolResponse {
    pub fn success(content: impl Into<String>, metadata: ResponseMetadata) -> Self {
        Self {
            status: Status::Success,
            content: Some(content.into()),
            metadata,
            error: None,
            detail: None,
            error_code: None,
        }
    }

    pub fn failure(
        code: ErrorCode,
        error: impl Into<String>,
        detail: impl Into<String>,
        metadata: ResponseMetadata,
    ) -> Self {
        Self {
            status: Status::Error,
            content: None,
            metadata,
            error: Some(error.into()),
            detail: Some(detail.into()),
            error_code: Some(code),
        }
    }

    /// Check the response-schema invariant: exactly one of the success /
    /// error field sets is populated.
    pub fn schema_valid(&self) -> bool {
        match self.status {
            Status::Success => {
                self.content.is_some()
                    && self.error.is_none()
                    && self.detail.is_none()
                    && self.error_code.is_none()
            }
            Status::Error => {
                self.content.is_none()
                    && self.error.is_some()
                    && self.detail.is_some()
                    && self.error_code.is_some()
            }
        }
    }
}
