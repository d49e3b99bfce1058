//! JSON bodies of the HTTP protocol.
//!
//! Requests reject unknown fields. Every response, including errors,
//! carries `protocol_version`.

use serde::{Deserialize, Serialize};
use uuid::Uuid;

use nudgelab_core::domain::{AppVariant, ContentDigest, Language, MessageId, UserId, LEGEND};
use nudgelab_core::engine::{PopupChoice, TokenState};

pub const PROTOCOL_VERSION: &str = "nudgelab/1";

pub const REGISTER: &str = "/api/v1/register";
pub const LOGIN: &str = "/api/v1/login";
pub const LOGOUT: &str = "/api/v1/logout";
pub const SHARE_ATTEMPT: &str = "/api/v1/share-attempt";
pub const RESOLVE: &str = "/api/v1/resolve";
pub const HEALTH: &str = "/api/v1/health";

pub const CONTENT_TYPE: &str = "application/json; charset=utf-8";

fn protocol_version() -> String {
    PROTOCOL_VERSION.to_owned()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegisterRequest {
    pub username: String,
    pub password: String,
    pub app_variant: AppVariant,
    pub language: Language,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterResponse {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub user_id: UserId,
    pub registration_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoginRequest {
    pub username: String,
    pub password: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoginResponse {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub session_token: String,
    pub user_id: UserId,
    pub app_variant: AppVariant,
    pub language: Language,
    pub expires_at: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogoutRequest {
    pub session_token: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogoutResponse {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub logged_out: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShareAttemptRequest {
    pub session_token: String,
    pub client_event_id: Uuid,
    pub post_length: u32,
    pub post_hash: ContentDigest,
    pub image_hash: ContentDigest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_timestamp: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Intervene,
    Pass,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShareAttemptResponse {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub decision: Decision,
    /// The pop-up legend; present only on `intervene`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub legend: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intervention_token: Option<Uuid>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expires_at: Option<String>,
    /// Position of this pop-up among the user's pop-ups today, for the
    /// "fact of the day #N" caption.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ordinal: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_id: Option<MessageId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message_text: Option<String>,
    /// The stored activity event; present only on `pass`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_id: Option<i64>,
}

impl ShareAttemptResponse {
    pub fn pass(event_id: i64) -> Self {
        Self {
            protocol_version: protocol_version(),
            decision: Decision::Pass,
            legend: None,
            intervention_token: None,
            expires_at: None,
            ordinal: None,
            message_id: None,
            message_text: None,
            event_id: Some(event_id),
        }
    }

    pub fn intervene(token: Uuid, expires_at: String, ordinal: u32) -> Self {
        Self {
            decision: Decision::Intervene,
            legend: Some(LEGEND.to_owned()),
            intervention_token: Some(token),
            expires_at: Some(expires_at),
            ordinal: Some(ordinal),
            event_id: None,
            ..Self::pass(0)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResolveRequest {
    pub session_token: String,
    pub client_event_id: Uuid,
    pub intervention_token: Uuid,
    pub action: PopupChoice,
    pub post_length: u32,
    pub post_hash: ContentDigest,
    pub image_hash: ContentDigest,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub client_timestamp: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResolveResponse {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub event_id: i64,
    pub popup_action: u8,
    pub state: TokenState,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthResponse {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub status: String,
    pub corpus_loaded: bool,
    pub server_time: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    #[serde(default = "protocol_version")]
    pub protocol_version: String,
    pub error_code: String,
    pub message: String,
}

pub(crate) fn version() -> String {
    protocol_version()
}
