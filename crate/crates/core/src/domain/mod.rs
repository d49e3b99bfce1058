//! Shared vocabulary of the platform.

mod constructs;
mod corpus;
mod pseudonym;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::{Error, Result};

pub use constructs::{reverse_item, ConstructScale, ScaleId, LIKERT_MAX, LIKERT_MIN};
pub use corpus::{Corpus, InterventionMessage, MessageCategory, CATEGORIES, DEFAULT_CORPUS_CSV};
pub use pseudonym::{digest_content, make_registration_code, ContentDigest};

pub type UserId = i64;
pub type MessageId = u16;

pub const MESSAGE_ID_MAX: MessageId = 26;

/// Text shown on every intervention pop-up.
pub const LEGEND: &str = "Ready to share?";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AppVariant {
    /// Legend-only pop-up.
    V1,
    /// Legend plus a risk fact of the day.
    V2,
}

impl AppVariant {
    pub fn as_str(self) -> &'static str {
        match self {
            AppVariant::V1 => "V1",
            AppVariant::V2 => "V2",
        }
    }
}

impl fmt::Display for AppVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AppVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "V1" => Ok(AppVariant::V1),
            "V2" => Ok(AppVariant::V2),
            other => Err(Error::validation(format!("unknown app variant {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Language {
    EN,
    DE,
}

impl Language {
    pub fn as_str(self) -> &'static str {
        match self {
            Language::EN => "EN",
            Language::DE => "DE",
        }
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "EN" => Ok(Language::EN),
            "DE" => Ok(Language::DE),
            other => Err(Error::validation(format!("unknown language {other:?}"))),
        }
    }
}

/// Recorded outcome of a click on SHARE!, EDIT or POST.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum PopupAction {
    /// Clicked "edit" after receiving an intervention.
    Edit = 0,
    /// Clicked "post" after receiving an intervention.
    Post = 1,
    /// Clicked "SHARE!" and no intervention was displayed.
    ShareNoIntervention = 2,
}

impl PopupAction {
    pub const ALL: [PopupAction; 3] = [
        PopupAction::Edit,
        PopupAction::Post,
        PopupAction::ShareNoIntervention,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(PopupAction::Edit),
            1 => Ok(PopupAction::Post),
            2 => Ok(PopupAction::ShareNoIntervention),
            other => Err(Error::validation(format!("unknown popup action code {other}"))),
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            PopupAction::Edit => "clicked edit after receiving an intervention",
            PopupAction::Post => "clicked post after receiving an intervention",
            PopupAction::ShareNoIntervention => "clicked share and received no intervention",
        }
    }

    /// Actions 0 and 1 resolve a displayed intervention.
    pub fn follows_intervention(self) -> bool {
        !matches!(self, PopupAction::ShareNoIntervention)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UserAccount {
    pub user_id: UserId,
    pub username: String,
    #[serde(skip_serializing)]
    pub password_digest: String,
    pub app_variant: AppVariant,
    pub language: Language,
    pub registration_code: String,
    #[serde(with = "crate::time::iso_millis")]
    pub created_at: DateTime<Utc>,
}

/// One pseudonymized behavioural snapshot. Captions and images never appear
/// here, only their length and digests.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityEvent {
    pub event_id: i64,
    pub client_event_id: Uuid,
    pub user_id: UserId,
    pub popup_action: PopupAction,
    pub message_id: Option<MessageId>,
    pub post_length: u32,
    pub post_hash: ContentDigest,
    pub image_hash: ContentDigest,
    #[serde(with = "crate::time::iso_millis")]
    pub timestamp: DateTime<Utc>,
}

/// An event as submitted for storage, before the store assigns `event_id`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewActivityEvent {
    pub client_event_id: Uuid,
    pub user_id: UserId,
    pub popup_action: PopupAction,
    pub message_id: Option<MessageId>,
    pub post_length: u32,
    pub post_hash: ContentDigest,
    pub image_hash: ContentDigest,
    pub timestamp: DateTime<Utc>,
    /// Intervention token resolved by this event (actions 0 and 1 only).
    pub intervention_token: Option<Uuid>,
    /// Client-reported time, kept for diagnostics only.
    pub client_timestamp: Option<DateTime<Utc>>,
}

impl NewActivityEvent {
    pub fn validate(&self) -> Result<()> {
        if self.user_id <= 0 {
            return Err(Error::validation("user_id must be positive"));
        }
        if let Some(id) = self.message_id {
            if !(1..=MESSAGE_ID_MAX).contains(&id) {
                return Err(Error::validation(format!("message_id {id} outside 1..=26")));
            }
            if !self.popup_action.follows_intervention() {
                return Err(Error::validation(
                    "message_id must be absent when popup_action is 2",
                ));
            }
        }
        if self.popup_action.follows_intervention() != self.intervention_token.is_some() {
            return Err(Error::validation(
                "actions 0/1 require an intervention token; action 2 must not carry one",
            ));
        }
        Ok(())
    }
}
