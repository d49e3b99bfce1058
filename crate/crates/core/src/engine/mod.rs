//! Intervention policy: when to show a pop-up, which fact to put in it, and
//! the lifecycle of the token that ties a pop-up to its EDIT/POST outcome.

mod policy;

use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use chrono_tz::Tz;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use uuid::Uuid;

use crate::domain::{AppVariant, Corpus, InterventionMessage, MessageId, UserAccount, UserId};
use crate::store::StoreTx;
use crate::{Error, Result};

pub use policy::{
    admission, select_message, shown_today, Admission, IssuedIntervention, PolicyConfig,
    SelectionStrategy,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TokenState {
    Pending,
    ResolvedEdit,
    ResolvedPost,
    Expired,
}

impl TokenState {
    pub fn as_str(self) -> &'static str {
        match self {
            TokenState::Pending => "PENDING",
            TokenState::ResolvedEdit => "RESOLVED_EDIT",
            TokenState::ResolvedPost => "RESOLVED_POST",
            TokenState::Expired => "EXPIRED",
        }
    }
}

impl FromStr for TokenState {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "PENDING" => TokenState::Pending,
            "RESOLVED_EDIT" => TokenState::ResolvedEdit,
            "RESOLVED_POST" => TokenState::ResolvedPost,
            "EXPIRED" => TokenState::Expired,
            other => return Err(Error::validation(format!("unknown token state {other:?}"))),
        })
    }
}

impl fmt::Display for TokenState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The user's answer to a pop-up.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PopupChoice {
    Edit,
    Post,
}

impl PopupChoice {
    pub fn resolved_state(self) -> TokenState {
        match self {
            PopupChoice::Edit => TokenState::ResolvedEdit,
            PopupChoice::Post => TokenState::ResolvedPost,
        }
    }

    pub fn action(self) -> crate::domain::PopupAction {
        match self {
            PopupChoice::Edit => crate::domain::PopupAction::Edit,
            PopupChoice::Post => crate::domain::PopupAction::Post,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InterventionToken {
    pub token: Uuid,
    pub user_id: UserId,
    pub message_id: Option<MessageId>,
    #[serde(with = "crate::time::iso_millis")]
    pub issued_at: DateTime<Utc>,
    #[serde(with = "crate::time::iso_millis")]
    pub expires_at: DateTime<Utc>,
    pub state: TokenState,
    /// Idempotency key of the share attempt that produced this pop-up.
    pub attempt_client_event_id: Uuid,
    /// 1-based position of this pop-up among the user's pop-ups that day.
    pub ordinal: u32,
}

impl InterventionToken {
    pub fn is_expired_at(&self, now: DateTime<Utc>) -> bool {
        self.state == TokenState::Expired || now >= self.expires_at
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DecisionKind {
    Intervene,
    Pass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub kind: DecisionKind,
    pub token: Option<InterventionToken>,
    pub message: Option<InterventionMessage>,
}

impl DecisionOutcome {
    pub fn pass() -> Self {
        Self { kind: DecisionKind::Pass, token: None, message: None }
    }
}

/// What the pure policy step wants done, before anything is written.
#[derive(Debug, Clone, PartialEq)]
pub enum Plan {
    Pass(Admission),
    Intervene {
        token: Uuid,
        message: Option<InterventionMessage>,
        ordinal: u32,
    },
}

pub struct InterventionEngine {
    config: PolicyConfig,
    tz: Tz,
    corpus: Option<Corpus>,
    seed: u64,
}

impl fmt::Debug for InterventionEngine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("InterventionEngine")
            .field("config", &self.config)
            .field("corpus_loaded", &self.corpus.is_some())
            .finish()
    }
}

impl InterventionEngine {
    /// `corpus` may be `None` only when no V2 user will ever share.
    pub fn new(config: PolicyConfig, corpus: Option<Corpus>) -> Result<Self> {
        config.validate()?;
        let tz = config.timezone()?;
        let seed = config.rng_seed.unwrap_or_else(rand::random);
        Ok(Self { config, tz, corpus, seed })
    }

    pub fn config(&self) -> &PolicyConfig {
        &self.config
    }

    pub fn timezone(&self) -> Tz {
        self.tz
    }

    pub fn corpus(&self) -> Option<&Corpus> {
        self.corpus.as_ref()
    }

    /// Deterministic RNG stream for the `index`-th pop-up of a user. Keying
    /// on (seed, user, index) keeps replays identical regardless of how
    /// requests from different users interleave.
    fn rng_for(&self, user_id: UserId, index: usize) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(b"nudgelab/intervention");
        h.update(self.seed.to_le_bytes());
        h.update(user_id.to_le_bytes());
        h.update((index as u64).to_le_bytes());
        let bytes: [u8; 32] = h.finalize().into();
        ChaCha8Rng::from_seed(bytes)
    }

    /// Pure policy step: a function of the user, the time and the history.
    pub fn plan(
        &self,
        user: &UserAccount,
        now: DateTime<Utc>,
        history: &[IssuedIntervention],
    ) -> Result<Plan> {
        match admission(&self.config, self.tz, now, history) {
            Admission::Admit => {}
            refused => return Ok(Plan::Pass(refused)),
        }
        let shown = shown_today(self.tz, now, history);
        let ordinal = u32::try_from(
            history
                .iter()
                .filter(|h| crate::time::calendar_day(h.issued_at, self.tz)
                    == crate::time::calendar_day(now, self.tz))
                .count(),
        )
        .unwrap_or(u32::MAX)
        .saturating_add(1);
        let mut rng = self.rng_for(user.user_id, history.len());
        let token = uuid::Builder::from_random_bytes(rng.random()).into_uuid();
        let message = match user.app_variant {
            AppVariant::V1 => None,
            AppVariant::V2 => {
                let corpus = self.corpus.as_ref().ok_or_else(|| {
                    Error::Configuration("no intervention corpus loaded for V2 users".into())
                })?;
                let picked = select_message(
                    AppVariant::V2,
                    corpus.messages(),
                    &shown,
                    self.config.no_repeat_same_day,
                    &mut rng,
                );
                Some(picked.cloned().ok_or_else(|| {
                    Error::Configuration("every message was already shown today".into())
                })?)
            }
        };
        Ok(Plan::Intervene { token, message, ordinal })
    }

    /// Budget check, gap check and token issuance as one step. Must run
    /// inside a store transaction so concurrent attempts by the same user
    /// cannot both see a free slot.
    pub fn decide(
        &self,
        tx: &StoreTx<'_>,
        user_id: UserId,
        now: DateTime<Utc>,
        attempt_client_event_id: Uuid,
    ) -> Result<DecisionOutcome> {
        let user = tx
            .user(user_id)?
            .ok_or_else(|| Error::Authorization(format!("unknown user {user_id}")))?;
        let history = tx.issuance_history(user_id)?;
        match self.plan(&user, now, &history)? {
            Plan::Pass(_) => Ok(DecisionOutcome::pass()),
            Plan::Intervene { token, message, ordinal } => {
                let token = InterventionToken {
                    token,
                    user_id,
                    message_id: message.as_ref().map(|m| m.message_id),
                    issued_at: now,
                    expires_at: now + self.config.token_ttl(),
                    state: TokenState::Pending,
                    attempt_client_event_id,
                    ordinal,
                };
                tx.insert_token(&token)?;
                Ok(DecisionOutcome { kind: DecisionKind::Intervene, token: Some(token), message })
            }
        }
    }

    /// Moves a pending token to its resolved state. Budget was charged at
    /// issuance, so nothing else changes.
    pub fn resolve(
        &self,
        tx: &StoreTx<'_>,
        token_id: Uuid,
        user_id: UserId,
        choice: PopupChoice,
        now: DateTime<Utc>,
    ) -> Result<InterventionToken> {
        let token = tx
            .token(token_id)?
            .ok_or_else(|| Error::NotFound(format!("intervention token {token_id}")))?;
        if token.user_id != user_id {
            return Err(Error::Authorization(format!(
                "intervention token {token_id} belongs to another user"
            )));
        }
        match token.state {
            TokenState::Pending if now < token.expires_at => {}
            TokenState::Pending | TokenState::Expired => {
                return Err(Error::Expired(token_id.to_string()))
            }
            resolved => {
                return Err(Error::Conflict(format!(
                    "intervention token {token_id} already {resolved}"
                )))
            }
        }
        let next = choice.resolved_state();
        if !tx.transition_token(token_id, TokenState::Pending, next)? {
            return Err(Error::Conflict(format!(
                "intervention token {token_id} changed state concurrently"
            )));
        }
        Ok(InterventionToken { state: next, ..token })
    }

    /// Marks every pending token with `expires_at <= now` as expired.
    pub fn expire_tokens(&self, tx: &StoreTx<'_>, now: DateTime<Utc>) -> Result<usize> {
        tx.expire_tokens(now)
    }
}
