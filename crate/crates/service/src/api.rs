//! Request handling independent of any transport.
//!
//! [`ApiService::handle`] is the whole protocol: method, path, content type
//! and body in, status and JSON body out. The HTTP server and the
//! in-process client transport both call it.

use std::sync::Arc;

use chrono::{DateTime, Duration, Utc};
use rand::RngCore;
use serde::de::DeserializeOwned;
use serde::Serialize;
use uuid::Uuid;

use nudgelab_core::domain::{AppVariant, NewActivityEvent, PopupAction, UserAccount};
use nudgelab_core::engine::{DecisionKind, InterventionEngine, PolicyConfig};
use nudgelab_core::store::{Store, StoreTx};
use nudgelab_core::time::{format_iso, parse_iso, Clock};
use nudgelab_core::{Error, Result};

use crate::password::{hash_password, verify_password};
use crate::wire::*;

pub const MIN_PASSWORD_CHARS: usize = 8;
pub const MAX_USERNAME_CHARS: usize = 64;

#[derive(Debug, Clone)]
pub struct ServiceOptions {
    pub server_secret: String,
    pub pbkdf2_iterations: u32,
    pub session_ttl: Duration,
    /// Start without a message corpus; V2 registrations are then refused.
    pub v1_only: bool,
}

impl Default for ServiceOptions {
    fn default() -> Self {
        Self {
            server_secret: String::new(),
            pbkdf2_iterations: 100_000,
            session_ttl: Duration::hours(24),
            v1_only: false,
        }
    }
}

pub struct ApiService {
    store: Arc<Store>,
    engine: InterventionEngine,
    clock: Arc<dyn Clock>,
    opts: ServiceOptions,
    /// Digest verified against for unknown usernames so that a miss costs
    /// the same as a wrong password.
    dummy_digest: String,
}

/// A serialized response.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WireResponse {
    pub status: u16,
    pub body: String,
}

/// HTTP status and `error_code` for a failure.
pub fn error_status(e: &Error) -> (u16, &'static str) {
    match e {
        Error::Validation(_) | Error::Parse { .. } => (400, "validation_error"),
        Error::Authentication => (401, "authentication_failed"),
        Error::Authorization(_) => (403, "forbidden"),
        Error::NotFound(_) => (404, "not_found"),
        Error::Conflict(_) => (409, "conflict"),
        Error::Expired(_) => (410, "token_expired"),
        Error::Configuration(_) => (503, "service_misconfigured"),
        Error::Storage(_) | Error::Io(_) => (503, "storage_unavailable"),
        Error::Degenerate(_) => (500, "internal_error"),
    }
}

fn json<T: Serialize>(status: u16, body: &T) -> WireResponse {
    WireResponse { status, body: serde_json::to_string(body).expect("wire types serialize") }
}

fn error_response(status: u16, code: &str, message: String) -> WireResponse {
    json(status, &ErrorBody { protocol_version: version(), error_code: code.to_owned(), message })
}

impl From<Error> for WireResponse {
    fn from(e: Error) -> Self {
        let (status, code) = error_status(&e);
        error_response(status, code, e.to_string())
    }
}

fn parse_client_time(raw: Option<&str>) -> Result<Option<DateTime<Utc>>> {
    raw.map(|s| parse_iso(s).map_err(|e| Error::validation(format!("client_timestamp: {e}"))))
        .transpose()
}

impl ApiService {
    pub fn new(store: Arc<Store>, policy: PolicyConfig, clock: Arc<dyn Clock>, opts: ServiceOptions) -> Result<Self> {
        if opts.server_secret.is_empty() {
            return Err(Error::Configuration("server_secret must not be empty".into()));
        }
        if opts.pbkdf2_iterations == 0 {
            return Err(Error::Configuration("pbkdf2_iterations must be at least 1".into()));
        }
        let corpus = store.corpus()?;
        if corpus.is_none() && !opts.v1_only {
            return Err(Error::Configuration(
                "no intervention corpus in the store; seed one or run V1-only".into(),
            ));
        }
        let engine = InterventionEngine::new(policy, corpus)?;
        let dummy_digest = hash_password("", opts.pbkdf2_iterations);
        Ok(Self { store, engine, clock, opts, dummy_digest })
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn engine(&self) -> &InterventionEngine {
        &self.engine
    }

    pub fn now(&self) -> DateTime<Utc> {
        self.clock.now()
    }

    fn authenticate(&self, tx: &StoreTx<'_>, session_token: &str, now: DateTime<Utc>) -> Result<UserAccount> {
        let user_id = tx.session_user(session_token, now)?.ok_or(Error::Authentication)?;
        tx.user(user_id)?.ok_or(Error::Authentication)
    }

    pub fn register(&self, req: RegisterRequest) -> Result<RegisterResponse> {
        let name_len = req.username.chars().count();
        if name_len == 0 || name_len > MAX_USERNAME_CHARS || req.username.trim() != req.username {
            return Err(Error::validation(format!(
                "username must be 1..={MAX_USERNAME_CHARS} characters without surrounding whitespace"
            )));
        }
        if req.password.chars().count() < MIN_PASSWORD_CHARS {
            return Err(Error::validation(format!("password must have at least {MIN_PASSWORD_CHARS} characters")));
        }
        if req.app_variant == AppVariant::V2 && self.engine.corpus().is_none() {
            return Err(Error::validation("this server runs V1 only"));
        }
        // Hash outside the write lock; it is the slow part.
        let digest = hash_password(&req.password, self.opts.pbkdf2_iterations);
        let now = self.now();
        let user = self.store.transaction(|tx| {
            tx.insert_user(&req.username, &digest, req.app_variant, req.language, now, &self.opts.server_secret)
        })?;
        Ok(RegisterResponse {
            protocol_version: version(),
            user_id: user.user_id,
            registration_code: user.registration_code,
        })
    }

    pub fn login(&self, req: LoginRequest) -> Result<LoginResponse> {
        let user = self.store.read(|tx| tx.user_by_name(&req.username))?;
        let digest = user.as_ref().map_or(self.dummy_digest.as_str(), |u| u.password_digest.as_str());
        let ok = verify_password(&req.password, digest);
        let user = match user {
            Some(u) if ok => u,
            _ => return Err(Error::Authentication),
        };
        let mut raw = [0u8; 16];
        rand::rng().fill_bytes(&mut raw);
        let session_token = hex::encode(raw);
        let now = self.now();
        let expires_at = now + self.opts.session_ttl;
        self.store.transaction(|tx| tx.insert_session(&session_token, user.user_id, now, expires_at))?;
        Ok(LoginResponse {
            protocol_version: version(),
            session_token,
            user_id: user.user_id,
            app_variant: user.app_variant,
            language: user.language,
            expires_at: format_iso(expires_at),
        })
    }

    pub fn logout(&self, req: LogoutRequest) -> Result<LogoutResponse> {
        let now = self.now();
        self.store.transaction(|tx| {
            self.authenticate(tx, &req.session_token, now)?;
            tx.delete_session(&req.session_token)
        })?;
        Ok(LogoutResponse { protocol_version: version(), logged_out: true })
    }

    /// Budget/gap decision. A pass is stored as action 2 right away; an
    /// intervention is stored when the pop-up is resolved. Retrying with
    /// the same `client_event_id` returns the original outcome.
    pub fn share_attempt(&self, req: ShareAttemptRequest) -> Result<ShareAttemptResponse> {
        let client_timestamp = parse_client_time(req.client_timestamp.as_deref())?;
        let now = self.now();
        self.store.transaction(|tx| {
            let user = self.authenticate(tx, &req.session_token, now)?;
            if let Some(replay) = self.replay_share(tx, &user, req.client_event_id)? {
                return Ok(replay);
            }
            let outcome = self.engine.decide(tx, user.user_id, now, req.client_event_id)?;
            match (outcome.kind, outcome.token) {
                (DecisionKind::Intervene, Some(token)) => {
                    let mut resp =
                        ShareAttemptResponse::intervene(token.token, format_iso(token.expires_at), token.ordinal);
                    if let Some(m) = outcome.message {
                        resp.message_id = Some(m.message_id);
                        resp.message_text = Some(m.text(user.language).to_owned());
                    }
                    Ok(resp)
                }
                _ => {
                    let stored = tx.append_event(&NewActivityEvent {
                        client_event_id: req.client_event_id,
                        user_id: user.user_id,
                        popup_action: PopupAction::ShareNoIntervention,
                        message_id: None,
                        post_length: req.post_length,
                        post_hash: req.post_hash.clone(),
                        image_hash: req.image_hash.clone(),
                        timestamp: now,
                        intervention_token: None,
                        client_timestamp,
                    })?;
                    Ok(ShareAttemptResponse::pass(stored.event_id))
                }
            }
        })
    }

    fn replay_share(
        &self,
        tx: &StoreTx<'_>,
        user: &UserAccount,
        client_event_id: Uuid,
    ) -> Result<Option<ShareAttemptResponse>> {
        let reused = || Error::Conflict(format!("client_event_id {client_event_id} was used for another request"));
        if let Some(token) = tx.token_by_attempt(client_event_id)? {
            if token.user_id != user.user_id {
                return Err(reused());
            }
            let mut resp = ShareAttemptResponse::intervene(token.token, format_iso(token.expires_at), token.ordinal);
            if let Some(id) = token.message_id {
                let text = self.engine.corpus().and_then(|c| c.get(id)).map(|m| m.text(user.language).to_owned());
                resp.message_id = Some(id);
                resp.message_text = text;
            }
            return Ok(Some(resp));
        }
        match tx.event_by_client_id(client_event_id)? {
            Some(e) if e.user_id == user.user_id && e.popup_action == PopupAction::ShareNoIntervention => {
                Ok(Some(ShareAttemptResponse::pass(e.event_id)))
            }
            Some(_) => Err(reused()),
            None => Ok(None),
        }
    }

    /// Resolves a pop-up and stores action 0 or 1. The event is stamped with
    /// the time the pop-up was issued, the moment the content was shown.
    pub fn resolve(&self, req: ResolveRequest) -> Result<ResolveResponse> {
        let client_timestamp = parse_client_time(req.client_timestamp.as_deref())?;
        let now = self.now();
        self.store.transaction(|tx| {
            let user = self.authenticate(tx, &req.session_token, now)?;
            if let Some(e) = tx.event_by_client_id(req.client_event_id)? {
                let same = e.user_id == user.user_id
                    && e.popup_action == req.action.action()
                    && tx.event_for_token(req.intervention_token)?.map(|t| t.event_id) == Some(e.event_id);
                if !same {
                    return Err(Error::Conflict(format!(
                        "client_event_id {} was used for another request",
                        req.client_event_id
                    )));
                }
                return Ok(ResolveResponse {
                    protocol_version: version(),
                    event_id: e.event_id,
                    popup_action: e.popup_action.code(),
                    state: req.action.resolved_state(),
                });
            }
            if tx.token_by_attempt(req.client_event_id)?.is_some() {
                return Err(Error::Conflict(format!(
                    "client_event_id {} already identifies a share attempt",
                    req.client_event_id
                )));
            }
            let token = self.engine.resolve(tx, req.intervention_token, user.user_id, req.action, now)?;
            let stored = tx.append_event(&NewActivityEvent {
                client_event_id: req.client_event_id,
                user_id: user.user_id,
                popup_action: req.action.action(),
                message_id: token.message_id,
                post_length: req.post_length,
                post_hash: req.post_hash.clone(),
                image_hash: req.image_hash.clone(),
                timestamp: token.issued_at,
                intervention_token: Some(token.token),
                client_timestamp,
            })?;
            Ok(ResolveResponse {
                protocol_version: version(),
                event_id: stored.event_id,
                popup_action: req.action.action().code(),
                state: token.state,
            })
        })
    }

    pub fn health(&self) -> HealthResponse {
        HealthResponse {
            protocol_version: version(),
            status: "ok".into(),
            corpus_loaded: self.engine.corpus().is_some(),
            server_time: format_iso(self.now()),
        }
    }

    /// Expires overdue pop-ups and drops dead sessions.
    pub fn sweep(&self) -> Result<(usize, usize)> {
        let now = self.now();
        self.store.transaction(|tx| Ok((self.engine.expire_tokens(tx, now)?, tx.purge_sessions(now)?)))
    }

    /// Routes one request.
    pub fn handle(&self, method: &str, path: &str, content_type: Option<&str>, body: &[u8]) -> WireResponse {
        let post = |f: &dyn Fn(&[u8]) -> WireResponse| -> WireResponse {
            if method != "POST" {
                return error_response(405, "method_not_allowed", format!("{path} accepts POST only"));
            }
            let is_json = content_type
                .and_then(|ct| ct.split(';').next())
                .is_some_and(|mime| mime.trim().eq_ignore_ascii_case("application/json"));
            if !is_json {
                return error_response(415, "unsupported_media_type", "expected application/json".into());
            }
            f(body)
        };
        match path {
            REGISTER => post(&|b| self.call(b, |r| self.register(r))),
            LOGIN => post(&|b| self.call(b, |r| self.login(r))),
            LOGOUT => post(&|b| self.call(b, |r| self.logout(r))),
            SHARE_ATTEMPT => post(&|b| self.call(b, |r| self.share_attempt(r))),
            RESOLVE => post(&|b| self.call(b, |r| self.resolve(r))),
            HEALTH if method == "GET" => json(200, &self.health()),
            HEALTH => error_response(405, "method_not_allowed", format!("{path} accepts GET only")),
            _ => error_response(404, "not_found", format!("no endpoint {path}")),
        }
    }

    fn call<Req: DeserializeOwned, Resp: Serialize>(
        &self,
        body: &[u8],
        f: impl FnOnce(Req) -> Result<Resp>,
    ) -> WireResponse {
        let req: Req = match serde_json::from_slice(body) {
            Ok(r) => r,
            Err(e) => return error_response(400, "validation_error", format!("malformed request: {e}")),
        };
        match f(req) {
            Ok(resp) => json(200, &resp),
            Err(e) => {
                if e.is_retryable() {
                    tracing::warn!(error = %e, "request failed with a storage error");
                }
                e.into()
            }
        }
    }
}
