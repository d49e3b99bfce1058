#![allow(dead_code)]

use std::sync::Arc;

use chrono::{DateTime, TimeZone, Utc};
use nudgelab_core::domain::{digest_content, AppVariant, Corpus, Language};
use nudgelab_core::engine::PolicyConfig;
use nudgelab_core::store::Store;
use nudgelab_core::time::ManualClock;
use nudgelab_service::wire::*;
use nudgelab_service::{ApiService, Client, InProcess, ServiceOptions};
use uuid::Uuid;

pub const SECRET: &str = "integration-secret";

pub fn at(d: u32, h: u32, m: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, d, h, m, 0).unwrap()
}

pub fn options() -> ServiceOptions {
    ServiceOptions { server_secret: SECRET.into(), pbkdf2_iterations: 1000, ..ServiceOptions::default() }
}

pub fn service(clock: &ManualClock) -> Arc<ApiService> {
    let store = Arc::new(Store::open_in_memory().unwrap());
    store.seed_corpus(&Corpus::default_corpus()).unwrap();
    let policy = PolicyConfig { rng_seed: Some(7), ..PolicyConfig::default() };
    Arc::new(ApiService::new(store, policy, Arc::new(clock.clone()), options()).unwrap())
}

pub fn in_process(service: &Arc<ApiService>) -> Client<InProcess> {
    Client::new(InProcess(service.clone()))
}

/// Registers and logs in; returns (user_id, session token).
pub fn signup<T: nudgelab_service::Transport>(c: &Client<T>, name: &str, variant: AppVariant) -> (i64, String) {
    let reg = c
        .register(&RegisterRequest {
            username: name.into(),
            password: "password123".into(),
            app_variant: variant,
            language: Language::EN,
        })
        .unwrap();
    let login = c.login(&LoginRequest { username: name.into(), password: "password123".into() }).unwrap();
    (reg.user_id, login.session_token)
}

pub fn share_req(session: &str, user_id: i64, key: u128, caption: &str) -> ShareAttemptRequest {
    ShareAttemptRequest {
        session_token: session.into(),
        client_event_id: Uuid::from_u128(key),
        post_length: caption.chars().count() as u32,
        post_hash: digest_content(user_id, caption),
        image_hash: digest_content(user_id, "beach.jpg"),
        client_timestamp: None,
    }
}

pub fn resolve_req(share: &ShareAttemptRequest, token: Uuid, key: u128, action: nudgelab_core::engine::PopupChoice) -> ResolveRequest {
    ResolveRequest {
        session_token: share.session_token.clone(),
        client_event_id: Uuid::from_u128(key),
        intervention_token: token,
        action,
        post_length: share.post_length,
        post_hash: share.post_hash.clone(),
        image_hash: share.image_hash.clone(),
        client_timestamp: None,
    }
}
