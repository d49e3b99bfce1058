mod common;

use std::sync::Arc;

use chrono::Duration;
use common::*;
use nudgelab_core::audit::{audit_store, AuditPolicy};
use nudgelab_core::domain::{make_registration_code, AppVariant, Language, PopupAction};
use nudgelab_core::engine::{PolicyConfig, PopupChoice, TokenState};
use nudgelab_core::store::{Store, TimeRange};
use nudgelab_core::time::ManualClock;
use nudgelab_core::Error;
use nudgelab_service::wire::*;
use nudgelab_service::{ApiService, ServiceOptions};
use serde_json::Value;

fn is_upper_hex(s: &str, len: usize) -> bool {
    s.len() == len && s.chars().all(|c| c.is_ascii_digit() || ('A'..='F').contains(&c))
}

fn is_lower_hex(s: &str, len: usize) -> bool {
    s.len() == len && s.chars().all(|c| c.is_ascii_digit() || ('a'..='f').contains(&c))
}

#[test]
fn registration() {
    let clock = ManualClock::new(at(2, 9, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let req = RegisterRequest {
        username: "ana".into(),
        password: "password123".into(),
        app_variant: AppVariant::V2,
        language: Language::DE,
    };
    let r = c.register(&req).unwrap();
    assert!(is_upper_hex(&r.registration_code, 8));
    assert_eq!(r.registration_code, make_registration_code(r.user_id, SECRET).unwrap());
    assert_eq!(r.protocol_version, PROTOCOL_VERSION);

    assert_eq!(c.register(&req).unwrap_err().status(), Some(409));
    assert_eq!(svc.store().read(|tx| tx.users()).unwrap().len(), 1);

    let weak = RegisterRequest { username: "bo".into(), password: "short".into(), ..req.clone() };
    assert_eq!(c.register(&weak).unwrap_err().error_code(), Some("validation_error"));
    let blank = RegisterRequest { username: "".into(), ..req };
    assert_eq!(c.register(&blank).unwrap_err().status(), Some(400));

    // The stored digest is salted, never the password itself.
    let stored = svc.store().read(|tx| tx.user_by_name("ana")).unwrap().unwrap();
    assert!(stored.password_digest.starts_with("pbkdf2-sha256$") && !stored.password_digest.contains("password123"));
}

#[test]
fn login_and_logout() {
    let clock = ManualClock::new(at(2, 9, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let (uid, session) = signup(&c, "ana", AppVariant::V1);
    assert!(is_lower_hex(&session, 32));

    let wrong_pw = svc.handle("POST", LOGIN, Some(CONTENT_TYPE), br#"{"username":"ana","password":"nope-nope"}"#);
    let no_user = svc.handle("POST", LOGIN, Some(CONTENT_TYPE), br#"{"username":"zed","password":"nope-nope"}"#);
    assert_eq!(wrong_pw.status, 401);
    assert_eq!(wrong_pw, no_user, "responses must not reveal whether the user exists");

    c.share_attempt(&share_req(&session, uid, 1, "hi")).unwrap();
    c.logout(&LogoutRequest { session_token: session.clone() }).unwrap();
    let after = c.share_attempt(&share_req(&session, uid, 2, "hi")).unwrap_err();
    assert_eq!((after.status(), after.error_code()), (Some(401), Some("authentication_failed")));
    assert_eq!(c.logout(&LogoutRequest { session_token: session }).unwrap_err().status(), Some(401));
}

#[test]
fn sessions_expire_after_a_day() {
    let clock = ManualClock::new(at(2, 9, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let (uid, session) = signup(&c, "ana", AppVariant::V1);
    clock.advance(Duration::hours(24));
    assert_eq!(c.share_attempt(&share_req(&session, uid, 1, "x")).unwrap_err().status(), Some(401));
}

#[test]
fn v1_popup_has_legend_only() {
    let clock = ManualClock::new(at(2, 10, 0));
    let svc = service(&clock);
    let (uid, session) = signup(&in_process(&svc), "ana", AppVariant::V1);
    let body = serde_json::to_vec(&share_req(&session, uid, 1, "hello")).unwrap();
    let raw = svc.handle("POST", SHARE_ATTEMPT, Some(CONTENT_TYPE), &body);
    assert_eq!(raw.status, 200);
    let v: Value = serde_json::from_str(&raw.body).unwrap();
    assert_eq!(v["decision"], "intervene");
    assert_eq!(v["legend"], "Ready to share?");
    assert_eq!(v["ordinal"], 1);
    assert!(v.get("message_id").is_none() && v.get("message_text").is_none());
    assert!(v["intervention_token"].is_string());
}

#[test]
fn v2_popup_carries_a_fact_and_pass_stores_action_2() {
    let clock = ManualClock::new(at(2, 10, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let (uid, session) = signup(&c, "ana", AppVariant::V2);
    let first = c.share_attempt(&share_req(&session, uid, 1, "hello")).unwrap();
    assert_eq!(first.decision, Decision::Intervene);
    let id = first.message_id.unwrap();
    let corpus = svc.store().corpus().unwrap().unwrap();
    assert_eq!(first.message_text.as_deref(), Some(corpus.get(id).unwrap().text_en.as_str()));

    clock.set(at(2, 10, 10));
    let second = c.share_attempt(&share_req(&session, uid, 2, "hello")).unwrap();
    assert_eq!(second.decision, Decision::Pass);
    assert!(second.legend.is_none() && second.message_id.is_none());
    let events = svc.store().query_user_events(uid, TimeRange::all()).unwrap();
    assert_eq!(events.len(), 1);
    assert_eq!((events[0].popup_action, events[0].message_id), (PopupAction::ShareNoIntervention, None));
    assert_eq!(events[0].timestamp, at(2, 10, 10));
}

#[test]
fn retries_return_the_original_outcome() {
    let clock = ManualClock::new(at(2, 10, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let (uid, session) = signup(&c, "ana", AppVariant::V2);
    let req = share_req(&session, uid, 1, "hello");
    let a = c.share_attempt(&req).unwrap();
    clock.advance(Duration::minutes(2));
    assert_eq!(c.share_attempt(&req).unwrap(), a);
    assert_eq!(svc.store().read(|tx| tx.all_tokens()).unwrap().len(), 1);

    let pass_req = share_req(&session, uid, 2, "hello");
    let p = c.share_attempt(&pass_req).unwrap();
    assert_eq!(c.share_attempt(&pass_req).unwrap(), p);
    assert_eq!(svc.store().read(|tx| tx.event_count()).unwrap(), 1);

    let res = resolve_req(&req, a.intervention_token.unwrap(), 3, PopupChoice::Post);
    let r = c.resolve(&res).unwrap();
    assert_eq!(c.resolve(&res).unwrap(), r);
    assert_eq!(svc.store().read(|tx| tx.event_count()).unwrap(), 2);

    // Reusing a key for a different request is a conflict.
    let clash = share_req(&session, uid, 3, "hello");
    assert_eq!(c.share_attempt(&clash).unwrap_err().status(), Some(409));
}

#[test]
fn resolution_paths() {
    let clock = ManualClock::new(at(2, 8, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let (uid, session) = signup(&c, "ana", AppVariant::V2);
    let (other, other_session) = signup(&c, "bo", AppVariant::V2);

    let s1 = share_req(&session, uid, 1, "first");
    let t1 = c.share_attempt(&s1).unwrap();
    let token = t1.intervention_token.unwrap();

    let mut foreign = resolve_req(&s1, token, 2, PopupChoice::Post);
    foreign.session_token = other_session.clone();
    assert_eq!(c.resolve(&foreign).unwrap_err().status(), Some(403));
    assert!(svc.store().query_user_events(other, TimeRange::all()).unwrap().is_empty());

    clock.advance(Duration::minutes(3));
    let edit = c.resolve(&resolve_req(&s1, token, 3, PopupChoice::Edit)).unwrap();
    assert_eq!((edit.popup_action, edit.state), (0, TokenState::ResolvedEdit));
    let twice = c.resolve(&resolve_req(&s1, token, 4, PopupChoice::Post)).unwrap_err();
    assert_eq!(twice.status(), Some(409));

    let stored = svc.store().query_user_events(uid, TimeRange::all()).unwrap();
    assert_eq!(stored.len(), 1);
    assert_eq!(stored[0].popup_action, PopupAction::Edit);
    assert_eq!(stored[0].message_id, t1.message_id);
    assert_eq!(stored[0].timestamp, at(2, 8, 0), "stamped at issuance");

    clock.set(at(2, 9, 30));
    let s2 = share_req(&session, uid, 5, "second");
    let t2 = c.share_attempt(&s2).unwrap().intervention_token.unwrap();
    let post = c.resolve(&resolve_req(&s2, t2, 6, PopupChoice::Post)).unwrap();
    assert_eq!((post.popup_action, post.state), (1, TokenState::ResolvedPost));

    clock.set(at(2, 11, 0));
    let s3 = share_req(&session, uid, 7, "third");
    let t3 = c.share_attempt(&s3).unwrap().intervention_token.unwrap();
    clock.advance(Duration::minutes(15));
    let late = c.resolve(&resolve_req(&s3, t3, 8, PopupChoice::Post)).unwrap_err();
    assert_eq!((late.status(), late.error_code()), (Some(410), Some("token_expired")));

    let unknown = c.resolve(&resolve_req(&s3, uuid::Uuid::from_u128(999), 9, PopupChoice::Post)).unwrap_err();
    assert_eq!(unknown.status(), Some(404));

    let policy = AuditPolicy::from_config(&PolicyConfig::default()).unwrap();
    assert!(svc.store().read(|tx| audit_store(&policy, tx)).unwrap().is_empty());
}

#[test]
fn protocol_errors() {
    let clock = ManualClock::new(at(2, 8, 0));
    let svc = service(&clock);
    let (uid, session) = signup(&in_process(&svc), "ana", AppVariant::V1);
    let mut body: Value = serde_json::to_value(share_req(&session, uid, 1, "x")).unwrap();

    body["surprise"] = Value::Bool(true);
    let r = svc.handle("POST", SHARE_ATTEMPT, Some(CONTENT_TYPE), body.to_string().as_bytes());
    assert_eq!(r.status, 400);
    let e: ErrorBody = serde_json::from_str(&r.body).unwrap();
    assert_eq!((e.protocol_version.as_str(), e.error_code.as_str()), (PROTOCOL_VERSION, "validation_error"));

    body.as_object_mut().unwrap().remove("surprise");
    body["post_hash"] = Value::String("ABC".into());
    assert_eq!(svc.handle("POST", SHARE_ATTEMPT, Some(CONTENT_TYPE), body.to_string().as_bytes()).status, 400);
    body["post_hash"] = Value::String("A".repeat(64));
    assert_eq!(svc.handle("POST", SHARE_ATTEMPT, Some(CONTENT_TYPE), body.to_string().as_bytes()).status, 400);

    assert_eq!(svc.handle("POST", SHARE_ATTEMPT, Some("text/plain"), b"{}").status, 415);
    assert_eq!(svc.handle("POST", SHARE_ATTEMPT, None, b"{}").status, 415);
    assert_eq!(svc.handle("GET", SHARE_ATTEMPT, None, b"").status, 405);
    assert_eq!(svc.handle("POST", HEALTH, Some(CONTENT_TYPE), b"{}").status, 405);
    assert_eq!(svc.handle("GET", "/api/v1/delete", None, b"").status, 404);

    let h = svc.handle("GET", HEALTH, None, b"");
    let h: HealthResponse = serde_json::from_str(&h.body).unwrap();
    assert_eq!((h.status.as_str(), h.corpus_loaded), ("ok", true));
    assert_eq!(h.server_time, "2026-03-02T08:00:00.000Z");
}

#[test]
fn missing_corpus_fails_fast() {
    let store = Arc::new(Store::open_in_memory().unwrap());
    let clock: Arc<ManualClock> = Arc::new(ManualClock::new(at(2, 8, 0)));
    let r = ApiService::new(store.clone(), PolicyConfig::default(), clock.clone(), options());
    assert!(matches!(r, Err(Error::Configuration(_))));

    let v1 = ServiceOptions { v1_only: true, ..options() };
    let svc = Arc::new(ApiService::new(store, PolicyConfig::default(), clock, v1).unwrap());
    let c = in_process(&svc);
    let req = RegisterRequest {
        username: "ana".into(),
        password: "password123".into(),
        app_variant: AppVariant::V2,
        language: Language::EN,
    };
    assert_eq!(c.register(&req).unwrap_err().status(), Some(400));

    let empty_secret = ServiceOptions { server_secret: String::new(), ..options() };
    let store = Arc::new(Store::open_in_memory().unwrap());
    let r = ApiService::new(store, PolicyConfig::default(), Arc::new(ManualClock::new(at(2, 8, 0))), empty_secret);
    assert!(matches!(r, Err(Error::Configuration(_))));
}

#[test]
fn no_raw_caption_reaches_the_store() {
    let clock = ManualClock::new(at(2, 8, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let (uid, session) = signup(&c, "ana", AppVariant::V1);
    let caption = "my secret holiday caption";
    let s = share_req(&session, uid, 1, caption);
    let t = c.share_attempt(&s).unwrap().intervention_token.unwrap();
    c.resolve(&resolve_req(&s, t, 2, PopupChoice::Post)).unwrap();
    let mut export = Vec::new();
    svc.store().export_events(&mut export).unwrap();
    let export = String::from_utf8(export).unwrap();
    assert!(!export.contains("holiday"));
    assert!(export.contains(s.post_hash.as_str()));
}
