//! The shipped protocol description must match what the service does.

mod common;

use std::collections::BTreeSet;

use common::*;
use nudgelab_core::engine::PopupChoice;
use nudgelab_core::time::ManualClock;
use nudgelab_core::Error;
use nudgelab_service::api::error_status;
use nudgelab_service::wire::*;
use serde_json::Value;

fn description() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../docs/protocol.json");
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> BTreeSet<String> {
    v.as_object().unwrap().keys().cloned().collect()
}

fn endpoint<'a>(d: &'a Value, name: &str) -> &'a Value {
    d["endpoints"].as_array().unwrap().iter().find(|e| e["name"] == name).unwrap()
}

#[test]
fn endpoints_and_fields_match() {
    let d = description();
    assert_eq!(d["protocol_version"], PROTOCOL_VERSION);
    assert_eq!(d["content_type"], CONTENT_TYPE);

    let paths: BTreeSet<&str> = d["endpoints"].as_array().unwrap().iter().map(|e| e["path"].as_str().unwrap()).collect();
    assert_eq!(paths, BTreeSet::from([REGISTER, LOGIN, LOGOUT, SHARE_ATTEMPT, RESOLVE, HEALTH]));

    // Request examples parse, and the documented fields are exactly the accepted ones.
    fn check<T: serde::de::DeserializeOwned + serde::Serialize>(e: &Value, optional: &[&str]) {
        let parsed: T = serde_json::from_value(e["request_example"].clone()).unwrap();
        let mut seen = keys(&serde_json::to_value(parsed).unwrap());
        seen.extend(optional.iter().map(|s| s.to_string()));
        assert_eq!(seen, keys(&e["request"]), "{}", e["name"]);
    }
    check::<RegisterRequest>(endpoint(&d, "register"), &[]);
    check::<LoginRequest>(endpoint(&d, "login"), &[]);
    check::<LogoutRequest>(endpoint(&d, "logout"), &[]);
    check::<ShareAttemptRequest>(endpoint(&d, "share-attempt"), &["client_timestamp"]);
    check::<ResolveRequest>(endpoint(&d, "resolve"), &["client_timestamp"]);

    // Responses from a live flow use exactly the documented fields.
    let clock = ManualClock::new(at(2, 8, 0));
    let svc = service(&clock);
    let c = in_process(&svc);
    let reg = c
        .register(&serde_json::from_value(endpoint(&d, "register")["request_example"].clone()).unwrap())
        .unwrap();
    let login = c.login(&LoginRequest { username: "ana".into(), password: "password123".into() }).unwrap();
    let s = share_req(&login.session_token, reg.user_id, 1, "x");
    let nudge = c.share_attempt(&s).unwrap();
    let pass = c.share_attempt(&share_req(&login.session_token, reg.user_id, 2, "x")).unwrap();
    let res = c.resolve(&resolve_req(&s, nudge.intervention_token.unwrap(), 3, PopupChoice::Edit)).unwrap();
    let health = svc.health();
    let out = c.logout(&LogoutRequest { session_token: login.session_token.clone() }).unwrap();

    let mut share_keys = keys(&serde_json::to_value(&nudge).unwrap());
    share_keys.extend(keys(&serde_json::to_value(&pass).unwrap()));
    let cases = [
        ("register", keys(&serde_json::to_value(&reg).unwrap())),
        ("login", keys(&serde_json::to_value(&login).unwrap())),
        ("logout", keys(&serde_json::to_value(&out).unwrap())),
        ("share-attempt", share_keys),
        ("resolve", keys(&serde_json::to_value(&res).unwrap())),
        ("health", keys(&serde_json::to_value(&health).unwrap())),
    ];
    for (name, got) in cases {
        assert_eq!(got, keys(&endpoint(&d, name)["response"]), "{name}");
    }
}

#[test]
fn error_codes_match() {
    let d = description();
    let codes = d["error_codes"].as_object().unwrap();
    let samples = [
        Error::validation("x"),
        Error::Authentication,
        Error::Authorization("x".into()),
        Error::NotFound("x".into()),
        Error::Conflict("x".into()),
        Error::Expired("x".into()),
        Error::Configuration("x".into()),
        Error::Degenerate("x".into()),
        Error::Io(std::io::Error::other("x")),
    ];
    for e in samples {
        let (status, code) = error_status(&e);
        assert_eq!(codes[code], status, "{code}");
    }
}
