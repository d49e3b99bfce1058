#![allow(dead_code)]

use chrono::{DateTime, TimeZone, Utc};
use nudgelab_core::domain::{digest_content, AppVariant, Corpus, Language, NewActivityEvent, PopupAction, UserId};
use nudgelab_core::store::Store;
use uuid::Uuid;

pub const SECRET: &str = "test-secret";

pub fn at(d: u32, h: u32, m: u32) -> DateTime<Utc> {
    Utc.with_ymd_and_hms(2026, 3, d, h, m, 0).unwrap()
}

pub fn store() -> Store {
    let s = Store::open_in_memory().unwrap();
    s.seed_corpus(&Corpus::default_corpus()).unwrap();
    s
}

pub fn user(store: &Store, name: &str, variant: AppVariant) -> UserId {
    store
        .transaction(|tx| tx.insert_user(name, "digest", variant, Language::EN, at(1, 0, 0), SECRET))
        .unwrap()
        .user_id
}

pub fn share(user_id: UserId, key: u128, when: DateTime<Utc>, caption: &str) -> NewActivityEvent {
    NewActivityEvent {
        client_event_id: Uuid::from_u128(key),
        user_id,
        popup_action: PopupAction::ShareNoIntervention,
        message_id: None,
        post_length: caption.chars().count() as u32,
        post_hash: digest_content(user_id, caption),
        image_hash: digest_content(user_id, "img.jpg"),
        timestamp: when,
        intervention_token: None,
        client_timestamp: None,
    }
}
