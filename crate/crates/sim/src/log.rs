//! Request log, duplicate injection and replay.

use std::collections::HashMap;
use std::sync::Mutex;

use chrono::{DateTime, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use nudgelab_core::time::{format_iso, parse_iso, Clock, ManualClock};
use nudgelab_service::wire::{LOGIN, RESOLVE, SHARE_ATTEMPT};
use nudgelab_service::{ClientError, Transport};

/// One request as sent, with the response it got.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoggedRequest {
    pub at: String,
    pub method: String,
    pub path: String,
    pub body: Option<Value>,
    pub status: u16,
    pub response: Value,
    /// Set on entries added by [`inject_duplicates`].
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub duplicate: bool,
}

/// Transport wrapper that records every exchange at the clock's time.
pub struct Recorder<T> {
    inner: T,
    clock: ManualClock,
    log: Mutex<Vec<LoggedRequest>>,
}

impl<T: Transport> Recorder<T> {
    pub fn new(inner: T, clock: ManualClock) -> Self {
        Self { inner, clock, log: Mutex::new(Vec::new()) }
    }

    pub fn take_log(&self) -> Vec<LoggedRequest> {
        std::mem::take(&mut *self.log.lock().expect("log lock"))
    }
}

impl<T: Transport> Transport for Recorder<T> {
    fn send(&self, method: &'static str, path: &'static str, body: Option<&[u8]>) -> Result<(u16, String), ClientError> {
        let (status, text) = self.inner.send(method, path, body)?;
        let entry = LoggedRequest {
            at: format_iso(self.clock.now()),
            method: method.to_owned(),
            path: path.to_owned(),
            body: body.and_then(|b| serde_json::from_slice(b).ok()),
            status,
            response: serde_json::from_str(&text).unwrap_or(Value::String(text.clone())),
            duplicate: false,
        };
        self.log.lock().expect("log lock").push(entry);
        Ok((status, text))
    }
}

/// Copies a seeded fraction of the successful share and resolve requests
/// and places each copy up to three entries (and at most five minutes)
/// after its original, as a client retry would. Rate 0 returns the log
/// unchanged.
pub fn inject_duplicates(log: &[LoggedRequest], duplication_rate: f64, rng_seed: u64) -> Vec<LoggedRequest> {
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let times: Vec<Option<DateTime<Utc>>> = log.iter().map(|e| parse_iso(&e.at).ok()).collect();
    let retry_window = chrono::Duration::minutes(5);
    let mut after: Vec<Vec<LoggedRequest>> = vec![Vec::new(); log.len()];
    for (i, entry) in log.iter().enumerate() {
        let retryable = entry.path == SHARE_ATTEMPT || entry.path == RESOLVE;
        if !(retryable && entry.status == 200 && rng.random_bool(duplication_rate.clamp(0.0, 1.0))) {
            continue;
        }
        let wanted = i + rng.random_range(0..=3usize);
        let mut pos = i;
        while pos < wanted
            && pos + 1 < log.len()
            && matches!((times[i], times[pos + 1]), (Some(a), Some(b)) if b - a <= retry_window)
        {
            pos += 1;
        }
        let mut copy = entry.clone();
        copy.duplicate = true;
        copy.at = log[pos].at.clone();
        after[pos].push(copy);
    }
    let mut out = Vec::with_capacity(log.len());
    for (entry, copies) in log.iter().zip(after) {
        out.push(entry.clone());
        out.extend(copies);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Replayed {
    pub entry: LoggedRequest,
    pub status: u16,
    pub response: Value,
}

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("entry {index}: {message}")]
    Entry { index: usize, message: String },
    #[error(transparent)]
    Transport(#[from] ClientError),
}

fn static_path(path: &str) -> Option<&'static str> {
    use nudgelab_service::wire::*;
    [REGISTER, LOGIN, LOGOUT, SHARE_ATTEMPT, RESOLVE, HEALTH].into_iter().find(|p| *p == path)
}

/// Sends every logged request again at its recorded time. Session tokens
/// are re-issued by the target, so they are mapped from the logged login
/// responses to the new ones.
pub fn replay<T: Transport>(log: &[LoggedRequest], target: &T, clock: &ManualClock) -> Result<Vec<Replayed>, ReplayError> {
    let mut sessions: HashMap<String, String> = HashMap::new();
    let mut out = Vec::with_capacity(log.len());
    for (index, entry) in log.iter().enumerate() {
        let err = |message: String| ReplayError::Entry { index, message };
        let at: DateTime<Utc> = parse_iso(&entry.at).map_err(|e| err(e.to_string()))?;
        clock.set(at);
        let path = static_path(&entry.path).ok_or_else(|| err(format!("unknown path {}", entry.path)))?;
        let method = if entry.method == "GET" { "GET" } else { "POST" };
        let mut body = entry.body.clone();
        if let Some(token) = body.as_mut().and_then(|b| b.get_mut("session_token")) {
            if let Some(mapped) = token.as_str().and_then(|t| sessions.get(t)) {
                *token = Value::String(mapped.clone());
            }
        }
        let bytes = body.as_ref().map(|b| serde_json::to_vec(b).expect("json"));
        let (status, text) = target.send(method, path, bytes.as_deref())?;
        let response: Value = serde_json::from_str(&text).unwrap_or(Value::String(text));
        if path == LOGIN {
            if let (Some(old), Some(new)) = (entry.response["session_token"].as_str(), response["session_token"].as_str()) {
                sessions.insert(old.to_owned(), new.to_owned());
            }
        }
        out.push(Replayed { entry: entry.clone(), status, response });
    }
    Ok(out)
}
