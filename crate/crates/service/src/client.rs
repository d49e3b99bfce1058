//! Typed client over a pluggable transport.

use std::sync::Arc;
use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::api::ApiService;
use crate::wire::*;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error("{method} {path} failed with {status}: {}: {}", body.error_code, body.message)]
    Api { method: &'static str, path: &'static str, status: u16, body: ErrorBody },
    #[error("transport: {0}")]
    Transport(String),
    #[error("unexpected response body: {0}")]
    Decode(String),
}

impl ClientError {
    pub fn status(&self) -> Option<u16> {
        match self {
            ClientError::Api { status, .. } => Some(*status),
            _ => None,
        }
    }

    pub fn error_code(&self) -> Option<&str> {
        match self {
            ClientError::Api { body, .. } => Some(&body.error_code),
            _ => None,
        }
    }
}

/// Moves one request to the service. `body` is `None` for GET.
pub trait Transport: Send + Sync {
    fn send(&self, method: &'static str, path: &'static str, body: Option<&[u8]>) -> Result<(u16, String), ClientError>;
}

/// Calls the service directly, still through the JSON encoding.
pub struct InProcess(pub Arc<ApiService>);

impl Transport for InProcess {
    fn send(&self, method: &'static str, path: &'static str, body: Option<&[u8]>) -> Result<(u16, String), ClientError> {
        let ct = body.map(|_| CONTENT_TYPE);
        let r = self.0.handle(method, path, ct, body.unwrap_or_default());
        Ok((r.status, r.body))
    }
}

pub struct Http {
    base_url: String,
    client: reqwest::blocking::Client,
}

impl Http {
    pub fn new(base_url: &str) -> Result<Self, ClientError> {
        let client = reqwest::blocking::Client::builder()
            .timeout(Duration::from_secs(30))
            .build()
            .map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok(Self { base_url: base_url.trim_end_matches('/').to_owned(), client })
    }
}

impl Transport for Http {
    fn send(&self, method: &'static str, path: &'static str, body: Option<&[u8]>) -> Result<(u16, String), ClientError> {
        let url = format!("{}{path}", self.base_url);
        let method = reqwest::Method::from_bytes(method.as_bytes()).map_err(|e| ClientError::Transport(e.to_string()))?;
        let mut req = self.client.request(method, url);
        if let Some(b) = body {
            req = req.header("content-type", CONTENT_TYPE).body(b.to_vec());
        }
        let resp = req.send().map_err(|e| ClientError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.text().map_err(|e| ClientError::Transport(e.to_string()))?;
        Ok((status, text))
    }
}

pub struct Client<T: Transport> {
    transport: T,
}

impl<T: Transport> Client<T> {
    pub fn new(transport: T) -> Self {
        Self { transport }
    }

    pub fn transport(&self) -> &T {
        &self.transport
    }

    fn call<Req: Serialize, Resp: DeserializeOwned>(
        &self,
        method: &'static str,
        path: &'static str,
        req: Option<&Req>,
    ) -> Result<Resp, ClientError> {
        let body = req.map(|r| serde_json::to_vec(r).expect("wire types serialize"));
        let (status, text) = self.transport.send(method, path, body.as_deref())?;
        if status == 200 {
            serde_json::from_str(&text).map_err(|e| ClientError::Decode(format!("{e}: {text}")))
        } else {
            let body = serde_json::from_str(&text).map_err(|e| ClientError::Decode(format!("{e}: {text}")))?;
            Err(ClientError::Api { method, path, status, body })
        }
    }

    pub fn register(&self, r: &RegisterRequest) -> Result<RegisterResponse, ClientError> {
        self.call("POST", REGISTER, Some(r))
    }

    pub fn login(&self, r: &LoginRequest) -> Result<LoginResponse, ClientError> {
        self.call("POST", LOGIN, Some(r))
    }

    pub fn logout(&self, r: &LogoutRequest) -> Result<LogoutResponse, ClientError> {
        self.call("POST", LOGOUT, Some(r))
    }

    pub fn share_attempt(&self, r: &ShareAttemptRequest) -> Result<ShareAttemptResponse, ClientError> {
        self.call("POST", SHARE_ATTEMPT, Some(r))
    }

    pub fn resolve(&self, r: &ResolveRequest) -> Result<ResolveResponse, ClientError> {
        self.call("POST", RESOLVE, Some(r))
    }

    pub fn health(&self) -> Result<HealthResponse, ClientError> {
        self.call::<(), _>("GET", HEALTH, None)
    }
}
