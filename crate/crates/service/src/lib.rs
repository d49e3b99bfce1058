//! HTTP/JSON service for the nudgelab experiment platform.
//!
//! Endpoints, all under `/api/v1`: `register`, `login`, `logout`,
//! `share-attempt` and `resolve` (POST, JSON bodies) and `health` (GET).
//! See `docs/protocol.json` for field-level descriptions.

pub mod api;
pub mod client;
pub mod config;
pub mod http;
pub mod password;
pub mod wire;

pub use api::{ApiService, ServiceOptions, WireResponse};
pub use client::{Client, ClientError, Http, InProcess, Transport};
pub use config::ServiceConfig;
