//! Core of the nudgelab experiment platform.
//!
//! * [`domain`] holds the shared vocabulary (accounts, the message corpus,
//!   activity events, survey constructs) and the content pseudonymization
//!   procedure every client must reproduce bit-exactly.
//! * [`engine`] decides whether a share attempt receives an intervention
//!   pop-up under the daily budget / minimum gap policy.
//! * [`store`] persists everything in an embedded SQLite database with
//!   idempotent event ingestion.
//! * [`analytics`] turns exported events and survey responses into the
//!   descriptive tables, pooled t-tests, Levene tests and reliability scores.
//! * [`audit`] re-checks the policy invariants over a full history.

pub mod analytics;
pub mod audit;
pub mod domain;
pub mod engine;
pub mod error;
pub mod export;
pub mod store;
pub mod time;

pub use error::{Error, Result};
