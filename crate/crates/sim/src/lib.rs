//! Deterministic synthetic cohorts for exercising the nudgelab API.
//!
//! This is test scaffolding: agents follow a simple seeded behaviour model
//! (Poisson share attempts, fixed EDIT/POST/abandon probabilities) and make
//! no claim to resemble real participants.

use std::sync::Arc;

use nudgelab_core::domain::Corpus;
use nudgelab_core::engine::PolicyConfig;
use nudgelab_core::store::Store;
use nudgelab_core::time::ManualClock;
use nudgelab_service::{ApiService, ServiceOptions};

mod config;
mod content;
pub mod log;
mod run;

pub use config::CohortConfig;
pub use log::{inject_duplicates, replay, LoggedRequest, Recorder, Replayed};
pub use run::{run_cohort, RunManifest, RunOutput, ShadowTally, SimUser};

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("cohort config: {0}")]
    Config(String),
    #[error("service unreachable: {0}")]
    Transport(String),
    #[error("run aborted: {message}")]
    Api { message: String, request: Option<Box<LoggedRequest>> },
    #[error(transparent)]
    Core(#[from] nudgelab_core::Error),
}

/// Password hashing rounds for simulated accounts; the default cost would
/// dominate simulation time without adding anything.
pub const SIM_PBKDF2_ITERATIONS: u32 = 1_000;

/// A service on `store` driven by `clock`, with the default corpus seeded
/// if the store has none.
pub fn local_service(
    store: Arc<Store>,
    policy: PolicyConfig,
    clock: &ManualClock,
    server_secret: &str,
) -> Result<Arc<ApiService>, SimError> {
    if store.corpus()?.is_none() {
        store.seed_corpus(&Corpus::default_corpus())?;
    }
    let opts = ServiceOptions {
        server_secret: server_secret.to_owned(),
        pbkdf2_iterations: SIM_PBKDF2_ITERATIONS,
        ..ServiceOptions::default()
    };
    Ok(Arc::new(ApiService::new(store, policy, Arc::new(clock.clone()), opts)?))
}
