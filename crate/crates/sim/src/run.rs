use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use nudgelab_core::audit::{check_interventions, AuditPolicy, InterventionRecord};
use nudgelab_core::domain::{digest_content, AppVariant, Language, UserId};
use nudgelab_core::engine::{PolicyConfig, PopupChoice};
use nudgelab_core::time::{format_iso, parse_iso, ManualClock};
use nudgelab_service::wire::*;
use nudgelab_service::{Client, ClientError, Transport};

use crate::content::{compose, revise, Draft};
use crate::log::{LoggedRequest, Recorder};
use crate::{CohortConfig, SimError};

/// Longest EDIT → re-attempt chain one share can start.
const MAX_EDIT_CHAIN: u8 = 3;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SimUser {
    pub user_id: UserId,
    pub username: String,
    pub app_variant: AppVariant,
    pub language: Language,
    pub registration_code: String,
}

/// What the simulator itself counted for one user.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShadowTally {
    pub user_id: UserId,
    pub attempts: u32,
    pub interventions: u32,
    pub edits: u32,
    pub posts: u32,
    pub shares: u32,
    pub abandoned: u32,
    pub content_changes: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: CohortConfig,
    pub users: Vec<SimUser>,
    pub requests: usize,
    pub events_emitted: u64,
    pub tallies: Vec<ShadowTally>,
    /// Violations seen by the online monitor; empty on a healthy service.
    pub policy_violations: Vec<String>,
}

pub struct RunOutput {
    pub manifest: RunManifest,
    pub log: Vec<LoggedRequest>,
}

struct Agent {
    user: SimUser,
    password: String,
    session: Option<(String, DateTime<Utc>)>,
    rng: ChaCha8Rng,
    tally: ShadowTally,
}

fn agent_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(b"nudgelab/agent");
    h.update(seed.to_le_bytes());
    h.update((index as u64).to_le_bytes());
    ChaCha8Rng::from_seed(h.finalize().into())
}

struct Attempt {
    agent: usize,
    draft: Draft,
    chain: u8,
}

/// Drives a full cohort through the API. Requests are issued one at a time
/// in simulated-time order, with `clock` (the service's clock) set to each
/// request's instant, so a fixed seed gives the same request sequence.
///
/// `policy` is what the online monitor checks intervention responses
/// against; it should match the service's policy.
pub fn run_cohort<T: Transport>(
    config: &CohortConfig,
    transport: T,
    clock: &ManualClock,
    policy: &PolicyConfig,
) -> Result<RunOutput, SimError> {
    config.validate()?;
    let monitor_policy = AuditPolicy::from_config(policy).map_err(|e| SimError::Config(e.to_string()))?;
    let client = Client::new(Recorder::new(transport, clock.clone()));
    let fail = |client: &Client<Recorder<T>>, e: ClientError| -> SimError {
        match e {
            ClientError::Api { .. } => {
                let request = client.transport().take_log().pop().map(Box::new);
                SimError::Api { message: e.to_string(), request }
            }
            other => SimError::Transport(other.to_string()),
        }
    };

    clock.set(config.start() - Duration::hours(1));
    let mut agents = Vec::new();
    let groups = [(AppVariant::V1, config.n_group1), (AppVariant::V2, config.n_group2)];
    for (variant, n) in groups {
        for k in 0..n {
            let index = agents.len();
            let mut rng = agent_rng(config.rng_seed, index);
            let language = if rng.random_bool(0.5) { Language::EN } else { Language::DE };
            let group = if variant == AppVariant::V1 { 1 } else { 2 };
            let username = format!("{}-g{group}-{:03}", config.username_prefix, k + 1);
            let password = format!("pw-{:016x}", rng.random::<u64>());
            let reg = client
                .register(&RegisterRequest {
                    username: username.clone(),
                    password: password.clone(),
                    app_variant: variant,
                    language,
                })
                .map_err(|e| fail(&client, e))?;
            agents.push(Agent {
                user: SimUser {
                    user_id: reg.user_id,
                    username,
                    app_variant: variant,
                    language,
                    registration_code: reg.registration_code,
                },
                password,
                session: None,
                tally: ShadowTally { user_id: reg.user_id, ..ShadowTally::default() },
                rng,
            });
        }
    }

    // Initial schedule: a Poisson number of attempts per user-day, placed
    // uniformly between 08:00 and 23:00.
    let mut queue: BinaryHeap<Reverse<(DateTime<Utc>, usize, u64)>> = BinaryHeap::new();
    let mut pending: BTreeMap<u64, Attempt> = BTreeMap::new();
    let mut seq = 0u64;
    let poisson = (config.attempts_per_day_rate > 0.0)
        .then(|| Poisson::new(config.attempts_per_day_rate).expect("rate validated"));
    for (index, agent) in agents.iter_mut().enumerate() {
        for day in 0..config.experiment_days {
            let count = poisson.as_ref().map_or(0, |p| p.sample(&mut agent.rng) as u64);
            let day_start = config.start() + Duration::days(i64::from(day));
            for _ in 0..count {
                let at = day_start + Duration::milliseconds(agent.rng.random_range(8 * 3_600_000..23 * 3_600_000));
                let draft = compose(&mut agent.rng);
                queue.push(Reverse((at, index, seq)));
                pending.insert(seq, Attempt { agent: index, draft, chain: 0 });
                seq += 1;
            }
        }
    }

    let mut issued: BTreeMap<UserId, Vec<InterventionRecord>> = BTreeMap::new();
    let mut violations = Vec::new();
    while let Some(Reverse((at, _, id))) = queue.pop() {
        let attempt = pending.remove(&id).expect("scheduled attempt");
        clock.set(at);
        let agent = &mut agents[attempt.agent];
        let uid = agent.user.user_id;

        let needs_login = agent.session.as_ref().is_none_or(|(_, exp)| at + Duration::hours(1) >= *exp);
        if needs_login {
            let login = client
                .login(&LoginRequest { username: agent.user.username.clone(), password: agent.password.clone() })
                .map_err(|e| fail(&client, e))?;
            let exp = parse_iso(&login.expires_at).map_err(|e| SimError::Transport(e.to_string()))?;
            agent.session = Some((login.session_token, exp));
        }
        let session = agent.session.as_ref().expect("logged in").0.clone();

        let post_hash = digest_content(uid, &attempt.draft.caption);
        let image_hash = digest_content(uid, &attempt.draft.image);
        let post_length = attempt.draft.caption.chars().count() as u32;
        let share = ShareAttemptRequest {
            session_token: session.clone(),
            client_event_id: uuid::Builder::from_random_bytes(agent.rng.random()).into_uuid(),
            post_length,
            post_hash: post_hash.clone(),
            image_hash: image_hash.clone(),
            client_timestamp: Some(format_iso(at)),
        };
        agent.tally.attempts += 1;
        let resp = client.share_attempt(&share).map_err(|e| fail(&client, e))?;
        if resp.decision == Decision::Pass {
            agent.tally.shares += 1;
            continue;
        }

        agent.tally.interventions += 1;
        let record = InterventionRecord {
            label: format!("token {}", resp.intervention_token.unwrap_or_default()),
            user_id: uid,
            variant: agent.user.app_variant,
            at,
            message_id: resp.message_id,
        };
        // Only pop-ups from the last day can share a calendar day or a gap
        // with the new one.
        let history = issued.entry(uid).or_default();
        let recent = history.partition_point(|r| r.at < at - Duration::days(1));
        let mut window = history[recent..].to_vec();
        let known = check_interventions(&monitor_policy, &window).len();
        window.push(record.clone());
        violations.extend(check_interventions(&monitor_policy, &window).into_iter().skip(known).map(|v| v.to_string()));
        history.push(record);

        if agent.rng.random_bool(config.abandon_probability) {
            agent.tally.abandoned += 1;
            continue;
        }
        let choice = if agent.rng.random_bool(config.edit_probability) { PopupChoice::Edit } else { PopupChoice::Post };
        let token = resp
            .intervention_token
            .ok_or_else(|| SimError::Transport("intervene response without a token".into()))?;
        client
            .resolve(&ResolveRequest {
                session_token: session,
                client_event_id: uuid::Builder::from_random_bytes(agent.rng.random()).into_uuid(),
                intervention_token: token,
                action: choice,
                post_length,
                post_hash,
                image_hash,
                client_timestamp: Some(format_iso(at)),
            })
            .map_err(|e| fail(&client, e))?;
        match choice {
            PopupChoice::Post => agent.tally.posts += 1,
            PopupChoice::Edit => {
                agent.tally.edits += 1;
                if attempt.chain < MAX_EDIT_CHAIN {
                    let draft = if agent.rng.random_bool(config.change_after_edit_probability) {
                        agent.tally.content_changes += 1;
                        revise(&attempt.draft, &mut agent.rng)
                    } else {
                        attempt.draft.clone()
                    };
                    let retry_at = at + Duration::seconds(agent.rng.random_range(60..=600));
                    queue.push(Reverse((retry_at, attempt.agent, seq)));
                    pending.insert(seq, Attempt { agent: attempt.agent, draft, chain: attempt.chain + 1 });
                    seq += 1;
                }
            }
        }
    }

    let log = client.transport().take_log();
    let tallies: Vec<ShadowTally> = agents.iter().map(|a| a.tally.clone()).collect();
    let events_emitted = tallies.iter().map(|t| u64::from(t.edits + t.posts + t.shares)).sum();
    Ok(RunOutput {
        manifest: RunManifest {
            config: config.clone(),
            users: agents.into_iter().map(|a| a.user).collect(),
            requests: log.len(),
            events_emitted,
            tallies,
            policy_violations: violations,
        },
        log,
    })
}
