//! Offline re-check of the intervention policy over a complete history.
//!
//! Two sources are supported. A store is audited through its token table,
//! which also holds pop-ups that expired or were abandoned, plus the
//! correspondence between tokens and resolution events. An export only
//! carries resolved pop-ups: every EDIT or POST event is one intervention,
//! stamped with the time the pop-up was issued.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use chrono::{DateTime, Duration, NaiveDate, Utc};
use chrono_tz::Tz;
use serde::{Deserialize, Serialize};

use crate::domain::{AppVariant, MessageId, UserId};
use crate::engine::{PolicyConfig, TokenState};
use crate::export::ExportRecord;
use crate::store::StoreTx;
use crate::time::{calendar_day, format_iso};
use crate::Result;

#[derive(Debug, Clone, Copy)]
pub struct AuditPolicy {
    pub max_per_day: u32,
    pub min_gap: Duration,
    pub no_repeat_same_day: bool,
    pub tz: Tz,
}

impl AuditPolicy {
    pub fn from_config(config: &PolicyConfig) -> Result<Self> {
        Ok(Self {
            max_per_day: config.max_per_day,
            min_gap: config.min_gap(),
            no_repeat_same_day: config.no_repeat_same_day,
            tz: config.timezone()?,
        })
    }
}

/// One pop-up as seen by the auditor.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InterventionRecord {
    /// `token <uuid>` or `event <id>`.
    pub label: String,
    pub user_id: UserId,
    pub variant: AppVariant,
    pub at: DateTime<Utc>,
    pub message_id: Option<MessageId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Budget { user_id: UserId, day: NaiveDate, count: usize, limit: u32, interventions: Vec<String> },
    Gap { user_id: UserId, first: String, second: String, gap_seconds: i64 },
    Repeat { user_id: UserId, day: NaiveDate, message_id: MessageId, first: String, second: String },
    MessagePresence { user_id: UserId, intervention: String, detail: String },
    DuplicateClientEvent { client_event_id: String, events: Vec<String> },
    TokenEvent { token: String, detail: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Budget { user_id, day, count, limit, interventions } => write!(
                f,
                "budget: user {user_id} received {count} interventions on {day} (limit {limit}): {}",
                interventions.join(", ")
            ),
            Violation::Gap { user_id, first, second, gap_seconds } => write!(
                f,
                "gap: user {user_id} {first} and {second} only {}m{:02}s apart",
                gap_seconds / 60,
                gap_seconds % 60
            ),
            Violation::Repeat { user_id, day, message_id, first, second } => write!(
                f,
                "repeat: user {user_id} saw message {message_id} twice on {day} ({first}, {second})"
            ),
            Violation::MessagePresence { user_id, intervention, detail } => {
                write!(f, "message: user {user_id} {intervention}: {detail}")
            }
            Violation::DuplicateClientEvent { client_event_id, events } => {
                write!(f, "duplicate: client_event_id {client_event_id} stored as {}", events.join(", "))
            }
            Violation::TokenEvent { token, detail } => write!(f, "token {token}: {detail}"),
        }
    }
}

/// Budget, gap, repeat and message-presence checks.
pub fn check_interventions(policy: &AuditPolicy, records: &[InterventionRecord]) -> Vec<Violation> {
    let mut by_user: BTreeMap<UserId, Vec<&InterventionRecord>> = BTreeMap::new();
    for r in records {
        by_user.entry(r.user_id).or_default().push(r);
    }
    let mut out = Vec::new();
    for (user_id, mut list) in by_user {
        list.sort_by(|a, b| (a.at, &a.label).cmp(&(b.at, &b.label)));

        for r in &list {
            let detail = match (r.variant, r.message_id) {
                (AppVariant::V1, Some(m)) => Some(format!("V1 pop-up carries message {m}")),
                (AppVariant::V2, None) => Some("V2 pop-up without a message".to_owned()),
                _ => None,
            };
            if let Some(detail) = detail {
                out.push(Violation::MessagePresence { user_id, intervention: r.label.clone(), detail });
            }
        }

        for pair in list.windows(2) {
            let gap = pair[1].at - pair[0].at;
            if gap < policy.min_gap {
                out.push(Violation::Gap {
                    user_id,
                    first: pair[0].label.clone(),
                    second: pair[1].label.clone(),
                    gap_seconds: gap.num_seconds(),
                });
            }
        }

        let mut days: BTreeMap<NaiveDate, Vec<&InterventionRecord>> = BTreeMap::new();
        for r in &list {
            days.entry(calendar_day(r.at, policy.tz)).or_default().push(r);
        }
        for (day, items) in days {
            if items.len() > policy.max_per_day as usize {
                out.push(Violation::Budget {
                    user_id,
                    day,
                    count: items.len(),
                    limit: policy.max_per_day,
                    interventions: items.iter().map(|r| r.label.clone()).collect(),
                });
            }
            if policy.no_repeat_same_day {
                let mut first_seen: HashMap<MessageId, &str> = HashMap::new();
                for r in items.iter().filter(|r| r.variant == AppVariant::V2) {
                    let Some(m) = r.message_id else { continue };
                    if let Some(first) = first_seen.get(&m) {
                        out.push(Violation::Repeat {
                            user_id,
                            day,
                            message_id: m,
                            first: (*first).to_owned(),
                            second: r.label.clone(),
                        });
                    } else {
                        first_seen.insert(m, &r.label);
                    }
                }
            }
        }
    }
    out
}

fn duplicate_client_events(records: &[ExportRecord]) -> Vec<Violation> {
    let mut seen: BTreeMap<String, Vec<String>> = BTreeMap::new();
    for r in records {
        seen.entry(r.event.client_event_id.to_string())
            .or_default()
            .push(format!("event {}", r.event.event_id));
    }
    seen.into_iter()
        .filter(|(_, events)| events.len() > 1)
        .map(|(client_event_id, events)| Violation::DuplicateClientEvent { client_event_id, events })
        .collect()
}

/// Audits an exported event log.
pub fn audit_export(policy: &AuditPolicy, records: &[ExportRecord]) -> Vec<Violation> {
    let mut out = duplicate_client_events(records);
    let interventions: Vec<InterventionRecord> = records
        .iter()
        .filter(|r| r.event.popup_action.follows_intervention())
        .map(|r| InterventionRecord {
            label: format!("event {} at {}", r.event.event_id, format_iso(r.event.timestamp)),
            user_id: r.event.user_id,
            variant: r.app_variant,
            at: r.event.timestamp,
            message_id: r.event.message_id,
        })
        .collect();
    out.extend(check_interventions(policy, &interventions));
    out
}

/// Audits a store: every issued token counts against the policy, resolved
/// tokens must have exactly the matching event, and unresolved ones none.
pub fn audit_store(policy: &AuditPolicy, tx: &StoreTx<'_>) -> Result<Vec<Violation>> {
    let variants: HashMap<UserId, AppVariant> =
        tx.users()?.into_iter().map(|u| (u.user_id, u.app_variant)).collect();
    let tokens = tx.all_tokens()?;
    let records = tx.export_records()?;
    let mut out = duplicate_client_events(&records);

    let mut interventions = Vec::with_capacity(tokens.len());
    for t in &tokens {
        let label = format!("token {} at {}", t.token, format_iso(t.issued_at));
        let Some(&variant) = variants.get(&t.user_id) else {
            out.push(Violation::TokenEvent { token: t.token.to_string(), detail: "unknown user".into() });
            continue;
        };
        let event = tx.event_for_token(t.token)?;
        let expected = match t.state {
            TokenState::ResolvedEdit => Some(crate::domain::PopupAction::Edit),
            TokenState::ResolvedPost => Some(crate::domain::PopupAction::Post),
            TokenState::Pending | TokenState::Expired => None,
        };
        let problem = match (expected, &event) {
            (None, None) => None,
            (None, Some(e)) => Some(format!("{} token has event {}", t.state, e.event_id)),
            (Some(a), None) => Some(format!("{} token has no action {} event", t.state, a.code())),
            (Some(a), Some(e)) if e.popup_action != a => {
                Some(format!("{} token recorded as action {}", t.state, e.popup_action.code()))
            }
            (Some(_), Some(e)) if e.message_id != t.message_id || e.user_id != t.user_id => {
                Some(format!("event {} disagrees with the token's user or message", e.event_id))
            }
            _ => None,
        };
        if let Some(detail) = problem {
            out.push(Violation::TokenEvent { token: t.token.to_string(), detail });
        }
        interventions.push(InterventionRecord {
            label,
            user_id: t.user_id,
            variant,
            at: t.issued_at,
            message_id: t.message_id,
        });
    }
    let token_count = records.iter().filter(|r| r.event.popup_action.follows_intervention()).count();
    let resolved = tokens
        .iter()
        .filter(|t| matches!(t.state, TokenState::ResolvedEdit | TokenState::ResolvedPost))
        .count();
    if token_count != resolved {
        out.push(Violation::TokenEvent {
            token: "*".into(),
            detail: format!("{token_count} EDIT/POST events but {resolved} resolved tokens"),
        });
    }
    out.extend(check_interventions(policy, &interventions));
    Ok(out)
}
