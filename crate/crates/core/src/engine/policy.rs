use std::collections::BTreeSet;
use std::path::Path;

use chrono::{DateTime, Duration, Utc};
use chrono_tz::Tz;
use rand::Rng;
use serde::{Deserialize, Serialize};
use uuid::Uuid;

use crate::domain::{AppVariant, InterventionMessage, MessageId};
use crate::time::{calendar_day, parse_timezone};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SelectionStrategy {
    /// Uniform draw among messages not yet shown to the user today.
    #[default]
    UniformRandom,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PolicyConfig {
    pub max_per_day: u32,
    pub min_gap_minutes: u32,
    /// Only meaningful for V2; V1 pop-ups carry no message.
    pub no_repeat_same_day: bool,
    pub token_ttl_minutes: u32,
    pub day_boundary_timezone: String,
    pub selection_strategy: SelectionStrategy,
    pub rng_seed: Option<u64>,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        Self {
            max_per_day: 5,
            min_gap_minutes: 60,
            no_repeat_same_day: true,
            token_ttl_minutes: 15,
            day_boundary_timezone: "UTC".to_owned(),
            selection_strategy: SelectionStrategy::UniformRandom,
            rng_seed: None,
        }
    }
}

impl PolicyConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let config: Self =
            toml::from_str(s).map_err(|e| Error::Configuration(format!("policy: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let raw = std::fs::read_to_string(path)?;
        Self::from_toml_str(&raw)
            .map_err(|e| Error::Configuration(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_per_day < 1 {
            return Err(Error::Configuration("max_per_day must be at least 1".into()));
        }
        if self.token_ttl_minutes < 1 {
            return Err(Error::Configuration("token_ttl_minutes must be at least 1".into()));
        }
        self.timezone()?;
        Ok(())
    }

    pub fn timezone(&self) -> Result<Tz> {
        parse_timezone(&self.day_boundary_timezone)
    }

    pub fn min_gap(&self) -> Duration {
        Duration::minutes(i64::from(self.min_gap_minutes))
    }

    pub fn token_ttl(&self) -> Duration {
        Duration::minutes(i64::from(self.token_ttl_minutes))
    }
}

/// One past pop-up display, the only history the policy looks at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IssuedIntervention {
    pub token: Uuid,
    #[serde(with = "crate::time::iso_millis")]
    pub issued_at: DateTime<Utc>,
    pub message_id: Option<MessageId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Admission {
    Admit,
    BudgetExhausted,
    TooSoon,
}

/// Applies the daily budget and the minimum gap to a user's issuance
/// history. Expired and abandoned pop-ups count: they were displayed.
///
/// The gap is measured across midnight too.
pub fn admission(
    config: &PolicyConfig,
    tz: Tz,
    now: DateTime<Utc>,
    history: &[IssuedIntervention],
) -> Admission {
    let today = calendar_day(now, tz);
    let issued_today = history
        .iter()
        .filter(|h| calendar_day(h.issued_at, tz) == today)
        .count();
    if issued_today >= config.max_per_day as usize {
        return Admission::BudgetExhausted;
    }
    let gap = config.min_gap();
    if history.iter().any(|h| now - h.issued_at < gap) {
        return Admission::TooSoon;
    }
    Admission::Admit
}

/// Message ids attached to pop-ups issued on the calendar day of `now`.
pub fn shown_today(tz: Tz, now: DateTime<Utc>, history: &[IssuedIntervention]) -> BTreeSet<MessageId> {
    let today = calendar_day(now, tz);
    history
        .iter()
        .filter(|h| calendar_day(h.issued_at, tz) == today)
        .filter_map(|h| h.message_id)
        .collect()
}

/// Picks the fact of the day. V1 pop-ups show only the legend.
pub fn select_message<'a, R: Rng + ?Sized>(
    variant: AppVariant,
    corpus: &'a [InterventionMessage],
    shown_today: &BTreeSet<MessageId>,
    no_repeat_same_day: bool,
    rng: &mut R,
) -> Option<&'a InterventionMessage> {
    if variant == AppVariant::V1 {
        return None;
    }
    let eligible: Vec<&InterventionMessage> = corpus
        .iter()
        .filter(|m| !no_repeat_same_day || !shown_today.contains(&m.message_id))
        .collect();
    if eligible.is_empty() {
        return None;
    }
    Some(eligible[rng.random_range(0..eligible.len())])
}
