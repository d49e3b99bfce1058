use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::domain::{ActivityEvent, AppVariant, PopupAction, UserId};
use crate::export::ExportRecord;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Group {
    G1,
    G2,
}

impl Group {
    pub fn number(self) -> u8 {
        match self {
            Group::G1 => 1,
            Group::G2 => 2,
        }
    }
}

impl From<AppVariant> for Group {
    fn from(v: AppVariant) -> Self {
        match v {
            AppVariant::V1 => Group::G1,
            AppVariant::V2 => Group::G2,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MetricsConfig {
    pub experiment_days: u32,
    pub max_per_day: u32,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self { experiment_days: 7, max_per_day: 5 }
    }
}

impl MetricsConfig {
    /// Most pop-ups a participant could have seen during the experiment.
    pub fn max_interventions(&self) -> u32 {
        self.experiment_days * self.max_per_day
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserMetrics {
    pub user_id: UserId,
    pub group: Group,
    pub edits: u32,
    pub posts: u32,
    pub shares: u32,
    pub publications: u32,
    pub interventions_received: u32,
    pub exposure_ratio: f64,
}

/// Counts actions 0/1/2 for a single user's deduplicated events.
pub fn compute_user_metrics(
    user_id: UserId,
    variant: AppVariant,
    events: &[ActivityEvent],
    config: &MetricsConfig,
) -> Result<UserMetrics> {
    if let Some(other) = events.iter().find(|e| e.user_id != user_id) {
        return Err(Error::validation(format!(
            "events of user {} mixed into metrics for user {user_id}",
            other.user_id
        )));
    }
    let count = |a: PopupAction| events.iter().filter(|e| e.popup_action == a).count() as u32;
    let edits = count(PopupAction::Edit);
    let posts = count(PopupAction::Post);
    let shares = count(PopupAction::ShareNoIntervention);
    let interventions_received = edits + posts;
    let ceiling = config.max_interventions();
    Ok(UserMetrics {
        user_id,
        group: variant.into(),
        edits,
        posts,
        shares,
        publications: posts + shares,
        interventions_received,
        exposure_ratio: if ceiling == 0 { 0.0 } else { f64::from(interventions_received) / f64::from(ceiling) },
    })
}

/// Metrics for every user in an export, plus `participants` that have no
/// events at all (they count as zeros in the group statistics).
pub fn metrics_from_export(
    records: &[ExportRecord],
    participants: &BTreeMap<UserId, AppVariant>,
    config: &MetricsConfig,
) -> Result<Vec<UserMetrics>> {
    let mut by_user: BTreeMap<UserId, (AppVariant, Vec<ActivityEvent>)> = participants
        .iter()
        .map(|(&id, &v)| (id, (v, Vec::new())))
        .collect();
    for r in records {
        let entry = by_user
            .entry(r.event.user_id)
            .or_insert_with(|| (r.app_variant, Vec::new()));
        if entry.0 != r.app_variant {
            return Err(Error::validation(format!(
                "user {} appears with variants {} and {}",
                r.event.user_id, entry.0, r.app_variant
            )));
        }
        entry.1.push(r.event.clone());
    }
    by_user
        .into_iter()
        .map(|(id, (variant, events))| compute_user_metrics(id, variant, &events, config))
        .collect()
}
