use chrono::Duration;
use serde::{Deserialize, Serialize};

use crate::domain::{ActivityEvent, PopupAction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ChangeKind {
    CaptionChanged,
    ImageChanged,
    BothChanged,
    NoChange,
    /// No follow-up event within the pairing window.
    Abandoned,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditOutcome {
    pub edit_event_id: i64,
    pub followup_event_id: Option<i64>,
    pub change_kind: ChangeKind,
}

pub const DEFAULT_PAIRING_WINDOW_MINUTES: i64 = 30;

/// Pairs every EDIT event with the user's next event (any action) no more
/// than `window_minutes` later and classifies what changed in between.
///
/// A caption change shows up as a different `post_hash` or `post_length`;
/// an image change as a different `image_hash`.
pub fn detect_edit_changes(events: &[ActivityEvent], window_minutes: i64) -> Vec<EditOutcome> {
    let mut ordered: Vec<&ActivityEvent> = events.iter().collect();
    ordered.sort_by_key(|e| (e.user_id, e.timestamp, e.event_id));
    let window = Duration::minutes(window_minutes);

    let mut out = Vec::new();
    for (i, edit) in ordered.iter().enumerate() {
        if edit.popup_action != PopupAction::Edit {
            continue;
        }
        let next = ordered
            .get(i + 1)
            .filter(|n| n.user_id == edit.user_id && n.timestamp - edit.timestamp <= window);
        let outcome = match next {
            None => EditOutcome {
                edit_event_id: edit.event_id,
                followup_event_id: None,
                change_kind: ChangeKind::Abandoned,
            },
            Some(n) => {
                let caption = n.post_hash != edit.post_hash || n.post_length != edit.post_length;
                let image = n.image_hash != edit.image_hash;
                EditOutcome {
                    edit_event_id: edit.event_id,
                    followup_event_id: Some(n.event_id),
                    change_kind: match (caption, image) {
                        (true, true) => ChangeKind::BothChanged,
                        (true, false) => ChangeKind::CaptionChanged,
                        (false, true) => ChangeKind::ImageChanged,
                        (false, false) => ChangeKind::NoChange,
                    },
                }
            }
        };
        out.push(outcome);
    }
    out
}
