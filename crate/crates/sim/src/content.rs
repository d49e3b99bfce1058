//! Synthetic post content. Raw captions stay inside the simulator; only
//! lengths and digests are sent.

use rand::seq::IndexedRandom;
use rand::Rng;

const WORDS: &[&str] = &[
    "sunset", "friends", "coffee", "beach", "party", "work", "monday", "cat", "dinner", "hike", "city", "rain",
    "birthday", "concert", "lake", "train", "garden", "pizza", "game", "weekend", "snow", "museum", "run", "family",
    "road", "trip", "morning", "night", "bike", "cake", "view", "home",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Draft {
    pub caption: String,
    pub image: String,
}

pub fn compose<R: Rng>(rng: &mut R) -> Draft {
    Draft { caption: caption(rng), image: image(rng) }
}

fn caption<R: Rng>(rng: &mut R) -> String {
    let n = rng.random_range(0..=8);
    (0..n).map(|_| *WORDS.choose(rng).expect("non-empty")).collect::<Vec<_>>().join(" ")
}

fn image<R: Rng>(rng: &mut R) -> String {
    format!("DCIM/IMG_{:04}.jpg", rng.random_range(0..10_000))
}

/// Alters the caption, the image or both, guaranteeing a difference.
pub fn revise<R: Rng>(draft: &Draft, rng: &mut R) -> Draft {
    let mut next = draft.clone();
    let (caption_changes, image_changes) = match rng.random_range(0..3) {
        0 => (true, false),
        1 => (false, true),
        _ => (true, true),
    };
    if caption_changes {
        while next.caption == draft.caption {
            next.caption = caption(rng);
        }
    }
    if image_changes {
        while next.image == draft.image {
            next.image = image(rng);
        }
    }
    next
}
