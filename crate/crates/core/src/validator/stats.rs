use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::length_units;
use crate::danmaku::{Category, DanmakuTrack, DanmakuType};
use crate::prompting::LengthUnit;

/// Reference rate of organic posts on lecture videos, per minute.
pub const HUMAN_POSTS_PER_MIN: f64 = 1.85;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackStats {
    pub total: usize,
    pub per_type: BTreeMap<DanmakuType, usize>,
    pub content_fraction: f64,
    pub emotion_fraction: f64,
    pub user_fraction: f64,
    pub mean_len_units: f64,
    pub rate_per_min: f64,
}

impl TrackStats {
    /// Generated rate relative to [`HUMAN_POSTS_PER_MIN`].
    pub fn density_ratio(&self) -> f64 {
        self.rate_per_min / HUMAN_POSTS_PER_MIN
    }
}

pub fn track_stats(track: &DanmakuTrack, duration_s: f64, unit: LengthUnit) -> TrackStats {
    let total = track.len();
    let mut per_type = BTreeMap::new();
    let (mut content, mut emotion, mut user, mut len_sum) = (0usize, 0usize, 0usize, 0usize);
    for d in &track.danmaku {
        *per_type.entry(d.dtype).or_insert(0) += 1;
        match d.category {
            Category::Content => content += 1,
            Category::Emotion => emotion += 1,
            Category::User => user += 1,
        }
        len_sum += length_units(&d.text, unit);
    }
    let frac = |n: usize| if total == 0 { 0.0 } else { n as f64 / total as f64 };
    TrackStats {
        total,
        per_type,
        content_fraction: frac(content),
        emotion_fraction: frac(emotion),
        user_fraction: frac(user),
        mean_len_units: if total == 0 { 0.0 } else { len_sum as f64 / total as f64 },
        rate_per_min: if duration_s > 0.0 { total as f64 * 60.0 / duration_s } else { 0.0 },
    }
}
