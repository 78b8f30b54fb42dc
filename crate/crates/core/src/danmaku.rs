//! Danmaku records and tracks.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::prompting::GenerationConfig;

/// The seven generated danmaku types plus comments posted by real viewers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DanmakuType {
    #[serde(rename = "qa")]
    QA,
    Discussion,
    Highlight,
    Summary,
    EmotionExpression,
    Compliment,
    Encouragement,
    UserPosted,
}

/// Whether a danmaku speaks about the material or about the viewer's feelings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    Content,
    Emotion,
    /// Posted from the platform by a learner.
    User,
}

impl DanmakuType {
    /// Generated types in the order the response grammar lists them.
    pub const GENERATED: [DanmakuType; 7] = [
        DanmakuType::EmotionExpression,
        DanmakuType::Compliment,
        DanmakuType::Encouragement,
        DanmakuType::Discussion,
        DanmakuType::Highlight,
        DanmakuType::QA,
        DanmakuType::Summary,
    ];

    pub const CONTENT: [DanmakuType; 4] =
        [DanmakuType::Discussion, DanmakuType::Highlight, DanmakuType::QA, DanmakuType::Summary];

    pub const EMOTION: [DanmakuType; 3] =
        [DanmakuType::EmotionExpression, DanmakuType::Compliment, DanmakuType::Encouragement];

    pub fn category(self) -> Category {
        match self {
            DanmakuType::QA | DanmakuType::Discussion | DanmakuType::Highlight | DanmakuType::Summary => {
                Category::Content
            }
            DanmakuType::EmotionExpression | DanmakuType::Compliment | DanmakuType::Encouragement => Category::Emotion,
            DanmakuType::UserPosted => Category::User,
        }
    }

    /// Heading used in the Markdown response grammar.
    pub fn heading(self) -> &'static str {
        match self {
            DanmakuType::QA => "Q&A",
            DanmakuType::Discussion => "Discussion",
            DanmakuType::Highlight => "Highlights",
            DanmakuType::Summary => "Summary",
            DanmakuType::EmotionExpression => "Personal Emotion Expression",
            DanmakuType::Compliment => "Brief Compliment",
            DanmakuType::Encouragement => "Encouragement",
            DanmakuType::UserPosted => "User Posted",
        }
    }

    /// Lower-case wire name, as used in track JSON.
    pub fn as_str(self) -> &'static str {
        match self {
            DanmakuType::QA => "qa",
            DanmakuType::Discussion => "discussion",
            DanmakuType::Highlight => "highlight",
            DanmakuType::Summary => "summary",
            DanmakuType::EmotionExpression => "emotion_expression",
            DanmakuType::Compliment => "compliment",
            DanmakuType::Encouragement => "encouragement",
            DanmakuType::UserPosted => "user_posted",
        }
    }
}

impl fmt::Display for DanmakuType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.heading())
    }
}

impl Category {
    pub fn heading(self) -> &'static str {
        match self {
            Category::Content => "Content-related danmaku",
            Category::Emotion => "Emotion-related danmaku",
            Category::User => "User-posted danmaku",
        }
    }
}

/// 24-bit RGB colour. Serialized as `#rrggbb`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Rgb(pub u32);

impl Rgb {
    pub const WHITE: Rgb = Rgb(0xFF_FF_FF);
    pub const RED: Rgb = Rgb(0xFF_00_00);
    pub const BLUE: Rgb = Rgb(0x00_00_FF);

    pub fn new(value: u32) -> Self {
        Rgb(value & 0xFF_FF_FF)
    }

    /// Accepts `red`, `blue`, `#rrggbb` and `rrggbb`.
    pub fn parse(raw: &str) -> Option<Rgb> {
        let s = raw.trim();
        match s.to_ascii_lowercase().as_str() {
            "red" => return Some(Rgb::RED),
            "blue" => return Some(Rgb::BLUE),
            "white" => return Some(Rgb::WHITE),
            _ => {}
        }
        let hex = s.strip_prefix('#').unwrap_or(s);
        if hex.len() != 6 || !hex.bytes().all(|b| b.is_ascii_hexdigit()) {
            return None;
        }
        u32::from_str_radix(hex, 16).ok().map(Rgb)
    }

    /// Name used inside `<font color="...">`.
    pub fn font_name(self) -> String {
        match self {
            Rgb::RED => "red".to_string(),
            Rgb::BLUE => "blue".to_string(),
            other => other.to_string(),
        }
    }
}

impl Default for Rgb {
    fn default() -> Self {
        Rgb::WHITE
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{:06x}", self.0)
    }
}

impl FromStr for Rgb {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Rgb::parse(s).ok_or_else(|| format!("invalid colour {s:?}"))
    }
}

impl Serialize for Rgb {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Rgb {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = String::deserialize(deserializer)?;
        Rgb::parse(&raw).ok_or_else(|| serde::de::Error::custom(format!("invalid colour {raw:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    #[default]
    Scroll,
    Top,
    Bottom,
}

/// A single timed comment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Danmaku {
    pub id: String,
    #[serde(rename = "persona")]
    pub persona_label: Option<char>,
    pub time_s: f64,
    #[serde(rename = "type")]
    pub dtype: DanmakuType,
    pub category: Category,
    pub text: String,
    #[serde(default)]
    pub color: Rgb,
    #[serde(default)]
    pub position: Position,
    pub reply_to: Option<String>,
}

impl Danmaku {
    /// A scroll-positioned white danmaku of the given type; highlights are pinned to the top.
    pub fn new(
        id: impl Into<String>,
        persona: Option<char>,
        time_s: f64,
        dtype: DanmakuType,
        text: impl Into<String>,
    ) -> Self {
        Danmaku {
            id: id.into(),
            persona_label: persona,
            time_s,
            dtype,
            category: dtype.category(),
            text: text.into(),
            color: Rgb::WHITE,
            position: if dtype == DanmakuType::Highlight { Position::Top } else { Position::Scroll },
            reply_to: None,
        }
    }

    /// Checks the record-level invariants against a video duration.
    pub fn check(&self, duration_s: f64) -> Result<(), TrackError> {
        let bad = |reason: &str| TrackError::InvalidDanmaku { id: self.id.clone(), reason: reason.to_string() };
        if !(self.time_s.is_finite() && self.time_s >= 0.0 && self.time_s <= duration_s) {
            return Err(bad("time outside the video"));
        }
        if self.text.trim().is_empty() {
            return Err(bad("empty text"));
        }
        if self.category != self.dtype.category() {
            return Err(bad("category does not match type"));
        }
        if self.dtype == DanmakuType::Highlight && self.position != Position::Top {
            return Err(bad("highlight not pinned to top"));
        }
        if self.dtype == DanmakuType::UserPosted && self.persona_label.is_some() {
            return Err(bad("user-posted danmaku carries a persona"));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("danmaku {id}: {reason}")]
    InvalidDanmaku { id: String, reason: String },
    #[error("track is not sorted by time at danmaku {0}")]
    Unsorted(String),
    #[error("duplicate danmaku id {0}")]
    DuplicateId(String),
    #[error("danmaku {id} replies to {target}, which does not exist or does not precede it")]
    BadReply { id: String, target: String },
}

fn epoch() -> DateTime<Utc> {
    DateTime::<Utc>::UNIX_EPOCH
}

/// All danmaku for one video plus generation metadata.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DanmakuTrack {
    pub video_id: String,
    #[serde(default = "epoch")]
    pub generated_at: DateTime<Utc>,
    #[serde(default)]
    pub model_id: String,
    pub danmaku: Vec<Danmaku>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_snapshot: Option<GenerationConfig>,
}

impl DanmakuTrack {
    pub fn new(video_id: impl Into<String>) -> Self {
        DanmakuTrack {
            video_id: video_id.into(),
            generated_at: epoch(),
            model_id: String::new(),
            danmaku: Vec::new(),
            config_snapshot: None,
        }
    }

    /// Stable sort by time; ties keep their current order.
    pub fn sort(&mut self) {
        self.danmaku.sort_by(|a, b| a.time_s.total_cmp(&b.time_s));
    }

    /// Inserts keeping time order; a record lands after existing ties.
    pub fn insert_sorted(&mut self, d: Danmaku) -> usize {
        let at = self.danmaku.partition_point(|x| x.time_s <= d.time_s);
        self.danmaku.insert(at, d);
        at
    }

    pub fn get(&self, id: &str) -> Option<&Danmaku> {
        self.danmaku.iter().find(|d| d.id == id)
    }

    pub fn len(&self) -> usize {
        self.danmaku.len()
    }

    pub fn is_empty(&self) -> bool {
        self.danmaku.is_empty()
    }

    /// Checks every track invariant: record validity, order, unique ids and reply targets.
    pub fn check(&self, duration_s: f64) -> Result<(), TrackError> {
        let mut times: HashMap<&str, f64> = HashMap::with_capacity(self.danmaku.len());
        let mut prev = f64::NEG_INFINITY;
        for d in &self.danmaku {
            d.check(duration_s)?;
            if d.time_s < prev {
                return Err(TrackError::Unsorted(d.id.clone()));
            }
            prev = d.time_s;
            if times.insert(&d.id, d.time_s).is_some() {
                return Err(TrackError::DuplicateId(d.id.clone()));
            }
        }
        for d in &self.danmaku {
            if let Some(target) = &d.reply_to {
                match times.get(target.as_str()) {
                    Some(&t) if t < d.time_s => {}
                    _ => return Err(TrackError::BadReply { id: d.id.clone(), target: target.clone() }),
                }
            }
        }
        Ok(())
    }
}
