//! Constraint checks over a track, deterministic repair, and distribution statistics.
//!
//! Rate rules use fixed one-minute windows anchored at `t = 0`. A final partial
//! window of `f` minutes has its minima scaled by `f` and floored, its maxima
//! scaled and ceiled.

mod repair;
mod stats;

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_segmentation::UnicodeSegmentation;

use crate::danmaku::{Category, Danmaku, DanmakuTrack, DanmakuType};
use crate::prompting::{GenerationConfig, LengthUnit};

pub use repair::{priority_rank, repair, truncate_to_limit};
pub use stats::{track_stats, TrackStats, HUMAN_POSTS_PER_MIN};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rule {
    #[serde(rename = "R1_Length")]
    R1Length,
    #[serde(rename = "R2_MaxGap")]
    R2MaxGap,
    #[serde(rename = "R3_ContentRate")]
    R3ContentRate,
    #[serde(rename = "R4_EmotionRate")]
    R4EmotionRate,
    #[serde(rename = "R5_HighlightMin")]
    R5HighlightMin,
    #[serde(rename = "R6_QaDelay")]
    R6QaDelay,
    #[serde(rename = "R7_Coverage")]
    R7Coverage,
    #[serde(rename = "R8_ReplyIntegrity")]
    R8ReplyIntegrity,
    #[serde(rename = "R9_TimeBounds")]
    R9TimeBounds,
}

impl Rule {
    pub fn code(self) -> &'static str {
        match self {
            Rule::R1Length => "R1_Length",
            Rule::R2MaxGap => "R2_MaxGap",
            Rule::R3ContentRate => "R3_ContentRate",
            Rule::R4EmotionRate => "R4_EmotionRate",
            Rule::R5HighlightMin => "R5_HighlightMin",
            Rule::R6QaDelay => "R6_QaDelay",
            Rule::R7Coverage => "R7_Coverage",
            Rule::R8ReplyIntegrity => "R8_ReplyIntegrity",
            Rule::R9TimeBounds => "R9_TimeBounds",
        }
    }

    /// Rules the repair pass can always clear.
    pub fn is_repairable(self) -> bool {
        matches!(self, Rule::R1Length | Rule::R9TimeBounds)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    /// `[start_s, end_s)`; record-level rules use the record's time for both ends.
    pub window: [f64; 2],
    pub detail: String,
    pub offending_ids: Vec<String>,
}

impl Violation {
    /// Whether this is a per-minute rate violation above the band.
    pub fn is_rate_maximum(&self) -> bool {
        matches!(self.rule, Rule::R3ContentRate | Rule::R4EmotionRate) && self.detail.contains("above")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinuteStats {
    pub minute: usize,
    pub content: usize,
    pub emotion: usize,
    pub highlight: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RepairAction {
    Dropped,
    Moved,
    Truncated,
    Inserted,
    KeptWithWarning,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairEntry {
    pub action: RepairAction,
    pub rule: Rule,
    pub id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
    pub per_minute_stats: Vec<MinuteStats>,
    pub max_gap_s: f64,
    /// Groups of records sharing persona, time and text.
    pub duplicates: Vec<Vec<String>>,
    pub repaired: Vec<RepairEntry>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn count(&self, rule: Rule) -> usize {
        self.violations.iter().filter(|v| v.rule == rule).count()
    }

    pub fn counts(&self) -> BTreeMap<Rule, usize> {
        let mut out = BTreeMap::new();
        for v in &self.violations {
            *out.entry(v.rule).or_default() += 1;
        }
        out
    }

    /// Pretty JSON; key order follows the struct definition.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());

/// Length of a danmaku text in the configured unit, after stripping markup tags.
pub fn length_units(text: &str, unit: LengthUnit) -> usize {
    let plain = TAG.replace_all(text, "");
    match unit {
        LengthUnit::Words => plain.split_whitespace().count(),
        LengthUnit::Graphemes => plain.trim().graphemes(true).count(),
    }
}

/// One fixed rate window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub index: usize,
    pub start_s: f64,
    pub end_s: f64,
    /// Length in minutes; 1.0 for full windows.
    pub fraction: f64,
}

impl Window {
    pub fn is_full(&self) -> bool {
        self.fraction >= 1.0 - 1e-9
    }

    /// `(min, max)` after partial-window scaling.
    pub fn bounds(&self, min: u32, max: u32) -> (usize, usize) {
        let lo = (min as f64 * self.fraction + 1e-9).floor().max(0.0) as usize;
        let hi = (max as f64 * self.fraction - 1e-9).ceil().max(0.0) as usize;
        (lo, hi)
    }
}

pub fn windows(duration_s: f64) -> Vec<Window> {
    if !(duration_s > 0.0) {
        return Vec::new();
    }
    let n = (duration_s / 60.0).ceil().max(1.0) as usize;
    (0..n)
        .map(|k| {
            let start = 60.0 * k as f64;
            let end = (start + 60.0).min(duration_s);
            Window { index: k, start_s: start, end_s: end, fraction: (end - start) / 60.0 }
        })
        .collect()
}

/// Index of the window holding `t`; out-of-range times go to the nearest window.
pub fn window_index(t: f64, duration_s: f64, n_windows: usize) -> usize {
    if n_windows == 0 {
        return 0;
    }
    if !(t > 0.0) {
        return 0;
    }
    if t >= duration_s {
        return n_windows - 1;
    }
    ((t / 60.0).floor() as usize).min(n_windows - 1)
}

pub(crate) fn minute_counts(track: &DanmakuTrack, duration_s: f64, wins: &[Window]) -> Vec<MinuteStats> {
    let mut stats: Vec<MinuteStats> =
        wins.iter().map(|w| MinuteStats { minute: w.index, content: 0, emotion: 0, highlight: 0 }).collect();
    if stats.is_empty() {
        return stats;
    }
    for d in &track.danmaku {
        let s = &mut stats[window_index(d.time_s, duration_s, wins.len())];
        match d.category {
            Category::Content => s.content += 1,
            Category::Emotion => s.emotion += 1,
            Category::User => {}
        }
        if d.dtype == DanmakuType::Highlight {
            s.highlight += 1;
        }
    }
    stats
}

/// Gaps between consecutive danmaku, including `[0, first]` and `[last, duration]`.
/// Each entry is `(from_s, to_s, id before, id after)`.
pub(crate) fn gaps(track: &DanmakuTrack, duration_s: f64) -> Vec<(f64, f64, Option<&str>, Option<&str>)> {
    let mut out = Vec::with_capacity(track.len() + 1);
    let mut prev_t = 0.0;
    let mut prev_id: Option<&str> = None;
    for d in &track.danmaku {
        let t = d.time_s.clamp(0.0, duration_s.max(0.0));
        out.push((prev_t, t, prev_id, Some(d.id.as_str())));
        prev_t = t;
        prev_id = Some(d.id.as_str());
    }
    out.push((prev_t, duration_s.max(prev_t), prev_id, None));
    out
}

fn point(t: f64) -> [f64; 2] {
    [t, t]
}

/// Evaluates all rules. Never fails; an invalid track simply yields violations.
pub fn validate(track: &DanmakuTrack, duration_s: f64, config: &GenerationConfig) -> ValidationReport {
    let mut violations = Vec::new();
    let by_id: HashMap<&str, &Danmaku> = track.danmaku.iter().map(|d| (d.id.as_str(), d)).collect();
    let wins = windows(duration_s);

    // R1
    for d in &track.danmaku {
        let n = length_units(&d.text, config.length_unit);
        if n >= config.max_len_units as usize {
            violations.push(Violation {
                rule: Rule::R1Length,
                window: point(d.time_s),
                detail: format!("length {n} is not below {}", config.max_len_units),
                offending_ids: vec![d.id.clone()],
            });
        }
    }

    // R2
    let all_gaps = gaps(track, duration_s);
    let max_gap_s = all_gaps.iter().map(|g| g.1 - g.0).fold(0.0, f64::max);
    for (a, b, before, after) in &all_gaps {
        if b - a > config.max_gap_s + 1e-9 {
            violations.push(Violation {
                rule: Rule::R2MaxGap,
                window: [*a, *b],
                detail: format!("gap of {:.2}s exceeds {}s", b - a, config.max_gap_s),
                offending_ids: before.iter().chain(after.iter()).map(|s| s.to_string()).collect(),
            });
        }
    }

    // R3, R4, R5
    let stats = minute_counts(track, duration_s, &wins);
    let ids_in = |w: &Window, pred: &dyn Fn(&Danmaku) -> bool| -> Vec<String> {
        track
            .danmaku
            .iter()
            .filter(|d| window_index(d.time_s, duration_s, wins.len()) == w.index && pred(d))
            .map(|d| d.id.clone())
            .collect()
    };
    let rate_rules = [
        (Rule::R3ContentRate, Category::Content, config.content_per_min),
        (Rule::R4EmotionRate, Category::Emotion, config.emotion_per_min),
    ];
    for (rule, cat, band) in rate_rules {
        if !config.category_enabled(cat) {
            continue;
        }
        for (w, s) in wins.iter().zip(&stats) {
            let n = if cat == Category::Content { s.content } else { s.emotion };
            let (lo, hi) = w.bounds(band.min, band.max);
            let (detail, ids) = if n < lo {
                (format!("{n} {cat:?} danmaku in minute {}, below {lo}", w.index), Vec::new())
            } else if n > hi {
                (format!("{n} {cat:?} danmaku in minute {}, above {hi}", w.index), ids_in(w, &|d| d.category == cat))
            } else {
                continue;
            };
            violations.push(Violation { rule, window: [w.start_s, w.end_s], detail, offending_ids: ids });
        }
    }
    if config.is_enabled(DanmakuType::Highlight) {
        for (w, s) in wins.iter().zip(&stats) {
            let (lo, _) = w.bounds(config.highlights_per_min_min, config.highlights_per_min_min);
            if s.highlight < lo {
                violations.push(Violation {
                    rule: Rule::R5HighlightMin,
                    window: [w.start_s, w.end_s],
                    detail: format!("{} highlights in minute {}, below {lo}", s.highlight, w.index),
                    offending_ids: Vec::new(),
                });
            }
        }
    }

    // R6
    for d in track.danmaku.iter().filter(|d| d.dtype == DanmakuType::QA) {
        let Some(target) = d.reply_to.as_deref().and_then(|id| by_id.get(id)) else { continue };
        let delay = d.time_s - target.time_s;
        if delay > config.qa_answer_delay_s + 1e-9 {
            violations.push(Violation {
                rule: Rule::R6QaDelay,
                window: [target.time_s, d.time_s],
                detail: format!("answer arrives {:.2}s after the question, limit {}s", delay, config.qa_answer_delay_s),
                offending_ids: vec![d.id.clone()],
            });
        }
    }

    // R7
    for (w, s) in wins.iter().zip(&stats).filter(|(w, _)| w.is_full()) {
        let mut missing = Vec::new();
        if config.category_enabled(Category::Content) && s.content == 0 {
            missing.push("content");
        }
        if config.category_enabled(Category::Emotion) && s.emotion == 0 {
            missing.push("emotion");
        }
        if !missing.is_empty() {
            violations.push(Violation {
                rule: Rule::R7Coverage,
                window: [w.start_s, w.end_s],
                detail: format!("minute {} has no {} danmaku", w.index, missing.join(" or ")),
                offending_ids: Vec::new(),
            });
        }
    }

    // R8
    for d in &track.danmaku {
        let Some(target) = d.reply_to.as_deref() else { continue };
        match by_id.get(target) {
            Some(t) if t.time_s < d.time_s => {}
            Some(_) => violations.push(Violation {
                rule: Rule::R8ReplyIntegrity,
                window: point(d.time_s),
                detail: format!("reply target {target} does not precede it"),
                offending_ids: vec![d.id.clone()],
            }),
            None => violations.push(Violation {
                rule: Rule::R8ReplyIntegrity,
                window: point(d.time_s),
                detail: format!("reply target {target} does not exist"),
                offending_ids: vec![d.id.clone()],
            }),
        }
    }

    // R9
    for d in &track.danmaku {
        if !(d.time_s >= 0.0 && d.time_s <= duration_s) {
            violations.push(Violation {
                rule: Rule::R9TimeBounds,
                window: point(d.time_s),
                detail: format!("time {} outside [0, {duration_s}]", d.time_s),
                offending_ids: vec![d.id.clone()],
            });
        }
    }

    let mut groups: BTreeMap<(Option<char>, u64, &str), Vec<String>> = BTreeMap::new();
    for d in &track.danmaku {
        groups.entry((d.persona_label, d.time_s.to_bits(), d.text.as_str())).or_default().push(d.id.clone());
    }
    let mut duplicates: Vec<Vec<String>> = groups.into_values().filter(|g| g.len() > 1).collect();
    duplicates.sort();

    ValidationReport { violations, per_minute_stats: stats, max_gap_s, duplicates, repaired: Vec::new() }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(id: &str, t: f64, dtype: DanmakuType, text: &str) -> Danmaku {
        Danmaku::new(id, Some('A'), t, dtype, text)
    }

    #[test]
    fn empty_track_on_a_minute() {
        let r = validate(&DanmakuTrack::new("v"), 60.0, &GenerationConfig::default());
        assert_eq!(r.count(Rule::R2MaxGap), 1);
        assert_eq!(r.count(Rule::R7Coverage), 1);
        assert_eq!(r.max_gap_s, 60.0);
        assert!(!r.is_clean());
    }

    #[test]
    fn length_units_strip_tags() {
        assert_eq!(length_units("<font color=\"red\">Latin consonants</font>", LengthUnit::Words), 2);
        assert_eq!(length_units("héllo 👍🏽", LengthUnit::Graphemes), 7);
        assert_eq!(length_units("  ", LengthUnit::Words), 0);
    }

    #[test]
    fn partial_window_scaling() {
        let w = windows(150.0);
        assert_eq!(w.len(), 3);
        assert!(w[0].is_full() && w[1].is_full() && !w[2].is_full());
        assert_eq!(w[2].bounds(15, 25), (7, 13));
        assert_eq!(w[2].bounds(5, 10), (2, 5));
        assert_eq!(windows(120.0).len(), 2);
        assert_eq!(window_index(120.0, 120.0, 2), 1);
    }

    #[test]
    fn qa_delay_and_reply_integrity() {
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(rec("q", 10.0, DanmakuType::QA, "why?"));
        let mut a = rec("a", 13.0, DanmakuType::QA, "because");
        a.reply_to = Some("q".into());
        t.danmaku.push(a);
        let mut b = rec("b", 14.0, DanmakuType::Discussion, "ghost");
        b.reply_to = Some("zzz".into());
        t.danmaku.push(b);
        let r = validate(&t, 20.0, &GenerationConfig::default());
        assert_eq!(r.count(Rule::R6QaDelay), 1);
        assert_eq!(r.count(Rule::R8ReplyIntegrity), 1);
        t.danmaku[1].time_s = 12.0;
        let r = validate(&t, 20.0, &GenerationConfig::default());
        assert_eq!(r.count(Rule::R6QaDelay), 0);
    }

    #[test]
    fn time_bounds_and_length() {
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(rec(
            "x",
            25.0,
            DanmakuType::Discussion,
            "one two three four five six seven eight nine ten eleven twelve",
        ));
        let r = validate(&t, 20.0, &GenerationConfig::default());
        assert_eq!(r.count(Rule::R1Length), 1);
        assert_eq!(r.count(Rule::R9TimeBounds), 1);
    }

    #[test]
    fn disabled_categories_are_not_rated() {
        let mut cfg = GenerationConfig::default();
        cfg.enabled_types.retain(|t| t.category() == Category::Emotion);
        let mut t = DanmakuTrack::new("v");
        for i in 0..6 {
            t.danmaku.push(rec(&format!("e{i}"), 5.0 + 10.0 * i as f64, DanmakuType::EmotionExpression, "yay"));
        }
        let r = validate(&t, 60.0, &cfg);
        assert!(r.is_clean(), "{:?}", r.violations);
    }

    #[test]
    fn duplicates_are_reported() {
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(rec("a", 5.0, DanmakuType::Discussion, "same"));
        t.danmaku.push(rec("b", 5.0, DanmakuType::QA, "same"));
        let r = validate(&t, 10.0, &GenerationConfig::default());
        assert_eq!(r.duplicates, vec![vec!["a".to_string(), "b".to_string()]]);
    }
}
