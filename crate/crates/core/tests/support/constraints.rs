//! Hand-rolled per-minute audit, written against the constraint text rather than
//! the validator.
#![allow(dead_code)]

use std::collections::HashMap;

use comet_core::danmaku::{Category, DanmakuTrack, DanmakuType};

#[derive(Debug, Clone, Default, PartialEq)]
pub struct MinuteCount {
    pub content: usize,
    pub emotion: usize,
    pub highlight: usize,
}

fn strip_tags(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut in_tag = false;
    for c in s.chars() {
        match c {
            '<' => in_tag = true,
            '>' if in_tag => in_tag = false,
            _ if !in_tag => out.push(c),
            _ => {}
        }
    }
    out
}

pub fn words(text: &str) -> usize {
    strip_tags(text).split_whitespace().count()
}

/// Counts for each full minute `[60k, 60k + 60)`.
pub fn full_minutes(track: &DanmakuTrack, duration_s: f64) -> Vec<MinuteCount> {
    let n = (duration_s / 60.0).floor() as usize;
    let mut out = vec![MinuteCount::default(); n];
    for d in &track.danmaku {
        let k = (d.time_s / 60.0).floor() as usize;
        if k >= n {
            continue;
        }
        match d.category {
            Category::Content => out[k].content += 1,
            Category::Emotion => out[k].emotion += 1,
            Category::User => {}
        }
        if d.dtype == DanmakuType::Highlight {
            out[k].highlight += 1;
        }
    }
    out
}

/// Largest gap, counting the stretches before the first and after the last record.
pub fn max_gap(track: &DanmakuTrack, duration_s: f64) -> f64 {
    let mut times: Vec<f64> = track.danmaku.iter().map(|d| d.time_s).collect();
    times.sort_by(f64::total_cmp);
    let mut prev = 0.0;
    let mut worst: f64 = 0.0;
    for t in times {
        worst = worst.max(t - prev);
        prev = t;
    }
    worst.max(duration_s - prev)
}

pub fn max_qa_delay(track: &DanmakuTrack) -> f64 {
    let at: HashMap<&str, f64> = track.danmaku.iter().map(|d| (d.id.as_str(), d.time_s)).collect();
    track
        .danmaku
        .iter()
        .filter(|d| d.dtype == DanmakuType::QA)
        .filter_map(|d| d.reply_to.as_deref().map(|r| d.time_s - at[r]))
        .fold(0.0, f64::max)
}

/// Every violated band, as readable lines. Empty means the track meets them all.
pub fn audit(track: &DanmakuTrack, duration_s: f64) -> Vec<String> {
    let mut bad = Vec::new();
    for (k, m) in full_minutes(track, duration_s).iter().enumerate() {
        if !(15..=25).contains(&m.content) {
            bad.push(format!("minute {k}: {} content", m.content));
        }
        if !(5..=10).contains(&m.emotion) {
            bad.push(format!("minute {k}: {} emotion", m.emotion));
        }
        if m.highlight < 10 {
            bad.push(format!("minute {k}: {} highlights", m.highlight));
        }
    }
    let gap = max_gap(track, duration_s);
    if gap > 30.0 {
        bad.push(format!("gap of {gap} s"));
    }
    for d in &track.danmaku {
        if words(&d.text) >= 12 {
            bad.push(format!("{} has {} words", d.id, words(&d.text)));
        }
    }
    let qa = max_qa_delay(track);
    if qa > 2.0 {
        bad.push(format!("QA answer after {qa} s"));
    }
    bad
}
