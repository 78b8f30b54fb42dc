//! Lane layout for scrolling danmaku and slot queues for pinned ones.
//!
//! A scrolling item enters at the right edge and crosses the screen in `D`
//! seconds, so its speed is `(W + w) / D`. Its left edge is at
//! `x(t) = W - v (t - enter)`.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use unicode_width::UnicodeWidthChar;

use crate::danmaku::{DanmakuTrack, DanmakuType, Position};

const EPS: f64 = 1e-9;
pub const DELAY_STEP_S: f64 = 0.25;
pub const MAX_DELAY_S: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScreenConfig {
    pub width_px: u32,
    pub lane_count: u32,
    pub lane_height_px: u32,
    pub scroll_duration_s: f64,
    pub pinned_duration_s: f64,
    pub font_size: u32,
    /// Slots per pinned anchor (top and bottom each).
    pub pinned_slots: u32,
}

impl Default for ScreenConfig {
    fn default() -> Self {
        ScreenConfig {
            width_px: 1280,
            lane_count: 12,
            lane_height_px: 32,
            scroll_duration_s: 8.0,
            pinned_duration_s: 4.0,
            font_size: 25,
            pinned_slots: 3,
        }
    }
}

static TAG: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"<[^>]*>").unwrap());

impl ScreenConfig {
    /// Estimated rendered width: 0.6 em per narrow character, 1 em per wide one.
    pub fn text_width_px(&self, text: &str) -> u32 {
        let fs = self.font_size as f64;
        let plain = TAG.replace_all(text, "");
        let w: f64 = plain
            .chars()
            .map(|c| match c.width() {
                Some(2) => fs,
                Some(0) | None => 0.0,
                _ => 0.6 * fs,
            })
            .sum();
        w.ceil() as u32
    }

    pub fn speed(&self, width_px: u32) -> f64 {
        (self.width_px as f64 + width_px as f64) / self.scroll_duration_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Placement {
    Scroll,
    Top,
    Bottom,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LaneAssignment {
    pub danmaku_id: String,
    pub placement: Placement,
    /// Scroll lane or pinned slot index; `None` when dropped from the layout.
    pub lane: Option<u32>,
    pub enter_s: f64,
    pub exit_s: f64,
    pub width_px: u32,
    /// Zero for pinned items.
    pub speed_px_s: f64,
}

impl LaneAssignment {
    pub fn is_dropped(&self) -> bool {
        self.lane.is_none()
    }

    pub fn dwell(&self) -> [f64; 2] {
        [self.enter_s, self.exit_s]
    }
}

/// Two-condition test for scrolling items in the same lane.
///
/// `b` is blocked when `a`'s tail has not cleared the right edge at `b`'s entry,
/// or when `b` would catch up with `a` before `a` leaves the screen.
pub fn collides(a: &LaneAssignment, b: &LaneAssignment, screen: &ScreenConfig) -> bool {
    let (a, b) = if a.enter_s <= b.enter_s { (a, b) } else { (b, a) };
    let w_screen = screen.width_px as f64;
    let d = screen.scroll_duration_s;
    let (va, vb) = (screen.speed(a.width_px), screen.speed(b.width_px));
    let clearance = va * (b.enter_s - a.enter_s);
    let travelled = vb * (a.enter_s + d - b.enter_s);
    !(clearance >= a.width_px as f64 - EPS && travelled <= w_screen + EPS)
}

fn pinned_placement(track: &DanmakuTrack, idx: usize) -> Option<Placement> {
    let d = &track.danmaku[idx];
    match d.position {
        Position::Top => return Some(Placement::Top),
        Position::Bottom => return Some(Placement::Bottom),
        Position::Scroll => {}
    }
    if d.dtype == DanmakuType::Summary {
        let mut summaries = track.danmaku.iter().enumerate().filter(|(_, x)| x.dtype == DanmakuType::Summary);
        let first = summaries.next().map(|(i, _)| i);
        let last = summaries.next_back().map(|(i, _)| i).or(first);
        if Some(idx) == first || Some(idx) == last {
            return Some(Placement::Top);
        }
    }
    None
}

/// Greedy first-fit layout in track order. Items that find no lane within
/// [`MAX_DELAY_S`] stay in the output with `lane: None`.
pub fn layout(track: &DanmakuTrack, screen: &ScreenConfig) -> Vec<LaneAssignment> {
    let mut lanes: Vec<Option<LaneAssignment>> = vec![None; screen.lane_count as usize];
    let mut top: Vec<f64> = vec![f64::NEG_INFINITY; screen.pinned_slots as usize];
    let mut bottom: Vec<f64> = vec![f64::NEG_INFINITY; screen.pinned_slots as usize];
    let steps = (MAX_DELAY_S / DELAY_STEP_S).round() as u32;
    let mut out = Vec::with_capacity(track.len());

    for (idx, d) in track.danmaku.iter().enumerate() {
        let width_px = screen.text_width_px(&d.text);
        match pinned_placement(track, idx) {
            Some(placement) => {
                let slots = if placement == Placement::Top { &mut top } else { &mut bottom };
                let mut placed = None;
                'delay: for k in 0..=steps {
                    let t = d.time_s + k as f64 * DELAY_STEP_S;
                    for (s, busy_until) in slots.iter_mut().enumerate() {
                        if *busy_until <= t + EPS {
                            *busy_until = t + screen.pinned_duration_s;
                            placed = Some((s as u32, t));
                            break 'delay;
                        }
                    }
                }
                let (lane, enter_s) = match placed {
                    Some((s, t)) => (Some(s), t),
                    None => (None, d.time_s),
                };
                out.push(LaneAssignment {
                    danmaku_id: d.id.clone(),
                    placement,
                    lane,
                    enter_s,
                    exit_s: enter_s + screen.pinned_duration_s,
                    width_px,
                    speed_px_s: 0.0,
                });
            }
            None => {
                let mut cand = LaneAssignment {
                    danmaku_id: d.id.clone(),
                    placement: Placement::Scroll,
                    lane: None,
                    enter_s: d.time_s,
                    exit_s: d.time_s + screen.scroll_duration_s,
                    width_px,
                    speed_px_s: screen.speed(width_px),
                };
                'delay: for k in 0..=steps {
                    cand.enter_s = d.time_s + k as f64 * DELAY_STEP_S;
                    for (l, last) in lanes.iter_mut().enumerate() {
                        let free = match last {
                            None => true,
                            // never enter ahead of the lane's current tail
                            Some(prev) => prev.enter_s <= cand.enter_s && !collides(prev, &cand, screen),
                        };
                        if free {
                            cand.lane = Some(l as u32);
                            cand.exit_s = cand.enter_s + screen.scroll_duration_s;
                            *last = Some(cand.clone());
                            break 'delay;
                        }
                    }
                }
                if cand.lane.is_none() {
                    cand.enter_s = d.time_s;
                    cand.exit_s = d.time_s + screen.scroll_duration_s;
                }
                out.push(cand);
            }
        }
    }
    out
}

pub fn schedule_to_json(schedule: &[LaneAssignment]) -> String {
    serde_json::to_string_pretty(schedule).expect("schedule serializes")
}

pub fn schedule_from_json(s: &str) -> Result<Vec<LaneAssignment>, serde_json::Error> {
    serde_json::from_str(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::danmaku::Danmaku;

    fn scroll(enter_s: f64, width_px: u32) -> LaneAssignment {
        let s = ScreenConfig::default();
        LaneAssignment {
            danmaku_id: String::new(),
            placement: Placement::Scroll,
            lane: Some(0),
            enter_s,
            exit_s: enter_s + s.scroll_duration_s,
            width_px,
            speed_px_s: s.speed(width_px),
        }
    }

    #[test]
    fn collision_examples() {
        let s = ScreenConfig::default();
        let a = scroll(0.0, 200);
        assert_eq!(s.speed(200), 185.0);
        assert!(collides(&a, &a, &s));
        assert!(collides(&a, &scroll(1.0, 200), &s));
        assert!(!collides(&a, &scroll(2.0, 200), &s));
    }

    #[test]
    fn width_estimate() {
        let s = ScreenConfig::default();
        assert_eq!(s.text_width_px("abcd"), 60);
        assert_eq!(s.text_width_px("拉丁"), 50);
        assert_eq!(s.text_width_px("<font color=\"red\">ab</font>"), 30);
    }

    #[test]
    fn first_fit() {
        let s = ScreenConfig::default();
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(Danmaku::new("a", Some('A'), 3.0, DanmakuType::Discussion, "same width"));
        let out = layout(&t, &s);
        assert_eq!((out[0].lane, out[0].enter_s), (Some(0), 3.0));
        t.danmaku.push(Danmaku::new("b", Some('B'), 3.5, DanmakuType::Discussion, "same width"));
        let out = layout(&t, &s);
        assert_eq!(out[1].lane, Some(1));
        assert_eq!(out[1].exit_s - out[1].enter_s, 8.0);
    }

    #[test]
    fn pinned_slots_and_summaries() {
        let s = ScreenConfig { pinned_slots: 1, ..Default::default() };
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(Danmaku::new("s1", Some('A'), 0.0, DanmakuType::Summary, "intro"));
        t.danmaku.push(Danmaku::new("h", Some('B'), 1.0, DanmakuType::Highlight, "key"));
        t.danmaku.push(Danmaku::new("s2", Some('A'), 20.0, DanmakuType::Summary, "middle"));
        t.danmaku.push(Danmaku::new("s3", Some('A'), 50.0, DanmakuType::Summary, "outro"));
        let out = layout(&t, &s);
        assert_eq!(out[0].placement, Placement::Top);
        assert_eq!(out[1].placement, Placement::Top);
        assert_eq!(out[1].enter_s, 4.0);
        assert_eq!(out[2].placement, Placement::Scroll);
        assert_eq!(out[3].placement, Placement::Top);
        assert!(out.iter().all(|a| !a.is_dropped()));
    }

    #[test]
    fn saturated_lanes_drop() {
        let s = ScreenConfig { lane_count: 1, ..Default::default() };
        let mut t = DanmakuTrack::new("v");
        for i in 0..4 {
            t.danmaku.push(Danmaku::new(
                format!("d{i}"),
                Some('A'),
                0.0,
                DanmakuType::Discussion,
                "a fairly long comment that is wide",
            ));
        }
        let out = layout(&t, &s);
        assert_eq!(out[0].lane, Some(0));
        assert!(out.iter().any(|a| a.is_dropped()));
        for a in out.iter().filter(|a| !a.is_dropped()) {
            assert!(a.enter_s <= MAX_DELAY_S + EPS);
        }
    }
}
