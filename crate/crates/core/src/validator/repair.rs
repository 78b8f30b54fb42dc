use std::collections::{HashMap, HashSet};

use unicode_segmentation::UnicodeSegmentation;

use super::{
    gaps, length_units, minute_counts, validate, window_index, windows, RepairAction, RepairEntry, Rule,
    ValidationReport,
};
use crate::danmaku::{Category, Danmaku, DanmakuTrack, DanmakuType};
use crate::prompting::{GenerationConfig, LengthUnit};

/// Drop priority, 0 = kept longest.
pub fn priority_rank(t: DanmakuType) -> u8 {
    match t {
        DanmakuType::Highlight => 0,
        DanmakuType::QA => 1,
        DanmakuType::Summary => 2,
        DanmakuType::Discussion => 3,
        DanmakuType::Compliment => 4,
        DanmakuType::Encouragement => 5,
        DanmakuType::EmotionExpression => 6,
        DanmakuType::UserPosted => 7,
    }
}

const ELLIPSIS: &str = "…";

/// Cuts `text` so that it measures `limit - 1` units, ending in an ellipsis.
/// Returns `None` when the text already fits or cannot be made to fit.
pub fn truncate_to_limit(text: &str, limit: u32, unit: LengthUnit) -> Option<String> {
    let limit = limit as usize;
    if length_units(text, unit) < limit || limit < 2 {
        return None;
    }
    Some(match unit {
        LengthUnit::Words => {
            let kept: Vec<&str> = text.split_whitespace().take(limit - 1).collect();
            format!("{}{ELLIPSIS}", kept.join(" "))
        }
        LengthUnit::Graphemes => {
            let kept: String = text.trim().graphemes(true).take(limit - 2).collect();
            format!("{}{ELLIPSIS}", kept.trim_end())
        }
    })
}

fn max_gap_without(track: &DanmakuTrack, skip: &HashSet<String>, idx: usize, duration_s: f64) -> f64 {
    let prev = track.danmaku[..idx]
        .iter()
        .rev()
        .find(|d| !skip.contains(&d.id))
        .map_or(0.0, |d| d.time_s.clamp(0.0, duration_s));
    let next = track.danmaku[idx + 1..]
        .iter()
        .find(|d| !skip.contains(&d.id))
        .map_or(duration_s, |d| d.time_s.clamp(0.0, duration_s));
    next - prev
}

type Matcher = Box<dyn Fn(&Danmaku) -> bool>;

/// Deterministic repair pass followed by one re-validation.
///
/// Over-long texts are truncated, out-of-range times clamped, per-minute surpluses
/// dropped lowest priority first (later first within a priority). Deficits and gaps
/// are filled from `pool` when one is given; anything still failing is reported as
/// [`RepairAction::KeptWithWarning`].
pub fn repair(
    track: &DanmakuTrack,
    report: &ValidationReport,
    duration_s: f64,
    config: &GenerationConfig,
    pool: Option<&[Danmaku]>,
) -> (DanmakuTrack, ValidationReport) {
    let mut out = track.clone();
    let mut log: Vec<RepairEntry> = Vec::new();

    // R1
    let long: HashSet<&str> = report
        .violations
        .iter()
        .filter(|v| v.rule == Rule::R1Length)
        .flat_map(|v| v.offending_ids.iter().map(String::as_str))
        .collect();
    for d in out.danmaku.iter_mut().filter(|d| long.contains(d.id.as_str())) {
        if let Some(cut) = truncate_to_limit(&d.text, config.max_len_units, config.length_unit) {
            d.text = cut;
            log.push(RepairEntry { action: RepairAction::Truncated, rule: Rule::R1Length, id: Some(d.id.clone()) });
        }
    }

    // R9
    if duration_s > 0.0 {
        for d in out.danmaku.iter_mut() {
            if !(d.time_s >= 0.0 && d.time_s <= duration_s) {
                d.time_s = if d.time_s.is_nan() { 0.0 } else { d.time_s.clamp(0.0, duration_s) };
                log.push(RepairEntry { action: RepairAction::Moved, rule: Rule::R9TimeBounds, id: Some(d.id.clone()) });
            }
        }
        out.sort();
    }

    drop_surplus(&mut out, duration_s, config, &mut log);

    if let Some(pool) = pool {
        fill_from_pool(&mut out, duration_s, config, pool, &mut log);
    }

    let mut after = validate(&out, duration_s, config);
    for v in &after.violations {
        if v.offending_ids.is_empty() {
            log.push(RepairEntry { action: RepairAction::KeptWithWarning, rule: v.rule, id: None });
        } else {
            for id in &v.offending_ids {
                log.push(RepairEntry { action: RepairAction::KeptWithWarning, rule: v.rule, id: Some(id.clone()) });
            }
        }
    }
    after.repaired = log;
    (out, after)
}

fn drop_surplus(track: &mut DanmakuTrack, duration_s: f64, config: &GenerationConfig, log: &mut Vec<RepairEntry>) {
    let wins = windows(duration_s);
    if wins.is_empty() {
        return;
    }
    let mut dropped: HashSet<String> = HashSet::new();
    let mut replies: HashMap<&str, Vec<&str>> = HashMap::new();
    for d in &track.danmaku {
        if let Some(t) = d.reply_to.as_deref() {
            replies.entry(t).or_default().push(d.id.as_str());
        }
    }

    for (rule, cat, band) in [
        (Rule::R3ContentRate, Category::Content, config.content_per_min),
        (Rule::R4EmotionRate, Category::Emotion, config.emotion_per_min),
    ] {
        if !config.category_enabled(cat) {
            continue;
        }
        for w in &wins {
            let (_, hi) = w.bounds(band.min, band.max);
            let (hl_min, _) = w.bounds(config.highlights_per_min_min, config.highlights_per_min_min);
            let in_window: Vec<usize> = (0..track.danmaku.len())
                .filter(|&i| {
                    let d = &track.danmaku[i];
                    d.category == cat
                        && !dropped.contains(&d.id)
                        && window_index(d.time_s, duration_s, wins.len()) == w.index
                })
                .collect();
            let mut count = in_window.len();
            if count <= hi {
                continue;
            }
            let mut highlights =
                in_window.iter().filter(|&&i| track.danmaku[i].dtype == DanmakuType::Highlight).count();
            let mut candidates = in_window.clone();
            candidates.sort_by(|&a, &b| {
                let (x, y) = (&track.danmaku[a], &track.danmaku[b]);
                priority_rank(y.dtype)
                    .cmp(&priority_rank(x.dtype))
                    .then_with(|| y.time_s.total_cmp(&x.time_s))
                    .then_with(|| b.cmp(&a))
            });
            // first pass keeps the highlight minimum and the gap bound; the second
            // gives them up so that the maximum always holds
            for strict in [true, false] {
                for &i in &candidates {
                    if count <= hi {
                        break;
                    }
                    let d = &track.danmaku[i];
                    if dropped.contains(&d.id) {
                        continue;
                    }
                    let answered =
                        replies.get(d.id.as_str()).is_some_and(|rs| rs.iter().any(|r| !dropped.contains(*r)));
                    if answered {
                        continue;
                    }
                    let is_highlight = d.dtype == DanmakuType::Highlight;
                    if strict {
                        if is_highlight && config.is_enabled(DanmakuType::Highlight) && highlights <= hl_min {
                            continue;
                        }
                        if max_gap_without(track, &dropped, i, duration_s) > config.max_gap_s {
                            continue;
                        }
                    }
                    dropped.insert(d.id.clone());
                    log.push(RepairEntry { action: RepairAction::Dropped, rule, id: Some(d.id.clone()) });
                    count -= 1;
                    if is_highlight {
                        highlights -= 1;
                    }
                }
            }
        }
    }
    track.danmaku.retain(|d| !dropped.contains(&d.id));
}

fn fill_from_pool(
    track: &mut DanmakuTrack,
    duration_s: f64,
    config: &GenerationConfig,
    pool: &[Danmaku],
    log: &mut Vec<RepairEntry>,
) {
    let wins = windows(duration_s);
    if wins.is_empty() {
        return;
    }
    let mut present: HashSet<String> = track.danmaku.iter().map(|d| d.id.clone()).collect();

    // usable pool records: in range, short enough, and not dangling replies
    let mut candidates: Vec<&Danmaku> = pool
        .iter()
        .filter(|p| {
            !present.contains(&p.id)
                && p.time_s >= 0.0
                && p.time_s <= duration_s
                && p.dtype != DanmakuType::UserPosted
                && p.check(duration_s).is_ok()
                && length_units(&p.text, config.length_unit) < config.max_len_units as usize
                && config.is_enabled(p.dtype)
        })
        .collect();
    candidates.sort_by(|a, b| {
        priority_rank(a.dtype)
            .cmp(&priority_rank(b.dtype))
            .then_with(|| a.time_s.total_cmp(&b.time_s))
            .then_with(|| a.id.cmp(&b.id))
    });

    let reply_ok = |p: &Danmaku, track: &DanmakuTrack| match p.reply_to.as_deref() {
        None => true,
        Some(t) => track.get(t).is_some_and(|target| {
            target.time_s < p.time_s
                && (p.dtype != DanmakuType::QA || p.time_s - target.time_s <= config.qa_answer_delay_s + 1e-9)
        }),
    };

    let insert = |track: &mut DanmakuTrack,
                  p: &Danmaku,
                  rule: Rule,
                  present: &mut HashSet<String>,
                  log: &mut Vec<RepairEntry>| {
        present.insert(p.id.clone());
        track.insert_sorted(p.clone());
        log.push(RepairEntry { action: RepairAction::Inserted, rule, id: Some(p.id.clone()) });
    };

    // per-minute deficits: highlights first, then category minima and coverage
    for w in &wins {
        let idx = w.index;
        loop {
            let stats = minute_counts(track, duration_s, &wins)[idx];
            let (c_lo, c_hi) = w.bounds(config.content_per_min.min, config.content_per_min.max);
            let (e_lo, e_hi) = w.bounds(config.emotion_per_min.min, config.emotion_per_min.max);
            let (h_lo, _) = w.bounds(config.highlights_per_min_min, config.highlights_per_min_min);
            let need_cover = w.is_full();
            let want: Option<(Rule, Matcher)> =
                if config.is_enabled(DanmakuType::Highlight) && stats.highlight < h_lo && stats.content < c_hi {
                    Some((Rule::R5HighlightMin, Box::new(|d: &Danmaku| d.dtype == DanmakuType::Highlight)))
                } else if config.category_enabled(Category::Content)
                    && (stats.content < c_lo || need_cover && stats.content == 0)
                    && stats.content < c_hi
                {
                    Some((Rule::R3ContentRate, Box::new(|d: &Danmaku| d.category == Category::Content)))
                } else if config.category_enabled(Category::Emotion)
                    && (stats.emotion < e_lo || need_cover && stats.emotion == 0)
                    && stats.emotion < e_hi
                {
                    Some((Rule::R4EmotionRate, Box::new(|d: &Danmaku| d.category == Category::Emotion)))
                } else {
                    None
                };
            let Some((rule, pred)) = want else { break };
            let pick = candidates.iter().position(|p| {
                !present.contains(&p.id)
                    && window_index(p.time_s, duration_s, wins.len()) == idx
                    && pred(p)
                    && reply_ok(p, track)
            });
            let Some(pos) = pick else { break };
            let p = candidates.remove(pos);
            insert(track, p, rule, &mut present, log);
        }
    }

    // remaining long gaps: take the pool record nearest the middle of the gap
    loop {
        let wide = gaps(track, duration_s)
            .into_iter()
            .map(|(a, b, _, _)| (a, b))
            .find(|(a, b)| b - a > config.max_gap_s + 1e-9);
        let Some((a, b)) = wide else { break };
        let mid = (a + b) / 2.0;
        let stats = minute_counts(track, duration_s, &wins);
        let fits = |p: &Danmaku| {
            let w = &wins[window_index(p.time_s, duration_s, wins.len())];
            let s = stats[w.index];
            match p.category {
                Category::Content => s.content < w.bounds(config.content_per_min.min, config.content_per_min.max).1,
                Category::Emotion => s.emotion < w.bounds(config.emotion_per_min.min, config.emotion_per_min.max).1,
                Category::User => false,
            }
        };
        let best = candidates
            .iter()
            .enumerate()
            .filter(|(_, p)| !present.contains(&p.id) && p.time_s > a && p.time_s < b && fits(p) && reply_ok(p, track))
            .min_by(|(_, x), (_, y)| (x.time_s - mid).abs().total_cmp(&(y.time_s - mid).abs()))
            .map(|(i, _)| i);
        let Some(i) = best else { break };
        let p = candidates.remove(i);
        insert(track, p, Rule::R2MaxGap, &mut present, log);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::validator::validate;

    fn rec(id: &str, persona: char, t: f64, dtype: DanmakuType, text: &str) -> Danmaku {
        Danmaku::new(id, Some(persona), t, dtype, text)
    }

    #[test]
    fn thirteen_words_become_eleven_plus_ellipsis() {
        let text = "one two three four five six seven eight nine ten eleven twelve thirteen";
        let cut = truncate_to_limit(text, 12, LengthUnit::Words).unwrap();
        assert_eq!(cut, "one two three four five six seven eight nine ten eleven…");
        assert_eq!(length_units(&cut, LengthUnit::Words), 11);
        assert_eq!(truncate_to_limit("short", 12, LengthUnit::Words), None);
        let g = truncate_to_limit("abcdefghijklmnop", 12, LengthUnit::Graphemes).unwrap();
        assert_eq!(g, "abcdefghij…");
        assert_eq!(length_units(&g, LengthUnit::Graphemes), 11);

        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(rec("x", 'A', 1.0, DanmakuType::Discussion, text));
        let cfg = GenerationConfig::default();
        let report = validate(&t, 10.0, &cfg);
        assert_eq!(report.count(Rule::R1Length), 1);
        let (fixed, after) = repair(&t, &report, 10.0, &cfg, None);
        assert_eq!(after.count(Rule::R1Length), 0);
        assert_eq!(fixed.danmaku[0].text, cut);
        assert!(after.repaired.contains(&RepairEntry {
            action: RepairAction::Truncated,
            rule: Rule::R1Length,
            id: Some("x".into())
        }));
    }

    #[test]
    fn surplus_content_is_dropped_by_priority() {
        // one minute, 30 content records at 2 s spacing:
        // 10 highlights, 6 QA, 5 summaries, 9 discussions; plus 6 emotion records
        let mut t = DanmakuTrack::new("v");
        let kinds: Vec<DanmakuType> = std::iter::repeat_n(DanmakuType::Highlight, 10)
            .chain(std::iter::repeat_n(DanmakuType::QA, 6))
            .chain(std::iter::repeat_n(DanmakuType::Summary, 5))
            .chain(std::iter::repeat_n(DanmakuType::Discussion, 9))
            .collect();
        // interleave types in time so the dropped set is not just "the tail"
        let order = [
            0, 10, 16, 21, 1, 11, 17, 22, 2, 12, 18, 23, 3, 13, 19, 24, 4, 14, 20, 25, 5, 15, 26, 6, 27, 7, 28, 8, 29,
            9,
        ];
        for (slot, &k) in order.iter().enumerate() {
            let d = rec(&format!("c{k:02}"), 'A', slot as f64 * 2.0, kinds[k], "note");
            t.danmaku.push(d);
        }
        for i in 0..6 {
            t.danmaku.push(rec(&format!("e{i}"), 'B', 5.0 + 9.0 * i as f64, DanmakuType::Compliment, "nice"));
        }
        t.sort();
        let cfg = GenerationConfig::default();
        let report = validate(&t, 60.0, &cfg);
        assert_eq!(report.count(Rule::R3ContentRate), 1);

        // by hand: lowest priority is Discussion (c21..c29); the five latest of those go.
        // slots: c25 → 19, c26 → 22, c27 → 24, c28 → 26, c29 → 28
        let expected: Vec<String> = ["c29", "c28", "c27", "c26", "c25"].iter().map(|s| s.to_string()).collect();
        let (fixed, after) = repair(&t, &report, 60.0, &cfg, None);
        let dropped: Vec<String> = after
            .repaired
            .iter()
            .filter(|e| e.action == RepairAction::Dropped)
            .map(|e| e.id.clone().unwrap())
            .collect();
        assert_eq!(dropped, expected);
        assert_eq!(fixed.len(), 31);
        assert_eq!(after.count(Rule::R3ContentRate), 0);
    }

    #[test]
    fn sparse_track_without_pool_keeps_warnings() {
        let mut t = DanmakuTrack::new("v");
        for i in 0..4 {
            t.danmaku.push(rec(&format!("c{i}"), 'A', 10.0 * i as f64 + 1.0, DanmakuType::Discussion, "hmm"));
        }
        let cfg = GenerationConfig::default();
        let report = validate(&t, 60.0, &cfg);
        let (fixed, after) = repair(&t, &report, 60.0, &cfg, None);
        assert_eq!(fixed, t);
        assert!(after.count(Rule::R3ContentRate) > 0);
        assert!(after
            .repaired
            .iter()
            .any(|e| e.action == RepairAction::KeptWithWarning && e.rule == Rule::R3ContentRate));
        assert!(after.repaired.iter().all(|e| e.action == RepairAction::KeptWithWarning));
    }

    #[test]
    fn pool_fills_deficits() {
        let cfg = GenerationConfig {
            content_per_min: crate::prompting::IntRange::new(2, 5),
            emotion_per_min: crate::prompting::IntRange::new(1, 3),
            highlights_per_min_min: 1,
            ..Default::default()
        };
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(rec("c0", 'A', 5.0, DanmakuType::Discussion, "hmm"));
        t.danmaku.push(rec("e0", 'B', 28.0, DanmakuType::Compliment, "nice"));
        let pool = vec![
            rec("p1", 'C', 20.0, DanmakuType::Highlight, "key idea"),
            rec("p2", 'D', 50.0, DanmakuType::Summary, "recap"),
            rec("p3", 'E', 40.0, DanmakuType::EmotionExpression, "wow"),
        ];
        let report = validate(&t, 60.0, &cfg);
        assert!(!report.is_clean());
        let (fixed, after) = repair(&t, &report, 60.0, &cfg, Some(&pool));
        assert!(after.is_clean(), "{:?}", after.violations);
        assert_eq!(fixed.len(), 4);
        assert!(fixed.check(60.0).is_ok());
    }

    #[test]
    fn clamps_out_of_range_times() {
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(rec("a", 'A', 3.0, DanmakuType::Discussion, "x"));
        t.danmaku.push(rec("b", 'A', 12.0, DanmakuType::Discussion, "y"));
        let cfg = GenerationConfig::default();
        let report = validate(&t, 10.0, &cfg);
        let (fixed, after) = repair(&t, &report, 10.0, &cfg, None);
        assert_eq!(fixed.danmaku[1].time_s, 10.0);
        assert_eq!(after.count(Rule::R9TimeBounds), 0);
    }
}
