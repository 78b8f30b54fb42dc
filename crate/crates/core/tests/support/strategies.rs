//! Generators for valid values of each serialized form.
#![allow(dead_code)]

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use comet_core::danmaku::{Danmaku, DanmakuTrack, DanmakuType, Position, Rgb};
use comet_core::persona::{Persona, PersonaSet};
use comet_core::prompting::{GenerationConfig, IntRange, LengthUnit};
use comet_core::scheduler::{LaneAssignment, Placement, ScreenConfig};
use proptest::prelude::*;

pub const LABELS: [char; 6] = ['A', 'B', 'C', 'D', 'E', 'F'];

fn word() -> impl Strategy<Value = String> {
    "[A-Za-z0-9'.,!?&;:#|@éü中文😊👍-]{1,8}"
}

/// Space-separated words, starting with a letter so it never reads as a mention.
pub fn plain_text() -> impl Strategy<Value = String> {
    ("[A-Za-z]", prop::collection::vec(word(), 0..10)).prop_map(|(head, rest)| {
        let mut s = head;
        for w in rest {
            s.push(' ');
            s.push_str(&w);
        }
        s
    })
}

/// Arbitrary printable text, markup characters included.
pub fn any_text() -> impl Strategy<Value = String> {
    "[^\\p{Cc}\\s][^\\p{Cc}]{0,40}[^\\p{Cc}\\s]|[^\\p{Cc}\\s]"
}

pub fn rgb() -> impl Strategy<Value = Rgb> {
    prop_oneof![Just(Rgb::WHITE), Just(Rgb::RED), Just(Rgb::BLUE), (0u32..=0xFF_FF_FF).prop_map(Rgb)]
}

pub fn persona_set() -> impl Strategy<Value = PersonaSet> {
    let field = || "[A-Za-z][A-Za-z ,.'\"\\\\/中文-]{0,30}[A-Za-z.]";
    prop::collection::vec((10u32..=100, field(), field(), field(), field(), field()), 6).prop_map(|ps| PersonaSet {
        video_id: "prop-video".into(),
        personas: ps
            .into_iter()
            .zip(LABELS)
            .map(|((age, region, personality, style, habits, reasons), label)| Persona {
                label,
                age,
                region,
                personality,
                danmaku_sending_style: style,
                learning_habits: habits,
                reasons_for_watching: reasons,
            })
            .collect(),
    })
}

pub fn dtype() -> impl Strategy<Value = DanmakuType> {
    let mut all = DanmakuType::GENERATED.to_vec();
    all.push(DanmakuType::UserPosted);
    prop::sample::select(all)
}

/// Centisecond-quantized time in `[0, max_s]`.
pub fn centis(max_s: f64) -> impl Strategy<Value = f64> {
    (0u64..=(max_s * 100.0) as u64).prop_map(|c| c as f64 / 100.0)
}

fn generation_config() -> impl Strategy<Value = GenerationConfig> {
    (
        1u32..40,
        (1u32..600).prop_map(|x| x as f64 / 10.0),
        (0u32..30, 0u32..30),
        (0u32..30, 0u32..30),
        0u32..20,
        prop::collection::btree_set(prop::sample::select(DanmakuType::GENERATED.to_vec()), 1..7),
        prop::bool::ANY,
    )
        .prop_map(|(len, gap, (c1, c2), (e1, e2), hl, types, graphemes)| GenerationConfig {
            max_len_units: len,
            max_gap_s: gap,
            content_per_min: IntRange::new(c1.min(c2), c1.max(c2)),
            emotion_per_min: IntRange::new(e1.min(e2), e1.max(e2)),
            highlights_per_min_min: hl,
            qa_answer_delay_s: 2.0,
            enabled_types: types.into_iter().collect::<BTreeSet<_>>(),
            length_unit: if graphemes { LengthUnit::Graphemes } else { LengthUnit::Words },
        })
}

fn record_fields(
    max_s: f64,
) -> impl Strategy<Value = (DanmakuType, f64, String, Rgb, Position, usize, Option<prop::sample::Index>)> {
    (
        dtype(),
        centis(max_s),
        any_text(),
        rgb(),
        prop::sample::select(vec![Position::Scroll, Position::Top, Position::Bottom]),
        0usize..6,
        prop::option::weighted(0.3, any::<prop::sample::Index>()),
    )
}

/// Any track that passes `DanmakuTrack::check`, with arbitrary metadata.
pub fn track_json() -> impl Strategy<Value = (DanmakuTrack, f64)> {
    (
        prop::collection::vec(record_fields(600.0), 0..40),
        0i64..4_000_000_000,
        0u32..1_000_000_000,
        "[a-z0-9-]{0,12}",
        prop::option::of(generation_config()),
        prop::sample::select(vec![0.5f64, 1.0, 0.25]),
    )
        .prop_map(|(recs, secs, nanos, model, cfg, jitter)| {
            let mut t = DanmakuTrack::new("prop-video");
            t.generated_at = DateTime::<Utc>::from_timestamp(secs, nanos).unwrap();
            t.model_id = model;
            t.config_snapshot = cfg;
            let mut recs = recs;
            recs.sort_by(|a, b| a.1.total_cmp(&b.1));
            for (i, (ty, time, text, color, pos, who, reply)) in recs.into_iter().enumerate() {
                // unquantized times exercise the float round trip
                let time = (time + jitter * (i as f64).sin().abs() / 7.0).min(600.0);
                let persona = (ty != DanmakuType::UserPosted).then_some(LABELS[who]);
                let mut d = Danmaku::new(format!("r{i}"), persona, time, ty, text);
                d.color = color;
                d.position = if ty == DanmakuType::Highlight { Position::Top } else { pos };
                let earlier: Vec<&Danmaku> = t.danmaku.iter().filter(|x| x.time_s < d.time_s).collect();
                if let (Some(ix), false) = (reply, earlier.is_empty()) {
                    d.reply_to = Some(ix.get(&earlier).id.clone());
                }
                t.danmaku.push(d);
            }
            t.sort();
            (t, 600.0)
        })
}

fn section_rank(d: &Danmaku) -> usize {
    match d.dtype {
        DanmakuType::UserPosted => {
            DanmakuType::GENERATED.len()
                + match d.position {
                    Position::Scroll => 0,
                    Position::Top => 1,
                    Position::Bottom => 2,
                }
        }
        t => DanmakuType::GENERATED.iter().position(|g| *g == t).unwrap(),
    }
}

/// Tracks the Markdown grammar can carry: parser-assigned ids, type-determined
/// positions for generated records, and replies that resolve to the record
/// the `@X` rule would pick.
pub fn markdown_track() -> impl Strategy<Value = DanmakuTrack> {
    prop::collection::vec(
        (
            dtype(),
            centis(300.0),
            plain_text(),
            rgb(),
            prop::sample::select(vec![Position::Scroll, Position::Top, Position::Bottom]),
            0usize..6,
            prop::option::weighted(0.35, any::<prop::sample::Index>()),
        ),
        1..40,
    )
    .prop_map(|recs| {
        let mut ds: Vec<(Danmaku, Option<prop::sample::Index>)> = recs
            .into_iter()
            .map(|(ty, time, text, color, pos, who, reply)| {
                let persona = (ty != DanmakuType::UserPosted).then_some(LABELS[who]);
                let mut d = Danmaku::new(String::new(), persona, time, ty, text);
                d.color = color;
                d.position = match ty {
                    DanmakuType::Highlight => Position::Top,
                    DanmakuType::UserPosted => pos,
                    _ => Position::Scroll,
                };
                (d, reply)
            })
            .collect();
        ds.sort_by(|a, b| a.0.time_s.total_cmp(&b.0.time_s).then(section_rank(&a.0).cmp(&section_rank(&b.0))));
        for (i, (d, _)) in ds.iter_mut().enumerate() {
            d.id = format!("d{:04}", i + 1);
        }
        // line order of the rendered document: section, then track order
        let line = |i: usize, d: &Danmaku| (section_rank(d), i);
        for i in 0..ds.len() {
            let Some(pick) = ds[i].1 else { continue };
            let me = ds[i].0.clone();
            let mut speakers: Vec<char> = ds
                .iter()
                .filter(|(c, _)| c.time_s < me.time_s && me.time_s - c.time_s <= 30.0)
                .filter_map(|(c, _)| c.persona_label)
                .collect();
            speakers.sort();
            speakers.dedup();
            if speakers.is_empty() {
                continue;
            }
            let who = *pick.get(&speakers);
            let target = ds
                .iter()
                .enumerate()
                .filter(|(_, (c, _))| {
                    c.persona_label == Some(who) && c.time_s < me.time_s && me.time_s - c.time_s <= 30.0
                })
                .max_by(|(i, (x, _)), (j, (y, _))| {
                    x.time_s
                        .total_cmp(&y.time_s)
                        .then((x.dtype == me.dtype).cmp(&(y.dtype == me.dtype)))
                        .then(line(*i, x).cmp(&line(*j, y)))
                })
                .map(|(_, (c, _))| c.id.clone());
            ds[i].0.reply_to = target;
        }
        let mut t = DanmakuTrack::new("prop-video");
        t.danmaku = ds.into_iter().map(|(d, _)| d).collect();
        t
    })
}

/// Tracks the interop XML can carry: persona-less user posts with centisecond
/// times and ids in time order.
pub fn xml_track() -> impl Strategy<Value = DanmakuTrack> {
    prop::collection::vec(
        (
            centis(3600.0),
            any_text(),
            (0u32..=0xFF_FF_FF).prop_map(Rgb),
            prop::sample::select(vec![Position::Scroll, Position::Top, Position::Bottom]),
        ),
        0..40,
    )
    .prop_map(|recs| {
        let mut t = DanmakuTrack::new("prop-video");
        for (time, text, color, pos) in recs {
            let mut d = Danmaku::new(String::new(), None, time, DanmakuType::UserPosted, text);
            d.color = color;
            d.position = pos;
            t.danmaku.push(d);
        }
        t.sort();
        for (i, d) in t.danmaku.iter_mut().enumerate() {
            d.id = format!("d{:04}", i + 1);
        }
        t
    })
}

/// A track of `n` generated records over `span_s` seconds for the layout tests.
pub fn layout_track(n: usize, span_s: f64) -> impl Strategy<Value = DanmakuTrack> {
    prop::collection::vec((dtype(), centis(span_s), plain_text(), prop::bool::weighted(0.1)), n).prop_map(|recs| {
        let mut t = DanmakuTrack::new("layout");
        for (i, (ty, time, text, bottom)) in recs.into_iter().enumerate() {
            let persona = (ty != DanmakuType::UserPosted).then_some('A');
            let mut d = Danmaku::new(format!("x{i:04}"), persona, time, ty, text);
            if ty == DanmakuType::UserPosted && bottom {
                d.position = Position::Bottom;
            }
            t.danmaku.push(d);
        }
        t.sort();
        t
    })
}

/// A scrolling item in lane 0 entering at `enter_cs` hundredths of a second.
pub fn scroll_at(id: &str, enter_cs: i64, width: u32, screen: &ScreenConfig) -> LaneAssignment {
    let enter_s = enter_cs as f64 / 100.0;
    LaneAssignment {
        danmaku_id: id.into(),
        placement: Placement::Scroll,
        lane: Some(0),
        enter_s,
        exit_s: enter_s + screen.scroll_duration_s,
        width_px: width,
        speed_px_s: screen.speed(width),
    }
}

/// Pairs spread over the whole space plus pairs placed on either decision boundary.
pub fn scroll_pair() -> impl Strategy<Value = (i64, u32, u32, i64)> {
    let screen = ScreenConfig::default();
    (0i64..100_000, 1u32..900, 1u32..900, 0u8..3, -300i64..300).prop_map(move |(a, wa, wb, mode, jitter)| {
        let d = screen.scroll_duration_s;
        let w = screen.width_px as f64;
        let delta_cs = match mode {
            0 => (jitter + 300) * 3,
            1 => ((wa as f64 / screen.speed(wa)) * 100.0).round() as i64 + jitter / 30,
            _ => ((d - w / screen.speed(wb)) * 100.0).round() as i64 + jitter / 30,
        };
        (a, wa, wb, delta_cs.max(0))
    })
}
