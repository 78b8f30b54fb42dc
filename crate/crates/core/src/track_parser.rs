//! The Markdown response grammar:
//!
//! ```text
//! # Emotion-related danmaku
//! ## Personal Emotion Expression
//! - A | 00:00:02: 😊 Excited!
//!
//! # Content-related danmaku
//! ## Highlights
//! - B | 00:00:08: <font color="red">Latin consonants</font>
//! ```
//!
//! Parsing is total: unreadable lines become [`ParseWarning`]s, and only a response
//! with no usable item at all is an error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::danmaku::{Category, Danmaku, DanmakuTrack, DanmakuType, Position, Rgb};
use crate::persona::PersonaSet;
use crate::timecode;

/// How far back an `@X` mention may reach for its target.
pub const REPLY_WINDOW_S: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningKind {
    BadTimestamp,
    UnknownPersona,
    UnknownSection,
    BadFontTag,
    Orphan,
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseWarning {
    pub line_no: usize,
    pub kind: WarningKind,
    pub raw: String,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrackParseError {
    #[error("no danmaku items could be parsed ({} warnings)", warnings.len())]
    NoItemsParsed { warnings: Vec<ParseWarning> },
}

static ITEM_PIPE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*[-*+]\s*([A-Za-z]+)\s*\|\s*(\d{1,2}(?::\d{1,2}){1,2}(?:\.\d+)?)\s*:\s?(.*)$").unwrap()
});
// exemplar layout `A[00:00:02]: text`
static ITEM_BRACKET: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"^\s*(?:[-*+]\s*)?([A-Za-z])\[(\d{1,2}(?::\d{1,2}){1,2}(?:\.\d+)?)\]\s*:?\s?(.*)$").unwrap()
});
// anything that looks like an item but whose timestamp did not match
static ITEM_LOOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\s*[-*+]\s*[A-Za-z]+\s*\|").unwrap());
static FONT_OPEN: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r#"(?i)<font\b[^>]*?\bcolor\s*=\s*["']?([^"'\s>]*)["']?[^>]*>"#).unwrap());
static FONT_OPEN_ANY: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)<font\b[^>]*>").unwrap());
static FONT_CLOSE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?i)</font\s*>").unwrap());
static MENTION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^@([A-Za-z])(?:\s+|$)").unwrap());

enum Section {
    None,
    Unknown,
    Type(DanmakuType, Position),
}

fn classify_type_heading(text: &str) -> Option<(DanmakuType, Position)> {
    let norm: String =
        text.to_lowercase().chars().map(|c| if c.is_alphanumeric() || c == '&' { c } else { ' ' }).collect();
    let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
    let t = match norm.as_str() {
        "personal emotion expression" | "emotion expression" | "personal emotion expressions" => {
            DanmakuType::EmotionExpression
        }
        "brief compliment" | "brief compliments" | "compliment" | "compliments" => DanmakuType::Compliment,
        "encouragement" | "encouragements" => DanmakuType::Encouragement,
        "discussion" | "discussions" => DanmakuType::Discussion,
        "highlights" | "highlight" | "highlighting" => DanmakuType::Highlight,
        "q&a" | "q & a" | "qa" | "question and answer" | "questions and answers" => DanmakuType::QA,
        "summary" | "summaries" => DanmakuType::Summary,
        "user posted" => return Some((DanmakuType::UserPosted, Position::Scroll)),
        "user posted top" => return Some((DanmakuType::UserPosted, Position::Top)),
        "user posted bottom" => return Some((DanmakuType::UserPosted, Position::Bottom)),
        _ => return None,
    };
    let pos = if t == DanmakuType::Highlight { Position::Top } else { Position::Scroll };
    Some((t, pos))
}

fn is_category_heading(text: &str) -> bool {
    let l = text.to_lowercase();
    l.contains("danmaku") && (l.contains("emotion") || l.contains("content") || l.contains("user"))
}

struct Draft {
    line_no: usize,
    persona: Option<char>,
    time_s: f64,
    dtype: DanmakuType,
    text: String,
    color: Rgb,
    position: Position,
    mention: Option<char>,
}

/// Removes `<font ...>` / `</font>` tags, returning the plain text and the colour.
/// `Some(Err(()))` means tags were present but unbalanced or without a usable colour.
fn strip_font(raw: &str) -> (String, Option<Result<Rgb, ()>>) {
    let opens = FONT_OPEN_ANY.find_iter(raw).count();
    let closes = FONT_CLOSE.find_iter(raw).count();
    if opens == 0 && closes == 0 {
        return (raw.trim().to_string(), None);
    }
    let colour = FONT_OPEN.captures(raw).and_then(|c| Rgb::parse(&c[1]));
    let verdict = match colour {
        Some(c) if opens == closes => Ok(c),
        _ => Err(()),
    };
    let text = FONT_OPEN_ANY.replace_all(raw, "");
    let text = FONT_CLOSE.replace_all(&text, "");
    (text.trim().to_string(), Some(verdict))
}

/// Parses a model response into a sorted track.
///
/// `@X` mentions are resolved to the nearest earlier danmaku by persona `X` within
/// [`REPLY_WINDOW_S`]; ties on time prefer the same type, then the later line.
pub fn parse_track(
    markdown: &str,
    personas: &PersonaSet,
    duration_s: f64,
) -> Result<(DanmakuTrack, Vec<ParseWarning>), TrackParseError> {
    let mut warnings = Vec::new();
    let mut drafts: Vec<Draft> = Vec::new();
    let mut section = Section::None;
    let mut warned_orphan_section = false;
    let duration = if duration_s.is_finite() { duration_s.max(0.0) } else { 0.0 };

    for (i, line) in markdown.lines().enumerate() {
        let line_no = i + 1;
        let trimmed = line.trim();
        if let Some(rest) = trimmed.strip_prefix('#') {
            let level = 1 + rest.chars().take_while(|c| *c == '#').count();
            let title = rest.trim_start_matches('#').trim();
            if level == 1 && is_category_heading(title) {
                section = Section::None;
                continue;
            }
            match classify_type_heading(title) {
                Some((t, p)) => section = Section::Type(t, p),
                None => {
                    section = Section::Unknown;
                    warnings.push(ParseWarning { line_no, kind: WarningKind::UnknownSection, raw: line.to_string() });
                }
            }
            warned_orphan_section = false;
            continue;
        }

        let caps = ITEM_PIPE.captures(line).or_else(|| ITEM_BRACKET.captures(line));
        let Some(caps) = caps else {
            if ITEM_LOOSE.is_match(line) {
                warnings.push(ParseWarning { line_no, kind: WarningKind::BadTimestamp, raw: line.to_string() });
            }
            continue;
        };
        let (dtype, base_pos) = match section {
            Section::Type(t, p) => (t, p),
            Section::Unknown => continue,
            Section::None => {
                if !warned_orphan_section {
                    warnings.push(ParseWarning { line_no, kind: WarningKind::UnknownSection, raw: line.to_string() });
                    warned_orphan_section = true;
                }
                continue;
            }
        };

        let role = &caps[1];
        let persona = if role.eq_ignore_ascii_case("user") {
            None
        } else if role.chars().count() == 1 {
            let c = role.chars().next().unwrap().to_ascii_uppercase();
            if !personas.contains(c) {
                warnings.push(ParseWarning { line_no, kind: WarningKind::UnknownPersona, raw: line.to_string() });
            }
            Some(c)
        } else {
            warnings.push(ParseWarning { line_no, kind: WarningKind::UnknownPersona, raw: line.to_string() });
            continue;
        };
        let persona = if dtype == DanmakuType::UserPosted { None } else { persona };

        let Some(mut time_s) = timecode::parse(&caps[2]) else {
            warnings.push(ParseWarning { line_no, kind: WarningKind::BadTimestamp, raw: line.to_string() });
            continue;
        };
        if time_s > duration {
            warnings.push(ParseWarning { line_no, kind: WarningKind::BadTimestamp, raw: line.to_string() });
            time_s = duration;
        }

        let (text, colour) = strip_font(&caps[3]);
        let color = match colour {
            None => Rgb::WHITE,
            Some(Ok(c)) => c,
            Some(Err(())) => {
                warnings.push(ParseWarning { line_no, kind: WarningKind::BadFontTag, raw: line.to_string() });
                Rgb::WHITE
            }
        };
        if text.is_empty() {
            warnings.push(ParseWarning { line_no, kind: WarningKind::EmptyText, raw: line.to_string() });
            continue;
        }
        let mention = MENTION.captures(&text).map(|c| c[1].chars().next().unwrap().to_ascii_uppercase());

        drafts.push(Draft { line_no, persona, time_s, dtype, text, color, position: base_pos, mention });
    }

    if drafts.is_empty() {
        return Err(TrackParseError::NoItemsParsed { warnings });
    }

    // stable by time, line order breaks ties
    let mut order: Vec<usize> = (0..drafts.len()).collect();
    order.sort_by(|&a, &b| drafts[a].time_s.total_cmp(&drafts[b].time_s));
    let ids: HashMap<usize, String> =
        order.iter().enumerate().map(|(rank, &d)| (d, format!("d{:04}", rank + 1))).collect();

    let mut reply_target: Vec<Option<usize>> = vec![None; drafts.len()];
    for (idx, d) in drafts.iter().enumerate() {
        let Some(who) = d.mention else { continue };
        let best = order
            .iter()
            .copied()
            .filter(|&j| {
                let c = &drafts[j];
                c.persona == Some(who) && c.time_s < d.time_s && d.time_s - c.time_s <= REPLY_WINDOW_S
            })
            .max_by(|&a, &b| {
                let (x, y) = (&drafts[a], &drafts[b]);
                x.time_s
                    .total_cmp(&y.time_s)
                    .then_with(|| (x.dtype == d.dtype).cmp(&(y.dtype == d.dtype)))
                    .then_with(|| x.line_no.cmp(&y.line_no))
            });
        match best {
            Some(j) => reply_target[idx] = Some(j),
            None => warnings.push(ParseWarning {
                line_no: d.line_no,
                kind: WarningKind::Orphan,
                raw: markdown.lines().nth(d.line_no - 1).unwrap_or_default().to_string(),
            }),
        }
    }

    let mut track = DanmakuTrack::new(personas.video_id.clone());
    for &idx in &order {
        let d = &drafts[idx];
        let mut text = d.text.clone();
        let reply_to = reply_target[idx].map(|j| ids[&j].clone());
        if reply_to.is_some() {
            let stripped = MENTION.replace(&text, "").trim().to_string();
            if !stripped.is_empty() {
                text = stripped;
            }
        }
        track.danmaku.push(Danmaku {
            id: ids[&idx].clone(),
            persona_label: d.persona,
            time_s: d.time_s,
            dtype: d.dtype,
            category: d.dtype.category(),
            text,
            color: d.color,
            position: d.position,
            reply_to,
        });
    }
    Ok((track, warnings))
}

fn user_heading(p: Position) -> &'static str {
    match p {
        Position::Scroll => "User Posted",
        Position::Top => "User Posted (Top)",
        Position::Bottom => "User Posted (Bottom)",
    }
}

fn render_item(out: &mut String, d: &Danmaku, personas: &HashMap<&str, Option<char>>) {
    let role = match d.persona_label {
        Some(c) => c.to_string(),
        None => "user".to_string(),
    };
    let mut body = String::new();
    let mention = d.reply_to.as_deref().and_then(|id| personas.get(id).copied().flatten());
    if let Some(who) = mention {
        // keep the mention only when the text did not already start with it
        let already = MENTION.captures(&d.text).is_some_and(|c| c[1].eq_ignore_ascii_case(&who.to_string()));
        if !already {
            let _ = write!(body, "@{who} ");
        }
    }
    if d.color != Rgb::WHITE {
        let _ = write!(body, "<font color=\"{}\">{}</font>", d.color.font_name(), d.text);
    } else {
        body.push_str(&d.text);
    }
    let _ = writeln!(out, "- {role} | {}: {body}", timecode::format_hms(d.time_s));
}

/// Renders a track in the response grammar. Categories and types appear in the
/// canonical order; empty sections are omitted.
pub fn render_track(track: &DanmakuTrack) -> String {
    let personas: HashMap<&str, Option<char>> =
        track.danmaku.iter().map(|d| (d.id.as_str(), d.persona_label)).collect();
    let mut out = String::new();
    let mut sections: Vec<(Category, DanmakuType, Position)> = DanmakuType::GENERATED
        .iter()
        .map(|&t| (t.category(), t, if t == DanmakuType::Highlight { Position::Top } else { Position::Scroll }))
        .collect();
    for p in [Position::Scroll, Position::Top, Position::Bottom] {
        sections.push((Category::User, DanmakuType::UserPosted, p));
    }

    let mut current_category = None;
    for (cat, t, pos) in sections {
        let items: Vec<&Danmaku> = track
            .danmaku
            .iter()
            .filter(|d| d.dtype == t && (t != DanmakuType::UserPosted || d.position == pos))
            .collect();
        if items.is_empty() {
            continue;
        }
        if current_category != Some(cat) {
            if !out.is_empty() {
                out.push('\n');
            }
            let _ = writeln!(out, "# {}", cat.heading());
            current_category = Some(cat);
        } else {
            out.push('\n');
        }
        let heading = if t == DanmakuType::UserPosted { user_heading(pos) } else { t.heading() };
        let _ = writeln!(out, "## {heading}");
        for d in items {
            render_item(&mut out, d, &personas);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::Persona;

    pub(crate) fn six() -> PersonaSet {
        PersonaSet {
            video_id: "latin".into(),
            personas: "ABCDEF"
                .chars()
                .map(|label| Persona {
                    label,
                    age: 20,
                    region: "r".into(),
                    personality: "p".into(),
                    danmaku_sending_style: "s".into(),
                    learning_habits: "l".into(),
                    reasons_for_watching: "w".into(),
                })
                .collect(),
        }
    }

    #[test]
    fn highlight_item() {
        let md =
            "# Content-related danmaku\n## Highlights\n- B | 00:00:08: <font color=\"red\">Latin consonants</font>\n";
        let (t, w) = parse_track(md, &six(), 60.0).unwrap();
        assert!(w.is_empty());
        let d = &t.danmaku[0];
        assert_eq!(
            (d.persona_label, d.time_s, d.dtype, d.category, d.text.as_str(), d.color, d.position),
            (Some('B'), 8.0, DanmakuType::Highlight, Category::Content, "Latin consonants", Rgb::RED, Position::Top)
        );
    }

    #[test]
    fn empty_input_has_no_items() {
        assert!(matches!(parse_track("", &six(), 60.0), Err(TrackParseError::NoItemsParsed { .. })));
        assert!(matches!(
            parse_track("- A | 00:00:01: orphan item", &six(), 60.0),
            Err(TrackParseError::NoItemsParsed { warnings }) if warnings[0].kind == WarningKind::UnknownSection
        ));
    }

    #[test]
    fn warnings_for_bad_lines() {
        let md = "## Discussion\n\
- A | 00:00:99: bad time\n\
- Z | 00:00:05: who?\n\
- B | 00:02:00: too late\n\
- C | 00:00:07: <font color=\"green\">odd colour</font>\n\
- D | 00:00:09: @F nobody to answer\n\
## Memes\n\
- A | 00:00:10: skipped\n";
        let (t, w) = parse_track(md, &six(), 60.0).unwrap();
        let kinds: Vec<WarningKind> = w.iter().map(|w| w.kind).collect();
        assert_eq!(
            kinds,
            vec![
                WarningKind::BadTimestamp,
                WarningKind::UnknownPersona,
                WarningKind::BadTimestamp,
                WarningKind::BadFontTag,
                WarningKind::UnknownSection,
                WarningKind::Orphan,
            ]
        );
        assert_eq!(t.len(), 4);
        assert_eq!(t.danmaku.last().unwrap().time_s, 60.0);
        let orphan = t.danmaku.iter().find(|d| d.persona_label == Some('D')).unwrap();
        assert_eq!(orphan.text, "@F nobody to answer");
        assert_eq!(orphan.reply_to, None);
        assert_eq!(w[0].raw, "- A | 00:00:99: bad time");
    }

    #[test]
    fn mention_window_is_thirty_seconds() {
        let md = "## Discussion\n- A | 00:00:01: first\n- B | 00:00:31: @A in time\n- C | 00:00:32: @A too late\n";
        let (t, w) = parse_track(md, &six(), 60.0).unwrap();
        assert_eq!(t.danmaku[1].reply_to.as_deref(), Some("d0001"));
        assert_eq!(t.danmaku[1].text, "in time");
        assert_eq!(t.danmaku[2].reply_to, None);
        assert_eq!(w.len(), 1);
    }

    #[test]
    fn bracket_layout_is_understood() {
        let md = "## Q&A\nA[00:05:31]: Why x = y?\nB[00:05:33]: @A hey, cuz y = 3\n";
        let (t, _) = parse_track(md, &six(), 400.0).unwrap();
        assert_eq!(t.danmaku[1].reply_to.as_deref(), Some("d0001"));
        assert_eq!(t.danmaku[1].dtype, DanmakuType::QA);
    }

    #[test]
    fn question_and_answer_heading_alias() {
        let md = "## Question-and-answer\n- A | 00:00:05: why?\n";
        let (t, _) = parse_track(md, &six(), 60.0).unwrap();
        assert_eq!(t.danmaku[0].dtype, DanmakuType::QA);
    }

    #[test]
    fn single_record_renders_minimal_grammar() {
        let mut t = DanmakuTrack::new("v");
        t.danmaku.push(Danmaku::new("x", Some('C'), 12.5, DanmakuType::Summary, "Recap"));
        assert_eq!(render_track(&t), "# Content-related danmaku\n## Summary\n- C | 00:00:12.50: Recap\n");
    }

    #[test]
    fn coloured_highlight_renders_font_tag() {
        let mut t = DanmakuTrack::new("v");
        let mut d = Danmaku::new("x", Some('B'), 8.0, DanmakuType::Highlight, "Latin consonants");
        d.color = Rgb::RED;
        t.danmaku.push(d);
        assert!(render_track(&t).contains("- B | 00:00:08: <font color=\"red\">Latin consonants</font>"));
    }

    #[test]
    fn user_posts_keep_their_position() {
        let mut t = DanmakuTrack::new("latin");
        let mut d = Danmaku::new("u1", None, 42.0, DanmakuType::UserPosted, "hello");
        d.position = Position::Bottom;
        t.danmaku.push(d);
        let md = render_track(&t);
        let (back, w) = parse_track(&md, &six(), 60.0).unwrap();
        assert!(w.is_empty());
        assert_eq!(back.danmaku[0].position, Position::Bottom);
        assert_eq!(back.danmaku[0].persona_label, None);
    }
}
