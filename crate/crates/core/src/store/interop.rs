//! The `<i><d p="...">text</d></i>` danmaku XML format.
//!
//! `p` is `time,mode,size,color,pool,source,rowid`. Mode 1 scrolls, 5 pins to the
//! top and 4 to the bottom; colour is the decimal RGB value.

use quick_xml::escape::escape;
use quick_xml::events::Event;
use quick_xml::Reader;
use serde::Serialize;
use thiserror::Error;

use crate::danmaku::{Danmaku, DanmakuTrack, DanmakuType, Position, Rgb};

pub const XML_DECLARATION: &str = r#"<?xml version="1.0" encoding="UTF-8"?>"#;
pub const FONT_SIZE: u32 = 25;

#[derive(Debug, Error, PartialEq)]
pub enum InteropError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportWarningKind {
    /// Time outside `[0, duration]`, clamped.
    Clamped,
    /// Modes 7 and up (positioned or scripted) are skipped.
    UnsupportedMode,
    BadAttribute,
    EmptyText,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImportWarning {
    /// 1-based ordinal of the `<d>` element.
    pub element: usize,
    pub kind: ImportWarningKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imported {
    pub track: DanmakuTrack,
    pub warnings: Vec<ImportWarning>,
}

pub fn mode_of(position: Position) -> u8 {
    match position {
        Position::Scroll => 1,
        Position::Top => 5,
        Position::Bottom => 4,
    }
}

fn position_of(mode: u8) -> Option<Position> {
    match mode {
        1..=3 | 6 => Some(Position::Scroll),
        4 => Some(Position::Bottom),
        5 => Some(Position::Top),
        _ => None,
    }
}

/// The `p` attribute for one record; `rowid` is 1-based.
pub fn p_attribute(d: &Danmaku, rowid: usize) -> String {
    let source = d.persona_label.map_or_else(|| "user".to_string(), |c| c.to_string());
    format!("{:.2},{},{},{},0,{},{}", d.time_s, mode_of(d.position), FONT_SIZE, d.color.0, source, rowid)
}

pub fn export_interop_xml(track: &DanmakuTrack) -> Vec<u8> {
    let mut out = String::with_capacity(64 + track.len() * 64);
    out.push_str(XML_DECLARATION);
    out.push('\n');
    out.push_str("<i>");
    for (i, d) in track.danmaku.iter().enumerate() {
        out.push_str("\n  <d p=\"");
        out.push_str(&p_attribute(d, i + 1));
        out.push_str("\">");
        out.push_str(&escape(d.text.as_str()));
        out.push_str("</d>");
    }
    if !track.is_empty() {
        out.push('\n');
    }
    out.push_str("</i>\n");
    out.into_bytes()
}

struct Pending {
    element: usize,
    p: Option<String>,
    text: String,
}

/// Inverse of [`export_interop_xml`]. Every record becomes a persona-less
/// [`DanmakuType::UserPosted`] danmaku; ids are assigned in time order.
pub fn import_interop_xml(bytes: &[u8], video_id: &str, duration_s: f64) -> Result<Imported, InteropError> {
    let text = std::str::from_utf8(bytes).map_err(|e| InteropError::MalformedXml(e.to_string()))?;
    let mut reader = Reader::from_str(text);
    let mut depth = 0usize;
    let mut seen_root = false;
    let mut element = 0usize;
    let mut current: Option<Pending> = None;
    let mut records: Vec<Danmaku> = Vec::new();
    let mut warnings = Vec::new();
    let malformed = |e: &dyn std::fmt::Display| InteropError::MalformedXml(e.to_string());

    loop {
        let ev = reader.read_event().map_err(|e| malformed(&e))?;
        match ev {
            Event::Start(e) => {
                depth += 1;
                seen_root = true;
                if e.name().as_ref() == b"d" {
                    element += 1;
                    let p = e
                        .try_get_attribute("p")
                        .map_err(|e| malformed(&e))?
                        .map(|a| a.unescape_value().map(|v| v.into_owned()))
                        .transpose()
                        .map_err(|e| malformed(&e))?;
                    current = Some(Pending { element, p, text: String::new() });
                }
            }
            Event::Empty(e) => {
                seen_root = true;
                if e.name().as_ref() == b"d" {
                    element += 1;
                    warnings.push(ImportWarning {
                        element,
                        kind: ImportWarningKind::EmptyText,
                        detail: "empty element".into(),
                    });
                }
            }
            Event::Text(t) => {
                if let Some(cur) = current.as_mut() {
                    cur.text.push_str(&t.unescape().map_err(|e| malformed(&e))?);
                }
            }
            Event::CData(c) => {
                if let Some(cur) = current.as_mut() {
                    cur.text.push_str(&String::from_utf8_lossy(&c));
                }
            }
            Event::End(e) => {
                depth = depth.saturating_sub(1);
                if e.name().as_ref() == b"d" {
                    if let Some(cur) = current.take() {
                        if let Some(d) = finish(cur, duration_s, &mut warnings) {
                            records.push(d);
                        }
                    }
                }
            }
            Event::Eof => break,
            _ => {}
        }
    }
    if depth != 0 || !seen_root {
        return Err(InteropError::MalformedXml("document ends before its root element closes".into()));
    }

    let mut track = DanmakuTrack::new(video_id);
    track.danmaku = records;
    track.sort();
    for (i, d) in track.danmaku.iter_mut().enumerate() {
        d.id = format!("d{:04}", i + 1);
    }
    Ok(Imported { track, warnings })
}

fn finish(cur: Pending, duration_s: f64, warnings: &mut Vec<ImportWarning>) -> Option<Danmaku> {
    let mut warn = |kind, detail: String| warnings.push(ImportWarning { element: cur.element, kind, detail });
    let Some(p) = cur.p else {
        warn(ImportWarningKind::BadAttribute, "missing p attribute".into());
        return None;
    };
    let fields: Vec<&str> = p.split(',').map(str::trim).collect();
    if fields.len() < 4 {
        warn(ImportWarningKind::BadAttribute, format!("p has {} fields", fields.len()));
        return None;
    }
    let time: f64 = match fields[0].parse::<f64>() {
        Ok(t) if t.is_finite() => t,
        _ => {
            warn(ImportWarningKind::BadAttribute, format!("bad time {:?}", fields[0]));
            return None;
        }
    };
    let Ok(mode) = fields[1].parse::<u8>() else {
        warn(ImportWarningKind::BadAttribute, format!("bad mode {:?}", fields[1]));
        return None;
    };
    let Some(position) = position_of(mode) else {
        warn(ImportWarningKind::UnsupportedMode, format!("mode {mode}"));
        return None;
    };
    let Ok(color) = fields[3].parse::<u32>() else {
        warn(ImportWarningKind::BadAttribute, format!("bad colour {:?}", fields[3]));
        return None;
    };
    if cur.text.trim().is_empty() {
        warn(ImportWarningKind::EmptyText, String::new());
        return None;
    }
    let clamped = time.clamp(0.0, duration_s.max(0.0));
    if clamped != time {
        warn(ImportWarningKind::Clamped, format!("{time} clamped to {clamped}"));
    }
    let mut d = Danmaku::new(String::new(), None, clamped, DanmakuType::UserPosted, cur.text);
    d.color = Rgb::new(color);
    d.position = position;
    Some(d)
}
