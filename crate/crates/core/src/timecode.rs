//! `H:MM:SS.ss` style timestamps.
//!
//! Values are parsed through integer microseconds so that a timestamp printed with
//! two decimals re-parses to the bit-identical `f64`.

use std::fmt::Write;

/// Parses `HH:MM:SS`, `H:MM:SS`, `MM:SS` and the same forms with a fractional
/// seconds part (`0:00:00.04`). Returns seconds.
pub fn parse(raw: &str) -> Option<f64> {
    let s = raw.trim();
    if s.is_empty() {
        return None;
    }
    let (whole, frac) = match s.split_once('.') {
        Some((w, f)) => (w, Some(f)),
        None => (s, None),
    };
    let parts: Vec<&str> = whole.split(':').collect();
    if !(2..=3).contains(&parts.len()) {
        return None;
    }
    let mut fields = [0u64; 3];
    let offset = 3 - parts.len();
    for (i, p) in parts.iter().enumerate() {
        if p.is_empty() || p.len() > 2 && i > 0 || !p.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        fields[offset + i] = p.parse().ok()?;
    }
    let [h, m, sec] = fields;
    // leading field may exceed 59 for MM:SS, inner ones may not
    if parts.len() == 3 && m > 59 || sec > 59 {
        return None;
    }
    let mut micros = ((h * 60 + m) * 60 + sec).checked_mul(1_000_000)?;
    if let Some(f) = frac {
        if f.is_empty() || f.len() > 6 || !f.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        let scale = 10u64.pow(6 - f.len() as u32);
        micros += f.parse::<u64>().ok()? * scale;
    }
    Some(micros as f64 / 1e6)
}

fn split_centis(seconds: f64) -> (u64, u64, u64, u64) {
    let centis = (seconds.max(0.0) * 100.0).round() as u64;
    let cs = centis % 100;
    let total = centis / 100;
    (total / 3600, (total / 60) % 60, total % 60, cs)
}

/// `HH:MM:SS`, or `HH:MM:SS.cc` when the value has a non-zero centisecond part.
pub fn format_hms(seconds: f64) -> String {
    let (h, m, s, cs) = split_centis(seconds);
    let mut out = format!("{h:02}:{m:02}:{s:02}");
    if cs != 0 {
        let _ = write!(out, ".{cs:02}");
    }
    out
}

/// `H:MM:SS.cc`, the scene-description layout.
pub fn format_scene(seconds: f64) -> String {
    let (h, m, s, cs) = split_centis(seconds);
    format!("{h}:{m:02}:{s:02}.{cs:02}")
}

/// Shortest decimal rendering of a duration for prose (`30`, `2.5`).
pub fn format_seconds(seconds: f64) -> String {
    if seconds.fract() == 0.0 && seconds.abs() < 1e15 {
        format!("{}", seconds as i64)
    } else {
        format!("{seconds}")
    }
}
