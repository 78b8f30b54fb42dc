//! Video manifests, scene segmentation, frame sampling and the two description levels.

use std::fmt::Write as _;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::timecode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TranscriptSegment {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameCaption {
    pub t: f64,
    pub caption: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrameScore {
    pub t: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneHint {
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub label: String,
}

/// Everything the pipeline knows about one video. Frame captions and scores arrive
/// pre-extracted; nothing here decodes media.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VideoManifest {
    pub id: String,
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub course: String,
    pub duration_s: f64,
    pub transcript: Vec<TranscriptSegment>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_captions: Option<Vec<FrameCaption>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_scores: Option<Vec<FrameScore>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scene_hints: Option<Vec<SceneHint>>,
}

#[derive(Debug, Error, PartialEq)]
pub enum VideoError {
    #[error("manifest has no duration")]
    EmptyManifest,
    #[error("scene hints overlap: [{0}, {1}] and [{2}, {3}]")]
    MalformedHints(f64, f64, f64, f64),
    #[error("invalid manifest: {0}")]
    InvalidManifest(String),
    #[error("clip has zero length")]
    ZeroLengthClip,
    #[error("manifest JSON: {0}")]
    Json(String),
}

impl VideoManifest {
    pub fn from_json(text: &str) -> Result<Self, VideoError> {
        let m: VideoManifest = serde_json::from_str(text).map_err(|e| VideoError::Json(e.to_string()))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes")
    }

    pub fn validate(&self) -> Result<(), VideoError> {
        let d = self.duration_s;
        if !(d.is_finite() && d > 0.0) {
            return Err(VideoError::EmptyManifest);
        }
        let invalid = |msg: String| Err(VideoError::InvalidManifest(msg));
        let mut prev_end = 0.0;
        for (i, seg) in self.transcript.iter().enumerate() {
            if !(0.0 <= seg.start_s && seg.start_s < seg.end_s && seg.end_s <= d) {
                return invalid(format!("transcript segment {i} has range [{}, {}]", seg.start_s, seg.end_s));
            }
            if seg.start_s < prev_end {
                return invalid(format!("transcript segment {i} overlaps or is out of order"));
            }
            if seg.text.trim().is_empty() {
                return invalid(format!("transcript segment {i} is empty"));
            }
            prev_end = seg.end_s;
        }
        if let Some(scores) = &self.frame_scores {
            let mut prev = f64::NEG_INFINITY;
            for s in scores {
                if !(s.t > prev && s.t >= 0.0 && s.t <= d) || !(s.score >= 0.0) {
                    return invalid(format!("frame score at t={} is out of order or out of range", s.t));
                }
                prev = s.t;
            }
        }
        Ok(())
    }

    /// Transcript segments that overlap `[start_s, end_s)`.
    pub fn transcript_slice(&self, start_s: f64, end_s: f64) -> Vec<TranscriptSegment> {
        self.transcript.iter().filter(|s| s.end_s > start_s && s.start_s < end_s).cloned().collect()
    }
}

/// One scene of the video. Indices are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneClip {
    pub index: u32,
    pub start_s: f64,
    pub end_s: f64,
    #[serde(default)]
    pub title: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
}

impl SceneClip {
    pub fn new(index: u32, start_s: f64, end_s: f64) -> Self {
        SceneClip { index, start_s, end_s, title: None, description: None }
    }

    pub fn len_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentationParams {
    /// Frame-difference score above which a cut is placed.
    pub threshold: f64,
    pub min_len_s: f64,
    /// Transcript silence long enough to count as a boundary.
    pub pause_s: f64,
}

impl Default for SegmentationParams {
    fn default() -> Self {
        SegmentationParams { threshold: 27.0, min_len_s: 10.0, pause_s: 3.0 }
    }
}

/// Splits the video into clips that partition `[0, duration_s]`.
///
/// Scene hints win when present, then frame-difference scores, then transcript pauses.
pub fn segment_scenes(manifest: &VideoManifest, params: &SegmentationParams) -> Result<Vec<SceneClip>, VideoError> {
    let duration = manifest.duration_s;
    if !(duration.is_finite() && duration > 0.0) {
        return Err(VideoError::EmptyManifest);
    }

    if let Some(hints) = manifest.scene_hints.as_ref().filter(|h| !h.is_empty()) {
        return clips_from_hints(hints, duration);
    }

    let mut cuts = Vec::new();
    if let Some(scores) = manifest.frame_scores.as_ref().filter(|s| !s.is_empty()) {
        let mut last = 0.0;
        for s in scores {
            if s.score > params.threshold && s.t - last >= params.min_len_s && duration - s.t >= params.min_len_s {
                cuts.push(s.t);
                last = s.t;
            }
        }
    } else {
        let mut last = 0.0;
        for pair in manifest.transcript.windows(2) {
            let silence = pair[1].start_s - pair[0].end_s;
            if silence >= params.pause_s {
                let cut = pair[0].end_s + silence / 2.0;
                if cut - last >= params.min_len_s && duration - cut >= params.min_len_s {
                    cuts.push(cut);
                    last = cut;
                }
            }
        }
    }

    let mut bounds = Vec::with_capacity(cuts.len() + 2);
    bounds.push(0.0);
    bounds.extend(cuts);
    bounds.push(duration);
    Ok(bounds.windows(2).enumerate().map(|(i, w)| SceneClip::new(i as u32 + 1, w[0], w[1])).collect())
}

fn clips_from_hints(hints: &[SceneHint], duration: f64) -> Result<Vec<SceneClip>, VideoError> {
    let mut sorted: Vec<&SceneHint> = hints.iter().collect();
    sorted.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for pair in sorted.windows(2) {
        if pair[1].start_s < pair[0].end_s {
            return Err(VideoError::MalformedHints(pair[0].start_s, pair[0].end_s, pair[1].start_s, pair[1].end_s));
        }
    }

    let mut clips: Vec<SceneClip> = Vec::new();
    for h in sorted {
        let start = h.start_s.clamp(0.0, duration);
        let end = h.end_s.clamp(0.0, duration);
        if end <= start {
            continue;
        }
        let mut clip = SceneClip::new(0, start, end);
        if !h.label.trim().is_empty() {
            clip.title = Some(h.label.trim().to_string());
        }
        clips.push(clip);
    }
    if clips.is_empty() {
        return Ok(vec![SceneClip::new(1, 0.0, duration)]);
    }
    // gaps go to the following clip; the ends stay as hinted
    clips[0].start_s = 0.0;
    for i in 1..clips.len() {
        clips[i].start_s = clips[i - 1].end_s;
    }
    clips.last_mut().unwrap().end_s = duration;
    for (i, c) in clips.iter_mut().enumerate() {
        c.index = i as u32 + 1;
    }
    Ok(clips)
}

/// Uniform midpoint sampling at five frames per minute, at least one per clip.
pub fn sample_frame_times(clip: &SceneClip) -> Result<Vec<f64>, VideoError> {
    let len = clip.len_s();
    if !(len > 0.0) {
        return Err(VideoError::ZeroLengthClip);
    }
    let k = ((5.0 * len / 60.0 + 0.5).floor() as usize).max(1);
    let step = len / k as f64;
    Ok((0..k).map(|i| clip.start_s + (i as f64 + 0.5) * step).collect())
}

/// A sampled frame as handed to the model: its time and an image reference
/// (a caption, file name or URL; media never passes through this crate).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameRef {
    pub time_s: f64,
    pub image: String,
}

/// Pairs each sample time with the nearest pre-extracted frame caption, or a
/// `frame@<t>` placeholder when the manifest carries none.
pub fn frame_refs(manifest: &VideoManifest, times: &[f64]) -> Vec<FrameRef> {
    let captions = manifest.frame_captions.as_deref().unwrap_or(&[]);
    times
        .iter()
        .map(|&t| {
            let nearest = captions.iter().min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()));
            FrameRef {
                time_s: t,
                image: match nearest {
                    Some(c) => c.caption.clone(),
                    None => format!("frame@{}", timecode::format_scene(t)),
                },
            }
        })
        .collect()
}

const CLIP_INSTRUCTIONS: &str = "\
- You are an expert in understanding scene transitions based on visual features and transcripts in a video.
- For the given sequence of images per timestamp, the input format is timestamp: image, identify different scenes in the video.
- Generate descriptions for each scene with time ranges.";

const CLIP_RESPONSE_LAYOUT: &str = "\
- Answer in Markdown. For each scene write `### Scene N: <title>`, then `**Time Range:** <start> - <end>`, then `**Description:** <text>`.";

/// The clip-description prompt: instruction block, clip range, frames as
/// `timestamp: image` lines and, when available, the transcript of the clip.
pub fn build_clip_description_prompt(
    clip: &SceneClip,
    frames: &[FrameRef],
    transcript: &[TranscriptSegment],
) -> String {
    let mut out = String::new();
    out.push_str(CLIP_INSTRUCTIONS);
    out.push('\n');
    out.push_str(CLIP_RESPONSE_LAYOUT);
    out.push_str("\n\n");
    let _ = writeln!(
        out,
        "Clip {}: {} - {}",
        clip.index,
        timecode::format_scene(clip.start_s),
        timecode::format_scene(clip.end_s)
    );
    out.push_str("\nFrames:\n");
    for f in frames {
        let _ = writeln!(out, "{}: {}", timecode::format_scene(f.time_s), f.image);
    }
    if !transcript.is_empty() {
        out.push_str("\nTranscript:\n");
        for seg in transcript {
            let _ = writeln!(
                out,
                "{} - {}: {}",
                timecode::format_scene(seg.start_s),
                timecode::format_scene(seg.end_s),
                seg.text.trim()
            );
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClipWarning {
    pub line_no: usize,
    pub message: String,
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParsedClips {
    pub clips: Vec<SceneClip>,
    pub warnings: Vec<ClipWarning>,
}

#[derive(Debug, Error, PartialEq)]
pub enum ClipParseError {
    #[error("no scene blocks found ({} warnings)", warnings.len())]
    NoScenesFound { warnings: Vec<ClipWarning> },
}

static SCENE_HEADING: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*#{1,6}\s*scene\s+(\d+)\s*[:.\-–]?\s*(.*?)\s*$").unwrap());
static TIME_RANGE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)^\s*\*\*\s*time\s+range\s*:?\s*\*\*\s*:?\s*([0-9:.]+)\s*[-–—]\s*([0-9:.]+)\s*$").unwrap()
});
static DESCRIPTION: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?i)^\s*\*\*\s*description\s*:?\s*\*\*\s*:?\s*(.*?)\s*$").unwrap());

#[derive(Default)]
struct Block {
    line_no: usize,
    title: String,
    range: Option<(f64, f64)>,
    description: Vec<String>,
    in_description: bool,
}

/// Parses `### Scene N: <title>` / `**Time Range:**` / `**Description:**` blocks.
///
/// Never panics; blocks without a usable time range become warnings.
pub fn parse_clip_descriptions(markdown: &str, duration_s: f64) -> Result<ParsedClips, ClipParseError> {
    let mut warnings = Vec::new();
    let mut blocks: Vec<Block> = Vec::new();
    let mut current: Option<Block> = None;

    for (i, line) in markdown.lines().enumerate() {
        let line_no = i + 1;
        if let Some(caps) = SCENE_HEADING.captures(line) {
            if let Some(b) = current.take() {
                blocks.push(b);
            }
            current = Some(Block { line_no, title: caps[2].trim().to_string(), ..Default::default() });
            continue;
        }
        let Some(block) = current.as_mut() else { continue };
        if let Some(caps) = TIME_RANGE.captures(line) {
            block.in_description = false;
            match (timecode::parse(&caps[1]), timecode::parse(&caps[2])) {
                (Some(a), Some(b)) => block.range = Some((a, b)),
                _ => warnings.push(ClipWarning {
                    line_no,
                    message: "unreadable timestamp".into(),
                    raw: line.to_string(),
                }),
            }
        } else if let Some(caps) = DESCRIPTION.captures(line) {
            block.in_description = true;
            if !caps[1].is_empty() {
                block.description.push(caps[1].to_string());
            }
        } else if line.trim().is_empty() || line.trim_start().starts_with('#') {
            block.in_description = false;
        } else if block.in_description {
            block.description.push(line.trim().to_string());
        }
    }
    if let Some(b) = current.take() {
        blocks.push(b);
    }

    let mut clips = Vec::new();
    for b in blocks {
        let Some((a, z)) = b.range else {
            warnings.push(ClipWarning { line_no: b.line_no, message: "scene without time range".into(), raw: b.title });
            continue;
        };
        let start = a.clamp(0.0, duration_s.max(0.0));
        let end = z.clamp(0.0, duration_s.max(0.0));
        if end <= start {
            warnings.push(ClipWarning { line_no: b.line_no, message: "empty time range".into(), raw: b.title });
            continue;
        }
        let mut clip = SceneClip::new(0, start, end);
        clip.title = Some(b.title).filter(|t| !t.is_empty());
        let desc = b.description.join(" ");
        clip.description = Some(desc).filter(|d| !d.is_empty());
        clips.push(clip);
    }
    if clips.is_empty() {
        return Err(ClipParseError::NoScenesFound { warnings });
    }
    clips.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for (i, c) in clips.iter_mut().enumerate() {
        c.index = i as u32 + 1;
    }
    Ok(ParsedClips { clips, warnings })
}

/// Renders clips in the layout [`parse_clip_descriptions`] reads.
pub fn render_clip_descriptions(clips: &[SceneClip]) -> String {
    let mut out = String::from(
        "Based on the provided images and transcript, the video can be divided into the following scenes:\n",
    );
    for c in clips {
        let _ = write!(
            out,
            "\n### Scene {}: {}\n**Time Range:** {} - {}\n**Description:** {}\n",
            c.index,
            c.title.as_deref().unwrap_or(""),
            timecode::format_scene(c.start_s),
            timecode::format_scene(c.end_s),
            c.description.as_deref().unwrap_or("")
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VideoMeta {
    pub title: String,
    #[serde(rename = "abstract")]
    pub abstract_text: String,
    pub course: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptLine {
    pub start_s: f64,
    pub end_s: f64,
    pub text: String,
}

/// Metadata plus timestamped transcript, embedded into the generation prompt as JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TextLevelDescription {
    pub meta: VideoMeta,
    pub transcript: Vec<TranscriptLine>,
}

impl TextLevelDescription {
    pub fn from_manifest(m: &VideoManifest) -> Self {
        TextLevelDescription {
            meta: VideoMeta {
                title: m.title.clone(),
                abstract_text: m.abstract_text.clone(),
                course: m.course.clone(),
            },
            transcript: m
                .transcript
                .iter()
                .map(|s| TranscriptLine { start_s: s.start_s, end_s: s.end_s, text: s.text.trim().to_string() })
                .collect(),
        }
    }

    /// Compact JSON with fixed key order.
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string(self).expect("description serializes")
    }
}
