use std::sync::LazyLock;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regex::Regex;
use serde_json::Value;
use sha2::{Digest, Sha256};
use unicode_segmentation::UnicodeSegmentation;

use super::{LlmError, LmmBackend, LmmRequest, LmmResponse};
use crate::danmaku::{Category, Danmaku, DanmakuTrack, DanmakuType, Rgb};
use crate::persona::{parse_personas_with_count, Persona, PersonaSet};
use crate::prompting::{GenerationConfig, LengthUnit};
use crate::timecode;
use crate::track_parser::render_track;
use crate::validator::{length_units, windows};
use crate::video_model::{render_clip_descriptions, SceneClip, VideoManifest};

pub const MOCK_MODEL_ID: &str = "comet-mock-1";

fn seed_for(video_id: &str, seed: u64) -> u64 {
    let digest = Sha256::digest(video_id.as_bytes());
    let mut b = [0u8; 8];
    b.copy_from_slice(&digest[..8]);
    u64::from_le_bytes(b) ^ seed
}

const REGIONS: [&str; 8] = ["Beijing", "Chengdu", "Toronto", "Lagos", "Berlin", "Sao Paulo", "Osaka", "Mumbai"];
const PERSONALITIES: [&str; 6] = [
    "Curious and talkative",
    "Calm and analytical",
    "Humorous and upbeat",
    "Shy but attentive",
    "Competitive and sharp",
    "Warm and supportive",
];
const STYLES: [&str; 6] = [
    "Asks short questions whenever something is unclear",
    "Posts concise notes on key terms",
    "Reacts with jokes and emoji",
    "Sends the occasional quiet compliment",
    "Corrects and adds details to other comments",
    "Cheers everyone on during hard parts",
];
const HABITS: [&str; 6] = [
    "Watches at 1.25x and pauses for notes",
    "Rewatches difficult segments",
    "Takes handwritten notes",
    "Studies late at night",
    "Reviews videos before exams",
    "Learns in study groups",
];

/// Deterministic persona set for a title.
pub fn generate_mock_personas(video_id: &str, title: &str, n: usize, seed: u64) -> PersonaSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(video_id, seed) ^ 0x5045_5253);
    let personas = (b'A'..=b'Z')
        .take(n)
        .enumerate()
        .map(|(i, l)| Persona {
            label: char::from(l),
            age: rng.gen_range(16..=45),
            region: REGIONS[rng.gen_range(0..REGIONS.len())].to_string(),
            personality: PERSONALITIES[i % PERSONALITIES.len()].to_string(),
            danmaku_sending_style: STYLES[(i + rng.gen_range(0..2)) % STYLES.len()].to_string(),
            learning_habits: HABITS[rng.gen_range(0..HABITS.len())].to_string(),
            reasons_for_watching: format!("Wants to understand \"{title}\""),
        })
        .collect();
    PersonaSet { video_id: video_id.to_string(), personas }
}

const EMOTION_TEXTS: [&str; 6] =
    ["😄 This is fun!", "Wow 🤣", "Mind blown 😮", "Oh I see now 😅", "Love this part ❤️", "Haha 😂"];
const COMPLIMENT_TEXTS: [&str; 5] =
    ["Great explanation 👍", "Very clear!", "Nice slides 👏", "Awesome teacher", "So well put"];
const ENCOURAGEMENT_TEXTS: [&str; 5] =
    ["Keep going everyone 💪", "We can do this!", "Almost there 💪", "Don't give up", "Stay focused, friends"];
const DISCUSSION_TEXTS: [&str; 4] = [
    "Interesting point about {k}",
    "{k} reminds me of last week",
    "So {k} matters here",
    "I never thought of {k} that way",
];
const SUMMARY_TEXTS: [&str; 3] = ["So far: {k} and more", "Recap: {k}", "Key takeaway: {k}"];
const QUESTION_TEXTS: [&str; 3] = ["What does {k} mean?", "Why is {k} important?", "Can someone explain {k}?"];
const ANSWER_TEXTS: [&str; 3] = ["It means {k} here", "Because of {k}", "Think of {k} as the key idea"];

fn keyword_at(manifest: &VideoManifest, t: f64, rng: &mut ChaCha8Rng) -> String {
    let seg =
        manifest.transcript.iter().find(|s| s.start_s <= t && t < s.end_s).or_else(|| {
            manifest.transcript.iter().min_by(|a, b| (a.start_s - t).abs().total_cmp(&(b.start_s - t).abs()))
        });
    let mut words: Vec<String> = seg
        .map(|s| {
            s.text
                .split_whitespace()
                .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
                .filter(|w| w.chars().count() >= 4 && !w.contains(['<', '>', '@']))
                .collect()
        })
        .unwrap_or_default();
    if words.is_empty() {
        words = manifest
            .title
            .split_whitespace()
            .map(|w| w.trim_matches(|c: char| !c.is_alphanumeric()).to_string())
            .filter(|w| !w.is_empty())
            .collect();
    }
    if words.is_empty() {
        return "this".to_string();
    }
    words.sort_by_key(|w| std::cmp::Reverse(w.chars().count()));
    words.truncate(3);
    words[rng.gen_range(0..words.len())].clone()
}

/// Cuts `text` to strictly fewer than `max` units.
fn fit(text: &str, max: u32, unit: LengthUnit) -> String {
    let max = max as usize;
    if length_units(text, unit) < max {
        return text.to_string();
    }
    let keep = max.saturating_sub(1).max(1);
    match unit {
        LengthUnit::Words => text.split_whitespace().take(keep).collect::<Vec<_>>().join(" "),
        LengthUnit::Graphemes => text.trim().graphemes(true).take(keep).collect::<String>().trim_end().to_string(),
    }
}

#[derive(Clone, Copy)]
enum Slot {
    Single(DanmakuType),
    QaPair,
}

fn plan_window(config: &GenerationConfig, w: &crate::validator::Window, rng: &mut ChaCha8Rng) -> Vec<Slot> {
    let mut slots = Vec::new();
    let pick = |lo: usize, hi: usize, rng: &mut ChaCha8Rng| {
        let mut n = (lo + rng.gen_range(0..=2)).min(hi);
        if w.is_full() && n == 0 && hi > 0 {
            n = 1;
        }
        n
    };

    if config.category_enabled(Category::Content) {
        let (lo, hi) = w.bounds(config.content_per_min.min, config.content_per_min.max);
        let mut left = pick(lo, hi, rng);
        if config.is_enabled(DanmakuType::Highlight) {
            let (h_lo, _) = w.bounds(config.highlights_per_min_min, config.highlights_per_min_min);
            let h = (h_lo + rng.gen_range(0..=1)).min(left);
            slots.extend(std::iter::repeat_n(Slot::Single(DanmakuType::Highlight), h));
            left -= h;
        }
        let others: Vec<DanmakuType> = [DanmakuType::QA, DanmakuType::Discussion, DanmakuType::Summary]
            .into_iter()
            .filter(|t| config.is_enabled(*t))
            .collect();
        let mut summary_used = false;
        let mut i = 0;
        let mut idle = 0;
        while left > 0 {
            if others.is_empty() || idle >= others.len() {
                // nothing else fits: pad with the first enabled content type
                let t = others.first().copied().unwrap_or(DanmakuType::Highlight);
                slots.push(Slot::Single(t));
                left -= 1;
                idle = 0;
                continue;
            }
            let t = others[i % others.len()];
            i += 1;
            match t {
                DanmakuType::QA if left >= 2 => {
                    slots.push(Slot::QaPair);
                    left -= 2;
                    idle = 0;
                }
                DanmakuType::Summary if !summary_used => {
                    slots.push(Slot::Single(t));
                    summary_used = true;
                    left -= 1;
                    idle = 0;
                }
                DanmakuType::Discussion => {
                    slots.push(Slot::Single(t));
                    left -= 1;
                    idle = 0;
                }
                _ => idle += 1,
            }
        }
    }
    if config.category_enabled(Category::Emotion) {
        let (lo, hi) = w.bounds(config.emotion_per_min.min, config.emotion_per_min.max);
        let n = pick(lo, hi, rng);
        let kinds: Vec<DanmakuType> = DanmakuType::EMOTION.into_iter().filter(|t| config.is_enabled(*t)).collect();
        for i in 0..n {
            slots.push(Slot::Single(kinds[i % kinds.len()]));
        }
    }
    slots.shuffle(rng);
    slots
}

fn centis(t: f64) -> f64 {
    (t * 100.0).round() / 100.0
}

fn text_for(t: DanmakuType, kw: &str, rng: &mut ChaCha8Rng) -> String {
    let pool: &[&str] = match t {
        DanmakuType::EmotionExpression => &EMOTION_TEXTS,
        DanmakuType::Compliment => &COMPLIMENT_TEXTS,
        DanmakuType::Encouragement => &ENCOURAGEMENT_TEXTS,
        DanmakuType::Discussion => &DISCUSSION_TEXTS,
        DanmakuType::Summary => &SUMMARY_TEXTS,
        DanmakuType::QA => &QUESTION_TEXTS,
        DanmakuType::Highlight | DanmakuType::UserPosted => &["{k}"],
    };
    pool[rng.gen_range(0..pool.len())].replace("{k}", kw)
}

/// Builds a track that satisfies `config` on `manifest` by construction.
///
/// Each window gets its scaled per-minute quota, items are spread evenly over the
/// window, and every Q&A answer lands strictly before the next item.
pub fn mock_track(
    manifest: &VideoManifest,
    personas: &PersonaSet,
    config: &GenerationConfig,
    seed: u64,
) -> DanmakuTrack {
    let mut rng = ChaCha8Rng::seed_from_u64(seed_for(&manifest.id, seed));
    let labels: Vec<char> = personas.labels().collect();
    let labels = if labels.is_empty() { vec!['A'] } else { labels };
    let mut track = DanmakuTrack::new(manifest.id.clone());
    let mut next_id = 0usize;
    let mut new_id = || {
        next_id += 1;
        format!("m{next_id:05}")
    };

    for w in windows(manifest.duration_s) {
        let slots = plan_window(config, &w, &mut rng);
        if slots.is_empty() {
            continue;
        }
        let len = w.end_s - w.start_s;
        let spacing = len / slots.len() as f64;
        // answer offset: inside the delay bound and before the next slot
        let answer_gap =
            ((1.0f64).min(config.qa_answer_delay_s / 2.0).min(spacing / 2.0 - 0.01) * 100.0).floor() / 100.0;
        for (i, slot) in slots.into_iter().enumerate() {
            let t = centis(w.start_s + (i as f64 + 0.5) * spacing);
            let kw = keyword_at(manifest, t, &mut rng);
            let who = labels[rng.gen_range(0..labels.len())];
            match slot {
                Slot::Single(dtype) => {
                    let mut d = Danmaku::new(new_id(), Some(who), t, dtype, text_for(dtype, &kw, &mut rng));
                    if dtype == DanmakuType::Highlight {
                        d.color = if rng.gen_bool(0.5) { Rgb::RED } else { Rgb::BLUE };
                    }
                    track.danmaku.push(d);
                }
                Slot::QaPair => {
                    let q =
                        Danmaku::new(new_id(), Some(who), t, DanmakuType::QA, text_for(DanmakuType::QA, &kw, &mut rng));
                    let q_id = q.id.clone();
                    track.danmaku.push(q);
                    if answer_gap >= 0.01 {
                        let others: Vec<char> = labels.iter().copied().filter(|&l| l != who).collect();
                        let by = if others.is_empty() { who } else { others[rng.gen_range(0..others.len())] };
                        let text = ANSWER_TEXTS[rng.gen_range(0..ANSWER_TEXTS.len())].replace("{k}", &kw);
                        let mut a = Danmaku::new(new_id(), Some(by), centis(t + answer_gap), DanmakuType::QA, text);
                        a.reply_to = Some(q_id);
                        track.danmaku.push(a);
                    }
                }
            }
        }
    }
    for d in &mut track.danmaku {
        d.text = fit(&d.text, config.max_len_units, config.length_unit);
    }
    track.sort();
    track
}

/// The mock's generation answer: [`mock_track`] rendered in the response grammar.
pub fn generate_mock_track(
    manifest: &VideoManifest,
    personas: &PersonaSet,
    config: &GenerationConfig,
    seed: u64,
) -> String {
    render_track(&mock_track(manifest, personas, config, seed))
}

static PERSONA_COUNT_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"create (\d+) distinct personas").unwrap());
static TITLE_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"educational video (.*?)\. Each persona").unwrap());
static CLIP_RE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"(?m)^Clip (\d+): ([0-9:.]+) - ([0-9:.]+)\s*$").unwrap());
static FRAME_RE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"(?m)^([0-9]+:[0-9:.]+): (.+)$").unwrap());

/// Answers the three prompt kinds the pipeline sends, deterministically.
#[derive(Debug, Clone)]
pub struct MockBackend {
    manifest: VideoManifest,
    config: GenerationConfig,
    seed: u64,
}

impl MockBackend {
    pub fn new(manifest: VideoManifest, config: GenerationConfig, seed: u64) -> Self {
        MockBackend { manifest, config, seed }
    }

    fn answer_personas(&self, user: &str) -> String {
        let n = PERSONA_COUNT_RE.captures(user).and_then(|c| c[1].parse().ok()).unwrap_or(6);
        let title = TITLE_RE.captures(user).map_or(self.manifest.title.clone(), |c| c[1].to_string());
        let set = generate_mock_personas(&self.manifest.id, &title, n, self.seed);
        format!("```json\n{}\n```\n", set.to_json_pretty())
    }

    fn answer_clip(&self, user: &str) -> Result<String, LlmError> {
        let caps =
            CLIP_RE.captures(user).ok_or_else(|| LlmError::Malformed("clip prompt without a clip range".into()))?;
        let (start, end) = match (timecode::parse(&caps[2]), timecode::parse(&caps[3])) {
            (Some(a), Some(b)) if b > a => (a, b),
            _ => return Err(LlmError::Malformed("unreadable clip range".into())),
        };
        let frames: Vec<String> = FRAME_RE
            .captures_iter(user.split("\nTranscript:").next().unwrap_or(""))
            .map(|c| c[2].trim().to_string())
            .collect();
        let mut clip = SceneClip::new(1, start, end);
        let lead = frames.first().cloned().unwrap_or_else(|| "the lecture".to_string());
        clip.title = Some(format!("Segment {}", &caps[1]));
        clip.description = Some(format!("The scene shows {lead}. The presenter continues the explanation."));
        Ok(render_clip_descriptions(&[clip]))
    }

    fn answer_generation(&self, user: &str) -> Result<String, LlmError> {
        let rest = user
            .strip_prefix("I provide personas")
            .ok_or_else(|| LlmError::Malformed("unexpected generation prompt".into()))?;
        let value: Value = serde_json::Deserializer::from_str(rest)
            .into_iter::<Value>()
            .next()
            .ok_or_else(|| LlmError::Malformed("no persona JSON in prompt".into()))?
            .map_err(|e| LlmError::Malformed(e.to_string()))?;
        let count = value.as_object().map_or(0, |m| m.len());
        let personas = parse_personas_with_count(&value.to_string(), &self.manifest.id, count)
            .map_err(|e| LlmError::Malformed(e.to_string()))?;
        Ok(generate_mock_track(&self.manifest, &personas, &self.config, self.seed))
    }
}

impl LmmBackend for MockBackend {
    fn complete(&self, req: &LmmRequest) -> Result<LmmResponse, LlmError> {
        req.validate()?;
        let text = if req.user.contains("distinct personas") {
            self.answer_personas(&req.user)
        } else if CLIP_RE.is_match(&req.user) {
            self.answer_clip(&req.user)?
        } else {
            self.answer_generation(&req.user)?
        };
        Ok(LmmResponse { text, model_id: MOCK_MODEL_ID.to_string(), latency_ms: 1 })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::persona::parse_personas;
    use crate::track_parser::parse_track;
    use crate::validator::validate;
    use crate::video_model::TranscriptSegment;

    pub(crate) fn manifest(duration: f64) -> VideoManifest {
        VideoManifest {
            id: "fixture".into(),
            title: "Latin Pronunciation".into(),
            abstract_text: "Vowels and consonants".into(),
            course: "Latin 101".into(),
            duration_s: duration,
            transcript: (0..(duration as usize / 10))
                .map(|i| TranscriptSegment {
                    start_s: 10.0 * i as f64,
                    end_s: 10.0 * i as f64 + 9.0,
                    text: format!("Segment {i} covers consonants and vowels in classical pronunciation"),
                })
                .collect(),
            frame_captions: None,
            frame_scores: None,
            scene_hints: None,
        }
    }

    #[test]
    fn personas_parse() {
        let p = generate_mock_personas("v", "T", 6, 7);
        let again = parse_personas(&p.to_json_pretty(), "v").unwrap();
        assert_eq!(p, again);
    }

    #[test]
    fn mock_track_is_clean() {
        let m = manifest(300.0);
        let cfg = GenerationConfig::default();
        let personas = generate_mock_personas(&m.id, &m.title, 6, 7);
        let md = generate_mock_track(&m, &personas, &cfg, 7);
        assert_eq!(md, generate_mock_track(&m, &personas, &cfg, 7));
        let (track, warnings) = parse_track(&md, &personas, m.duration_s).unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
        let report = validate(&track, m.duration_s, &cfg);
        assert!(report.is_clean(), "{:?}", report.violations);
        for s in &report.per_minute_stats {
            assert!((15..=25).contains(&s.content));
        }
    }
}
