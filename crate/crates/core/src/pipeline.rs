//! End-to-end generation job: describe clips, create personas, generate, validate,
//! repair, lay out and persist.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::{info, warn};

use crate::danmaku::{Category, DanmakuTrack};
use crate::llm_client::{LlmError, LmmClient, LmmRequest};
use crate::persona::{build_persona_prompt, parse_personas, PersonaSet, PERSONA_COUNT};
use crate::prompting::{with_feedback, GenerationConfig, PromptBundle};
use crate::scheduler::{layout, LaneAssignment, ScreenConfig};
use crate::store::{manifest_hash, Catalog, StoreError};
use crate::track_parser::{parse_track, TrackParseError};
use crate::validator::{repair, validate, Rule, ValidationReport};
use crate::video_model::{
    build_clip_description_prompt, frame_refs, parse_clip_descriptions, sample_frame_times, segment_scenes, SceneClip,
    SegmentationParams, TextLevelDescription, VideoManifest,
};

pub const MAX_ATTEMPTS: u32 = 3;

const CLIP_SYSTEM: &str = "You describe the scenes of an educational video from sampled frames and its transcript.";
const PERSONA_SYSTEM: &str = "You design realistic viewer personas for online educational videos.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JobState {
    Queued,
    DescribingClips,
    CreatingPersonas,
    Generating,
    Validating,
    Done,
    Failed,
}

impl JobState {
    /// Forward-only, except the generate/validate retry loop. Any live state may fail.
    pub fn can_move_to(self, next: JobState) -> bool {
        use JobState::*;
        matches!(
            (self, next),
            (Queued, DescribingClips)
                | (DescribingClips, CreatingPersonas)
                | (CreatingPersonas, Generating)
                | (Generating, Validating)
                | (Validating, Generating)
                | (Validating, Done)
        ) || (next == Failed && !self.is_terminal())
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, JobState::Done | JobState::Failed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationJob {
    pub job_id: String,
    pub video_id: String,
    pub state: JobState,
    pub attempts: u32,
    pub error: Option<String>,
    pub report: Option<ValidationReport>,
    pub history: Vec<JobState>,
}

impl GenerationJob {
    pub fn new(job_id: impl Into<String>, video_id: impl Into<String>) -> Self {
        GenerationJob {
            job_id: job_id.into(),
            video_id: video_id.into(),
            state: JobState::Queued,
            attempts: 0,
            error: None,
            report: None,
            history: vec![JobState::Queued],
        }
    }

    fn advance(&mut self, next: JobState) {
        assert!(self.state.can_move_to(next), "illegal job transition {:?} -> {:?}", self.state, next);
        self.state = next;
        self.history.push(next);
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("job failed during {stage:?} after {attempts} attempt(s): {reason}")]
    JobFailed { stage: JobState, attempts: u32, reason: String, report: Option<Box<ValidationReport>> },
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub job_id: String,
    pub screen: ScreenConfig,
    pub segmentation: SegmentationParams,
    /// Stamped into the track; fixed by default so runs are reproducible.
    pub generated_at: DateTime<Utc>,
    pub catalog: Option<Catalog>,
    /// Reuse cached clip descriptions and personas keyed by manifest hash.
    pub use_cache: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            job_id: "job-local".into(),
            screen: ScreenConfig::default(),
            segmentation: SegmentationParams::default(),
            generated_at: DateTime::<Utc>::UNIX_EPOCH,
            catalog: None,
            use_cache: true,
        }
    }
}

#[derive(Debug, Clone)]
pub struct JobOutput {
    pub job: GenerationJob,
    pub clips: Vec<SceneClip>,
    pub personas: PersonaSet,
    pub track: DanmakuTrack,
    pub report: ValidationReport,
    pub schedule: Vec<LaneAssignment>,
}

struct Runner<'a, F: FnMut(&GenerationJob)> {
    job: GenerationJob,
    opts: &'a RunOptions,
    on_state: F,
}

impl<F: FnMut(&GenerationJob)> Runner<'_, F> {
    fn enter(&mut self, next: JobState) -> Result<(), PipelineError> {
        self.job.advance(next);
        self.publish()
    }

    fn publish(&mut self) -> Result<(), PipelineError> {
        if let Some(cat) = &self.opts.catalog {
            cat.save_job(&self.job.job_id, &self.job)?;
        }
        (self.on_state)(&self.job);
        Ok(())
    }

    fn fail(&mut self, reason: String, report: Option<ValidationReport>) -> PipelineError {
        let stage = self.job.state;
        warn!(job = %self.job.job_id, ?stage, %reason, "job failed");
        self.job.error = Some(reason.clone());
        self.job.report = report.clone();
        self.job.advance(JobState::Failed);
        if let Err(e) = self.publish() {
            warn!(error = %e, "could not persist failed job");
        }
        PipelineError::JobFailed { stage, attempts: self.job.attempts, reason, report: report.map(Box::new) }
    }

    fn cached(&self, stage: &str, key: &str) -> Option<String> {
        let cat = self.opts.catalog.as_ref().filter(|_| self.opts.use_cache)?;
        cat.cache_get(stage, key).ok().flatten()
    }

    fn remember(&self, stage: &str, key: &str, text: &str) {
        if let Some(cat) = self.opts.catalog.as_ref().filter(|_| self.opts.use_cache) {
            if let Err(e) = cat.cache_put(stage, key, text) {
                warn!(error = %e, stage, "cache write failed");
            }
        }
    }
}

fn llm_reason(what: &str, e: &LlmError) -> String {
    format!("{what}: {e}")
}

/// Problems that force a regeneration rather than a repair.
fn hard_problems(track: &DanmakuTrack, config: &GenerationConfig) -> Vec<String> {
    let mut out = Vec::new();
    for cat in [Category::Content, Category::Emotion] {
        if config.category_enabled(cat) && !track.danmaku.iter().any(|d| d.category == cat) {
            out.push(format!("The response contains no {} danmaku.", cat.heading().to_lowercase()));
        }
    }
    out
}

fn unrepaired(report: &ValidationReport) -> Vec<String> {
    report
        .violations
        .iter()
        .filter(|v| matches!(v.rule, Rule::R1Length | Rule::R9TimeBounds) || v.is_rate_maximum())
        .map(|v| format!("{}: {}", v.rule, v.detail))
        .collect()
}

/// Runs one generation job to completion.
///
/// `on_state` sees the job after every state change. With a catalog in `opts`,
/// the job file is rewritten at each change and the final artifacts are saved
/// under the video's directory.
pub fn run_job(
    manifest: &VideoManifest,
    config: &GenerationConfig,
    client: &LmmClient,
    opts: &RunOptions,
    on_state: impl FnMut(&GenerationJob),
) -> Result<JobOutput, PipelineError> {
    let mut run = Runner { job: GenerationJob::new(opts.job_id.clone(), manifest.id.clone()), opts, on_state };
    run.publish()?;
    let hash = manifest_hash(manifest);

    // stage A: clips and descriptions
    run.enter(JobState::DescribingClips)?;
    if let Err(e) = manifest.validate() {
        return Err(run.fail(format!("invalid manifest: {e}"), None));
    }
    if let Err(e) = config.validate() {
        return Err(run.fail(format!("invalid config: {e}"), None));
    }
    let segments = match segment_scenes(manifest, &opts.segmentation) {
        Ok(s) => s,
        Err(e) => return Err(run.fail(format!("segmentation: {e}"), None)),
    };
    let mut clips: Vec<SceneClip> = Vec::new();
    for seg in &segments {
        let key = format!("{hash}-{}", seg.index);
        let text = match run.cached("clips", &key) {
            Some(t) => t,
            None => {
                let times = match sample_frame_times(seg) {
                    Ok(t) => t,
                    Err(e) => return Err(run.fail(format!("clip {}: {e}", seg.index), None)),
                };
                let prompt = build_clip_description_prompt(
                    seg,
                    &frame_refs(manifest, &times),
                    &manifest.transcript_slice(seg.start_s, seg.end_s),
                );
                match client.complete(&LmmRequest::new(CLIP_SYSTEM, prompt)) {
                    Ok(r) => {
                        run.remember("clips", &key, &r.text);
                        r.text
                    }
                    Err(e) => return Err(run.fail(llm_reason("clip description", &e), None)),
                }
            }
        };
        match parse_clip_descriptions(&text, manifest.duration_s) {
            Ok(parsed) => clips.extend(parsed.clips),
            Err(e) => {
                warn!(clip = seg.index, error = %e, "keeping clip without description");
                clips.push(seg.clone());
            }
        }
    }
    clips.sort_by(|a, b| a.start_s.total_cmp(&b.start_s));
    for (i, c) in clips.iter_mut().enumerate() {
        c.index = i as u32 + 1;
    }

    // stage B: personas
    run.enter(JobState::CreatingPersonas)?;
    let mut personas = None;
    let mut last_err = String::new();
    if let Some(text) = run.cached("personas", &hash) {
        personas = parse_personas(&text, &manifest.id).ok();
    }
    for _ in 0..MAX_ATTEMPTS {
        if personas.is_some() {
            break;
        }
        let req = LmmRequest::new(PERSONA_SYSTEM, build_persona_prompt(&manifest.title, PERSONA_COUNT));
        match client.complete(&req) {
            Ok(r) => match parse_personas(&r.text, &manifest.id) {
                Ok(p) => {
                    run.remember("personas", &hash, &r.text);
                    personas = Some(p);
                }
                Err(e) => last_err = format!("persona response: {e}"),
            },
            Err(e) => return Err(run.fail(llm_reason("persona creation", &e), None)),
        }
    }
    let Some(personas) = personas else {
        return Err(run.fail(last_err, None));
    };

    // stages C and D: prompt, generate, validate, repair
    let text_desc = TextLevelDescription::from_manifest(manifest);
    let bundle = PromptBundle::new(config, &personas, &clips, &text_desc);
    let mut feedback: Vec<String> = Vec::new();
    let mut last_report = None;
    let (track, report) = loop {
        run.job.attempts += 1;
        run.enter(JobState::Generating)?;
        let user =
            if feedback.is_empty() { bundle.user_text.clone() } else { with_feedback(&bundle.user_text, &feedback) };
        let resp = match client.complete(&LmmRequest::new(bundle.system_text.clone(), user)) {
            Ok(r) => r,
            Err(e) => return Err(run.fail(llm_reason("generation", &e), last_report)),
        };
        run.enter(JobState::Validating)?;
        let attempt = run.job.attempts;
        let problems = match parse_track(&resp.text, &personas, manifest.duration_s) {
            Err(TrackParseError::NoItemsParsed { warnings }) => vec![format!(
                "No danmaku could be read from the response ({} unreadable lines). Use the response format exactly.",
                warnings.len()
            )],
            Ok((mut track, warnings)) => {
                if !warnings.is_empty() {
                    info!(count = warnings.len(), "parse warnings");
                }
                let hard = hard_problems(&track, config);
                if hard.is_empty() {
                    track.generated_at = opts.generated_at;
                    track.model_id = resp.model_id.clone();
                    track.config_snapshot = Some(config.clone());
                    let first = validate(&track, manifest.duration_s, config);
                    let (fixed, after) = repair(&track, &first, manifest.duration_s, config, None);
                    let left = unrepaired(&after);
                    if left.is_empty() {
                        break (fixed, after);
                    }
                    last_report = Some(after);
                    left
                } else {
                    hard
                }
            }
        };
        if attempt >= MAX_ATTEMPTS {
            return Err(run.fail(format!("attempts exhausted: {}", problems.join("; ")), last_report));
        }
        feedback = problems;
    };

    let schedule = layout(&track, &opts.screen);
    if let Some(cat) = &opts.catalog {
        let _lock = cat.lock_video(&manifest.id)?;
        cat.save_manifest(manifest)?;
        cat.save_personas(&personas)?;
        cat.save_track_locked(&track)?;
        cat.save_schedule(&manifest.id, &schedule)?;
    }
    run.job.report = Some(report.clone());
    run.enter(JobState::Done)?;
    info!(job = %run.job.job_id, danmaku = track.len(), violations = report.violations.len(), "job done");
    Ok(JobOutput { job: run.job, clips, personas, track, report, schedule })
}
