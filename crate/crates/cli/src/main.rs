use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use comet_core::llm_client::{BackendKind, HttpBackend, LmmClient, MockBackend};
use comet_core::persona::{parse_personas, Persona, PersonaSet};
use comet_core::pipeline::{run_job, PipelineError, RunOptions};
use comet_core::store::{export_interop_xml, import_interop_xml, Catalog};
use comet_core::track_parser::{parse_track, render_track};
use comet_core::validator::{track_stats, validate};
use comet_core::{DanmakuTrack, GenerationConfig, VideoManifest};
use comet_service::{serve, ServiceConfig};

/// Upper bound on timestamps when a command is not told the video length.
const UNBOUNDED_S: f64 = 86_400.0;

#[derive(Parser)]
#[command(name = "comet", version, about = "Generate, check and serve danmaku tracks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the generation pipeline on a video manifest.
    Generate {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Defaults to COMET_LLM_BACKEND, then mock.
        #[arg(long, value_enum)]
        backend: Option<Backend>,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        /// Catalog directory the job writes into.
        #[arg(long, default_value = "comet-data")]
        out_dir: PathBuf,
    },
    /// Check a track against the rate, gap, length and reply rules.
    Validate {
        #[arg(long)]
        track: PathBuf,
        #[arg(long)]
        duration: f64,
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Convert between track JSON, danmaku XML and the Markdown response format.
    Convert {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        to: Format,
        /// Write here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Video length, used to bound imported timestamps.
        #[arg(long)]
        duration: Option<f64>,
        /// Persona JSON for Markdown input; labels A-F are assumed otherwise.
        #[arg(long)]
        personas: Option<PathBuf>,
        /// Video id for XML and Markdown input; defaults to the file stem.
        #[arg(long)]
        video_id: Option<String>,
    },
    /// Print summary statistics for a track.
    Stats {
        #[arg(long)]
        track: PathBuf,
        /// Defaults to the time of the last danmaku.
        #[arg(long)]
        duration: Option<f64>,
    },
    /// Serve a catalog over HTTP.
    Serve {
        #[arg(long, default_value = "comet-data")]
        data_dir: PathBuf,
        /// Overrides COMET_BIND_ADDR.
        #[arg(long)]
        bind: Option<SocketAddr>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Mock,
    Http,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum Format {
    Json,
    Xml,
    Markdown,
}

impl Format {
    fn of(path: &Path) -> Option<Format> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "json" => Some(Format::Json),
            "xml" => Some(Format::Xml),
            "md" | "markdown" => Some(Format::Markdown),
            _ => None,
        }
    }
}

enum Outcome {
    Clean,
    Violations,
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    match run(Cli::parse()) {
        Ok(Outcome::Clean) => ExitCode::SUCCESS,
        Ok(Outcome::Violations) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<Outcome> {
    match cli.command {
        Command::Generate { manifest, config, backend, seed, out_dir } => {
            generate(&manifest, config.as_deref(), backend, seed, &out_dir)
        }
        Command::Validate { track, duration, config } => {
            let track = load_track(&track, Some(duration), None, None)?;
            let config = load_config(config.as_deref())?;
            let report = validate(&track, duration, &config);
            emit(format!("{}\n", report.to_json()).as_bytes())?;
            Ok(if report.is_clean() { Outcome::Clean } else { Outcome::Violations })
        }
        Command::Convert { input, to, out, duration, personas, video_id } => {
            let track = load_track(&input, duration, personas.as_deref(), video_id)?;
            let bytes = match to {
                Format::Json => serde_json::to_string_pretty(&track)?.into_bytes(),
                Format::Xml => export_interop_xml(&track),
                Format::Markdown => render_track(&track).into_bytes(),
            };
            match out {
                Some(path) => fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?,
                None => emit(&bytes)?,
            }
            Ok(Outcome::Clean)
        }
        Command::Stats { track, duration } => {
            let track = load_track(&track, duration, None, None)?;
            let span = duration.unwrap_or_else(|| track.danmaku.iter().map(|d| d.time_s).fold(0.0, f64::max));
            let stats = track_stats(&track, span, GenerationConfig::default().length_unit);
            let mut value = serde_json::to_value(&stats)?;
            value["density_ratio"] = serde_json::json!(stats.density_ratio());
            emit(format!("{}\n", serde_json::to_string_pretty(&value)?).as_bytes())?;
            Ok(Outcome::Clean)
        }
        Command::Serve { data_dir, bind } => {
            let mut config = ServiceConfig::from_env(data_dir);
            if let Some(addr) = bind {
                config.bind_addr = addr;
            }
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(serve(config))?;
            Ok(Outcome::Clean)
        }
    }
}

/// Writes to stdout; a closed pipe is not an error.
fn emit(bytes: &[u8]) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(bytes).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn load_config(path: Option<&Path>) -> Result<GenerationConfig> {
    match path {
        None => Ok(GenerationConfig::default()),
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            GenerationConfig::from_json(&text).map_err(|e| anyhow::anyhow!("{}: {e}", p.display()))
        }
    }
}

fn generate(
    manifest: &Path,
    config: Option<&Path>,
    backend: Option<Backend>,
    seed: u64,
    out_dir: &Path,
) -> Result<Outcome> {
    let text = fs::read_to_string(manifest).with_context(|| format!("reading {}", manifest.display()))?;
    let manifest = VideoManifest::from_json(&text).map_err(|e| anyhow::anyhow!("{e}"))?;
    let config = load_config(config)?;
    let kind = match backend {
        Some(Backend::Mock) => BackendKind::Mock,
        Some(Backend::Http) => BackendKind::Http,
        None => BackendKind::from_env()?,
    };
    let client = match kind {
        BackendKind::Mock => LmmClient::new(MockBackend::new(manifest.clone(), config.clone(), seed)),
        BackendKind::Http => LmmClient::new(HttpBackend::from_env()?),
    };
    let catalog = Catalog::open(out_dir)?;
    let opts = RunOptions {
        job_id: format!("job-{}-{seed}", manifest.id),
        catalog: Some(catalog.clone()),
        ..RunOptions::default()
    };
    let out = match run_job(&manifest, &config, &client, &opts, |j| eprintln!("{}: {:?}", j.job_id, j.state)) {
        Ok(out) => out,
        Err(PipelineError::JobFailed { stage, attempts, reason, .. }) => {
            bail!("job failed at {stage:?} after {attempts} attempt(s): {reason}")
        }
        Err(e) => return Err(e.into()),
    };
    let dir = catalog.video_dir(&manifest.id);
    let mut summary = format!(
        "track     {}\nschedule  {}\ndanmaku   {}\nattempts  {}\nremaining violations {}\n",
        dir.join("track.json").display(),
        dir.join("schedule.json").display(),
        out.track.len(),
        out.job.attempts,
        out.report.violations.len()
    );
    for v in &out.report.violations {
        summary.push_str(&format!("  {}: {}\n", v.rule, v.detail));
    }
    emit(summary.as_bytes())?;
    Ok(if out.report.is_clean() { Outcome::Clean } else { Outcome::Violations })
}

fn placeholder_personas(video_id: &str) -> PersonaSet {
    let personas = "ABCDEF"
        .chars()
        .map(|label| Persona {
            label,
            age: 0,
            region: String::new(),
            personality: String::new(),
            danmaku_sending_style: String::new(),
            learning_habits: String::new(),
            reasons_for_watching: String::new(),
        })
        .collect();
    PersonaSet { video_id: video_id.to_string(), personas }
}

fn load_track(
    path: &Path,
    duration: Option<f64>,
    personas: Option<&Path>,
    video_id: Option<String>,
) -> Result<DanmakuTrack> {
    let Some(format) = Format::of(path) else {
        bail!("{}: expected a .json, .xml or .md file", path.display());
    };
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let video_id = video_id
        .or_else(|| path.file_stem().map(|s| s.to_string_lossy().into_owned()))
        .unwrap_or_else(|| "video".into());
    let duration = duration.unwrap_or(UNBOUNDED_S);
    let track = match format {
        Format::Json => {
            let track: DanmakuTrack =
                serde_json::from_slice(&bytes).with_context(|| format!("parsing {}", path.display()))?;
            track.check(duration).map_err(|e| anyhow::anyhow!("{}: {e}", path.display()))?;
            track
        }
        Format::Xml => {
            let imported = import_interop_xml(&bytes, &video_id, duration)?;
            for w in &imported.warnings {
                eprintln!("warning: element {}: {:?} {}", w.element, w.kind, w.detail);
            }
            imported.track
        }
        Format::Markdown => {
            let set = match personas {
                Some(p) => parse_personas(&fs::read_to_string(p)?, &video_id)?,
                None => placeholder_personas(&video_id),
            };
            let text = String::from_utf8(bytes).context("Markdown input must be UTF-8")?;
            let (track, warnings) = parse_track(&text, &set, duration)?;
            for w in &warnings {
                eprintln!("warning: line {}: {:?} {}", w.line_no, w.kind, w.raw);
            }
            track
        }
    };
    Ok(track)
}
