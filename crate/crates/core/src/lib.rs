//! Danmaku generation engine for educational videos.
//!
//! The crate turns a [`VideoManifest`](video_model::VideoManifest) into a typed,
//! validated and collision-free danmaku track:
//!
//! 1. [`video_model`] segments the video into scene clips, samples frame times and
//!    builds the text- and clip-level descriptions.
//! 2. [`persona`] builds the virtual-viewer prompt and parses the six personas.
//! 3. [`prompting`] assembles the system and user prompts from a
//!    [`GenerationConfig`](prompting::GenerationConfig).
//! 4. [`llm_client`] talks to a chat-completion endpoint, or to a deterministic mock.
//! 5. [`track_parser`] turns the Markdown response into [`Danmaku`](danmaku::Danmaku)
//!    records and back.
//! 6. [`validator`] checks the rate, gap, length and reply rules and repairs what it can.
//! 7. [`scheduler`] assigns scroll lanes and pinned slots.
//! 8. [`store`] persists everything on disk and converts to the `<d p="...">` XML format.
//! 9. [`pipeline`] runs the whole thing as a job.
//!
//! Runnable walkthroughs of each stage live in this crate's `examples/` directory.

// `!(x > 0.0)` is used on purpose so NaN is rejected too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod danmaku;
pub mod llm_client;
pub mod persona;
pub mod pipeline;
pub mod prompting;
pub mod scheduler;
pub mod store;
pub mod timecode;
pub mod track_parser;
pub mod validator;
pub mod video_model;

pub use danmaku::{Category, Danmaku, DanmakuTrack, DanmakuType, Position, Rgb};
pub use persona::{Persona, PersonaSet};
pub use prompting::GenerationConfig;
pub use video_model::VideoManifest;
