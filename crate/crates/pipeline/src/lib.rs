//! Frame loop, configuration and frame sources.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod config;
pub mod model_file;
pub mod pipeline;
pub mod script;
pub mod source;

pub use config::{BackendChoice, ConfigError, InterfaceChoice, PipelineConfig};
pub use pipeline::{
    run, run_calibration, run_loop, CommandOutcome, FrameReport, InterfaceSource, LoopObserver, NoObserver,
    OperatorCommand, Phase, Pipeline, PipelineError, ReportLog, RunSummary, StageTimings,
};
pub use script::GestureScript;
pub use source::{open_source, FrameSource, ImageSequence, ScriptSource, SourceKind};
