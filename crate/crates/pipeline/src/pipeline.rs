//! The per-frame chain: FIZI, labeling, tracking, mapping, hit-testing,
//! click detection and order execution.

use std::ops::ControlFlow;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::{Duration, Instant};

use palmkey_core::engine::{
    DirectSystemIntegration, Engine, EngineBackend, EngineError, InterfaceControl, LoggingInjector, Order, Receipt,
    Recorder,
};
use palmkey_core::fizi::{fizi_mask, BackgroundLearner, BackgroundModel, FiziError};
use palmkey_core::imaging::{Execution, Frame};
use palmkey_core::interface::{
    build_lookup, parse_interface, ClickDetector, ClickEdge, InterfaceError, InterfaceSpec, Interaction, LookupTable,
    ZoneEvent,
};
use palmkey_core::mapping::{CursorState, MappingError, MappingMode};
use palmkey_core::regions::{label_components, track, BBox, TrackState};
use palmkey_core::samples;
use thiserror::Error;

use crate::config::{BackendChoice, ConfigError, InterfaceChoice, PipelineConfig};
use crate::model_file::{load_model, ModelFileError};
use crate::source::{open_source, FrameSource, SourceError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),

    #[error(transparent)]
    Interface(#[from] InterfaceError),

    #[error(transparent)]
    Source(#[from] SourceError),

    #[error(transparent)]
    ModelFile(#[from] ModelFileError),

    #[error(transparent)]
    Fizi(#[from] FiziError),

    #[error(transparent)]
    Mapping(#[from] MappingError),

    #[error(transparent)]
    Engine(#[from] EngineError),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("source ended after {got} of {needed} calibration frames")]
    CalibrationIncomplete { got: usize, needed: usize },

    #[error("{0}")]
    Rejected(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct StageTimings {
    pub fizi: Duration,
    pub label: Duration,
    pub track: Duration,
    pub map: Duration,
    pub interact: Duration,
    pub execute: Duration,
    /// Wall time of the whole `process_frame` call.
    pub total: Duration,
}

impl StageTimings {
    pub const STAGES: [&'static str; 6] = ["fizi", "label", "track", "map", "interact", "execute"];

    pub fn stages(&self) -> [Duration; 6] {
        [self.fizi, self.label, self.track, self.map, self.interact, self.execute]
    }

    pub fn stage_sum(&self) -> Duration {
        self.stages().iter().sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandReport {
    pub centroid: (f64, f64),
    pub area: usize,
    pub bbox: BBox,
    /// Seen on this frame rather than held over.
    pub fresh: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExecutedOrder {
    pub order: Order,
    pub timestamp_ms: u64,
    pub result: Result<Receipt, String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    Calibrating { collected: usize, needed: usize },
    Running,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FrameReport {
    pub frame_index: u64,
    pub timestamp_ms: u64,
    pub phase: Phase,
    pub mask_pixels: usize,
    pub region_count: usize,
    pub hand: Option<HandReport>,
    pub cursor: (f64, f64),
    pub mode: MappingMode,
    pub pressed: bool,
    pub page: String,
    pub zone: Option<String>,
    pub edge: ClickEdge,
    pub events: Vec<ZoneEvent>,
    pub page_changed: Option<String>,
    pub orders: Vec<ExecutedOrder>,
    pub text_buffer: Option<String>,
    pub timings: StageTimings,
    pub errors: Vec<String>,
}

/// Where a new interface comes from.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InterfaceSource {
    Choice(InterfaceChoice),
    Xml(String),
}

#[derive(Clone, Debug, PartialEq)]
pub enum OperatorCommand {
    LoadInterface(InterfaceSource),
    SetMappingMode(MappingMode),
    GotoPage(String),
    /// Relearn the background over the next frames (default: the configured
    /// count).
    Recalibrate { frames: Option<usize> },
    SetParam { key: String, value: String },
}

impl OperatorCommand {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorCommand::LoadInterface(_) => "load_interface",
            OperatorCommand::SetMappingMode(_) => "set_mapping_mode",
            OperatorCommand::GotoPage(_) => "goto_page",
            OperatorCommand::Recalibrate { .. } => "recalibrate",
            OperatorCommand::SetParam { .. } => "set_param",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct CommandOutcome {
    pub spec_changed: bool,
    pub events: Vec<ZoneEvent>,
}

/// Keys that only take effect at startup.
const STARTUP_KEYS: &[&str] = &[
    "engine.backend",
    "engine.record_path",
    "gateway.port",
    "calibration.model",
    "source",
];

pub fn load_interface(choice: &InterfaceChoice) -> Result<InterfaceSpec, PipelineError> {
    match choice {
        InterfaceChoice::Keyboard => Ok(parse_interface(samples::KEYBOARD_XML)?),
        InterfaceChoice::Mouse => Ok(parse_interface(samples::MOUSE_XML)?),
        InterfaceChoice::File(path) => {
            let text = std::fs::read_to_string(path).map_err(|source| PipelineError::Io {
                path: path.clone(),
                source,
            })?;
            Ok(parse_interface(&text)?)
        }
    }
}

/// Backend named by the configuration.
pub fn make_backend(config: &PipelineConfig) -> Result<Box<dyn EngineBackend>, PipelineError> {
    Ok(match config.backend {
        BackendChoice::InterfaceControl => Box::new(InterfaceControl::new()),
        BackendChoice::DirectSystem => Box::new(DirectSystemIntegration::new(LoggingInjector::default())),
        BackendChoice::Record => match &config.record_path {
            None => Box::new(Recorder::in_memory()),
            Some(path) => {
                let file = std::fs::File::create(path).map_err(|source| PipelineError::Io {
                    path: path.clone(),
                    source,
                })?;
                Box::new(Recorder::to_writer(Box::new(file)))
            }
        },
    })
}

/// Learn a background model from the next `n_frames` frames.
pub fn run_calibration(source: &mut dyn FrameSource, n_frames: usize, sigma_min: f64) -> Result<BackgroundModel, PipelineError> {
    if n_frames < 2 {
        return Err(FiziError::TooFewFrames(n_frames).into());
    }
    let (w, h) = source.dims();
    let mut learner = BackgroundLearner::new(w, h);
    for got in 0..n_frames {
        let frame = source
            .next_frame()
            .ok_or(PipelineError::CalibrationIncomplete { got, needed: n_frames })??;
        learner.push(&frame)?;
    }
    Ok(learner.finish(sigma_min)?)
}

struct Calibration {
    learner: BackgroundLearner,
    needed: usize,
}

pub struct Pipeline {
    config: PipelineConfig,
    frame_dims: (usize, usize),
    fps: f64,
    spec: Arc<InterfaceSpec>,
    table: LookupTable,
    background: Option<BackgroundModel>,
    calibration: Option<Calibration>,
    track: TrackState,
    cursor: CursorState,
    click: ClickDetector,
    interaction: Interaction,
    engine: Engine,
}

impl Pipeline {
    /// Pipeline with the configured backend. Without a configured background
    /// model the first `calibration.frames` frames are used to learn one.
    pub fn new(config: PipelineConfig, frame_dims: (usize, usize), fps: f64) -> Result<Self, PipelineError> {
        let backend = make_backend(&config)?;
        Self::with_backend(config, frame_dims, fps, backend)
    }

    pub fn with_backend(
        config: PipelineConfig,
        frame_dims: (usize, usize),
        fps: f64,
        backend: Box<dyn EngineBackend>,
    ) -> Result<Self, PipelineError> {
        config.validate()?;
        if !(fps > 0.0) {
            return Err(PipelineError::Rejected(format!("frame rate must be positive, got {fps}")));
        }
        config.mapping.params(frame_dims).validate()?;
        let spec = load_interface(&config.interface)?;
        let background = match &config.background_model {
            Some(path) => {
                let model = load_model(path)?;
                if model.dims() != frame_dims {
                    return Err(PipelineError::Rejected(format!(
                        "background model is {:?}, frames are {:?}",
                        model.dims(),
                        frame_dims
                    )));
                }
                Some(model)
            }
            None => None,
        };
        let mut p = Self {
            table: build_lookup(&spec, config.cell_size),
            cursor: CursorState::centered(config.mapping.mode, spec.dims()),
            click: ClickDetector::new(config.click),
            interaction: Interaction::new(&spec),
            spec: Arc::new(spec),
            engine: Engine::new(backend),
            track: TrackState::default(),
            calibration: None,
            background,
            frame_dims,
            fps,
            config,
        };
        if p.background.is_none() {
            p.start_calibration(p.config.calibration_frames);
        }
        Ok(p)
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn spec(&self) -> &Arc<InterfaceSpec> {
        &self.spec
    }

    pub fn page_id(&self) -> &str {
        self.interaction.page_id(&self.spec)
    }

    pub fn cursor(&self) -> &CursorState {
        &self.cursor
    }

    pub fn pressed(&self) -> bool {
        self.click.pressed()
    }

    pub fn background(&self) -> Option<&BackgroundModel> {
        self.background.as_ref()
    }

    pub fn backend(&self) -> &dyn EngineBackend {
        self.engine.backend()
    }

    pub fn is_calibrating(&self) -> bool {
        self.calibration.is_some()
    }

    pub fn set_background(&mut self, model: BackgroundModel) -> Result<(), PipelineError> {
        if model.dims() != self.frame_dims {
            return Err(PipelineError::Rejected(format!(
                "background model is {:?}, frames are {:?}",
                model.dims(),
                self.frame_dims
            )));
        }
        self.background = Some(model);
        self.calibration = None;
        Ok(())
    }

    fn start_calibration(&mut self, needed: usize) {
        self.calibration = Some(Calibration {
            learner: BackgroundLearner::new(self.frame_dims.0, self.frame_dims.1),
            needed,
        });
    }

    /// Deterministic frame timestamp derived from the frame index.
    pub fn timestamp_ms(&self, frame_index: u64) -> u64 {
        (frame_index as f64 * 1000.0 / self.fps).round() as u64
    }

    fn blank_report(&self, frame: &Frame) -> FrameReport {
        FrameReport {
            frame_index: frame.frame_index,
            timestamp_ms: self.timestamp_ms(frame.frame_index),
            phase: Phase::Running,
            mask_pixels: 0,
            region_count: 0,
            hand: None,
            cursor: self.cursor.pos,
            mode: self.cursor.mode,
            pressed: self.click.pressed(),
            page: self.page_id().to_string(),
            zone: self.hovered_id(),
            edge: ClickEdge::None,
            events: Vec::new(),
            page_changed: None,
            orders: Vec::new(),
            text_buffer: self.engine.backend().text_buffer().map(str::to_string),
            timings: StageTimings::default(),
            errors: Vec::new(),
        }
    }

    fn hovered_id(&self) -> Option<String> {
        let page = &self.spec.pages[self.interaction.page()];
        self.interaction.hovered().map(|z| page.zones[z].id.clone())
    }

    /// Run one frame through the chain. Stage failures are recorded in the
    /// report and leave the state as it was before the failing stage.
    pub fn process_frame(&mut self, frame: &Frame) -> FrameReport {
        let start = Instant::now();
        let mut report = self.blank_report(frame);
        if frame.dims() != self.frame_dims {
            report.errors.push(format!(
                "frame {} is {:?}, expected {:?}",
                frame.frame_index,
                frame.dims(),
                self.frame_dims
            ));
            report.timings.total = start.elapsed();
            return report;
        }

        if let Some(cal) = self.calibration.as_mut() {
            if let Err(e) = cal.learner.push(frame) {
                report.errors.push(e.to_string());
            }
            let collected = cal.learner.count() as usize;
            report.phase = Phase::Calibrating {
                collected,
                needed: cal.needed,
            };
            if collected >= cal.needed {
                let cal = self.calibration.take().expect("calibrating");
                match cal.learner.finish(self.config.fizi.sigma_min) {
                    Ok(model) => {
                        log::info!("background learned from {collected} frames");
                        self.background = Some(model);
                    }
                    Err(e) => report.errors.push(e.to_string()),
                }
            }
            report.timings.total = start.elapsed();
            return report;
        }
        let Some(bg) = self.background.as_ref() else {
            report.errors.push("no background model".into());
            report.timings.total = start.elapsed();
            return report;
        };

        let exec = if self.config.parallel {
            Execution::Parallel
        } else {
            Execution::Sequential
        };
        let t = Instant::now();
        let mask = fizi_mask(frame, bg, &self.config.fizi, exec);
        report.timings.fizi = t.elapsed();
        let mask = match mask {
            Ok(m) => m,
            Err(e) => {
                report.errors.push(e.to_string());
                report.timings.total = start.elapsed();
                return report;
            }
        };
        report.mask_pixels = mask.count();

        let t = Instant::now();
        let regions = label_components(&mask, self.config.track.connectivity);
        report.timings.label = t.elapsed();
        report.region_count = regions.len();

        let t = Instant::now();
        self.track = track(&self.track, &regions, self.frame_dims, frame.frame_index, &self.config.track);
        report.timings.track = t.elapsed();
        let fresh = self.track.is_fresh();
        report.hand = self.track.current.as_ref().map(|r| HandReport {
            centroid: r.centroid,
            area: r.area,
            bbox: r.bbox,
            fresh,
        });
        let hand = self.track.current.as_ref().filter(|_| fresh);

        let t = Instant::now();
        let params = self.config.mapping.params(self.frame_dims);
        match self.cursor.update(hand.map(|r| r.centroid), &params, self.spec.dims()) {
            Ok(c) => self.cursor = c,
            Err(e) => report.errors.push(e.to_string()),
        }
        report.timings.map = t.elapsed();

        let t = Instant::now();
        let edge = match hand {
            Some(r) => self.click.update(r.area as f64),
            None => ClickEdge::None,
        };
        let outcome = self
            .interaction
            .interact(&self.spec, &self.table, self.cursor.pos, edge, report.timestamp_ms);
        report.timings.interact = t.elapsed();

        let t = Instant::now();
        if let Some(order) = outcome.order {
            let result = self.engine.execute(order, report.timestamp_ms);
            match &result {
                Ok(r) => log::info!("order #{} {order} at {} ms", r.seq, report.timestamp_ms),
                Err(e) => {
                    log::warn!("order {order} failed: {e}");
                    report.errors.push(e.to_string());
                }
            }
            report.orders.push(ExecutedOrder {
                order,
                timestamp_ms: report.timestamp_ms,
                result: result.map_err(|e| e.to_string()),
            });
        }
        report.timings.execute = t.elapsed();

        report.cursor = self.cursor.pos;
        report.mode = self.cursor.mode;
        report.pressed = self.click.pressed();
        report.edge = edge;
        report.events = outcome.events;
        report.page_changed = outcome.new_page;
        report.page = self.page_id().to_string();
        report.zone = self.hovered_id();
        report.text_buffer = self.engine.backend().text_buffer().map(str::to_string);
        report.timings.total = start.elapsed();
        report
    }

    fn install_spec(&mut self, spec: InterfaceSpec, cell_size: u32) {
        let (w, h) = spec.dims();
        self.table = build_lookup(&spec, cell_size);
        self.interaction = Interaction::new(&spec);
        self.cursor.pos = (
            self.cursor.pos.0.clamp(0.0, w.saturating_sub(1) as f64),
            self.cursor.pos.1.clamp(0.0, h.saturating_sub(1) as f64),
        );
        self.spec = Arc::new(spec);
    }

    /// Apply an operator command. Called between frames only, so no frame
    /// sees a partly applied change. On error nothing changes.
    pub fn apply_command(&mut self, cmd: &OperatorCommand) -> Result<CommandOutcome, PipelineError> {
        let mut out = CommandOutcome::default();
        match cmd {
            OperatorCommand::LoadInterface(src) => {
                let spec = match src {
                    InterfaceSource::Choice(c) => load_interface(c)?,
                    InterfaceSource::Xml(xml) => parse_interface(xml)?,
                };
                if let InterfaceSource::Choice(c) = src {
                    self.config.interface = c.clone();
                }
                self.install_spec(spec, self.config.cell_size);
                out.spec_changed = true;
            }
            OperatorCommand::SetMappingMode(mode) => {
                self.config.mapping.mode = *mode;
                self.cursor = self.cursor.with_mode(*mode);
            }
            OperatorCommand::GotoPage(id) => {
                out.events = self.interaction.goto_page(&self.spec, id)?;
            }
            OperatorCommand::Recalibrate { frames } => {
                let n = frames.unwrap_or(self.config.calibration_frames);
                if n < 2 {
                    return Err(FiziError::TooFewFrames(n).into());
                }
                self.start_calibration(n);
            }
            OperatorCommand::SetParam { key, value } => {
                if STARTUP_KEYS.contains(&key.as_str()) {
                    return Err(PipelineError::Rejected(format!("{key} only takes effect at startup")));
                }
                let mut next = self.config.clone();
                next.set(key, value)?;
                next.mapping.params(self.frame_dims).validate()?;
                let reload = next.interface != self.config.interface;
                let new_spec = if reload { Some(load_interface(&next.interface)?) } else { None };
                if let Some(spec) = new_spec {
                    self.install_spec(spec, next.cell_size);
                    out.spec_changed = true;
                } else if next.cell_size != self.config.cell_size {
                    self.table = build_lookup(&self.spec, next.cell_size);
                }
                if next.mapping.mode != self.config.mapping.mode {
                    self.cursor = self.cursor.with_mode(next.mapping.mode);
                }
                self.click.set_params(next.click);
                self.config = next;
            }
        }
        Ok(out)
    }
}

/// Hooks the frame loop calls around each frame.
pub trait LoopObserver {
    /// Called before every frame; apply pending commands here.
    fn between_frames(&mut self, _pipeline: &mut Pipeline) -> ControlFlow<()> {
        ControlFlow::Continue(())
    }

    fn on_report(&mut self, _pipeline: &Pipeline, _report: &FrameReport) {}
}

/// Observer that does nothing.
pub struct NoObserver;

impl LoopObserver for NoObserver {}

/// Collects every report.
#[derive(Default)]
pub struct ReportLog {
    pub reports: Vec<FrameReport>,
}

impl LoopObserver for ReportLog {
    fn on_report(&mut self, _pipeline: &Pipeline, report: &FrameReport) {
        self.reports.push(report.clone());
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunSummary {
    pub frames: u64,
    pub orders: Vec<Order>,
    pub text_buffer: Option<String>,
    pub log_lines: Option<Vec<String>>,
    pub stage_errors: usize,
    pub elapsed: Duration,
}

/// Drive `pipeline` until the source ends or the observer stops the loop.
pub fn run_loop(
    pipeline: &mut Pipeline,
    source: &mut dyn FrameSource,
    observer: &mut dyn LoopObserver,
) -> Result<RunSummary, PipelineError> {
    let start = Instant::now();
    let mut summary = RunSummary::default();
    loop {
        if observer.between_frames(pipeline).is_break() {
            break;
        }
        let Some(frame) = source.next_frame() else {
            break;
        };
        let frame = frame?;
        let report = pipeline.process_frame(&frame);
        summary.frames += 1;
        summary.stage_errors += report.errors.len();
        for e in &report.errors {
            log::warn!("frame {}: {e}", report.frame_index);
        }
        summary.orders.extend(report.orders.iter().filter(|o| o.result.is_ok()).map(|o| o.order));
        log::debug!(
            "frame {} mask={} regions={} cursor=({:.1},{:.1}) page={} total={:?}",
            report.frame_index,
            report.mask_pixels,
            report.region_count,
            report.cursor.0,
            report.cursor.1,
            report.page,
            report.timings.total
        );
        observer.on_report(pipeline, &report);
    }
    if let Some(cal) = &pipeline.calibration {
        if summary.frames > 0 && pipeline.background.is_none() {
            return Err(PipelineError::CalibrationIncomplete {
                got: cal.learner.count() as usize,
                needed: cal.needed,
            });
        }
    }
    summary.text_buffer = pipeline.backend().text_buffer().map(str::to_string);
    summary.log_lines = pipeline.backend().log_lines().map(<[String]>::to_vec);
    summary.elapsed = start.elapsed();
    Ok(summary)
}

/// Open the configured source, calibrate and process every frame.
pub fn run(config: &PipelineConfig, observer: &mut dyn LoopObserver) -> Result<RunSummary, PipelineError> {
    let spec = config
        .source
        .as_deref()
        .ok_or_else(|| PipelineError::Rejected("no frame source configured".into()))?;
    let mut source = open_source(spec)?;
    let mut pipeline = Pipeline::new(config.clone(), source.dims(), source.fps_hint())?;
    run_loop(&mut pipeline, source.as_mut(), observer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::script::GestureScript;
    use crate::source::ScriptSource;

    fn small_config() -> PipelineConfig {
        PipelineConfig {
            calibration_frames: 3,
            ..PipelineConfig::default()
        }
    }

    fn source(text: &str) -> ScriptSource {
        ScriptSource::new(GestureScript::parse(text, None).unwrap())
    }

    #[test]
    fn calibration_then_running() {
        let mut src = source("size 64 48\nnone\nnone\nnone\nnone\n");
        let mut p = Pipeline::new(small_config(), (64, 48), 30.0).unwrap();
        let phases: Vec<Phase> = std::iter::from_fn(|| src.next_frame())
            .map(|f| p.process_frame(&f.unwrap()).phase)
            .collect();
        assert_eq!(
            phases,
            vec![
                Phase::Calibrating { collected: 1, needed: 3 },
                Phase::Calibrating { collected: 2, needed: 3 },
                Phase::Calibrating { collected: 3, needed: 3 },
                Phase::Running,
            ]
        );
        assert!(!p.is_calibrating());
    }

    #[test]
    fn background_only_frame_changes_nothing() {
        let mut src = source("size 64 48\nnone\nnone\nnone\nnone\n");
        let mut p = Pipeline::new(small_config(), (64, 48), 30.0).unwrap();
        let before = *p.cursor();
        let last = std::iter::from_fn(|| src.next_frame())
            .map(|f| p.process_frame(&f.unwrap()))
            .last()
            .unwrap();
        assert_eq!(last.mask_pixels, 0);
        assert_eq!(last.hand, None);
        assert!(last.orders.is_empty());
        assert_eq!(last.cursor, before.pos);
        assert!(last.errors.is_empty());
    }

    #[test]
    fn timings_fit_in_total() {
        let mut src = source("size 64 48\nnone\nnone\nnone\n30 20 8 10 open\n30 20 8 10 open\n");
        let mut p = Pipeline::new(small_config(), (64, 48), 30.0).unwrap();
        for f in std::iter::from_fn(|| src.next_frame()) {
            let r = p.process_frame(&f.unwrap());
            assert!(r.timings.stage_sum() <= r.timings.total);
        }
    }

    #[test]
    fn wrong_dims_recorded_not_fatal() {
        let mut p = Pipeline::new(small_config(), (64, 48), 30.0).unwrap();
        let r = p.process_frame(&Frame::filled(32, 32, [0, 0, 0]).unwrap());
        assert_eq!(r.errors.len(), 1);
    }

    #[test]
    fn run_calibration_counts_frames() {
        let mut src = source("size 8 8\nnone\nnone\nnone\n");
        let model = run_calibration(&mut src, 2, 2.0).unwrap();
        assert_eq!(model.sample_count(), 2);
        assert!(model.std().iter().flatten().all(|s| *s == 2.0));
        assert!(matches!(
            run_calibration(&mut src, 2, 2.0),
            Err(PipelineError::CalibrationIncomplete { got: 1, needed: 2 })
        ));
        assert!(matches!(run_calibration(&mut src, 1, 2.0), Err(PipelineError::Fizi(_))));
    }

    #[test]
    fn commands_apply_or_leave_state() {
        let mut p = Pipeline::new(small_config(), (64, 48), 30.0).unwrap();
        p.apply_command(&OperatorCommand::GotoPage("digits".into())).unwrap();
        assert_eq!(p.page_id(), "digits");
        assert!(p.apply_command(&OperatorCommand::GotoPage("emoji".into())).is_err());
        assert_eq!(p.page_id(), "digits");

        p.apply_command(&OperatorCommand::SetMappingMode(MappingMode::NonlinearRelative))
            .unwrap();
        assert_eq!(p.cursor().mode, MappingMode::NonlinearRelative);
        assert_eq!(p.config().mapping.mode, MappingMode::NonlinearRelative);

        let set = |k: &str, v: &str| OperatorCommand::SetParam {
            key: k.into(),
            value: v.into(),
        };
        p.apply_command(&set("click.down_ratio", "0.5")).unwrap();
        assert_eq!(p.config().click.down_ratio, 0.5);
        assert!(p.apply_command(&set("click.down_ratio", "0.95")).is_err());
        assert!(p.apply_command(&set("engine.backend", "record")).is_err());
        assert_eq!(p.config().click.down_ratio, 0.5);

        let out = p.apply_command(&set("interface.path", "builtin:mouse")).unwrap();
        assert!(out.spec_changed);
        assert_eq!(p.spec().name, "mouse");
        assert_eq!(p.page_id(), "pad");

        let out = p
            .apply_command(&OperatorCommand::LoadInterface(InterfaceSource::Xml(
                samples::KEYBOARD_XML.into(),
            )))
            .unwrap();
        assert!(out.spec_changed);
        assert_eq!(p.spec().name, "keyboard");
        assert!(p
            .apply_command(&OperatorCommand::LoadInterface(InterfaceSource::Xml("<nope/>".into())))
            .is_err());
        assert_eq!(p.spec().name, "keyboard");

        assert!(p.is_calibrating());
        let model = BackgroundModel::from_parts(64, 48, vec![[0.0; 3]; 64 * 48], vec![[2.0; 3]; 64 * 48], 2).unwrap();
        p.set_background(model).unwrap();
        assert!(!p.is_calibrating());
        p.apply_command(&OperatorCommand::Recalibrate { frames: Some(4) }).unwrap();
        assert!(p.is_calibrating());
        assert!(p.apply_command(&OperatorCommand::Recalibrate { frames: Some(1) }).is_err());
    }

    #[test]
    fn incomplete_calibration_fails_the_run() {
        let mut src = source("size 8 8\nnone\nnone\n");
        let mut p = Pipeline::new(small_config(), (8, 8), 30.0).unwrap();
        assert!(matches!(
            run_loop(&mut p, &mut src, &mut NoObserver),
            Err(PipelineError::CalibrationIncomplete { got: 2, needed: 3 })
        ));
    }
}
