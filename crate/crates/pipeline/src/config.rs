//! Flat `key = value` configuration.
//!
//! One key per line, `#` starts a comment, blank lines are ignored. Every
//! key has a default, so an empty file is a valid configuration. Unknown keys
//! are rejected.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use palmkey_core::fizi::FiziParams;
use palmkey_core::interface::ClickParams;
use palmkey_core::mapping::{MappingMode, MappingParams};
use palmkey_core::regions::{Connectivity, TrackParams};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },

    #[error("unknown configuration key {0:?}")]
    UnknownKey(String),

    #[error("bad value {value:?} for {key}: {reason}")]
    InvalidValue {
        key: String,
        value: String,
        reason: String,
    },

    #[error("invalid configuration: {0}")]
    Invalid(String),

    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InterfaceChoice {
    Keyboard,
    Mouse,
    File(PathBuf),
}

impl InterfaceChoice {
    fn as_value(&self) -> String {
        match self {
            InterfaceChoice::Keyboard => "builtin:keyboard".into(),
            InterfaceChoice::Mouse => "builtin:mouse".into(),
            InterfaceChoice::File(p) => p.display().to_string(),
        }
    }
}

impl FromStr for InterfaceChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "builtin:keyboard" => Ok(InterfaceChoice::Keyboard),
            "builtin:mouse" => Ok(InterfaceChoice::Mouse),
            other if other.starts_with("builtin:") => Err("known builtins are keyboard and mouse".into()),
            "" => Err("empty path".into()),
            path => Ok(InterfaceChoice::File(path.into())),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum BackendChoice {
    #[default]
    InterfaceControl,
    DirectSystem,
    Record,
}

impl BackendChoice {
    pub fn as_str(self) -> &'static str {
        match self {
            BackendChoice::InterfaceControl => "ic",
            BackendChoice::DirectSystem => "dsi",
            BackendChoice::Record => "record",
        }
    }
}

impl FromStr for BackendChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ic" => Ok(BackendChoice::InterfaceControl),
            "dsi" => Ok(BackendChoice::DirectSystem),
            "record" => Ok(BackendChoice::Record),
            _ => Err("expected ic, dsi or record".into()),
        }
    }
}

/// Mapping knobs that do not depend on the frame size. The active rectangle
/// is derived from `margin` once the frame dimensions are known.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappingConfig {
    pub mode: MappingMode,
    pub margin: f64,
    pub gain: f64,
    pub nl_alpha: f64,
    pub nl_ref: f64,
    pub smoothing: f64,
}

impl Default for MappingConfig {
    fn default() -> Self {
        let p = MappingParams::for_frame(1, 1, 0.1);
        Self {
            mode: MappingMode::Absolute,
            margin: 0.1,
            gain: p.gain,
            nl_alpha: p.nl_alpha,
            nl_ref: p.nl_ref,
            smoothing: p.smoothing,
        }
    }
}

impl MappingConfig {
    pub fn params(&self, frame_dims: (usize, usize)) -> MappingParams {
        MappingParams {
            gain: self.gain,
            nl_alpha: self.nl_alpha,
            nl_ref: self.nl_ref,
            smoothing: self.smoothing,
            ..MappingParams::for_frame(frame_dims.0, frame_dims.1, self.margin)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PipelineConfig {
    pub fizi: FiziParams,
    /// Run the FIZI branches concurrently.
    pub parallel: bool,
    pub track: TrackParams,
    pub mapping: MappingConfig,
    pub click: ClickParams,
    pub interface: InterfaceChoice,
    pub cell_size: u32,
    pub backend: BackendChoice,
    /// Recorder output file; in-memory only when unset.
    pub record_path: Option<PathBuf>,
    pub gateway_port: u16,
    pub calibration_frames: usize,
    /// Load this background model instead of calibrating.
    pub background_model: Option<PathBuf>,
    /// Default frame source, same syntax as the `--source` flag.
    pub source: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            fizi: FiziParams::default(),
            parallel: false,
            track: TrackParams::default(),
            mapping: MappingConfig::default(),
            click: ClickParams::default(),
            interface: InterfaceChoice::Keyboard,
            cell_size: 4,
            backend: BackendChoice::default(),
            record_path: None,
            gateway_port: 8765,
            calibration_frames: 30,
            background_model: None,
            source: None,
        }
    }
}

pub const KEYS: &[&str] = &[
    "fizi.k_sigma",
    "fizi.tau_min",
    "fizi.sigma_min",
    "fizi.grey_chroma_delta",
    "fizi.skin_hue",
    "fizi.skin_s",
    "fizi.skin_v",
    "fizi.open_rounds",
    "fizi.close_rounds",
    "fizi.parallel",
    "track.connectivity",
    "track.min_area_fraction",
    "track.max_distance_fraction",
    "track.area_ratio",
    "track.loss_tolerance",
    "track.history_len",
    "mapping.mode",
    "mapping.margin",
    "mapping.gain",
    "mapping.nl_alpha",
    "mapping.nl_ref",
    "mapping.smoothing",
    "click.down_ratio",
    "click.up_ratio",
    "click.m_frames",
    "click.history_len",
    "interface.path",
    "interface.cell_size",
    "engine.backend",
    "engine.record_path",
    "gateway.port",
    "calibration.frames",
    "calibration.model",
    "source",
];

fn parse_num<T: FromStr>(key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| invalid(key, value, e.to_string()))
}

fn invalid(key: &str, value: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidValue {
        key: key.into(),
        value: value.into(),
        reason: reason.into(),
    }
}

/// `lo:hi`
fn parse_range(key: &str, value: &str) -> Result<(f64, f64), ConfigError> {
    let (lo, hi) = value
        .split_once(':')
        .ok_or_else(|| invalid(key, value, "expected lo:hi"))?;
    Ok((parse_num(key, lo.trim())?, parse_num(key, hi.trim())?))
}

fn fmt_range((lo, hi): (f64, f64)) -> String {
    format!("{lo}:{hi}")
}

fn parse_bool(key: &str, value: &str) -> Result<bool, ConfigError> {
    match value {
        "true" | "on" | "yes" | "1" => Ok(true),
        "false" | "off" | "no" | "0" => Ok(false),
        _ => Err(invalid(key, value, "expected true or false")),
    }
}

fn optional_path(value: &str) -> Option<PathBuf> {
    (!value.is_empty()).then(|| PathBuf::from(value))
}

impl PipelineConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line: i + 1,
                message: format!("expected key = value, got {line:?}"),
            })?;
            cfg.apply(key.trim(), value.trim()).map_err(|e| ConfigError::Syntax {
                line: i + 1,
                message: e.to_string(),
            })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Make relative file paths relative to `base` (the directory holding
    /// the configuration file).
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let InterfaceChoice::File(p) = &mut self.interface {
            fix(p);
        }
        for p in [&mut self.record_path, &mut self.background_model].into_iter().flatten() {
            fix(p);
        }
        if let Some(src) = &mut self.source {
            if let Some((kind, arg)) = src.split_once(':') {
                if matches!(kind, "seq" | "script") && Path::new(arg).is_relative() {
                    *src = format!("{kind}:{}", base.join(arg).display());
                }
            }
        }
    }

    /// Set one key and revalidate. On error `self` is unchanged.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let mut next = self.clone();
        next.apply(key, value.trim())?;
        next.validate()?;
        *self = next;
        Ok(())
    }

    fn apply(&mut self, key: &str, v: &str) -> Result<(), ConfigError> {
        match key {
            "fizi.k_sigma" => self.fizi.k_sigma = parse_num(key, v)?,
            "fizi.tau_min" => self.fizi.tau_min = parse_num(key, v)?,
            "fizi.sigma_min" => self.fizi.sigma_min = parse_num(key, v)?,
            "fizi.grey_chroma_delta" => self.fizi.grey_chroma_delta = parse_num(key, v)?,
            "fizi.skin_hue" => {
                self.fizi.skin_hue_ranges = v
                    .split(',')
                    .map(|r| parse_range(key, r.trim()))
                    .collect::<Result<_, _>>()?
            }
            "fizi.skin_s" => self.fizi.skin_s_range = parse_range(key, v)?,
            "fizi.skin_v" => self.fizi.skin_v_range = parse_range(key, v)?,
            "fizi.open_rounds" => self.fizi.open_rounds = parse_num(key, v)?,
            "fizi.close_rounds" => self.fizi.close_rounds = parse_num(key, v)?,
            "fizi.parallel" => self.parallel = parse_bool(key, v)?,
            "track.connectivity" => {
                self.track.connectivity = match v {
                    "4" => Connectivity::Four,
                    "8" => Connectivity::Eight,
                    _ => return Err(invalid(key, v, "expected 4 or 8")),
                }
            }
            "track.min_area_fraction" => self.track.selection.min_area_fraction = parse_num(key, v)?,
            "track.max_distance_fraction" => self.track.max_distance_fraction = parse_num(key, v)?,
            "track.area_ratio" => self.track.area_ratio = parse_range(key, v)?,
            "track.loss_tolerance" => self.track.loss_tolerance = parse_num(key, v)?,
            "track.history_len" => self.track.history_len = parse_num(key, v)?,
            "mapping.mode" => {
                self.mapping.mode = v.parse().map_err(|e: palmkey_core::mapping::MappingError| invalid(key, v, e.to_string()))?
            }
            "mapping.margin" => self.mapping.margin = parse_num(key, v)?,
            "mapping.gain" => self.mapping.gain = parse_num(key, v)?,
            "mapping.nl_alpha" => self.mapping.nl_alpha = parse_num(key, v)?,
            "mapping.nl_ref" => self.mapping.nl_ref = parse_num(key, v)?,
            "mapping.smoothing" => self.mapping.smoothing = parse_num(key, v)?,
            "click.down_ratio" => self.click.down_ratio = parse_num(key, v)?,
            "click.up_ratio" => self.click.up_ratio = parse_num(key, v)?,
            "click.m_frames" => self.click.m_frames = parse_num(key, v)?,
            "click.history_len" => self.click.history_len = parse_num(key, v)?,
            "interface.path" => self.interface = v.parse().map_err(|e: String| invalid(key, v, e))?,
            "interface.cell_size" => self.cell_size = parse_num(key, v)?,
            "engine.backend" => self.backend = v.parse().map_err(|e: String| invalid(key, v, e))?,
            "engine.record_path" => self.record_path = optional_path(v),
            "gateway.port" => self.gateway_port = parse_num(key, v)?,
            "calibration.frames" => self.calibration_frames = parse_num(key, v)?,
            "calibration.model" => self.background_model = optional_path(v),
            "source" => self.source = (!v.is_empty()).then(|| v.to_string()),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        }
        Ok(())
    }

    pub fn get(&self, key: &str) -> Result<String, ConfigError> {
        let path = |p: &Option<PathBuf>| p.as_ref().map_or(String::new(), |p| p.display().to_string());
        Ok(match key {
            "fizi.k_sigma" => self.fizi.k_sigma.to_string(),
            "fizi.tau_min" => self.fizi.tau_min.to_string(),
            "fizi.sigma_min" => self.fizi.sigma_min.to_string(),
            "fizi.grey_chroma_delta" => self.fizi.grey_chroma_delta.to_string(),
            "fizi.skin_hue" => self
                .fizi
                .skin_hue_ranges
                .iter()
                .map(|r| fmt_range(*r))
                .collect::<Vec<_>>()
                .join(","),
            "fizi.skin_s" => fmt_range(self.fizi.skin_s_range),
            "fizi.skin_v" => fmt_range(self.fizi.skin_v_range),
            "fizi.open_rounds" => self.fizi.open_rounds.to_string(),
            "fizi.close_rounds" => self.fizi.close_rounds.to_string(),
            "fizi.parallel" => self.parallel.to_string(),
            "track.connectivity" => match self.track.connectivity {
                Connectivity::Four => "4".into(),
                Connectivity::Eight => "8".into(),
            },
            "track.min_area_fraction" => self.track.selection.min_area_fraction.to_string(),
            "track.max_distance_fraction" => self.track.max_distance_fraction.to_string(),
            "track.area_ratio" => fmt_range(self.track.area_ratio),
            "track.loss_tolerance" => self.track.loss_tolerance.to_string(),
            "track.history_len" => self.track.history_len.to_string(),
            "mapping.mode" => self.mapping.mode.to_string(),
            "mapping.margin" => self.mapping.margin.to_string(),
            "mapping.gain" => self.mapping.gain.to_string(),
            "mapping.nl_alpha" => self.mapping.nl_alpha.to_string(),
            "mapping.nl_ref" => self.mapping.nl_ref.to_string(),
            "mapping.smoothing" => self.mapping.smoothing.to_string(),
            "click.down_ratio" => self.click.down_ratio.to_string(),
            "click.up_ratio" => self.click.up_ratio.to_string(),
            "click.m_frames" => self.click.m_frames.to_string(),
            "click.history_len" => self.click.history_len.to_string(),
            "interface.path" => self.interface.as_value(),
            "interface.cell_size" => self.cell_size.to_string(),
            "engine.backend" => self.backend.as_str().into(),
            "engine.record_path" => path(&self.record_path),
            "gateway.port" => self.gateway_port.to_string(),
            "calibration.frames" => self.calibration_frames.to_string(),
            "calibration.model" => path(&self.background_model),
            "source" => self.source.clone().unwrap_or_default(),
            _ => return Err(ConfigError::UnknownKey(key.into())),
        })
    }

    /// Every key with its current value, in [`KEYS`] order. Parses back to
    /// an equal configuration.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for key in KEYS {
            let _ = writeln!(out, "{key} = {}", self.get(key).expect("listed key"));
        }
        out
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |m: String| Err(ConfigError::Invalid(m));
        self.fizi.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.click.validate().map_err(ConfigError::Invalid)?;
        let t = &self.track;
        if !(0.0..1.0).contains(&t.selection.min_area_fraction) {
            return fail("track.min_area_fraction must be in [0, 1)".into());
        }
        if !(t.max_distance_fraction > 0.0) {
            return fail("track.max_distance_fraction must be > 0".into());
        }
        let (lo, hi) = t.area_ratio;
        if !(lo > 0.0 && lo <= 1.0 && hi >= 1.0) {
            return fail(format!("track.area_ratio must satisfy 0 < lo <= 1 <= hi, got {lo}:{hi}"));
        }
        if t.history_len == 0 {
            return fail("track.history_len must be at least 1".into());
        }
        if !(0.0..0.5).contains(&self.mapping.margin) {
            return fail("mapping.margin must be in [0, 0.5)".into());
        }
        self.mapping
            .params((640, 480))
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.cell_size == 0 {
            return fail("interface.cell_size must be at least 1".into());
        }
        if self.calibration_frames < 2 {
            return fail("calibration.frames must be at least 2".into());
        }
        Ok(())
    }
}
