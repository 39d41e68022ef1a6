//! FIZI: isolate candidate hand zones in a frame.
//!
//! Three independent threshold branches run over the same frame:
//!
//! - background removal against a per-pixel Gaussian model learned from
//!   empty-scene frames,
//! - grey removal, dropping low-chroma pixels,
//! - skin detection in HSV.
//!
//! Their masks are AND-ed and cleaned with opening/closing rounds.

use thiserror::Error;

use crate::imaging::{
    mask_and, morph_cleanup_with, rgb_to_hsv, threshold_map, BinaryMask, Execution, Frame,
    ImagingError, Rgb,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FiziError {
    #[error("background learning needs at least 2 frames, got {0}")]
    TooFewFrames(usize),

    #[error(transparent)]
    Imaging(#[from] ImagingError),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FiziParams {
    /// Foreground when a channel deviates by more than `k_sigma` std-devs.
    pub k_sigma: f64,
    /// Deviation floor in channel units.
    pub tau_min: f64,
    /// Lower clamp applied to learned std-devs.
    pub sigma_min: f64,
    /// Minimum `max(r,g,b) - min(r,g,b)` for a pixel to be kept.
    pub grey_chroma_delta: f64,
    /// Half-open hue intervals `[lo, hi)` in degrees.
    pub skin_hue_ranges: Vec<(f64, f64)>,
    pub skin_s_range: (f64, f64),
    pub skin_v_range: (f64, f64),
    pub open_rounds: u32,
    pub close_rounds: u32,
}

impl Default for FiziParams {
    fn default() -> Self {
        Self {
            k_sigma: 2.5,
            tau_min: 10.0,
            sigma_min: 2.0,
            grey_chroma_delta: 24.0,
            skin_hue_ranges: vec![(0.0, 50.0), (340.0, 360.0)],
            skin_s_range: (0.15, 0.90),
            skin_v_range: (0.20, 1.00),
            open_rounds: 1,
            close_rounds: 2,
        }
    }
}

impl FiziParams {
    pub fn validate(&self) -> Result<(), FiziError> {
        let bad = |name, reason: &str| {
            Err(FiziError::InvalidParam {
                name,
                reason: reason.to_string(),
            })
        };
        if !(self.k_sigma > 0.0) {
            return bad("k_sigma", "must be > 0");
        }
        if !(self.tau_min >= 0.0) {
            return bad("tau_min", "must be >= 0");
        }
        if !(self.sigma_min > 0.0) {
            return bad("sigma_min", "must be > 0");
        }
        if !(self.grey_chroma_delta >= 0.0) {
            return bad("grey_chroma_delta", "must be >= 0");
        }
        for &(lo, hi) in &self.skin_hue_ranges {
            if !(0.0 <= lo && lo < hi && hi <= 360.0) {
                return bad("skin_hue_ranges", "each range needs 0 <= lo < hi <= 360");
            }
        }
        for (name, (lo, hi)) in [
            ("skin_s_range", self.skin_s_range),
            ("skin_v_range", self.skin_v_range),
        ] {
            if !(0.0 <= lo && lo <= hi && hi <= 1.0) {
                return bad(name, "needs 0 <= lo <= hi <= 1");
            }
        }
        Ok(())
    }

    pub fn is_skin(&self, p: Rgb) -> bool {
        let hsv = rgb_to_hsv(p);
        let in_closed = |(lo, hi): (f64, f64), v: f64| lo <= v && v <= hi;
        in_closed(self.skin_s_range, hsv.s)
            && in_closed(self.skin_v_range, hsv.v)
            && self
                .skin_hue_ranges
                .iter()
                .any(|&(lo, hi)| lo <= hsv.h && hsv.h < hi)
    }

    pub fn is_chromatic(&self, p: Rgb) -> bool {
        let max = p[0].max(p[1]).max(p[2]);
        let min = p[0].min(p[1]).min(p[2]);
        f64::from(max - min) >= self.grey_chroma_delta
    }
}

/// Per-pixel, per-channel Gaussian statistics of the empty scene.
#[derive(Clone, Debug, PartialEq)]
pub struct BackgroundModel {
    width: usize,
    height: usize,
    mean: Vec<[f32; 3]>,
    std: Vec<[f32; 3]>,
    sample_count: u32,
}

impl BackgroundModel {
    pub fn from_parts(
        width: usize,
        height: usize,
        mean: Vec<[f32; 3]>,
        std: Vec<[f32; 3]>,
        sample_count: u32,
    ) -> Result<Self, FiziError> {
        if width == 0 || height == 0 {
            return Err(ImagingError::EmptyRaster { width, height }.into());
        }
        for len in [mean.len(), std.len()] {
            if len != width * height {
                return Err(ImagingError::BufferSize {
                    expected: width * height,
                    actual: len,
                }
                .into());
            }
        }
        if sample_count < 2 {
            return Err(FiziError::TooFewFrames(sample_count as usize));
        }
        Ok(Self {
            width,
            height,
            mean,
            std,
            sample_count,
        })
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn mean(&self) -> &[[f32; 3]] {
        &self.mean
    }

    pub fn std(&self) -> &[[f32; 3]] {
        &self.std
    }

    pub fn sample_count(&self) -> u32 {
        self.sample_count
    }

    fn ensure_dims(&self, frame: &Frame) -> Result<(), FiziError> {
        if frame.dims() != self.dims() {
            return Err(ImagingError::DimensionMismatch {
                expected: self.dims(),
                found: frame.dims(),
            }
            .into());
        }
        Ok(())
    }
}

/// Streaming accumulator behind [`learn_background`] (Welford per channel).
#[derive(Clone, Debug)]
pub struct BackgroundLearner {
    width: usize,
    height: usize,
    count: u32,
    mean: Vec<[f64; 3]>,
    m2: Vec<[f64; 3]>,
}

impl BackgroundLearner {
    pub fn new(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            count: 0,
            mean: vec![[0.0; 3]; width * height],
            m2: vec![[0.0; 3]; width * height],
        }
    }

    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn push(&mut self, frame: &Frame) -> Result<(), FiziError> {
        if frame.dims() != (self.width, self.height) {
            return Err(ImagingError::DimensionMismatch {
                expected: (self.width, self.height),
                found: frame.dims(),
            }
            .into());
        }
        self.count += 1;
        let n = f64::from(self.count);
        for ((mean, m2), px) in self.mean.iter_mut().zip(&mut self.m2).zip(frame.pixels()) {
            for c in 0..3 {
                let v = f64::from(px[c]);
                let d = v - mean[c];
                mean[c] += d / n;
                m2[c] += d * (v - mean[c]);
            }
        }
        Ok(())
    }

    /// Sample (n-1) std-dev, clamped below at `sigma_min`.
    pub fn finish(self, sigma_min: f64) -> Result<BackgroundModel, FiziError> {
        if self.count < 2 {
            return Err(FiziError::TooFewFrames(self.count as usize));
        }
        let denom = f64::from(self.count - 1);
        let mean = self.mean.iter().map(|m| m.map(|v| v as f32)).collect();
        let std = self
            .m2
            .iter()
            .map(|m2| m2.map(|v| (v / denom).sqrt().max(sigma_min) as f32))
            .collect();
        BackgroundModel::from_parts(self.width, self.height, mean, std, self.count)
    }
}

pub fn learn_background(frames: &[Frame], sigma_min: f64) -> Result<BackgroundModel, FiziError> {
    let first = frames.first().ok_or(FiziError::TooFewFrames(0))?;
    if frames.len() < 2 {
        return Err(FiziError::TooFewFrames(frames.len()));
    }
    let mut learner = BackgroundLearner::new(first.width(), first.height());
    for f in frames {
        learner.push(f)?;
    }
    learner.finish(sigma_min)
}

pub fn remove_background(
    frame: &Frame,
    bg: &BackgroundModel,
    p: &FiziParams,
) -> Result<BinaryMask, FiziError> {
    remove_background_with(frame, bg, p, Execution::Sequential)
}

pub fn remove_background_with(
    frame: &Frame,
    bg: &BackgroundModel,
    p: &FiziParams,
    exec: Execution,
) -> Result<BinaryMask, FiziError> {
    bg.ensure_dims(frame)?;
    let k = p.k_sigma as f32;
    let floor = p.tau_min as f32;
    Ok(threshold_map(frame, exec, |i, px| {
        let (mean, std) = (&bg.mean[i], &bg.std[i]);
        (0..3).any(|c| (f32::from(px[c]) - mean[c]).abs() > (k * std[c]).max(floor))
    }))
}

pub fn remove_grey(frame: &Frame, p: &FiziParams) -> BinaryMask {
    remove_grey_with(frame, p, Execution::Sequential)
}

pub fn remove_grey_with(frame: &Frame, p: &FiziParams, exec: Execution) -> BinaryMask {
    threshold_map(frame, exec, |_, px| p.is_chromatic(px))
}

pub fn detect_skin(frame: &Frame, p: &FiziParams) -> BinaryMask {
    detect_skin_with(frame, p, Execution::Sequential)
}

pub fn detect_skin_with(frame: &Frame, p: &FiziParams, exec: Execution) -> BinaryMask {
    threshold_map(frame, exec, |_, px| p.is_skin(px))
}

/// The three raw branch masks, before merging.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchMasks {
    pub foreground: BinaryMask,
    pub chromatic: BinaryMask,
    pub skin: BinaryMask,
}

impl BranchMasks {
    pub fn merged(&self) -> BinaryMask {
        // Dimensions agree by construction.
        mask_and(&self.foreground, &self.chromatic, &self.skin).expect("branch dims")
    }
}

/// Run the three branches. With [`Execution::Parallel`] they run as
/// concurrent rayon tasks, each also splitting its rows.
pub fn fizi_branches(
    frame: &Frame,
    bg: &BackgroundModel,
    p: &FiziParams,
    exec: Execution,
) -> Result<BranchMasks, FiziError> {
    bg.ensure_dims(frame)?;
    let (foreground, (chromatic, skin)) = match exec {
        Execution::Sequential => (
            remove_background_with(frame, bg, p, exec)?,
            (remove_grey_with(frame, p, exec), detect_skin_with(frame, p, exec)),
        ),
        Execution::Parallel => {
            let (fg, rest) = rayon::join(
                || remove_background_with(frame, bg, p, exec),
                || {
                    rayon::join(
                        || remove_grey_with(frame, p, exec),
                        || detect_skin_with(frame, p, exec),
                    )
                },
            );
            (fg?, rest)
        }
    };
    Ok(BranchMasks {
        foreground,
        chromatic,
        skin,
    })
}

pub fn fizi_mask(
    frame: &Frame,
    bg: &BackgroundModel,
    p: &FiziParams,
    exec: Execution,
) -> Result<BinaryMask, FiziError> {
    let branches = fizi_branches(frame, bg, p, exec)?;
    Ok(morph_cleanup_with(
        &branches.merged(),
        p.open_rounds,
        p.close_rounds,
        exec,
    ))
}
