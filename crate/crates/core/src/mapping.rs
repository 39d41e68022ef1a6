//! Hand position to cursor position.
//!
//! Three strategies: absolute (ratio mapping of a control rectangle onto the
//! interface), linear relative (cursor moves by a scaled hand displacement),
//! and nonlinear relative, where the scale grows with hand speed up to a
//! saturation point:
//!
//! ```text
//! m(|d|) = gain * |d| * (1 + nl_alpha * min(1, |d| / nl_ref))
//! ```
//!
//! Slow motion keeps close to `gain`, fast motion approaches
//! `gain * (1 + nl_alpha)`.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MappingError {
    #[error("active rectangle has zero extent ({w}x{h})")]
    DegenerateRect { w: f64, h: f64 },

    #[error("invalid mapping parameter {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },

    #[error("unknown mapping mode {0:?} (expected absolute, linear or nonlinear)")]
    UnknownMode(String),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum MappingMode {
    #[default]
    Absolute,
    LinearRelative,
    NonlinearRelative,
}

impl MappingMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            MappingMode::Absolute => "absolute",
            MappingMode::LinearRelative => "linear",
            MappingMode::NonlinearRelative => "nonlinear",
        }
    }
}

impl fmt::Display for MappingMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MappingMode {
    type Err = MappingError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "absolute" => Ok(MappingMode::Absolute),
            "linear" => Ok(MappingMode::LinearRelative),
            "nonlinear" => Ok(MappingMode::NonlinearRelative),
            other => Err(MappingError::UnknownMode(other.to_string())),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RectF {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MappingParams {
    /// Control surface in frame coordinates.
    pub active_rect: RectF,
    pub gain: f64,
    pub nl_alpha: f64,
    /// Hand speed (pixels/frame) at which the nonlinear boost saturates.
    pub nl_ref: f64,
    /// Exponential smoothing weight on relative displacements, 0 disables.
    pub smoothing: f64,
}

impl MappingParams {
    /// Defaults with the active rectangle inset by `margin` (a fraction of
    /// each dimension) on every side.
    pub fn for_frame(frame_w: usize, frame_h: usize, margin: f64) -> Self {
        let (fw, fh) = (frame_w as f64, frame_h as f64);
        Self {
            active_rect: RectF {
                x: fw * margin,
                y: fh * margin,
                w: fw * (1.0 - 2.0 * margin),
                h: fh * (1.0 - 2.0 * margin),
            },
            gain: 1.5,
            nl_alpha: 2.0,
            nl_ref: 40.0,
            smoothing: 0.0,
        }
    }

    pub fn validate(&self) -> Result<(), MappingError> {
        let r = self.active_rect;
        if !(r.w > 0.0 && r.h > 0.0) {
            return Err(MappingError::DegenerateRect { w: r.w, h: r.h });
        }
        let bad = |name, reason: &str| {
            Err(MappingError::InvalidParam {
                name,
                reason: reason.into(),
            })
        };
        if !(self.gain > 0.0) {
            return bad("gain", "must be > 0");
        }
        if !(self.nl_alpha >= 0.0) {
            return bad("nl_alpha", "must be >= 0");
        }
        if !(self.nl_ref > 0.0) {
            return bad("nl_ref", "must be > 0");
        }
        if !(0.0..1.0).contains(&self.smoothing) {
            return bad("smoothing", "must be in [0, 1)");
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CursorState {
    /// Interface coordinates.
    pub pos: (f64, f64),
    pub mode: MappingMode,
    /// Last hand position in frame coordinates.
    pub prev_hand: Option<(f64, f64)>,
    smoothed: (f64, f64),
}

impl CursorState {
    pub fn new(mode: MappingMode, pos: (f64, f64)) -> Self {
        Self {
            pos,
            mode,
            prev_hand: None,
            smoothed: (0.0, 0.0),
        }
    }

    /// Cursor centered on the interface.
    pub fn centered(mode: MappingMode, iface_dims: (usize, usize)) -> Self {
        Self::new(
            mode,
            (
                (iface_dims.0 as f64 / 2.0).floor(),
                (iface_dims.1 as f64 / 2.0).floor(),
            ),
        )
    }

    /// Switch strategy, keeping the cursor where it is.
    pub fn with_mode(mut self, mode: MappingMode) -> Self {
        self.mode = mode;
        self.prev_hand = None;
        self.smoothed = (0.0, 0.0);
        self
    }

    /// Apply one frame's hand observation with the current mode. A missing
    /// hand leaves the cursor in place and forgets the previous position so
    /// re-acquisition does not jump.
    pub fn update(
        &self,
        hand: Option<(f64, f64)>,
        p: &MappingParams,
        iface_dims: (usize, usize),
    ) -> Result<CursorState, MappingError> {
        let Some(hand) = hand else {
            let mut next = *self;
            next.prev_hand = None;
            next.smoothed = (0.0, 0.0);
            return Ok(next);
        };
        match self.mode {
            MappingMode::Absolute => {
                let pos = map_absolute(hand, p, iface_dims)?;
                Ok(CursorState {
                    pos,
                    prev_hand: Some(hand),
                    ..*self
                })
            }
            MappingMode::LinearRelative => Ok(map_relative_linear(self, hand, p, iface_dims)),
            MappingMode::NonlinearRelative => {
                Ok(map_relative_nonlinear(self, hand, p, iface_dims))
            }
        }
    }
}

fn clamp_to(pos: (f64, f64), iface_dims: (usize, usize)) -> (f64, f64) {
    let max_x = iface_dims.0.saturating_sub(1) as f64;
    let max_y = iface_dims.1.saturating_sub(1) as f64;
    (pos.0.clamp(0.0, max_x), pos.1.clamp(0.0, max_y))
}

pub fn map_absolute(
    hand: (f64, f64),
    p: &MappingParams,
    iface_dims: (usize, usize),
) -> Result<(f64, f64), MappingError> {
    let r = p.active_rect;
    if !(r.w > 0.0 && r.h > 0.0) {
        return Err(MappingError::DegenerateRect { w: r.w, h: r.h });
    }
    let u = ((hand.0 - r.x) / r.w).clamp(0.0, 1.0);
    let v = ((hand.1 - r.y) / r.h).clamp(0.0, 1.0);
    Ok(clamp_to(
        (u * iface_dims.0 as f64, v * iface_dims.1 as f64),
        iface_dims,
    ))
}

fn delta(state: &CursorState, hand: (f64, f64), p: &MappingParams) -> ((f64, f64), (f64, f64)) {
    let raw = state
        .prev_hand
        .map_or((0.0, 0.0), |prev| (hand.0 - prev.0, hand.1 - prev.1));
    if p.smoothing == 0.0 {
        return (raw, raw);
    }
    let s = p.smoothing;
    let d = (
        (1.0 - s) * raw.0 + s * state.smoothed.0,
        (1.0 - s) * raw.1 + s * state.smoothed.1,
    );
    (d, d)
}

fn step(
    state: &CursorState,
    hand: (f64, f64),
    p: &MappingParams,
    iface_dims: (usize, usize),
    scale: impl Fn(f64) -> f64,
) -> CursorState {
    let (d, smoothed) = delta(state, hand, p);
    let k = scale((d.0 * d.0 + d.1 * d.1).sqrt());
    CursorState {
        pos: clamp_to((state.pos.0 + k * d.0, state.pos.1 + k * d.1), iface_dims),
        mode: state.mode,
        prev_hand: Some(hand),
        smoothed,
    }
}

pub fn map_relative_linear(
    state: &CursorState,
    hand: (f64, f64),
    p: &MappingParams,
    iface_dims: (usize, usize),
) -> CursorState {
    step(state, hand, p, iface_dims, |_| p.gain)
}

pub fn map_relative_nonlinear(
    state: &CursorState,
    hand: (f64, f64),
    p: &MappingParams,
    iface_dims: (usize, usize),
) -> CursorState {
    step(state, hand, p, iface_dims, |mag| nonlinear_scale(mag, p))
}

/// Per-unit multiplier applied to a displacement of magnitude `mag`.
pub fn nonlinear_scale(mag: f64, p: &MappingParams) -> f64 {
    p.gain * (1.0 + p.nl_alpha * (mag / p.nl_ref).min(1.0))
}

/// Applied cursor displacement for a hand displacement of magnitude `mag`.
pub fn nonlinear_magnitude(mag: f64, p: &MappingParams) -> f64 {
    mag * nonlinear_scale(mag, p)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params() -> MappingParams {
        MappingParams {
            active_rect: RectF {
                x: 100.0,
                y: 50.0,
                w: 400.0,
                h: 300.0,
            },
            ..MappingParams::for_frame(640, 480, 0.1)
        }
    }

    #[test]
    fn absolute_fixed_points() {
        let p = params();
        assert_eq!(map_absolute((100.0, 50.0), &p, (800, 600)).unwrap(), (0.0, 0.0));
        assert_eq!(map_absolute((300.0, 200.0), &p, (800, 600)).unwrap(), (400.0, 300.0));
        // 25% across, 75% down.
        assert_eq!(map_absolute((200.0, 275.0), &p, (1024, 768)).unwrap(), (256.0, 576.0));
        // Bottom-right corner and beyond clamp to the last pixel.
        assert_eq!(map_absolute((500.0, 350.0), &p, (800, 600)).unwrap(), (799.0, 599.0));
        assert_eq!(map_absolute((0.0, 479.0), &p, (800, 600)).unwrap(), (0.0, 599.0));
    }

    #[test]
    fn degenerate_rect_is_an_error() {
        let mut p = params();
        p.active_rect.w = 0.0;
        assert!(matches!(
            map_absolute((1.0, 1.0), &p, (10, 10)),
            Err(MappingError::DegenerateRect { .. })
        ));
        assert!(p.validate().is_err());
    }

    #[test]
    fn default_rect_is_central_80_percent() {
        let p = MappingParams::for_frame(640, 480, 0.1);
        assert_eq!(
            p.active_rect,
            RectF {
                x: 64.0,
                y: 48.0,
                w: 512.0,
                h: 384.0
            }
        );
        assert!(p.validate().is_ok());
    }

    #[test]
    fn linear_relative_steps() {
        let mut p = params();
        p.gain = 2.0;
        let s = CursorState::new(MappingMode::LinearRelative, (100.0, 100.0));
        let s = map_relative_linear(&s, (50.0, 50.0), &p, (800, 600));
        assert_eq!(s.pos, (100.0, 100.0));
        let s = map_relative_linear(&s, (60.0, 50.0), &p, (800, 600));
        assert_eq!(s.pos, (120.0, 100.0));

        let edge = CursorState {
            prev_hand: Some((0.0, 0.0)),
            ..CursorState::new(MappingMode::LinearRelative, (799.0, 10.0))
        };
        let s = map_relative_linear(&edge, (5.0, 0.0), &p, (800, 600));
        assert_eq!(s.pos.0, 799.0);
    }

    #[test]
    fn nonlinear_zero_and_degenerate() {
        let p = params();
        let s = CursorState {
            prev_hand: Some((10.0, 10.0)),
            ..CursorState::new(MappingMode::NonlinearRelative, (300.0, 300.0))
        };
        assert_eq!(map_relative_nonlinear(&s, (10.0, 10.0), &p, (800, 600)).pos, (300.0, 300.0));

        let flat = MappingParams { nl_alpha: 0.0, ..p };
        for d in [(1.0, 0.0), (-7.0, 3.0), (25.0, 40.0), (90.0, -90.0)] {
            let hand = (10.0 + d.0, 10.0 + d.1);
            assert_eq!(
                map_relative_nonlinear(&s, hand, &flat, (800, 600)),
                map_relative_linear(&s, hand, &flat, (800, 600))
            );
        }
    }

    #[test]
    fn nonlinear_boosts_fast_motion() {
        let p = params();
        // gain 1.5, alpha 2, ref 40: m(10) = 15 * 1.5 = 22.5, m(20) = 30 * 2 = 60.
        assert!((nonlinear_magnitude(10.0, &p) - 22.5).abs() < 1e-12);
        assert!((nonlinear_magnitude(20.0, &p) - 60.0).abs() < 1e-12);
        assert!(nonlinear_magnitude(10.0, &p) / nonlinear_magnitude(20.0, &p) < 10.0 / 20.0);
        // Saturated: m(80) = 80 * 1.5 * 3.
        assert!((nonlinear_magnitude(80.0, &p) - 360.0).abs() < 1e-12);
        assert_eq!(nonlinear_magnitude(0.0, &p), 0.0);
    }

    #[test]
    fn direction_preserved() {
        let p = params();
        let s = CursorState {
            prev_hand: Some((0.0, 0.0)),
            ..CursorState::new(MappingMode::NonlinearRelative, (400.0, 300.0))
        };
        let n = map_relative_nonlinear(&s, (3.0, -4.0), &p, (800, 600));
        let (dx, dy) = (n.pos.0 - 400.0, n.pos.1 - 300.0);
        assert!(dx > 0.0 && dy < 0.0);
        assert!((dx / 3.0 - dy / -4.0).abs() < 1e-12);
    }

    #[test]
    fn lost_hand_keeps_cursor() {
        let p = params();
        let s = CursorState::new(MappingMode::LinearRelative, (5.0, 5.0));
        let s = s.update(Some((10.0, 10.0)), &p, (100, 100)).unwrap();
        let lost = s.update(None, &p, (100, 100)).unwrap();
        assert_eq!(lost.pos, s.pos);
        assert_eq!(lost.prev_hand, None);
        // Re-acquired far away: no jump on the first frame back.
        let back = lost.update(Some((90.0, 90.0)), &p, (100, 100)).unwrap();
        assert_eq!(back.pos, s.pos);
    }

    #[test]
    fn smoothing_damps_first_step() {
        let p = MappingParams {
            smoothing: 0.5,
            gain: 1.0,
            ..params()
        };
        let s = CursorState {
            prev_hand: Some((0.0, 0.0)),
            ..CursorState::new(MappingMode::LinearRelative, (10.0, 10.0))
        };
        let n = map_relative_linear(&s, (10.0, 0.0), &p, (100, 100));
        assert_eq!(n.pos, (15.0, 10.0));
    }

    #[test]
    fn mode_names_round_trip() {
        for m in [
            MappingMode::Absolute,
            MappingMode::LinearRelative,
            MappingMode::NonlinearRelative,
        ] {
            assert_eq!(m.as_str().parse::<MappingMode>().unwrap(), m);
        }
        assert!("warp".parse::<MappingMode>().is_err());
    }
}
