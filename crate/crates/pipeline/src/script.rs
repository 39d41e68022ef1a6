//! Gesture scripts: synthetic hand videos with known ground truth.
//!
//! ```text
//! # header directives, before the first frame line
//! size 640 480
//! fps 30
//! background 40 70 120          # flat RGB, or: background_image bg.png
//! skin 20 0.5 0.8               # hue degrees, saturation, value
//! closed_ratio 0.45
//! noise 4 7                     # per-channel Gaussian sigma, seed
//! distractor 400 40 120 80 128  # grey rectangle x y w h level
//! # one line per frame
//! none
//! 320 240 36 48 open
//! 320 240 36 48 closed
//! ```
//!
//! An open hand is a filled ellipse. A closed hand is the concentric ellipse
//! with both radii scaled by `sqrt(closed_ratio)`, so its area is
//! `closed_ratio` times the open area.

use std::path::Path;

use palmkey_core::imaging::{hsv_to_rgb, BinaryMask, Frame, HsvPixel, Rgb};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("background image: {0}")]
    Image(#[from] image::ImageError),

    #[error("reading {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HandPose {
    pub cx: f64,
    pub cy: f64,
    pub rx: f64,
    pub ry: f64,
    pub open: bool,
}

impl HandPose {
    /// Radii actually drawn.
    pub fn drawn_radii(&self, closed_ratio: f64) -> (f64, f64) {
        if self.open {
            (self.rx, self.ry)
        } else {
            let k = closed_ratio.sqrt();
            (self.rx * k, self.ry * k)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Distractor {
    pub x: usize,
    pub y: usize,
    pub w: usize,
    pub h: usize,
    pub level: u8,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Background {
    Flat(Rgb),
    Image(Frame),
}

#[derive(Clone, Debug, PartialEq)]
pub struct GestureScript {
    pub width: usize,
    pub height: usize,
    pub fps: f64,
    pub background: Background,
    pub skin: HsvPixel,
    pub closed_ratio: f64,
    /// `(sigma, seed)`
    pub noise: Option<(f64, u64)>,
    pub distractors: Vec<Distractor>,
    pub frames: Vec<Option<HandPose>>,
}

impl Default for GestureScript {
    fn default() -> Self {
        Self {
            width: 640,
            height: 480,
            fps: 30.0,
            background: Background::Flat([40, 70, 120]),
            skin: HsvPixel {
                h: 20.0,
                s: 0.5,
                v: 0.8,
            },
            closed_ratio: 0.45,
            noise: None,
            distractors: Vec::new(),
            frames: Vec::new(),
        }
    }
}

fn fields<T: std::str::FromStr>(line: usize, args: &[&str], n: usize, what: &str) -> Result<Vec<T>, ScriptError> {
    if args.len() != n {
        return Err(ScriptError::Parse {
            line,
            message: format!("{what} takes {n} values, got {}", args.len()),
        });
    }
    args.iter()
        .map(|a| {
            a.parse().map_err(|_| ScriptError::Parse {
                line,
                message: format!("{what}: cannot parse {a:?}"),
            })
        })
        .collect()
}

impl GestureScript {
    /// Parse a script. `base_dir` resolves `background_image` paths.
    pub fn parse(text: &str, base_dir: Option<&Path>) -> Result<Self, ScriptError> {
        let mut s = GestureScript::default();
        let mut bg_image: Option<(usize, String)> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
            if content.is_empty() {
                continue;
            }
            let words: Vec<&str> = content.split_whitespace().collect();
            let (head, args) = (words[0], &words[1..]);
            let err = |message: String| ScriptError::Parse { line, message };
            let is_directive = head.chars().next().is_some_and(|c| c.is_ascii_alphabetic()) && head != "none";
            if is_directive && !s.frames.is_empty() {
                return Err(err(format!("directive {head:?} after the first frame")));
            }
            match head {
                "size" => {
                    let v: Vec<usize> = fields(line, args, 2, head)?;
                    if v[0] == 0 || v[1] == 0 {
                        return Err(err("size must be positive".into()));
                    }
                    (s.width, s.height) = (v[0], v[1]);
                }
                "fps" => {
                    s.fps = fields::<f64>(line, args, 1, head)?[0];
                    if !(s.fps > 0.0) {
                        return Err(err("fps must be positive".into()));
                    }
                }
                "background" => {
                    let v: Vec<u8> = fields(line, args, 3, head)?;
                    s.background = Background::Flat([v[0], v[1], v[2]]);
                }
                "background_image" => {
                    if args.len() != 1 {
                        return Err(err("background_image takes a path".into()));
                    }
                    bg_image = Some((line, args[0].to_string()));
                }
                "skin" => {
                    let v: Vec<f64> = fields(line, args, 3, head)?;
                    s.skin = HsvPixel {
                        h: v[0],
                        s: v[1],
                        v: v[2],
                    };
                }
                "closed_ratio" => {
                    s.closed_ratio = fields::<f64>(line, args, 1, head)?[0];
                    if !(s.closed_ratio > 0.0 && s.closed_ratio <= 1.0) {
                        return Err(err("closed_ratio must be in (0, 1]".into()));
                    }
                }
                "noise" => {
                    if args.len() != 2 {
                        return Err(err("noise takes sigma and seed".into()));
                    }
                    let sigma: f64 = fields(line, &args[..1], 1, head)?[0];
                    let seed: u64 = fields(line, &args[1..], 1, head)?[0];
                    if !(sigma >= 0.0) {
                        return Err(err("noise sigma must be >= 0".into()));
                    }
                    s.noise = (sigma > 0.0).then_some((sigma, seed));
                }
                "distractor" => {
                    if args.len() != 5 {
                        return Err(err("distractor takes x y w h level".into()));
                    }
                    let v: Vec<usize> = fields(line, &args[..4], 4, head)?;
                    let level: u8 = fields(line, &args[4..], 1, head)?[0];
                    s.distractors.push(Distractor {
                        x: v[0],
                        y: v[1],
                        w: v[2],
                        h: v[3],
                        level,
                    });
                }
                "none" if args.is_empty() => s.frames.push(None),
                _ if !is_directive => {
                    if args.len() != 4 {
                        return Err(err("frame lines are `cx cy rx ry open|closed` or `none`".into()));
                    }
                    let v: Vec<f64> = fields(line, &words[..4], 4, "frame")?;
                    let open = match words[4] {
                        "open" => true,
                        "closed" => false,
                        other => return Err(err(format!("expected open or closed, got {other:?}"))),
                    };
                    if !(v[2] > 0.0 && v[3] > 0.0) {
                        return Err(err("hand radii must be positive".into()));
                    }
                    s.frames.push(Some(HandPose {
                        cx: v[0],
                        cy: v[1],
                        rx: v[2],
                        ry: v[3],
                        open,
                    }));
                }
                _ => return Err(err(format!("unknown directive {head:?}"))),
            }
        }
        if let Some((line, rel)) = bg_image {
            let path = base_dir.map_or_else(|| Path::new(&rel).to_path_buf(), |d| d.join(&rel));
            let frame = crate::source::load_image(&path)?;
            if frame.dims() != (s.width, s.height) {
                return Err(ScriptError::Parse {
                    line,
                    message: format!(
                        "background image is {}x{}, script size is {}x{}",
                        frame.width(),
                        frame.height(),
                        s.width,
                        s.height
                    ),
                });
            }
            s.background = Background::Image(frame);
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, ScriptError> {
        let text = std::fs::read_to_string(path).map_err(|source| ScriptError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text, path.parent())
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn skin_rgb(&self) -> Rgb {
        hsv_to_rgb(self.skin)
    }

    /// Visit the pixels covered by the hand in frame `index`.
    fn for_each_hand_pixel(&self, index: usize, mut f: impl FnMut(usize, usize)) {
        let Some(Some(pose)) = self.frames.get(index) else {
            return;
        };
        let (rx, ry) = pose.drawn_radii(self.closed_ratio);
        let y0 = (pose.cy - ry).floor().max(0.0) as usize;
        let y1 = ((pose.cy + ry).ceil().max(0.0) as usize).min(self.height - 1);
        let x0 = (pose.cx - rx).floor().max(0.0) as usize;
        let x1 = ((pose.cx + rx).ceil().max(0.0) as usize).min(self.width - 1);
        for y in y0..=y1 {
            let dy = (y as f64 - pose.cy) / ry;
            for x in x0..=x1 {
                let dx = (x as f64 - pose.cx) / rx;
                if dx * dx + dy * dy <= 1.0 {
                    f(x, y);
                }
            }
        }
    }

    /// Exact set of hand pixels in frame `index`.
    pub fn hand_mask(&self, index: usize) -> BinaryMask {
        let mut m = BinaryMask::filled(self.width, self.height, false).expect("positive size");
        self.for_each_hand_pixel(index, |x, y| m.set(x, y, true));
        m
    }

    /// Background plus distractors, without hand or noise.
    pub fn empty_scene(&self) -> Frame {
        let mut f = match &self.background {
            Background::Flat(c) => Frame::filled(self.width, self.height, *c).expect("positive size"),
            Background::Image(img) => img.clone(),
        };
        for d in &self.distractors {
            for y in d.y..(d.y + d.h).min(self.height) {
                for x in d.x..(d.x + d.w).min(self.width) {
                    f.set(x, y, [d.level; 3]);
                }
            }
        }
        f
    }

    /// Render frame `index`. Noise is seeded per frame, so frames can be
    /// rendered in any order with identical results.
    pub fn render(&self, index: usize) -> Frame {
        let mut f = self.empty_scene();
        let skin = self.skin_rgb();
        self.for_each_hand_pixel(index, |x, y| f.set(x, y, skin));
        if let Some((sigma, seed)) = self.noise {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(index as u64);
            let normal = Normal::new(0.0, sigma).expect("sigma checked at parse");
            for px in f.pixels_mut() {
                for c in px.iter_mut() {
                    let v = f64::from(*c) + normal.sample(&mut rng);
                    *c = v.round().clamp(0.0, 255.0) as u8;
                }
            }
        }
        f.with_index(index as u64)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = "size 64 48\nfps 10\nbackground 10 20 30\nskin 20 0.5 0.8\n\
                         distractor 0 0 4 4 128\nnone\n32 24 10 8 open\n32 24 10 8 closed\n";

    #[test]
    fn parses_header_and_frames() {
        let s = GestureScript::parse(SMALL, None).unwrap();
        assert_eq!((s.width, s.height, s.fps), (64, 48, 10.0));
        assert_eq!(s.background, Background::Flat([10, 20, 30]));
        assert_eq!(s.distractors.len(), 1);
        assert_eq!(s.frames.len(), 3);
        assert_eq!(s.frames[0], None);
        assert!(s.frames[1].unwrap().open);
        assert!(!s.frames[2].unwrap().open);
    }

    #[test]
    fn rejects_bad_lines() {
        for (text, line) in [
            ("size 64\n", 1),
            ("none\nsize 64 48\n", 2),
            ("1 2 3 4 ajar\n", 1),
            ("1 2 3 open\n", 1),
            ("1 2 0 4 open\n", 1),
            ("wobble 3\n", 1),
            ("none\nnone 3\n", 2),
        ] {
            match GestureScript::parse(text, None) {
                Err(ScriptError::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn ellipse_area_close_to_analytic() {
        let s = GestureScript::parse("size 200 200\n100 100 36 48 open\n100 100 36 48 closed\n", None).unwrap();
        let open = s.hand_mask(0).count() as f64;
        let closed = s.hand_mask(1).count() as f64;
        let analytic = std::f64::consts::PI * 36.0 * 48.0;
        assert!((open - analytic).abs() / analytic < 0.01, "{open} vs {analytic}");
        assert!((closed / open - 0.45).abs() < 0.01, "{}", closed / open);
    }

    #[test]
    fn render_draws_hand_and_distractor() {
        let s = GestureScript::parse(SMALL, None).unwrap();
        let f = s.render(1);
        assert_eq!(f.frame_index, 1);
        assert_eq!(f.get(32, 24), s.skin_rgb());
        assert_eq!(f.get(1, 1), [128; 3]);
        assert_eq!(f.get(60, 40), [10, 20, 30]);
        assert_eq!(s.render(0).get(32, 24), [10, 20, 30]);
    }

    #[test]
    fn noise_is_per_frame_deterministic() {
        let s = GestureScript::parse("size 16 16\nnoise 4 9\nnone\nnone\n", None).unwrap();
        let a = s.render(1);
        let _ = s.render(0);
        assert_eq!(a, s.render(1));
        assert_ne!(s.render(0).pixels(), a.pixels());
    }

    #[test]
    fn hand_clipped_at_border() {
        let s = GestureScript::parse("size 20 20\n0 0 5 5 open\n", None).unwrap();
        let m = s.hand_mask(0);
        assert!(m.get(0, 0) && m.get(5, 0) && !m.get(6, 0));
    }
}
