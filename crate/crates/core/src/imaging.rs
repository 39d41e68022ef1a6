//! Raster types and the pixel-level kernels FIZI is built from: HSV
//! conversion, mask logic and 3x3 binary morphology.
//!
//! Coordinates have their origin at the top-left corner, `x` grows rightward
//! and `y` downward. Pixel storage is row-major.

use rayon::prelude::*;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ImagingError {
    #[error("raster dimensions must be at least 1x1, got {width}x{height}")]
    EmptyRaster { width: usize, height: usize },

    #[error("buffer holds {actual} pixels, expected {expected}")]
    BufferSize { expected: usize, actual: usize },

    #[error("dimension mismatch: {expected:?} vs {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
}

/// 8-bit RGB triple.
pub type Rgb = [u8; 3];

/// How row-parallel kernels are scheduled.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Execution {
    #[default]
    Sequential,
    /// Split rows across the rayon pool. Output is bit-identical to
    /// `Sequential`.
    Parallel,
}

// Rows per rayon task. Small enough to balance, large enough to amortize.
const ROW_CHUNK: usize = 16;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    pixels: Vec<Rgb>,
    pub frame_index: u64,
}

impl Frame {
    pub fn new(width: usize, height: usize, pixels: Vec<Rgb>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if pixels.len() != width * height {
            return Err(ImagingError::BufferSize {
                expected: width * height,
                actual: pixels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            pixels,
            frame_index: 0,
        })
    }

    /// A frame filled with a single color.
    pub fn filled(width: usize, height: usize, color: Rgb) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![color; width * height])
    }

    pub fn with_index(mut self, frame_index: u64) -> Self {
        self.frame_index = frame_index;
        self
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn pixels_mut(&mut self) -> &mut [Rgb] {
        &mut self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> Rgb {
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: Rgb) {
        self.pixels[y * self.width + x] = color;
    }
}

fn check_dims(width: usize, height: usize) -> Result<(), ImagingError> {
    if width == 0 || height == 0 {
        return Err(ImagingError::EmptyRaster { width, height });
    }
    Ok(())
}

/// Per-pixel boolean raster; `true` marks a zone of interest.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        if bits.len() != width * height {
            return Err(ImagingError::BufferSize {
                expected: width * height,
                actual: bits.len(),
            });
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn filled(width: usize, height: usize, value: bool) -> Result<Self, ImagingError> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> bool,
    ) -> Result<Self, ImagingError> {
        check_dims(width, height)?;
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y));
            }
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x]
    }

    /// Out-of-bounds coordinates read as `false`.
    pub fn get_or_false(&self, x: isize, y: isize) -> bool {
        if x < 0 || y < 0 || x as usize >= self.width || y as usize >= self.height {
            return false;
        }
        self.bits[y as usize * self.width + x as usize]
    }

    pub fn set(&mut self, x: usize, y: usize, value: bool) {
        self.bits[y * self.width + x] = value;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn complement(&self) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// `true` when every set pixel of `self` is also set in `other`.
    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims() == other.dims() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn ensure_dims(&self, dims: (usize, usize)) -> Result<(), ImagingError> {
        if self.dims() != dims {
            return Err(ImagingError::DimensionMismatch {
                expected: dims,
                found: self.dims(),
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsvPixel {
    /// Degrees in `[0, 360)`.
    pub h: f64,
    pub s: f64,
    pub v: f64,
}

/// Hexcone RGB to HSV. Achromatic pixels get hue 0.
pub fn rgb_to_hsv(p: Rgb) -> HsvPixel {
    let [r, g, b] = p.map(f64::from);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let v = max / 255.0;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    if delta == 0.0 {
        return HsvPixel { h: 0.0, s, v };
    }

    let mut h = if max == r {
        60.0 * ((g - b) / delta)
    } else if max == g {
        60.0 * ((b - r) / delta + 2.0)
    } else {
        60.0 * ((r - g) / delta + 4.0)
    };
    if h < 0.0 {
        h += 360.0;
    }
    if h >= 360.0 {
        h -= 360.0;
    }
    HsvPixel { h, s, v }
}

/// Inverse of [`rgb_to_hsv`], rounding each channel to the nearest integer.
pub fn hsv_to_rgb(p: HsvPixel) -> Rgb {
    let v = p.v.clamp(0.0, 1.0) * 255.0;
    let s = p.s.clamp(0.0, 1.0);
    let h = p.h.rem_euclid(360.0) / 60.0;
    let c = v * s;
    let x = c * (1.0 - ((h % 2.0) - 1.0).abs());
    let m = v - c;
    let (r, g, b) = match h as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    [r + m, g + m, b + m].map(|ch| ch.round().clamp(0.0, 255.0) as u8)
}

/// Build a mask by evaluating `pred` on every pixel of `frame`.
pub fn threshold_map(
    frame: &Frame,
    exec: Execution,
    pred: impl Fn(usize, Rgb) -> bool + Sync,
) -> BinaryMask {
    let (w, h) = frame.dims();
    let mut bits = vec![false; w * h];
    let fill = |start: usize, out: &mut [bool]| {
        let src = &frame.pixels()[start..start + out.len()];
        for (i, (o, &px)) in out.iter_mut().zip(src).enumerate() {
            *o = pred(start + i, px);
        }
    };
    match exec {
        Execution::Sequential => fill(0, &mut bits),
        Execution::Parallel => bits
            .par_chunks_mut(w * ROW_CHUNK)
            .enumerate()
            .for_each(|(i, out)| fill(i * w * ROW_CHUNK, out)),
    }
    BinaryMask {
        width: w,
        height: h,
        bits,
    }
}

/// Per-pixel conjunction of three masks.
pub fn mask_and(
    a: &BinaryMask,
    b: &BinaryMask,
    c: &BinaryMask,
) -> Result<BinaryMask, ImagingError> {
    b.ensure_dims(a.dims())?;
    c.ensure_dims(a.dims())?;
    let bits = a
        .bits
        .iter()
        .zip(&b.bits)
        .zip(&c.bits)
        .map(|((&x, &y), &z)| x && y && z)
        .collect();
    Ok(BinaryMask {
        width: a.width,
        height: a.height,
        bits,
    })
}

/// 3x3 structuring element anchored at its center.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct StructuringElement {
    cells: [[bool; 3]; 3],
}

impl Default for StructuringElement {
    fn default() -> Self {
        Self::square()
    }
}

impl StructuringElement {
    pub fn square() -> Self {
        Self {
            cells: [[true; 3]; 3],
        }
    }

    /// `cells[dy + 1][dx + 1]` covers the neighbor at offset `(dx, dy)`.
    pub fn from_cells(cells: [[bool; 3]; 3]) -> Self {
        Self { cells }
    }

    pub fn is_square(&self) -> bool {
        self.cells.iter().flatten().all(|&c| c)
    }

    fn offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        (0..3).flat_map(move |row| {
            (0..3).filter_map(move |col| {
                self.cells[row][col].then_some((col as isize - 1, row as isize - 1))
            })
        })
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum MorphOp {
    Erode,
    Dilate,
}

pub fn erode(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph(m, se, MorphOp::Erode, Execution::Sequential)
}

pub fn dilate(m: &BinaryMask, se: &StructuringElement) -> BinaryMask {
    morph(m, se, MorphOp::Dilate, Execution::Sequential)
}

pub fn erode_with(m: &BinaryMask, se: &StructuringElement, exec: Execution) -> BinaryMask {
    morph(m, se, MorphOp::Erode, exec)
}

pub fn dilate_with(m: &BinaryMask, se: &StructuringElement, exec: Execution) -> BinaryMask {
    morph(m, se, MorphOp::Dilate, exec)
}

/// `open_rounds` openings (erode, dilate) followed by `close_rounds`
/// closings (dilate, erode), all with the 3x3 square.
pub fn morph_cleanup(m: &BinaryMask, open_rounds: u32, close_rounds: u32) -> BinaryMask {
    morph_cleanup_with(m, open_rounds, close_rounds, Execution::Sequential)
}

pub fn morph_cleanup_with(
    m: &BinaryMask,
    open_rounds: u32,
    close_rounds: u32,
    exec: Execution,
) -> BinaryMask {
    let se = StructuringElement::square();
    let mut out = m.clone();
    for _ in 0..open_rounds {
        out = morph(&out, &se, MorphOp::Erode, exec);
        out = morph(&out, &se, MorphOp::Dilate, exec);
    }
    for _ in 0..close_rounds {
        out = morph(&out, &se, MorphOp::Dilate, exec);
        out = morph(&out, &se, MorphOp::Erode, exec);
    }
    out
}

fn morph(m: &BinaryMask, se: &StructuringElement, op: MorphOp, exec: Execution) -> BinaryMask {
    if se.is_square() {
        // The square is the sum of a horizontal and a vertical 3-segment, so
        // two 1-D passes give the same result as the full 3x3 window.
        let horizontal = run_rows(m, exec, |src, y, out| segment_row(src, y, op, out));
        run_rows(&horizontal, exec, |src, y, out| segment_col(src, y, op, out))
    } else {
        let offsets: Vec<(isize, isize)> = se.offsets().collect();
        run_rows(m, exec, |src, y, out| generic_row(src, &offsets, y, op, out))
    }
}

fn run_rows(
    src: &BinaryMask,
    exec: Execution,
    row_fn: impl Fn(&BinaryMask, usize, &mut [bool]) + Sync,
) -> BinaryMask {
    let w = src.width;
    let mut bits = vec![false; src.bits.len()];
    match exec {
        Execution::Sequential => {
            for (y, out) in bits.chunks_mut(w).enumerate() {
                row_fn(src, y, out);
            }
        }
        Execution::Parallel => {
            bits.par_chunks_mut(w * ROW_CHUNK)
                .enumerate()
                .for_each(|(chunk, rows)| {
                    for (i, out) in rows.chunks_mut(w).enumerate() {
                        row_fn(src, chunk * ROW_CHUNK + i, out);
                    }
                });
        }
    }
    BinaryMask {
        width: w,
        height: src.height,
        bits,
    }
}

fn segment_row(src: &BinaryMask, y: usize, op: MorphOp, out: &mut [bool]) {
    let w = src.width;
    let row = &src.bits[y * w..(y + 1) * w];
    for x in 0..w {
        let left = if x > 0 { row[x - 1] } else { false };
        let right = if x + 1 < w { row[x + 1] } else { false };
        out[x] = match op {
            MorphOp::Erode => left && row[x] && right,
            MorphOp::Dilate => left || row[x] || right,
        };
    }
}

fn segment_col(src: &BinaryMask, y: usize, op: MorphOp, out: &mut [bool]) {
    let w = src.width;
    let row = &src.bits[y * w..(y + 1) * w];
    let up = (y > 0).then(|| &src.bits[(y - 1) * w..y * w]);
    let down = (y + 1 < src.height).then(|| &src.bits[(y + 1) * w..(y + 2) * w]);
    match op {
        MorphOp::Erode => match (up, down) {
            (Some(up), Some(down)) => {
                for x in 0..w {
                    out[x] = up[x] && row[x] && down[x];
                }
            }
            _ => out.fill(false),
        },
        MorphOp::Dilate => {
            for x in 0..w {
                out[x] = row[x] || up.is_some_and(|r| r[x]) || down.is_some_and(|r| r[x]);
            }
        }
    }
}

fn generic_row(
    src: &BinaryMask,
    offsets: &[(isize, isize)],
    y: usize,
    op: MorphOp,
    out: &mut [bool],
) {
    let (x0, y) = (0isize, y as isize);
    for (x, o) in (x0..).zip(out.iter_mut()) {
        *o = match op {
            MorphOp::Erode => offsets
                .iter()
                .all(|&(dx, dy)| src.get_or_false(x + dx, y + dy)),
            // Dilation reflects the element; neighbor (x - dx, y - dy).
            MorphOp::Dilate => offsets
                .iter()
                .any(|&(dx, dy)| src.get_or_false(x - dx, y - dy)),
        };
    }
}
