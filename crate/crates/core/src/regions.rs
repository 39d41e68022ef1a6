//! Connected-region labeling of the FIZI mask, region features, master-hand
//! selection and frame-to-frame tracking.

use std::cmp::Ordering;
use std::collections::VecDeque;

use thiserror::Error;

use crate::imaging::BinaryMask;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RegionError {
    #[error("cannot compute features of an empty pixel set")]
    EmptyPixelSet,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Connectivity {
    Four,
    #[default]
    Eight,
}

/// Horizontal run of member pixels, `x_start..x_end` on row `y`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Run {
    pub y: usize,
    pub x_start: usize,
    pub x_end: usize,
}

impl Run {
    pub fn len(&self) -> usize {
        self.x_end - self.x_start
    }

    pub fn is_empty(&self) -> bool {
        self.x_end == self.x_start
    }
}

/// Inclusive pixel bounds.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BBox {
    pub x_min: usize,
    pub y_min: usize,
    pub x_max: usize,
    pub y_max: usize,
}

impl BBox {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min as f64
            && x <= self.x_max as f64
            && y >= self.y_min as f64
            && y <= self.y_max as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Region {
    pub label: u32,
    pub area: usize,
    pub centroid: (f64, f64),
    pub bbox: BBox,
    /// Member pixels in raster order.
    pub runs: Vec<Run>,
}

impl Region {
    fn from_runs(label: u32, runs: Vec<Run>) -> Self {
        let mut area = 0usize;
        let (mut sx, mut sy) = (0u64, 0u64);
        let first = runs[0];
        let mut bbox = BBox {
            x_min: first.x_start,
            y_min: first.y,
            x_max: first.x_end - 1,
            y_max: first.y,
        };
        for r in &runs {
            let n = r.len();
            area += n;
            // Arithmetic series over x_start..x_end; the product is always even.
            sx += ((r.x_start + r.x_end - 1) * n / 2) as u64;
            sy += (r.y * n) as u64;
            bbox.x_min = bbox.x_min.min(r.x_start);
            bbox.x_max = bbox.x_max.max(r.x_end - 1);
            bbox.y_min = bbox.y_min.min(r.y);
            bbox.y_max = bbox.y_max.max(r.y);
        }
        Region {
            label,
            area,
            centroid: (sx as f64 / area as f64, sy as f64 / area as f64),
            bbox,
            runs,
        }
    }

    /// First member pixel in raster order.
    pub fn first_pixel(&self) -> (usize, usize) {
        (self.runs[0].x_start, self.runs[0].y)
    }

    pub fn pixels(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.runs
            .iter()
            .flat_map(|r| (r.x_start..r.x_end).map(move |x| (x, r.y)))
    }
}

/// Area, centroid and bounding box of an arbitrary pixel set.
pub fn compute_features(pixels: &[(usize, usize)]) -> Result<Region, RegionError> {
    if pixels.is_empty() {
        return Err(RegionError::EmptyPixelSet);
    }
    let mut sorted: Vec<(usize, usize)> = pixels.iter().map(|&(x, y)| (y, x)).collect();
    sorted.sort_unstable();
    sorted.dedup();
    let mut runs: Vec<Run> = Vec::new();
    for (y, x) in sorted {
        match runs.last_mut() {
            Some(r) if r.y == y && r.x_end == x => r.x_end += 1,
            _ => runs.push(Run {
                y,
                x_start: x,
                x_end: x + 1,
            }),
        }
    }
    Ok(Region::from_runs(0, runs))
}

fn find(parent: &mut [u32], mut i: u32) -> u32 {
    while parent[i as usize] != i {
        let p = parent[i as usize];
        parent[i as usize] = parent[p as usize];
        i = p;
    }
    i
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    // Keep the earlier run as root so roots follow raster order.
    match ra.cmp(&rb) {
        Ordering::Less => parent[rb as usize] = ra,
        Ordering::Greater => parent[ra as usize] = rb,
        Ordering::Equal => {}
    }
}

/// Partition the set pixels of `m` into maximal connected regions.
///
/// Labels start at 1 and follow the raster-scan order of each region's first
/// pixel.
pub fn label_components(m: &BinaryMask, connectivity: Connectivity) -> Vec<Region> {
    let (w, h) = m.dims();
    let bits = m.bits();

    let mut runs: Vec<Run> = Vec::new();
    // row_start[y]..row_start[y + 1] indexes the runs of row y.
    let mut row_start = Vec::with_capacity(h + 1);
    for y in 0..h {
        row_start.push(runs.len());
        let row = &bits[y * w..(y + 1) * w];
        let mut x = 0;
        while x < w {
            if row[x] {
                let start = x;
                while x < w && row[x] {
                    x += 1;
                }
                runs.push(Run {
                    y,
                    x_start: start,
                    x_end: x,
                });
            } else {
                x += 1;
            }
        }
    }
    row_start.push(runs.len());
    if runs.is_empty() {
        return Vec::new();
    }

    // Runs on adjacent rows touch when their spans overlap, widened by one
    // pixel on each side for diagonal contact.
    let reach = match connectivity {
        Connectivity::Four => 0,
        Connectivity::Eight => 1,
    };
    let mut parent: Vec<u32> = (0..runs.len() as u32).collect();
    for y in 1..h {
        let prev = row_start[y - 1]..row_start[y];
        let cur = row_start[y]..row_start[y + 1];
        let mut j = prev.start;
        for i in cur {
            let r = runs[i];
            while j < prev.end && runs[j].x_end + reach <= r.x_start {
                j += 1;
            }
            let mut k = j;
            while k < prev.end && runs[k].x_start < r.x_end + reach {
                union(&mut parent, i as u32, k as u32);
                k += 1;
            }
        }
    }

    let mut label_of_root = vec![u32::MAX; runs.len()];
    let mut grouped: Vec<Vec<Run>> = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        let root = find(&mut parent, i as u32) as usize;
        if label_of_root[root] == u32::MAX {
            label_of_root[root] = grouped.len() as u32;
            grouped.push(Vec::new());
        }
        grouped[label_of_root[root] as usize].push(*run);
    }
    grouped
        .into_iter()
        .enumerate()
        .map(|(i, runs)| Region::from_runs(i as u32 + 1, runs))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SelectionPolicy {
    /// Regions smaller than this fraction of the frame area are ignored.
    pub min_area_fraction: f64,
}

impl Default for SelectionPolicy {
    fn default() -> Self {
        Self {
            min_area_fraction: 0.005,
        }
    }
}

impl SelectionPolicy {
    pub fn min_area(&self, frame_dims: (usize, usize)) -> f64 {
        self.min_area_fraction * (frame_dims.0 * frame_dims.1) as f64
    }
}

/// Larger area first, then smaller centroid y, smaller centroid x, and the
/// raster position of the first pixel. Depends on geometry only.
fn dominance(a: &Region, b: &Region) -> Ordering {
    b.area
        .cmp(&a.area)
        .then(a.centroid.1.total_cmp(&b.centroid.1))
        .then(a.centroid.0.total_cmp(&b.centroid.0))
        .then_with(|| {
            let (ax, ay) = a.first_pixel();
            let (bx, by) = b.first_pixel();
            (ay, ax).cmp(&(by, bx))
        })
}

/// Largest region above the area floor, or `None`.
pub fn select_master<'a>(
    regions: &'a [Region],
    frame_dims: (usize, usize),
    policy: &SelectionPolicy,
) -> Option<&'a Region> {
    let floor = policy.min_area(frame_dims);
    regions
        .iter()
        .filter(|r| r.area as f64 >= floor)
        .min_by(|a, b| dominance(a, b))
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrackParams {
    pub connectivity: Connectivity,
    pub selection: SelectionPolicy,
    /// Match radius as a fraction of the frame diagonal.
    pub max_distance_fraction: f64,
    /// Accepted `candidate.area / previous.area` interval, inclusive.
    pub area_ratio: (f64, f64),
    /// Frames a lost region is held before the track is dropped.
    pub loss_tolerance: u32,
    pub history_len: usize,
}

impl Default for TrackParams {
    fn default() -> Self {
        Self {
            connectivity: Connectivity::Eight,
            selection: SelectionPolicy::default(),
            max_distance_fraction: 0.2,
            area_ratio: (0.3, 3.0),
            loss_tolerance: 10,
            history_len: 15,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrackState {
    pub current: Option<Region>,
    pub last_seen_frame: u64,
    pub frames_lost: u32,
    pub area_history: VecDeque<usize>,
}

impl TrackState {
    /// `true` when `current` was (re)acquired on the latest frame rather than
    /// held over from an earlier one.
    pub fn is_fresh(&self) -> bool {
        self.current.is_some() && self.frames_lost == 0
    }
}

fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
    ((a.0 - b.0).powi(2) + (a.1 - b.1).powi(2)).sqrt()
}

/// Advance the track by one frame.
pub fn track(
    state: &TrackState,
    regions: &[Region],
    frame_dims: (usize, usize),
    frame_index: u64,
    params: &TrackParams,
) -> TrackState {
    let matched = state.current.as_ref().and_then(|prev| {
        let diag = ((frame_dims.0 as f64).powi(2) + (frame_dims.1 as f64).powi(2)).sqrt();
        let d_max = params.max_distance_fraction * diag;
        let (lo, hi) = params.area_ratio;
        regions
            .iter()
            .filter_map(|r| {
                let ratio = r.area as f64 / prev.area as f64;
                let d = distance(r.centroid, prev.centroid);
                (d <= d_max && ratio >= lo && ratio <= hi).then_some((d, r))
            })
            .min_by(|(da, a), (db, b)| da.total_cmp(db).then_with(|| dominance(a, b)))
            .map(|(_, r)| r)
    });
    let chosen = matched.or_else(|| select_master(regions, frame_dims, &params.selection));

    let mut next = state.clone();
    match chosen {
        Some(r) => {
            next.current = Some(r.clone());
            next.last_seen_frame = frame_index;
            next.frames_lost = 0;
            next.area_history.push_back(r.area);
            while next.area_history.len() > params.history_len {
                next.area_history.pop_front();
            }
        }
        None => {
            next.frames_lost = next.frames_lost.saturating_add(1);
            if next.frames_lost > params.loss_tolerance {
                next.current = None;
            }
        }
    }
    next
}
