//! Click detection from the tracked hand's area: a closing hand shrinks.
//!
//! While released, the baseline is the median of the recent areas. A press
//! (`Down`) needs `m_frames` consecutive frames below `down_ratio` of the
//! baseline. The baseline then freezes until the area climbs back above
//! `up_ratio` of it (`Up`).

use std::collections::VecDeque;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClickParams {
    pub down_ratio: f64,
    pub up_ratio: f64,
    pub m_frames: u32,
    pub history_len: usize,
}

impl Default for ClickParams {
    fn default() -> Self {
        Self {
            down_ratio: 0.6,
            up_ratio: 0.8,
            m_frames: 3,
            history_len: 15,
        }
    }
}

impl ClickParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.down_ratio > 0.0 && self.down_ratio < self.up_ratio && self.up_ratio <= 1.0) {
            return Err(format!(
                "click ratios need 0 < down_ratio < up_ratio <= 1, got {} and {}",
                self.down_ratio, self.up_ratio
            ));
        }
        if self.m_frames == 0 || self.history_len == 0 {
            return Err("m_frames and history_len must be at least 1".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClickEdge {
    None,
    Down,
    Up,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ClickDetector {
    params: ClickParams,
    history: VecDeque<f64>,
    baseline: Option<f64>,
    pressed: bool,
    low_streak: u32,
}

impl ClickDetector {
    pub fn new(params: ClickParams) -> Self {
        Self {
            params,
            history: VecDeque::with_capacity(params.history_len),
            baseline: None,
            pressed: false,
            low_streak: 0,
        }
    }

    pub fn params(&self) -> &ClickParams {
        &self.params
    }

    /// Swap thresholds, keeping history and press state.
    pub fn set_params(&mut self, params: ClickParams) {
        self.params = params;
        while self.history.len() > params.history_len {
            self.history.pop_front();
        }
    }

    pub fn pressed(&self) -> bool {
        self.pressed
    }

    pub fn baseline(&self) -> Option<f64> {
        self.baseline
    }

    /// Feed one frame's area.
    pub fn update(&mut self, area: f64) -> ClickEdge {
        if self.pressed {
            let baseline = self.baseline.expect("baseline is set while pressed");
            if area / baseline > self.params.up_ratio {
                self.pressed = false;
                self.push(area);
                return ClickEdge::Up;
            }
            return ClickEdge::None;
        }

        let baseline = median(&self.history);
        self.baseline = baseline;
        self.push(area);
        let Some(baseline) = baseline.filter(|b| *b > 0.0) else {
            return ClickEdge::None;
        };
        if area / baseline < self.params.down_ratio {
            self.low_streak += 1;
            if self.low_streak >= self.params.m_frames {
                self.low_streak = 0;
                self.pressed = true;
                return ClickEdge::Down;
            }
        } else {
            self.low_streak = 0;
        }
        ClickEdge::None
    }

    fn push(&mut self, area: f64) {
        self.history.push_back(area);
        while self.history.len() > self.params.history_len {
            self.history.pop_front();
        }
    }
}

/// Functional form of [`ClickDetector::update`].
pub fn update_click(d: &ClickDetector, new_area: f64) -> (ClickDetector, ClickEdge) {
    let mut next = d.clone();
    let edge = next.update(new_area);
    (next, edge)
}

fn median(values: &VecDeque<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v: Vec<f64> = values.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    })
}
