//! Frame-rate measurement over a source.

use std::fmt::Write as _;
use std::time::Duration;

use crate::config::PipelineConfig;
use crate::pipeline::{Phase, Pipeline, PipelineError, StageTimings};
use crate::source::FrameSource;

#[derive(Clone, Debug, Default)]
pub struct BenchReport {
    pub dims: (usize, usize),
    pub parallel: bool,
    pub frames: Vec<StageTimings>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Summary {
    pub mean: Duration,
    pub p50: Duration,
    pub p95: Duration,
    pub max: Duration,
}

fn summarize(mut v: Vec<Duration>) -> Summary {
    if v.is_empty() {
        return Summary {
            mean: Duration::ZERO,
            p50: Duration::ZERO,
            p95: Duration::ZERO,
            max: Duration::ZERO,
        };
    }
    v.sort();
    let pick = |q: f64| v[((v.len() - 1) as f64 * q).round() as usize];
    Summary {
        mean: v.iter().sum::<Duration>() / v.len() as u32,
        p50: pick(0.5),
        p95: pick(0.95),
        max: *v.last().unwrap(),
    }
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl BenchReport {
    pub fn total(&self) -> Summary {
        summarize(self.frames.iter().map(|t| t.total).collect())
    }

    pub fn stage(&self, i: usize) -> Summary {
        summarize(self.frames.iter().map(|t| t.stages()[i]).collect())
    }

    /// Frames per second over the measured frames.
    pub fn fps(&self) -> f64 {
        let total: Duration = self.frames.iter().map(|t| t.total).sum();
        if total.is_zero() {
            return 0.0;
        }
        self.frames.len() as f64 / total.as_secs_f64()
    }

    pub fn table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "{} frames at {}x{}, fizi branches {}",
            self.frames.len(),
            self.dims.0,
            self.dims.1,
            if self.parallel { "parallel" } else { "sequential" }
        );
        let _ = writeln!(out, "{:<10} {:>9} {:>9} {:>9} {:>9}", "stage", "mean ms", "p50 ms", "p95 ms", "max ms");
        let rows = StageTimings::STAGES
            .iter()
            .enumerate()
            .map(|(i, name)| (*name, self.stage(i)))
            .chain(std::iter::once(("total", self.total())));
        for (name, s) in rows {
            let _ = writeln!(
                out,
                "{name:<10} {:>9.3} {:>9.3} {:>9.3} {:>9.3}",
                ms(s.mean),
                ms(s.p50),
                ms(s.p95),
                ms(s.max)
            );
        }
        let _ = writeln!(out, "throughput {:.1} fps", self.fps());
        out
    }
}

/// Calibrate on the first frames, then time up to `frames` frames. Stops
/// early if the source runs out.
pub fn bench(config: &PipelineConfig, source: &mut dyn FrameSource, frames: usize) -> Result<BenchReport, PipelineError> {
    let mut pipeline = Pipeline::new(config.clone(), source.dims(), source.fps_hint())?;
    let mut report = BenchReport {
        dims: source.dims(),
        parallel: config.parallel,
        frames: Vec::with_capacity(frames),
    };
    while report.frames.len() < frames {
        let Some(frame) = source.next_frame() else {
            break;
        };
        let r = pipeline.process_frame(&frame?);
        if r.phase == Phase::Running {
            report.frames.push(r.timings);
        }
    }
    Ok(report)
}
