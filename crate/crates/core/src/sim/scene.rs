use serde::{Deserialize, Serialize};

use super::{FrameSequence, SimError};
use crate::event::SensorGeometry;
use crate::image::RgbFrame;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectShape {
    Square,
    Disk,
}

/// A uniform object translating at constant velocity over a flat background.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneConfig {
    pub geometry: SensorGeometry,
    /// Gray level in `[0, 1]`.
    pub background: f64,
    pub object_intensity: f64,
    pub shape: ObjectShape,
    /// Side length (square) or diameter (disk), pixels.
    pub size: f64,
    /// Object center at t = 0, pixels.
    pub start: [f64; 2],
    /// Pixels per second.
    pub velocity: [f64; 2],
    pub duration_us: u64,
    pub fps: f64,
}

impl Default for SceneConfig {
    fn default() -> Self {
        Self {
            geometry: SensorGeometry::default(),
            background: 0.2,
            object_intensity: 0.8,
            shape: ObjectShape::Square,
            size: 40.0,
            start: [60.0, 130.0],
            velocity: [120.0, 0.0],
            duration_us: 1_500_000,
            fps: 30.0,
        }
    }
}

impl SceneConfig {
    /// Frame period in whole microseconds.
    pub fn frame_period_us(&self) -> u64 {
        (1e6 / self.fps).round() as u64
    }

    pub fn frame_times(&self) -> Vec<u64> {
        let period = self.frame_period_us();
        (0..=self.duration_us / period).map(|k| k * period).collect()
    }

    pub fn center_at(&self, t_us: u64) -> [f64; 2] {
        let s = t_us as f64 / 1e6;
        [self.start[0] + self.velocity[0] * s, self.start[1] + self.velocity[1] * s]
    }

    fn validate(&self) -> Result<(), SimError> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !unit(self.background) || !unit(self.object_intensity) {
            return Err(SimError::InvalidConfig("intensities must lie in [0, 1]".into()));
        }
        if !(self.size.is_finite() && self.size > 0.0) {
            return Err(SimError::InvalidConfig(format!("object size must be positive, got {}", self.size)));
        }
        if !(self.fps.is_finite() && self.fps > 0.0) || self.frame_period_us() == 0 {
            return Err(SimError::InvalidConfig(format!("bad frame rate {}", self.fps)));
        }
        if self.start.iter().chain(&self.velocity).any(|v| !v.is_finite()) {
            return Err(SimError::InvalidConfig("non-finite position or velocity".into()));
        }
        Ok(())
    }
}

/// Renders the scene with exact area coverage (squares) or 8x8 supersampling (disks).
pub fn synthetic_scene(config: &SceneConfig) -> Result<FrameSequence, SimError> {
    config.validate()?;
    let (w, h) = (config.geometry.width(), config.geometry.height());
    let half = config.size / 2.0;
    let times = config.frame_times();
    // Motion is linear, so checking the endpoints bounds every frame.
    for &t in [times[0], *times.last().unwrap()].iter() {
        let [cx, cy] = config.center_at(t);
        if cx - half < 0.0 || cy - half < 0.0 || cx + half > w as f64 || cy + half > h as f64 {
            return Err(SimError::ObjectOutOfBounds { t_us: t, width: w, height: h });
        }
    }

    let frames = times
        .iter()
        .map(|&t| {
            let c = config.center_at(t);
            let mut values = vec![0.0; w * h * 3];
            for y in 0..h {
                for x in 0..w {
                    let cov = match config.shape {
                        ObjectShape::Square => square_coverage(x, y, c, half),
                        ObjectShape::Disk => disk_coverage(x, y, c, half),
                    };
                    let v = config.background + (config.object_intensity - config.background) * cov;
                    values[(y * w + x) * 3..][..3].fill(v);
                }
            }
            (t, RgbFrame::new(w, h, values))
        })
        .collect();
    FrameSequence::new(config.geometry, frames)
}

fn overlap(lo: f64, hi: f64, a: f64, b: f64) -> f64 {
    (hi.min(b) - lo.max(a)).max(0.0)
}

fn square_coverage(x: usize, y: usize, c: [f64; 2], half: f64) -> f64 {
    let (x, y) = (x as f64, y as f64);
    overlap(x, x + 1.0, c[0] - half, c[0] + half) * overlap(y, y + 1.0, c[1] - half, c[1] + half)
}

fn disk_coverage(x: usize, y: usize, c: [f64; 2], r: f64) -> f64 {
    const S: usize = 8;
    let (x, y) = (x as f64, y as f64);
    // cheap reject / accept before sampling
    let dx = (c[0] - (x + 0.5)).abs();
    let dy = (c[1] - (y + 0.5)).abs();
    let d = (dx * dx + dy * dy).sqrt();
    if d > r + 0.75 {
        return 0.0;
    }
    if d + 0.75 < r {
        return 1.0;
    }
    let mut inside = 0;
    for j in 0..S {
        for i in 0..S {
            let px = x + (i as f64 + 0.5) / S as f64 - c[0];
            let py = y + (j as f64 + 0.5) / S as f64 - c[1];
            if px * px + py * py <= r * r {
                inside += 1;
            }
        }
    }
    inside as f64 / (S * S) as f64
}
