//! Synthetic scenes, a log-intensity event model and frame degradation.
//!
//! Frames are interpolated linearly in intensity for the frame branch and in
//! log-intensity for event generation.

mod degrade;
mod events;
mod random;
mod scene;

pub use degrade::{apply_exposure_blur, apply_low_light, clipped_fraction, edge_energy, DegradeConfig};
pub use events::{generate_events, EventModel, DEFAULT_CONTRAST, DEFAULT_EPSILON};
pub use random::random_stream;
pub use scene::{synthetic_scene, ObjectShape, SceneConfig};

use crate::event::SensorGeometry;
use crate::image::RgbFrame;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SimError {
    #[error("object leaves the {width}x{height} frame at t = {t_us} us")]
    ObjectOutOfBounds { t_us: u64, width: usize, height: usize },
    #[error("contrast threshold must be positive, got {0}")]
    NonPositiveThreshold(f64),
    #[error("exposure [{start_us}, {end_us}] us is outside the sequence span [{first_us}, {last_us}] us")]
    ExposureOutsideSequence { start_us: f64, end_us: f64, first_us: u64, last_us: u64 },
    #[error("need at least {needed} frames, got {got}")]
    TooFewFrames { needed: usize, got: usize },
    #[error("frame {index} timestamp does not increase")]
    NonMonotoneFrames { index: usize },
    #[error("frame {index} is {got_w}x{got_h}, geometry is {want_w}x{want_h}")]
    FrameSizeMismatch { index: usize, got_w: usize, got_h: usize, want_w: usize, want_h: usize },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Timed frames with strictly increasing timestamps.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameSequence {
    geometry: SensorGeometry,
    frames: Vec<(u64, RgbFrame)>,
}

impl FrameSequence {
    pub fn new(geometry: SensorGeometry, frames: Vec<(u64, RgbFrame)>) -> Result<Self, SimError> {
        if frames.is_empty() {
            return Err(SimError::TooFewFrames { needed: 1, got: 0 });
        }
        for (index, (t, f)) in frames.iter().enumerate() {
            if f.width() != geometry.width() || f.height() != geometry.height() {
                return Err(SimError::FrameSizeMismatch {
                    index,
                    got_w: f.width(),
                    got_h: f.height(),
                    want_w: geometry.width(),
                    want_h: geometry.height(),
                });
            }
            if index > 0 && *t <= frames[index - 1].0 {
                return Err(SimError::NonMonotoneFrames { index });
            }
        }
        Ok(Self { geometry, frames })
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn frames(&self) -> &[(u64, RgbFrame)] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn first_time(&self) -> u64 {
        self.frames[0].0
    }

    pub fn last_time(&self) -> u64 {
        self.frames[self.frames.len() - 1].0
    }

    /// Same frames with every intensity multiplied by `scale`.
    pub fn scaled(&self, scale: f64) -> Self {
        let frames = self
            .frames
            .iter()
            .map(|(t, f)| {
                let v = f.values().iter().map(|&v| v * scale).collect();
                (*t, RgbFrame::new(f.width(), f.height(), v))
            })
            .collect();
        Self { geometry: self.geometry, frames }
    }

    /// Intensity-linear interpolation at `t_us`, clamped to the sequence span.
    pub fn frame_at(&self, t_us: f64) -> RgbFrame {
        let k = self.segment_of(t_us);
        if k + 1 >= self.frames.len() {
            return self.frames[k].1.clone();
        }
        let (ta, fa) = &self.frames[k];
        let (tb, fb) = &self.frames[k + 1];
        let w = ((t_us - *ta as f64) / (*tb - *ta) as f64).clamp(0.0, 1.0);
        lerp_frames(fa, fb, w)
    }

    /// Index of the frame that starts the segment containing `t_us`.
    fn segment_of(&self, t_us: f64) -> usize {
        let n = self.frames.len();
        let after = self.frames.partition_point(|(t, _)| (*t as f64) <= t_us);
        after.saturating_sub(1).min(n - 1)
    }
}

fn lerp_frames(a: &RgbFrame, b: &RgbFrame, w: f64) -> RgbFrame {
    if w == 0.0 {
        return a.clone();
    }
    if w == 1.0 {
        return b.clone();
    }
    let v = a.values().iter().zip(b.values()).map(|(&x, &y)| x + (y - x) * w).collect();
    RgbFrame::new(a.width(), a.height(), v)
}
