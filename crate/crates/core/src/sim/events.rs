use serde::{Deserialize, Serialize};

use super::{FrameSequence, SimError};
use crate::event::{validate_stream, Event, EventStream, Polarity};

pub const DEFAULT_CONTRAST: f64 = 0.2;
pub const DEFAULT_EPSILON: f64 = 1e-3;

/// Slack for threshold comparisons, so a step of exactly `C` in log space
/// still fires despite rounding in `ln`.
const CROSSING_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventModel {
    pub contrast: f64,
    /// Intensity offset before the log.
    pub epsilon: f64,
}

impl Default for EventModel {
    fn default() -> Self {
        Self { contrast: DEFAULT_CONTRAST, epsilon: DEFAULT_EPSILON }
    }
}

impl EventModel {
    /// Per pixel, `ln(I + eps)` of the pixel's CFA channel is interpolated
    /// linearly between frames; each crossing of `ref ± C` emits one event at
    /// `ceil` of the crossing time and moves `ref` to the crossed level.
    pub fn generate(&self, seq: &FrameSequence) -> Result<EventStream, SimError> {
        if !(self.contrast > 0.0) || !self.contrast.is_finite() {
            return Err(SimError::NonPositiveThreshold(self.contrast));
        }
        if !(self.epsilon > 0.0) {
            return Err(SimError::InvalidConfig(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if seq.len() < 2 {
            return Err(SimError::TooFewFrames { needed: 2, got: seq.len() });
        }
        let geometry = seq.geometry();
        let (w, h) = (geometry.width(), geometry.height());
        let frames = seq.frames();
        let c = self.contrast;

        let mut events = Vec::new();
        let mut levels = vec![0.0; frames.len()];
        for y in 0..h {
            for x in 0..w {
                let ch = geometry.bayer().color_at(x, y) as usize;
                let idx = (y * w + x) * 3 + ch;
                for (l, (_, f)) in levels.iter_mut().zip(frames) {
                    *l = (f.values()[idx] + self.epsilon).ln();
                }
                let mut reference = levels[0];
                for k in 0..frames.len() - 1 {
                    let (ta, tb) = (frames[k].0, frames[k + 1].0);
                    let (la, lb) = (levels[k], levels[k + 1]);
                    if la == lb {
                        continue;
                    }
                    let dt = (tb - ta) as f64;
                    let (step, polarity) = if lb > la { (c, Polarity::On) } else { (-c, Polarity::Off) };
                    loop {
                        let level = reference + step;
                        let crossed = if step > 0.0 { level <= lb + CROSSING_TOL } else { level >= lb - CROSSING_TOL };
                        if !crossed {
                            break;
                        }
                        let frac = ((level - la) / (lb - la)).clamp(0.0, 1.0);
                        let offset = ((frac * dt).ceil() as u64).clamp(1, tb - ta);
                        events.push(Event::new(ta + offset, x as u16, y as u16, polarity));
                        reference = level;
                    }
                }
            }
        }
        // Built in row-major pixel order, so a stable sort on t yields (t, y, x, seq).
        events.sort_by_key(|e| e.t);
        validate_stream(events, geometry).map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

pub fn generate_events(seq: &FrameSequence, contrast: f64) -> Result<EventStream, SimError> {
    EventModel { contrast, ..EventModel::default() }.generate(seq)
}
