use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{FrameSequence, SimError};
use crate::image::{RgbFrame, RgbImage};

/// Frame-branch degradation: exposure blur and dimming with sensor noise.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DegradeConfig {
    pub exposure_ms: f64,
    /// Illumination factor in `[0, 1]`.
    pub light_scale: f64,
    /// 8-bit values below this become 0.
    pub black_level: u8,
    /// Additive Gaussian noise, 8-bit units.
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DegradeConfig {
    fn default() -> Self {
        Self { exposure_ms: 10.0, light_scale: 1.0, black_level: 0, noise_std: 0.0, seed: 0 }
    }
}

impl DegradeConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.exposure_ms.is_finite() && self.exposure_ms >= 0.0) {
            return Err(SimError::InvalidConfig(format!("exposure_ms must be >= 0, got {}", self.exposure_ms)));
        }
        if !(0.0..=1.0).contains(&self.light_scale) {
            return Err(SimError::InvalidConfig(format!("light_scale must be in [0, 1], got {}", self.light_scale)));
        }
        if !(self.noise_std.is_finite() && self.noise_std >= 0.0) {
            return Err(SimError::InvalidConfig(format!("noise_std must be >= 0, got {}", self.noise_std)));
        }
        Ok(())
    }
}

/// Exact time average of the intensity-interpolated sequence over
/// `[t_capture - exposure, t_capture]`.
pub fn apply_exposure_blur(seq: &FrameSequence, t_capture: u64, exposure_ms: f64) -> Result<RgbFrame, SimError> {
    let end = t_capture as f64;
    let start = end - exposure_ms * 1000.0;
    let (first, last) = (seq.first_time(), seq.last_time());
    if !(exposure_ms >= 0.0) || start < first as f64 || end > last as f64 {
        return Err(SimError::ExposureOutsideSequence { start_us: start, end_us: end, first_us: first, last_us: last });
    }
    if start == end {
        return Ok(seq.frame_at(end));
    }

    let frames = seq.frames();
    let first_frame = &frames[0].1;
    let mut acc = vec![0.0; first_frame.values().len()];
    for pair in frames.windows(2) {
        let (ta, tb) = (pair[0].0 as f64, pair[1].0 as f64);
        let (lo, hi) = (start.max(ta), end.min(tb));
        if hi <= lo {
            continue;
        }
        // integral of a linear segment = length x value at the midpoint
        let w = ((lo + hi) / 2.0 - ta) / (tb - ta);
        let len = hi - lo;
        for ((a, &x), &y) in acc.iter_mut().zip(pair[0].1.values()).zip(pair[1].1.values()) {
            *a += len * (x + (y - x) * w);
        }
    }
    let span = end - start;
    let values = acc.into_iter().map(|v| v / span).collect();
    Ok(RgbFrame::new(first_frame.width(), first_frame.height(), values))
}

/// `round(clamp(frame * scale * 255 + noise))`, then values under the black
/// level are zeroed. Noise is drawn per sample from a seeded generator.
pub fn apply_low_light(frame: &RgbFrame, config: &DegradeConfig) -> Result<RgbImage, SimError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let data = frame
        .values()
        .iter()
        .map(|&v| {
            let mut s = v * config.light_scale * 255.0;
            if config.noise_std > 0.0 {
                s += config.noise_std * rng.sample::<f64, _>(StandardNormal);
            }
            let q = s.clamp(0.0, 255.0).round() as u8;
            if q < config.black_level {
                0
            } else {
                q
            }
        })
        .collect();
    Ok(RgbImage::new(frame.width(), frame.height(), data))
}

/// Sum of squared horizontal and vertical luma differences.
pub fn edge_energy(frame: &RgbFrame) -> f64 {
    let (w, h) = (frame.width(), frame.height());
    let l = frame.luma();
    let mut e = 0.0;
    for y in 0..h {
        for x in 0..w {
            let v = l[y * w + x];
            if x + 1 < w {
                e += (l[y * w + x + 1] - v).powi(2);
            }
            if y + 1 < h {
                e += (l[(y + 1) * w + x] - v).powi(2);
            }
        }
    }
    e
}

/// Fraction of 8-bit samples that sit at zero.
pub fn clipped_fraction(image: &RgbImage) -> f64 {
    let d = image.data();
    d.iter().filter(|&&v| v == 0).count() as f64 / d.len().max(1) as f64
}
