//! Plain image containers shared by fusion, the simulator and file I/O.

use crate::event::SensorGeometry;
use crate::repr::EventFrame;

/// 8-bit interleaved RGB, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RgbImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl RgbImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height * 3, "RGB buffer size mismatch");
        Self { width, height, data }
    }

    pub fn filled(width: usize, height: usize, rgb: [u8; 3]) -> Self {
        let data = rgb.iter().copied().cycle().take(width * height * 3).collect();
        Self { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn set_pixel(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.data[i..i + 3].copy_from_slice(&rgb);
    }

    pub fn matches(&self, geometry: SensorGeometry) -> bool {
        self.width == geometry.width() && self.height == geometry.height()
    }

    /// Scales to `[0, 1]` reals.
    pub fn to_frame(&self) -> RgbFrame {
        RgbFrame {
            width: self.width,
            height: self.height,
            values: self.data.iter().map(|&v| v as f64 / 255.0).collect(),
        }
    }

    /// Rec. 601 luma per pixel, in 8-bit units.
    pub fn luma(&self) -> Vec<f64> {
        self.data
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64)
            .collect()
    }

    pub fn mean_luma(&self) -> f64 {
        let l = self.luma();
        l.iter().sum::<f64>() / l.len().max(1) as f64
    }
}

/// Single-channel 8-bit image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    width: usize,
    height: usize,
    data: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, data: Vec<u8>) -> Self {
        assert_eq!(data.len(), width * height, "gray buffer size mismatch");
        Self { width, height, data }
    }

    /// Quantizes `[0, 1]` values with `round(v * 255)`.
    pub fn from_unit(width: usize, height: usize, values: &[f64]) -> Self {
        let data = values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }
}

/// Interleaved RGB with real intensities, nominally in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RgbFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl RgbFrame {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height * 3, "frame buffer size mismatch");
        Self { width, height, values }
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self::new(width, height, vec![0.0; width * height * 3])
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }

    /// Rec. 601 luma per pixel, same units as the frame.
    pub fn luma(&self) -> Vec<f64> {
        self.values
            .chunks_exact(3)
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Rounds to 8-bit after clamping to `[0, 1]`.
    pub fn to_rgb8(&self) -> RgbImage {
        let data = self.values.iter().map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8).collect();
        RgbImage::new(self.width, self.height, data)
    }
}

impl From<&EventFrame> for RgbFrame {
    fn from(f: &EventFrame) -> Self {
        RgbFrame::new(f.width(), f.height(), f.values().to_vec())
    }
}
