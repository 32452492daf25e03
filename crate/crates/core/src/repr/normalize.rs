use super::{CountMap, SumMap};

/// A single-channel grid that can be min-max normalized.
pub trait ScalarGrid {
    fn dims(&self) -> (usize, usize);
    fn sample(&self, index: usize) -> f64;
}

impl ScalarGrid for CountMap {
    fn dims(&self) -> (usize, usize) {
        (self.geometry.width(), self.geometry.height())
    }

    fn sample(&self, index: usize) -> f64 {
        self.values[index] as f64
    }
}

impl ScalarGrid for SumMap {
    fn dims(&self) -> (usize, usize) {
        (self.geometry.width(), self.geometry.height())
    }

    fn sample(&self, index: usize) -> f64 {
        self.values[index] as f64
    }
}

/// Row-major grid of reals in `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct NormalizedMap {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl NormalizedMap {
    /// Wraps raw values, clamping into `[0, 1]`. NaN becomes 0.
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height, "value count must match dimensions");
        let values = values
            .into_iter()
            .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
            .collect();
        Self { width, height, values }
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

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    /// Multiplies every value by `a` in `[0, 1]`.
    pub fn scaled(&self, a: f64) -> Self {
        Self::from_values(self.width, self.height, self.values.iter().map(|v| v * a).collect())
    }
}

impl ScalarGrid for NormalizedMap {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn sample(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// `(v - min) / (max - min)` per cell; a constant map becomes all zeros.
pub fn minmax_normalize<G: ScalarGrid + ?Sized>(map: &G) -> NormalizedMap {
    let (width, height) = map.dims();
    let n = width * height;
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..n {
        let v = map.sample(i);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let values = if n == 0 || hi <= lo {
        vec![0.0; n]
    } else {
        let range = hi - lo;
        (0..n).map(|i| (map.sample(i) - lo) / range).collect()
    };
    NormalizedMap { width, height, values }
}
