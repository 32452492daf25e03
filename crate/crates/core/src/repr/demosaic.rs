use super::{NormalizedMap, ReprError};
use crate::event::SensorGeometry;

/// Three-channel frame with values in `[0, 1]`, interleaved RGB, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct EventFrame {
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl EventFrame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![0.0; width * height * 3],
        }
    }

    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), width * height * 3);
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

    pub fn pixel(&self, x: usize, y: usize) -> [f64; 3] {
        let i = (y * self.width + x) * 3;
        [self.values[i], self.values[i + 1], self.values[i + 2]]
    }
}

/// Bilinear Bayer demosaic.
///
/// Each output channel keeps the sample when the pixel carries that filter
/// color; otherwise it is the mean of the same-color sites inside the
/// clipped 3x3 neighbourhood. In the interior this is the classic bilinear
/// kernel; at the border the weights are renormalized over in-bounds sites.
pub fn demosaic(map: &NormalizedMap, geometry: SensorGeometry) -> Result<EventFrame, ReprError> {
    let (w, h) = (geometry.width(), geometry.height());
    if map.width() != w || map.height() != h {
        return Err(ReprError::GeometryMismatch {
            got_w: map.width(),
            got_h: map.height(),
            want_w: w,
            want_h: h,
        });
    }
    let pattern = geometry.bayer();
    let src = map.values();
    let mut out = vec![0.0; w * h * 3];
    for y in 0..h {
        let ys = y.saturating_sub(1)..=(y + 1).min(h - 1);
        for x in 0..w {
            let own = pattern.color_at(x, y) as usize;
            let mut sum = [0.0f64; 3];
            let mut n = [0u32; 3];
            for ny in ys.clone() {
                for nx in x.saturating_sub(1)..=(x + 1).min(w - 1) {
                    let c = pattern.color_at(nx, ny) as usize;
                    sum[c] += src[ny * w + nx];
                    n[c] += 1;
                }
            }
            let o = (y * w + x) * 3;
            for c in 0..3 {
                let v = if c == own { src[y * w + x] } else { sum[c] / n[c] as f64 };
                out[o + c] = v.clamp(0.0, 1.0);
            }
        }
    }
    Ok(EventFrame {
        width: w,
        height: h,
        values: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{BayerPattern, CfaColor};
    use proptest::prelude::*;

    /// Classic bilinear demosaic written as convolutions of masked planes:
    /// green uses the cross kernel, red/blue the separable tent kernel.
    /// Only valid away from the border.
    fn kernel_oracle(src: &[f64], w: usize, h: usize, pattern: BayerPattern) -> Vec<f64> {
        let green_k = [[0.0, 0.25, 0.0], [0.25, 1.0, 0.25], [0.0, 0.25, 0.0]];
        let rb_k = [[0.25, 0.5, 0.25], [0.5, 1.0, 0.5], [0.25, 0.5, 0.25]];
        let mut out = vec![f64::NAN; w * h * 3];
        for c in [CfaColor::Red, CfaColor::Green, CfaColor::Blue] {
            let k = if c == CfaColor::Green { green_k } else { rb_k };
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    let mut acc = 0.0;
                    for dy in 0..3 {
                        for dx in 0..3 {
                            let (sx, sy) = (x + dx - 1, y + dy - 1);
                            if pattern.color_at(sx, sy) == c {
                                acc += k[dy][dx] * src[sy * w + sx];
                            }
                        }
                    }
                    out[(y * w + x) * 3 + c as usize] = acc;
                }
            }
        }
        out
    }

    fn geometry(w: u16, h: u16, p: BayerPattern) -> SensorGeometry {
        SensorGeometry::with_pattern(w, h, p).unwrap()
    }

    #[test]
    fn constant_map_stays_constant() {
        let g = geometry(9, 7, BayerPattern::Rggb);
        let map = NormalizedMap::from_values(9, 7, vec![0.625; 63]);
        let f = demosaic(&map, g).unwrap();
        assert!(f.values().iter().all(|&v| (v - 0.625).abs() < 1e-15));
    }

    #[test]
    fn red_impulse_footprint_matches_oracle() {
        let (w, h) = (8usize, 8usize);
        for pattern in [BayerPattern::Rggb, BayerPattern::Bggr, BayerPattern::Grbg, BayerPattern::Gbrg] {
            let (rx, ry) = (2..6)
                .flat_map(|y| (2..6).map(move |x| (x, y)))
                .find(|&(x, y)| pattern.color_at(x, y) == CfaColor::Red)
                .unwrap();
            let mut src = vec![0.0; w * h];
            src[ry * w + rx] = 1.0;
            let out = demosaic(&NormalizedMap::from_values(w, h, src.clone()), geometry(8, 8, pattern)).unwrap();
            let oracle = kernel_oracle(&src, w, h, pattern);
            for y in 1..h - 1 {
                for x in 1..w - 1 {
                    for c in 0..3 {
                        let i = (y * w + x) * 3 + c;
                        assert!((out.values()[i] - oracle[i]).abs() < 1e-15, "{pattern} at ({x},{y}) c{c}");
                    }
                }
            }
            // the impulse spreads a 3x3 tent into the red channel
            assert_eq!(out.pixel(rx, ry)[0], 1.0);
            assert_eq!(out.pixel(rx + 1, ry)[0], 0.5);
            assert_eq!(out.pixel(rx + 1, ry + 1)[0], 0.25);
            assert_eq!(out.pixel(rx + 2, ry)[0], 0.0);
        }
    }

    #[test]
    fn mismatched_geometry_rejected() {
        let map = NormalizedMap::from_values(4, 4, vec![0.0; 16]);
        assert!(demosaic(&map, geometry(4, 5, BayerPattern::Rggb)).is_err());
    }

    proptest! {
        #[test]
        fn interior_matches_oracle(src in prop::collection::vec(0.0f64..=1.0, 48), code in 0u8..4) {
            let pattern = BayerPattern::from_code(code).unwrap();
            let out = demosaic(&NormalizedMap::from_values(8, 6, src.clone()), geometry(8, 6, pattern)).unwrap();
            let oracle = kernel_oracle(&src, 8, 6, pattern);
            for (i, o) in oracle.iter().enumerate() {
                if !o.is_nan() {
                    prop_assert!((out.values()[i] - o).abs() < 1e-12);
                }
            }
            prop_assert!(out.values().iter().all(|v| (0.0..=1.0).contains(v)));
        }

        #[test]
        fn linear_in_scale(src in prop::collection::vec(0.0f64..=1.0, 35), a in 0.0f64..=1.0) {
            let g = geometry(7, 5, BayerPattern::Rggb);
            let m = NormalizedMap::from_values(7, 5, src);
            let base = demosaic(&m, g).unwrap();
            let scaled = demosaic(&m.scaled(a), g).unwrap();
            for (b, s) in base.values().iter().zip(scaled.values()) {
                prop_assert!((b * a - s).abs() < 1e-12);
            }
        }
    }
}
