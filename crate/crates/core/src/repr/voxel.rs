use super::{ReprError, ScalarGrid};
use crate::event::SensorGeometry;
use crate::window::Window;

pub const DEFAULT_BINS: usize = 5;

/// Polarity-signed temporal histogram, `bins x height x width`.
#[derive(Clone, Debug, PartialEq)]
pub struct VoxelGrid {
    bins: usize,
    width: usize,
    height: usize,
    values: Vec<f64>,
}

impl VoxelGrid {
    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn bin(&self, b: usize) -> VoxelBin<'_> {
        let n = self.width * self.height;
        VoxelBin {
            width: self.width,
            height: self.height,
            values: &self.values[b * n..(b + 1) * n],
        }
    }

    pub fn get(&self, b: usize, x: usize, y: usize) -> f64 {
        self.values[(b * self.height + y) * self.width + x]
    }
}

/// Borrowed single temporal bin, normalizable like any scalar map.
pub struct VoxelBin<'a> {
    width: usize,
    height: usize,
    values: &'a [f64],
}

impl ScalarGrid for VoxelBin<'_> {
    fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    fn sample(&self, index: usize) -> f64 {
        self.values[index]
    }
}

/// Each event's polarity is split linearly between the two temporal bins
/// nearest to its normalized time `(t - t0) / (t_e - t0) * (bins - 1)`,
/// where `t0` is the window's time origin. A zero-length span puts all mass
/// in bin 0.
pub fn voxel_grid(window: &Window<'_>, bins: usize, geometry: SensorGeometry) -> Result<VoxelGrid, ReprError> {
    if bins == 0 {
        return Err(ReprError::ZeroBins);
    }
    let (w, h) = (geometry.width(), geometry.height());
    let mut values = vec![0.0; bins * w * h];
    let t0 = window.time_origin();
    let t1 = window.t_query();
    let span = t1.saturating_sub(t0);
    for e in window.events() {
        let pos = if span == 0 {
            0.0
        } else {
            (e.t.saturating_sub(t0)) as f64 / span as f64 * (bins - 1) as f64
        };
        let lower = (pos.floor() as usize).min(bins - 1);
        let frac = pos - lower as f64;
        let pol = e.p.sign() as f64;
        let pixel = geometry.index(e.x, e.y);
        values[lower * w * h + pixel] += pol * (1.0 - frac);
        if frac > 0.0 && lower + 1 < bins {
            values[(lower + 1) * w * h + pixel] += pol * frac;
        }
    }
    Ok(VoxelGrid {
        bins,
        width: w,
        height: h,
        values,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::{validate_stream, Event, EventStream, Polarity};
    use crate::repr::accumulate_sum;
    use crate::window::{duration_window, recent_count_window};
    use proptest::prelude::*;
    use std::num::NonZeroUsize;

    fn g() -> SensorGeometry {
        SensorGeometry::new(6, 5).unwrap()
    }

    #[test]
    fn midpoint_event_splits_evenly() {
        let s = validate_stream(vec![Event::new(150, 2, 3, Polarity::On)], g()).unwrap();
        let w = duration_window(&s, 200, 100);
        let v = voxel_grid(&w, 2, g()).unwrap();
        assert_eq!(v.get(0, 2, 3), 0.5);
        assert_eq!(v.get(1, 2, 3), 0.5);
    }

    #[test]
    fn zero_span_goes_to_first_bin() {
        let s = validate_stream(vec![Event::new(7, 1, 1, Polarity::Off)], g()).unwrap();
        let w = recent_count_window(&s, 7, NonZeroUsize::new(3).unwrap());
        let v = voxel_grid(&w, 4, g()).unwrap();
        assert_eq!(v.get(0, 1, 1), -1.0);
        assert_eq!(v.values().iter().map(|x| x.abs()).sum::<f64>(), 1.0);
        assert_eq!(voxel_grid(&w, 0, g()).unwrap_err(), ReprError::ZeroBins);
    }

    fn random_stream() -> impl Strategy<Value = EventStream> {
        prop::collection::vec((0u64..1000, 0u16..6, 0u16..5, any::<bool>()), 1..150).prop_map(|mut v| {
            v.sort_by_key(|e| e.0);
            let events = v
                .into_iter()
                .map(|(t, x, y, on)| Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off }))
                .collect();
            validate_stream(events, g()).unwrap()
        })
    }

    proptest! {
        #[test]
        fn single_bin_is_sum_map(s in random_stream(), n in 1usize..200) {
            let w = recent_count_window(&s, 1000, NonZeroUsize::new(n).unwrap());
            let v = voxel_grid(&w, 1, g()).unwrap();
            let sum = accumulate_sum(&w, g());
            for (a, b) in v.values().iter().zip(sum.values()) {
                prop_assert_eq!(*a, *b as f64);
            }
        }

        #[test]
        fn unit_mass_per_event(s in random_stream(), bins in 1usize..8, delta in 1u64..1500) {
            let w = duration_window(&s, 1000, delta);
            let v = voxel_grid(&w, bins, g()).unwrap();
            // per-event oracle: rebuild each event's contribution separately
            let mut total = 0.0;
            for e in w.events() {
                let one = validate_stream(vec![*e], g()).unwrap();
                // same t_e and delta, so the same time origin as the parent window
                let single = duration_window(&one, 1000, delta);
                let contrib = voxel_grid(&single, bins, g()).unwrap();
                let mass: f64 = contrib.values().iter().map(|x| x.abs()).sum();
                prop_assert!((mass - 1.0).abs() < 1e-12);
                total += mass;
            }
            let all: f64 = v.values().iter().map(|x| x.abs()).sum();
            // cancellation can only reduce the aggregate magnitude
            prop_assert!(all <= total + 1e-9);
            prop_assert!((total - w.len() as f64).abs() < 1e-9);
        }
    }
}
