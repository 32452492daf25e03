use super::ReprError;
use crate::event::SensorGeometry;
use crate::window::Window;

/// One frame period at 30 FPS.
pub const DEFAULT_TAU_US: f64 = 30_000.0;

/// `exp(-(t_e - t_last) / tau)` per pixel, 0 where no event fired.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeSurface {
    width: usize,
    height: usize,
    tau_us: f64,
    values: Vec<f64>,
}

impl TimeSurface {
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn tau_us(&self) -> f64 {
        self.tau_us
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }
}

pub fn time_surface(
    window: &Window<'_>,
    t_e: u64,
    tau_us: f64,
    geometry: SensorGeometry,
) -> Result<TimeSurface, ReprError> {
    if !(tau_us > 0.0 && tau_us.is_finite()) {
        return Err(ReprError::InvalidTau(tau_us));
    }
    let mut last: Vec<Option<u64>> = vec![None; geometry.pixel_count()];
    for e in window.events() {
        if e.t > t_e {
            return Err(ReprError::QueryBeforeEvents {
                t_query: t_e,
                t_event: e.t,
            });
        }
        last[geometry.index(e.x, e.y)] = Some(e.t);
    }
    let values = last
        .into_iter()
        .map(|t| t.map_or(0.0, |t| (-((t_e - t) as f64) / tau_us).exp()))
        .collect();
    Ok(TimeSurface {
        width: geometry.width(),
        height: geometry.height(),
        tau_us,
        values,
    })
}
