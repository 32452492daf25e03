use crate::event::SensorGeometry;
use crate::window::Window;

/// Per-pixel event counts, polarity ignored. Row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountMap {
    pub(crate) geometry: SensorGeometry,
    pub(crate) values: Vec<u32>,
}

/// Per-pixel polarity sums. Row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumMap {
    pub(crate) geometry: SensorGeometry,
    pub(crate) values: Vec<i32>,
}

impl CountMap {
    pub fn zeros(geometry: SensorGeometry) -> Self {
        Self {
            geometry,
            values: vec![0; geometry.pixel_count()],
        }
    }

    pub fn values(&self) -> &[u32] {
        &self.values
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.values[y * self.geometry.width() + x]
    }

    pub fn total(&self) -> u64 {
        self.values.iter().map(|&v| v as u64).sum()
    }
}

impl SumMap {
    pub fn values(&self) -> &[i32] {
        &self.values
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    pub fn get(&self, x: usize, y: usize) -> i32 {
        self.values[y * self.geometry.width() + x]
    }
}

pub fn accumulate_count(window: &Window<'_>, geometry: SensorGeometry) -> CountMap {
    let mut map = CountMap::zeros(geometry);
    for e in window.events() {
        map.values[geometry.index(e.x, e.y)] += 1;
    }
    map
}

pub fn accumulate_sum(window: &Window<'_>, geometry: SensorGeometry) -> SumMap {
    let mut values = vec![0i32; geometry.pixel_count()];
    for e in window.events() {
        values[geometry.index(e.x, e.y)] += e.p.sign();
    }
    SumMap { geometry, values }
}
