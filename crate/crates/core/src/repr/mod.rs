//! Dense, encoder-compatible representations of an event window.
//!
//! The primary path is count accumulation, min-max normalization and
//! bilinear demosaicing into a three-channel frame. Signed sums, exponential
//! time surfaces and temporal voxel grids are provided as alternatives.

mod accumulate;
mod demosaic;
mod normalize;
mod time_surface;
mod voxel;

pub use accumulate::{accumulate_count, accumulate_sum, CountMap, SumMap};
pub use demosaic::{demosaic, EventFrame};
pub use normalize::{minmax_normalize, NormalizedMap, ScalarGrid};
pub use time_surface::{time_surface, TimeSurface, DEFAULT_TAU_US};
pub use voxel::{voxel_grid, VoxelGrid, DEFAULT_BINS};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ReprError {
    #[error("time-surface decay constant must be positive and finite, got {0}")]
    InvalidTau(f64),
    #[error("query time {t_query} us precedes a window event at {t_event} us")]
    QueryBeforeEvents { t_query: u64, t_event: u64 },
    #[error("voxel grid needs at least one bin")]
    ZeroBins,
    #[error("map is {got_w}x{got_h} but geometry is {want_w}x{want_h}")]
    GeometryMismatch {
        got_w: usize,
        got_h: usize,
        want_w: usize,
        want_h: usize,
    },
}

/// Which representation to render; mirrors the representation ablation axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Count,
    Sum,
    TimeSurface,
    Voxel,
}

impl std::str::FromStr for Representation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "count" => Ok(Representation::Count),
            "sum" => Ok(Representation::Sum),
            "timesurface" | "time-surface" => Ok(Representation::TimeSurface),
            "voxel" => Ok(Representation::Voxel),
            other => Err(format!("unknown representation `{other}`")),
        }
    }
}

impl std::fmt::Display for Representation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Representation::Count => "count",
            Representation::Sum => "sum",
            Representation::TimeSurface => "timesurface",
            Representation::Voxel => "voxel",
        })
    }
}

/// Knobs for [`render_maps`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderOptions {
    pub tau_us: f64,
    pub bins: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self { tau_us: DEFAULT_TAU_US, bins: DEFAULT_BINS }
    }
}

/// Renders a window to `[0, 1]` maps anchored at its query time: one map,
/// or one per temporal bin for voxel grids. Counts, sums and voxel bins are
/// min-max normalized; time surfaces are already in range.
pub fn render_maps(
    window: &crate::window::Window<'_>,
    repr: Representation,
    options: &RenderOptions,
) -> Result<Vec<NormalizedMap>, ReprError> {
    let g = window.geometry();
    Ok(match repr {
        Representation::Count => vec![minmax_normalize(&accumulate_count(window, g))],
        Representation::Sum => vec![minmax_normalize(&accumulate_sum(window, g))],
        Representation::TimeSurface => {
            let ts = time_surface(window, window.t_query(), options.tau_us, g)?;
            vec![NormalizedMap::from_values(g.width(), g.height(), ts.values().to_vec())]
        }
        Representation::Voxel => {
            let v = voxel_grid(window, options.bins, g)?;
            (0..v.bins()).map(|b| minmax_normalize(&v.bin(b))).collect()
        }
    })
}
