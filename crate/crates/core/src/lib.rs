//! Event-camera processing core: stream model, windowing, frame-like
//! representations, overlay and adapter fusion, a degradation simulator and
//! bit-exact file formats.

pub mod event;
pub mod fusion;
pub mod image;
pub mod io;
pub mod repr;
pub mod sim;
pub mod window;

pub use event::{
    event_rate, validate_stream, BayerPattern, CfaColor, Event, EventError, EventStream, Polarity, SensorGeometry,
};
pub use fusion::{AdapterConfig, AdapterParams, FusionError, PolarityColorMap};
pub use image::{GrayImage, RgbFrame, RgbImage};
pub use io::StorageError;
pub use repr::{render_maps, CountMap, EventFrame, NormalizedMap, RenderOptions, ReprError, Representation};
pub use sim::{DegradeConfig, FrameSequence, SceneConfig, SimError};
pub use window::{duration_window, recent_count_window, Window, WindowPolicy};
