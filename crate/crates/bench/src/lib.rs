//! Criterion benchmarks live in `benches/`. This crate only hosts the
//! shared fixtures.

use evla_core::sim::random_stream;
use evla_core::{EventStream, SensorGeometry};

/// Deterministic random stream on the default sensor.
pub fn fixture(events: usize) -> EventStream {
    random_stream(events, SensorGeometry::default(), 42)
}
