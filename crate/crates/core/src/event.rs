//! Event datum, sensor geometry and the validated stream container.
//!
//! Timestamps are integer microseconds throughout. Equal timestamps are
//! allowed; stream order is the tiebreaker for every downstream consumer.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default DAVIS346 resolution.
pub const DAVIS346_WIDTH: u16 = 346;
pub const DAVIS346_HEIGHT: u16 = 260;

/// Sign of the logged brightness change.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[repr(i8)]
pub enum Polarity {
    On = 1,
    Off = -1,
}

impl Polarity {
    #[inline]
    pub fn sign(self) -> i32 {
        self as i8 as i32
    }

    pub fn from_i8(v: i8) -> Option<Self> {
        match v {
            1 => Some(Polarity::On),
            -1 => Some(Polarity::Off),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Event {
    /// Microseconds.
    pub t: u64,
    pub x: u16,
    pub y: u16,
    pub p: Polarity,
}

impl Event {
    pub fn new(t: u64, x: u16, y: u16, p: Polarity) -> Self {
        Self { t, x, y, p }
    }
}

/// Color of the top-left 2x2 cell of the color filter array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BayerPattern {
    #[default]
    Rggb,
    Bggr,
    Grbg,
    Gbrg,
}

/// Channel index into an interleaved RGB triple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CfaColor {
    Red = 0,
    Green = 1,
    Blue = 2,
}

impl BayerPattern {
    pub fn code(self) -> u8 {
        match self {
            BayerPattern::Rggb => 0,
            BayerPattern::Bggr => 1,
            BayerPattern::Grbg => 2,
            BayerPattern::Gbrg => 3,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(BayerPattern::Rggb),
            1 => Some(BayerPattern::Bggr),
            2 => Some(BayerPattern::Grbg),
            3 => Some(BayerPattern::Gbrg),
            _ => None,
        }
    }

    /// Filter color at pixel (x, y).
    #[inline]
    pub fn color_at(self, x: usize, y: usize) -> CfaColor {
        use CfaColor::*;
        let cell = [
            [Red, Green, Green, Blue],
            [Blue, Green, Green, Red],
            [Green, Red, Blue, Green],
            [Green, Blue, Red, Green],
        ][self.code() as usize];
        cell[(y & 1) * 2 + (x & 1)]
    }
}

impl fmt::Display for BayerPattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BayerPattern::Rggb => "RGGB",
            BayerPattern::Bggr => "BGGR",
            BayerPattern::Grbg => "GRBG",
            BayerPattern::Gbrg => "GBRG",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for BayerPattern {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "RGGB" => Ok(BayerPattern::Rggb),
            "BGGR" => Ok(BayerPattern::Bggr),
            "GRBG" => Ok(BayerPattern::Grbg),
            "GBRG" => Ok(BayerPattern::Gbrg),
            other => Err(format!("unknown bayer pattern `{other}`")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawGeometry", into = "RawGeometry")]
pub struct SensorGeometry {
    width: u16,
    height: u16,
    bayer: BayerPattern,
}

#[derive(Serialize, Deserialize)]
struct RawGeometry {
    width: u16,
    height: u16,
    #[serde(default)]
    bayer: BayerPattern,
}

impl TryFrom<RawGeometry> for SensorGeometry {
    type Error = EventError;

    fn try_from(raw: RawGeometry) -> Result<Self, Self::Error> {
        SensorGeometry::with_pattern(raw.width, raw.height, raw.bayer)
    }
}

impl From<SensorGeometry> for RawGeometry {
    fn from(g: SensorGeometry) -> Self {
        RawGeometry {
            width: g.width,
            height: g.height,
            bayer: g.bayer,
        }
    }
}

impl Default for SensorGeometry {
    fn default() -> Self {
        Self {
            width: DAVIS346_WIDTH,
            height: DAVIS346_HEIGHT,
            bayer: BayerPattern::Rggb,
        }
    }
}

impl SensorGeometry {
    pub fn new(width: u16, height: u16) -> Result<Self, EventError> {
        Self::with_pattern(width, height, BayerPattern::Rggb)
    }

    pub fn with_pattern(width: u16, height: u16, bayer: BayerPattern) -> Result<Self, EventError> {
        if width < 2 || height < 2 {
            return Err(EventError::InvalidGeometry { width, height });
        }
        Ok(Self {
            width,
            height,
            bayer,
        })
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width as usize
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height as usize
    }

    #[inline]
    pub fn bayer(&self) -> BayerPattern {
        self.bayer
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width() * self.height()
    }

    #[inline]
    pub fn contains(&self, x: u16, y: u16) -> bool {
        x < self.width && y < self.height
    }

    /// Row-major linear index of pixel (x, y).
    #[inline]
    pub fn index(&self, x: u16, y: u16) -> usize {
        y as usize * self.width() + x as usize
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EventError {
    #[error("sensor geometry {width}x{height} is too small (minimum 2x2)")]
    InvalidGeometry { width: u16, height: u16 },
    #[error("timestamps decrease at index {index}: {previous} us followed by {t} us")]
    UnsortedTimestamps { index: usize, previous: u64, t: u64 },
    #[error("event {index} at ({}, {}) lies outside the sensor", event.x, event.y)]
    OutOfBounds { index: usize, event: Event },
    #[error("interval ({t0}, {t1}] is empty")]
    EmptyInterval { t0: u64, t1: u64 },
}

/// Timestamp-ordered, bounds-checked event sequence.
///
/// Only obtainable through [`validate_stream`], so holding one is proof
/// that both invariants hold.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EventStream {
    events: Vec<Event>,
    geometry: SensorGeometry,
}

/// Checks ordering and bounds, taking ownership without copying.
pub fn validate_stream(events: Vec<Event>, geometry: SensorGeometry) -> Result<EventStream, EventError> {
    let mut previous = 0u64;
    for (index, e) in events.iter().enumerate() {
        if e.t < previous {
            return Err(EventError::UnsortedTimestamps {
                index,
                previous,
                t: e.t,
            });
        }
        if !geometry.contains(e.x, e.y) {
            return Err(EventError::OutOfBounds { index, event: *e });
        }
        previous = e.t;
    }
    Ok(EventStream { events, geometry })
}

impl EventStream {
    pub fn empty(geometry: SensorGeometry) -> Self {
        Self {
            events: Vec::new(),
            geometry,
        }
    }

    #[inline]
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    #[inline]
    pub fn geometry(&self) -> SensorGeometry {
        self.geometry
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.events.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn into_events(self) -> Vec<Event> {
        self.events
    }

    /// Number of events with `t <= t_query`; the end of the causal prefix.
    #[inline]
    pub fn prefix_len(&self, t_query: u64) -> usize {
        self.events.partition_point(|e| e.t <= t_query)
    }

    pub fn first_time(&self) -> Option<u64> {
        self.events.first().map(|e| e.t)
    }

    pub fn last_time(&self) -> Option<u64> {
        self.events.last().map(|e| e.t)
    }
}

/// Events per second over the half-open interval `(t0, t1]`.
pub fn event_rate(stream: &EventStream, t0: u64, t1: u64) -> Result<f64, EventError> {
    if t1 <= t0 {
        return Err(EventError::EmptyInterval { t0, t1 });
    }
    let count = stream.prefix_len(t1) - stream.prefix_len(t0);
    Ok(count as f64 * 1e6 / (t1 - t0) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn geom() -> SensorGeometry {
        SensorGeometry::default()
    }

    fn ev(t: u64) -> Event {
        Event::new(t, 0, 0, Polarity::On)
    }

    #[test]
    fn empty_stream_is_valid() {
        let s = validate_stream(vec![], geom()).unwrap();
        assert!(s.is_empty());
    }

    #[test]
    fn unsorted_reports_first_offender() {
        let err = validate_stream(vec![ev(5), ev(3)], geom()).unwrap_err();
        assert_eq!(
            err,
            EventError::UnsortedTimestamps {
                index: 1,
                previous: 5,
                t: 3
            }
        );
    }

    #[test]
    fn out_of_bounds_rejected() {
        let bad = Event::new(1, 346, 0, Polarity::Off);
        let err = validate_stream(vec![ev(0), bad], geom()).unwrap_err();
        assert_eq!(err, EventError::OutOfBounds { index: 1, event: bad });
        let bad_y = Event::new(1, 0, 260, Polarity::Off);
        assert!(validate_stream(vec![bad_y], geom()).is_err());
    }

    #[test]
    fn equal_timestamps_allowed() {
        assert_eq!(validate_stream(vec![ev(4), ev(4), ev(4)], geom()).unwrap().len(), 3);
    }

    #[test]
    fn geometry_minimum() {
        assert!(SensorGeometry::new(1, 10).is_err());
        assert!(SensorGeometry::new(2, 2).is_ok());
        let g = SensorGeometry::default();
        assert_eq!((g.width(), g.height()), (346, 260));
    }

    #[test]
    fn bayer_codes_round_trip() {
        for code in 0..4 {
            let p = BayerPattern::from_code(code).unwrap();
            assert_eq!(p.code(), code);
            assert_eq!(p.to_string().parse::<BayerPattern>().unwrap(), p);
        }
        assert!(BayerPattern::from_code(4).is_none());
        assert_eq!(BayerPattern::Rggb.color_at(0, 0), CfaColor::Red);
        assert_eq!(BayerPattern::Rggb.color_at(1, 1), CfaColor::Blue);
        assert_eq!(BayerPattern::Gbrg.color_at(1, 0), CfaColor::Blue);
    }

    #[test]
    fn rate_in_keps_regime() {
        let events: Vec<_> = (0..87).map(|i| ev(1000 + i * 10)).collect();
        let s = validate_stream(events, geom()).unwrap();
        let r = event_rate(&s, 999, 1999).unwrap();
        assert_eq!(r, 87_000.0);
        assert_eq!(event_rate(&s, 5000, 6000).unwrap(), 0.0);
        assert!(matches!(event_rate(&s, 10, 10), Err(EventError::EmptyInterval { .. })));
    }

    fn sorted_events() -> impl Strategy<Value = Vec<Event>> {
        prop::collection::vec((0u64..5_000, 0u16..346, 0u16..260, any::<bool>()), 0..300).prop_map(|mut v| {
            v.sort_by_key(|e| e.0);
            v.into_iter()
                .map(|(t, x, y, on)| Event::new(t, x, y, if on { Polarity::On } else { Polarity::Off }))
                .collect()
        })
    }

    proptest! {
        #[test]
        fn validation_is_idempotent(events in sorted_events()) {
            let s = validate_stream(events.clone(), geom()).unwrap();
            prop_assert_eq!(s.events(), &events[..]);
            let again = validate_stream(s.clone().into_events(), geom()).unwrap();
            prop_assert_eq!(again, s);
        }

        #[test]
        fn rate_matches_brute_force(events in sorted_events(), t0 in 0u64..5_000, len in 1u64..5_000) {
            let s = validate_stream(events, geom()).unwrap();
            let t1 = t0 + len;
            let brute = s.events().iter().filter(|e| e.t > t0 && e.t <= t1).count() as f64 / (len as f64 / 1e6);
            let r = event_rate(&s, t0, t1).unwrap();
            prop_assert!((r - brute).abs() <= 1e-9 * brute.max(1.0));
        }

        #[test]
        fn rate_is_additive(events in sorted_events(), t0 in 0u64..2_000, a in 1u64..2_000, b in 1u64..2_000) {
            let s = validate_stream(events, geom()).unwrap();
            let (t1, t2) = (t0 + a, t0 + a + b);
            let left = event_rate(&s, t0, t1).unwrap() * a as f64;
            let right = event_rate(&s, t1, t2).unwrap() * b as f64;
            let whole = event_rate(&s, t0, t2).unwrap() * (a + b) as f64;
            prop_assert!((left + right - whole).abs() <= 1e-6 * whole.max(1.0));
        }
    }
}
