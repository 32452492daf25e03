//! Event selection for a single RGB observation.
//!
//! Two families: the recent-count window (last `N` events at or before the
//! exposure end) and the fixed-duration window `(t_e - delta, t_e]`. Both are
//! zero-copy index ranges into the parent stream.

use std::num::NonZeroUsize;
use std::ops::Range;

use crate::event::{Event, EventStream, SensorGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum WindowPolicy {
    RecentCount(NonZeroUsize),
    /// Window length in microseconds.
    Duration(u64),
}

impl WindowPolicy {
    pub fn select<'a>(&self, stream: &'a EventStream, t_query: u64) -> Window<'a> {
        match *self {
            WindowPolicy::RecentCount(n) => recent_count_window(stream, t_query, n),
            WindowPolicy::Duration(delta) => duration_window(stream, t_query, delta),
        }
    }
}

impl std::str::FromStr for WindowPolicy {
    type Err = String;

    /// Parses `count:N` or `duration:MS` (milliseconds, may be fractional).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (kind, value) = s
            .split_once(':')
            .ok_or_else(|| format!("window `{s}` must look like count:N or duration:MS"))?;
        match kind {
            "count" => {
                let n: usize = value.parse().map_err(|e| format!("bad count `{value}`: {e}"))?;
                NonZeroUsize::new(n)
                    .map(WindowPolicy::RecentCount)
                    .ok_or_else(|| "count window needs N >= 1".to_string())
            }
            "duration" => {
                let ms: f64 = value.parse().map_err(|e| format!("bad duration `{value}`: {e}"))?;
                if !ms.is_finite() || ms < 0.0 {
                    return Err(format!("duration must be a non-negative number of ms, got {value}"));
                }
                Ok(WindowPolicy::Duration((ms * 1000.0).round() as u64))
            }
            other => Err(format!("unknown window kind `{other}`")),
        }
    }
}

/// A contiguous slice of a stream anchored at a query time.
#[derive(Clone, Copy, Debug)]
pub struct Window<'a> {
    stream: &'a EventStream,
    start: usize,
    end: usize,
    t_query: u64,
    policy: WindowPolicy,
    shortfall: bool,
}

impl<'a> Window<'a> {
    #[inline]
    pub fn events(&self) -> &'a [Event] {
        &self.stream.events()[self.start..self.end]
    }

    /// Index range into the parent stream.
    pub fn range(&self) -> Range<usize> {
        self.start..self.end
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn t_query(&self) -> u64 {
        self.t_query
    }

    pub fn policy(&self) -> WindowPolicy {
        self.policy
    }

    pub fn geometry(&self) -> SensorGeometry {
        self.stream.geometry()
    }

    pub fn stream(&self) -> &'a EventStream {
        self.stream
    }

    /// Set when a recent-count window found fewer than `N` causal events.
    pub fn shortfall(&self) -> bool {
        self.shortfall
    }

    /// Time covered by the contained events, in microseconds.
    pub fn span_us(&self) -> u64 {
        match (self.events().first(), self.events().last()) {
            (Some(a), Some(b)) => b.t - a.t,
            _ => 0,
        }
    }

    /// Nominal start of the window's time extent: `t_e - delta` for duration
    /// windows, the oldest contained event for count windows.
    pub fn time_origin(&self) -> u64 {
        match self.policy {
            WindowPolicy::Duration(delta) => self.t_query.saturating_sub(delta),
            WindowPolicy::RecentCount(_) => self.events().first().map_or(self.t_query, |e| e.t),
        }
    }
}

pub fn recent_count_window(stream: &EventStream, t_e: u64, n: NonZeroUsize) -> Window<'_> {
    let end = stream.prefix_len(t_e);
    let start = end.saturating_sub(n.get());
    Window {
        stream,
        start,
        end,
        t_query: t_e,
        policy: WindowPolicy::RecentCount(n),
        shortfall: end < n.get(),
    }
}

/// Events with `t_e - delta < t <= t_e`. `delta = 0` is always empty.
pub fn duration_window(stream: &EventStream, t_e: u64, delta: u64) -> Window<'_> {
    let end = stream.prefix_len(t_e);
    let start = match t_e.checked_sub(delta) {
        Some(lower) => stream.prefix_len(lower),
        None => 0,
    };
    Window {
        stream,
        start: start.min(end),
        end,
        t_query: t_e,
        policy: WindowPolicy::Duration(delta),
        shortfall: false,
    }
}
