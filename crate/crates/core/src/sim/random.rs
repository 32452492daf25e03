use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::event::{validate_stream, Event, EventStream, Polarity, SensorGeometry};

/// `n` uniformly placed events with random polarity; timestamps advance by
/// 0, 1 or 2 microseconds so ties are common.
pub fn random_stream(n: usize, geometry: SensorGeometry, seed: u64) -> EventStream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (w, h) = (geometry.width() as u16, geometry.height() as u16);
    let mut t = 0u64;
    let events = (0..n)
        .map(|_| {
            t += rng.random_range(0..=2u64);
            let p = if rng.random::<bool>() { Polarity::On } else { Polarity::Off };
            Event::new(t, rng.random_range(0..w), rng.random_range(0..h), p)
        })
        .collect();
    validate_stream(events, geometry).expect("generated stream is ordered and in bounds")
}
