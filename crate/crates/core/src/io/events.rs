//! Event file layout:
//!
//! ```text
//! offset  size  field
//!      0     4  magic "EVLA"
//!      4     2  version (u16) = 1
//!      6     2  width (u16)
//!      8     2  height (u16)
//!     10     1  bayer code (0 RGGB, 1 BGGR, 2 GRBG, 3 GBRG)
//!     11     5  reserved, zero
//!     16     8  record count (u64)
//!     24        records, 16 bytes each:
//!               t (u64 us) | x (u16) | y (u16) | p (i8, +1/-1) | 3 reserved zero bytes
//! ```

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use super::{read_all, StorageError};
use crate::event::{validate_stream, BayerPattern, Event, EventStream, Polarity, SensorGeometry};

pub const MAGIC: [u8; 4] = *b"EVLA";
pub const VERSION: u16 = 1;
pub const HEADER_LEN: usize = 24;
pub const RECORD_LEN: usize = 16;

fn header(stream: &EventStream) -> [u8; HEADER_LEN] {
    let g = stream.geometry();
    let mut h = [0u8; HEADER_LEN];
    h[0..4].copy_from_slice(&MAGIC);
    h[4..6].copy_from_slice(&VERSION.to_le_bytes());
    h[6..8].copy_from_slice(&(g.width() as u16).to_le_bytes());
    h[8..10].copy_from_slice(&(g.height() as u16).to_le_bytes());
    h[10] = g.bayer().code();
    h[16..24].copy_from_slice(&(stream.len() as u64).to_le_bytes());
    h
}

#[inline]
fn record(e: &Event) -> [u8; RECORD_LEN] {
    let mut r = [0u8; RECORD_LEN];
    r[0..8].copy_from_slice(&e.t.to_le_bytes());
    r[8..10].copy_from_slice(&e.x.to_le_bytes());
    r[10..12].copy_from_slice(&e.y.to_le_bytes());
    r[12] = e.p.sign() as i8 as u8;
    r
}

pub fn encode_events(stream: &EventStream) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + stream.len() * RECORD_LEN);
    out.extend_from_slice(&header(stream));
    for e in stream.events() {
        out.extend_from_slice(&record(e));
    }
    out
}

/// Returns the number of bytes written.
pub fn write_events(stream: &EventStream, mut sink: impl Write) -> Result<u64, StorageError> {
    sink.write_all(&header(stream)).map_err(StorageError::SinkFailure)?;
    let mut chunk = Vec::with_capacity(RECORD_LEN * 4096);
    for events in stream.events().chunks(4096) {
        chunk.clear();
        for e in events {
            chunk.extend_from_slice(&record(e));
        }
        sink.write_all(&chunk).map_err(StorageError::SinkFailure)?;
    }
    sink.flush().map_err(StorageError::SinkFailure)?;
    Ok((HEADER_LEN + stream.len() * RECORD_LEN) as u64)
}

pub fn write_events_file(stream: &EventStream, path: impl AsRef<Path>) -> Result<u64, StorageError> {
    let f = File::create(path).map_err(StorageError::SinkFailure)?;
    write_events(stream, BufWriter::new(f))
}

pub fn read_events(source: impl Read) -> Result<EventStream, StorageError> {
    decode_events(&read_all(source)?)
}

pub fn read_events_file(path: impl AsRef<Path>) -> Result<EventStream, StorageError> {
    let bytes = std::fs::read(path).map_err(StorageError::Source)?;
    decode_events(&bytes)
}

/// Parses and validates an in-memory event file.
pub fn decode_events(bytes: &[u8]) -> Result<EventStream, StorageError> {
    if bytes.len() < 4 {
        return Err(StorageError::TruncatedFile { offset: bytes.len() as u64 });
    }
    let magic: [u8; 4] = bytes[0..4].try_into().unwrap();
    if magic != MAGIC {
        return Err(StorageError::BadMagic { found: magic, expected: MAGIC });
    }
    if bytes.len() < HEADER_LEN {
        return Err(StorageError::TruncatedFile { offset: bytes.len() as u64 });
    }
    let u16_at = |i: usize| u16::from_le_bytes([bytes[i], bytes[i + 1]]);
    let version = u16_at(4);
    if version != VERSION {
        return Err(StorageError::UnsupportedVersion(version));
    }
    let bayer = BayerPattern::from_code(bytes[10])
        .ok_or_else(|| StorageError::InvalidRecord { index: 0, reason: format!("unknown bayer code {}", bytes[10]) })?;
    let geometry = SensorGeometry::with_pattern(u16_at(6), u16_at(8), bayer)?;
    let count = u64::from_le_bytes(bytes[16..24].try_into().unwrap());

    let body = &bytes[HEADER_LEN..];
    let available = (body.len() / RECORD_LEN) as u64;
    if available < count {
        return Err(StorageError::TruncatedFile { offset: (HEADER_LEN as u64) + available * RECORD_LEN as u64 });
    }
    let expected = count as usize * RECORD_LEN;
    if body.len() > expected {
        return Err(StorageError::TrailingBytes {
            offset: (HEADER_LEN + expected) as u64,
            extra: (body.len() - expected) as u64,
        });
    }

    let mut events = Vec::with_capacity(count as usize);
    for (i, r) in body.chunks_exact(RECORD_LEN).enumerate() {
        let p = Polarity::from_i8(r[12] as i8)
            .ok_or_else(|| StorageError::InvalidRecord { index: i as u64, reason: format!("polarity byte {}", r[12] as i8) })?;
        events.push(Event {
            t: u64::from_le_bytes(r[0..8].try_into().unwrap()),
            x: u16::from_le_bytes([r[8], r[9]]),
            y: u16::from_le_bytes([r[10], r[11]]),
            p,
        });
    }
    Ok(validate_stream(events, geometry)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event::EventError;

    fn stream(events: Vec<Event>) -> EventStream {
        validate_stream(events, SensorGeometry::default()).unwrap()
    }

    #[test]
    fn sizes() {
        let empty = stream(vec![]);
        assert_eq!(encode_events(&empty).len(), 24);
        let mut sink = Vec::new();
        assert_eq!(write_events(&empty, &mut sink).unwrap(), 24);
        let one = stream(vec![Event::new(7, 1, 2, Polarity::Off)]);
        let bytes = encode_events(&one);
        assert_eq!(bytes.len(), 40);
        assert_eq!(&bytes[24..], &[7, 0, 0, 0, 0, 0, 0, 0, 1, 0, 2, 0, 0xff, 0, 0, 0]);
    }

    #[test]
    fn header_layout() {
        let g = SensorGeometry::with_pattern(346, 260, BayerPattern::Grbg).unwrap();
        let s = validate_stream(vec![Event::new(1, 0, 0, Polarity::On); 3], g).unwrap();
        let b = encode_events(&s);
        assert_eq!(&b[0..4], b"EVLA");
        assert_eq!(&b[4..6], &[1, 0]);
        assert_eq!(u16::from_le_bytes([b[6], b[7]]), 346);
        assert_eq!(u16::from_le_bytes([b[8], b[9]]), 260);
        assert_eq!(b[10], 2);
        assert_eq!(&b[11..16], &[0; 5]);
        assert_eq!(u64::from_le_bytes(b[16..24].try_into().unwrap()), 3);
        assert_eq!(decode_events(&b).unwrap(), s);
    }

    #[test]
    fn corrupt_inputs() {
        let s = stream(vec![Event::new(5, 1, 1, Polarity::On), Event::new(9, 2, 3, Polarity::Off)]);
        let good = encode_events(&s);

        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(decode_events(&bad), Err(StorageError::BadMagic { .. })));

        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(decode_events(&bad), Err(StorageError::UnsupportedVersion(2))));

        assert!(matches!(decode_events(&good[..good.len() - 3]), Err(StorageError::TruncatedFile { offset: 40 })));
        assert!(matches!(decode_events(&good[..10]), Err(StorageError::TruncatedFile { offset: 10 })));

        let mut bad = good.clone();
        bad.push(0);
        assert!(matches!(decode_events(&bad), Err(StorageError::TrailingBytes { offset: 56, extra: 1 })));

        let mut bad = good.clone();
        bad[24 + 12] = 0;
        assert!(matches!(decode_events(&bad), Err(StorageError::InvalidRecord { index: 0, .. })));

        // swap the two records: validator rejects the order
        let mut bad = good.clone();
        let (a, b) = (bad[24..40].to_vec(), bad[40..56].to_vec());
        bad[24..40].copy_from_slice(&b);
        bad[40..56].copy_from_slice(&a);
        assert!(matches!(decode_events(&bad), Err(StorageError::Invalid(EventError::UnsortedTimestamps { .. }))));

        let mut bad = good;
        bad[24 + 8] = 0xff;
        bad[24 + 9] = 0xff;
        assert!(matches!(decode_events(&bad), Err(StorageError::Invalid(EventError::OutOfBounds { .. }))));
    }

    #[test]
    fn sink_failure_surfaces() {
        struct Broken;
        impl Write for Broken {
            fn write(&mut self, _: &[u8]) -> std::io::Result<usize> {
                Err(std::io::Error::other("disk full"))
            }
            fn flush(&mut self) -> std::io::Result<()> {
                Ok(())
            }
        }
        assert!(matches!(write_events(&stream(vec![]), Broken), Err(StorageError::SinkFailure(_))));
    }
}
