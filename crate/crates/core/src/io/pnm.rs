//! Binary portable pixmaps: P6 (RGB) and P5 (gray), maxval 255 only.

use std::path::Path;

use super::StorageError;
use crate::image::{GrayImage, RgbImage};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Pixmap {
    Rgb(RgbImage),
    Gray(GrayImage),
}

fn header(magic: &str, w: usize, h: usize) -> Vec<u8> {
    format!("{magic}\n{w} {h}\n255\n").into_bytes()
}

pub fn encode_ppm(image: &RgbImage) -> Vec<u8> {
    let mut out = header("P6", image.width(), image.height());
    out.extend_from_slice(image.data());
    out
}

pub fn encode_pgm(image: &GrayImage) -> Vec<u8> {
    let mut out = header("P5", image.width(), image.height());
    out.extend_from_slice(image.data());
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Cursor<'_> {
    /// Skips whitespace and `#` comments running to end of line.
    fn skip_space(&mut self) {
        while let Some(&c) = self.bytes.get(self.pos) {
            if c == b'#' {
                while self.bytes.get(self.pos).is_some_and(|&c| c != b'\n' && c != b'\r') {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<u32, StorageError> {
        self.skip_space();
        let start = self.pos;
        while self.bytes.get(self.pos).is_some_and(u8::is_ascii_digit) {
            self.pos += 1;
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| StorageError::MalformedHeader(format!("expected {what} at byte {start}")))
    }
}

pub fn decode_pnm(bytes: &[u8]) -> Result<Pixmap, StorageError> {
    let channels = match bytes.get(0..2) {
        Some(b"P6") => 3,
        Some(b"P5") => 1,
        _ => return Err(StorageError::MalformedHeader("expected P5 or P6 magic".into())),
    };
    let mut cur = Cursor { bytes, pos: 2 };
    let w = cur.number("width")? as usize;
    let h = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if w == 0 || h == 0 {
        return Err(StorageError::MalformedHeader(format!("empty image {w}x{h}")));
    }
    if maxval != 255 {
        return Err(StorageError::UnsupportedMaxval(maxval));
    }
    // exactly one whitespace byte separates the header from the raster
    match bytes.get(cur.pos) {
        Some(c) if c.is_ascii_whitespace() => cur.pos += 1,
        _ => return Err(StorageError::MalformedHeader("missing whitespace after maxval".into())),
    }
    let need = w * h * channels;
    let raster = &bytes[cur.pos..];
    if raster.len() < need {
        return Err(StorageError::TruncatedFile { offset: bytes.len() as u64 });
    }
    if raster.len() > need {
        return Err(StorageError::TrailingBytes { offset: (cur.pos + need) as u64, extra: (raster.len() - need) as u64 });
    }
    let data = raster.to_vec();
    Ok(match channels {
        3 => Pixmap::Rgb(RgbImage::new(w, h, data)),
        _ => Pixmap::Gray(GrayImage::new(w, h, data)),
    })
}

fn read_pixmap(path: &Path) -> Result<Pixmap, StorageError> {
    decode_pnm(&std::fs::read(path).map_err(StorageError::Source)?)
}

pub fn read_image(path: impl AsRef<Path>) -> Result<RgbImage, StorageError> {
    match read_pixmap(path.as_ref())? {
        Pixmap::Rgb(img) => Ok(img),
        Pixmap::Gray(_) => Err(StorageError::MalformedHeader("expected P6, found P5".into())),
    }
}

pub fn read_gray(path: impl AsRef<Path>) -> Result<GrayImage, StorageError> {
    match read_pixmap(path.as_ref())? {
        Pixmap::Gray(img) => Ok(img),
        Pixmap::Rgb(_) => Err(StorageError::MalformedHeader("expected P5, found P6".into())),
    }
}

pub fn write_image(path: impl AsRef<Path>, image: &RgbImage) -> Result<(), StorageError> {
    std::fs::write(path, encode_ppm(image)).map_err(StorageError::SinkFailure)
}

pub fn write_gray(path: impl AsRef<Path>, image: &GrayImage) -> Result<(), StorageError> {
    std::fs::write(path, encode_pgm(image)).map_err(StorageError::SinkFailure)
}
